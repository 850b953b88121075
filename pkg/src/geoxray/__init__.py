"""Sampling and aliasing of the geodesic X-ray transform on constant-curvature disks."""

import os

# numba's default layer probes TBB first; the system TBB is too old and warns
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from .geometry import (  # noqa: E402
    DomainError,
    FanBeamPoint,
    GeometryParams,
    InteriorPoint,
    ParallelPoint,
    SingularConfiguration,
)
from .canrel import SIGMA1, SIGMA2, SIGMA3, SigmaSpec, b_numbers, canonical_graph  # noqa: E402
from .forward import Phantom, SinogramGrid, ImageGrid, WavePacketSpec, xray_transform  # noqa: E402
from .inversion import ReconstructionConfig, invert  # noqa: E402
from .sampling import make_plan, predict_artifacts  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "FanBeamPoint",
    "GeometryParams",
    "ImageGrid",
    "InteriorPoint",
    "ParallelPoint",
    "Phantom",
    "ReconstructionConfig",
    "SIGMA1",
    "SIGMA2",
    "SIGMA3",
    "SigmaSpec",
    "SingularConfiguration",
    "SinogramGrid",
    "WavePacketSpec",
    "b_numbers",
    "canonical_graph",
    "invert",
    "make_plan",
    "predict_artifacts",
    "xray_transform",
]
