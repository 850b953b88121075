import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def aliasing_suite():
    """Undersampling suite around one coherent state at kappa = 0.4 (full resolution)."""
    from geoxray.experiments import ALIASING_CASES, aliasing_case, packet_ex6
    from geoxray.geometry import GeometryParams
    from geoxray.inversion import ReconstructionConfig

    g = GeometryParams(1.0, 0.4)
    pk = packet_ex6(g)
    rcfg = ReconstructionConfig(n=256, n_theta=512, upsample=1)
    return pk, {C: aliasing_case(g, pk, C, pk.main_frequency, rcfg) for C in ALIASING_CASES}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
