"""Command line entry point: ``geoxray --config run.toml --out results/``.

Configuration files are JSON or TOML with the layout::

    experiment = "invert"
    out = "results/invert"
    seed = 0

    [geometry]
    R = 1.0
    kappa = [-0.3, 0.0, 0.3]

    [plan]            # optional overrides
    B = 100.0
    C1 = 1.5
    C2 = 1.5
    frequency = "main"     # or "band_limit", for packet experiments
    sigma = "Sigma1"
    chart = "fan"

    [reconstruction]
    n = 256
    n_theta = 512
    upsample_method = "lanczos"

    [phantom]
    kind = "f0"

Exit status is 0 on success, 1 for an invalid configuration and 2 for a
numerical failure (an exception in the numerics or a failed check).
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import re
import sys
import time
import warnings
from collections import Counter
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .geometry import DomainError, SingularConfiguration

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

SECTIONS = {
    None: {"experiment", "out", "seed", "quick", "threads"},
    "geometry": {"R", "kappa"},
    "plan": {"B", "C1", "C2", "frequency", "sigma", "chart"},
    "reconstruction": {"n", "n_theta", "upsample_method"},
}
PHANTOM_KEYS = {
    "f0": {"sigma"},
    "f1": {"h"},
    "f4": {"h"},
    "packet": {"s_over_L", "alpha", "u", "h"},
    "gaussian_sum": {"centers", "weights", "sigma"},
    "coherent_sum": {"packets"},
}
PACKET_KEYS = {"x0", "xi0", "h"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending line when known."""


def _line_of(text: str, key: str, section: str | None = None) -> int | None:
    """1-based line of ``key`` in ``text`` (after ``section``'s header if present)."""
    lines = text.splitlines()
    start = 0
    if section is not None:
        hdr = re.compile(rf'^\s*(\[\s*{re.escape(section)}\s*\]|"{re.escape(section)}"\s*:)')
        for i, ln in enumerate(lines):
            if hdr.search(ln):
                start = i
                break
    pat = re.compile(rf'(^|[\s{{,])"?{re.escape(key)}"?\s*[:=]')
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return None


def _where(path, text, key, section=None) -> str:
    ln = _line_of(text, key, section)
    return f"{path}:{ln}" if ln else str(path)


def parse_config_text(text: str, path: str = "<config>") -> dict:
    """Parse JSON (``.json`` or text starting with ``{``) or TOML into a dict."""
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            m = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"{path}:{m.group(1) if m else '?'}: invalid TOML: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a table/object")
    return data


def config_from_dict(data: dict, text: str = "", path: str = "<config>"):
    """Validate keys and build an :class:`~geoxray.experiments.ExperimentConfig`."""
    from .experiments import ExperimentConfig

    flat = {}
    for key, val in data.items():
        if key in SECTIONS and isinstance(val, dict):
            for k2, v2 in val.items():
                if k2 not in SECTIONS[key]:
                    raise ConfigError(f"{_where(path, text, k2, key)}: unknown key {key}.{k2!r}; "
                                      f"allowed: {sorted(SECTIONS[key])}")
                flat[k2] = v2
        elif key == "phantom":
            if not isinstance(val, dict) or "kind" not in val:
                raise ConfigError(f"{_where(path, text, key)}: phantom must be a table with a 'kind'")
            kind = val["kind"]
            if kind not in PHANTOM_KEYS:
                raise ConfigError(f"{_where(path, text, 'kind', 'phantom')}: unknown phantom kind {kind!r}; "
                                  f"allowed: {sorted(PHANTOM_KEYS)}")
            for k2 in val:
                if k2 != "kind" and k2 not in PHANTOM_KEYS[kind]:
                    raise ConfigError(f"{_where(path, text, k2, 'phantom')}: unknown key phantom.{k2!r} "
                                      f"for kind {kind!r}; allowed: {sorted(PHANTOM_KEYS[kind])}")
            for pk in val.get("packets", ()):
                for k3 in pk:
                    if k3 not in PACKET_KEYS:
                        raise ConfigError(f"{_where(path, text, k3, 'phantom')}: unknown packet key {k3!r}")
            flat["phantom"] = dict(val)
        elif key in SECTIONS[None]:
            flat[key] = val
        else:
            raise ConfigError(f"{_where(path, text, key)}: unknown key {key!r}")
    if "experiment" not in flat:
        raise ConfigError(f"{path}: missing required key 'experiment'")
    if "kappa" in flat:
        k = flat.pop("kappa")
        flat["kappas"] = list(k) if isinstance(k, (list, tuple)) else [k]
    try:
        return ExperimentConfig(**flat)
    except (TypeError, ValueError, DomainError) as e:
        bad = next((k for k in flat if k in str(e)), "experiment")
        raise ConfigError(f"{_where(path, text, bad)}: {e}") from None


def load_config(path) -> tuple:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"{p}: cannot read config: {e.strerror}") from None
    data = parse_config_text(text, str(p))
    return config_from_dict(data, text, str(p)), data


def build_parser() -> argparse.ArgumentParser:
    from .experiments import EXPERIMENTS

    ap = argparse.ArgumentParser(prog="geoxray", description="Sampling experiments for the geodesic "
                                 "X-ray transform on constant-curvature disks.")
    ap.add_argument("--config", help="JSON or TOML configuration file")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--threads", type=int, help="numba thread budget")
    ap.add_argument("--experiment", choices=EXPERIMENTS, help="experiment id (overrides the config)")
    ap.add_argument("--quick", action="store_true", help="halved resolutions for CI")
    return ap


def _versions() -> dict:
    import numba
    import numpy
    import scipy
    import shapely

    return {"geoxray": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "shapely": shapely.__version__}


def _setup_log(out: Path) -> logging.Logger:
    log = logging.getLogger("geoxray.run")
    log.handlers.clear()
    log.setLevel(logging.INFO)
    fh = logging.FileHandler(out / "run.log", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(sh)
    log.propagate = False
    return log


def main(argv=None) -> int:
    from dataclasses import asdict, replace

    from .experiments import TOLERANCES, ExperimentConfig, run

    args = build_parser().parse_args(argv)
    raw = {}
    try:
        if args.config:
            cfg, raw = load_config(args.config)
        elif args.experiment:
            cfg = ExperimentConfig(args.experiment)
        else:
            raise ConfigError("either --config or --experiment is required")
        if args.experiment:
            cfg = replace(cfg, experiment=args.experiment, kappas=cfg.kappas if args.config else None)
        if args.out:
            cfg = replace(cfg, out=args.out)
        if args.quick:
            cfg = replace(cfg, quick=True)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            cfg = replace(cfg, threads=args.threads)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log = _setup_log(out)
    if cfg.threads:
        import numba

        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    log.info("experiment %s -> %s", cfg.experiment, out)

    t0 = time.perf_counter()
    status, error = EXIT_OK, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            ctx = run(cfg, out)
        except (DomainError, SingularConfiguration, FloatingPointError, ArithmeticError,
                np_errors()) as e:
            status, error, ctx = EXIT_NUMERIC, f"{type(e).__name__}: {e}", None
            log.error("numerical failure: %s", error)
        except ValueError as e:
            # option combinations only detectable once the experiment starts
            status, error, ctx = EXIT_CONFIG, f"{type(e).__name__}: {e}", None
            log.error("config error: %s", error)
    counts = Counter(f"{w.category.__name__}: {w.message}" for w in caught)
    for msg, n in sorted(counts.items()):
        log.warning("%s (x%d)", msg, n)

    checks = ctx.checks if ctx else {}
    for name, ok in sorted(checks.items()):
        log.info("check %-40s %s", name, "PASS" if ok else "FAIL")
    if ctx:
        for note in ctx.notes:
            log.info("note: %s", note)
    if status == EXIT_OK and not all(checks.values()):
        status = EXIT_NUMERIC
    manifest = {
        "config": asdict(cfg),
        "config_file": {"path": args.config, "contents": raw} if args.config else None,
        "versions": _versions(),
        "tolerances": TOLERANCES,
        "outputs": sorted(set(ctx.files)) if ctx else [],
        "checks": {k: bool(v) for k, v in sorted(checks.items())},
        "notes": ctx.notes if ctx else [],
        "warnings": {k: v for k, v in sorted(counts.items())},
        "error": error,
        "status": status,
        "elapsed_s": round(time.perf_counter() - t0, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    log.info("done in %.1f s, status %d", manifest["elapsed_s"], status)
    return status


def np_errors():
    import numpy as np

    return np.linalg.LinAlgError


if __name__ == "__main__":
    sys.exit(main())
