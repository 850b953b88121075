"""Run every shipped configuration in ``configs/`` and summarize the checks.

Usage::

    python scripts/run_all.py [--quick] [--out results] [--only invert tiling]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from geoxray.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run_all(out: Path, quick: bool, only=None) -> int:
    worst = 0
    for cfg in sorted((ROOT / "configs").iterdir()):
        name = cfg.stem
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        argv = ["--config", str(cfg), "--out", str(out / name)] + (["--quick"] if quick else [])
        code = main(argv)
        man = json.loads((out / name / "manifest.json").read_text())
        failed = [k for k, v in man["checks"].items() if not v]
        print(f"{name:16s} exit {code}  {time.perf_counter() - t0:6.1f} s  "
              f"checks {len(man['checks']) - len(failed)}/{len(man['checks'])}"
              + (f"  failed: {', '.join(failed)}" if failed else ""))
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--only", nargs="*")
    a = ap.parse_args()
    sys.exit(run_all(Path(a.out), a.quick, a.only))
