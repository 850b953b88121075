"""Print the number-of-sample factors and box sizes next to the reference values.

Usage::

    python scripts/table1.py [--sup]

``--sup`` takes suprema over all fan angles instead of the five plotted ones.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from geoxray.canrel import PLOT_ALPHAS, b_numbers, sample_factors  # noqa: E402
from geoxray.geometry import GeometryParams  # noqa: E402
from test_acceptance import BOXES, KAPPAS, SIGMAS, TABLE1  # noqa: E402


def main(sup: bool):
    kw = {} if sup else {"alphas": PLOT_ALPHAS}
    print(f"{'sigma':7s} {'chart':9s} {'kappa':>6s} {'N':>8s} {'paper':>7s} {'rel':>7s}   "
          f"{'b1':>6s} {'b2':>6s}  paper box")
    for name, sig in SIGMAS.items():
        for j, chart in enumerate(("fan", "parallel")):
            for i, k in enumerate(KAPPAS):
                g = GeometryParams(1.0, k)
                n = sample_factors(g, sig, **kw)[j]
                ref = TABLE1[name][j][i]
                b = b_numbers(g, chart, sig, **kw)
                print(f"{name:7s} {chart:9s} {k:6.1f} {n:8.4f} {ref:7.3g} {100 * (n / ref - 1):+6.2f}%   "
                      f"{b[0]:6.3f} {b[1]:6.3f}  {BOXES[(name, chart)][i]}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sup", action="store_true")
    main(ap.parse_args().sup)
