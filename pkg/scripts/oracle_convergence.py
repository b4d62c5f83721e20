"""Criticality convergence: 3D solver vs the radial oracle.

Runs the refinement schedule (shrinking edge width and spacing) and
prints the gap to the sharp-well root at each level; the trend should
be monotone with a small final gap.
"""

import argparse

from threshold_dirac.cli import DEFAULT_LEVELS, oracle_convergence
from threshold_dirac import configio as cio


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--levels", help="override schedule, e.g. 9:0.12:5,11:0.06:7")
    ap.add_argument("--out", help="CSV path")
    args = ap.parse_args()

    levels = DEFAULT_LEVELS
    if args.levels:
        levels = tuple(
            (int(n), float(w), int(s))
            for n, w, s in (part.split(":") for part in args.levels.split(","))
        )
    rows = oracle_convergence(levels)
    for (lv, g3, v0, gap), (n, w, sub) in zip(rows, levels):
        print(
            f"level {lv}: n={n:2d} w={w:5.3f} sub={sub:2d}  g*={g3:.8f}  "
            f"oracle={v0:.8f}  gap={100 * gap:.3f}%"
        )
    gaps = [r[3] for r in rows]
    print(f"monotone: {all(a > b for a, b in zip(gaps, gaps[1:]))}  final gap: {100 * gaps[-1]:.3f}%")
    if args.out:
        cio.write_oracle_compare_csv(args.out, rows)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
