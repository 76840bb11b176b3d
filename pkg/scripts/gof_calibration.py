"""Pass rates of the KS, ED and LB residual tests under the true model.

    python3 scripts/gof_calibration.py --cascades 500 --level 0.01
"""
from __future__ import annotations

import argparse
import sys

from sirhawkes import experiments as E
from sirhawkes._parallel import default_jobs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=5.0)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--N", type=float, default=200.0)
    ap.add_argument("--cascades", type=int, default=500)
    ap.add_argument("--level", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--jobs", type=int, default=default_jobs())
    args = ap.parse_args(argv)
    cfg = E.CalibrationConfig(
        kappa=args.kappa, theta=args.theta, N=args.N, cascades=args.cascades,
        level=args.level, seed=args.seed, min_rate=1.0 - 5 * args.level, jobs=args.jobs,
    )
    out = E.run_calibration(cfg)
    print(out.line())
    return 0 if out.passed else 1


if __name__ == "__main__":
    sys.exit(main())
