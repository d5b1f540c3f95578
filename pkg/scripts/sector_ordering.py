"""Monte-Carlo sector-ordering experiment: how often R(A,B) > R(A,C) for consecutive sectors A, B, C."""

import argparse
import math

from hypermux.evaluation import ExperimentReport
from hypermux.geometry import DiskParams
from hypermux.graph import sector_ordering_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--alpha", type=float, default=0.75)
    ap.add_argument("--c", type=float, default=0.0)
    ap.add_argument("--t", type=float, default=0.3)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--widths", type=float, nargs="+", default=[0.5, 1.0, math.pi / 2, 2 * math.pi / 3],
                    help="sector width (radians) shared by A, B and C")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-prefix", default="sector_ordering")
    args = ap.parse_args()

    p = DiskParams(args.n, args.alpha, args.c, args.t)
    report = ExperimentReport("sector_ordering", vars(args))
    for w in args.widths:
        res = sector_ordering_experiment(p, (w, w, w), args.trials, args.seed)
        report.add_rows([{"x": w, "fraction": res.fraction, "ties": res.ties, "resampled": res.resampled}])
        print(f"width={w:.4f} fraction={res.fraction:.3f} ties={res.ties} resampled={res.resampled}")
    report.write(args.out_prefix)


if __name__ == "__main__":
    main()
