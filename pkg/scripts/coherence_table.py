"""Mean module coherence of map-equation communities (and a random control) on random hyperbolic graphs."""

import argparse

from hypermux.evaluation import ExperimentReport, coherence_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 500])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-prefix", default="coherence_table")
    args = ap.parse_args()

    report = ExperimentReport("coherence", vars(args))
    for clusterer in ("infomap", "random"):
        with report.timed(clusterer):
            rows = coherence_table(args.n, clusterer, args.instances, args.seed)
        for row in rows:
            report.add_rows([{"clusterer": clusterer, "N": row.N, "mean_coherence": row.mean_coherence}])
            print(f"{clusterer:8s} N={row.N:5d} xi={row.mean_coherence:.4f}")
    report.write(args.out_prefix)


if __name__ == "__main__":
    main()
