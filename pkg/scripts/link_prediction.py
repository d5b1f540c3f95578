"""Link-prediction AUC of the hyperbolic scorer against CN, Jaccard and Adamic-Adar on random hyperbolic graphs."""

import argparse
import warnings

from hypermux.embed import TrainConfig
from hypermux.evaluation import ExperimentReport, HyperbolicScorer, link_prediction
from hypermux.geometry import DiskParams
from hypermux.rhg import generate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--alpha", type=float, default=0.6)
    ap.add_argument("--c", type=float, default=-2.0)
    ap.add_argument("--t", type=float, default=0.1)
    ap.add_argument("--holdout", type=float, default=0.1)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out-prefix", default="link_prediction")
    args = ap.parse_args()

    report = ExperimentReport("link_prediction", vars(args))
    for seed in range(args.seeds):
        g = generate(DiskParams(args.n, args.alpha, args.c, args.t), seed).graph
        scorers = {
            "hyperbolic": HyperbolicScorer(lambda tg: DiskParams(tg.n, args.alpha, args.c, args.t),
                                           TrainConfig(seed=seed)),
            "cn": "cn", "jaccard": "jaccard", "aa": "aa",
        }
        for name, scorer in scorers.items():
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                auc = link_prediction(g, scorer, args.holdout, seed).auc
            report.add_rows([{"seed": seed, "scorer": name, "auc": auc}])
            print(f"seed={seed} {name:10s} auc={auc:.4f}")
    report.write(args.out_prefix)


if __name__ == "__main__":
    main()
