"""Command-line entry point.

Every command writes ``<output>.manifest.json`` holding the argv, resolved
config, seeds, input/output digests, version and per-stage wall-clock time.
``hypermux replay <manifest>`` reruns the recorded argv and checks that the
outputs hash the same. Timings make the manifest itself differ run to run,
so it is excluded from that comparison.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import io as hio
from .errors import DataError, HypermuxError, NumericFailure

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("hypermux")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def threads() -> int:
    raw = os.environ.get("HYPERMUX_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"HYPERMUX_THREADS must be an integer, got {raw!r}") from None
    if k < 1:
        raise UsageError("HYPERMUX_THREADS must be >= 1")
    return k


class Run:
    """Collects manifest data for one command."""

    def __init__(self, argv, command):
        self.argv = list(argv)
        self.command = command
        self.config: dict = {}
        self.seeds: dict = {}
        self.inputs: dict = {}
        self.outputs: list[str] = []
        self.timings: dict = {}

    def input(self, path):
        p = str(path)
        self.inputs[p] = hio.file_digest(p) if os.path.exists(p) else None
        return p

    def output(self, path):
        self.outputs.append(str(path))
        return path

    def stage(self, name):
        run = self

        class _T:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = run.timings.get(name, 0.0) + time.perf_counter() - self.t

        return _T()

    def write_manifest(self, path):
        data = {
            "argv": self.argv,
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": {p: hio.file_digest(p) for p in self.outputs},
            "version": __version__,
            "threads": threads(),
            "wall_clock": self.timings,
        }
        hio.write_json(path, data)


# -- helpers ---------------------------------------------------------------


def _load_train_config(path, seed):
    from .embed import TrainConfig

    values = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"no such config file: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    values["seed"] = seed
    try:
        return TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None


def _disk(n, alpha, C, T):
    from .geometry import DiskParams

    try:
        return DiskParams(n, alpha, C, T)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _graph_params(g, args):
    from .embed import estimate_params

    if args.alpha is None:
        p = estimate_params(g, args.t, args.c)
        return _disk(g.n, p.alpha, args.c, args.t), True
    return _disk(g.n, args.alpha, args.c, args.t), False


def _add_seed(p):
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")


def _add_disk(p, alpha_default=None):
    p.add_argument("--alpha", type=float, default=alpha_default,
                   help="radial density exponent (estimated from degrees if omitted)")
    p.add_argument("--t", type=float, default=0.5, help="temperature")
    p.add_argument("--c", type=float, default=0.0, help="disk radius offset C in R = 2 ln n + C")


def _trace_rows(trace):
    return [(t.iter, t.o1, t.mean_coherence, t.codelength) for t in trace]


# -- commands --------------------------------------------------------------


def cmd_generate(args, run: Run):
    from .rhg import generate

    params = _disk(args.n, args.alpha, args.c, args.t)
    run.config = {"n": args.n, "alpha": args.alpha, "C": args.c, "T": args.t, "R": params.R}
    run.seeds = {"generate": args.seed}
    with run.stage("generate"):
        s = generate(params, args.seed)
    prefix = args.out_prefix
    with run.stage("write"):
        hio.write_edge_list(run.output(f"{prefix}.edges"), s.graph)
        hio.write_coordinates(run.output(f"{prefix}.coords.csv"), s.r, s.theta)
    print(f"n={s.graph.n} m={s.graph.m}")
    return f"{prefix}.manifest.json"


def cmd_infomap(args, run: Run):
    from .mapeq import OptimizerOptions, codelength, optimize

    with run.stage("load"):
        data = hio.load_edge_list(run.input(args.graph))
    opts = OptimizerOptions(trials=args.trials)
    run.config = {"trials": args.trials, "duplicates": data.duplicates, "self_loops": data.self_loops}
    run.seeds = {"optimize": args.seed}
    with run.stage("optimize"):
        p = optimize(data.graph, args.seed, opts)
        L = codelength(data.graph, p).value
    with run.stage("write"):
        hio.write_partition(run.output(args.out), p.assignment, data.labels)
    print(f"modules {p.m}")
    print(f"codelength {L!r}")
    return f"{args.out}.manifest.json"


def cmd_embed(args, run: Run):
    from .embed import fit

    with run.stage("load"):
        data = hio.load_edge_list(run.input(args.graph))
    g = data.graph
    params, estimated = _graph_params(g, args)
    cfg = _load_train_config(args.config, args.seed)
    if args.config:
        run.input(args.config)
    run.config = {"alpha": params.alpha, "alpha_estimated": estimated, "C": params.C, "T": params.T,
                  "R": params.R, "n": g.n, "m": g.m, "train": cfg.to_dict()}
    run.seeds = {"fit": args.seed}
    with run.stage("fit"):
        res = fit(g, params, cfg)
    prefix = args.out_prefix
    with run.stage("write"):
        hio.write_coordinates(run.output(f"{prefix}.embedding.csv"), res.state.r, res.state.theta, data.labels)
        hio.write_partition(run.output(f"{prefix}.partition.txt"), res.partition.assignment, data.labels)
        hio.write_rows_csv(run.output(f"{prefix}.trace.csv"), ["iter", "O1", "mean_xi", "codelength"],
                           _trace_rows(res.trace))
    print(f"modules {res.partition.m}")
    return f"{prefix}.manifest.json"


def cmd_embed_multiplex(args, run: Run):
    from .multiplex import MultiplexNet, fit_multiplex

    with run.stage("load"):
        data = hio.load_multiplex(run.input(args.multiplex))
    net = MultiplexNet(data.layers, data.labels, data.layer_names)
    alpha = args.alpha
    if alpha is None:
        from .embed import estimate_params

        alpha = estimate_params(net.aggregate(), args.t, args.c).alpha
    params = [_disk(net.n, alpha, args.c, args.t) for _ in range(net.L)]
    cfg = _load_train_config(args.config, args.seed)
    if args.config:
        run.input(args.config)
    if not 0 <= args.omega <= 1 or not 0 <= args.lambda_cross <= 1:
        raise UsageError("--omega and --lambda-cross must lie in [0, 1]")
    run.config = {"alpha": alpha, "alpha_estimated": args.alpha is None, "C": args.c, "T": args.t,
                  "omega": args.omega, "lambda_cross": args.lambda_cross, "layers": data.layer_names,
                  "n": net.n, "train": cfg.to_dict()}
    run.seeds = {"fit": args.seed}
    with run.stage("fit"):
        emb = fit_multiplex(net, params, cfg, args.omega, args.lambda_cross)
    prefix = args.out_prefix
    with run.stage("write"):
        hio.write_layer_coordinates(run.output(f"{prefix}.embedding.csv"), emb.rows(data.labels, data.layer_names))
        hio.write_partition(run.output(f"{prefix}.partition.txt"), emb.partition.assignment, data.labels)
        rows = [(t.iter, sum(t.o1) / len(t.o1), t.mean_coherence, t.codelength) for t in emb.trace]
        hio.write_rows_csv(run.output(f"{prefix}.trace.csv"), ["iter", "O1", "mean_xi", "codelength"], rows)
    print(f"modules {emb.partition.m}")
    return f"{prefix}.manifest.json"


def _finish_report(report, run: Run, prefix):
    for k, v in report.timings.items():
        run.timings[k] = run.timings.get(k, 0.0) + v
    for p in report.write(prefix):
        run.output(p)
    for row in report.rows:
        print(" ".join(f"{k}={v}" for k, v in row.items() if not isinstance(v, (list, dict))))
    return f"{prefix}.manifest.json"


def cmd_eval_hdcorr(args, run: Run):
    from .evaluation import ExperimentReport, hd_correlation

    ids_a, ra, ta = hio.read_coordinates(run.input(args.truth))
    ids_b, rb, tb = hio.read_coordinates(run.input(args.inferred))
    pos = {k: i for i, k in enumerate(ids_b)}
    common = [i for i, k in enumerate(ids_a) if k in pos]
    if len(common) < 3:
        raise DataError("fewer than three nodes shared by the two coordinate files")
    jb = [pos[ids_a[i]] for i in common]
    report = ExperimentReport("hdcorr", {"truth": args.truth, "inferred": args.inferred})
    with report.timed("hdcorr"):
        value = hd_correlation((ra[common], ta[common]), (rb[jb], tb[jb]))
    report.add_rows([{"n_common": len(common), "hd_correlation": value}])
    run.config = report.config
    return _finish_report(report, run, args.out_prefix)


def cmd_eval_linkpred(args, run: Run):
    from .evaluation import ExperimentReport, HyperbolicScorer, link_prediction

    data = hio.load_edge_list(run.input(args.graph))
    g = data.graph
    cfg = _load_train_config(args.config, args.seed)
    report = ExperimentReport("linkpred", {"graph": args.graph, "holdout": args.holdout, "seed": args.seed,
                                           "scorers": args.scorer, "T": args.t, "C": args.c, "alpha": args.alpha,
                                           "train": cfg.to_dict()})
    run.config = report.config
    run.seeds = {"split": args.seed, "fit": args.seed}
    rows = []
    for name in args.scorer:
        if name == "hyperbolic":
            def params_fn(tg, a=args):
                return _graph_params(tg, a)[0]

            scorer = HyperbolicScorer(params_fn, cfg)
        else:
            scorer = name
        with report.timed(name):
            res = link_prediction(g, scorer, args.holdout, args.seed)
        rows.append({"scorer": name, "auc": res.auc, "n_pos": res.n_pos, "n_neg": res.n_neg, "seed": args.seed})
    report.add_rows(rows)
    return _finish_report(report, run, args.out_prefix)


def cmd_eval_coherence(args, run: Run):
    from .evaluation import ExperimentReport, coherence_table

    report = ExperimentReport("coherence", {"grid": args.n, "instances": args.instances, "clusterer": args.clusterer,
                                            "alpha": args.alpha, "C": args.c, "T": args.t, "seed": args.seed})
    run.config = report.config
    run.seeds = {"instances": args.seed}
    _disk(max(args.n), args.alpha, args.c, args.t)
    with report.timed("coherence"):
        rows = coherence_table(args.n, args.clusterer, args.instances, args.seed, args.alpha, args.c, args.t)
    report.add_rows(rows)
    return _finish_report(report, run, args.out_prefix)


def cmd_eval_resolution(args, run: Run):
    from .evaluation import ExperimentReport, resolution_table

    graphs = []
    for path in args.graph:
        graphs.append((Path(path).name, hio.load_edge_list(run.input(path)).graph))
    report = ExperimentReport("resolution", {"graphs": args.graph, "seed": args.seed})
    run.config = report.config
    run.seeds = {"optimize": args.seed}
    with report.timed("resolution"):
        report.add_rows(resolution_table(graphs, args.seed))
    return _finish_report(report, run, args.out_prefix)


def cmd_eval_violation(args, run: Run):
    from .evaluation import ExperimentReport
    from .multiplex import MultiplexNet, violation_ratio

    data = hio.load_multiplex(run.input(args.multiplex))
    net = MultiplexNet(data.layers, data.labels, data.layer_names)
    coords = hio.read_layer_coordinates(run.input(args.embedding))
    thetas = np.zeros((net.L, net.n))
    for li, name in enumerate(data.layer_names):
        layer = coords.get(name)
        if layer is None:
            raise DataError(f"embedding has no layer {name!r}")
        for u in np.flatnonzero(net.presence[li]).tolist():
            lab = data.labels[u]
            if lab not in layer:
                raise DataError(f"embedding lacks node {lab!r} in layer {name!r}")
            thetas[li, u] = layer[lab][1]
    report = ExperimentReport("violation", {"multiplex": args.multiplex, "embedding": args.embedding,
                                            "cn_mode": args.cn_mode})
    run.config = report.config
    rows = []
    for use_degree in (False, True):
        try:
            res = violation_ratio(net, thetas, use_degree, args.cn_mode)
            rows.append({"use_degree": int(use_degree), "ratio": res.ratio, "violations": res.violations,
                         "pairs": res.pairs})
        except HypermuxError as exc:
            rows.append({"use_degree": int(use_degree), "ratio": math.nan, "violations": 0, "pairs": 0,
                         "note": str(exc)})
    report.add_rows(rows)
    return _finish_report(report, run, args.out_prefix)


def cmd_replay(args, run: Run):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no such manifest: {args.manifest}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.manifest}: invalid JSON ({exc})") from None
    argv = manifest.get("argv")
    if not argv or argv[0] == "replay":
        raise DataError("manifest does not record a replayable command")
    for path, digest in manifest.get("inputs", {}).items():
        if digest is not None and (not os.path.exists(path) or hio.file_digest(path) != digest):
            raise DataError(f"input {path} changed since the manifest was written")
    code = main(argv)
    if code != EXIT_OK:
        return code
    bad = [p for p, d in manifest.get("outputs", {}).items()
           if not os.path.exists(p) or hio.file_digest(p) != d]
    if bad:
        print("outputs differ: " + ", ".join(bad), file=sys.stderr)
        return EXIT_NUMERIC
    print(f"replayed {len(manifest.get('outputs', {}))} outputs identically")
    return None


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypermux", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hypermux {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a random hyperbolic graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("infomap", help="map-equation communities of an edge list")
    p.add_argument("--graph", required=True)
    _add_seed(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infomap)

    p = sub.add_parser("embed", help="embed an edge list on the hyperbolic disk")
    p.add_argument("--graph", required=True)
    _add_disk(p)
    p.add_argument("--config", help="JSON file with training options")
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("embed-multiplex", help="embed a multiplex edge list")
    p.add_argument("--multiplex", required=True)
    p.add_argument("--omega", type=float, default=0.15, help="relax rate")
    p.add_argument("--lambda-cross", type=float, default=0.5, help="cross-layer alignment weight")
    _add_disk(p)
    p.add_argument("--config")
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_embed_multiplex)

    ev = sub.add_parser("eval", help="evaluation reports")
    esub = ev.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)

    p = esub.add_parser("hdcorr", help="HD-correlation of two coordinate files")
    p.add_argument("--truth", required=True)
    p.add_argument("--inferred", required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval_hdcorr)

    p = esub.add_parser("linkpred", help="link-prediction AUC")
    p.add_argument("--graph", required=True)
    p.add_argument("--scorer", nargs="+", default=["cn", "jaccard", "aa", "hyperbolic"],
                   choices=["cn", "jaccard", "aa", "hyperbolic"])
    p.add_argument("--holdout", type=float, default=0.1)
    _add_disk(p)
    p.add_argument("--config")
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval_linkpred)

    p = esub.add_parser("coherence", help="module coherence on random hyperbolic graphs")
    p.add_argument("--n", type=int, nargs="+", default=[100, 500])
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--clusterer", choices=["infomap", "random"], default="infomap")
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--t", type=float, default=0.1)
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval_coherence)

    p = esub.add_parser("resolution", help="detected vs. predicted module counts")
    p.add_argument("--graph", nargs="+", required=True)
    _add_seed(p)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval_resolution)

    p = esub.add_parser("violation", help="cross-layer angular violation ratio")
    p.add_argument("--multiplex", required=True)
    p.add_argument("--embedding", required=True, help="CSV with node_id,layer,r,theta")
    p.add_argument("--cn-mode", choices=["intersection", "pairwise"], default="intersection")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval_violation)

    p = sub.add_parser("replay", help="rerun a manifest and compare output digests")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        threads()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    name = args.command if args.command != "eval" else f"eval {args.eval_command}"
    run = Run(argv, name)
    try:
        out = args.func(args, run)
        if isinstance(out, int):
            return out
        if out is not None:
            run.write_manifest(out)
    except UsageError as exc:
        print(f"hypermux: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"hypermux: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, HypermuxError) as exc:
        print(f"hypermux: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"hypermux: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
