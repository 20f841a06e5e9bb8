"""Command-line entry point: ``stars <subcommand> ...``.

Every run that produces files also writes a JSON manifest next to its main
output (or at ``--manifest``) holding the argv, the resolved configuration,
the dataset fingerprint, output paths and all counters.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import resolve_threads
from .clustering import Partition, merge_to_k, single_linkage_sweep, vmeasure, write_partition
from .clustering import homogeneity_completeness
from .core import Dataset, DatasetError, SimilarityGraph, read_graph, write_graph
from .data import MixtureSpec, gen_gaussian_mixture, load_dense, load_labels, load_weighted_sets, write_dense, write_labels
from .evaluation import allpairs_oracle, ann_two_hop_recall, evaluate, sparsity_report, threshold_two_hop_recall
from .lsh import FAMILIES, get_family
from .similarity import MEASURES, get_measure
from .sorting import ALLPAIRS, LEADERS, Auto, SortingConfig, build_knn_spanner
from .threshold import ThresholdConfig, build_allpairs_lsh, build_threshold_spanner

DEFAULT_FAMILY = {
    "angular": "simhash",
    "cosine": "simhash",
    "dot": "simhash",
    "jaccard": "minhash",
    "wjaccard": "wminhash",
    "mixture": "mixed",
}

PRESETS = {
    # short sketches put ~250 points in a bucket, the regime where leaders pay off
    "desk-gaussian": dict(
        n=2000, dim=100, modes=100, sigma=0.1, data_seed=1, seed=0,
        r1=0.495, r2=0.5, reps=25, leaders=25, max_bucket=10_000, sketch_len=3,
        k=100, window=250, sketch_dim=30, knn_reps=25, degree_cap=250, inv_eps=1.01,
    ),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers


def _load_dataset(args) -> Dataset:
    path = Path(args.dataset)
    if not path.exists():
        raise UsageError(f"dataset file not found: {path}")
    fmt = args.format
    if fmt == "auto":
        head = path.open("rb").readline().split()
        fmt = "dense" if len(head) == 2 and all(t.isdigit() for t in head) else "wsets"
    data = load_weighted_sets(path) if fmt == "wsets" else load_dense(path, binary=True if fmt == "binary" else None)
    if getattr(args, "sets", None):
        if not Path(args.sets).exists():
            raise UsageError(f"sets file not found: {args.sets}")
        data = Dataset.paired(data, load_weighted_sets(args.sets))
    if getattr(args, "labels", None):
        if not Path(args.labels).exists():
            raise UsageError(f"labels file not found: {args.labels}")
        data = data.with_labels(load_labels(args.labels, data.n))
    return data


def _measure(args):
    return get_measure(args.measure, args.mixture_weight)


def _family(args):
    kind = args.lsh or DEFAULT_FAMILY[args.measure]
    return get_family(kind, args.seed, args.wjaccard_granularity)


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _write_manifest(args, argv, config: dict, outputs: dict, counters: dict, data: Dataset | None = None):
    main_out = next((p for p in outputs.values() if p), None)
    path = args.manifest or (f"{main_out}.manifest.json" if main_out else None)
    if path is None:
        return
    manifest = {
        "tool_version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "seed": config.get("seed"),
        "dataset_fingerprint": data.fingerprint() if data is not None else None,
        "outputs": {k: str(v) for k, v in outputs.items() if v},
        "counters": counters,
    }
    _write_json(manifest, path)


def _config_dict(args) -> dict:
    skip = {"func", "manifest", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------- subcommands


def cmd_gen(args, argv):
    spec = MixtureSpec(n=args.n, dim=args.dim, modes=args.modes, sigma=args.sigma, seed=args.seed)
    data = gen_gaussian_mixture(spec)
    write_dense(data, args.out, binary=args.binary)
    if args.labels:
        write_labels(data.labels, args.labels)
    _write_manifest(args, argv, _config_dict(args), {"out": args.out, "labels": args.labels}, {"n": data.n}, data)


def _threshold_cfg(args) -> ThresholdConfig:
    return ThresholdConfig(
        r1=args.r1, repetitions=args.reps, leaders=args.leaders,
        max_bucket_size=args.max_bucket, sketch_len=args.sketch_dim, seed=args.seed,
    )


def _finish_build(args, argv, data, graph, report, threads):
    write_graph(graph, args.out)
    counters = report.as_dict()
    counters["threads"] = threads
    if args.report:
        _write_json(counters, args.report)
    _write_manifest(args, argv, _config_dict(args), {"out": args.out, "report": args.report}, counters, data)


def cmd_build_threshold(args, argv):
    data = _load_dataset(args)
    threads = resolve_threads(args.threads)
    builder = build_allpairs_lsh if args.command == "build-allpairs-lsh" else build_threshold_spanner
    graph, report = builder(data, _measure(args), _family(args), _threshold_cfg(args), threads=threads)
    _finish_build(args, argv, data, graph, report, threads)


def _parse_mode(args):
    if args.mode == "auto":
        return Auto(args.auto_threshold)
    return LEADERS if args.mode == "leaders" else ALLPAIRS


def cmd_build_knn(args, argv):
    data = _load_dataset(args)
    threads = resolve_threads(args.threads)
    cfg = SortingConfig(
        k=args.k, window=args.window, sketch_dim=args.sketch_dim, repetitions=args.reps,
        leaders=args.leaders, mode=_parse_mode(args), degree_cap=args.degree_cap,
        max_block_size=args.max_block, seed=args.seed,
    )
    graph, report = build_knn_spanner(data, _measure(args), _family(args), cfg, threads=threads)
    _finish_build(args, argv, data, graph, report, threads)


def _knn_graph(truth, n) -> SimilarityGraph:
    kk = truth.knn.shape[1]
    a = np.repeat(np.arange(n), kk)
    return SimilarityGraph(n, a, truth.knn.ravel(), truth.knn_sims.ravel())


def cmd_oracle(args, argv):
    if args.r2 is None and args.k is None:
        raise UsageError("oracle: give --r2, --k or both")
    data = _load_dataset(args)
    measure = _measure(args)
    t0 = time.perf_counter()
    truth = allpairs_oracle(data, measure, r2=args.r2, k=args.k, inv_eps=tuple(args.inv_eps))
    counters = {"comparisons": truth.comparisons, "wall_time_s": round(time.perf_counter() - t0, 6)}
    if args.r2 is not None:
        g = SimilarityGraph(data.n, truth.threshold_a, truth.threshold_b,
                            measure.pairs(data, truth.threshold_a, truth.threshold_b))
        counters["threshold_pairs"] = len(g)
        if args.out:
            write_graph(g, args.out)
    if args.k is not None:
        g = _knn_graph(truth, data.n)
        counters["knn_edges"] = len(g)
        if args.knn_out:
            write_graph(g, args.knn_out)
    if args.report:
        _write_json(counters, args.report)
    _write_manifest(args, argv, _config_dict(args),
                    {"out": args.out, "knn_out": args.knn_out, "report": args.report}, counters, data)


def cmd_eval(args, argv):
    if args.r2 is None and args.k is None:
        raise UsageError("eval: give --r2, --k or both")
    if not Path(args.graph).exists():
        raise UsageError(f"graph file not found: {args.graph}")
    data = _load_dataset(args)
    graph = read_graph(args.graph, n=data.n)
    inv = [1.0] + ([args.inv_eps] if args.inv_eps is not None else [])
    truth = allpairs_oracle(data, _measure(args), r2=args.r2, k=args.k, inv_eps=tuple(inv))
    report = evaluate(graph, truth, edge_floor=args.edge_floor, inv_eps=args.inv_eps)
    counters = report.as_dict()
    counters["oracle_comparisons"] = truth.comparisons
    if args.out:
        _write_json(counters, args.out)
    else:
        print(json.dumps(counters, indent=2, sort_keys=True))
    _write_manifest(args, argv, _config_dict(args), {"out": args.out}, counters, data)


def cmd_cluster(args, argv):
    data = _load_dataset(args)
    cfg = ThresholdConfig(
        r1=args.r_min, repetitions=args.reps, leaders=args.leaders,
        max_bucket_size=args.max_bucket, sketch_len=args.sketch_dim, seed=args.seed,
    )
    try:
        result = single_linkage_sweep(
            data, _measure(args), _family(args), args.k, args.c, args.r_min, args.r_max, cfg,
            threads=resolve_threads(args.threads),
        )
    except ValueError as exc:
        raise UsageError(f"cluster: {exc}") from None
    doc = result.as_dict()
    lv = result.selected_level
    if lv is not None:
        part = merge_to_k(lv.partition, args.k)
        if args.partition_out:
            write_partition(part, args.partition_out)
        if data.labels is not None:
            doc["vmeasure"] = vmeasure(part, data.labels)
    if args.out:
        _write_json(doc, args.out)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    _write_manifest(args, argv, _config_dict(args),
                    {"out": args.out, "partition_out": args.partition_out}, doc, data)


def cmd_vmeasure(args, argv):
    for p in (args.pred, args.truth):
        if not Path(p).exists():
            raise UsageError(f"file not found: {p}")
    truth = load_labels(args.truth)
    pred = load_labels(args.pred, n=len(truth))
    h, c = homogeneity_completeness(Partition.from_labels(pred), truth)
    doc = {"homogeneity": h, "completeness": c, "vmeasure": vmeasure(Partition.from_labels(pred), truth)}
    if args.out:
        _write_json(doc, args.out)
    print(json.dumps(doc, sort_keys=True))
    _write_manifest(args, argv, _config_dict(args), {"out": args.out}, doc)


BENCH_COLUMNS = (
    "algorithm", "comparisons", "edges", "edges_at_r2", "threshold_recall",
    "threshold_recall_relaxed", "ann_recall_twohop", "wall_time_s",
)


def run_bench(p: dict, threads: int) -> list[dict]:
    """Run the five-way comparison on one Gaussian-mixture config; one row per algorithm."""
    data = gen_gaussian_mixture(MixtureSpec(n=p["n"], dim=p["dim"], modes=p["modes"], sigma=p["sigma"], seed=p["data_seed"]))
    measure = get_measure("angular")
    t0 = time.perf_counter()
    truth = allpairs_oracle(data, measure, r2=p["r2"], k=p["k"], inv_eps=(1.0, p["inv_eps"]))
    allpair_time = time.perf_counter() - t0
    allpair = SimilarityGraph(
        data.n, truth.threshold_a, truth.threshold_b, measure.pairs(data, truth.threshold_a, truth.threshold_b)
    )
    tcfg = ThresholdConfig(
        r1=p["r1"], repetitions=p["reps"], leaders=p["leaders"],
        max_bucket_size=p["max_bucket"], sketch_len=p["sketch_len"], seed=p["seed"],
    )
    scfg = SortingConfig(
        k=p["k"], window=p["window"], sketch_dim=p["sketch_dim"], repetitions=p["knn_reps"],
        leaders=p["leaders"], mode=LEADERS, degree_cap=p["degree_cap"], seed=p["seed"],
    )
    fam = lambda: get_family("simhash", p["seed"])  # noqa: E731
    runs = [
        ("LSH+Stars", lambda: build_threshold_spanner(data, measure, fam(), tcfg, threads)),
        ("LSH", lambda: build_allpairs_lsh(data, measure, fam(), tcfg, threads)),
        ("SortingLSH+Stars", lambda: build_knn_spanner(data, measure, fam(), scfg, threads)),
        ("SortingLSH", lambda: build_knn_spanner(data, measure, fam(), SortingConfig(**{**scfg.__dict__, "mode": ALLPAIRS}), threads)),
    ]
    rows = []
    for name, fn in runs:
        graph, rep = fn()
        rows.append(_bench_row(name, graph, rep.comparisons, rep.wall_time, truth, p))
    rows.append(_bench_row("AllPair", allpair, truth.comparisons, allpair_time, truth, p))
    return rows


def _bench_row(name, graph, comparisons, wall, truth, p) -> dict:
    return {
        "algorithm": name,
        "comparisons": comparisons,
        "edges": len(graph),
        "edges_at_r2": sparsity_report(graph, [p["r2"]])[p["r2"]],
        "threshold_recall": threshold_two_hop_recall(graph, truth, p["r2"]),
        "threshold_recall_relaxed": threshold_two_hop_recall(graph, truth, p["r1"]),
        "ann_recall_twohop": ann_two_hop_recall(graph, truth, p["k"], p["inv_eps"]),
        "wall_time_s": wall,
    }


def format_table(rows: list[dict]) -> str:
    def fmt(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    lines = ["\t".join(BENCH_COLUMNS)]
    lines += ["\t".join(fmt(r[c]) for c in BENCH_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_bench(args, argv):
    params = dict(PRESETS[args.preset])
    for key in ("n", "seed", "reps", "sketch_len", "leaders"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    threads = resolve_threads(args.threads)
    rows = run_bench(params, threads)
    table = format_table(rows)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    counters = {f"{r['algorithm']}_{c}": r[c] for r in rows for c in BENCH_COLUMNS[1:]}
    _write_manifest(args, argv, {**params, "preset": args.preset, "threads": threads}, {"out": args.out}, counters)


# ---------------------------------------------------------------- parser


def _add_common(p, dataset=True):
    if dataset:
        p.add_argument("--dataset", required=True, help="dense text/binary or weighted-set file")
        p.add_argument("--format", choices=("auto", "dense", "binary", "wsets"), default="auto")
        p.add_argument("--sets", help="weighted-set file paired with a dense dataset (mixture measure)")
        p.add_argument("--labels", help="label file (<point_id>\\t<label>)")
        p.add_argument("--measure", choices=sorted(MEASURES), default="angular")
        p.add_argument("--mixture-weight", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $STARS_THREADS or CPU count)")
    p.add_argument("--manifest", help="manifest path (default: <main output>.manifest.json)")


def _add_lsh(p, sketch_default):
    p.add_argument("--lsh", choices=sorted(FAMILIES), default=None, help="hash family (default follows --measure)")
    p.add_argument("--sketch-dim", type=int, default=sketch_default)
    p.add_argument("--wjaccard-granularity", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stars", description="Sparse two-hop similarity graphs via LSH and star sampling.")
    parser.add_argument("--version", action="version", version=f"stars {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="generate a Gaussian-mixture dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--modes", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--labels")
    p.add_argument("--binary", action="store_true", help="write little-endian float32 after the text header")
    _add_common(p, dataset=False)
    p.set_defaults(func=cmd_gen)

    for name, helptext in (
        ("build-threshold", "threshold spanner with leader sampling"),
        ("build-allpairs-lsh", "LSH baseline comparing all pairs per bucket"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_lsh(p, 12)
        p.add_argument("--r1", type=float, required=True)
        p.add_argument("--reps", type=int, default=25)
        p.add_argument("--leaders", type=int, default=25)
        p.add_argument("--max-bucket", type=int, default=10_000)
        p.add_argument("--out", required=True)
        p.add_argument("--report")
        p.set_defaults(func=cmd_build_threshold)

    p = sub.add_parser("build-knn", help="k-NN spanner via sorting LSH")
    _add_common(p)
    _add_lsh(p, 30)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--leaders", type=int, default=25)
    p.add_argument("--mode", choices=("leaders", "allpairs", "auto"), default="leaders")
    p.add_argument("--auto-threshold", type=float, default=2.0)
    p.add_argument("--degree-cap", type=int, default=250)
    p.add_argument("--max-block", type=int, default=20_000)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_build_knn)

    p = sub.add_parser("oracle", help="exact threshold pairs and k-NN by brute force")
    _add_common(p)
    p.add_argument("--r2", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--inv-eps", type=float, action="append", default=None)
    p.add_argument("--out", help="threshold graph output")
    p.add_argument("--knn-out", help="k-NN graph output")
    p.add_argument("--report")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="recall and sparsity of a graph against brute force")
    _add_common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--r2", type=float)
    p.add_argument("--edge-floor", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--inv-eps", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="single-linkage sweep over spanner thresholds")
    _add_common(p)
    _add_lsh(p, 12)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=float, default=1.01)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--leaders", type=int, default=25)
    p.add_argument("--max-bucket", type=int, default=10_000)
    p.add_argument("--out")
    p.add_argument("--partition-out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("vmeasure", help="V-measure of a partition file against a label file")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    _add_common(p, dataset=False)
    p.set_defaults(func=cmd_vmeasure)

    p = sub.add_parser("bench", help="compare all builders on a preset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk-gaussian")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--sketch-len", type=int)
    p.add_argument("--leaders", type=int)
    p.add_argument("--out", help="TSV table output")
    _add_common(p, dataset=False)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "oracle" and args.inv_eps is None:
            args.inv_eps = [1.0]
        args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
