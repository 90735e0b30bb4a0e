"""Command-line surface.

Subcommands: synth (generate a labeled dataset), graph (dump the kNN
affinity/transition graph as edge TSV), cluster (full pipeline run),
inspect (per-node ranked-row diagnostics), eval (score a partition
against truth labels).

Contract: machine-readable payloads (JSON or TSV) go to stdout only, logs
to stderr only. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure. Output files are byte-identical across reruns with
the same flags, which is why serialized summaries exclude wall-clock
timings (those are logged to stderr instead).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .data import (
    generate_synthetic,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
    SynthSpec,
)
from .errors import ConvergenceError, DataError
from .graph import build_knn_graph, row_normalize, save_edges
from .mapeq import SolverConfig, load_partition, save_partition
from .metrics import compute_report
from .outliers import (
    MODE_ADAPTIVE,
    MODE_FIXED,
    MODE_NONE,
    ODConfig,
    adjust_transitions,
    detect_switch_point,
    precision_recall_at,
    rank_row,
)
from .pipeline import PipelineConfig, cluster_embeddings

log = logging.getLogger("mapclust")


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage problems; route them through
    # the package's exit-code contract instead (usage errors are 1).
    def error(self, message):
        raise ValueError(message)


def _parse_samples(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not m:
        raise ValueError(f"--samples expects MIN..MAX, got '{text}'")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise ValueError(f"--samples range is empty: {lo} > {hi}")
    return lo, hi


def _parse_od(text: str, window: int) -> ODConfig:
    if text == "adaptive":
        return ODConfig(window=window, mode=MODE_ADAPTIVE)
    if text == "none":
        return ODConfig(window=window, mode=MODE_NONE)
    m = re.fullmatch(r"threshold=([0-9.eE+-]+)", text)
    if m:
        return ODConfig(window=window, mode=MODE_FIXED, delta=float(m.group(1)))
    raise ValueError(f"--od expects adaptive, none or threshold=DELTA, got '{text}'")


def _parse_thetas(text: str) -> list[float]:
    try:
        thetas = [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"--theta expects comma-separated floats: {exc}") from exc
    if not thetas:
        raise ValueError("--theta list is empty")
    for t in thetas:
        if not 0.5 <= t < 1.0:
            raise ValueError(f"--theta values must lie in [0.5, 1), got {t:g}")
    return thetas


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mapclust", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--identities", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples", required=True, help="per-identity count range MIN..MAX")
    p.add_argument("--noise", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")

    p = sub.add_parser("graph", help="dump the kNN graph as edge TSV")
    p.add_argument("--input", required=True, help="embedding .meta.json path")
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--od", default="none", help="adaptive | none | threshold=DELTA")
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--out", help="also write the TSV to this path")

    p = sub.add_parser("cluster", help="run the full clustering pipeline")
    p.add_argument("--input", required=True, help="embedding .meta.json path")
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--od", default="adaptive", help="adaptive | none | threshold=DELTA")
    p.add_argument("--teleport", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--out", required=True, help="output path prefix")

    p = sub.add_parser("inspect", help="ranked-row diagnostics for one node")
    p.add_argument("--input", required=True, help="embedding .meta.json path")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--truth", help="labels file; adds precision/recall curves")

    p = sub.add_parser("eval", help="score a partition against truth labels")
    p.add_argument("--pred", required=True, help="partition TSV path")
    p.add_argument("--truth", required=True, help="labels file path")
    p.add_argument("--theta", default="0.5,0.9", help="comma-separated thresholds")
    return parser


def _cmd_synth(args) -> int:
    lo, hi = _parse_samples(args.samples)
    spec = SynthSpec(
        identities=args.identities,
        dim=args.dim,
        samples_min=lo,
        samples_max=hi,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    emb, labels = generate_synthetic(spec)
    prefix = Path(args.out)
    meta_path, payload_path = save_embeddings(emb, prefix)
    labels_path = save_labels(labels, prefix.with_name(prefix.name + ".labels.txt"))
    log.info("wrote %d vectors (%d identities) under %s", emb.count, args.identities, prefix)
    _emit_json(
        {
            "count": emb.count,
            "dim": emb.dim,
            "identities": args.identities,
            "files": {
                "meta": str(meta_path),
                "payload": str(payload_path),
                "labels": str(labels_path),
            },
        }
    )
    return 0


def _clamped_k(k: int, count: int) -> tuple[int, bool]:
    if k > count - 1:
        return count - 1, True
    return k, False


def _cmd_graph(args) -> int:
    emb = load_embeddings(args.input)
    k, clamped = _clamped_k(args.k, emb.count)
    if clamped:
        log.warning("k clamped to %d (only %d vectors)", k, emb.count)
    graph = build_knn_graph(emb, k)
    od = _parse_od(args.od, args.window)
    if args.normalize or od.mode != MODE_NONE:
        if od.mode != MODE_NONE and not args.normalize:
            log.info("outlier detection operates on probabilities; normalizing")
        normalized = row_normalize(graph)
        out_graph, _ = adjust_transitions(normalized, od, raw=graph)
    else:
        out_graph = graph
    if args.out:
        save_edges(out_graph, args.out)
        log.info("wrote %d edges to %s", out_graph.edge_count, args.out)
    src = out_graph.edge_sources()
    for s, d, w in zip(src, out_graph.col_idx, out_graph.weights):
        sys.stdout.write(f"{int(s)}\t{int(d)}\t{w:.17g}\n")
    return 0


def _cmd_cluster(args) -> int:
    emb = load_embeddings(args.input)
    cfg = PipelineConfig(
        k=args.k,
        od=_parse_od(args.od, args.window),
        solver=SolverConfig(
            teleport=args.teleport, seed=args.seed, restarts=args.restarts
        ),
    )
    partition, summary = cluster_embeddings(emb, cfg)
    for warning in summary.warnings:
        log.warning("%s", warning)
    for stage, seconds in summary.stage_seconds.items():
        log.info("stage %-18s %.3fs", stage, seconds)
    prefix = Path(args.out)
    save_partition(partition, prefix.with_name(prefix.name + ".partition.tsv"))
    payload = summary.to_dict(with_timings=False)
    prefix.with_name(prefix.name + ".summary.json").write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8"
    )
    log.info(
        "clustered %d nodes into %d clusters (%.4f bits)",
        summary.num_nodes,
        summary.num_clusters,
        summary.codelength_bits,
    )
    _emit_json(payload)
    return 0


def _cmd_inspect(args) -> int:
    emb = load_embeddings(args.input)
    if not 0 <= args.node < emb.count:
        raise ValueError(f"--node {args.node} out of range [0, {emb.count})")
    k, clamped = _clamped_k(args.k, emb.count)
    if clamped:
        log.warning("k clamped to %d (only %d vectors)", k, emb.count)
    transition = row_normalize(build_knn_graph(emb, k))
    ranked = rank_row(transition, args.node)
    report = detect_switch_point(ranked, ODConfig(window=args.window))
    payload = {
        "node": args.node,
        "order": [int(j) for j in ranked.order],
        "probs": [float(p) for p in ranked.probs],
        "diffs": [float(d) for d in ranked.diffs],
        **report.to_dict(),
    }
    if args.truth:
        truth = load_labels(args.truth)
        if truth.count != emb.count:
            raise DataError(
                f"labels cover {truth.count} rows but embeddings have {emb.count}"
            )
        curves = [
            precision_recall_at(ranked, truth, t)
            for t in range(1, len(ranked.probs) + 1)
        ]
        payload["precision"] = [p for p, _ in curves]
        payload["recall"] = [r for _, r in curves]
    _emit_json(payload)
    return 0


def _cmd_eval(args) -> int:
    thetas = _parse_thetas(args.theta)
    pred = load_partition(args.pred)
    truth = load_labels(args.truth)
    report = compute_report(pred, truth, thetas)
    _emit_json(report.to_dict())
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "graph": _cmd_graph,
    "cluster": _cmd_cluster,
    "inspect": _cmd_inspect,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        log.error("usage error: %s", exc)
        return 1
    except DataError as exc:
        log.error("data error: %s", exc)
        return 2
    except OSError as exc:
        log.error("data error: %s", exc)
        return 2
    except ConvergenceError as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
