"""Ranked-probability outlier detection and transition-matrix pruning.

For each node the outgoing transition probabilities are ranked in
descending order. Empirically the head of that ranking (nearest same-class
neighbors) has no consistent shape, while the tail settles into a flat,
stable distribution of first-order differences. The switch point between
head and tail is found by sliding a window of size ``window`` from the
tail toward the head and scoring each position with the z-score of the
window's mean difference against the remaining tail's mean and standard
deviation; the position with the maximal z-score is the detected outlier.
Edges ranked below the switch probability are removed and the surviving
row is renormalized.

A fixed-threshold variant (cut edges whose raw cosine similarity is below
delta) is provided for ablation comparisons, and mode "none" disables
pruning entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import LabelSet
from .errors import DataError
from .graph import SparseRowGraph, from_edge_lists

MODE_ADAPTIVE = "adaptive"
MODE_FIXED = "fixed_threshold"
MODE_NONE = "none"


@dataclass
class ODConfig:
    """Outlier-detection settings; ``delta`` only applies to fixed mode."""

    window: int = 20
    mode: str = MODE_ADAPTIVE
    delta: float | None = None

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if self.mode not in (MODE_ADAPTIVE, MODE_FIXED, MODE_NONE):
            raise ValueError(f"unknown outlier-detection mode '{self.mode}'")
        if self.mode == MODE_FIXED:
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ValueError("fixed_threshold mode needs delta in (0, 1)")


@dataclass
class RankedRow:
    """One node's outgoing probabilities, ranked descending."""

    node: int
    order: np.ndarray   # neighbor indices, by descending probability
    probs: np.ndarray   # non-increasing
    diffs: np.ndarray   # probs[j] - probs[j+1], length len(probs) - 1


@dataclass
class SwitchPointReport:
    """Detection result for one row; q_star is the 1-based switch position."""

    node: int
    q_star: int | None
    threshold: float | None
    zscores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "q_star": self.q_star,
            "threshold": self.threshold,
            "zscores": [_json_float(z) for z in self.zscores],
            "skipped": self.skipped,
        }


def _json_float(x: float):
    # Infinite z-scores (zero-variance tail) serialize as the string "inf".
    if math.isinf(x):
        return "inf"
    return float(x)


def rank_row(graph: SparseRowGraph, node: int) -> RankedRow:
    """Rank node's outgoing probabilities descending (ties: smaller index)."""
    if not graph.stochastic:
        raise ValueError("rank_row needs a row-normalized graph")
    cols, wts = graph.row(node)
    order = np.lexsort((cols, -wts))
    probs = wts[order]
    return RankedRow(
        node=node,
        order=cols[order],
        probs=probs,
        diffs=probs[:-1] - probs[1:] if len(probs) else np.zeros(0),
    )


def detect_switch_point(row: RankedRow, cfg: ODConfig) -> SwitchPointReport:
    """Locate the head/tail switch position in a ranked row.

    Rows shorter than window + 2 carry too little tail to estimate the
    stable distribution and are skipped (no pruning). Candidate positions
    are window midpoints; positions never covered by a window keep z = 0.
    Ties in the maximal z-score resolve toward the larger (more
    conservative) position.
    """
    if cfg.mode != MODE_ADAPTIVE:
        raise ValueError(f"detect_switch_point needs adaptive mode, got '{cfg.mode}'")
    probs = np.asarray(row.probs, dtype=np.float64)
    kp = len(probs)
    w = cfg.window
    if kp < w + 2:
        return SwitchPointReport(row.node, None, None, np.zeros(kp), skipped=True)

    # Tail statistics run over the diffs minus their final entry.
    e = (probs[:-1] - probs[1:])[:-1]
    length = kp - 2
    n_cand = kp - w - 1
    win_means = sliding_window_view(e, w).sum(axis=1)[:n_cand] / w
    starts = np.arange(n_cand)
    counts = (length - starts).astype(np.float64)
    tail_sums = np.cumsum(e[::-1])[::-1][:n_cand]
    tail_means = tail_sums / counts
    # Two-pass variance (population divisor) per candidate start.
    dev = e[None, :] - tail_means[:, None]
    covered = np.arange(length)[None, :] >= starts[:, None]
    tail_vars = np.where(covered, dev * dev, 0.0).sum(axis=1) / counts
    tail_sds = np.sqrt(tail_vars)

    gap = np.abs(win_means - tail_means)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_cand = np.where(
            tail_sds > 0.0, gap / tail_sds, np.where(gap > 0.0, np.inf, 0.0)
        )
    z = np.zeros(kp)
    mid = (w + 1) // 2  # ceil(w / 2)
    z[starts + mid] = z_cand
    q0 = kp - 1 - int(np.argmax(z[::-1]))  # argmax, ties toward larger position
    return SwitchPointReport(
        node=row.node,
        q_star=q0 + 1,
        threshold=float(probs[q0]),
        zscores=z,
        skipped=False,
    )


def adjust_transitions(
    graph: SparseRowGraph,
    cfg: ODConfig,
    raw: SparseRowGraph | None = None,
) -> tuple[SparseRowGraph, list[SwitchPointReport]]:
    """Prune a transition matrix per the configured mode and renormalize.

    adaptive: per-row switch-point detection; edges with probability below
    the switch probability are removed, survivors renormalized to sum 1.
    fixed_threshold: edges whose ORIGINAL similarity (from ``raw``, the
    pre-normalization affinity graph) is below delta are removed; a row may
    end up empty. none: identity.
    """
    if not graph.stochastic:
        raise ValueError("adjust_transitions needs a row-normalized graph")
    if cfg.mode == MODE_NONE:
        return graph, []

    if cfg.mode == MODE_FIXED:
        if raw is None:
            raise ValueError(
                "fixed_threshold mode needs the raw affinity graph for its "
                "original similarities"
            )
        if (
            raw.node_count != graph.node_count
            or not np.array_equal(raw.row_offsets, graph.row_offsets)
            or not np.array_equal(raw.col_idx, graph.col_idx)
        ):
            raise DataError("raw affinity graph structure does not match")
        rows = []
        for i in range(graph.node_count):
            cols, wts = graph.row(i)
            _, sims = raw.row(i)
            keep = sims >= cfg.delta
            kept = wts[keep]
            total = kept.sum()
            rows.append((cols[keep].tolist(), (kept / total).tolist() if len(kept) else []))
        return from_edge_lists(graph.node_count, rows, stochastic=True), []

    rows = []
    reports = []
    for i in range(graph.node_count):
        ranked = rank_row(graph, i)
        report = detect_switch_point(ranked, cfg)
        reports.append(report)
        cols, wts = graph.row(i)
        if report.skipped:
            rows.append((cols.tolist(), wts.tolist()))
            continue
        keep = wts >= report.threshold
        kept = wts[keep]
        rows.append((cols[keep].tolist(), (kept / kept.sum()).tolist()))
    return from_edge_lists(graph.node_count, rows, stochastic=True), reports


def precision_recall_at(row: RankedRow, truth: LabelSet, t: int) -> tuple[float, float]:
    """Precision and recall of same-identity neighbors among the top t ranks.

    Precision is the same-identity fraction of the first t ranked
    neighbors; recall divides by the node's total same-identity count in
    the dataset (defined as 1 when that count is zero).
    """
    if not 1 <= t <= len(row.probs):
        raise ValueError(f"t must be in [1, {len(row.probs)}], got {t}")
    if row.node >= truth.count or (len(row.order) and row.order.max() >= truth.count):
        raise DataError("label set does not cover all graph nodes")
    target = truth.labels[row.node]
    hits = sum(1 for j in row.order[:t] if truth.labels[int(j)] == target)
    positives = sum(1 for j, lab in enumerate(truth.labels) if lab == target and j != row.node)
    precision = hits / t
    recall = hits / positives if positives > 0 else 1.0
    return precision, recall
