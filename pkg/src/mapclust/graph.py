"""Sparse row-major weighted digraphs and kNN affinity-graph construction.

The same CSR container serves as the affinity matrix (cosine weights) and,
after ``row_normalize``, as the transition matrix whose rows are outgoing
probability distributions. Neighbor search is exact brute force: at the
scales this package targets the O(S^2 d) cost is affordable and keeps
results deterministic (ties broken by smaller node index).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import EmbeddingSet
from .errors import DataError

ROW_SUM_TOL = 1e-9


@dataclass
class SparseRowGraph:
    """CSR weighted digraph; no self-loops, all stored weights > 0."""

    node_count: int
    row_offsets: np.ndarray  # int64, length node_count + 1
    col_idx: np.ndarray      # int64, one entry per edge
    weights: np.ndarray      # float64, one entry per edge
    stochastic: bool = False

    @property
    def edge_count(self) -> int:
        return int(self.row_offsets[-1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Views of node i's neighbor indices and weights."""
        lo, hi = int(self.row_offsets[i]), int(self.row_offsets[i + 1])
        return self.col_idx[lo:hi], self.weights[lo:hi]

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def edge_sources(self) -> np.ndarray:
        """Source node per edge, aligned with col_idx/weights."""
        return np.repeat(
            np.arange(self.node_count, dtype=np.int64), self.row_lengths()
        )

    def validate(self) -> None:
        """Check the structural invariants; raises DataError on violation."""
        if self.node_count < 1:
            raise DataError("graph needs at least one node")
        off = self.row_offsets
        if len(off) != self.node_count + 1 or off[0] != 0:
            raise DataError("bad row_offsets header")
        if np.any(np.diff(off) < 0):
            raise DataError("row_offsets must be nondecreasing")
        if off[-1] != len(self.col_idx) or len(self.col_idx) != len(self.weights):
            raise DataError("edge array lengths disagree with row_offsets")
        if len(self.col_idx) and (
            self.col_idx.min() < 0 or self.col_idx.max() >= self.node_count
        ):
            raise DataError("edge target out of range")
        if np.any(self.weights <= 0.0):
            raise DataError("all stored weights must be positive")
        src = self.edge_sources()
        if np.any(src == self.col_idx):
            raise DataError("self-loops are not allowed")
        for i in range(self.node_count):
            cols, _ = self.row(i)
            if len(np.unique(cols)) != len(cols):
                raise DataError(f"duplicate edge targets in row {i}")
        if self.stochastic:
            sums = np.bincount(src, weights=self.weights, minlength=self.node_count)
            nonempty = np.diff(off) > 0
            if np.any(np.abs(sums[nonempty] - 1.0) > ROW_SUM_TOL):
                raise DataError("stochastic flag set but a row does not sum to 1")


def from_edge_lists(
    node_count: int,
    rows: list[tuple[list[int], list[float]]] | list,
    stochastic: bool = False,
) -> SparseRowGraph:
    """Build a graph from per-row (targets, weights) pairs. Test/IO helper."""
    offsets = np.zeros(node_count + 1, dtype=np.int64)
    cols: list[int] = []
    wts: list[float] = []
    for i, (targets, weights) in enumerate(rows):
        offsets[i + 1] = offsets[i] + len(targets)
        cols.extend(targets)
        wts.extend(weights)
    return SparseRowGraph(
        node_count=node_count,
        row_offsets=offsets,
        col_idx=np.asarray(cols, dtype=np.int64),
        weights=np.asarray(wts, dtype=np.float64),
        stochastic=stochastic,
    )


def build_knn_graph(emb: EmbeddingSet, k: int) -> SparseRowGraph:
    """Directed kNN affinity graph over an embedding set.

    Each node links to its k most-cosine-similar other nodes; non-positive
    similarities are dropped, so rows may hold fewer than k edges (possibly
    none). Ties in similarity break toward the smaller node index. Each
    row is computed as an independent matrix-vector product, so results
    do not depend on batching or evaluation order.
    """
    s = emb.count
    if not 1 <= k <= s - 1:
        raise ValueError(f"k must be in [1, {s - 1}] for {s} vectors, got {k}")
    vectors = emb.vectors.astype(np.float64)
    row_cols: list[np.ndarray] = []
    row_wts: list[np.ndarray] = []
    col_ids = np.arange(s, dtype=np.int64)
    for i in range(s):
        srow = vectors @ vectors[i]
        srow[i] = -np.inf  # the query point is never its own neighbor
        # Sort by similarity desc, then node index asc, take top k.
        order = np.lexsort((col_ids, -srow))[:k]
        vals = srow[order]
        keep = vals > 0.0
        row_cols.append(order[keep])
        row_wts.append(vals[keep])
    lengths = np.fromiter((len(c) for c in row_cols), dtype=np.int64, count=s)
    offsets = np.zeros(s + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    return SparseRowGraph(
        node_count=s,
        row_offsets=offsets,
        col_idx=np.concatenate(row_cols) if offsets[-1] else np.zeros(0, np.int64),
        weights=np.concatenate(row_wts) if offsets[-1] else np.zeros(0, np.float64),
        stochastic=False,
    )


def row_normalize(graph: SparseRowGraph) -> SparseRowGraph:
    """Divide each nonempty row by its sum, marking the result stochastic.

    Empty rows stay empty; such dangling nodes are legitimate (all their
    candidate similarities were dropped) and are handled downstream.
    """
    if graph.stochastic:
        raise ValueError("graph is already row-normalized")
    src = graph.edge_sources()
    sums = np.bincount(src, weights=graph.weights, minlength=graph.node_count)
    new_weights = graph.weights / sums[src] if len(src) else graph.weights.copy()
    return replace(graph, weights=new_weights, stochastic=True)


def transpose(graph: SparseRowGraph) -> SparseRowGraph:
    """Reverse every edge (CSR of the transposed matrix); weights preserved."""
    src = graph.edge_sources()
    order = np.lexsort((src, graph.col_idx))
    new_src = graph.col_idx[order]
    counts = np.bincount(new_src, minlength=graph.node_count)
    offsets = np.zeros(graph.node_count + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseRowGraph(
        node_count=graph.node_count,
        row_offsets=offsets,
        col_idx=src[order],
        weights=graph.weights[order],
        stochastic=False,
    )


def save_edges(graph: SparseRowGraph, path: str | Path) -> Path:
    """Write the graph as TSV lines ``src<TAB>dst<TAB>weight`` (17 sig digits)."""
    path = Path(path)
    src = graph.edge_sources()
    lines = [
        f"{int(s)}\t{int(d)}\t{w:.17g}"
        for s, d, w in zip(src, graph.col_idx, graph.weights)
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def load_edges(path: str | Path, node_count: int | None = None) -> SparseRowGraph:
    """Parse an edge TSV back into a graph.

    The format carries no node-count header, so by default the count is
    inferred as ``max(src, dst) + 1``; pass ``node_count`` explicitly when
    the graph may end in isolated nodes. Weights round-trip within 1 ULP
    because they are printed at 17 significant digits.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"edge file not found: {path}")
    srcs: list[int] = []
    dsts: list[int] = []
    wts: list[float] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"line {lineno}: expected 3 tab-separated fields")
            try:
                srcs.append(int(parts[0]))
                dsts.append(int(parts[1]))
                wts.append(float(parts[2]))
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
    src = np.asarray(srcs, dtype=np.int64)
    dst = np.asarray(dsts, dtype=np.int64)
    w = np.asarray(wts, dtype=np.float64)
    inferred = int(max(src.max(), dst.max())) + 1 if len(src) else 1
    n = node_count if node_count is not None else inferred
    if len(src) and (src.min() < 0 or dst.min() < 0 or inferred > n):
        raise DataError("edge endpoint out of range for node count")
    order = np.argsort(src, kind="stable")  # group rows; keep within-row order
    counts = np.bincount(src, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    graph = SparseRowGraph(
        node_count=n,
        row_offsets=offsets,
        col_idx=dst[order],
        weights=w[order],
        stochastic=False,
    )
    graph.validate()
    return graph
