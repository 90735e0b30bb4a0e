"""Two-level codelength objective for partitions of a transition graph.

A random walk over the transition matrix is described with a two-level
code: an index codebook used whenever the walker exits a module, and one
codebook per module covering its member nodes plus the exit event. The
expected description length per step, in bits, is

    L = q * H(module exit rates / q)
      + sum_i circ_i * H({exit_i / circ_i} + {p_a / circ_i : a in module i})

where p_a are stationary visit rates, exit_i is module i's per-step link
exit flow, q the total exit flow, and circ_i = exit_i + visit mass of i.
``map_equation_direct`` evaluates this form literally. An algebraic
regrouping used by the optimizer's hot path is ``map_equation_fast``:

    L = plogp(q) - 2 * sum_i plogp(exit_i) + sum_i plogp(circ_i)
      - sum_a plogp(p_a),        plogp(x) = x * log2(x)

whose last term is partition-independent.

Visit rates come from power iteration with teleportation (probability
``teleport`` of jumping to a uniformly random node) plus uniform
redistribution of dangling-row mass. Teleportation smooths the walk but is
unrecorded: exit flows count only real link flows p_a * P(a, b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .graph import SparseRowGraph, transpose

FLOW_TOL = 1e-12


def plogp(x: float) -> float:
    """x * log2(x), extended with 0 at x <= 0 (guards -0.0-scale noise)."""
    if x <= 0.0:
        return 0.0
    return x * math.log2(x)


def _plogp_arr(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


@dataclass
class Partition:
    """Node-to-cluster assignment with contiguous ids [0, num_clusters)."""

    assignments: np.ndarray
    num_clusters: int

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        n = self.num_clusters
        if len(self.assignments) == 0:
            raise ValueError("partition of zero nodes")
        seen = np.bincount(self.assignments, minlength=n if n > 0 else 0)
        if self.assignments.min() < 0 or self.assignments.max() >= n:
            raise ValueError("cluster id out of range")
        if len(seen) != n or np.any(seen == 0):
            raise ValueError("cluster ids must be contiguous and all non-empty")

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Relabel arbitrary integer group ids contiguously by first appearance."""
        labels = np.asarray(labels, dtype=np.int64)
        remap: dict[int, int] = {}
        out = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels.tolist()):
            if lab not in remap:
                remap[lab] = len(remap)
            out[i] = remap[lab]
        return cls(assignments=out, num_clusters=len(remap))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.num_clusters)


@dataclass
class FlowStats:
    """Per-node visit rates and per-module flow aggregates."""

    visit: np.ndarray         # stationary visit rate per node, sums to 1
    module_exit: np.ndarray   # link exit flow per module
    module_circ: np.ndarray   # module_exit + member visit mass
    total_exit: float
    teleport: float


@dataclass
class SolverConfig:
    teleport: float = 0.15
    power_tol: float = 1e-12
    power_max_iter: int = 10_000
    seed: int = 0
    restarts: int = 5
    max_outer_passes: int = 50

    def __post_init__(self):
        if not 0.0 <= self.teleport < 1.0:
            raise ValueError("teleport must lie in [0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.power_max_iter < 1 or self.power_tol <= 0.0:
            raise ValueError("bad power-iteration settings")


def stationary_distribution(P: SparseRowGraph, cfg: SolverConfig) -> np.ndarray:
    """Ergodic visit rates by power iteration.

    One step maps p to (1 - t) * (p P + dangling_mass * u) + t * u with u
    uniform; iteration stops when the L1 change drops to power_tol.
    Raises ConvergenceError (carrying the last residual) if the budget of
    power_max_iter steps is exhausted first.
    """
    if not P.stochastic:
        raise ValueError("stationary distribution needs a row-normalized graph")
    n = P.node_count
    src = P.edge_sources()
    dst = P.col_idx
    w = P.weights
    dangling = np.flatnonzero(P.row_lengths() == 0)
    tau = cfg.teleport
    p = np.full(n, 1.0 / n)
    resid = math.inf
    for _ in range(cfg.power_max_iter):
        link = np.bincount(dst, weights=p[src] * w, minlength=n)
        loose = p[dangling].sum()
        nxt = (1.0 - tau) * (link + loose / n) + tau / n
        nxt /= nxt.sum()
        resid = float(np.abs(nxt - p).sum())
        p = nxt
        if resid <= cfg.power_tol:
            return p
    raise ConvergenceError(
        f"power iteration: residual {resid:.3e} after {cfg.power_max_iter} "
        f"iterations (tolerance {cfg.power_tol:.1e})",
        residual=resid,
        iterations=cfg.power_max_iter,
    )


def compute_flow(
    P: SparseRowGraph,
    partition: Partition,
    visit: np.ndarray,
    teleport: float = 0.0,
) -> FlowStats:
    """Aggregate link flows into per-module exit and usage rates."""
    if len(partition.assignments) != P.node_count or len(visit) != P.node_count:
        raise ValueError("partition/visit lengths do not match the graph")
    mod = partition.assignments
    src = P.edge_sources()
    flows = visit[src] * P.weights
    crossing = mod[src] != mod[P.col_idx]
    module_exit = np.bincount(
        mod[src][crossing], weights=flows[crossing], minlength=partition.num_clusters
    )
    module_visit = np.bincount(mod, weights=visit, minlength=partition.num_clusters)
    return FlowStats(
        visit=np.asarray(visit, dtype=np.float64),
        module_exit=module_exit,
        module_circ=module_exit + module_visit,
        total_exit=float(module_exit.sum()),
        teleport=teleport,
    )


def _check_flow(P: SparseRowGraph, partition: Partition, flow: FlowStats) -> None:
    n_mod = partition.num_clusters
    if (
        len(flow.visit) != P.node_count
        or len(flow.module_exit) != n_mod
        or len(flow.module_circ) != n_mod
    ):
        raise ValueError("flow stats shape does not match graph/partition")
    if abs(flow.visit.sum() - 1.0) > 1e-9:
        raise ValueError("visit rates do not sum to 1")
    if abs(flow.total_exit - flow.module_exit.sum()) > FLOW_TOL:
        raise ValueError("total exit flow disagrees with per-module exits")
    module_visit = np.bincount(
        partition.assignments, weights=flow.visit, minlength=n_mod
    )
    if np.any(np.abs(flow.module_circ - (flow.module_exit + module_visit)) > FLOW_TOL):
        raise ValueError("module usage rates inconsistent with exits + visits")


def map_equation_direct(
    P: SparseRowGraph, partition: Partition, flow: FlowStats
) -> float:
    """Entropy-form evaluation of the two-level codelength, in bits."""
    _check_flow(P, partition, flow)
    q = flow.total_exit
    bits = 0.0
    if q > 0.0:
        rates = flow.module_exit / q
        pos = rates > 0.0
        bits += q * float(-(rates[pos] * np.log2(rates[pos])).sum())
    order = np.argsort(partition.assignments, kind="stable")
    bounds = np.searchsorted(
        partition.assignments[order], np.arange(partition.num_clusters + 1)
    )
    for i in range(partition.num_clusters):
        circ = flow.module_circ[i]
        if circ <= 0.0:
            continue
        members = order[bounds[i] : bounds[i + 1]]
        parts = np.concatenate(([flow.module_exit[i]], flow.visit[members])) / circ
        pos = parts > 0.0
        bits += circ * float(-(parts[pos] * np.log2(parts[pos])).sum())
    return bits


def map_equation_fast(flow: FlowStats) -> float:
    """Regrouped evaluation; equals the direct form to ~1e-12."""
    return float(
        plogp(flow.total_exit)
        - 2.0 * _plogp_arr(flow.module_exit).sum()
        + _plogp_arr(flow.module_circ).sum()
        - _plogp_arr(flow.visit).sum()
    )


def delta_codelength(
    q_tot: float,
    exit_s: float,
    exit_m: float,
    circ_s: float,
    circ_m: float,
    p_node: float,
    out_tot: float,
    out_s: float,
    in_s: float,
    out_m: float,
    in_m: float,
) -> float:
    """Codelength change from moving one node between modules.

    Only the source/target exit flows, their usage rates, and the total
    exit flow change; the per-node visit term cancels. Inputs are the
    node's flow to/from each module (out_*, in_*) and its total outflow.
    """
    exit_s_new = exit_s - (out_tot - out_s) + in_s
    exit_m_new = exit_m + (out_tot - out_m) - in_m
    q_new = q_tot + (exit_s_new - exit_s) + (exit_m_new - exit_m)
    circ_s_new = exit_s_new + (circ_s - exit_s) - p_node
    circ_m_new = exit_m_new + (circ_m - exit_m) + p_node
    return (
        plogp(q_new)
        - plogp(q_tot)
        - 2.0 * (plogp(exit_s_new) - plogp(exit_s) + plogp(exit_m_new) - plogp(exit_m))
        + plogp(circ_s_new)
        - plogp(circ_s)
        + plogp(circ_m_new)
        - plogp(circ_m)
    )


def save_partition(partition: Partition, path) -> None:
    """Write TSV lines ``node_index<TAB>cluster_id`` in node order."""
    from pathlib import Path

    lines = [f"{i}\t{c}" for i, c in enumerate(partition.assignments.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_partition(path) -> Partition:
    """Read a partition TSV; every node 0..S-1 must appear exactly once."""
    from pathlib import Path

    from .errors import DataError

    path = Path(path)
    if not path.is_file():
        raise DataError(f"partition file not found: {path}")
    pairs: dict[int, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"line {lineno}: expected node<TAB>cluster")
            try:
                node, cluster = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            if node in pairs:
                raise DataError(f"line {lineno}: node {node} assigned twice")
            pairs[node] = cluster
    n = len(pairs)
    if n == 0:
        raise DataError(f"partition file {path} is empty")
    if set(pairs) != set(range(n)):
        raise DataError("partition must cover node indices 0..S-1 exactly")
    return Partition.from_labels([pairs[i] for i in range(n)])


def move_delta(
    P: SparseRowGraph,
    flow: FlowStats,
    partition: Partition,
    node: int,
    target: int,
    reverse: SparseRowGraph | None = None,
) -> float:
    """Delta-L for moving ``node`` into module ``target``.

    ``target == partition.num_clusters`` denotes a fresh empty module.
    Pass ``reverse`` (the transposed graph) to amortize in-edge lookups
    over many calls.
    """
    mod = partition.assignments
    source = int(mod[node])
    if target == source:
        raise ValueError("target module equals the node's current module")
    if not 0 <= target <= partition.num_clusters:
        raise ValueError(f"target module {target} out of range")
    if reverse is None:
        reverse = transpose(P)
    fresh = target == partition.num_clusters

    cols, wts = P.row(node)
    out_flows = flow.visit[node] * wts
    out_tot = float(out_flows.sum())
    out_mods = mod[cols]
    out_s = float(out_flows[out_mods == source].sum())
    out_m = 0.0 if fresh else float(out_flows[out_mods == target].sum())

    in_srcs, in_wts = reverse.row(node)
    in_flows = flow.visit[in_srcs] * in_wts
    in_mods = mod[in_srcs]
    in_s = float(in_flows[in_mods == source].sum())
    in_m = 0.0 if fresh else float(in_flows[in_mods == target].sum())

    exit_m = 0.0 if fresh else float(flow.module_exit[target])
    circ_m = 0.0 if fresh else float(flow.module_circ[target])
    return delta_codelength(
        flow.total_exit,
        float(flow.module_exit[source]),
        exit_m,
        float(flow.module_circ[source]),
        circ_m,
        float(flow.visit[node]),
        out_tot,
        out_s,
        in_s,
        out_m,
        in_m,
    )
