"""Greedy two-level codelength minimization over graph partitions.

Per restart: start from singletons, sweep nodes in seeded-random order
moving each to the neighboring module (or a fresh one) with the most
negative codelength delta, repeat sweeps until none moves, then aggregate
modules into super-nodes (inter-module link flows summed, visit masses
pooled) and recurse on the coarser network while that keeps improving;
project back and refine with node-level sweeps. The module-level terms of
the objective are identical across levels for corresponding partitions,
so deltas computed on aggregated networks are exact fine-level deltas.

Everything is deterministic given the seed: sweep orders come from a
splitmix64 stream, equal-delta ties resolve to the smallest module id, and
the cross-restart winner is the lowest codelength (first restart on ties).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .graph import SparseRowGraph
from .mapeq import (
    Partition,
    SolverConfig,
    delta_codelength,
    plogp,
    stationary_distribution,
)
from .rng import SplitMix64

MOVE_GAIN_EPS = 1e-12  # a move must beat this to count as an improvement


@dataclass
class OptimizeResult:
    partition: Partition
    codelength: float
    trace: list[float]              # winning restart: L after each accepted move
    restart_codelengths: list[float]
    seed: int


class _LevelGraph:
    """Flow graph at one aggregation level (no self-flows stored)."""

    def __init__(self, n, out_src, out_dst, out_flow, node_flow):
        self.n = n
        self.node_flow = node_flow
        self.out_src = out_src
        self.out_dst = out_dst
        self.out_flow = out_flow
        self.node_out_total = np.bincount(out_src, weights=out_flow, minlength=n)
        # Python adjacency mirrors; the sweep inner loop lives off these.
        self.out_adj = _adjacency(n, out_src, out_dst, out_flow)
        self.in_adj = _adjacency(n, out_dst, out_src, out_flow)
        self.node_flow_list = node_flow.tolist()
        self.node_out_list = self.node_out_total.tolist()


def _adjacency(n, keys, others, flows):
    order = np.lexsort((others, keys))
    keys_sorted = keys[order]
    bounds = np.searchsorted(keys_sorted, np.arange(n + 1))
    others_sorted = others[order].tolist()
    flows_sorted = flows[order].tolist()
    return [
        (others_sorted[bounds[i] : bounds[i + 1]], flows_sorted[bounds[i] : bounds[i + 1]])
        for i in range(n)
    ]


def _fine_level(P: SparseRowGraph, visit: np.ndarray) -> _LevelGraph:
    src = P.edge_sources()
    return _LevelGraph(
        n=P.node_count,
        out_src=src,
        out_dst=P.col_idx.copy(),
        out_flow=visit[src] * P.weights,
        node_flow=np.asarray(visit, dtype=np.float64),
    )


def _aggregate(lg: _LevelGraph, assign: np.ndarray) -> tuple[_LevelGraph, np.ndarray]:
    """Collapse each module into a super-node; returns (coarse, module->node map)."""
    counts = np.bincount(assign, minlength=lg.n)
    active = np.flatnonzero(counts > 0)
    m = len(active)
    cnode_of_module = np.full(lg.n, -1, dtype=np.int64)
    cnode_of_module[active] = np.arange(m)
    cmod = cnode_of_module[assign]
    node_flow = np.bincount(cmod, weights=lg.node_flow, minlength=m)
    csrc = cmod[lg.out_src]
    cdst = cmod[lg.out_dst]
    keep = csrc != cdst
    key = csrc[keep] * m + cdst[keep]
    uniq, inverse = np.unique(key, return_inverse=True)
    flows = np.bincount(inverse, weights=lg.out_flow[keep], minlength=len(uniq))
    coarse = _LevelGraph(
        n=m,
        out_src=(uniq // m).astype(np.int64),
        out_dst=(uniq % m).astype(np.int64),
        out_flow=flows,
        node_flow=node_flow,
    )
    return coarse, cnode_of_module


class _ModuleState:
    """Mutable module bookkeeping for sweeps at one level.

    ``node_const`` is the fine-level sum of plogp(visit); using it at every
    level makes codelength() report the fine-level objective directly.
    """

    def __init__(self, lg: _LevelGraph, assign: np.ndarray, node_const: float):
        self.lg = lg
        self.mod = np.array(assign, dtype=np.int64, copy=True)
        self.node_const = node_const
        self.resync()

    def resync(self) -> None:
        """Recompute aggregates from assignments (kills incremental drift)."""
        lg = self.lg
        cap = lg.n
        size = np.bincount(self.mod, minlength=cap)
        visit = np.bincount(self.mod, weights=lg.node_flow, minlength=cap)
        src_mod = self.mod[lg.out_src]
        crossing = src_mod != self.mod[lg.out_dst]
        exits = np.bincount(
            src_mod[crossing], weights=lg.out_flow[crossing], minlength=cap
        )
        self.size = size.tolist()
        self.visit = visit.tolist()
        self.exit = exits.tolist()
        self.q_tot = float(exits.sum())
        self.mod_list = self.mod.tolist()
        self.free = [i for i in range(cap) if size[i] == 0]
        heapq.heapify(self.free)

    def codelength(self) -> float:
        bits = plogp(self.q_tot) - self.node_const
        for i, sz in enumerate(self.size):
            if sz > 0:
                ex = self.exit[i]
                bits += plogp(ex + self.visit[i]) - 2.0 * plogp(ex)
        return bits

    def sweep(self, order: list[int], accepted: list[float]) -> int:
        """One pass over ``order``; applies best moves, returns move count."""
        lg = self.lg
        mod_list = self.mod_list
        size, visit, exits = self.size, self.visit, self.exit
        moves = 0
        for node in order:
            s = mod_list[node]
            out_by_mod: dict[int, float] = {}
            for j, f in zip(*lg.out_adj[node]):
                g = mod_list[j]
                out_by_mod[g] = out_by_mod.get(g, 0.0) + f
            in_by_mod: dict[int, float] = {}
            for j, f in zip(*lg.in_adj[node]):
                g = mod_list[j]
                in_by_mod[g] = in_by_mod.get(g, 0.0) + f

            candidates = set(out_by_mod)
            candidates.update(in_by_mod)
            candidates.discard(s)
            fresh = -1
            if size[s] > 1 and self.free:
                fresh = self.free[0]
                candidates.add(fresh)
            if not candidates:
                continue

            p_node = lg.node_flow_list[node]
            out_tot = lg.node_out_list[node]
            out_s = out_by_mod.get(s, 0.0)
            in_s = in_by_mod.get(s, 0.0)
            exit_s = exits[s]
            circ_s = exit_s + visit[s]
            best_m = -1
            best_dl = -MOVE_GAIN_EPS
            for m in sorted(candidates):  # ascending id: ties go to smallest
                out_m = out_by_mod.get(m, 0.0)
                in_m = in_by_mod.get(m, 0.0)
                dl = delta_codelength(
                    self.q_tot, exit_s, exits[m], circ_s, exits[m] + visit[m],
                    p_node, out_tot, out_s, in_s, out_m, in_m,
                )
                if dl < best_dl:
                    best_dl = dl
                    best_m = m
            if best_m < 0:
                continue

            m = best_m
            out_m = out_by_mod.get(m, 0.0)
            in_m = in_by_mod.get(m, 0.0)
            exit_s_new = exit_s - (out_tot - out_s) + in_s
            exit_m_new = exits[m] + (out_tot - out_m) - in_m
            self.q_tot += (exit_s_new - exit_s) + (exit_m_new - exits[m])
            exits[s] = exit_s_new
            exits[m] = exit_m_new
            visit[s] -= p_node
            visit[m] += p_node
            size[s] -= 1
            size[m] += 1
            mod_list[node] = m
            self.mod[node] = m
            if m == fresh:
                heapq.heappop(self.free)
            if size[s] == 0:
                exits[s] = 0.0
                visit[s] = 0.0
                heapq.heappush(self.free, s)
            accepted.append(best_dl)
            moves += 1
        return moves


def _sweep_until_stable(
    state: _ModuleState, rng: SplitMix64, accepted: list[float]
) -> bool:
    moved_any = False
    while True:
        order = list(range(state.lg.n))
        rng.shuffle(order)
        state.resync()
        if state.sweep(order, accepted) == 0:
            return moved_any
        moved_any = True


def _run_restart(
    fine: _LevelGraph, rng: SplitMix64, max_outer: int, node_const: float
) -> tuple[np.ndarray, float, list[float]]:
    state = _ModuleState(fine, np.arange(fine.n), node_const)
    start_bits = state.codelength()
    accepted: list[float] = []
    _sweep_until_stable(state, rng, accepted)
    fine_assign = state.mod

    for _ in range(max_outer):
        improved = False
        cur_lg, cur_assign = fine, fine_assign
        fine_to_cur = np.arange(fine.n)
        while True:
            coarse, cnode_of_module = _aggregate(cur_lg, cur_assign)
            if coarse.n == cur_lg.n:
                break  # every module is a singleton here; nothing to collapse
            fine_to_cur = cnode_of_module[cur_assign[fine_to_cur]]
            cstate = _ModuleState(coarse, np.arange(coarse.n), node_const)
            moved = _sweep_until_stable(cstate, rng, accepted)
            fine_assign = cstate.mod[fine_to_cur]
            if not moved:
                break
            improved = True
            cur_lg, cur_assign = coarse, cstate.mod
        state = _ModuleState(fine, fine_assign, node_const)
        if _sweep_until_stable(state, rng, accepted):
            improved = True
        fine_assign = state.mod
        if not improved:
            break

    final = _ModuleState(fine, fine_assign, node_const)
    bits = final.codelength()
    trace = [start_bits]
    running = start_bits
    for dl in accepted:
        running += dl
        trace.append(running)
    return fine_assign, bits, trace


def optimize_partition_detailed(
    P: SparseRowGraph, cfg: SolverConfig
) -> OptimizeResult:
    if not P.stochastic:
        raise ValueError("optimizer needs a row-normalized graph")
    visit = stationary_distribution(P, cfg)
    fine = _fine_level(P, visit)
    node_const = float(sum(plogp(v) for v in visit.tolist()))

    master = SplitMix64(cfg.seed)
    best_assign: np.ndarray | None = None
    best_bits = float("inf")
    best_trace: list[float] = []
    restart_bits: list[float] = []
    for _ in range(cfg.restarts):
        rng = master.spawn()
        assign, bits, trace = _run_restart(fine, rng, cfg.max_outer_passes, node_const)
        restart_bits.append(bits)
        if bits < best_bits:
            best_assign, best_bits, best_trace = assign, bits, trace

    # The greedy search cannot do worse than the trivial partitions; enforce it.
    for baseline in (np.zeros(fine.n, dtype=np.int64), np.arange(fine.n)):
        bits = _ModuleState(fine, baseline, node_const).codelength()
        if bits < best_bits:
            best_assign, best_bits, best_trace = baseline, bits, [bits]

    return OptimizeResult(
        partition=Partition.from_labels(best_assign),
        codelength=best_bits,
        trace=best_trace,
        restart_codelengths=restart_bits,
        seed=cfg.seed,
    )


def optimize_partition(
    P: SparseRowGraph, cfg: SolverConfig
) -> tuple[Partition, float]:
    """Best partition found across seeded restarts and its codelength (bits)."""
    result = optimize_partition_detailed(P, cfg)
    return result.partition, result.codelength
