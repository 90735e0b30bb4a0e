"""End-to-end clustering runs: kNN graph -> normalize -> prune -> partition.

Also hosts the hyper-parameter sensitivity grid used by the ablation
studies. Defaults pin k = 256 neighbors and an outlier-detection window of
20; tiny datasets clamp k to node_count - 1 with a warning recorded in the
run summary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import EmbeddingSet, LabelSet
from .graph import build_knn_graph, row_normalize
from .mapeq import Partition, SolverConfig
from .metrics import MetricsReport, compute_report
from .optimize import optimize_partition_detailed
from .outliers import MODE_ADAPTIVE, MODE_NONE, ODConfig, SwitchPointReport, adjust_transitions


@dataclass
class PipelineConfig:
    k: int = 256
    od: ODConfig = field(default_factory=ODConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    emit_diagnostics: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")


@dataclass
class RunSummary:
    """Everything a run reports besides the partition itself.

    ``stage_seconds`` is wall-clock and therefore volatile; writers that
    need byte-stable output (the CLI) drop it from serialized summaries.
    """

    k_requested: int
    k_used: int
    od_mode: str
    od_window: int
    num_nodes: int
    edges_before_od: int
    edges_after_od: int
    skipped_rows: int
    codelength_bits: float
    num_clusters: int
    num_singletons: int
    restarts: int
    seed: int
    teleport: float
    warnings: list[str] = field(default_factory=list)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    diagnostics: list[dict] | None = None

    def to_dict(self, with_timings: bool = True) -> dict:
        out = {
            "k_requested": self.k_requested,
            "k_used": self.k_used,
            "od_mode": self.od_mode,
            "od_window": self.od_window,
            "num_nodes": self.num_nodes,
            "edges_before_od": self.edges_before_od,
            "edges_after_od": self.edges_after_od,
            "skipped_rows": self.skipped_rows,
            "codelength_bits": self.codelength_bits,
            "num_clusters": self.num_clusters,
            "num_singletons": self.num_singletons,
            "restarts": self.restarts,
            "seed": self.seed,
            "teleport": self.teleport,
            "warnings": self.warnings,
        }
        if with_timings:
            out["stage_seconds"] = self.stage_seconds
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics
        return out


def cluster_embeddings(
    emb: EmbeddingSet, cfg: PipelineConfig
) -> tuple[Partition, RunSummary]:
    """Run the full pipeline on an embedding set."""
    warnings: list[str] = []
    timings: dict[str, float] = {}
    k = cfg.k
    if k > emb.count - 1:
        k = emb.count - 1
        warnings.append(f"k clamped from {cfg.k} to {k} (only {emb.count} vectors)")
    if k < 1:
        raise ValueError("need at least 2 vectors to build a neighbor graph")

    t0 = time.perf_counter()
    affinity = build_knn_graph(emb, k)
    timings["knn_graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    transition = row_normalize(affinity)
    timings["normalize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    adjusted, reports = adjust_transitions(transition, cfg.od, raw=affinity)
    timings["outlier_detection"] = time.perf_counter() - t0
    if adjusted.edge_count > transition.edge_count:
        raise AssertionError("outlier detection must never add edges")
    skipped = sum(1 for r in reports if r.skipped)

    t0 = time.perf_counter()
    result = optimize_partition_detailed(adjusted, cfg.solver)
    timings["optimize"] = time.perf_counter() - t0

    sizes = result.partition.sizes()
    summary = RunSummary(
        k_requested=cfg.k,
        k_used=k,
        od_mode=cfg.od.mode,
        od_window=cfg.od.window,
        num_nodes=emb.count,
        edges_before_od=transition.edge_count,
        edges_after_od=adjusted.edge_count,
        skipped_rows=skipped,
        codelength_bits=result.codelength,
        num_clusters=result.partition.num_clusters,
        num_singletons=int((sizes == 1).sum()),
        restarts=cfg.solver.restarts,
        seed=cfg.solver.seed,
        teleport=cfg.solver.teleport,
        warnings=warnings,
        stage_seconds=timings,
        diagnostics=[r.to_dict() for r in reports] if cfg.emit_diagnostics else None,
    )
    return result.partition, summary


@dataclass
class GridCell:
    k: int
    window: int
    report: MetricsReport
    summary: RunSummary


@dataclass
class GridResult:
    cells: list[GridCell]
    mean: dict[str, float]
    std: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"k": c.k, "window": c.window, "metrics": c.report.to_dict()}
                for c in self.cells
            ],
            "mean": self.mean,
            "std": self.std,
        }


def _metric_columns(report: MetricsReport) -> dict[str, float]:
    cols = {
        "f_pairwise": report.f_pairwise,
        "f_bcubed": report.f_bcubed,
        "r_identity_pct": report.r_identity_pct,
        "r_singleton_pct": report.r_singleton_pct,
    }
    for theta, value in report.f_identity.items():
        cols[f"f_identity_{theta:g}"] = value
    return cols


def run_ablation_grid(
    emb: EmbeddingSet,
    truth: LabelSet,
    k_values,
    window_values,
    solver: SolverConfig | None = None,
    thetas=(0.5, 0.9),
) -> GridResult:
    """Cluster and evaluate once per (k, window) cell; summarize mean/std.

    Std is the population standard deviation across cells, matching how
    cell-to-cell stability is reported.
    """
    k_values = list(k_values)
    window_values = list(window_values)
    if not k_values or not window_values:
        raise ValueError("k and window grids must be nonempty")
    solver = solver if solver is not None else SolverConfig()
    cells: list[GridCell] = []
    for k in k_values:
        for window in window_values:
            cfg = PipelineConfig(
                k=k, od=ODConfig(window=window, mode=MODE_ADAPTIVE), solver=solver
            )
            partition, summary = cluster_embeddings(emb, cfg)
            report = compute_report(partition, truth, thetas)
            cells.append(GridCell(k=k, window=window, report=report, summary=summary))
    columns = [_metric_columns(c.report) for c in cells]
    mean = {name: float(np.mean([c[name] for c in columns])) for name in columns[0]}
    std = {name: float(np.std([c[name] for c in columns])) for name in columns[0]}
    return GridResult(cells=cells, mean=mean, std=std)


__all__ = [
    "PipelineConfig",
    "RunSummary",
    "GridCell",
    "GridResult",
    "cluster_embeddings",
    "run_ablation_grid",
    "MODE_ADAPTIVE",
    "MODE_NONE",
    "ODConfig",
    "SwitchPointReport",
]
