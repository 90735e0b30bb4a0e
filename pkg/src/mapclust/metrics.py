"""Clustering evaluation: pairwise/BCubed F-scores plus identity-level
metrics (identity F-score at a quality threshold, predicted-cluster and
incorrect-singleton counts as percentages of the true identity count).

The identity-level metrics exist because the traditional pair-based scores
are dominated by large clusters and say nothing about how well the number
of predicted clusters tracks the number of true identities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .data import LabelSet
from .errors import DataError
from .mapeq import Partition


@dataclass
class MetricsReport:
    f_pairwise: float
    f_bcubed: float
    f_identity: dict[float, float]   # theta -> score
    r_identity_pct: float
    r_singleton_pct: float
    num_clusters: int
    num_true: int
    num_bad_singletons: int

    def to_dict(self) -> dict:
        return {
            "f_pairwise": self.f_pairwise,
            "f_bcubed": self.f_bcubed,
            "f_identity": {f"{t:g}": v for t, v in self.f_identity.items()},
            "r_identity_pct": self.r_identity_pct,
            "r_singleton_pct": self.r_singleton_pct,
            "num_clusters": self.num_clusters,
            "num_true": self.num_true,
            "num_bad_singletons": self.num_bad_singletons,
        }


def _check_lengths(pred: Partition, truth: LabelSet) -> None:
    if len(pred.assignments) != truth.count:
        raise DataError(
            f"partition covers {len(pred.assignments)} nodes but label set "
            f"has {truth.count}"
        )


def _contingency(pred: Partition, truth: LabelSet):
    """(cell counts, cluster sizes, identity sizes); identities keyed by token."""
    cells: Counter = Counter()
    cluster_sizes: Counter = Counter()
    identity_sizes: Counter = Counter()
    for c, t in zip(pred.assignments.tolist(), truth.labels):
        cells[(c, t)] += 1
        cluster_sizes[c] += 1
        identity_sizes[t] += 1
    return cells, cluster_sizes, identity_sizes


def _harmonic(p: float, r: float) -> float:
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def pairwise_fscore(pred: Partition, truth: LabelSet) -> float:
    """F-score over unordered pairs (same-cluster vs same-identity).

    A ratio with zero denominator counts as 0, so an all-singleton
    prediction of multi-image identities scores 0.
    """
    _check_lengths(pred, truth)
    cells, cluster_sizes, identity_sizes = _contingency(pred, truth)
    both = sum(n * (n - 1) // 2 for n in cells.values())
    same_cluster = sum(n * (n - 1) // 2 for n in cluster_sizes.values())
    same_identity = sum(n * (n - 1) // 2 for n in identity_sizes.values())
    precision = both / same_cluster if same_cluster else 0.0
    recall = both / same_identity if same_identity else 0.0
    return _harmonic(precision, recall)


def bcubed_fscore(pred: Partition, truth: LabelSet) -> float:
    """Harmonic mean of element-averaged BCubed precision and recall."""
    _check_lengths(pred, truth)
    cells, cluster_sizes, identity_sizes = _contingency(pred, truth)
    s = truth.count
    # Each cell contributes n * (n / |C|) to the precision sum, etc.
    prec = sum(n * n / cluster_sizes[c] for (c, _), n in cells.items()) / s
    rec = sum(n * n / identity_sizes[t] for (_, t), n in cells.items()) / s
    return _harmonic(prec, rec)


def identity_fscore(pred: Partition, truth: LabelSet, theta: float) -> float:
    """F-score over optimally associated (cluster, identity) pairs.

    A pair qualifies when its precision and recall both strictly exceed
    theta; with theta >= 0.5 each cluster and each identity can appear in
    at most one qualifying pair, which the counting asserts.
    """
    if not 0.5 <= theta < 1.0:
        raise ValueError(f"theta must lie in [0.5, 1), got {theta}")
    _check_lengths(pred, truth)
    cells, cluster_sizes, identity_sizes = _contingency(pred, truth)
    matched_clusters: set = set()
    matched_identities: set = set()
    pairs = 0
    for (c, t), n in cells.items():
        if n / cluster_sizes[c] > theta and n / identity_sizes[t] > theta:
            assert c not in matched_clusters and t not in matched_identities, (
                "majority overlap must be unique at theta >= 0.5"
            )
            matched_clusters.add(c)
            matched_identities.add(t)
            pairs += 1
    precision = pairs / pred.num_clusters
    recall = pairs / len(identity_sizes)
    return _harmonic(precision, recall)


def ratio_metrics(pred: Partition, truth: LabelSet) -> tuple[float, float, int]:
    """(cluster-count ratio %, incorrect-singleton ratio %, singleton count).

    A predicted singleton is incorrect iff its sole member's true identity
    holds two or more images in the evaluated set; a one-image identity
    predicted as a singleton is a correct outcome and is not counted.
    """
    _check_lengths(pred, truth)
    _, cluster_sizes, identity_sizes = _contingency(pred, truth)
    num_true = len(identity_sizes)
    singleton_clusters = {c for c, n in cluster_sizes.items() if n == 1}
    bad = 0
    for c, t in zip(pred.assignments.tolist(), truth.labels):
        if c in singleton_clusters and identity_sizes[t] >= 2:
            bad += 1
    r_identity = 100.0 * pred.num_clusters / num_true
    r_singleton = 100.0 * bad / num_true
    return r_identity, r_singleton, bad


def compute_report(
    pred: Partition, truth: LabelSet, thetas=(0.5, 0.9)
) -> MetricsReport:
    """Evaluate every metric family against ground-truth labels."""
    r_identity, r_singleton, bad = ratio_metrics(pred, truth)
    return MetricsReport(
        f_pairwise=pairwise_fscore(pred, truth),
        f_bcubed=bcubed_fscore(pred, truth),
        f_identity={t: identity_fscore(pred, truth, t) for t in thetas},
        r_identity_pct=r_identity,
        r_singleton_pct=r_singleton,
        num_clusters=pred.num_clusters,
        num_true=truth.distinct_count(),
        num_bad_singletons=bad,
    )
