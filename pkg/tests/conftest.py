import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from mapclust.data import EmbeddingSet, LabelSet, SynthSpec, generate_synthetic
from mapclust.graph import from_edge_lists


@pytest.fixture
def two_cycle():
    """Two nodes exchanging all probability mass."""
    return from_edge_lists(2, [([1], [1.0]), ([0], [1.0])], stochastic=True)


@pytest.fixture
def two_cliques_bridged():
    """Two tight pairs with a weak 0<->2 bridge; affinity weights (not yet
    normalized). The optimal two-module split is {0,1} / {2,3}."""
    return from_edge_lists(
        4,
        [
            ([1, 2], [1.0, 0.1]),
            ([0], [1.0]),
            ([3, 0], [1.0, 0.1]),
            ([2], [1.0]),
        ],
        stochastic=False,
    )


@pytest.fixture
def two_blobs():
    """Two well-separated identities, 20 points each, d=16, sigma=0.05."""
    spec = SynthSpec(
        identities=2, dim=16, samples_min=20, samples_max=20,
        noise_sigma=0.05, seed=20240117,
    )
    return generate_synthetic(spec)


def random_graph(rng: np.random.Generator, n: int, max_out: int = 4,
                 stochastic: bool = True) -> "from_edge_lists":
    """Random weighted digraph where every node has at least one out-edge."""
    rows = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        deg = int(rng.integers(1, min(max_out, n - 1) + 1))
        targets = sorted(rng.choice(others, size=deg, replace=False).tolist())
        weights = rng.uniform(0.1, 1.0, size=deg)
        if stochastic:
            weights = weights / weights.sum()
        rows.append((targets, weights.tolist()))
    return from_edge_lists(n, rows, stochastic=stochastic)


def random_partition(rng: np.random.Generator, n: int):
    """Random assignment with contiguous first-appearance ids."""
    from mapclust.mapeq import Partition

    raw = rng.integers(0, max(1, int(rng.integers(1, n + 1))), size=n)
    return Partition.from_labels(raw)
