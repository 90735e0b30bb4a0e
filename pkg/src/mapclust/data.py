"""Embedding and label ingestion, on-disk formats, synthetic datasets.

Embeddings live in two files: ``<name>.meta.json`` holding
``{"count": n, "dim": d, "payload": "<name>.f32le"}`` and a raw payload of
``n * d`` little-endian float32 values, row-major. Labels are UTF-8
newline-delimited tokens, one per embedding row, in row order.

Every ingested vector is L2-normalized so that cosine similarity reduces
to a dot product downstream. Normalization is tolerance-gated: rows whose
norm is already within 1e-6 of 1 pass through bit-unchanged, which makes
save/load round trips exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import SplitMix64

NORM_TOL = 1e-6
ZERO_NORM_FLOOR = 1e-12


@dataclass
class EmbeddingSet:
    """A stack of unit-norm feature vectors (float32, shape (count, dim))."""

    count: int
    dim: int
    vectors: np.ndarray

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingSet":
        """Ingest an (n, d) array, normalizing rows to unit L2 norm."""
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DataError(f"expected a 2-d array, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1:
            raise DataError("embedding set needs at least one vector")
        if d < 2:
            raise DataError(f"embedding dimension must be >= 2, got {d}")
        return cls(count=n, dim=d, vectors=_normalize_rows(arr))

    def __post_init__(self):
        if self.vectors.shape != (self.count, self.dim):
            raise DataError(
                f"vector array shape {self.vectors.shape} does not match "
                f"count={self.count}, dim={self.dim}"
            )


def _normalize_rows(arr: np.ndarray) -> np.ndarray:
    work = arr.astype(np.float64)
    norms = np.sqrt((work * work).sum(axis=1))
    dead = np.flatnonzero(norms < ZERO_NORM_FLOOR)
    if dead.size:
        raise DataError(f"row {int(dead[0])} has near-zero norm; cannot normalize")
    needs = np.abs(norms - 1.0) > NORM_TOL
    work[needs] /= norms[needs, None]
    out = work.astype(np.float32)
    # Rows that were already unit-norm float32 must survive the f32->f64->f32
    # trip bit-exactly; enforce that by copying them through untouched.
    if arr.dtype == np.float32:
        out[~needs] = arr[~needs]
    return out


def save_embeddings(emb: EmbeddingSet, prefix: str | Path) -> tuple[Path, Path]:
    """Write ``<prefix>.meta.json`` and ``<prefix>.f32le``; returns both paths."""
    prefix = Path(prefix)
    meta_path = prefix.with_name(prefix.name + ".meta.json")
    payload_path = prefix.with_name(prefix.name + ".f32le")
    payload = np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes()
    payload_path.write_bytes(payload)
    meta = {"count": emb.count, "dim": emb.dim, "payload": payload_path.name}
    meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    return meta_path, payload_path


def load_embeddings(meta_path: str | Path) -> EmbeddingSet:
    """Load an embedding set from its metadata file.

    Raises DataError on a missing file, a count/dim vs payload size
    mismatch, or a near-zero row (naming the row index).
    """
    meta_path = Path(meta_path)
    if not meta_path.is_file():
        raise DataError(f"metadata file not found: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"metadata file {meta_path} is not valid JSON: {exc}") from exc
    for key in ("count", "dim", "payload"):
        if key not in meta:
            raise DataError(f"metadata file {meta_path} is missing key '{key}'")
    count, dim = int(meta["count"]), int(meta["dim"])
    if count < 1 or dim < 2:
        raise DataError(f"invalid count={count} / dim={dim} in {meta_path}")
    payload_path = meta_path.parent / meta["payload"]
    if not payload_path.is_file():
        raise DataError(f"payload file not found: {payload_path}")
    raw = payload_path.read_bytes()
    expected = count * dim * 4
    if len(raw) != expected:
        raise DataError(
            f"payload length mismatch: {payload_path} holds {len(raw)} bytes, "
            f"count*dim requires {expected}"
        )
    arr = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
    return EmbeddingSet.from_array(arr)


@dataclass
class LabelSet:
    """Identity tokens paired positionally with an EmbeddingSet."""

    labels: list[str]

    @property
    def count(self) -> int:
        return len(self.labels)

    def distinct_count(self) -> int:
        return len(set(self.labels))


def load_labels(path: str | Path) -> LabelSet:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"label file not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline, not an empty label
    if not lines:
        raise DataError(f"label file {path} is empty")
    for i, line in enumerate(lines):
        if line == "":
            raise DataError(f"empty label at line {i + 1} in {path}")
    return LabelSet(labels=lines)


def save_labels(labels: LabelSet, path: str | Path) -> Path:
    path = Path(path)
    path.write_text("\n".join(labels.labels) + "\n", encoding="utf-8")
    return path


@dataclass
class SynthSpec:
    """Parameters for the sphere-mixture synthetic generator.

    Each identity gets a center drawn uniformly from the unit sphere; its
    samples are ``normalize(center + noise_sigma * standard normal)``. The
    per-identity sample count is uniform on [samples_min, samples_max],
    mimicking the heavy per-identity imbalance of real galleries.
    """

    identities: int
    dim: int
    samples_min: int
    samples_max: int
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.identities < 1:
            raise ValueError("identities must be >= 1")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.samples_min < 1:
            raise ValueError("samples_min must be >= 1")
        if self.samples_max < self.samples_min:
            raise ValueError(
                f"samples range is empty: min {self.samples_min} > max {self.samples_max}"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


def _unit_vector(rng: SplitMix64, dim: int) -> list[float]:
    while True:
        v = rng.gauss_vector(dim)
        norm = math.sqrt(math.fsum(x * x for x in v))
        if norm >= ZERO_NORM_FLOOR:
            return [x / norm for x in v]


def generate_synthetic(spec: SynthSpec) -> tuple[EmbeddingSet, LabelSet]:
    """Draw a labeled sphere-mixture dataset, deterministic in spec.seed."""
    rng = SplitMix64(spec.seed)
    rows: list[list[float]] = []
    labels: list[str] = []
    for ident in range(spec.identities):
        center = _unit_vector(rng, spec.dim)
        n_samples = rng.randint(spec.samples_min, spec.samples_max)
        for _ in range(n_samples):
            if spec.noise_sigma == 0.0:
                rows.append(center)
            else:
                while True:
                    noise = rng.gauss_vector(spec.dim)
                    v = [c + spec.noise_sigma * e for c, e in zip(center, noise)]
                    norm = math.sqrt(math.fsum(x * x for x in v))
                    if norm >= ZERO_NORM_FLOOR:
                        rows.append([x / norm for x in v])
                        break
            labels.append(str(ident))
    arr = np.array(rows, dtype=np.float64)
    return EmbeddingSet.from_array(arr), LabelSet(labels=labels)
