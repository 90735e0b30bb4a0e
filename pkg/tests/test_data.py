import json

import numpy as np
import pytest

from mapclust.data import (
    EmbeddingSet,
    LabelSet,
    SynthSpec,
    generate_synthetic,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
)
from mapclust.errors import DataError

from oracles import cosine, l2_norm


def _write_dataset(tmp_path, count, dim, payload: bytes, name="emb"):
    (tmp_path / f"{name}.f32le").write_bytes(payload)
    meta = {"count": count, "dim": dim, "payload": f"{name}.f32le"}
    meta_path = tmp_path / f"{name}.meta.json"
    meta_path.write_text(json.dumps(meta))
    return meta_path


class TestLoadEmbeddings:
    def test_axis_vectors_normalized(self, tmp_path):
        payload = np.array([[1, 0, 0], [0, 2, 0]], dtype="<f4").tobytes()
        emb = load_embeddings(_write_dataset(tmp_path, 2, 3, payload))
        assert emb.count == 2 and emb.dim == 3
        np.testing.assert_array_equal(emb.vectors[0], [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(emb.vectors[1], [0.0, 1.0, 0.0])

    def test_payload_length_mismatch(self, tmp_path):
        payload = np.zeros(4, dtype="<f4").tobytes()
        meta = _write_dataset(tmp_path, 1, 2, payload)
        with pytest.raises(DataError, match="payload length mismatch"):
            load_embeddings(meta)

    def test_random_payload_norms(self, tmp_path):
        rng = np.random.default_rng(3)
        payload = rng.normal(size=(3, 64)).astype("<f4").tobytes()
        emb = load_embeddings(_write_dataset(tmp_path, 3, 64, payload))
        for row in emb.vectors:
            assert abs(l2_norm(row) - 1.0) < 1e-6

    def test_zero_row_rejected(self, tmp_path):
        payload = np.array([[1, 0], [0, 0]], dtype="<f4").tobytes()
        meta = _write_dataset(tmp_path, 2, 2, payload)
        with pytest.raises(DataError, match="row 1"):
            load_embeddings(meta)

    def test_missing_files(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_embeddings(tmp_path / "absent.meta.json")
        meta = tmp_path / "x.meta.json"
        meta.write_text(json.dumps({"count": 1, "dim": 2, "payload": "x.f32le"}))
        with pytest.raises(DataError, match="payload file not found"):
            load_embeddings(meta)


class TestRoundTrip:
    def test_save_load_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        emb = EmbeddingSet.from_array(rng.normal(size=(40, 9)))
        save_embeddings(emb, tmp_path / "rt")
        again = load_embeddings(tmp_path / "rt.meta.json")
        assert again.count == emb.count and again.dim == emb.dim
        assert np.array_equal(
            again.vectors.view(np.uint32), emb.vectors.view(np.uint32)
        )

    def test_double_round_trip_stable(self, tmp_path):
        emb, _ = generate_synthetic(
            SynthSpec(identities=3, dim=8, samples_min=2, samples_max=5,
                      noise_sigma=0.3, seed=5)
        )
        save_embeddings(emb, tmp_path / "a")
        first = load_embeddings(tmp_path / "a.meta.json")
        save_embeddings(first, tmp_path / "b")
        second = load_embeddings(tmp_path / "b.meta.json")
        assert np.array_equal(
            first.vectors.view(np.uint32), second.vectors.view(np.uint32)
        )


class TestLabels:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("a\na\nb\n")
        labs = load_labels(path)
        assert labs.count == 3
        assert labs.labels == ["a", "a", "b"]
        assert labs.distinct_count() == 2

    def test_blank_line_names_position(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("a\n\nb\n")
        with pytest.raises(DataError, match="line 2"):
            load_labels(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_labels(path)

    def test_thousand_lines_distinct_recount(self, tmp_path):
        rng = np.random.default_rng(7)
        tokens = [str(int(x)) for x in rng.integers(0, 200, size=1000)]
        path = save_labels(LabelSet(tokens), tmp_path / "big.txt")
        labs = load_labels(path)
        assert labs.count == 1000
        # independent second pass
        seen = set()
        for tok in path.read_text().splitlines():
            seen.add(tok)
        assert labs.distinct_count() == len(seen)

    def test_label_round_trip(self, tmp_path):
        labs = LabelSet(["x", "y", "x"])
        path = save_labels(labs, tmp_path / "l.txt")
        assert load_labels(path).labels == labs.labels


class TestSynth:
    def test_zero_noise_collapses(self):
        emb, labs = generate_synthetic(
            SynthSpec(identities=1, dim=4, samples_min=3, samples_max=3,
                      noise_sigma=0.0, seed=1)
        )
        assert emb.count == 3
        assert np.array_equal(emb.vectors[0], emb.vectors[1])
        assert np.array_equal(emb.vectors[0], emb.vectors[2])
        assert abs(l2_norm(emb.vectors[0]) - 1.0) < 1e-6
        assert labs.labels == ["0", "0", "0"]

    def test_determinism_bit_identical(self):
        spec = SynthSpec(identities=2, dim=8, samples_min=5, samples_max=5,
                         noise_sigma=0.1, seed=7)
        a, la = generate_synthetic(spec)
        b, lb = generate_synthetic(spec)
        assert np.array_equal(a.vectors.view(np.uint32), b.vectors.view(np.uint32))
        assert la.labels == lb.labels

    def test_within_identity_cosine_dominates(self):
        emb, labs = generate_synthetic(
            SynthSpec(identities=50, dim=32, samples_min=10, samples_max=40,
                      noise_sigma=0.2, seed=99)
        )
        vectors = emb.vectors.tolist()
        same, cross = [], []
        for i in range(0, emb.count, 7):      # subsample rows to keep it quick
            for j in range(i + 1, emb.count, 3):
                value = cosine(vectors[i], vectors[j])
                (same if labs.labels[i] == labs.labels[j] else cross).append(value)
        assert sum(same) / len(same) > sum(cross) / len(cross)

    def test_unit_norms(self):
        emb, _ = generate_synthetic(
            SynthSpec(identities=5, dim=16, samples_min=1, samples_max=6,
                      noise_sigma=0.5, seed=3)
        )
        for row in emb.vectors:
            assert abs(l2_norm(row) - 1.0) < 1e-6

    def test_sample_counts_within_range(self):
        emb, labs = generate_synthetic(
            SynthSpec(identities=20, dim=4, samples_min=2, samples_max=9,
                      noise_sigma=0.1, seed=13)
        )
        from collections import Counter

        counts = Counter(labs.labels)
        assert len(counts) == 20
        assert all(2 <= c <= 9 for c in counts.values())
        assert emb.count == sum(counts.values())

    def test_invalid_spec(self):
        with pytest.raises(ValueError, match="samples"):
            SynthSpec(identities=1, dim=4, samples_min=5, samples_max=3,
                      noise_sigma=0.0, seed=0)
        with pytest.raises(ValueError):
            SynthSpec(identities=0, dim=4, samples_min=1, samples_max=1,
                      noise_sigma=0.0, seed=0)
        with pytest.raises(ValueError):
            SynthSpec(identities=1, dim=4, samples_min=1, samples_max=1,
                      noise_sigma=-0.1, seed=0)
