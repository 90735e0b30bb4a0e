import math

import numpy as np
import pytest

from mapclust.data import LabelSet, SynthSpec, generate_synthetic
from mapclust.graph import build_knn_graph, from_edge_lists, row_normalize
from mapclust.outliers import (
    MODE_FIXED,
    MODE_NONE,
    ODConfig,
    RankedRow,
    adjust_transitions,
    detect_switch_point,
    precision_recall_at,
    rank_row,
)

from oracles import switch_point_reference


def _ranked(probs) -> RankedRow:
    probs = np.asarray(probs, dtype=np.float64)
    return RankedRow(
        node=0,
        order=np.arange(1, len(probs) + 1),
        probs=probs,
        diffs=probs[:-1] - probs[1:],
    )


def _random_descending_row(rng, length: int) -> np.ndarray:
    vals = np.sort(rng.uniform(1e-4, 1.0, size=length))[::-1]
    return vals / vals.sum()


def planted_drop_probs() -> np.ndarray:
    head = [0.15, 0.14, 0.13, 0.12, 0.11]
    tail = np.linspace(0.004, 0.001, 60).tolist()
    return np.array(head + tail)


class TestRankRow:
    def test_orders_by_probability_then_index(self):
        g = from_edge_lists(
            8,
            [([3, 1, 7], [0.2, 0.5, 0.3])] + [([], [])] * 7,
            stochastic=True,
        )
        row = rank_row(g, 0)
        assert row.order.tolist() == [1, 7, 3]
        np.testing.assert_allclose(row.probs, [0.5, 0.3, 0.2])
        np.testing.assert_allclose(row.diffs, [0.2, 0.1])

    def test_uniform_row_zero_diffs(self):
        g = from_edge_lists(
            5, [([1, 2, 3, 4], [0.25] * 4)] + [([], [])] * 4, stochastic=True
        )
        row = rank_row(g, 0)
        np.testing.assert_array_equal(row.diffs, [0.0, 0.0, 0.0])

    def test_tie_breaks_toward_smaller_neighbor(self):
        g = from_edge_lists(
            4, [([3, 1, 2], [0.25, 0.5, 0.25])] + [([], [])] * 3, stochastic=True
        )
        row = rank_row(g, 0)
        assert row.order.tolist() == [1, 2, 3]

    def test_random_row_matches_sort_oracle(self):
        rng = np.random.default_rng(0)
        weights = rng.uniform(0.001, 1.0, size=256)
        weights /= weights.sum()
        targets = list(range(1, 257))
        g = from_edge_lists(
            257, [(targets, weights.tolist())] + [([], [])] * 256, stochastic=True
        )
        row = rank_row(g, 0)
        assert np.all(np.diff(row.probs) <= 0)
        expected = sorted(zip(weights.tolist(), targets), key=lambda t: (-t[0], t[1]))
        assert row.order.tolist() == [j for _, j in expected]
        np.testing.assert_array_equal(row.probs, [w for w, _ in expected])
        np.testing.assert_allclose(row.diffs, row.probs[:-1] - row.probs[1:])

    def test_requires_stochastic(self):
        g = from_edge_lists(2, [([1], [2.0]), ([], [])])
        with pytest.raises(ValueError):
            rank_row(g, 0)

    def test_empty_row(self):
        g = from_edge_lists(2, [([], []), ([0], [1.0])], stochastic=True)
        row = rank_row(g, 0)
        assert len(row.probs) == 0 and len(row.diffs) == 0


class TestDetectSwitchPoint:
    def test_planted_drop(self):
        row = _ranked(planted_drop_probs())
        cfg = ODConfig(window=4)
        report = detect_switch_point(row, cfg)
        q_ref, thr_ref, z_ref = switch_point_reference(row.probs, 4)
        assert report.q_star == q_ref
        assert report.threshold == thr_ref
        # the switch point straddles the single dominant diff (positions 4..7)
        assert 4 <= report.q_star <= 7
        np.testing.assert_allclose(report.zscores, z_ref, rtol=1e-9)
        peak = max(z for z in report.zscores if math.isfinite(z))
        assert report.zscores[report.q_star - 1] == peak

    def test_uniform_row_all_zero_scores(self):
        row = _ranked([0.25, 0.25, 0.25, 0.25])
        report = detect_switch_point(row, ODConfig(window=2))
        assert np.all(report.zscores == 0.0)
        # all-tie argmax lands on the largest position: pruning keeps the row
        assert report.q_star == 4
        assert report.threshold == 0.25

    def test_too_short_row_skipped(self):
        row = _ranked(_random_descending_row(np.random.default_rng(1), 21))
        report = detect_switch_point(row, ODConfig(window=20))
        assert report.skipped
        assert report.q_star is None and report.threshold is None

    def test_mode_mismatch(self):
        row = _ranked([0.5, 0.3, 0.2])
        with pytest.raises(ValueError):
            detect_switch_point(row, ODConfig(window=2, mode=MODE_NONE))

    def test_matches_reference_on_random_rows(self):
        rng = np.random.default_rng(2024)
        for trial in range(100):
            length = int(rng.integers(25, 140))
            probs = _random_descending_row(rng, length)
            row = _ranked(probs)
            report = detect_switch_point(row, ODConfig(window=20))
            q_ref, thr_ref, _ = switch_point_reference(probs, 20)
            assert report.q_star == q_ref, f"trial {trial}"
            assert report.threshold == thr_ref

    def test_matches_reference_across_windows(self):
        rng = np.random.default_rng(77)
        for window in (2, 3, 5, 8, 13):
            probs = _random_descending_row(rng, 60)
            report = detect_switch_point(_ranked(probs), ODConfig(window=window))
            q_ref, _, z_ref = switch_point_reference(probs, window)
            assert report.q_star == q_ref
            np.testing.assert_allclose(report.zscores, z_ref, rtol=1e-9)

    def test_zero_variance_tail_gives_infinite_score(self):
        # strictly flat tail, one dominant drop: the window straddling the
        # drop sees a nonzero gap against a zero-variance tail
        probs = np.array([0.4, 0.3] + [0.01] * 10)
        probs = probs / probs.sum()
        report = detect_switch_point(_ranked(probs), ODConfig(window=2))
        assert math.isinf(max(report.zscores))
        q_ref, _, _ = switch_point_reference(probs, 2)
        assert report.q_star == q_ref

    def test_noise_only_rows_rarely_score_high(self):
        # diffs drawn i.i.d. (no planted drop): large z is improbable
        rng = np.random.default_rng(31337)
        exceed = 0
        for _ in range(1000):
            diffs = rng.uniform(0.0, 1.0, size=99)
            probs = np.concatenate(([1.0], 1.0 + np.cumsum(diffs)))[::-1].copy()
            report = detect_switch_point(_ranked(probs), ODConfig(window=20))
            zmax = max(z for z in report.zscores if math.isfinite(z))
            if zmax > 6.0:
                exceed += 1
        assert exceed < 50  # fewer than 5% of trials


class TestAdjustTransitions:
    def test_none_mode_is_identity(self, two_cycle):
        out, reports = adjust_transitions(two_cycle, ODConfig(window=5, mode=MODE_NONE))
        assert out is two_cycle
        assert reports == []

    def test_fixed_threshold_renormalizes(self):
        raw = from_edge_lists(4, [([1, 2, 3], [0.5, 0.3, 0.2])] + [([], [])] * 3)
        p = row_normalize(raw)
        cfg = ODConfig(window=5, mode=MODE_FIXED, delta=0.3)
        out, _ = adjust_transitions(p, cfg, raw=raw)
        cols, wts = out.row(0)
        assert cols.tolist() == [1, 2]
        np.testing.assert_allclose(wts, [0.625, 0.375])

    def test_fixed_threshold_can_empty_rows(self):
        raw = from_edge_lists(2, [([1], [0.2]), ([0], [0.9])])
        p = row_normalize(raw)
        out, _ = adjust_transitions(
            p, ODConfig(window=5, mode=MODE_FIXED, delta=0.5), raw=raw
        )
        assert len(out.row(0)[0]) == 0
        assert len(out.row(1)[0]) == 1

    def test_fixed_threshold_requires_raw(self, two_cycle):
        with pytest.raises(ValueError, match="raw"):
            adjust_transitions(two_cycle, ODConfig(window=5, mode=MODE_FIXED, delta=0.5))

    def test_adaptive_prunes_planted_tail(self):
        probs = planted_drop_probs()
        probs = probs / probs.sum()
        targets = list(range(1, len(probs) + 1))
        g = from_edge_lists(
            len(probs) + 1,
            [(targets, probs.tolist())] + [([], [])] * len(probs),
            stochastic=True,
        )
        out, reports = adjust_transitions(g, ODConfig(window=4))
        assert not reports[0].skipped
        cols, wts = out.row(0)
        assert len(cols) < len(probs)
        assert abs(math.fsum(wts.tolist()) - 1.0) < 1e-9
        # pruned row is a subset of the original
        assert set(cols.tolist()) <= set(targets)

    def test_adaptive_invariants_on_synthetic_graph(self):
        emb, _ = generate_synthetic(
            SynthSpec(identities=4, dim=16, samples_min=15, samples_max=25,
                      noise_sigma=0.2, seed=6)
        )
        p = row_normalize(build_knn_graph(emb, 30))
        out, reports = adjust_transitions(p, ODConfig(window=8))
        assert out.edge_count <= p.edge_count
        for i in range(p.node_count):
            cols_new, wts_new = out.row(i)
            cols_old, wts_old = p.row(i)
            assert set(cols_new.tolist()) <= set(cols_old.tolist())
            if len(wts_new):
                assert abs(math.fsum(wts_new.tolist()) - 1.0) < 1e-9
            if not reports[i].skipped:
                # the highest-probability edge always survives
                top = cols_old[np.argmax(wts_old)]
                assert top in cols_new.tolist()
                assert reports[i].threshold <= wts_old.max()
        out.validate()

    def test_adaptive_raises_same_identity_fraction(self):
        emb, labels = generate_synthetic(
            SynthSpec(identities=2, dim=16, samples_min=30, samples_max=30,
                      noise_sigma=0.15, seed=21)
        )
        p = row_normalize(build_knn_graph(emb, 40))
        out, _ = adjust_transitions(p, ODConfig(window=10))

        def positive_fraction(graph):
            src = graph.edge_sources()
            same = sum(
                1
                for s, d in zip(src.tolist(), graph.col_idx.tolist())
                if labels.labels[s] == labels.labels[d]
            )
            return same / graph.edge_count

        assert positive_fraction(out) > positive_fraction(p)

    def test_requires_stochastic(self):
        g = from_edge_lists(2, [([1], [2.0]), ([], [])])
        with pytest.raises(ValueError):
            adjust_transitions(g, ODConfig(window=5))


class TestPrecisionRecallAt:
    def test_direct_substitution(self):
        # first 4 ranked neighbors same identity, 8 positives overall
        row = RankedRow(
            node=0,
            order=np.array([1, 2, 3, 4, 9, 10]),
            probs=np.linspace(0.3, 0.05, 6),
            diffs=np.full(5, 0.05),
        )
        labels = LabelSet(["a"] * 9 + ["b", "b"])
        pre, rec = precision_recall_at(row, labels, 4)
        assert pre == 1.0
        assert rec == 0.5

    def test_wrong_top_neighbor(self):
        row = RankedRow(
            node=0, order=np.array([2]), probs=np.array([1.0]), diffs=np.zeros(0)
        )
        labels = LabelSet(["a", "a", "b"])
        assert precision_recall_at(row, labels, 1) == (0.0, 0.0)

    def test_recall_one_when_no_positives(self):
        row = RankedRow(
            node=0, order=np.array([1]), probs=np.array([1.0]), diffs=np.zeros(0)
        )
        labels = LabelSet(["solo", "x"])
        assert precision_recall_at(row, labels, 1) == (0.0, 1.0)

    def test_matches_label_scan_oracle(self):
        rng = np.random.default_rng(17)
        labels = LabelSet([str(int(x)) for x in rng.integers(0, 5, size=40)])
        order = rng.permutation(np.arange(1, 40))
        probs = np.sort(rng.uniform(0.001, 1, size=39))[::-1]
        row = RankedRow(node=0, order=order, probs=probs, diffs=probs[:-1] - probs[1:])
        me = labels.labels[0]
        positives = sum(1 for j in range(1, 40) if labels.labels[j] == me)
        for t in range(1, 40):
            hits = sum(1 for j in order[:t] if labels.labels[int(j)] == me)
            expected = (hits / t, hits / positives if positives else 1.0)
            assert precision_recall_at(row, labels, t) == expected

    def test_t_out_of_range(self):
        row = RankedRow(
            node=0, order=np.array([1]), probs=np.array([1.0]), diffs=np.zeros(0)
        )
        labels = LabelSet(["a", "a"])
        with pytest.raises(ValueError):
            precision_recall_at(row, labels, 0)
        with pytest.raises(ValueError):
            precision_recall_at(row, labels, 2)


class TestODConfig:
    def test_window_floor(self):
        with pytest.raises(ValueError):
            ODConfig(window=1)

    def test_fixed_needs_delta(self):
        with pytest.raises(ValueError):
            ODConfig(window=5, mode=MODE_FIXED)
        with pytest.raises(ValueError):
            ODConfig(window=5, mode=MODE_FIXED, delta=1.5)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            ODConfig(window=5, mode="sometimes")
