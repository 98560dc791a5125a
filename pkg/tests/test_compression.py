import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsense.compression import (
    PRECISION_FULL,
    PRECISION_HALF,
    CompressionConfig,
    adaptive_quantize,
    apply_mask,
    compress,
    dense_wire_size,
    densify,
    predicted_wire_size,
    prune_mask,
    topk_sparsify,
    wire_size_bytes,
)
from netsense.errors import ConfigurationError, CorruptPayloadError
from netsense.gradients import GradientVector, ResidualBuffer, accumulate

CFG = CompressionConfig()


def topk_oracle(values, k):
    """Full sort by (-|v|, index): the kept index set, independently derived."""
    order = sorted(range(len(values)), key=lambda i: (-abs(values[i]), i))
    return sorted(order[:k])


class TestAdaptiveQuantize:
    def test_engages_below_threshold_and_doubles_ratio(self):
        g = GradientVector(np.full(100, 0.5))
        out, precision, ratio = adaptive_quantize(g, 0.005, CFG)
        assert precision == PRECISION_HALF
        assert ratio == pytest.approx(0.01)
        # every value must be exactly representable in float16
        assert np.array_equal(out.values, out.values.astype(np.float16).astype(np.float64))

    def test_high_ratio_passes_through(self):
        g = GradientVector(np.linspace(-1, 1, 50))
        out, precision, ratio = adaptive_quantize(g, 0.9, CFG)
        assert precision == PRECISION_FULL
        assert ratio == 0.9
        assert out is g

    def test_zero_gradient_fails_density_gate(self):
        g = GradientVector(np.zeros(50))
        out, precision, ratio = adaptive_quantize(g, 0.01, CFG)
        assert precision == PRECISION_FULL
        assert ratio == 0.01
        assert out is g

    def test_ratio_doubling_clamps_at_one(self):
        cfg = CompressionConfig(quantize_ratio_threshold=1.0)
        g = GradientVector(np.ones(10))
        _, precision, ratio = adaptive_quantize(g, 0.8, cfg)
        assert precision == PRECISION_HALF
        assert ratio == 1.0

    def test_invalid_ratio(self):
        with pytest.raises(ConfigurationError):
            adaptive_quantize(GradientVector([1.0]), 0.0, CFG)


class TestPruneMask:
    def test_full_ratio_prunes_nothing(self):
        m = prune_mask(np.array([1.0, 2.0, 3.0, 4.0]), 1.0)
        assert m.pruning_rate == 0.0
        assert m.excluded.size == 0

    def test_half_ratio_rate(self):
        m = prune_mask(np.ones(8), 0.5)
        assert m.pruning_rate == pytest.approx(0.25)
        assert m.excluded.size == 2

    def test_smallest_magnitudes_selected(self):
        m = prune_mask(np.array([5.0, 0.1, 3.0, 0.2]), 0.0)
        assert m.pruning_rate == pytest.approx(0.5)
        assert set(m.excluded.tolist()) == {1, 3}

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(19)
        w = rng.normal(size=101)
        ratio = 0.3
        m = prune_mask(w, ratio)
        n = int(np.floor(0.5 * (1 - ratio) * 101))
        oracle = sorted(sorted(range(101), key=lambda i: (abs(w[i]), i))[:n])
        assert m.excluded.tolist() == oracle

    def test_ties_prefer_lower_index(self):
        w = np.array([2.0, 1.0, 1.0, 1.0, 3.0, 9.0])
        m = prune_mask(w, 0.0)  # rate 0.5 -> 3 excluded
        assert m.excluded.tolist() == [1, 2, 3]


class TestApplyMask:
    def test_empty_mask_is_identity(self):
        g = GradientVector([1.0, 2.0, 3.0])
        m = prune_mask(np.ones(3), 1.0)
        out = apply_mask(g, m)
        np.testing.assert_array_equal(out.values, g.values)

    def test_single_zeroing(self):
        from netsense.compression import PruneMask

        g = GradientVector([1.0, 2.0, 3.0])
        out = apply_mask(g, PruneMask(np.array([1]), 0.3))
        np.testing.assert_array_equal(out.values, [1.0, 0.0, 3.0])

    def test_nonzero_count_matches_counting_oracle(self):
        rng = np.random.default_rng(23)
        d = 64
        g = GradientVector(rng.normal(size=d) + 10.0)  # no zeros
        m = prune_mask(rng.normal(size=d), 0.2)
        out = apply_mask(g, m)
        assert int(np.count_nonzero(out.values)) == d - m.excluded.size

    def test_out_of_range_mask(self):
        from netsense.compression import PruneMask

        with pytest.raises(ConfigurationError):
            apply_mask(GradientVector([1.0, 2.0]), PruneMask(np.array([5]), 0.1))


class TestTopkSparsify:
    def test_two_largest_magnitudes(self):
        p = topk_sparsify(GradientVector([1.0, -3.0, 2.0, 0.5]), 0.5)
        assert p.indices.tolist() == [1, 2]
        assert p.values.tolist() == [-3.0, 2.0]

    def test_full_ratio_keeps_everything(self):
        g = GradientVector(np.arange(10, dtype=float))
        p = topk_sparsify(g, 1.0)
        assert p.indices.tolist() == list(range(10))
        np.testing.assert_array_equal(p.values, g.values)

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(29)
        v = rng.normal(size=200)
        p = topk_sparsify(GradientVector(v), 0.1)
        assert p.indices.tolist() == topk_oracle(v, 20)

    def test_ties_prefer_lower_index(self):
        v = np.array([1.0, -1.0, 1.0, 2.0])
        p = topk_sparsify(GradientVector(v), 0.5)
        assert p.indices.tolist() == [0, 3]

    def test_minimum_one_coordinate(self):
        p = topk_sparsify(GradientVector(np.ones(1000)), 0.0001)
        assert p.kept_count == 1

    def test_wire_size_formula(self):
        p = topk_sparsify(GradientVector(np.ones(100)), 0.2)
        assert p.wire_size_bytes == 16 + 20 * 4 + 20 * 4
        p16 = topk_sparsify(GradientVector(np.ones(100)), 0.2, precision=PRECISION_HALF)
        assert p16.wire_size_bytes == 16 + 20 * 4 + 20 * 2


class TestDensify:
    def test_empty_payload_gives_zeros(self):
        from netsense.compression import CompressedPayload

        p = CompressedPayload(np.array([], dtype=np.int64), np.array([]), PRECISION_FULL, 16, 0)
        out = densify(p, 5)
        np.testing.assert_array_equal(out.values, np.zeros(5))

    def test_scatter(self):
        from netsense.compression import CompressedPayload

        p = CompressedPayload(np.array([1, 2]), np.array([-3.0, 2.0]), PRECISION_FULL, 32, 0)
        np.testing.assert_array_equal(densify(p, 4).values, [0.0, -3.0, 2.0, 0.0])

    def test_round_trip_at_full_ratio(self):
        rng = np.random.default_rng(31)
        v = rng.normal(size=50)
        p = topk_sparsify(GradientVector(v), 1.0)
        np.testing.assert_array_equal(densify(p, 50).values, v)

    def test_out_of_range_index(self):
        from netsense.compression import CompressedPayload

        p = CompressedPayload(np.array([9]), np.array([1.0]), PRECISION_FULL, 24, 0)
        with pytest.raises(CorruptPayloadError):
            densify(p, 5)


class TestCompressPipeline:
    def test_identity_pipeline_at_full_ratio(self):
        rng = np.random.default_rng(37)
        v = rng.normal(size=40)
        g = GradientVector(v)
        payload, residual = compress(g, ResidualBuffer.zeros(40), rng.normal(size=40), 1.0, CFG)
        assert payload.precision == PRECISION_FULL
        np.testing.assert_array_equal(densify(payload, 40).values, v)
        np.testing.assert_array_equal(residual.values, np.zeros(40))

    def test_quantized_path_uses_doubled_ratio(self):
        rng = np.random.default_rng(41)
        v = rng.normal(size=1000)
        g = GradientVector(v)
        payload, _ = compress(g, ResidualBuffer.zeros(1000), rng.normal(size=1000), 0.005, CFG)
        assert payload.precision == PRECISION_HALF
        assert payload.kept_count == 10  # k from the doubled ratio 0.01
        assert payload.wire_size_bytes == 16 + 10 * 4 + 10 * 2

    def test_reconstruction_full32(self):
        rng = np.random.default_rng(43)
        d = 1000
        g = GradientVector(rng.normal(size=d))
        r = ResidualBuffer(rng.normal(size=d) * 0.1)
        payload, new_r = compress(g, r, rng.normal(size=d), 0.1, CFG)
        acc = accumulate(g, r)
        recon = densify(payload, d).values + new_r.values
        np.testing.assert_array_equal(recon, acc.values)

    def test_reconstruction_half16_within_rounding(self):
        rng = np.random.default_rng(47)
        d = 1000
        g = GradientVector(rng.normal(size=d))
        r = ResidualBuffer(rng.normal(size=d) * 0.1)
        payload, new_r = compress(g, r, rng.normal(size=d), 0.005, CFG)
        assert payload.precision == PRECISION_HALF
        acc = accumulate(g, r)
        recon = densify(payload, d).values + new_r.values
        # kept coordinates differ from the accumulated value only by the
        # float16 rounding that the residual absorbs exactly
        np.testing.assert_array_equal(recon, acc.values)

    def test_pruned_indices_stay_out_of_payload(self):
        rng = np.random.default_rng(53)
        d = 100
        weights = rng.normal(size=d)
        g = GradientVector(rng.normal(size=d))
        payload, _ = compress(g, ResidualBuffer.zeros(d), weights, 0.2, CFG)
        mask = prune_mask(weights, 0.2)
        # enough unpruned coordinates remain, so no excluded index is kept
        assert not set(payload.indices.tolist()) & set(mask.excluded.tolist())


class TestSizeAccounting:
    def test_monotone_in_ratio_at_fixed_precision(self):
        rng = np.random.default_rng(59)
        g = GradientVector(rng.normal(size=500))
        sizes = [
            topk_sparsify(g, r).wire_size_bytes
            for r in [0.01, 0.05, 0.1, 0.3, 0.7, 1.0]
        ]
        assert sizes == sorted(sizes)

    def test_half_precision_halves_value_bytes(self):
        k = 37
        full = wire_size_bytes(k, PRECISION_FULL, CFG)
        half = wire_size_bytes(k, PRECISION_HALF, CFG)
        assert full - half == k * 2
        assert (full - CFG.header_bytes - k * CFG.index_width_bytes) == 2 * (
            half - CFG.header_bytes - k * CFG.index_width_bytes
        )

    def test_predicted_matches_actual_for_live_gradients(self):
        rng = np.random.default_rng(61)
        d = 400
        g = GradientVector(rng.normal(size=d))
        w = rng.normal(size=d)
        for ratio in [0.005, 0.01, 0.049, 0.05, 0.2, 1.0]:
            payload, _ = compress(g, ResidualBuffer.zeros(d), w, ratio, CFG)
            assert payload.wire_size_bytes * 8 == predicted_wire_size(ratio, d, CFG) * 8

    def test_dense_wire_size(self):
        assert dense_wire_size(100, CFG) == 16 + 400


class TestProperties:
    @given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(1, 12))
    @settings(max_examples=60, deadline=None)
    def test_topk_optimality_brute_force(self, seed, d, k_raw):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=d)
        k = min(k_raw, d)
        p = topk_sparsify(GradientVector(v), k / d)
        kept = p.indices.tolist()
        best = max(
            sum(abs(v[i]) for i in combo)
            for combo in itertools.combinations(range(d), len(kept))
        )
        assert sum(abs(v[i]) for i in kept) == pytest.approx(best)

    @given(st.floats(0.0, 1.0), st.integers(1, 200))
    @settings(max_examples=100, deadline=None)
    def test_pruning_rate_bounds(self, ratio, d):
        m = prune_mask(np.ones(d), ratio)
        assert 0.0 <= m.pruning_rate <= 0.5
        assert m.excluded.size == int(np.floor(m.pruning_rate * d))
