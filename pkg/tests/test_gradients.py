import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsense.errors import ConfigurationError, CorruptGradientError
from netsense.gradients import (
    GradientVector,
    ResidualBuffer,
    accumulate,
    l2_norm,
    update_residual,
)


def naive_l2(values) -> float:
    # independent double-pass oracle: plain python accumulation, then sqrt
    total = 0.0
    for v in values:
        total += float(v) * float(v)
    return math.sqrt(total)


class TestL2Norm:
    def test_zero_vector(self):
        assert l2_norm(GradientVector([0, 0, 0, 0])) == 0.0

    def test_three_four_five(self):
        assert l2_norm(GradientVector([3, 4])) == pytest.approx(5.0, abs=0.0)

    def test_matches_naive_summation_oracle(self):
        rng = np.random.default_rng(7)
        v = rng.normal(size=1000)
        expected = naive_l2(v)
        assert l2_norm(GradientVector(v)) == pytest.approx(expected, rel=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(CorruptGradientError):
            GradientVector([1.0, np.nan])
        with pytest.raises(CorruptGradientError):
            GradientVector([np.inf, 0.0])

    @given(st.floats(-1e6, 1e6), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_absolute_homogeneity(self, c, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=64)
        lhs = l2_norm(GradientVector(c * v))
        rhs = abs(c) * l2_norm(GradientVector(v))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestAccumulate:
    def test_zero_residual(self):
        out = accumulate(GradientVector([1, 2]), ResidualBuffer([0, 0]))
        np.testing.assert_array_equal(out.values, [1, 2])

    def test_elementwise_sum(self):
        out = accumulate(GradientVector([1, 2]), ResidualBuffer([-1, 0.5]))
        np.testing.assert_array_equal(out.values, [0, 2.5])

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(3)
        g, r = rng.normal(size=10), rng.normal(size=10)
        expected = [float(g[i]) + float(r[i]) for i in range(10)]
        out = accumulate(GradientVector(g), ResidualBuffer(r))
        np.testing.assert_array_equal(out.values, expected)

    def test_does_not_mutate_inputs(self):
        g = GradientVector([1.0, 2.0])
        r = ResidualBuffer([3.0, 4.0])
        accumulate(g, r)
        np.testing.assert_array_equal(g.values, [1.0, 2.0])
        np.testing.assert_array_equal(r.values, [3.0, 4.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            accumulate(GradientVector([1, 2]), ResidualBuffer([1, 2, 3]))


class TestUpdateResidual:
    def test_kept_entries_zero_out(self):
        res = update_residual(GradientVector([1, -3, 2]), GradientVector([0, -3, 2]))
        np.testing.assert_array_equal(res.values, [1, 0, 0])

    def test_full_transmission_leaves_nothing(self):
        acc = GradientVector([0.5, -1.5, 2.5])
        res = update_residual(acc, acc)
        np.testing.assert_array_equal(res.values, [0, 0, 0])

    def test_reconstruction_identity(self):
        rng = np.random.default_rng(11)
        acc = rng.normal(size=100)
        transmitted = np.where(rng.random(100) < 0.3, acc, 0.0)
        res = update_residual(GradientVector(acc), GradientVector(transmitted))
        np.testing.assert_array_equal(transmitted + res.values, acc)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            update_residual(GradientVector([1]), GradientVector([1, 2]))


class TestInvariants:
    def test_operations_preserve_dimension(self):
        rng = np.random.default_rng(5)
        g = GradientVector(rng.normal(size=37))
        r = ResidualBuffer(rng.normal(size=37))
        acc = accumulate(g, r)
        assert acc.dimension == 37
        assert update_residual(acc, g).dimension == 37

    def test_zeros_factory(self):
        r = ResidualBuffer.zeros(12)
        assert r.dimension == 12
        assert not r.values.any()
