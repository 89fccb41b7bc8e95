"""Primitives: conjugate exponents, Gaussian moments, norms, sampling,
quadrature. Expected values below marked "oracle" were computed with
tests/oracles.py and frozen."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from lpgroth.core import (
    LpVector,
    gauss_hermite_grid,
    gaussian_moment_norm,
    holder_conjugate,
    lp_norm,
    rng_stream,
    sample_matrix,
)

FINITE_P = st.floats(min_value=1.0, max_value=20.0)
VECTORS = st.lists(
    st.floats(min_value=-50.0, max_value=50.0, allow_nan=False),
    min_size=1, max_size=40,
)


class TestHolderConjugate:
    def test_self_conjugate(self):
        assert holder_conjugate(2.0) == 2.0

    def test_three_halves(self):
        assert holder_conjugate(1.5) == pytest.approx(3.0, abs=1e-15)

    def test_four(self):
        assert holder_conjugate(4.0) == pytest.approx(4.0 / 3.0, abs=1e-15)

    def test_endpoints(self):
        assert holder_conjugate(1.0) == math.inf
        assert holder_conjugate(math.inf) == 1.0

    def test_rejects_below_one(self):
        with pytest.raises(ValueError):
            holder_conjugate(0.5)

    @given(FINITE_P.filter(lambda p: p > 1.0))
    def test_involution(self, p):
        assert holder_conjugate(holder_conjugate(p)) == pytest.approx(p, rel=1e-12)


class TestMomentNorm:
    def test_p2_unit_variance(self):
        assert gaussian_moment_norm(2.0) == pytest.approx(1.0, rel=1e-12)

    def test_p1_oracle(self):
        # oracle: adaptive quadrature of E|z| -> 0.7978845608028652
        assert gaussian_moment_norm(1.0) == pytest.approx(0.7978845608028652, rel=1e-10)

    def test_p3_oracle(self):
        # oracle: quadrature of E|z|^3 = 2 sqrt(2/pi) = 1.5957691216057308,
        # cube root 1.1685752549624655
        assert gaussian_moment_norm(3.0) == pytest.approx(1.1685752549624655, rel=1e-10)

    def test_rejects_bad_p(self):
        for bad in (0.5, math.inf, math.nan):
            with pytest.raises(ValueError):
                gaussian_moment_norm(bad)

    @given(FINITE_P)
    def test_matches_adaptive_quadrature(self, p):
        assert gaussian_moment_norm(p) == pytest.approx(
            oracles.abs_moment_quad(p) ** (1.0 / p), rel=1e-9)

    @given(FINITE_P, FINITE_P)
    def test_nondecreasing_in_p(self, p, q):
        lo, hi = min(p, q), max(p, q)
        assert gaussian_moment_norm(lo) <= gaussian_moment_norm(hi) * (1.0 + 1e-12)

    @given(FINITE_P)
    def test_unit_crossing_at_two(self, p):
        xi = gaussian_moment_norm(p)
        if p >= 2.0:
            assert xi >= 1.0 - 1e-12
        else:
            assert xi <= 1.0 + 1e-12


class TestLpNorm:
    def test_pythagoras(self):
        assert lp_norm([3.0, 4.0], 2.0) == pytest.approx(5.0, abs=1e-14)

    def test_constant_vector_normalized(self):
        assert lp_norm([1.0, 1.0, 1.0, 1.0], 3.0, normalized=True) == pytest.approx(1.0)

    def test_l1_signs(self):
        assert lp_norm([1.0, -1.0], 1.0) == pytest.approx(2.0)

    def test_sup_norm_both_modes(self):
        x = [1.0, -7.0, 3.0]
        assert lp_norm(x, math.inf) == 7.0
        assert lp_norm(x, math.inf, normalized=True) == 7.0

    @given(VECTORS, FINITE_P, FINITE_P)
    def test_normalized_monotone_up(self, x, p, q):
        lo, hi = min(p, q), max(p, q)
        a = lp_norm(x, lo, normalized=True)
        b = lp_norm(x, hi, normalized=True)
        assert a <= b + 1e-9 * max(1.0, b)

    @given(VECTORS, FINITE_P, FINITE_P)
    def test_unnormalized_monotone_down(self, x, p, q):
        lo, hi = min(p, q), max(p, q)
        a = lp_norm(x, lo)
        b = lp_norm(x, hi)
        assert b <= a + 1e-9 * max(1.0, a)

    def test_lpvector_caching_matches(self):
        v = LpVector([0.3, -2.0, 1.1])
        assert v.norm(1.5) == lp_norm(v.entries, 1.5)
        assert v.norm(1.5) == v.norm(1.5)  # cached path

    def test_lpvector_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LpVector([1.0, math.nan])


class TestSampleMatrix:
    def test_scalar_symmetrization(self):
        s = sample_matrix(1, seed=11)
        assert s.gbar[0, 0] == pytest.approx(math.sqrt(2.0) * s.g[0, 0], rel=1e-15)

    def test_determinism(self):
        a = sample_matrix(3, seed=123)
        b = sample_matrix(3, seed=123)
        assert np.array_equal(a.g, b.g)
        assert np.array_equal(a.gbar, b.gbar)

    def test_seeds_differ(self):
        assert not np.array_equal(sample_matrix(3, 1).g, sample_matrix(3, 2).g)

    def test_law_of_large_numbers(self):
        # pooled N = 10^4 entries: mean within 4/sqrt(N), variance within 5%
        s = sample_matrix(100, seed=5)
        flat = s.g.ravel()
        n_pool = flat.size
        assert abs(flat.mean()) < 4.0 / math.sqrt(n_pool)
        assert abs(flat.var() - 1.0) < 0.05

    def test_symmetrization_identity(self):
        s = sample_matrix(16, seed=3)
        assert np.allclose(s.gbar, (s.g + s.g.T) / math.sqrt(2.0), atol=0.0)
        assert np.allclose(s.gbar, s.gbar.T, atol=0.0)

    def test_symmetric_input_scales(self):
        # symmetrizing an already symmetric S gives sqrt(2) S
        sym = np.array([[1.0, 2.0], [2.0, -0.5]])
        out = (sym + sym.T) / math.sqrt(2.0)
        assert np.allclose(out, math.sqrt(2.0) * sym, rtol=1e-15)

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            sample_matrix(0, seed=0)

    def test_quadratic_identity(self):
        # <Gx,x> = <gbar x, x>/sqrt(2) for every x
        s = sample_matrix(9, seed=21)
        x = rng_stream(4, 1).standard_normal(9)
        assert x @ s.g @ x == pytest.approx((x @ s.gbar @ x) / math.sqrt(2.0), rel=1e-12)

    def test_streams_disjoint(self):
        a = rng_stream(9, 0).standard_normal(8)
        b = rng_stream(9, 1).standard_normal(8)
        assert not np.allclose(a, b)


class TestGaussHermite:
    def test_order_two_closed_form(self):
        grid = gauss_hermite_grid(2)
        assert np.allclose(np.sort(grid.nodes), [-1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)], atol=1e-14)
        assert np.allclose(grid.weights, math.sqrt(math.pi) / 2.0, atol=1e-14)

    def test_weight_normalization(self):
        for order in (2, 7, 33, 64):
            grid = gauss_hermite_grid(order)
            assert grid.weights.sum() == pytest.approx(math.sqrt(math.pi), abs=1e-12)

    def test_fourth_moment_raw(self):
        # integral of t^4 e^{-t^2} dt = (3/4) sqrt(pi)
        grid = gauss_hermite_grid(20)
        assert grid.weights @ grid.nodes**4 == pytest.approx(0.75 * math.sqrt(math.pi), rel=1e-12)

    def test_unit_second_moment(self):
        grid = gauss_hermite_grid(12)
        assert grid.expect(lambda z: z * z) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_out_of_range(self):
        for order in (1, 513):
            with pytest.raises(ValueError):
                gauss_hermite_grid(order)

    def test_node_symmetry(self):
        grid = gauss_hermite_grid(16)
        assert np.all(np.diff(grid.nodes) > 0)
        assert np.allclose(grid.nodes, -grid.nodes[::-1], atol=1e-14)

    @pytest.mark.parametrize("order", [8, 16, 40])
    def test_even_moments(self, order):
        # E z^{2k} = (2k-1)!! for k <= order/2 - 1
        grid = gauss_hermite_grid(order)
        fact = 1.0
        for k in range(1, order // 2):
            fact *= 2 * k - 1
            assert grid.expect(lambda z, k=k: z ** (2 * k)) == pytest.approx(fact, rel=1e-10)
