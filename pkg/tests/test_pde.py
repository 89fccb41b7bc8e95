"""Backward Hopf-Cole recursion: measures, solver, functional, residual.

Expectations marked "oracle" are pinned from tests/oracles.py or from
direct quadrature of closed forms; the Monte Carlo cross-check carries
its own standard error.
"""

import json
import math

import numpy as np
import pytest

import oracles
from lpgroth.boundary import BoundaryParams, boundary_tables, boundary_value
from lpgroth.core import rng_stream
from lpgroth.pde import (
    AtomicMeasure,
    PdeGrid,
    atomic_measure,
    measure_mass,
    measure_moment,
    parisi_functional,
    pde_residual,
    default_probes,
    solve_parisi_pde,
)

# cheap grid for tests that compare against 1e-4-scale references
FAST = PdeGrid(quad_order=32, step_frac=2e-3, terminal_order=32, terminal_knots=2049)


def quad_terminal_mean(u, params):
    """E f(sqrt(2u) z) by adaptive quadrature, independent of the solver.

    Gauss-Hermite is the wrong oracle here: f is kinked at 0 whenever
    lam > 0 and merely C^1 at lam = 0, so a fixed polynomial rule converges
    only algebraically while the solver's kink-split panels do not.
    """
    def f_of(x):
        return float(boundary_tables(np.array([x]), params)[0][0])

    return oracles.gauss_expect_quad(f_of, math.sqrt(2.0 * u))


class TestAtomicMeasure:
    def test_zero_measure(self):
        g = AtomicMeasure.zero(2.0)
        assert g.k == 0 and g.m == (0.0,) and g.q == (0.0, 2.0)

    def test_moment_zero(self):
        assert measure_moment(AtomicMeasure.zero(1.0)) == 0.0

    def test_moment_single_level(self):
        g = atomic_measure(1.0, [], [2.0])
        assert measure_moment(g) == pytest.approx(1.0, abs=1e-15)

    def test_moment_two_levels_oracle(self):
        g = atomic_measure(1.0, [0.5], [1.0, 3.0])
        assert measure_moment(g) == pytest.approx(1.25, abs=1e-14)
        ref = oracles.midpoint_measure_moment(1.0, list(g.q), list(g.m))
        assert measure_moment(g) == pytest.approx(ref, abs=1e-5)

    def test_mass(self):
        g = atomic_measure(1.0, [0.5], [1.0, 3.0])
        assert measure_mass(g) == pytest.approx(0.5 + 1.5, abs=1e-15)

    def test_right_continuity(self):
        g = atomic_measure(1.0, [0.4], [0.5, 2.0])
        assert g.gamma_at(0.4) == 2.0  # right-continuous at the atom
        assert g.gamma_at(0.39999) == 0.5
        assert g.gamma_at(1.0) == 2.0  # s = u maps to the last level

    def test_merges_zero_width(self):
        g = atomic_measure(1.0, [0.5, 0.5 + 1e-12], [0.1, 0.2, 0.9])
        assert g.k == 1  # degenerate middle interval dropped

    def test_merges_equal_levels(self):
        g = atomic_measure(1.0, [0.5], [0.3, 0.3 + 1e-12])
        assert g.k == 0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            AtomicMeasure(u=1.0, q=(0.0, 1.0), m=(0.1, 0.2))
        with pytest.raises(ValueError):
            AtomicMeasure(u=1.0, q=(0.1, 1.0), m=(0.5,))
        with pytest.raises(ValueError):
            AtomicMeasure(u=1.0, q=(0.0, 0.5, 1.0), m=(0.5, 0.2))
        with pytest.raises(ValueError):
            AtomicMeasure(u=1.0, q=(0.0, 1.0), m=(-0.5,))


class TestSolve:
    def test_zero_measure_is_plain_quadrature(self):
        params = BoundaryParams(p=4.0, t=1.0, lam=0.3)
        sol = solve_parisi_pde(0.3, AtomicMeasure.zero(0.8), params, FAST)
        assert sol.value_at_origin == pytest.approx(
            quad_terminal_mean(0.8, params), rel=2e-6, abs=2e-6)

    def test_degenerate_horizon(self):
        # u = 1e-8: no diffusion time, Psi(0,0) -> f(0) up to O(sqrt(u))
        params = BoundaryParams(p=4.0, t=1.0, lam=0.5)
        g = atomic_measure(1e-8, [], [0.7])
        sol = solve_parisi_pde(0.5, g, params, FAST)
        f0 = boundary_value(0.0, params)
        assert f0 == pytest.approx(0.5**2 / 4.0, rel=1e-12)  # lam^2/(4t)
        assert sol.value_at_origin == pytest.approx(f0, abs=2e-4)

    def test_one_level_monte_carlo_oracle(self):
        # m0=1, lam=0, p=4, t=1, u=1: Psi(0,0) = log E exp f(sqrt(2) W(1))
        params = BoundaryParams(p=4.0, t=1.0, lam=0.0)
        sol = solve_parisi_pde(0.0, atomic_measure(1.0, [], [1.0]), params, FAST)
        z = rng_stream(2024, 0).standard_normal(1_000_000)
        f, _ = boundary_tables(math.sqrt(2.0) * z, params)
        y = np.exp(f)
        mean = float(y.mean())
        se_log = float(y.std(ddof=1)) / (mean * math.sqrt(y.size))
        assert abs(sol.value_at_origin - math.log(mean)) < 3.0 * se_log + 1e-4

    def test_monotone_in_measure(self):
        # raising any level never decreases Psi(0,0)
        params = BoundaryParams(p=4.0, t=1.0, lam=0.2)
        base = atomic_measure(1.0, [0.5], [0.4, 0.9])
        v0 = solve_parisi_pde(0.2, base, params, FAST).value_at_origin
        for raised in (atomic_measure(1.0, [0.5], [0.6, 0.9]),
                       atomic_measure(1.0, [0.5], [0.4, 1.3])):
            v1 = solve_parisi_pde(0.2, raised, params, FAST).value_at_origin
            assert v1 >= v0 - 1e-8

    def test_zero_control_lower_bound(self, ref_solution):
        assert ref_solution.value_at_origin >= ref_solution.zero_control_value() - 1e-6

    def test_growth_housing(self, ref_solution):
        # |Psi(0,x)| <= C (1 + |x|^{1+1/(p-1)}): fit C on the inner half,
        # check the edges stay under a modest multiple
        sol = ref_solution
        a = 1.0 + 1.0 / (sol.params.p - 1.0)
        x = sol.x
        f = sol.levels[0].f
        hous = 1.0 + np.abs(x) ** a
        inner = np.abs(x) <= 0.5 * sol.grid_extent
        c_fit = float(np.max(np.abs(f[inner]) / hous[inner]))
        assert np.all(np.abs(f) <= 2.0 * c_fit * hous)

    def test_slope_growth(self, ref_solution):
        # |dPsi(0,x)| <= C (1 + |x|^{1/(p-1)})
        sol = ref_solution
        a = 1.0 / (sol.params.p - 1.0)
        x = sol.x
        d = sol.levels[0].d
        hous = 1.0 + np.abs(x) ** a
        inner = np.abs(x) <= 0.5 * sol.grid_extent
        c_fit = float(np.max(np.abs(d[inner]) / hous[inner]))
        assert np.all(np.abs(d) <= 2.0 * c_fit * hous)

    def test_quadrature_doubling_fast_grid(self, ref_chart):
        lam, gamma, params = ref_chart
        lo = solve_parisi_pde(lam, gamma, params, FAST)
        hi = solve_parisi_pde(lam, gamma, params,
                              PdeGrid(quad_order=64, step_frac=2e-3,
                                      terminal_order=64, terminal_knots=2049))
        assert abs(lo.value_at_origin - hi.value_at_origin) < 1e-6

    def test_tables_finite_and_slices_agree(self, ref_solution):
        sol = ref_solution
        for lvl in sol.levels:
            assert np.all(np.isfinite(lvl.f)) and np.all(np.isfinite(lvl.d))
        # psi at a stored breakpoint reproduces the table
        q1 = sol.gamma.q[1]
        xs = np.array([-1.0, 0.0, 2.0])
        assert np.allclose(sol.psi(q1, xs), sol.levels[1].eval(xs)[0], atol=1e-12)

    def test_json_round_trip(self, ref_solution):
        d = json.loads(ref_solution.to_json())
        assert d["value_at_origin"] == ref_solution.value_at_origin
        assert d["q"] == list(ref_solution.gamma.q)
        assert len(d["psi"]) == len(ref_solution.levels)
        assert d["psi"][0][len(d["x"]) // 2] == pytest.approx(ref_solution.value_at_origin)


class TestFunctional:
    def test_closed_form_zero_measure(self):
        # lam=0, gamma=0: ((p-1)/p)(pt)^{-1/(p-1)} (2u)^{(1+1/(p-1))/2} E|z|^{1+1/(p-1)}
        p, t, u = 4.0, 1.0, 0.8
        params = BoundaryParams(p=p, t=t)
        val = parisi_functional(0.0, AtomicMeasure.zero(u), params, FAST)
        a = 1.0 / (p - 1.0)
        ref = ((p - 1.0) / p) * (p * t) ** (-a) * (2.0 * u) ** ((1.0 + a) / 2.0) \
            * oracles.abs_moment_quad(1.0 + a)
        assert val == pytest.approx(ref, rel=3e-6)

    def test_degenerate_horizon(self):
        params = BoundaryParams(p=4.0, t=1.0, lam=0.5)
        g = atomic_measure(1e-8, [], [0.3])
        val = parisi_functional(0.5, g, params, FAST)
        assert val == pytest.approx(boundary_value(0.0, params) - 0.5 * 1e-8, abs=2e-4)

    def test_lambda_perturbation(self):
        # zero measure: dP/dlam = E r(sqrt(2u) z)^2 - u, by the envelope rule
        p, t, u, lam = 4.0, 1.0, 0.8, 0.3
        g = AtomicMeasure.zero(u)
        dl = 1e-3
        lo = parisi_functional(lam - dl, g, BoundaryParams(p=p, t=t), FAST)
        hi = parisi_functional(lam + dl, g, BoundaryParams(p=p, t=t), FAST)
        fd = (hi - lo) / (2.0 * dl)

        def r_sq(x):
            return float(boundary_tables(np.array([x]),
                                         BoundaryParams(p=p, t=t, lam=lam))[1][0]) ** 2

        ref = oracles.gauss_expect_quad(r_sq, math.sqrt(2.0 * u)) - u
        assert fd == pytest.approx(ref, abs=2e-5)


class TestResidual:
    def test_heat_equation_case(self):
        # zero measure, lam=0: residual reduces to |d_s Psi + d_xx Psi|
        params = BoundaryParams(p=4.0, t=1.0)
        sol = solve_parisi_pde(0.0, AtomicMeasure.zero(1.0), params)
        stats = pde_residual(sol, default_probes(sol))
        assert stats.max < 1e-3

    def test_reference_chart_default_grid(self, ref_solution):
        stats = pde_residual(ref_solution, default_probes(ref_solution))
        assert stats.max < 1e-3

    def test_rejects_boundary_probe(self, ref_solution):
        q1 = ref_solution.gamma.q[1]
        with pytest.raises(ValueError):
            pde_residual(ref_solution, [(q1, 0.5)])

    def test_second_order_convergence(self, ref_chart):
        lam, gamma, params = ref_chart
        # fixed probes, two grids with a 2x step ratio
        coarse = solve_parisi_pde(lam, gamma, params, PdeGrid(quad_order=40, step_frac=2e-3))
        fine = solve_parisi_pde(lam, gamma, params, PdeGrid(quad_order=40, step_frac=1e-3))
        probes = default_probes(coarse, per_level=3)
        r_c = pde_residual(coarse, probes).max
        r_f = pde_residual(fine, probes).max
        assert 3.0 < r_c / r_f < 5.2


class TestGuards:
    def test_mass_guard(self):
        params = BoundaryParams(p=4.0, t=1.0)
        heavy = atomic_measure(2.0, [], [20.0])  # mass 40 > 30
        with pytest.raises(Exception):
            solve_parisi_pde(0.0, heavy, params, FAST)

    def test_safe_zone_query(self, ref_solution):
        from lpgroth.pde import PdeError
        with pytest.raises(PdeError):
            ref_solution.psi(0.0, np.array([ref_solution.grid_extent * 10.0]))

    def test_time_range(self, ref_solution):
        from lpgroth.pde import PdeError
        with pytest.raises(PdeError):
            ref_solution.psi(ref_solution.gamma.u + 0.5, np.array([0.0]))
