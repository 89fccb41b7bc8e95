"""Outer variational problem over the PDE functional.

Three nested optimizations, bottom up:

* ``minimize_parisi``: inf over (lam, gamma) with a fixed number k of
  interior atoms and fixed horizon u, by Nelder-Mead in an unconstrained
  reparameterization (so the simplex never leaves the feasible cone).
* ``fixed_horizon_value``: escalates k = 0, 1, ... and stops once adding an
  atom buys less than a tolerance. The k-atom optimum warm-starts k+1.
* ``variational_value``: sup over the horizon u on (0, u_cap] with
  u_cap = (4/t)^{2/(p-2)}, by geometric scan plus golden-section. The
  supremum is interior; hitting the cap is reported as an error.

The limiting constant is then

    gp = (p/2) (p/2 - 1)^{2/p - 1} t^{2/p} value^{1 - 2/p},

independent of t (the t-dependence of the variational value cancels; the
scaling check below measures the exponent directly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .boundary import BoundaryParams
from .pde import AtomicMeasure, PdeError, PdeGrid, atomic_measure, parisi_functional

__all__ = [
    "ParisiPoint",
    "HorizonResult",
    "VariationalResult",
    "minimize_parisi",
    "fixed_horizon_value",
    "variational_value",
    "grothendieck_limit",
    "scaling_check",
    "COARSE_GRID",
]

# coarse preset for horizon scans, medium for the atom escalation; final
# numbers always come from the grid the caller passed
COARSE_GRID = PdeGrid(quad_order=24, step_frac=8e-3, terminal_order=24, terminal_knots=1025)
MEDIUM_GRID = PdeGrid(quad_order=40, step_frac=5e-3, terminal_order=32, terminal_knots=2049)

_RESTART_GRID = [(0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (0.0, 0.5), (-1.0, 0.5), (1.0, 0.5)]

# Minimum atom gap as a fraction of u. A mass layer collapsing onto u is
# exactly equivalent to raising lam (a quadratic-tilt identity of the
# terminal sup), so pinning breakpoints away from u discards nothing from
# the infimum while closing the degenerate direction in which the measure
# escapes through sharper and sharper layers. Interior atoms are exact
# objects in this parameterization, so interior gaps lose nothing either.
_GAP_FLOOR = 0.01


def _decode(theta: np.ndarray, u: float, k: int) -> tuple[float, AtomicMeasure]:
    """theta -> (lam, gamma). lam free; m_0 = theta^2 >= 0; higher levels by
    exponentiated increments; breakpoints by floored normalized gaps."""
    th = np.clip(np.asarray(theta, dtype=float), -60.0, 60.0)
    lam = float(th[0])
    m0 = float(th[1]) ** 2
    ms = [m0]
    for v in th[2:2 + k]:
        ms.append(ms[-1] + math.exp(v))
    if k > 0:
        raw = np.exp(th[2 + k:2 + 2 * k + 1])
        w = raw / float(np.sum(raw))
        gaps = u * (_GAP_FLOOR + (1.0 - _GAP_FLOOR * (k + 1)) * w)
        q_inner = np.cumsum(gaps)[:k]
    else:
        q_inner = ()
    return lam, atomic_measure(u, q_inner, ms)


def _encode(lam: float, gamma: AtomicMeasure, u: float, k: int) -> np.ndarray:
    """Inverse of _decode, padding when gamma has fewer levels than
    requested. Optimal charts pile thin, heavy layers against the horizon,
    so a new level splits the gap next to u and extends the mass stack
    geometrically; the padded start is a near-copy of the given measure."""
    q = list(gamma.q)
    m = list(gamma.m)
    q = [v * (u / gamma.u) for v in q]
    q[-1] = u
    while len(m) < k + 1:
        q.insert(-1, 0.5 * (q[-2] + q[-1]))
        m.append(m[-1] * 1.5 if m[-1] > 1e-6 else 0.3)
    while len(m) > k + 1:
        gaps = [b - a for a, b in zip(m, m[1:])]
        j = int(np.argmin(gaps)) if gaps else 0
        del m[j + 1 if gaps else -1]
        del q[j + 1 if gaps else -2]
    th = np.empty(2 + k + (k + 1 if k > 0 else 0))
    th[0] = lam
    th[1] = math.sqrt(max(m[0], 0.0))
    for l in range(k):
        th[2 + l] = math.log(max(m[l + 1] - m[l], 1e-8))
    if k > 0:
        denom = 1.0 - _GAP_FLOOR * (k + 1)
        for l in range(k + 1):
            w = ((q[l + 1] - q[l]) / u - _GAP_FLOOR) / denom
            th[2 + k + l] = math.log(max(w, 1e-8))
    return th


@dataclass(frozen=True)
class ParisiPoint:
    """One inner optimum: multiplier, measure, functional value."""

    lam: float
    gamma: AtomicMeasure
    value: float
    u: float
    k: int
    n_evals: int
    converged: bool


def minimize_parisi(params: BoundaryParams, u: float, k: int,
                    grid: PdeGrid = PdeGrid(), restarts: int = 6,
                    warm: tuple[float, AtomicMeasure] | None = None,
                    rel_tol: float = 1e-7, fatol: float = 1e-9,
                    maxiter_factor: int = 150, polish_rounds: int = 3) -> ParisiPoint:
    """inf over (lam, gamma) at fixed (u, k) atoms.

    Nelder-Mead from a small grid of starts (lam in {-1,0,1} crossed with
    m_0 in {0, 0.5}); the best point is then re-run until the relative
    improvement over a restart sweep falls below rel_tol. Solver faults
    inside a trial step count as +inf so the simplex backs away on its own.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    evals = 0

    def objective(theta):
        nonlocal evals
        evals += 1
        try:
            lam, gamma = _decode(theta, u, k)
            return parisi_functional(lam, gamma, params, grid)
        except (PdeError, OverflowError, FloatingPointError):
            return np.inf

    dim = 2 + k + (k + 1 if k > 0 else 0)
    inits = []
    if warm is not None:
        inits.append(_encode(warm[0], warm[1], u, k))
    for lam0, m00 in _RESTART_GRID[:max(restarts, 0)]:
        th = np.zeros(dim)
        th[0] = lam0
        th[1] = math.sqrt(m00)
        th[2:2 + k] = math.log(0.5)
        inits.append(th)

    if not inits:
        raise ValueError("need a warm start or restarts >= 1")
    opts = {"maxiter": maxiter_factor * dim, "fatol": fatol, "xatol": 1e-7}
    best_x, best_v = None, np.inf
    for x0 in inits:
        res = _scipy_minimize(objective, x0, method="Nelder-Mead", options=opts)
        if res.fun < best_v:
            best_x, best_v = res.x, res.fun
    if not math.isfinite(best_v):
        raise PdeError(f"inner optimization found no finite value at u={u}, k={k}")
    converged = polish_rounds == 0
    for _ in range(polish_rounds):
        res = _scipy_minimize(objective, best_x, method="Nelder-Mead", options=opts)
        gain = best_v - res.fun
        if res.fun < best_v:
            best_x, best_v = res.x, res.fun
        if gain < rel_tol * max(1.0, abs(best_v)):
            converged = True
            break
    lam, gamma = _decode(best_x, u, k)
    return ParisiPoint(lam=lam, gamma=gamma, value=float(best_v), u=u, k=k,
                       n_evals=evals, converged=converged)


@dataclass(frozen=True)
class HorizonResult:
    value: float
    point: ParisiPoint
    k_values: tuple[float, ...]


def fixed_horizon_value(params: BoundaryParams, u: float,
                        grid: PdeGrid = PdeGrid(), k_max: int = 3,
                        k_tol: float = 1e-5, restarts: int = 6,
                        warm: tuple[float, AtomicMeasure] | None = None,
                        rel_tol: float = 1e-7, fatol: float = 1e-9,
                        maxiter_factor: int = 150,
                        polish_rounds: int = 3) -> HorizonResult:
    """inf over (lam, gamma) at fixed horizon, escalating the atom count
    until one more atom improves the value by less than k_tol."""
    values = []
    best: ParisiPoint | None = None
    prev: ParisiPoint | None = None
    for k in range(k_max + 1):
        # after the first level the k-atom optimum pads into the (k+1)-atom
        # chart as a structurally aligned near-copy, so the warm start is
        # already close; cold restarts at high k are the most expensive runs
        # in the pipeline and essentially never win
        w = (prev.lam, prev.gamma) if prev is not None else warm
        pt = minimize_parisi(params, u, k, grid=grid,
                             restarts=restarts if prev is None else 0,
                             warm=w, rel_tol=rel_tol, fatol=fatol,
                             maxiter_factor=maxiter_factor,
                             polish_rounds=polish_rounds)
        values.append(pt.value)
        if best is None or pt.value < best.value:
            best = pt
        if prev is not None and prev.value - pt.value < k_tol:
            break
        prev = pt
    return HorizonResult(value=best.value, point=best, k_values=tuple(values))


@dataclass(frozen=True)
class VariationalResult:
    value: float
    u_star: float
    point: ParisiPoint
    u_cap: float
    scan: tuple[tuple[float, float], ...]  # (u, coarse value) pairs


def horizon_cap(p: float, t: float) -> float:
    return (4.0 / t) ** (2.0 / (p - 2.0))


def variational_value(params: BoundaryParams, grid: PdeGrid = PdeGrid(),
                      coarse: PdeGrid = COARSE_GRID, medium: PdeGrid = MEDIUM_GRID,
                      k_max: int = 3, restarts: int = 6,
                      scan_points: int = 9) -> VariationalResult:
    """sup over u of the fixed-horizon value.

    Staged for cost: a warm-started geometric scan and golden-section run on
    a coarse grid (consistent bias cancels when comparing nearby u), a
    parabolic vertex sharpens u*, the atom escalation runs on the medium
    grid, and the reported value is the caller-grid evaluation at the
    escalated optimum (the medium argmin sits within grid bias of the
    caller-grid argmin, so re-optimizing there buys less than the bias
    itself). A maximizer at the cap means the parameters left the regime
    where the cap bound applies, so that is an error rather than a clamp.
    """
    p, t = params.p, params.t
    cap = horizon_cap(p, t)
    us = cap * np.geomspace(1e-3, 1.0, scan_points)

    # scan locates the maximizing u only, so one atom level is plenty here
    warm = None
    scan = []
    for u in us:
        hr = fixed_horizon_value(params, float(u), grid=coarse, k_max=0,
                                 restarts=restarts if warm is None else 0,
                                 warm=warm, fatol=1e-6, maxiter_factor=80,
                                 polish_rounds=0)
        warm = (hr.point.lam, hr.point.gamma)
        scan.append((float(u), hr.value))
    vals = np.array([v for _, v in scan])
    j = int(np.argmax(vals))
    if j == len(us) - 1:
        raise PdeError(f"horizon supremum sits at the cap u={cap}; no interior maximizer found")
    lo, hi = (us[0] * 1e-2, us[1]) if j == 0 else (us[j - 1], us[j + 1])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    cache: dict[float, tuple[float, tuple]] = {}

    def coarse_val(logu, w):
        u = math.exp(logu)
        hr = fixed_horizon_value(params, u, grid=coarse, k_max=min(k_max, 1),
                                 k_tol=1e-4, restarts=0, warm=w, fatol=1e-7,
                                 maxiter_factor=60, polish_rounds=0)
        ww = (hr.point.lam, hr.point.gamma)
        cache[logu] = (hr.value, ww)
        return hr.value, ww

    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, wc = coarse_val(c, warm)
    fd, wd = coarse_val(d, wc)
    for _ in range(9):
        if b - a < 3e-2:
            break
        if fc > fd:
            b, d, fd, wd = d, c, fc, wc
            c = b - invphi * (b - a)
            fc, wc = coarse_val(c, wc)
        else:
            a, c, fc, wc = c, d, fd, wd
            d = a + invphi * (b - a)
            fd, wd = coarse_val(d, wd)
    logu_star, warm = (c, wc) if fc > fd else (d, wd)

    # parabolic vertex through the three cached evaluations nearest u*
    pts = sorted(cache.items(), key=lambda kv: abs(kv[0] - logu_star))[:3]
    pts.sort()
    xs = np.array([kv[0] for kv in pts])
    ys = np.array([kv[1][0] for kv in pts])
    if len(pts) == 3 and xs[0] < xs[1] < xs[2]:
        coef = np.polyfit(xs, ys, 2)
        if coef[0] < 0.0:
            v = -coef[1] / (2.0 * coef[0])
            if xs[0] - 0.1 < v < xs[2] + 0.1:
                logu_star = v
    u_star = math.exp(logu_star)

    # the coarse stages only pick u*; the atom escalation runs once on the
    # medium grid and the caller's grid prices the optimum it found. The
    # high-k valley is flat along the top-mass direction (the limit measure
    # carries an atom at u, which finite charts approach with an O(1/m)
    # tail), so the inner convergence bar sits an order below k_tol rather
    # than chasing the creep along that direction.
    h_med = fixed_horizon_value(params, u_star, grid=medium, k_max=k_max,
                                k_tol=1e-5, restarts=1, warm=warm,
                                rel_tol=1e-6, fatol=3e-8,
                                maxiter_factor=100, polish_rounds=2)
    pm = h_med.point
    fine_value = parisi_functional(pm.lam, pm.gamma, params, grid)
    pt_fine = ParisiPoint(lam=pm.lam, gamma=pm.gamma, value=float(fine_value),
                          u=u_star, k=pm.k, n_evals=pm.n_evals + 1,
                          converged=pm.converged)
    return VariationalResult(value=pt_fine.value, u_star=u_star, point=pt_fine,
                             u_cap=cap, scan=tuple(scan))


@dataclass(frozen=True)
class GrothendieckResult:
    p: float
    t: float
    gp: float
    variational: VariationalResult


def _gp_from_value(p: float, t: float, value: float) -> float:
    if value <= 0.0:
        raise PdeError(f"variational value {value} not positive; cannot form the limit constant")
    return (p / 2.0) * (p / 2.0 - 1.0) ** (2.0 / p - 1.0) * t ** (2.0 / p) * value ** (1.0 - 2.0 / p)


def grothendieck_limit(p: float, t: float | None = None, **kwargs) -> GrothendieckResult:
    """Limit constant for p > 2. When t is not pinned we pick the t whose
    horizon cap is ~6, which keeps the PDE grid extent moderate for every p
    (legitimate because the constant is t-independent)."""
    if p <= 2.0:
        raise ValueError("the variational limit needs p > 2")
    if t is None:
        t = 4.0 * 6.0 ** (-(p - 2.0) / 2.0)
    params = BoundaryParams(p=p, t=t)
    var = variational_value(params, **kwargs)
    return GrothendieckResult(p=p, t=t, gp=_gp_from_value(p, t, var.value), variational=var)


@dataclass(frozen=True)
class ScalingResult:
    p: float
    ts: tuple[float, ...]
    values: tuple[float, ...]
    gps: tuple[float, ...]
    slope: float
    expected_slope: float

    @property
    def gp_spread(self) -> float:
        """Relative spread of the combined constant across the t sweep."""
        mid = 0.5 * (max(self.gps) + min(self.gps))
        return (max(self.gps) - min(self.gps)) / mid


def scaling_check(p: float, ts, **kwargs) -> ScalingResult:
    """Exponent check: the fixed-horizon sup should scale as t^{-2/(p-2)},
    making the combined constant flat across t."""
    ts = tuple(float(t) for t in ts)
    if len(ts) < 2:
        raise ValueError("a scaling exponent needs at least two t values")
    values, gps = [], []
    for t in ts:
        var = variational_value(BoundaryParams(p=p, t=t), **kwargs)
        values.append(var.value)
        gps.append(_gp_from_value(p, t, var.value))
    slope = float(np.polyfit(np.log(ts), np.log(values), 1)[0])
    return ScalingResult(p=p, ts=ts, values=tuple(values), gps=tuple(gps),
                         slope=slope, expected_slope=-2.0 / (p - 2.0))
