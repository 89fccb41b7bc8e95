"""Backward PDE solver for the zero-temperature variational functional.

The order parameter is an atomic monotone step function

    gamma(s) = sum_l m_l 1[q_l, q_{l+1})(s) + m_k 1[q_k, u](s),
    0 = q_0 < q_1 < ... < q_k < q_{k+1} = u,   0 <= m_0 < ... < m_k,

and Psi solves  dPsi/ds = -(Psi_xx + gamma(s) Psi_x^2)  on [0,u) x R with
terminal value Psi(u, x) = f(x), the boundary module's sup. On each level
the solution operator is the exact log-moment Gaussian smoothing

    Psi(s, x) = (1/m_l) log E exp( m_l Psi(q_{l+1}, x + sqrt(2(q_{l+1}-s)) z) ),

with a plain expectation when m_l = 0. The recursion below evaluates that
operator numerically, backward from the terminal level, storing one value
table and one slope table per breakpoint.

Numerical layout (measured, not guessed -- see the growth/quadrature notes
in the repo's test suite):

* terminal pass: f has a kink at x = 0, so Gauss-Hermite converges only
  algebraically there. Instead the terminal expectation integrates
  exp(m f(x + c z) - z^2/2) with two Gauss-Legendre panels split exactly at
  the kink location z = -x/c, on a window located from the integrand's own
  exponent (the tilt e^{m f} shifts mass off-center for m > 0). f itself is
  evaluated through a one-sided graded spline in |x'|, which represents the
  kink exactly.
* level passes: the stored tables are smooth, so Gauss-Hermite applies; the
  nodes are mean-shifted to the integrand's peak (an exact change of
  variables, not an approximation) which keeps the rule accurate when
  m_l Psi_x tilts the Gaussian.
* slopes are propagated by the exact Gibbs-average identity
  Psi_x = E[e^{m Psi} Psi_x]/E[e^{m Psi}] rather than by differencing.

Beyond the grid, values extrapolate as C |x|^{1+1/(p-1)} with C matched at
the grid edge (that power is the exact growth order of the solution).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .boundary import BoundaryParams, boundary_tables, growth_envelope, slope_envelope
from .core import gauss_hermite_grid

__all__ = [
    "AtomicMeasure",
    "PdeGrid",
    "PdeSolution",
    "PdeError",
    "atomic_measure",
    "measure_moment",
    "measure_mass",
    "solve_parisi_pde",
    "parisi_functional",
    "pde_residual",
    "default_probes",
]

_SEPARATION_FLOOR = 1e-9
_LOG_TAIL = 46.0  # exp(-46) ~ 1e-20: relative truncation floor for windows


class PdeError(RuntimeError):
    """Numerics fault: overflow, out-of-zone query, or degenerate grid."""


@lru_cache(maxsize=32)
def _leggauss(order: int):
    nodes, wts = leggauss(order)
    nodes.flags.writeable = False
    wts.flags.writeable = False
    return nodes, wts


@dataclass(frozen=True)
class AtomicMeasure:
    """gamma as atoms; q holds all breakpoints (0, q_1, ..., q_k, u)."""

    u: float
    q: tuple[float, ...]
    m: tuple[float, ...]
    separation: float = _SEPARATION_FLOOR

    def __post_init__(self):
        if not (math.isfinite(self.u) and self.u > 0.0):
            raise ValueError(f"horizon u must be positive, got {self.u}")
        q, m = self.q, self.m
        if len(q) != len(m) + 1:
            raise ValueError("breakpoint count must equal level count + 1")
        if q[0] != 0.0 or not math.isclose(q[-1], self.u, rel_tol=0.0, abs_tol=0.0):
            raise ValueError("breakpoints must run from 0 to u")
        if any(b - a < self.separation for a, b in zip(q, q[1:])):
            raise ValueError(f"breakpoints closer than the separation floor {self.separation}")
        if m[0] < 0.0:
            raise ValueError("level values must be nonnegative")
        if any(b - a < self.separation for a, b in zip(m, m[1:])):
            raise ValueError(f"level values closer than the separation floor {self.separation}")
        if not all(math.isfinite(v) for v in q + m):
            raise ValueError("measure data must be finite")

    @property
    def k(self) -> int:
        return len(self.m) - 1

    @classmethod
    def zero(cls, u: float) -> "AtomicMeasure":
        return cls(u=u, q=(0.0, u), m=(0.0,))

    def level_of(self, s) -> np.ndarray:
        """Index l with s in [q_l, q_{l+1}); s = u maps to the last level."""
        qa = np.asarray(self.q)
        idx = np.searchsorted(qa, np.asarray(s, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.m) - 1)

    def gamma_at(self, s):
        """Right-continuous step value gamma(s)."""
        ma = np.asarray(self.m)
        out = ma[self.level_of(s)]
        return float(out) if np.isscalar(s) or np.asarray(s).ndim == 0 else out


def atomic_measure(u: float, q_inner, m_levels, separation: float = _SEPARATION_FLOOR) -> AtomicMeasure:
    """Build a measure from interior breakpoints, merging degenerate atoms.

    Zero-width intervals and non-increasing level values are no-ops
    mathematically but poison finite differences, so they are merged here
    before any solve.
    """
    if u <= 2.0 * separation:
        raise ValueError("horizon below the separation floor")
    q = [0.0] + sorted(float(v) for v in q_inner) + [float(u)]
    m = [float(v) for v in m_levels]
    if len(q) != len(m) + 1:
        raise ValueError("need one level value per interval")
    # drop width-zero intervals, removing whichever of the two breakpoints
    # is interior (0 and u always stay)
    l = 0
    while l < len(m):
        if q[l + 1] - q[l] < separation:
            del q[l + 1 if l + 1 < len(q) - 1 else l]
            del m[l]
        else:
            l += 1
    # merge adjacent levels whose values are within the floor
    l = 0
    while l < len(m) - 1:
        if m[l + 1] - m[l] < separation:
            del m[l + 1]
            del q[l + 1]
        else:
            l += 1
    m[0] = max(m[0], 0.0)
    return AtomicMeasure(u=u, q=tuple(q), m=tuple(m), separation=separation)


def measure_moment(gamma: AtomicMeasure) -> float:
    """int_0^u s gamma(s) ds = sum_l m_l (q_{l+1}^2 - q_l^2)/2, exactly."""
    q = np.asarray(gamma.q)
    m = np.asarray(gamma.m)
    return float(np.sum(m * (q[1:] ** 2 - q[:-1] ** 2)) / 2.0)


def measure_mass(gamma: AtomicMeasure) -> float:
    """int_0^u gamma(s) ds = sum_l m_l (q_{l+1} - q_l).

    This integral (not max m_l) is what bounds the Gibbs tilt: one smoothing
    step over [q_l, q_{l+1}) shifts the integration mean by 2 m_l (q_{l+1}-q_l)
    Psi_x in x units, so the whole recursion drifts by at most twice this mass
    times the slope scale.
    """
    q = np.asarray(gamma.q)
    m = np.asarray(gamma.m)
    return float(np.sum(m * (q[1:] - q[:-1])))


@dataclass(frozen=True)
class PdeGrid:
    """Grid configuration. Extent = 8 sqrt(2u) (diffusion range) plus twice
    the measure mass int gamma ds times the boundary slope scale (drift
    tilt); step = step_frac * extent, capped so that a thin terminal level
    cannot blow the extent up past what the kink-smoothing width
    sqrt(2 (u - q_k)) needs resolved.

    The default step keeps the centered-stencil truncation of the residual
    diagnostic under 1e-3; both the truncation and the table interpolation
    error scale as step^2, so 2x refinement divides the measured residual
    by ~4.
    """

    quad_order: int = 64
    step_frac: float = 5e-4
    x_max: float | None = None
    terminal_order: int | None = None  # GL order per panel; default 3/4 quad_order
    terminal_knots: int = 4096  # knot count of the graded terminal spline
    safe_factor: float = 3.0  # extrapolation-safe zone is safe_factor * x_max

    def resolve_extent(self, gamma: AtomicMeasure, params: BoundaryParams) -> float:
        if self.x_max is not None:
            return float(self.x_max)
        core = 8.0 * math.sqrt(2.0 * gamma.u)
        mass = measure_mass(gamma)
        ext = core
        for _ in range(2):  # slope envelope grows sublinearly, two passes settle
            ext = core + 2.0 * mass * float(slope_envelope(ext, params))
        return ext

    def resolve_step(self, gamma: AtomicMeasure, x_max: float) -> float:
        core = 8.0 * math.sqrt(2.0 * gamma.u)
        sigma_k = math.sqrt(2.0 * (gamma.u - gamma.q[-2]))
        return self.step_frac * max(core, min(x_max, 40.0 * sigma_k))

    def resolve_terminal_order(self) -> int:
        return self.terminal_order if self.terminal_order is not None else max(16, (3 * self.quad_order) // 4)


class _BoundarySpline:
    """One-sided graded spline of the terminal condition in |x'|.

    The terminal f is smooth on (0, inf) and even; fitting in |x'| makes the
    x' = 0 kink exact. Cubic grading of the knots keeps the interpolation
    error roughly uniform against the |x'|^{1+1/(p-1)} curvature blow-up.
    """

    def __init__(self, bp: BoundaryParams, x_abs_max: float, knots: int = 4096):
        g = np.linspace(0.0, 1.0, knots) ** 3 * x_abs_max
        f, d = boundary_tables(g, bp)
        self.bp = bp
        self.x_abs_max = x_abs_max
        self._f = CubicSpline(g, f)
        self._d = CubicSpline(g, d)  # d >= 0 on the positive side

    def eval(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = np.abs(xq)
        if float(np.max(y, initial=0.0)) > self.x_abs_max:
            # rare: widen by direct evaluation rather than extrapolating
            f, d = boundary_tables(xq, self.bp)
            return f, d
        f = self._f(y)
        d = self._d(y)
        return f, np.sign(xq) * d

    def eval_f(self, xq: np.ndarray) -> np.ndarray:
        """Value only; the window-probe loop never needs the slope."""
        y = np.abs(xq)
        if float(np.max(y, initial=0.0)) > self.x_abs_max:
            f, _ = boundary_tables(xq, self.bp)
            return f
        return self._f(y)


class _Table:
    """A stored slice Psi(q_l, .): values + slopes on the x grid, with the
    matched power-law continuation outside."""

    def __init__(self, x: np.ndarray, f: np.ndarray, d: np.ndarray, growth_pow: float, safe_limit: float):
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(d))):
            raise PdeError("level table is not finite; grid too coarse or parameters extreme")
        if float(np.max(np.abs(f))) > 1e30:
            raise PdeError("level table magnitude blew up; parameters extreme")
        self.x = x
        self.f = f
        self.d = d
        self.a = growth_pow
        self.safe_limit = safe_limit
        self.edge = x[-1]
        self._sf = CubicSpline(x, f)
        self._sd = CubicSpline(x, d)
        self.c_lo = f[0] / abs(x[0]) ** growth_pow
        self.c_hi = f[-1] / x[-1] ** growth_pow
        self.cd_lo = max(-d[0], 0.0) / abs(x[0]) ** (growth_pow - 1.0)
        self.cd_hi = max(d[-1], 0.0) / x[-1] ** (growth_pow - 1.0)

    def eval(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if float(np.max(np.abs(xq), initial=0.0)) > self.safe_limit:
            raise PdeError("query beyond the extrapolation-safe zone")
        inside = np.abs(xq) <= self.edge
        xc = np.clip(xq, -self.edge, self.edge)
        f = self._sf(xc)
        d = self._sd(xc)
        if not inside.all():
            out = ~inside
            y = np.abs(xq[out])
            c = np.where(xq[out] > 0.0, self.c_hi, self.c_lo)
            cd = np.where(xq[out] > 0.0, self.cd_hi, self.cd_lo)
            f[out] = c * y ** self.a
            d[out] = np.sign(xq[out]) * cd * y ** (self.a - 1.0)
        return f, d

    def eval_f(self, xq: np.ndarray) -> np.ndarray:
        if float(np.max(np.abs(xq), initial=0.0)) > self.safe_limit:
            raise PdeError("query beyond the extrapolation-safe zone")
        inside = np.abs(xq) <= self.edge
        f = self._sf(np.clip(xq, -self.edge, self.edge))
        if not inside.all():
            out = ~inside
            y = np.abs(xq[out])
            f[out] = np.where(xq[out] > 0.0, self.c_hi, self.c_lo) * y ** self.a
        return f


def _gibbs_reduce(expo: np.ndarray, slopes: np.ndarray, m: float) -> tuple[np.ndarray, np.ndarray]:
    """(1/m) log sum exp(expo) and the matching softmax average of slopes,
    reduced over the last axis. expo already contains the log-weights."""
    mx = np.max(expo, axis=-1, keepdims=True)
    w = np.exp(expo - mx)
    z = np.sum(w, axis=-1)
    val = (mx[..., 0] + np.log(z)) / m
    slope = np.sum(w * slopes, axis=-1) / z
    return val, slope


def _terminal_pass(xq: np.ndarray, m: float, delta: float, fspl: _BoundarySpline,
                   bp: BoundaryParams, order: int) -> tuple[np.ndarray, np.ndarray]:
    """One Hopf-Cole step straight off the terminal condition.

    Integrates over z ~ N(0,1) with two Gauss-Legendre panels split at the
    kink z0 = -x/c; the window is located from the exponent's own envelope
    so the e^{m f} tilt cannot push mass outside it.
    """
    if delta <= 1e-14:
        return fspl.eval(xq)
    c = math.sqrt(2.0 * delta)
    if m * c > 12.0:
        # the tilt makes the integrand's peak narrower than the probe grid
        # can locate; refuse rather than return a silently wrong value
        raise PdeError("terminal tilt m sqrt(2 delta) too sharp for the window probe")
    x = np.asarray(xq, dtype=float)

    if m < 1e-8:
        # no tilt: window is the plain Gaussian range
        lo = np.full_like(x, -10.0)
        hi = np.full_like(x, 10.0)
    else:
        # half-width fixed point W = sqrt(2 (m env(|x| + cW) + tail))
        w = np.full_like(x, 10.0)
        for _ in range(4):
            w = np.sqrt(2.0 * (m * growth_envelope(np.abs(x) + c * w, bp) + _LOG_TAIL))
        # a weak tilt cannot carve narrow peaks, so fewer probes suffice
        n_probe = 65 if m * c <= 4.0 else 129
        probe = np.linspace(-1.0, 1.0, n_probe)
        zp = w[:, None] * probe[None, :]
        fp = fspl.eval_f(x[:, None] + c * zp)
        hp = m * fp - 0.5 * zp * zp
        keep = hp >= np.max(hp, axis=1, keepdims=True) - _LOG_TAIL
        step = w * (probe[1] - probe[0])
        lo = zp[np.arange(len(x)), np.argmax(keep, axis=1)] - step
        hi = zp[np.arange(len(x)), n_probe - 1 - np.argmax(keep[:, ::-1], axis=1)] + step

    z0 = np.clip(-x / c, lo, hi)  # kink location, clipped into the window
    nodes, wts = _leggauss(order)
    halves, zs_pan = [], []
    for a, b in ((lo, z0), (z0, hi)):
        mid = 0.5 * (a + b)[:, None]
        half = 0.5 * (b - a)[:, None]
        zs_pan.append(mid + half * nodes[None, :])
        halves.append(np.broadcast_to(half * wts[None, :], zs_pan[-1].shape))
    z = np.concatenate(zs_pan, axis=1)
    f, d = fspl.eval(x[:, None] + c * z)
    logw = np.log(np.maximum(np.concatenate(halves, axis=1), 1e-300)) - 0.5 * z * z - 0.5 * math.log(2.0 * math.pi)

    if m < 1e-8:
        w = np.exp(logw)
        return np.sum(w * f, axis=1), np.sum(w * d, axis=1)
    val, slope = _gibbs_reduce(m * f + logw, d, m)
    return val, slope


def _level_pass(xq: np.ndarray, m: float, delta: float, table: _Table,
                quad) -> tuple[np.ndarray, np.ndarray]:
    """One Hopf-Cole step off a stored (smooth) level table, by mean-shifted
    Gauss-Hermite: E g(Z) = sum_j p_j g(z*+z_j) exp(-z* z_j - z*^2/2)."""
    if delta <= 1e-14:
        return table.eval(xq)
    c = math.sqrt(2.0 * delta)
    x = np.asarray(xq, dtype=float)
    zs = np.zeros_like(x)
    if m >= 1e-8:
        mc = m * c
        dmax = float(np.max(np.abs(table.d)))
        pstep = None
        if mc * dmax > 2.0:
            # strong tilt: locate the exponent's peak on a probe grid first;
            # the bracketed solve below finds some local peak, and only the
            # probe knows which branch of a multi-peaked exponent to take
            zmax = min(mc * dmax + 8.0, (table.safe_limit - float(np.max(np.abs(x)))) / c)
            if zmax <= 0.0:
                raise PdeError("tilt pushes the smoothing mean outside the safe zone")
            zp = np.linspace(-zmax, zmax, 65)
            fp = table.eval_f(x[:, None] + c * zp[None, :])
            zs = zp[np.argmax(m * fp - 0.5 * zp[None, :] ** 2, axis=1)]
            pstep = zp[1] - zp[0]
        # The shift solves z = mc Psi_x(x + cz).  Psi stays convex through
        # every smoothing step (the terminal is a sup of affine maps), so the
        # right side is nondecreasing in z and its values at the safe-zone
        # edges bracket every fixed point, with g = mc Psi_x - z positive at
        # the left end and negative at the right.  Regula falsi on that
        # bracket cannot escape and, unlike plain iteration, does not stall
        # when 2 m delta Psi_xx ~ 1 along the approach.
        L = table.safe_limit

        def slope_at(zq):
            # queries computed from the box ends can overrun L by rounding
            _, dvq = table.eval(np.clip(x + c * zq, -L, L))
            return dvq

        zlo = (-L - x) / c
        zhi = (L - x) / c
        a = np.clip(mc * slope_at(zlo), zlo, zhi)
        b = np.clip(mc * slope_at(zhi), zlo, zhi)
        if pstep is not None:
            # narrow to the probe's basin wherever the sign pattern survives
            ap = np.clip(np.maximum(a, zs - pstep), zlo, zhi)
            bp = np.clip(np.minimum(b, zs + pstep), zlo, zhi)
            ga = mc * slope_at(ap) - ap
            gb = mc * slope_at(bp) - bp
            ok = (ga >= 0.0) & (gb <= 0.0) & (ap <= bp)
            a = np.where(ok, ap, a)
            b = np.where(ok, bp, b)
        fa = mc * slope_at(a) - a
        fb = mc * slope_at(b) - b
        gz = fa
        side = np.zeros(x.shape, dtype=np.int8)
        for _ in range(16):
            denom = fa - fb
            frac = np.where(np.abs(denom) > 1e-300, fa / np.where(denom == 0.0, 1.0, denom), 0.5)
            zs = a + np.clip(frac, 1e-4, 1.0 - 1e-4) * (b - a)
            gz = mc * slope_at(zs) - zs
            pos = gz > 0.0
            # Illinois: halve the retained end's residual on a repeated side,
            # otherwise a flat g pins one end and progress turns geometric
            fb = np.where(pos, np.where(side == 1, 0.5 * fb, fb), gz)
            fa = np.where(pos, gz, np.where(side == -1, 0.5 * fa, fa))
            a = np.where(pos, zs, a)
            b = np.where(pos, b, zs)
            side = np.where(pos, 1, -1).astype(np.int8)
            if float(np.max(np.abs(gz) / (1.0 + np.abs(zs)))) <= 1e-3:
                break
        # a residual that stays large means the tilt outruns what the shifted
        # rule (or the table's safe zone) covers
        if float(np.max(np.abs(gz) / (1.0 + np.abs(zs)))) > 0.02:
            raise PdeError("mean-shift iteration did not settle; level tilt too sharp")
    z = zs[:, None] + quad.z_nodes[None, :]
    f, d = table.eval(x[:, None] + c * z)
    logw = np.log(quad.probs)[None, :] - zs[:, None] * quad.z_nodes[None, :] - 0.5 * zs[:, None] ** 2
    if m < 1e-8:
        w = np.exp(logw)
        return np.sum(w * f, axis=1), np.sum(w * d, axis=1)
    return _gibbs_reduce(m * f + logw, d, m)


@dataclass
class PdeSolution:
    """Backward solution: one (value, slope) table per breakpoint q_l, plus
    enough machinery to answer Psi(s, x) anywhere by one extra smoothing
    step from the stored next-level table."""

    lam: float
    gamma: AtomicMeasure
    params: BoundaryParams  # carries the effective lam
    grid_extent: float
    grid_step: float
    quad_order: int
    x: np.ndarray
    levels: list  # _Table per breakpoint, index 0..k (terminal handled via spline)
    value_at_origin: float
    _fspl: _BoundarySpline = field(repr=False)
    _quad: object = field(repr=False)
    _terminal_order: int = field(repr=False)

    def _eval(self, s: float, xq) -> tuple[np.ndarray, np.ndarray]:
        g = self.gamma
        if not 0.0 <= s <= g.u:
            raise PdeError(f"time {s} outside [0, {g.u}]")
        xa = np.atleast_1d(np.asarray(xq, dtype=float))
        if s >= g.u:
            return self._fspl.eval(xa)
        l = int(g.level_of(s))
        if math.isclose(s, g.q[l], rel_tol=0.0, abs_tol=1e-15):
            return self.levels[l].eval(xa)
        delta = g.q[l + 1] - s
        m = g.m[l]
        if l == g.k:
            return _terminal_pass(xa, m, delta, self._fspl, self.params, self._terminal_order)
        return _level_pass(xa, m, delta, self.levels[l + 1], self._quad)

    def psi(self, s: float, xq):
        v, _ = self._eval(s, xq)
        return v if np.asarray(xq).ndim else float(v[0])

    def dpsi(self, s: float, xq):
        _, d = self._eval(s, xq)
        return d if np.asarray(xq).ndim else float(d[0])

    def zero_control_value(self) -> float:
        """E f(sqrt(2u) z): the no-drift lower bound for Psi(0,0)."""
        v, _ = _terminal_pass(np.zeros(1), 0.0, self.gamma.u, self._fspl,
                              self.params, self._terminal_order)
        return float(v[0])

    def to_json_dict(self) -> dict:
        return {
            "lam": self.lam,
            "p": self.params.p,
            "t": self.params.t,
            "u": self.gamma.u,
            "q": list(self.gamma.q),
            "m": list(self.gamma.m),
            "grid_extent": self.grid_extent,
            "grid_step": self.grid_step,
            "quad_order": self.quad_order,
            "value_at_origin": self.value_at_origin,
            "x": self.x.tolist(),
            "psi": [t.f.tolist() for t in self.levels],
            "dpsi": [t.d.tolist() for t in self.levels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def solve_parisi_pde(lam: float, gamma: AtomicMeasure, params: BoundaryParams,
                     grid: PdeGrid = PdeGrid()) -> PdeSolution:
    """Backward recursion l = k, ..., 0; tables are stored at s = q_l only.

    ``params`` supplies (p, t); the multiplier of the terminal condition is
    the explicit ``lam`` argument (it overrides params.lam so that one
    BoundaryParams can be reused across a lam search).
    """
    if not math.isfinite(lam):
        raise ValueError("lam must be finite")
    bp = BoundaryParams(p=params.p, t=params.t, lam=lam)
    mass = measure_mass(gamma)
    if mass > 30.0:
        raise PdeError("measure mass int gamma ds too large: drift tilt would dwarf the grid")

    x_max = grid.resolve_extent(gamma, bp)
    step = grid.resolve_step(gamma, x_max)
    sigma_k = math.sqrt(2.0 * (gamma.u - gamma.q[-2]))  # terminal kink-smoothing width
    if step > 0.75 * sigma_k:
        raise PdeError("terminal level thinner than the grid step can resolve")
    n_half = int(math.ceil(x_max / step))
    x = np.linspace(-x_max, x_max, 2 * n_half + 1)  # odd count: x=0 is a node
    safe_limit = grid.safe_factor * x_max

    a = 1.0 + 1.0 / (bp.p - 1.0)  # exact growth order of the solution
    quad = gauss_hermite_grid(grid.quad_order)
    t_order = grid.resolve_terminal_order()
    # terminal spline must cover every shifted query of the terminal pass:
    # |x| <= x_max plus the window half-width, itself set by the envelope
    c_k = sigma_k
    m_k = gamma.m[-1]
    reach = x_max + 10.0 * c_k
    for _ in range(3):
        w_k = math.sqrt(2.0 * (m_k * float(growth_envelope(reach, bp)) + _LOG_TAIL))
        reach = x_max + c_k * max(w_k, 10.0)
    fspl = _BoundarySpline(bp, reach * 1.5, knots=grid.terminal_knots)

    levels: list = [None] * (gamma.k + 1)
    for l in range(gamma.k, -1, -1):
        delta = gamma.q[l + 1] - gamma.q[l]
        m = gamma.m[l]
        if l == gamma.k:
            f, d = _terminal_pass(x, m, delta, fspl, bp, t_order)
        else:
            f, d = _level_pass(x, m, delta, levels[l + 1], quad)
        levels[l] = _Table(x, f, d, a, safe_limit)

    value_at_origin = float(levels[0].f[n_half])
    return PdeSolution(
        lam=lam, gamma=gamma, params=bp,
        grid_extent=x_max, grid_step=float(x[1] - x[0]), quad_order=grid.quad_order,
        x=x, levels=levels, value_at_origin=value_at_origin,
        _fspl=fspl, _quad=quad, _terminal_order=t_order,
    )


def parisi_functional(lam: float, gamma: AtomicMeasure, params: BoundaryParams,
                      grid: PdeGrid = PdeGrid()) -> float:
    """Psi(0,0) - lam u - int_0^u s gamma(s) ds."""
    sol = solve_parisi_pde(lam, gamma, params, grid)
    return sol.value_at_origin - lam * gamma.u - measure_moment(gamma)


@dataclass(frozen=True)
class ResidualStats:
    max: float
    mean: float
    values: np.ndarray


def default_probes(sol: PdeSolution, per_level: int = 6, x_span: float = 2.0):
    """Interior (s, x) probes: mid-interval times, |x| within x_span sqrt(2u)."""
    probes = []
    g = sol.gamma
    xs = np.linspace(-x_span * math.sqrt(2.0 * g.u), x_span * math.sqrt(2.0 * g.u), 5)
    for l in range(g.k + 1):
        for frac in np.linspace(0.25, 0.75, per_level):
            s = g.q[l] + frac * (g.q[l + 1] - g.q[l])
            probes.extend((float(s), float(xv)) for xv in xs)
    return probes


def pde_residual(sol: PdeSolution, probes) -> ResidualStats:
    """|dPsi/ds + Psi_xx + gamma(s) Psi_x^2| by centered differences.

    The finite-difference steps are tied to the stored grid step, so the
    measured residual is the O(h^2) stencil truncation of an exactly
    evaluated smoothing operator: halving the grid step divides it by ~4.
    """
    g = sol.gamma
    h = sol.grid_step
    out = []
    for s, xv in probes:
        l = int(g.level_of(s))
        margin = min(s - g.q[l], g.q[l + 1] - s)
        if margin <= 0.0:
            raise ValueError(f"probe time {s} sits on a level boundary")
        hs = min(h, 0.5 * margin)
        if abs(xv) + h > sol.grid_extent:
            raise ValueError("probe too close to the grid edge")
        row = np.array([xv - h, xv, xv + h])
        f0 = sol.psi(s, row)
        fm = sol.psi(s - hs, np.array([xv]))[0]
        fp = sol.psi(s + hs, np.array([xv]))[0]
        ds = (fp - fm) / (2.0 * hs)
        dxx = (f0[2] - 2.0 * f0[1] + f0[0]) / (h * h)
        dx = (f0[2] - f0[0]) / (2.0 * h)
        out.append(abs(ds + dxx + g.gamma_at(s) * dx * dx))
    vals = np.asarray(out)
    return ResidualStats(max=float(vals.max()), mean=float(vals.mean()), values=vals)
