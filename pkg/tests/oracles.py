"""Independent reference implementations used to pin expected values.

Everything here is deliberately naive: adaptive quadrature, dense grids,
bisection, coordinate sweeps, double loops.  Slow is fine; these run only
inside the test suite and never share code with the package under test.
"""
import math

import numpy as np
from scipy import integrate, optimize


def abs_moment_quad(p: float) -> float:
    """E|z|^p for standard normal z by adaptive quadrature."""
    def integrand(z):
        return abs(z) ** p * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    val, _ = integrate.quad(integrand, -np.inf, np.inf)
    return val


def bisect_root(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    """Plain bisection; assumes a sign change on [lo, hi]."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def omega(r, x: float, lam: float, t: float, p: float):
    return r * x + lam * r * r - t * np.abs(r) ** p


def grid_boundary_value(x: float, lam: float, t: float, p: float,
                        reach: float = 3.0, step: float = 1e-6) -> float:
    """sup_r of the boundary integrand by brute dense grid."""
    rs = np.arange(-reach, reach + step, step)
    return float(np.max(omega(rs, x, lam, t, p)))


def brent_boundary_value(x: float, lam: float, t: float, p: float) -> float:
    """sup_r by scalar Brent search on each half-line, vertex-aware."""
    best = 0.0
    for sgn in (1.0, -1.0):
        res = optimize.minimize_scalar(
            lambda r: -omega(sgn * abs(r), x, lam, t, p),
            bounds=(0.0, 10.0 + (abs(x) / t) ** (1.0 / (p - 1.0))),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -res.fun)
    return best


def midpoint_measure_moment(u: float, q: list, m: list, panels: int = 400000) -> float:
    """integral of s * gamma(s) over [0, u] by the midpoint rule; gamma is the
    step function equal to m[l] on [q[l], q[l+1]) with q[0]=0, q[-1]=u."""
    edges = np.asarray(list(q), dtype=float)
    s = (np.arange(panels) + 0.5) * (u / panels)
    lvl = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(m) - 1)
    gam = np.asarray(m, dtype=float)[lvl]
    return float(np.sum(s * gam) * (u / panels))


def naive_quadratic_form(g: np.ndarray, x: np.ndarray) -> float:
    """<Gx, x> by an explicit double loop."""
    n = len(x)
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += g[i, j] * x[i] * x[j]
    return acc


def eig2x2_max(a: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric 2x2 by the quadratic formula."""
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = math.sqrt(max(tr * tr / 4.0 - det, 0.0))
    return tr / 2.0 + disc


def lp_circle(theta: np.ndarray, p: float) -> np.ndarray:
    """Unit lp circle in the plane: |x1|^p + |x2|^p = 1 exactly."""
    c, s = np.cos(theta), np.sin(theta)
    x1 = np.sign(c) * np.abs(c) ** (2.0 / p)
    x2 = np.sign(s) * np.abs(s) ** (2.0 / p)
    return np.stack([x1, x2], axis=-1)


def dense_circle_max(g: np.ndarray, p: float, points: int = 200000) -> float:
    """max <Gx,x> over the planar lp sphere by dense angle scan."""
    xs = lp_circle(np.linspace(0.0, 2.0 * np.pi, points, endpoint=False), p)
    vals = np.einsum("ki,ij,kj->k", xs, g, xs)
    return float(np.max(vals))


def brute_min_dist(x: np.ndarray, candidates: np.ndarray, p: float):
    """Min lp distance of x to the rows of candidates and their negatives."""
    best, idx, sign = np.inf, -1, 1
    for i, row in enumerate(candidates):
        for s in (1.0, -1.0):
            d = float(np.sum(np.abs(x - s * row) ** p) ** (1.0 / p))
            if d < best:
                best, idx, sign = d, i, int(s)
    return best, idx, sign


def column_scan_norm_1_to_2(g: np.ndarray) -> float:
    best = 0.0
    for j in range(g.shape[1]):
        best = max(best, float(np.sqrt(np.sum(g[:, j] ** 2))))
    return best


def entry_scan_norm_1_to_inf(g: np.ndarray) -> float:
    best = 0.0
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            best = max(best, abs(float(g[i, j])))
    return best


def golden_line_min(fun, lo: float, hi: float, iters: int = 60):
    """Golden-section minimization of a scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    mid = 0.5 * (a + b)
    return mid, fun(mid)


def coordinate_descent(fun, x0, brackets, sweeps: int = 8):
    """Cyclic coordinate minimization with golden-section line search.

    A second, structurally different optimizer used to cross-check the
    simplex-based one; brackets are absolute (lo, hi) per coordinate.
    """
    x = list(map(float, x0))
    fbest = fun(x)
    for _ in range(sweeps):
        improved = 0.0
        for i, (lo, hi) in enumerate(brackets):
            def line(v, i=i):
                trial = list(x)
                trial[i] = v
                return fun(trial)
            v, fv = golden_line_min(line, lo, hi)
            if fv < fbest:
                improved += fbest - fv
                x[i] = v
                fbest = fv
        if improved < 1e-12:
            break
    return x, fbest


def gauss_expect_quad(fun, sigma: float, split: float = 0.0) -> float:
    """Adaptive quadrature of E fun(sigma z), z ~ N(0,1), split at a kink.

    Plain Gauss-Hermite converges only algebraically through a kink, so
    reference expectations of kinked integrands must come from an adaptive
    rule with the kink as a panel boundary.
    """
    from scipy.integrate import quad

    def h(z):
        return fun(sigma * z) * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    total = 0.0
    for a, b in ((-12.0, split), (split, 12.0)):
        v, _ = quad(h, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
        total += v
    return total
