"""Finite-n solvers for max <Gx, x> over the lp sphere.

Method per regime:

* p = 1: the objective is a convex combination (weights x_i^2 and
  2|x_i x_j|) of the diagonal entries g_ii and the symmetrized off-diagonal
  entries, which certifies max(max_i g_ii, max_{i<j} |g_ij + g_ji|/2) as an
  upper bound and reduces the search to supports of size <= 2, where the
  maximum is a one-variable quadratic solved in closed form.
* p = 2: exact eigenproblem for (G + G^T)/2.
* 1 < p < 2: the explicit near-optimizer family (rows of the symmetrized
  matrix, Hoelder-aligned and glued to the matching coordinate vector),
  optionally polished by ascent.
* p > 2: multistart gradient ascent on the sphere.

Ascent is plain normalized gradient with backtracking; stationarity is
scored by the least-squares Lagrange residual
|| (G+G^T) x - c p |x|^{p-1} sgn(x) ||_2 with c fit by projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import eigsh

from .core import MatrixSample, gaussian_moment_norm, holder_conjugate, lp_norm, rng_stream

__all__ = [
    "SolveResult",
    "hamiltonian",
    "solve_p1",
    "solve_p2",
    "near_optimizers",
    "NearOptimizerSet",
    "sphere_ascent",
    "solve_lp",
    "solve_restricted",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SolveResult:
    """One solver run. value always satisfies value == hamiltonian(sample, x)
    up to roundoff, and x sits on its stated sphere to 1e-12."""

    x: np.ndarray
    value: float
    p: float
    n: int
    method: str
    kkt_residual: float | None = None
    upper_bound: float | None = None
    multiplier: float | None = None
    n_restarts: int = 1
    iterations: int | None = None
    seed: int | None = None
    u: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        self.x.setflags(write=False)


def hamiltonian(sample: MatrixSample, x: np.ndarray) -> float:
    """<G x, x> with the raw (asymmetric) sample."""
    x = np.asarray(x, dtype=float)
    return float(x @ (sample.g @ x))


def potential(sample: MatrixSample, x: np.ndarray, t: float, p: float) -> float:
    """The penalized objective <Gx,x>/sqrt(n) - t ||x||_p^p."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != sample.n:
        raise ValueError("vector length does not match the sample")
    return hamiltonian(sample, x) / math.sqrt(sample.n) - t * float(np.sum(np.abs(x) ** p))


def _gradient(sample: MatrixSample, x: np.ndarray) -> np.ndarray:
    # (G + G^T) x = sqrt(2) gbar x
    return _SQRT2 * (sample.gbar @ x)


def _kkt(sample: MatrixSample, x: np.ndarray, p: float) -> tuple[float, float]:
    """Least-squares multiplier and residual for the stationarity system
    grad H = c * p |x|^{p-1} sgn(x) on the lp sphere."""
    g = _gradient(sample, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = p * np.sign(x) * np.abs(x) ** (p - 1.0)
    phi = np.where(x == 0.0, 0.0, phi)
    denom = float(phi @ phi)
    if denom == 0.0 or not np.all(np.isfinite(phi)):
        return math.nan, math.nan
    c = float(g @ phi) / denom
    return c, float(np.linalg.norm(g - c * phi))


def _pair_quadratic_max(di: np.ndarray, dj: np.ndarray, c: np.ndarray):
    """max over a in [0,1] of di a^2 + dj (1-a)^2 + 2 c a (1-a), c >= 0.

    Endpoints give max(di, dj); the interior critical point a* =
    (dj - c)/(di + dj - 2c) wins exactly when c exceeds both diagonals.
    """
    di = np.asarray(di, dtype=float)
    dj = np.asarray(dj, dtype=float)
    c = np.asarray(c, dtype=float)
    best = np.maximum(di, dj)
    a = np.where(di >= dj, 1.0, 0.0)
    den = di + dj - 2.0 * c
    with np.errstate(divide="ignore", invalid="ignore"):
        a_int = (dj - c) / den
    ok = (den != 0.0) & (a_int > 0.0) & (a_int < 1.0)
    v_int = di * a_int**2 + dj * (1.0 - a_int) ** 2 + 2.0 * c * a_int * (1.0 - a_int)
    take = ok & (v_int > best)
    return np.where(take, v_int, best), np.where(take, a_int, a)


def solve_p1(sample: MatrixSample, pair_cap: int = 512) -> SolveResult:
    """p = 1 by closed form over supports of size <= 2, with a certified
    upper bound.

    For n <= pair_cap every pair is scanned; beyond that the candidate pool
    is each row's strongest partner plus all pairs among the top diagonal
    entries (the certified bound does not depend on the pool).
    """
    n = sample.n
    A = 0.5 * (sample.g + sample.g.T)
    d = np.diag(A).copy()
    off = np.abs(A - np.diag(d))
    np.fill_diagonal(off, -np.inf)

    upper = max(float(d.max()), float(off.max()))

    if n <= pair_cap:
        iu, ju = np.triu_indices(n, k=1)
    else:
        partner = np.argmax(off, axis=1)
        cand = {(min(i, int(j)), max(i, int(j))) for i, j in enumerate(partner)}
        top_d = np.argsort(d)[-64:]
        cand.update((min(int(a), int(b)), max(int(a), int(b)))
                    for ii, a in enumerate(top_d) for b in top_d[ii + 1:])
        iu = np.fromiter((i for i, _ in cand), dtype=int)
        ju = np.fromiter((j for _, j in cand), dtype=int)
    c = np.abs(A[iu, ju])
    vals, aa = _pair_quadratic_max(d[iu], d[ju], c)

    k = int(np.argmax(vals))
    best_single = int(np.argmax(d))
    x = np.zeros(n)
    if d[best_single] >= vals[k]:
        x[best_single] = 1.0
        value = float(d[best_single])
    else:
        i, j, a = int(iu[k]), int(ju[k]), float(aa[k])
        x[i] = a
        x[j] = (1.0 - a) * math.copysign(1.0, A[i, j]) if A[i, j] != 0.0 else (1.0 - a)
        value = float(vals[k])
    return SolveResult(x=x, value=value, p=1.0, n=n, method="support2",
                       upper_bound=upper, seed=sample.seed)


def solve_p2(sample: MatrixSample, dense_cap: int = 2048) -> SolveResult:
    """p = 2 is the exact eigenproblem for the symmetric part."""
    n = sample.n
    A = sample.gbar / _SQRT2
    if n <= dense_cap:
        w, v = np.linalg.eigh(A)
        lam, x = float(w[-1]), v[:, -1]
    else:
        w, v = eigsh(A, k=1, which="LA")
        lam, x = float(w[0]), v[:, 0]
    x = x / np.linalg.norm(x)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    res = float(np.linalg.norm(A @ x - lam * x))
    return SolveResult(x=x, value=lam, p=2.0, n=n, method="eig",
                       kkt_residual=res, upper_bound=lam, multiplier=lam,
                       seed=sample.seed)


class NearOptimizerSet:
    """The explicit candidate family for 1 < p < 2.

    Row i Hoelder-aligns with row i of the symmetrized matrix:
    v_i(j) = sgn(gbar_ij) (|gbar_ij|^{p*} / ||gbar e_i||_{p*}^{p*})^{1/p},
    so that ||v_i||_p = 1 and <v_i, gbar e_i> = ||gbar e_i||_{p*} exactly.
    The candidate is o_i = (e_i + v_i)/||e_i + v_i||_p; the set itself is
    {+-o_i}. w_i is the deterministically normalized variant
    n^{-1/p} xi^{-p*/p} sgn(gbar_ij)|gbar_ij|^{p*/p} used by the stability
    diagnostics. Rows are built on demand to keep n x n blocks off the heap.
    """

    def __init__(self, sample: MatrixSample, p: float):
        if not 1.0 < p < 2.0:
            raise ValueError("the aligned family needs 1 < p < 2")
        self.sample = sample
        self.p = float(p)
        self.ps = holder_conjugate(p)
        self._values: np.ndarray | None = None

    def v_rows(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        R = self.sample.gbar[idx]
        A = np.abs(R)
        Z = (A ** self.ps).sum(axis=1, keepdims=True)
        return np.sign(R) * (A ** self.ps / Z) ** (1.0 / self.p)

    def rows(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        V = self.v_rows(idx)
        V[np.arange(len(idx)), idx] += 1.0
        norms = (np.abs(V) ** self.p).sum(axis=1, keepdims=True) ** (1.0 / self.p)
        return V / norms

    def w_rows(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        R = self.sample.gbar[idx]
        xi = gaussian_moment_norm(self.ps)
        scale = self.sample.n ** (-1.0 / self.p) * xi ** (-self.ps / self.p)
        return scale * np.sign(R) * np.abs(R) ** (self.ps / self.p)

    def all_values(self, block: int = 256) -> np.ndarray:
        """<G o_i, o_i> for every i (one matmul per block)."""
        if self._values is None:
            n = self.sample.n
            out = np.empty(n)
            for lo in range(0, n, block):
                idx = np.arange(lo, min(lo + block, n))
                O = self.rows(idx)
                out[idx] = np.einsum("ij,ij->i", O @ self.sample.g, O)
            self._values = out
        return self._values

    def best(self) -> SolveResult:
        vals = self.all_values()
        i = int(np.argmax(vals))
        x = self.rows([i])[0]
        _, res = _kkt(self.sample, x, self.p)
        return SolveResult(x=x, value=float(vals[i]), p=self.p, n=self.sample.n,
                           method="near_opt", kkt_residual=res,
                           seed=self.sample.seed)


def near_optimizers(sample: MatrixSample, p: float) -> NearOptimizerSet:
    return NearOptimizerSet(sample, p)


def _opnorm_estimate_2(gbar: np.ndarray, rng) -> float:
    v = rng.standard_normal(gbar.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(20):
        w = gbar @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 1.0
        v = w / nw
    return float(nw)


def sphere_ascent(sample: MatrixSample, p: float, x0: np.ndarray | None = None,
                  seed: int = 0, max_iter: int = 5000,
                  kkt_tol: float = 1e-8, feasible=None) -> SolveResult:
    """Projected gradient ascent on the lp sphere with backtracking.

    The iterate steps along the tangent component of the gradient and is
    re-normalized; the initial step is the inverse of a power-iteration
    estimate of the spectral norm, halved on rejection and grown mildly on
    acceptance. An optional feasibility predicate vetoes trial points, which
    turns the line search into a constrained one (used by the
    distance-restricted stability experiments).
    """
    if p <= 1.0:
        raise ValueError("ascent needs p > 1 (the p = 1 problem is combinatorial)")
    rng = rng_stream(seed if sample.seed is None else sample.seed, 3, seed)
    if x0 is None:
        x = rng.standard_normal(sample.n)
    else:
        x = np.asarray(x0, dtype=float).copy()
    x = x / lp_norm(x, p)
    f = hamiltonian(sample, x)
    eta0 = 1.0 / max(_opnorm_estimate_2(sample.gbar, rng), 1e-12)
    eta = eta0
    c, res = _kkt(sample, x, p)
    it = 0
    for it in range(1, max_iter + 1):
        if res <= kkt_tol:
            break
        g = _gradient(sample, x)
        # step along the tangent component g - c phi, not g itself: the
        # renormalization retraction curves the raw-gradient path downhill
        # whenever the sphere-normal part dominates, stalling the search at
        # points that are nowhere near stationary
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = p * np.sign(x) * np.abs(x) ** (p - 1.0)
        phi = np.where(x == 0.0, 0.0, phi)
        d = g - c * phi
        accepted = False
        vetoes = 0
        while eta > 1e-18:
            y = x + eta * d
            y /= lp_norm(y, p)
            if feasible is not None and not feasible(y):
                # once the constraint binds, a dozen halvings either find a
                # feasible step or the direction points into the forbidden set
                vetoes += 1
                if vetoes > 12:
                    break
                eta *= 0.5
                continue
            fy = hamiltonian(sample, y)
            if fy > f:
                x, f = y, fy
                eta = min(eta * 1.3, 1e6 * eta0)
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        c, res = _kkt(sample, x, p)
    return SolveResult(x=x, value=f, p=p, n=sample.n, method="ascent",
                       kkt_residual=res, multiplier=c, iterations=it,
                       seed=sample.seed)


def solve_lp(sample: MatrixSample, p: float, restarts: int = 8,
             seed: int = 0) -> SolveResult:
    """Dispatch on the regime; for 1 < p < 2 the aligned family seeds the
    ascent and also stands alone if ascent cannot improve on it."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    if p == 1.0:
        return solve_p1(sample)
    if p == 2.0:
        return solve_p2(sample)

    rng = rng_stream(sample.seed if sample.seed is not None else seed, 5, seed)
    starts: list[np.ndarray] = []
    fallback: SolveResult | None = None
    if p < 2.0:
        family = near_optimizers(sample, p)
        vals = family.all_values()
        order = np.argsort(vals)[::-1][:max(restarts // 2, 1)]
        starts.extend(family.rows(order))
        fallback = family.best()
    else:
        starts.append(solve_p2(sample).x)
    while len(starts) < restarts + (0 if p < 2.0 else 1):
        starts.append(rng.standard_normal(sample.n))

    best: SolveResult | None = None
    for x0 in starts:
        r = sphere_ascent(sample, p, x0=x0, seed=len(starts))
        if best is None or r.value > best.value:
            best = r
    if fallback is not None and fallback.value > best.value:
        best = fallback
    return SolveResult(x=best.x, value=best.value, p=p, n=sample.n,
                       method=best.method, kkt_residual=best.kkt_residual,
                       multiplier=best.multiplier, n_restarts=len(starts),
                       iterations=best.iterations, seed=sample.seed)


def solve_restricted(sample: MatrixSample, p: float, t: float, u: float,
                     x0: np.ndarray | None = None, seed: int = 0,
                     max_iter: int = 5000, grad_tol: float = 1e-9) -> SolveResult:
    """max of <Gx,x>/n^{3/2} - t n^{-1} sum |x_i|^p over the sphere
    (1/n)||x||_2^2 = u, by tangent-projected ascent with backtracking.

    This is the finite-n quantity whose large-n limit the PDE functional
    computes, so its per-site value is directly comparable to the
    variational module's fixed-horizon value.
    """
    if p <= 2.0:
        raise ValueError("the restricted objective is used in the p > 2 regime")
    n = sample.n
    radius = math.sqrt(u * n)
    rng = rng_stream(sample.seed if sample.seed is not None else seed, 11, seed)
    x = rng.standard_normal(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x *= radius / np.linalg.norm(x)
    s32 = n ** 1.5

    def objective(v):
        return hamiltonian(sample, v) / s32 - t * float((np.abs(v) ** p).sum()) / n

    f = objective(x)
    eta = 1.0
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = _gradient(sample, x) / s32 - (t * p / n) * np.sign(x) * np.abs(x) ** (p - 1.0)
        g_tan = g - (g @ x) / (radius**2) * x
        res = float(np.linalg.norm(g_tan))
        if res <= grad_tol:
            break
        accepted = False
        while eta > 1e-18:
            y = x + eta * g_tan
            y *= radius / np.linalg.norm(y)
            fy = objective(y)
            if fy > f:
                x, f = y, fy
                eta *= 1.3
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
    return SolveResult(x=x, value=f, p=p, n=n, method="restricted",
                       kkt_residual=res, iterations=it, seed=sample.seed, u=u)
