"""Structure diagnostics for finite-n optimizers.

Contents:

* coordinate decomposition of a candidate at the scale eps = n^{-2/(p p*)}
  that separates heavy coordinates from the bulk;
* lp distance to the aligned candidate family (both signs);
* a quantitative Hoelder alignment check: for unit u and any w,
  <u, w> <= ||w||_{p*} (1 - (p^2/(16 p*)) ||u - v||_p^2) with v the exact
  aligner of w, with equality at u = v;
* an l2-deficiency check for unit lp vectors far from every signed
  coordinate vector (the constant is empirical, calibrated on two-coordinate
  families where the sharp constant is 1/p; we use 0.05 across 1 < p < 2);
* p -> q operator norms: exact column/row scans where available, otherwise
  alternating Hoelder alignment (each half-step is exact, so the objective
  is nondecreasing);
* two-sided width bounds for E ||G||_{p->q}: the product of a Gaussian width
  and a Euclidean radius from below, their symmetrized sum from above;
* a sup-norm growth fit across n for delocalization of p > 2 optimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (MatrixSample, gaussian_moment_norm, holder_conjugate,
                   lp_norm, rng_stream, sample_matrix)
from .solvers import (NearOptimizerSet, SolveResult, hamiltonian,
                      near_optimizers, solve_lp, sphere_ascent)

__all__ = [
    "Decomposition",
    "decompose",
    "dist_to_family",
    "holder_aligned",
    "HolderCheck",
    "holder_stability_check",
    "DeficiencyCheck",
    "deficient_l2_check",
    "OpNormResult",
    "opnorm_estimate",
    "ChevetBracket",
    "gaussian_width",
    "euclidean_radius",
    "chevet_bracket",
    "AlignmentReport",
    "alignment_report",
    "StabilityEvent",
    "stability_event",
    "DelocalizationFit",
    "delocalization_fit",
]

DEFICIENCY_CONST = 0.05  # empirical; the two-coordinate family saturates at 1/p


@dataclass(frozen=True)
class Decomposition:
    """x split at |x_i| > eps into a heavy part and the bulk."""

    heavy: np.ndarray
    bulk: np.ndarray
    eps: float
    heavy_support: int

    @property
    def heavy_mass(self) -> float:
        return float(np.sum(np.abs(self.heavy)))


def decompose(x: np.ndarray, p: float, eps: float | None = None) -> Decomposition:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if eps is None:
        ps = holder_conjugate(p)
        eps = n ** (-2.0 / (p * ps))
    mask = np.abs(x) > eps
    heavy = np.where(mask, x, 0.0)
    return Decomposition(heavy=heavy, bulk=x - heavy, eps=float(eps),
                         heavy_support=int(mask.sum()))


def dist_to_family(x: np.ndarray, family: NearOptimizerSet,
                   block: int = 256) -> tuple[float, int, int]:
    """min over i and signs of ||x - s o_i||_p. Returns (dist, i, s)."""
    x = np.asarray(x, dtype=float)
    p = family.p
    n = family.sample.n
    best = (math.inf, -1, 1)
    for lo in range(0, n, block):
        idx = np.arange(lo, min(lo + block, n))
        O = family.rows(idx)
        for s in (1, -1):
            d = (np.abs(x[None, :] - s * O) ** p).sum(axis=1) ** (1.0 / p)
            j = int(np.argmin(d))
            if d[j] < best[0]:
                best = (float(d[j]), int(idx[j]), s)
    return best


def holder_aligned(w: np.ndarray, p: float) -> np.ndarray:
    """The unique unit-lp vector with <v, w> = ||w||_{p*}."""
    w = np.asarray(w, dtype=float)
    ps = holder_conjugate(p)
    nw = lp_norm(w, ps)
    if nw == 0.0:
        raise ValueError("cannot align with the zero vector")
    return np.sign(w) * (np.abs(w) / nw) ** (ps - 1.0)


@dataclass(frozen=True)
class HolderCheck:
    lhs: float
    rhs: float
    dist: float
    dual_norm: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def holder_stability_check(u: np.ndarray, w: np.ndarray, p: float) -> HolderCheck:
    """Evaluate both sides of the quantitative alignment inequality."""
    u = np.asarray(u, dtype=float)
    ps = holder_conjugate(p)
    v = holder_aligned(w, p)
    dist = lp_norm(u - v, p)
    nw = lp_norm(w, ps)
    lhs = float(u @ w)
    rhs = nw * (1.0 - (p * p / (16.0 * ps)) * dist * dist)
    return HolderCheck(lhs=lhs, rhs=rhs, dist=dist, dual_norm=nw)


@dataclass(frozen=True)
class DeficiencyCheck:
    dist_to_coords: float
    l2_norm: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.l2_norm <= self.bound + 1e-12


def deficient_l2_check(x: np.ndarray, p: float,
                       c: float = DEFICIENCY_CONST) -> DeficiencyCheck:
    """For unit-lp x with 1 < p < 2: being lp-far from every signed
    coordinate vector forces an l2 deficit, ||x||_2 <= 1 - c dist^p."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    j = int(np.argmax(ax))
    # distance to the nearest signed coordinate vector, in lp
    d = (np.sum(ax**p) - ax[j] ** p + (1.0 - ax[j]) ** p) ** (1.0 / p)
    return DeficiencyCheck(dist_to_coords=float(d), l2_norm=float(np.linalg.norm(x)),
                           bound=1.0 - c * float(d) ** p)


def _dual_align(z: np.ndarray, r: float) -> np.ndarray:
    """Unit-lr vector y with <y, z> = ||z||_{r*}; r may be 1 or inf."""
    if math.isinf(r):
        return np.sign(z) + (z == 0.0)
    if r == 1.0:
        y = np.zeros_like(z)
        j = int(np.argmax(np.abs(z)))
        y[j] = math.copysign(1.0, z[j]) if z[j] != 0.0 else 1.0
        return y
    rs = holder_conjugate(r)
    nz = lp_norm(z, rs)
    if nz == 0.0:
        y = np.zeros_like(z)
        y[0] = 1.0
        return y
    return np.sign(z) * (np.abs(z) / nz) ** (rs - 1.0)


@dataclass(frozen=True)
class OpNormResult:
    value: float
    x: np.ndarray
    y: np.ndarray
    p: float
    q: float
    method: str
    iterations: int


def opnorm_estimate(g, p: float, q: float, restarts: int = 4,
                    max_iter: int = 500, tol: float = 1e-12) -> OpNormResult:
    """||G||_{p -> q} = max <y, G x> over unit lp x and unit l{q*} y.

    p = 1 (column scan) and q = inf (row scan) are exact; otherwise
    alternate the two exact half-steps x -> align(G^T y), y -> align(G x),
    which never decreases the objective. Starts are the unit vectors at
    the columns with the largest lq norms: deterministic, and appending a
    zero row or column cannot lower the estimate because every original
    trajectory embeds unchanged.
    """
    G = g.g if isinstance(g, MatrixSample) else np.asarray(g, dtype=float)
    n_out, n_in = G.shape
    if p == 1.0:
        norms = np.array([lp_norm(G[:, j], q) for j in range(n_in)])
        j = int(np.argmax(norms))
        x = np.zeros(n_in)
        x[j] = 1.0
        y = _dual_align(G[:, j], holder_conjugate(q))
        return OpNormResult(value=float(norms[j]), x=x, y=y, p=p, q=q,
                            method="column_scan", iterations=0)
    if math.isinf(q):
        ps = holder_conjugate(p)
        norms = np.array([lp_norm(G[i, :], ps) for i in range(n_out)])
        i = int(np.argmax(norms))
        y = np.zeros(n_out)
        y[i] = 1.0
        x = _dual_align(G[i, :], p)
        return OpNormResult(value=float(norms[i]), x=x, y=y, p=p, q=q,
                            method="row_scan", iterations=0)

    qs = holder_conjugate(q)
    col_norms = np.array([lp_norm(G[:, j], q) for j in range(n_in)])
    order = np.argsort(-col_norms, kind="stable")[:max(restarts, 1)]
    best = None
    for j in order:
        x = np.zeros(n_in)
        x[j] = 1.0
        val = -math.inf
        it = 0
        for it in range(1, max_iter + 1):
            y = _dual_align(G @ x, qs)
            x = _dual_align(G.T @ y, p)
            new = float(y @ (G @ x))
            if new - val <= tol * max(1.0, abs(new)):
                val = new
                break
            val = new
        if best is None or val > best.value:
            best = OpNormResult(value=val, x=x, y=y, p=p, q=q,
                                method="alternating", iterations=it)
    return best


def euclidean_radius(n: int, r: float) -> float:
    """max ||x||_2 over the unit lr ball: 1 for r <= 2, n^{1/2-1/r} above."""
    if r <= 2.0:
        return 1.0
    return float(n) ** (0.5 - 1.0 / r)


def gaussian_width(n: int, r: float, draws: int = 10000, seed: int = 0) -> float:
    """E sup over the unit lr ball of <g, x> = E ||g||_{r*}.

    r* = 2 has the exact chi-mean closed form; other exponents are averaged
    over Monte Carlo draws (seeded, so the bracket is reproducible).
    """
    rs = holder_conjugate(r)
    if rs == 2.0:
        return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0))
    rng = rng_stream(seed, 29, n)
    total = 0.0
    block = max(1, min(draws, 2 * 10**7 // max(n, 1)))
    left = draws
    while left > 0:
        b = min(block, left)
        Z = rng.standard_normal((b, n))
        if math.isinf(rs):
            total += float(np.abs(Z).max(axis=1).sum())
        else:
            total += float(((np.abs(Z) ** rs).sum(axis=1) ** (1.0 / rs)).sum())
        left -= b
    return total / draws


@dataclass(frozen=True)
class ChevetBracket:
    lower: float
    upper: float
    w_in: float
    w_out: float
    r_in: float
    r_out: float


def chevet_bracket(n: int, p: float, q: float, draws: int = 10000,
                   seed: int = 0) -> ChevetBracket:
    """Deterministic two-sided bounds for E ||G||_{p -> q}.

    Writing the norm as a bilinear sup over the lp ball and the l{q*} ball,
    fixing either argument at its Euclidean-radius point gives
    lower = max(w_in r_out, w_out r_in); the classical comparison bound
    gives upper = w_in r_out + w_out r_in.
    """
    qs = holder_conjugate(q)
    w_in = gaussian_width(n, p, draws=draws, seed=seed)
    w_out = gaussian_width(n, qs, draws=draws, seed=seed + 1)
    r_in = euclidean_radius(n, p)
    r_out = euclidean_radius(n, qs)
    return ChevetBracket(lower=max(w_in * r_out, w_out * r_in),
                         upper=w_in * r_out + w_out * r_in,
                         w_in=w_in, w_out=w_out, r_in=r_in, r_out=r_out)


@dataclass(frozen=True)
class AlignmentReport:
    """Observable diagnostics for a candidate optimizer at 1 < p < 2.
    Classification thresholds are reporting conventions, not contract
    values."""

    p: float
    n: int
    value: float
    family_best: float
    energy_deficit: float
    dist: float
    nearest_index: int
    nearest_sign: int
    heavy_support: int
    eps: float
    l2_deficiency: DeficiencyCheck
    label: str


def alignment_report(sample: MatrixSample, x: np.ndarray, p: float,
                     family: NearOptimizerSet | None = None,
                     align_tol: float = 0.5) -> AlignmentReport:
    """Where does a candidate sit relative to the aligned family?

    Reports its energy deficit against the family's best member, its lp
    distance to the family, the heavy-coordinate support of the
    decomposition, and the l2-deficiency check. The label summarizes:
    'aligned' when the candidate is close to some signed family member,
    'spread' when it is far and carries no heavy coordinate, otherwise
    'stray'.
    """
    if family is None:
        family = near_optimizers(sample, p)
    x = np.asarray(x, dtype=float)
    value = hamiltonian(sample, x)
    fam_best = float(family.all_values().max())
    deficit = max(0.0, 1.0 - value / fam_best) if fam_best > 0 else math.inf
    dist, idx, sign = dist_to_family(x, family)
    dec = decompose(x, p)
    dl2 = deficient_l2_check(x, p)
    if dist <= align_tol:
        label = "aligned"
    elif dec.heavy_support == 0:
        label = "spread"
    else:
        label = "stray"
    return AlignmentReport(p=p, n=sample.n, value=value, family_best=fam_best,
                           energy_deficit=deficit, dist=dist, nearest_index=idx,
                           nearest_sign=sign, heavy_support=dec.heavy_support,
                           eps=dec.eps, l2_deficiency=dl2, label=label)


class _FamilyGeometry:
    """Certified lp-distance floor queries against the 2n signed members.

    For p <= 2 the l2 distance lower-bounds the lp distance, and l2
    distances to every signed member cost one matvec. Only members whose
    l2 distance undercuts the floor need the exact lp evaluation, so the
    feasibility test is exact but nearly always one matvec.
    """

    def __init__(self, family: NearOptimizerSet):
        self.family = family
        self.p = family.p
        n = family.sample.n
        self.O = family.rows(np.arange(n))
        self.row_sq = np.einsum("ij,ij->i", self.O, self.O)

    def dist_at_least(self, x: np.ndarray, delta: float) -> bool:
        xsq = float(x @ x)
        inner = self.O @ x
        d2 = np.sqrt(np.maximum(xsq + self.row_sq[None, :]
                                - 2.0 * np.array([[1.0], [-1.0]]) * inner[None, :], 0.0))
        close = np.argwhere(d2 < delta)
        for s_idx, i in close:
            s = 1.0 if s_idx == 0 else -1.0
            dp = lp_norm(x - s * self.O[i], self.p)
            if dp < delta:
                return False
        return True


@dataclass(frozen=True)
class StabilityEvent:
    """Max of the quadratic form over unit-lp points kept at lp distance
    >= delta from the aligned family, against the unrestricted max."""

    p: float
    n: int
    delta: float
    restricted_max: float
    unrestricted_max: float
    runs: int
    retained: int
    final_dists: tuple[float, ...]
    limit_scale: float

    @property
    def gap(self) -> float:
        return self.unrestricted_max - self.restricted_max

    def envelope(self, c1: float = 0.0, c2: float = 0.0) -> float:
        """(1 - c1 delta^6) limit_scale + c2 n^{p/(2p*)} sqrt(log n); the
        constants are existential and non-normative, defaults report the
        bare limit scale."""
        ps = holder_conjugate(self.p)
        tail = self.n ** (self.p / (2.0 * ps)) * math.sqrt(math.log(self.n))
        return (1.0 - c1 * self.delta**6) * self.limit_scale + c2 * tail

    @property
    def below_envelope(self) -> bool:
        return self.restricted_max <= self.envelope()


def stability_event(sample: MatrixSample, p: float, delta: float,
                    solve: SolveResult | None = None,
                    family: NearOptimizerSet | None = None,
                    runs: int = 4, seed: int = 0,
                    max_iter: int = 400) -> StabilityEvent:
    """Distance-restricted maximization for 1 < p < 2.

    Ascent runs start at unit-lp points at least delta away from every
    signed family member and the line search vetoes any step that would
    cross inside; runs whose endpoint nevertheless sits closer than delta
    are excluded from the reported max. The unrestricted comparison value
    is the supplied solve result, or a fresh solve_lp when omitted.
    """
    if not 1.0 < p < 2.0:
        raise ValueError("the stability experiment is for 1 < p < 2")
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if family is None:
        family = near_optimizers(sample, p)
    if solve is None:
        solve = solve_lp(sample, p, restarts=max(runs, 2))
    geom = _FamilyGeometry(family)
    ps = holder_conjugate(p)
    limit_scale = (2.0 ** (0.5 - 2.0 / p) * gaussian_moment_norm(ps)
                   * sample.n ** (1.0 / ps))
    if delta == 0.0:
        return StabilityEvent(p=p, n=sample.n, delta=0.0,
                              restricted_max=solve.value,
                              unrestricted_max=solve.value, runs=0, retained=0,
                              final_dists=(), limit_scale=limit_scale)

    rng = rng_stream(sample.seed if sample.seed is not None else 0, 31, seed)
    best = -math.inf
    dists = []
    retained = 0
    for _ in range(runs):
        x0 = None
        for _ in range(64):
            z = rng.standard_normal(sample.n)
            z /= lp_norm(z, p)
            if geom.dist_at_least(z, delta):
                x0 = z
                break
        if x0 is None:
            continue
        res = sphere_ascent(sample, p, x0=x0, max_iter=max_iter,
                            feasible=lambda y: geom.dist_at_least(y, delta))
        d, _, _ = dist_to_family(res.x, family)
        dists.append(float(d))
        if d >= delta - 1e-9:
            retained += 1
            best = max(best, res.value)
    return StabilityEvent(p=p, n=sample.n, delta=delta, restricted_max=best,
                          unrestricted_max=solve.value, runs=runs,
                          retained=retained, final_dists=tuple(dists),
                          limit_scale=limit_scale)


@dataclass(frozen=True)
class DelocalizationFit:
    p: float
    ns: tuple[int, ...]
    sup_norms: tuple[float, ...]
    slope: float
    slope_bound: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.slope_bound


def sup_norm_slope(ns, sup_norms) -> float:
    """Least-squares slope of log sup-norm against log n."""
    if len(ns) < 4:
        raise ValueError("the regression needs at least 4 sizes")
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)),
                            np.log(np.asarray(sup_norms, dtype=float)), 1)[0])


def delocalization_fit(p: float, ns, seeds, restarts: int = 6) -> DelocalizationFit:
    """Fit the growth exponent of ||x*||_inf across n for p > 2.

    The predicted envelope n^{1/(p+d) - 1/p} with d = p/2 - 1 decays, so
    the fitted slope should stay below that exponent plus a 0.05 margin.
    """
    if p <= 2.0:
        raise ValueError("delocalization fit applies to p > 2")
    ns = tuple(int(n) for n in ns)
    means = []
    for n in ns:
        sups = []
        for seed in seeds:
            res = solve_lp(sample_matrix(n, seed), p, restarts=restarts)
            sups.append(float(np.abs(res.x).max()))
        means.append(float(np.mean(sups)))
    slope = sup_norm_slope(ns, means)
    d = p / 2.0 - 1.0
    bound = 1.0 / (p + d) - 1.0 / p + 0.05
    return DelocalizationFit(p=p, ns=ns, sup_norms=tuple(means),
                             slope=slope, slope_bound=bound)
