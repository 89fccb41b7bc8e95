"""Terminal condition of the zero-temperature variational PDE.

f(x) = sup_r { r x + lam r^2 - t |r|^p } for p > 2, t > 0. The sup is
finite for every lam because t|r|^p dominates. f is even, convex,
nonnegative, and away from x = 0 its derivative equals the maximizer
r(x), the unique positive root of

    x + 2 lam r - p t r^{p-1} = 0          (x > 0)

which lies inside (0, max((2x/t)^{1/(p-1)}, (2|lam|/t)^{1/(p-2)})].
At x = 0 the sup sits at r = 0 when lam <= 0 and at r = (2 lam/(pt))^{1/(p-2)}
when lam > 0, which produces a genuine kink (f' jumps); callers that
integrate through x = 0 must treat that point explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundaryParams",
    "boundary_argmax",
    "boundary_value",
    "boundary_derivative",
    "boundary_tables",
    "growth_envelope",
    "slope_envelope",
]

_RESIDUAL_TOL = 1e-12
_NEWTON_CAP = 200


@dataclass(frozen=True)
class BoundaryParams:
    p: float
    t: float
    lam: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 2.0):
            raise ValueError(f"terminal condition needs p > 2, got {self.p}")
        if not (math.isfinite(self.t) and self.t > 0.0):
            raise ValueError(f"terminal condition needs t > 0, got {self.t}")
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")


def _argmax_at_zero(params: BoundaryParams) -> float:
    if params.lam <= 0.0:
        return 0.0
    return (2.0 * params.lam / (params.p * params.t)) ** (1.0 / (params.p - 2.0))


def _root_positive(y: np.ndarray, params: BoundaryParams) -> np.ndarray:
    """Unique positive root of y + 2 lam r - p t r^{p-1} = 0, y > 0 elementwise.

    phi is concave in r with phi(0) = y > 0, so Newton started from the
    right end of the bracket stays right of the root and converges
    monotonically; no overshoot is possible. Bisection fallback guards the
    (unreached in practice) stagnation branch.
    """
    p, t, lam = params.p, params.t, params.lam
    hi = np.maximum((2.0 * y / t) ** (1.0 / (p - 1.0)),
                    (2.0 * abs(lam) / t) ** (1.0 / (p - 2.0)) if lam != 0.0 else 0.0)

    def phi(r):
        return y + 2.0 * lam * r - p * t * r ** (p - 1.0)

    # bracket end must sit strictly past the root; widen defensively if
    # rounding ever puts phi(hi) >= 0
    for _ in range(64):
        bad = phi(hi) >= 0.0
        if not bad.any():
            break
        hi = np.where(bad, 2.0 * hi + 1e-300, hi)

    lo = np.zeros_like(hi)
    r = hi.copy()
    for _ in range(_NEWTON_CAP):
        fr = phi(r)
        # tolerance scales with the cancelling terms: near p = 2 with lam > 0
        # the root is huge and an absolute 1e-12 residual is unrepresentable
        scale = np.maximum(1.0, np.maximum(y, p * t * r ** (p - 1.0)))
        done = (np.abs(fr) <= _RESIDUAL_TOL * scale) | (hi - lo <= 4e-16 * np.maximum(r, 1.0))
        if done.all():
            return r
        lo = np.where(fr > 0.0, r, lo)
        hi = np.where(fr < 0.0, r, hi)
        dfr = 2.0 * lam - p * (p - 1.0) * t * r ** (p - 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rn = r - fr / dfr
        # fall back to bisection wherever the Newton step leaves the bracket
        bad = ~np.isfinite(rn) | (rn <= lo) | (rn >= hi)
        rn = np.where(bad, 0.5 * (lo + hi), rn)
        r = np.where(done, r, rn)
    raise RuntimeError("terminal-condition root finding failed to reach tolerance")


def boundary_tables(x, params: BoundaryParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (f(x), f'(x)) over an array of x.

    f'(x) here means the maximizer r(x) with the sign of x; at x = 0 the
    returned slope is the right limit r(0+) (callers handling the kink are
    expected to avoid querying the slope exactly at 0 when lam > 0).
    """
    xa = np.asarray(x, dtype=float)
    y = np.abs(xa)
    p, t, lam = params.p, params.t, params.lam
    if lam == 0.0:
        # closed form: f = ((p-1)/p) (pt)^{-1/(p-1)} |x|^{1+1/(p-1)}, f' = r = (|x|/(pt))^{1/(p-1)}
        a = 1.0 / (p - 1.0)
        r = (y / (p * t)) ** a
        f = ((p - 1.0) / p) * (p * t) ** (-a) * y ** (1.0 + a)
        return f, np.sign(xa) * r

    r = np.empty_like(y)
    pos = y > 0.0
    r0 = _argmax_at_zero(params)
    r[~pos] = r0
    if pos.any():
        r[pos] = _root_positive(y[pos], params)
    f = r * y + lam * r * r - t * r ** p
    np.maximum(f, 0.0, out=f)  # sup over r includes r=0, so f >= 0 exactly
    sgn = np.where(xa > 0.0, 1.0, np.where(xa < 0.0, -1.0, 1.0))
    return f, sgn * r


def boundary_argmax(x: float, params: BoundaryParams) -> float:
    """The maximizer r(x); odd in x, r(0+) > 0 iff lam > 0."""
    if x == 0.0:
        return _argmax_at_zero(params)
    if x < 0.0:
        return -boundary_argmax(-x, params)
    if params.lam == 0.0:
        return (x / (params.p * params.t)) ** (1.0 / (params.p - 1.0))
    return float(_root_positive(np.asarray([x], dtype=float), params)[0])


def boundary_value(x: float, params: BoundaryParams) -> float:
    """f(x) itself; even, convex, f(0) = 0 iff lam <= 0."""
    f, _ = boundary_tables(np.asarray([x], dtype=float), params)
    return float(f[0])


def boundary_derivative(x: float, params: BoundaryParams) -> float:
    """f'(x) = sign(x) r(|x|); undefined at the kink (x=0 with lam>0)."""
    if x == 0.0:
        if params.lam > 0.0:
            raise ValueError("derivative undefined at x=0 when lam > 0 (kink)")
        return 0.0
    return boundary_argmax(x, params)


def growth_envelope(x, params: BoundaryParams):
    """Explicit upper envelope for f; used for integration windows and tests.

    f(x) <= (2/t)^{1/(p-1)} |x|^{1+1/(p-1)} + (2|lam|/t)^{1/(p-2)} |x|
            + (2/t)^{2/(p-1)} |lam| |x|^{2/(p-1)} + (2|lam|/t)^{2/(p-2)} |lam|
    """
    y = np.abs(np.asarray(x, dtype=float))
    p, t, lam = params.p, params.t, abs(params.lam)
    a = 1.0 / (p - 1.0)
    b = 1.0 / (p - 2.0)
    env = (2.0 / t) ** a * y ** (1.0 + a) + (2.0 * lam / t) ** b * y
    env += (2.0 / t) ** (2.0 * a) * lam * y ** (2.0 * a) + (2.0 * lam / t) ** (2.0 * b) * lam
    return env


def slope_envelope(x, params: BoundaryParams):
    """|f'(x)| <= max((2|x|/t)^{1/(p-1)}, (2|lam|/t)^{1/(p-2)}) (the root bracket)."""
    y = np.abs(np.asarray(x, dtype=float))
    p, t, lam = params.p, params.t, abs(params.lam)
    return np.maximum((2.0 * y / t) ** (1.0 / (p - 1.0)), (2.0 * lam / t) ** (1.0 / (p - 2.0)))
