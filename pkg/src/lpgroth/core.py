"""Deterministic mathematical primitives shared by every other module.

Norm conventions: ``lp_norm(x, p)`` is the usual ell_p norm; with
``normalized=True`` it is the normalized norm (n^{-1} sum |x_i|^p)^{1/p}.
Both live in one function on purpose -- the two scalings are switched
between constantly and a silent mismatch is the single worst bug class
in this kind of computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss

__all__ = [
    "LpVector",
    "MatrixSample",
    "QuadratureGrid",
    "holder_conjugate",
    "gaussian_abs_moment",
    "gaussian_moment_norm",
    "lp_norm",
    "sample_matrix",
    "gauss_hermite_grid",
    "rng_stream",
]


def holder_conjugate(p: float) -> float:
    """Conjugate exponent p* with 1/p + 1/p* = 1; conjugate(1) = inf."""
    if math.isinf(p):
        return 1.0
    if not p >= 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    if p == 1.0:
        return math.inf
    return p / (p - 1.0)


def gaussian_abs_moment(p: float) -> float:
    # E|z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi); log-gamma keeps p ~ 20 exact
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi))


def gaussian_moment_norm(p: float) -> float:
    """xi_p = (E|z|^p)^{1/p} for standard Gaussian z."""
    if not (math.isfinite(p) and p >= 1.0):
        raise ValueError(f"moment norm needs finite p >= 1, got {p}")
    return gaussian_abs_moment(p) ** (1.0 / p)


def _as_array(x) -> np.ndarray:
    if isinstance(x, LpVector):
        return x.entries
    return np.asarray(x, dtype=float)


def lp_norm(x, p: float, normalized: bool = False) -> float:
    """ell_p norm of x; the normalized flag divides the p-th power sum by n.

    p = inf returns max|x_i| in both modes (the normalization is a no-op
    for the sup norm).
    """
    a = _as_array(x)
    if math.isinf(p):
        return float(np.max(np.abs(a))) if a.size else 0.0
    if not p >= 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    s = float(np.sum(np.abs(a) ** p))
    if normalized:
        s /= a.size
    return s ** (1.0 / p)


class LpVector:
    """A real vector with cached ell_p data; the optimization variable x."""

    __slots__ = ("entries", "_norms")

    def __init__(self, entries):
        a = np.atleast_1d(np.asarray(entries, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise ValueError("LpVector needs a nonempty 1-d real sequence")
        if not np.all(np.isfinite(a)):
            raise ValueError("LpVector entries must be finite")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "_norms", {})

    @property
    def dim(self) -> int:
        return self.entries.size

    def norm(self, p: float, normalized: bool = False) -> float:
        key = (p, normalized)
        if key not in self._norms:
            self._norms[key] = lp_norm(self.entries, p, normalized)
        return self._norms[key]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"LpVector(dim={self.dim})"


@dataclass(frozen=True)
class MatrixSample:
    """An n x n i.i.d. standard Gaussian draw G and its symmetrization.

    gbar = (G + G^T)/sqrt(2) has GOE statistics: off-diagonal variance 1,
    diagonal variance 2, and <Gx, x> = <gbar x, x>/sqrt(2) for every x.
    """

    n: int
    g: np.ndarray
    gbar: np.ndarray
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("matrix dimension must be >= 1")
        for m in (self.g, self.gbar):
            m.flags.writeable = False


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, path).

    Philox is counter-based, so parallel replications keyed by distinct
    path tuples get provably disjoint streams from one master seed.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def sample_matrix(n: int, seed: int) -> MatrixSample:
    """Deterministic n x n i.i.d. standard Gaussian sample for this seed."""
    if n < 1:
        raise ValueError("matrix dimension must be >= 1")
    g = rng_stream(seed, 0).standard_normal((n, n))
    gbar = (g + g.T) / math.sqrt(2.0)
    return MatrixSample(n=n, g=g, gbar=gbar, seed=seed)


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Hermite nodes/weights in the e^{-t^2} convention.

    For z ~ N(0,1): E f(z) = sum_j weights_j f(sqrt(2) nodes_j) / sqrt(pi).
    ``z_nodes`` and ``probs`` are that change of variables, precomputed.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    z_nodes: np.ndarray = field(init=False, repr=False)
    probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "z_nodes", math.sqrt(2.0) * self.nodes)
        object.__setattr__(self, "probs", self.weights / math.sqrt(math.pi))
        for a in (self.nodes, self.weights, self.z_nodes, self.probs):
            a.flags.writeable = False

    def expect(self, f) -> float:
        """E f(z), z ~ N(0,1), by this rule."""
        return float(self.probs @ f(self.z_nodes))


@lru_cache(maxsize=32)
def gauss_hermite_grid(order: int) -> QuadratureGrid:
    # cached: node computation costs ~1 ms and the PDE solver asks per solve;
    # the returned arrays are frozen so sharing is safe
    if not 2 <= order <= 512:
        raise ValueError(f"quadrature order must lie in [2, 512], got {order}")
    nodes, weights = hermgauss(order)
    return QuadratureGrid(nodes=nodes, weights=weights, order=order)
