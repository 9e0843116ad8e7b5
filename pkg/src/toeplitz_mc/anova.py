"""Exact ANOVA decomposition and the variance of the Toeplitz MC estimator.

Everything is computed on a tensor grid of a univariate rule (a Gauss rule
for a density, or the two atoms +-1 of a Rademacher law), so integrals of
polynomial integrands of moderate degree are exact up to roundoff.  The
module also carries a brute-force oracle: for the two-point law the exact
variance of both estimators follows from enumerating every equiprobable
stream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .estimators import Integrand, tmc_points
from .sampling import Law

__all__ = [
    "UnivariateLaw",
    "AnovaDecomposition",
    "VarianceReport",
    "gauss_hermite_law",
    "gauss_legendre_law",
    "two_point_law",
    "nodes_for_degree",
    "anova_decompose",
    "mc_variance",
    "cross_term",
    "tmc_variance_theorem",
    "alpha",
    "corollary_bound",
    "enumerate_variance_exact",
    "subsets",
    "multilinear_integrand",
    "random_multilinear",
]

# grid points allowed in a decomposition (nodes**s)
MAX_GRID_POINTS = 1 << 20
MAX_ENUMERATION_BITS = 22


@dataclass(frozen=True)
class UnivariateLaw:
    """A discrete rule ``sum_i w_i h(x_i)`` standing in for ``E[h(X)]``."""

    kind: str
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if n.shape != w.shape or n.ndim != 1 or n.size == 0:
            raise ValueError("nodes and weights must be matching 1-D arrays")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")
        object.__setattr__(self, "nodes", n)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.nodes.size


def gauss_hermite_law(n: int) -> UnivariateLaw:
    """``n``-point Gauss rule for N(0,1); exact for polynomials of degree <= 2n-1."""
    x, w = hermegauss(n)
    return UnivariateLaw("normal", x, w / w.sum())


def gauss_legendre_law(n: int) -> UnivariateLaw:
    """``n``-point Gauss rule for U(-1/2, 1/2)."""
    x, w = leggauss(n)
    return UnivariateLaw("uniform_centered", x / 2.0, w / 2.0)


def two_point_law() -> UnivariateLaw:
    return UnivariateLaw("two_point", np.array([-1.0, 1.0]), np.array([0.5, 0.5]))


def nodes_for_degree(d: int) -> int:
    """Nodes per axis for per-axis degree ``d``: ``ceil((d+1)/2) + 2``."""
    return math.ceil((d + 1) / 2) + 2


def subsets(s: int):
    """All subsets of ``range(s)`` as sorted tuples, by size then lexicographically."""
    for k in range(s + 1):
        yield from itertools.combinations(range(s), k)


def multilinear_integrand(s: int, coeffs: dict, law: Law = Law.NORMAL) -> Integrand:
    """``f(x) = sum_u c_u prod_{j in u} x_j`` with ``coeffs`` keyed by 0-based tuples."""
    terms = [(tuple(sorted(u)), float(c)) for u, c in coeffs.items()]
    for u, _ in terms:
        if any(j < 0 or j >= s for j in u):
            raise ValueError(f"subset {u} outside range({s})")

    def f(x):
        x = np.atleast_2d(x)
        out = np.zeros(x.shape[0])
        for u, c in terms:
            out += c * np.prod(x[:, list(u)], axis=1) if u else c
        return out

    return Integrand(s, func=f, law=law)


def random_multilinear(s: int, rng: np.random.Generator, law: Law = Law.NORMAL) -> Integrand:
    """Multilinear integrand with independent N(0,1) coefficients on every subset."""
    return multilinear_integrand(s, {u: rng.standard_normal() for u in subsets(s)}, law)


@dataclass(frozen=True)
class AnovaDecomposition:
    """Effects ``f_u`` on the tensor grid.

    ``effects[u]`` is an ``s``-dimensional array with length-1 axes outside
    ``u`` (0-based coordinates), so effects broadcast against each other and
    against ``values``, the integrand on the full grid.
    """

    s: int
    law: UnivariateLaw
    values: np.ndarray
    effects: dict
    second_moments: dict

    @property
    def mean(self) -> float:
        return float(self.effects[()].reshape(()))

    @property
    def variance(self) -> float:
        """``I(f^2) - I(f)^2`` by direct quadrature (not via the effects)."""
        return _integrate(self.values ** 2, self.law) - _integrate(self.values, self.law) ** 2

    def effect_on(self, u) -> np.ndarray:
        """``f_u`` as a ``|u|``-dimensional array over its own coordinates."""
        u = tuple(sorted(u))
        e = self.effects[u]
        return e.reshape([self.law.size] * len(u)) if u else e.reshape(())


def _weights_for(law: UnivariateLaw, axes_mask) -> np.ndarray:
    """Tensor weights, broadcastable, on the axes where ``axes_mask`` is true."""
    w = np.ones([1] * len(axes_mask))
    for ax, on in enumerate(axes_mask):
        if on:
            shape = [1] * len(axes_mask)
            shape[ax] = law.size
            w = w * law.weights.reshape(shape)
    return w


def _integrate(arr: np.ndarray, law: UnivariateLaw) -> float:
    w = _weights_for(law, [n > 1 for n in arr.shape])
    return float(np.sum(arr * w))


def anova_decompose(f, s: int, law: UnivariateLaw) -> AnovaDecomposition:
    """All ``2**s`` ANOVA effects of ``f`` under ``law**s``.

    ``f`` maps an ``(n, s)`` array to ``n`` values (an
    :class:`~toeplitz_mc.estimators.Integrand` works).  Each effect is the
    marginal over the complement minus all effects of proper subsets.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    q = law.size
    if q ** s > MAX_GRID_POINTS:
        raise ValueError(f"grid of {q}**{s} points exceeds {MAX_GRID_POINTS}")
    grids = np.meshgrid(*([law.nodes] * s), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    values = np.asarray(f(pts), dtype=np.float64).reshape([q] * s)

    effects: dict = {}
    moments: dict = {}
    for u in subsets(s):
        others = tuple(ax for ax in range(s) if ax not in u)
        w = _weights_for(law, [ax in others for ax in range(s)])
        marginal = np.sum(values * w, axis=others, keepdims=True) if others else values.copy()
        for k in range(len(u)):
            for v in itertools.combinations(u, k):
                marginal = marginal - effects[v]
        effects[u] = marginal
        moments[u] = _integrate(marginal ** 2, law)
    return AnovaDecomposition(s, law, values, effects, moments)


def mc_variance(dec: AnovaDecomposition, N: int) -> float:
    """Variance of the standard MC mean: sum of nonempty effect variances over ``N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.fsum(m for u, m in dec.second_moments.items() if u) / N


def cross_term(dec: AnovaDecomposition, u, lag: int) -> float:
    """``I(f_u f_{u+lag})`` with both effects on the same ``|u|`` coordinates.

    ``u`` uses 1-based coordinates as in the variance formula; the k-th
    smallest index of ``u`` is paired with the k-th smallest of ``u + lag``.
    """
    u = tuple(sorted(u))
    if not u or lag < 1 or u[0] < 1 or u[-1] > dec.s - lag:
        raise ValueError(f"need nonempty u within [1, {dec.s - lag}] and lag >= 1")
    a = dec.effect_on([j - 1 for j in u])
    b = dec.effect_on([j - 1 + lag for j in u])
    return _integrate(a * b, dec.law)


@dataclass(frozen=True)
class VarianceReport:
    N: int
    v_mc: float
    cross_sum: float
    v_tmc: float
    per_lag: tuple


def tmc_variance_theorem(dec: AnovaDecomposition, N: int) -> VarianceReport:
    """Exact TMC variance: MC variance plus lagged cross-effect covariances."""
    if N < 1:
        raise ValueError("N must be >= 1")
    s = dec.s
    v_mc = mc_variance(dec, N)
    per_lag = []
    for lag in range(1, min(s, N)):
        terms = [cross_term(dec, [j + 1 for j in u], lag)
                 for u in subsets(s - lag) if u]
        per_lag.append(math.fsum(terms))
    cross = math.fsum((N - lag) * c for lag, c in enumerate(per_lag, start=1))
    v_tmc = v_mc + 2.0 * cross / N ** 2
    return VarianceReport(N, v_mc, cross, v_tmc, tuple(per_lag))


def alpha(dec: AnovaDecomposition, ell: int) -> float:
    """Root of the total effect variance over subsets whose smallest index is ``ell`` (1-based)."""
    if not 1 <= ell <= dec.s:
        raise ValueError(f"ell must be in [1, {dec.s}]")
    return math.sqrt(math.fsum(m for u, m in dec.second_moments.items()
                               if u and u[0] == ell - 1))


def corollary_bound(dec: AnovaDecomposition, N: int) -> float:
    """Upper bound ``(sum_l alpha_l)^2 / N`` on the TMC variance."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.fsum(alpha(dec, ell) for ell in range(1, dec.s + 1)) ** 2 / N


def _all_sign_streams(length: int) -> np.ndarray:
    codes = np.arange(1 << length, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(length, dtype=np.int64)) & 1
    return np.where(bits == 1, 1.0, -1.0)


def _exact_variance(estimates: np.ndarray) -> float:
    m = estimates.mean()
    return float(np.mean((estimates - m) ** 2))


def enumerate_variance_exact(f, N: int, s: int) -> tuple[float, float]:
    """Exact ``(V[MC], V[TMC])`` under the +-1 two-point law by full enumeration.

    The TMC variance enumerates all ``2**(N+s-1)`` streams.  The MC variance
    enumerates all ``2**(N*s)`` MC streams when that is at most ``2**22``,
    and is cross-checked against single-point enumeration divided by ``N``;
    otherwise only the latter is used.
    """
    if N < 1 or s < 1:
        raise ValueError("N, s must be >= 1")
    if N + s - 1 > MAX_ENUMERATION_BITS:
        raise ValueError(f"N + s - 1 = {N + s - 1} exceeds {MAX_ENUMERATION_BITS} enumeration bits")

    streams = _all_sign_streams(N + s - 1)
    windows = np.stack([tmc_points(row, N, s) for row in streams])  # (2^k, N, s)
    vals = np.asarray(f(windows.reshape(-1, s)), dtype=np.float64).reshape(len(streams), N)
    v_tmc = _exact_variance(vals.mean(axis=1))

    points = _all_sign_streams(s)
    v_point = _exact_variance(np.asarray(f(points), dtype=np.float64)) / N
    if N * s <= MAX_ENUMERATION_BITS:
        mc_streams = _all_sign_streams(N * s).reshape(-1, N, s)
        mc_vals = np.asarray(f(mc_streams.reshape(-1, s)), dtype=np.float64).reshape(-1, N)
        v_mc = _exact_variance(mc_vals.mean(axis=1))
        if not math.isclose(v_mc, v_point, rel_tol=1e-10, abs_tol=1e-12):
            raise RuntimeError(f"MC enumeration {v_mc} disagrees with point variance / N {v_point}")
    else:
        v_mc = v_point
    return v_mc, v_tmc
