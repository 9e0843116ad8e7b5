"""Standard MC and Toeplitz MC estimators, replication and efficiency.

Integrands are vectorized: ``func`` maps an ``(n, s)`` array of points to
``n`` values.  An integrand with a linear stage ``f(x) = g(x A)`` is
evaluated by forming ``X A`` first, densely for MC and by FFT for TMC.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .sampling import Law, make_stream
from .toeplitz import build_operator, dense_matmat, fast_matmat

__all__ = [
    "Integrand",
    "EstimateResult",
    "ReplicationStats",
    "mc_estimate",
    "tmc_estimate",
    "parallel_tmc_average",
    "replicate",
    "efficiency",
    "tmc_points",
    "TMC_INDEX_OFFSET",
]

# offset for callers that want MC and TMC replications on disjoint streams
TMC_INDEX_OFFSET = 1 << 40


@dataclass(frozen=True)
class Integrand:
    """A function on ``R^s`` integrated against the product law ``law^s``.

    Give either ``func`` (points -> values) or a linear stage ``matrix``
    (``s x t``) with ``outer`` (``(n, t)`` -> ``n`` values).
    """

    s: int
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    matrix: Optional[np.ndarray] = None
    outer: Optional[Callable[[np.ndarray], np.ndarray]] = None
    law: Law = Law.NORMAL

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        object.__setattr__(self, "law", Law(self.law))
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != self.s:
                raise ValueError(f"linear stage must have {self.s} rows, got shape {m.shape}")
            if self.outer is None:
                raise ValueError("linear stage needs an outer function")
            object.__setattr__(self, "matrix", m)
        elif self.func is None:
            raise ValueError("give func or (matrix, outer)")

    @property
    def has_linear_stage(self) -> bool:
        return self.matrix is not None

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.has_linear_stage:
            return np.asarray(self.outer(points @ self.matrix), dtype=np.float64)
        return np.asarray(self.func(points), dtype=np.float64)


@dataclass(frozen=True)
class EstimateResult:
    value: float
    N: int
    method: str
    wall_time: float
    draws: int = 0


@dataclass(frozen=True)
class ReplicationStats:
    R: int
    means: np.ndarray
    grand_mean: float
    estimator_variance: float
    avg_time: float
    results: list = field(default_factory=list, repr=False)

    @classmethod
    def from_values(cls, values, times) -> "ReplicationStats":
        v = np.asarray(values, dtype=np.float64)
        R = v.size
        if R < 2:
            raise ValueError("estimator variance needs R >= 2 replications")
        gm = float(np.mean(v))
        var = float(np.sum((v - gm) ** 2) / (R * (R - 1)))
        return cls(R, v, gm, var, float(np.mean(times)))


def tmc_points(values: np.ndarray, N: int, s: int) -> np.ndarray:
    """The ``N`` windows ``(x_{n+s-1}, ..., x_n)`` as an ``(N, s)`` view."""
    return sliding_window_view(values[: N + s - 1], s)[:, ::-1]


def _evaluate_mc(f: Integrand, x: np.ndarray) -> np.ndarray:
    if f.has_linear_stage:
        return f.outer(dense_matmat(x, f.matrix))
    return f.func(x)


def mc_estimate(f: Integrand, N: int, seed: int, stream_index: int = 0) -> EstimateResult:
    """Sample mean of ``f`` over ``N`` independent points (``N*s`` draws)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    t0 = time.perf_counter()
    draws = N * f.s
    x = make_stream(seed, stream_index, f.law, draws).values.reshape(N, f.s)
    value = float(np.mean(_evaluate_mc(f, x)))
    return EstimateResult(value, N, "MC", time.perf_counter() - t0, draws)


def tmc_estimate(f: Integrand, N: int, seed: int, stream_index: int = 0) -> EstimateResult:
    """Sample mean of ``f`` over the ``N`` sliding windows of one stream of ``N+s-1`` draws."""
    if N < 1:
        raise ValueError("N must be >= 1")
    t0 = time.perf_counter()
    draws = N + f.s - 1
    stream = make_stream(seed, stream_index, f.law, draws)
    if f.has_linear_stage:
        y = fast_matmat(build_operator(stream, N, f.s), f.matrix)
        vals = f.outer(y)
    else:
        vals = f.func(tmc_points(stream.values, N, f.s))
    value = float(np.mean(vals))
    return EstimateResult(value, N, "TMC", time.perf_counter() - t0, draws)


def parallel_tmc_average(f: Integrand, N: int, L: int, seed: int,
                         stream_index: int = 0, workers: int = 1) -> EstimateResult:
    """Average of ``L`` independent TMC estimates, ``L*N`` points in total.

    Run ``v`` uses stream ``stream_index * L + v``, so ``L = 1`` reproduces
    :func:`tmc_estimate` and distinct ``stream_index`` never share streams.
    """
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    t0 = time.perf_counter()
    idx = [stream_index * L + v for v in range(L)]
    if workers > 1 and L > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda i: tmc_estimate(f, N, seed, i), idx))
    else:
        runs = [tmc_estimate(f, N, seed, i) for i in idx]
    value = math.fsum(r.value for r in runs) / L
    draws = sum(r.draws for r in runs)
    return EstimateResult(value, N * L, "TMC", time.perf_counter() - t0, draws)


def replicate(run: Callable[[int, int], object], R: int, base_seed: int,
              index_offset: int = 0, workers: int = 1) -> ReplicationStats:
    """Run ``R`` independent replications ``run(base_seed, index_offset + r)``.

    ``run`` returns an :class:`EstimateResult` (its own wall time is used) or
    a bare float (timed here).  Results come back in replication order
    whatever ``workers`` is.
    """
    if R < 2:
        raise ValueError("estimator variance needs R >= 2 replications")

    def one(r: int):
        t0 = time.perf_counter()
        out = run(base_seed, index_offset + r)
        elapsed = time.perf_counter() - t0
        if isinstance(out, EstimateResult):
            return out, out.value, out.wall_time
        return out, float(out), elapsed

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(R)))
    else:
        rows = [one(r) for r in range(R)]
    stats = ReplicationStats.from_values([v for _, v, _ in rows], [t for _, _, t in rows])
    return ReplicationStats(stats.R, stats.means, stats.grand_mean, stats.estimator_variance,
                            stats.avg_time, [o for o, _, _ in rows])


def efficiency(mc: ReplicationStats, tmc: ReplicationStats) -> float:
    """``(T_MC var_MC) / (T_TMC var_TMC)``; ``inf`` when the denominator vanishes."""
    den = tmc.avg_time * tmc.estimator_variance
    if den <= 0.0:
        return math.inf
    return mc.avg_time * mc.estimator_variance / den
