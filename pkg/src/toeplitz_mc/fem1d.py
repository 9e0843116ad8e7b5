"""One-dimensional finite-element benchmarks with random diffusion coefficients.

Both models solve ``-(a u')' = 1`` on (0, 1) with ``u(0) = u(1) = 0`` using
hat functions on ``M`` equal intervals and report ``u(1/2)``.

* uniform:    ``a = 2 + sum_j y_j sin(2 pi j x) / j**1.5``, ``y_j ~ U(-1/2, 1/2)``.
  The stiffness matrix is affine in ``y`` with closed-form tridiagonal terms.
* log-normal: ``a = exp(sum_j y_j sin(2 pi j x) / j**2)``, ``y_j ~ N(0, 1)``.
  The exponent is needed at the mesh nodes only; entries use Simpson's rule
  on the diagonal and the trapezoidal rule off it.

The random part of every sample is a linear map of ``y``, so a batch of
samples costs one matrix product: dense for MC, Toeplitz-FFT for TMC.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .estimators import EstimateResult
from .sampling import Law, make_stream
from .toeplitz import build_operator, dense_matmat, fast_matmat

__all__ = [
    "SingularSystemError",
    "TridiagonalSystem",
    "FieldSpec1D",
    "uniform_coefficients",
    "assemble_uniform",
    "thomas_solve",
    "thomas_solve_batch",
    "solve_u_half_uniform",
    "theta_coefficients",
    "compute_thetas",
    "assemble_lognormal",
    "solve_u_half_lognormal",
    "estimate_u_half",
]


class SingularSystemError(ArithmeticError):
    """Elimination hit a zero or non-positive pivot."""


@dataclass(frozen=True)
class TridiagonalSystem:
    """Symmetric tridiagonal ``B u = rhs`` of size ``M - 1``; ``off`` has ``M - 2`` entries."""

    diag: np.ndarray
    off: np.ndarray
    rhs: np.ndarray

    @property
    def sub(self) -> np.ndarray:
        return self.off

    @property
    def sup(self) -> np.ndarray:
        return self.off

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out


@dataclass(frozen=True)
class FieldSpec1D:
    """Model, truncation and mesh.  ``coefficient_law`` overrides the law of ``y_j``.

    The uniform model also accepts ``Law.UNIFORM`` (``y_j ~ U(0, 1)``), which
    keeps ``a >= 2 - zeta(3/2) > 0``.
    """

    model: str
    s: int
    M: int
    coefficient_law: Law | None = None

    def __post_init__(self):
        if self.model not in ("uniform", "lognormal"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.M < 2 or self.s < 1:
            raise ValueError("need M >= 2 and s >= 1")
        if self.coefficient_law is not None:
            law = Law(self.coefficient_law)
            allowed = (Law.UNIFORM_CENTERED, Law.UNIFORM) if self.model == "uniform" else (Law.NORMAL,)
            if law not in allowed:
                raise ValueError(f"law {law.value!r} not supported by the {self.model} model")
            object.__setattr__(self, "coefficient_law", law)

    @property
    def law(self) -> Law:
        if self.coefficient_law is not None:
            return self.coefficient_law
        return Law.UNIFORM_CENTERED if self.model == "uniform" else Law.NORMAL


def _check_even(M: int) -> None:
    if M < 2 or M % 2:
        raise ValueError(f"M must be even so that x = 1/2 is a node, got M={M}")


def uniform_coefficients(s: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form random parts of the stiffness matrix.

    Returns ``(D, O)`` of shapes ``(s, M-1)`` and ``(s, M-2)``: row ``j-1``
    holds the diagonal and superdiagonal of the ``j``-th term matrix.
    """
    j = np.arange(1, s + 1, dtype=np.float64)[:, None]
    scale = M * M / (np.pi * j ** 2.5)
    k = np.arange(1, M, dtype=np.float64)[None, :]
    D = scale * np.sin(2 * np.pi * j / M) * np.sin(2 * np.pi * j * k / M)
    kk = np.arange(1, M - 1, dtype=np.float64)[None, :]
    O = -scale * np.sin(np.pi * j / M) * np.sin(np.pi * j * (2 * kk + 1) / M)
    return D, O


def assemble_uniform(y, M: int) -> TridiagonalSystem:
    y = np.asarray(y, dtype=np.float64)
    D, O = uniform_coefficients(y.size, M)
    diag = 4.0 * M + y @ D
    off = -2.0 * M + y @ O
    return TridiagonalSystem(diag, off, np.full(M - 1, 1.0 / M))


# pivots this small relative to their row are treated as zero
_ZERO_PIVOT = 1e-12


def thomas_solve_batch(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray,
                       positive: bool = False) -> np.ndarray:
    """Thomas elimination for a batch of symmetric tridiagonal systems.

    ``diag`` and ``rhs`` are ``(B, n)``, ``off`` is ``(B, n-1)``; the loop
    runs over rows and is vectorized over the batch.  A pivot that is zero
    relative to its row raises :class:`SingularSystemError`; with
    ``positive=True`` (systems known to be SPD) any pivot <= 0 does.
    """
    diag = np.atleast_2d(diag)
    off = np.atleast_2d(off)
    rhs = np.broadcast_to(np.atleast_2d(rhs), diag.shape)
    B, n = diag.shape
    c = np.empty((B, max(n - 1, 0)))
    d = np.empty((B, n))

    def check(piv, i):
        if positive:
            bad = ~(piv > 0.0)
        else:
            scale = np.abs(diag[:, i])
            if i > 0:
                scale = scale + np.abs(off[:, i - 1])
            bad = ~(np.abs(piv) > _ZERO_PIVOT * scale)
        if np.any(bad):
            kind = "non-positive" if positive else "zero"
            raise SingularSystemError(f"{kind} pivot in row {i} of system {int(np.flatnonzero(bad)[0])}")

    piv = diag[:, 0].copy()
    check(piv, 0)
    d[:, 0] = rhs[:, 0] / piv
    for i in range(1, n):
        c[:, i - 1] = off[:, i - 1] / piv
        piv = diag[:, i] - off[:, i - 1] * c[:, i - 1]
        check(piv, i)
        d[:, i] = (rhs[:, i] - off[:, i - 1] * d[:, i - 1]) / piv
    u = np.empty((B, n))
    u[:, -1] = d[:, -1]
    for i in range(n - 2, -1, -1):
        u[:, i] = d[:, i] - c[:, i] * u[:, i + 1]
    return u


def thomas_solve(sys: TridiagonalSystem, positive: bool = False) -> np.ndarray:
    """O(M) solve without pivoting; see :func:`thomas_solve_batch` for the pivot guard."""
    return thomas_solve_batch(sys.diag[None], sys.off[None], sys.rhs[None], positive)[0]


def solve_u_half_uniform(y, M: int) -> float:
    _check_even(M)
    return float(thomas_solve(assemble_uniform(y, M), positive=True)[M // 2 - 1])


def theta_coefficients(s: int, nodes) -> np.ndarray:
    """``(s, Q)`` matrix with entries ``sin(2 pi j x_q) / j**2``."""
    j = np.arange(1, s + 1, dtype=np.float64)[:, None]
    x = np.asarray(nodes, dtype=np.float64)[None, :]
    return np.sin(2 * np.pi * j * x) / j ** 2


def compute_thetas(samples, N: int, s: int, quad_nodes, method: str = "TMC") -> np.ndarray:
    """Log-field exponent at ``quad_nodes`` for ``N`` samples, shape ``(N, Q)``.

    ``samples`` is a stream (or array of draws).  TMC reads ``N + s - 1``
    draws as sliding windows and multiplies by FFT; MC reads ``N * s``
    draws as independent rows and multiplies densely.
    """
    values = np.asarray(getattr(samples, "values", samples), dtype=np.float64)
    C = theta_coefficients(s, quad_nodes)
    if method.upper() == "TMC":
        return fast_matmat(build_operator(values, N, s), C)
    if method.upper() == "MC":
        if values.size < N * s:
            raise ValueError(f"need {N * s} draws, got {values.size}")
        return dense_matmat(values[: N * s].reshape(N, s), C)
    raise ValueError(f"unknown method {method!r}")


def _lognormal_bands(theta: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    e = np.exp(np.atleast_2d(theta))
    diag = (M / 3.0) * (e[:, :-2] + 4.0 * e[:, 1:-1] + e[:, 2:])
    off = -(M / 2.0) * (e[:, 1:-2] + e[:, 2:-1])
    return diag, off


def assemble_lognormal(theta_row, M: int) -> TridiagonalSystem:
    """Stiffness system from the exponent at the mesh nodes ``x_0 .. x_M``."""
    theta_row = np.asarray(theta_row, dtype=np.float64)
    if theta_row.shape != (M + 1,):
        raise ValueError(f"need the exponent at {M + 1} mesh nodes, got shape {theta_row.shape}")
    diag, off = _lognormal_bands(theta_row, M)
    return TridiagonalSystem(diag[0], off[0], np.full(M - 1, 1.0 / M))


def solve_u_half_lognormal(theta_row, M: int) -> float:
    _check_even(M)
    return float(thomas_solve(assemble_lognormal(theta_row, M))[M // 2 - 1])


def estimate_u_half(model: str, method: str, N: int, M: int, s: int, seed: int,
                    stream_index: int = 0, law: Law | None = None) -> EstimateResult:
    """One MC or TMC estimate of ``E[u(1/2)]``, timed end to end."""
    spec = FieldSpec1D(model, s, M, law)
    _check_even(M)
    method = method.upper()
    t0 = time.perf_counter()
    draws = N + s - 1 if method == "TMC" else N * s
    stream = make_stream(seed, stream_index, spec.law, draws)
    rhs = np.full(M - 1, 1.0 / M)
    if model == "uniform":
        D, O = uniform_coefficients(s, M)
        coef = np.hstack([D, O])
        if method == "TMC":
            rand = fast_matmat(build_operator(stream, N, s), coef)
        elif method == "MC":
            rand = dense_matmat(stream.values.reshape(N, s), coef)
        else:
            raise ValueError(f"unknown method {method!r}")
        diag = 4.0 * M + rand[:, : M - 1]
        off = -2.0 * M + rand[:, M - 1 :]
    else:
        theta = compute_thetas(stream, N, s, np.arange(M + 1) / M, method)
        diag, off = _lognormal_bands(theta, M)
    # the uniform model is SPD for |y_j| <= 1/2 and y_j in [0, 1); the
    # log-normal quadrature matrix is not always definite
    u = thomas_solve_batch(diag, off, rhs, positive=(model == "uniform"))
    value = float(np.mean(u[:, M // 2 - 1]))
    return EstimateResult(value, N, method, time.perf_counter() - t0, draws)
