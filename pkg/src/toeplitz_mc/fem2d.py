"""Two-dimensional benchmark: ``-div(a grad u) = 100 x_1`` on the unit square.

The coefficient is ``a = 1 + sum_j y_j sin(pi k1 x1) sin(pi k2 x2) / (k1^2+k2^2)^2``
with ``y_j ~ U(-1/2, 1/2)``; frequencies are ordered by ``k1^2 + k2^2``.

Linear elements on the uniform right-triangle mesh whose diagonals run along
(1, 1) give each interior hat function a hexagonal support and a 7-point
stencil.  Gradients are constant per triangle, so the stiffness matrix only
depends on the per-triangle integrals ``w_T = int_T a``, which are affine in
``y`` with closed-form coefficients.  One matrix product maps all samples'
``y`` to their ``w_T``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp

from .estimators import EstimateResult
from .sampling import Law, make_stream
from .toeplitz import build_operator, dense_matmat, fast_matmat

__all__ = [
    "ConvergenceError",
    "FrequencyList",
    "SparseSystem",
    "SolveResult",
    "Mesh2D",
    "mesh",
    "frequency_ordering",
    "triangle_sine_integrals",
    "term_matrix",
    "assemble_2d",
    "bicgstab",
    "bicgstab_batch",
    "solve_center",
    "estimate_center",
]


class ConvergenceError(RuntimeError):
    """BiCGSTAB broke down or ran out of iterations."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class FrequencyList:
    pairs: np.ndarray  # (s, 2) integer

    @property
    def s(self) -> int:
        return self.pairs.shape[0]

    @property
    def decay(self) -> np.ndarray:
        k2 = np.sum(self.pairs.astype(np.float64) ** 2, axis=1)
        return 1.0 / k2 ** 2


def frequency_ordering(s: int) -> FrequencyList:
    """First ``s`` pairs of positive integers by ``k1^2 + k2^2``, ties lexicographic."""
    if s < 1:
        raise ValueError("s must be >= 1")
    radius = 2
    while True:
        k = np.arange(1, radius + 1)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        k1, k2 = k1.ravel(), k2.ravel()
        norm = k1 ** 2 + k2 ** 2
        inside = norm <= radius ** 2
        if inside.sum() >= s:
            k1, k2, norm = k1[inside], k2[inside], norm[inside]
            order = np.lexsort((k2, k1, norm))[:s]
            return FrequencyList(np.stack([k1[order], k2[order]], axis=1))
        radius *= 2


def _sin_line(c, d, h):
    """``int_0^h sin(c + d xi) d xi`` elementwise, including ``d = 0``."""
    c, d = np.broadcast_arrays(np.asarray(c, dtype=np.float64), np.asarray(d, dtype=np.float64))
    safe = np.where(d == 0.0, 1.0, d)
    out = (np.cos(c) - np.cos(c + d * h)) / safe
    return np.where(d == 0.0, h * np.sin(c), out)


def triangle_sine_integrals(k1, k2, M: int) -> tuple[np.ndarray, np.ndarray]:
    """``int_T sin(pi k1 x) sin(pi k2 y)`` over every mesh triangle.

    Returns ``(lower, upper)``, each shaped ``(len(k1), M, M)`` and indexed by
    cell ``(i, j)`` with corner ``(i/M, j/M)``.  ``lower`` is the triangle
    under the cell diagonal, ``upper`` the one above it.
    """
    h = 1.0 / M
    a = np.pi * np.asarray(k1, dtype=np.float64)[:, None, None]
    b = np.pi * np.asarray(k2, dtype=np.float64)[:, None, None]
    x0 = (np.arange(M) * h)[None, :, None]
    y0 = (np.arange(M) * h)[None, None, :]
    sx = _sin_line(a * x0, a, h)
    sy = _sin_line(b * y0, b, h)
    # lower: y0 <= y <= y0 + (x - x0); integrate y first, then x
    cross = 0.5 * (_sin_line(a * x0 + b * y0, a + b, h) + _sin_line(a * x0 - b * y0, a - b, h))
    lower = (np.cos(b * y0) * sx - cross) / b
    upper = sx * sy - lower
    return lower, upper


@dataclass(frozen=True)
class Mesh2D:
    """Interior-node numbering and the affine map from triangle weights to the stencil.

    Unknown ``(p, q)``, ``1 <= p, q <= M-1``, has index ``(p-1)(M-1) + (q-1)``.
    Triangles are numbered ``2 * (i*M + j) + {0: lower, 1: upper}``.
    ``band_map`` is sparse ``(2 M^2, 7 n)``: triangle weights times it give
    the 7 bands of the stiffness matrix, band ``b`` at offset ``offsets[b]``.
    """

    M: int
    offsets: tuple
    band_map: sp.csr_matrix

    @property
    def n(self) -> int:
        return (self.M - 1) ** 2

    @property
    def area(self) -> float:
        return 0.5 / self.M ** 2

    def index(self, p: int, q: int) -> int:
        return (p - 1) * (self.M - 1) + (q - 1)

    @property
    def rhs(self) -> np.ndarray:
        M = self.M
        p = np.repeat(np.arange(1, M), M - 1)
        return 100.0 * (p / M) / M ** 2

    def bands_from_weights(self, w: np.ndarray) -> np.ndarray:
        """``(B, 2M^2)`` triangle weights -> ``(B, 7, n)`` bands."""
        w = np.atleast_2d(w)
        return np.ascontiguousarray((self.band_map.T @ w.T).T).reshape(w.shape[0], 7, self.n)

    def to_coo(self, bands: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows, cols, vals = [], [], []
        idx = np.arange(self.n)
        for b, off in enumerate(self.offsets):
            nz = bands[b] != 0.0
            rows.append(idx[nz])
            cols.append(idx[nz] + off)
            vals.append(bands[b][nz])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _local_gradient_products(verts: np.ndarray) -> np.ndarray:
    """``grad phi_a . grad phi_b`` on a triangle with vertex rows ``verts``."""
    T = np.hstack([np.ones((3, 1)), verts])
    grads = np.linalg.inv(T)[1:, :]  # columns: gradients of the barycentric functions
    return grads.T @ grads


@lru_cache(maxsize=32)
def mesh(M: int) -> Mesh2D:
    if M < 2:
        raise ValueError("M must be >= 2")
    h = 1.0 / M
    offsets = (-M, -(M - 1), -1, 0, 1, M - 1, M)
    slot = {o: b for b, o in enumerate(offsets)}
    n = (M - 1) ** 2
    tri_local = {
        0: ((0, 0), (1, 0), (1, 1)),
        1: ((0, 0), (1, 1), (0, 1)),
    }
    G = {kind: _local_gradient_products(np.array(v, dtype=np.float64) * h)
         for kind, v in tri_local.items()}
    rows, cols, vals = [], [], []
    for i in range(M):
        for j in range(M):
            for kind, verts in tri_local.items():
                tri = 2 * (i * M + j) + kind
                nodes = [(i + di, j + dj) for di, dj in verts]
                for a, (pa, qa) in enumerate(nodes):
                    if not (0 < pa < M and 0 < qa < M):
                        continue
                    ia = (pa - 1) * (M - 1) + (qa - 1)
                    for b, (pb, qb) in enumerate(nodes):
                        if not (0 < pb < M and 0 < qb < M):
                            continue
                        ib = (pb - 1) * (M - 1) + (qb - 1)
                        # entry = G * w_T with w_T = int_T a (constant gradients)
                        rows.append(tri)
                        cols.append(slot[ib - ia] * n + ia)
                        vals.append(G[kind][a, b])
    band_map = sp.csr_matrix((vals, (rows, cols)), shape=(2 * M * M, 7 * n))
    band_map.sum_duplicates()
    return Mesh2D(M, offsets, band_map)


def _weight_coefficients(M: int, freqs: FrequencyList) -> np.ndarray:
    """``(s, 2M^2)``: coefficient of ``y_j`` in each triangle weight ``w_T``."""
    lower, upper = triangle_sine_integrals(freqs.pairs[:, 0], freqs.pairs[:, 1], M)
    C = np.stack([lower, upper], axis=-1).reshape(freqs.s, 2 * M * M)
    return C * freqs.decay[:, None]


_weight_coefficients_cached = lru_cache(maxsize=8)(
    lambda M, s: _weight_coefficients(M, frequency_ordering(s)))


def _coefficients(M: int, freqs: FrequencyList) -> np.ndarray:
    if np.array_equal(freqs.pairs, frequency_ordering(freqs.s).pairs):
        return _weight_coefficients_cached(M, freqs.s)
    return _weight_coefficients(M, freqs)


@dataclass(frozen=True)
class SparseSystem:
    """Symmetric sparse ``B u = rhs`` in coordinate form."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim))


def term_matrix(j: int, M: int, freqs: FrequencyList) -> sp.csr_matrix:
    """The ``j``-th term matrix of the affine stiffness (``j = 0``: constant part)."""
    m = mesh(M)
    if j == 0:
        w = np.full(2 * M * M, m.area)
    else:
        w = _coefficients(M, freqs)[j - 1]
    r, c, v = m.to_coo(m.bands_from_weights(w)[0])
    return sp.csr_matrix((v, (r, c)), shape=(m.n, m.n))


def assemble_2d(y, M: int, freqs: FrequencyList | None = None) -> SparseSystem:
    y = np.asarray(y, dtype=np.float64)
    if freqs is None:
        freqs = frequency_ordering(y.size)
    if freqs.s != y.size:
        raise ValueError("frequency list and y differ in length")
    m = mesh(M)
    w = m.area + y @ _coefficients(M, freqs)
    r, c, v = m.to_coo(m.bands_from_weights(w)[0])
    return SparseSystem(m.n, r, c, v, m.rhs)


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float


@numba.njit(cache=True, nogil=True)
def _band_matvec_rows(bands, offsets, idx, x):
    B, n = x.shape
    out = np.empty((B, n))
    for k in range(B):
        row = bands[idx[k]]
        for i in range(n):
            acc = 0.0
            for b in range(offsets.size):
                j = i + offsets[b]
                if 0 <= j < n:
                    acc += row[b, i] * x[k, j]
            out[k, i] = acc
    return out


def _band_matvec(bands: np.ndarray, offsets, x: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
    """Batched 7-band product; ``bands`` is ``(B, 7, n)``, ``x`` is ``(len(idx), n)``.

    Row ``k`` of ``x`` is multiplied by the bands of system ``idx[k]``.
    """
    if idx is None:
        idx = np.arange(x.shape[0])
    return _band_matvec_rows(np.ascontiguousarray(bands), np.asarray(offsets, dtype=np.int64),
                             np.asarray(idx, dtype=np.int64), np.ascontiguousarray(x))


def bicgstab_batch(matvec, rhs: np.ndarray, tol: float = 1e-5, max_iter: int | None = None,
                   x0: np.ndarray | None = None):
    """Unpreconditioned BiCGSTAB on a batch of independent systems.

    ``matvec(idx, X)`` applies the operators of batch rows ``idx`` to ``X``.
    Each system stops on its own once ``||b - A x|| / ||b|| < tol`` holds for
    the true residual.  Returns ``(x, iterations, residuals, failed)``;
    ``failed`` marks breakdown or exhausted iterations.
    """
    rhs = np.atleast_2d(np.asarray(rhs, dtype=np.float64))
    B, n = rhs.shape
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(rhs, axis=1)
    bnorm = np.where(bnorm == 0.0, 1.0, bnorm)
    x_out = np.zeros((B, n)) if x0 is None else np.array(np.atleast_2d(x0), dtype=np.float64)
    iters = np.zeros(B, dtype=np.int64)
    res_out = np.full(B, np.inf)
    failed = np.zeros(B, dtype=bool)

    idx = np.arange(B)
    x = x_out.copy()
    r = rhs - matvec(idx, x) if x0 is not None else rhs.copy()
    res = np.linalg.norm(r, axis=1) / bnorm
    done = res < tol
    x_out[idx[done]], res_out[idx[done]] = x[done], res[done]
    keep = ~done
    idx, x, r = idx[keep], x[keep], r[keep]
    r_hat = r.copy()
    p = np.zeros_like(r)
    v = np.zeros_like(r)
    rho_old = np.ones(idx.size)
    alpha = np.ones(idx.size)
    omega = np.ones(idx.size)
    tiny = 1e-300

    it = 0
    while idx.size and it < max_iter:
        it += 1
        rho = np.einsum("ij,ij->i", r_hat, r)
        broken = np.abs(rho) < tiny
        beta = (rho / np.where(broken, 1.0, rho_old)) * (alpha / omega)
        p = r + beta[:, None] * (p - omega[:, None] * v)
        v = matvec(idx, p)
        den = np.einsum("ij,ij->i", r_hat, v)
        broken |= np.abs(den) < tiny
        alpha = rho / np.where(broken, 1.0, den)
        s = r - alpha[:, None] * v
        t = matvec(idx, s)
        tt = np.einsum("ij,ij->i", t, t)
        omega = np.einsum("ij,ij->i", t, s) / np.where(tt == 0.0, 1.0, tt)
        x = x + alpha[:, None] * p + omega[:, None] * s
        r = s - omega[:, None] * t
        broken |= (omega == 0.0) & (tt != 0.0)
        res = np.linalg.norm(r, axis=1) / bnorm[idx]
        rho_old = rho

        finished = np.zeros(idx.size, dtype=bool)
        cand = np.flatnonzero(res < tol)
        if cand.size:
            true_r = rhs[idx[cand]] - matvec(idx[cand], x[cand])
            true_res = np.linalg.norm(true_r, axis=1) / bnorm[idx[cand]]
            ok = true_res < tol
            finished[cand[ok]] = True
            res[cand] = true_res
            # drifted recurrences restart from the true residual
            redo = cand[~ok]
            r[redo] = true_r[~ok]
            r_hat[redo] = true_r[~ok]
            p[redo] = 0.0
            v[redo] = 0.0
            rho_old[redo] = alpha[redo] = omega[redo] = 1.0
        broken &= ~finished
        stop = finished | broken
        if np.any(stop):
            gi = idx[stop]
            x_out[gi], res_out[gi], iters[gi] = x[stop], res[stop], it
            failed[idx[broken]] = True
            keep = ~stop
            idx, x, r, r_hat, p, v = idx[keep], x[keep], r[keep], r_hat[keep], p[keep], v[keep]
            rho_old, alpha, omega = rho_old[keep], alpha[keep], omega[keep]
            res = res[keep]
    if idx.size:
        x_out[idx], res_out[idx], iters[idx] = x, res, it
        failed[idx] = True
    return x_out, iters, res_out, failed


def _perturbed_guess(rhs: np.ndarray) -> np.ndarray:
    n = rhs.shape[-1]
    return 1e-3 * np.linalg.norm(rhs) / math.sqrt(n) * np.cos(np.arange(n) + 1.0)


def bicgstab(sys, rhs=None, tol: float = 1e-5, max_iter: int | None = None) -> SolveResult:
    """Solve one system (a :class:`SparseSystem`, or a matrix plus ``rhs``).

    Breakdown triggers one restart from a fixed perturbed guess; a second
    failure raises :class:`ConvergenceError`.
    """
    if isinstance(sys, SparseSystem):
        A, b = sys.to_csr(), sys.rhs
    else:
        A, b = sp.csr_matrix(sys), rhs
    b = np.asarray(b, dtype=np.float64)

    def mv(idx, X):
        return np.asarray((A @ X.T).T)

    x, it, res, failed = bicgstab_batch(mv, b[None], tol, max_iter)
    if failed[0]:
        x, it2, res, failed = bicgstab_batch(mv, b[None], tol, max_iter, _perturbed_guess(b)[None])
        it = it + it2
        if failed[0]:
            raise ConvergenceError("BiCGSTAB did not converge", float(res[0]))
    return SolveResult(x[0], int(it[0]), float(res[0]))


def _check_even(M: int) -> None:
    if M < 2 or M % 2:
        raise ValueError(f"M must be even so that (1/2, 1/2) is a node, got M={M}")


def solve_center(y, M: int, freqs: FrequencyList | None = None, tol: float = 1e-5) -> float:
    _check_even(M)
    sol = bicgstab(assemble_2d(y, M, freqs), tol=tol)
    return float(sol.x[mesh(M).index(M // 2, M // 2)])


def _solve_bands(m: Mesh2D, bands: np.ndarray, tol: float) -> np.ndarray:
    rhs = np.broadcast_to(m.rhs, (bands.shape[0], m.n))

    def mv(idx, X):
        return _band_matvec(bands, m.offsets, X, idx)

    x, _, res, failed = bicgstab_batch(mv, rhs, tol)
    for i in np.flatnonzero(failed):
        x1, _, res1, f1 = bicgstab_batch(lambda _, X: mv(np.array([i]), X), rhs[i][None], tol,
                                         None, _perturbed_guess(rhs[i])[None])
        if f1[0]:
            raise ConvergenceError(f"BiCGSTAB failed on sample {i}", float(res1[0]))
        x[i] = x1[0]
    return x


def estimate_center(method: str, N: int, M: int, s: int, seed: int, stream_index: int = 0,
                    tol: float = 1e-5, batch: int = 256) -> EstimateResult:
    """One MC or TMC estimate of ``E[u(1/2, 1/2)]``, timed end to end."""
    _check_even(M)
    method = method.upper()
    t0 = time.perf_counter()
    m = mesh(M)
    C = _coefficients(M, frequency_ordering(s))
    draws = N + s - 1 if method == "TMC" else N * s
    stream = make_stream(seed, stream_index, Law.UNIFORM_CENTERED, draws)
    if method == "TMC":
        W = fast_matmat(build_operator(stream, N, s), C)
    elif method == "MC":
        W = dense_matmat(stream.values.reshape(N, s), C)
    else:
        raise ValueError(f"unknown method {method!r}")
    W += m.area
    center = m.index(M // 2, M // 2)
    vals = np.empty(N)
    for n0 in range(0, N, batch):
        bands = m.bands_from_weights(W[n0 : n0 + batch])
        vals[n0 : n0 + batch] = _solve_bands(m, bands, tol)[:, center]
    return EstimateResult(float(np.mean(vals)), N, method, time.perf_counter() - t0, draws)
