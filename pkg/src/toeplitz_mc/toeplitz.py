"""Implicit Toeplitz sample matrices and FFT-based products with them.

The TMC point set is the ``N x s`` matrix whose n-th row is the sliding
window ``(x_{n+s-1}, ..., x_n)`` of one scalar stream.  It is stored by its
generating sequence only.  Products with a dense ``s x t`` matrix are done
row-block by row-block: a block of ``h <= s`` consecutive rows is itself a
Toeplitz matrix generated by ``h + s - 1`` stream values, and its product is a
slice of a linear convolution, computed by zero-padded real FFTs.  With
``h = s`` the cost of ``X @ A`` is ``O(t N log s)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ToeplitzOperator",
    "CirculantPlan",
    "build_operator",
    "naive_matvec",
    "fast_matvec",
    "fast_matmat",
    "block_matmat",
    "dense_matmat",
    "next_pow2",
]

# complex entries allowed in one batched block product before chunking (~64 MB)
_CHUNK_ELEMS = 1 << 22


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    return 1 << max(0, int(n) - 1).bit_length()


@dataclass(frozen=True)
class ToeplitzOperator:
    """The ``rows x cols`` matrix with ``X[n, j] = generating[n + cols - 1 - j]``.

    Indices are 0-based here, so row ``n`` is
    ``generating[n + cols - 1], ..., generating[n]``.
    """

    generating: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        g = np.ascontiguousarray(self.generating, dtype=np.float64)
        if g.ndim != 1:
            raise ValueError("generating sequence must be one-dimensional")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"need rows, cols >= 1, got {self.rows}, {self.cols}")
        if g.size != self.rows + self.cols - 1:
            raise ValueError(
                f"generating length {g.size} != rows + cols - 1 = {self.rows + self.cols - 1}"
            )
        g.setflags(write=False)
        object.__setattr__(self, "generating", g)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def row(self, n: int) -> np.ndarray:
        return self.generating[n : n + self.cols][::-1]

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix (tests and small cases only)."""
        return sliding_window_view(self.generating, self.cols)[:, ::-1].copy()

    def block(self, start: int, height: int) -> "ToeplitzOperator":
        """Rows ``start .. start+height-1`` as a Toeplitz operator of their own."""
        if start < 0 or height < 1 or start + height > self.rows:
            raise ValueError("row block out of range")
        g = self.generating[start : start + height + self.cols - 1]
        return ToeplitzOperator(g, height, self.cols)

    def plan(self, length: int | None = None) -> "CirculantPlan":
        return CirculantPlan.for_operator(self, length)


@dataclass(frozen=True)
class CirculantPlan:
    """Circulant embedding of one Toeplitz block.

    ``spectrum`` is the half-spectrum (real FFT) of the generating sequence
    zero-padded to ``length``; conjugate symmetry supplies the other half.
    """

    length: int
    spectrum: np.ndarray

    @classmethod
    def for_operator(cls, op: ToeplitzOperator, length: int | None = None) -> "CirculantPlan":
        need = op.rows + op.cols - 1
        if length is None:
            length = next_pow2(need)
        if length < need:
            raise ValueError(f"embedding length {length} < {need}")
        return cls(length, scipy.fft.rfft(op.generating, n=length))

    def apply(self, op: ToeplitzOperator, A: np.ndarray) -> np.ndarray:
        """``op @ A`` using this plan; ``A`` is ``cols x t``."""
        fa = scipy.fft.rfft(A, n=self.length, axis=0)
        z = scipy.fft.irfft(self.spectrum[:, None] * fa, n=self.length, axis=0)
        return z[op.cols - 1 : op.cols - 1 + op.rows]


def build_operator(stream, N: int, s: int) -> ToeplitzOperator:
    """Toeplitz operator of Algorithm-1 shape from the first ``N + s - 1`` draws.

    ``stream`` is a :class:`~toeplitz_mc.sampling.SampleStream` or any 1-D
    array of values.
    """
    values = np.asarray(getattr(stream, "values", stream), dtype=np.float64)
    if N < 1 or s < 1:
        raise ValueError(f"need N, s >= 1, got N={N}, s={s}")
    need = N + s - 1
    if values.size < need:
        raise ValueError(f"stream holds {values.size} values, need N + s - 1 = {need}")
    return ToeplitzOperator(values[:need], N, s)


def naive_matvec(op: ToeplitzOperator, a) -> np.ndarray:
    """Direct O(N s) product, row by row from the indexing rule."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (op.cols,):
        raise ValueError(f"vector of length {op.cols} expected, got shape {a.shape}")
    g = op.generating
    s = op.cols
    out = np.empty(op.rows)
    for n in range(op.rows):
        out[n] = np.dot(g[n : n + s][::-1], a)
    return out


def _check_matrix(op: ToeplitzOperator, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != op.cols:
        raise ValueError(f"matrix with {op.cols} rows expected, got shape {A.shape}")
    return A


def _block_products(windows: np.ndarray, fat: np.ndarray, length: int, s: int, h: int) -> np.ndarray:
    """Products of a stack of Toeplitz blocks with a shared transformed matrix.

    ``windows`` is ``(B, h + s - 1)``: one generating sequence per block.
    ``fat`` is the real FFT of ``A.T`` along its rows, ``(t, length//2 + 1)``;
    transforms run along contiguous axes.  Returns ``(B * h, t)``.
    """
    nb = windows.shape[0]
    t = fat.shape[0]
    out = np.empty((nb * h, t))
    per_block = fat.size
    chunk = max(1, _CHUNK_ELEMS // max(per_block, 1))
    for b0 in range(0, nb, chunk):
        w = windows[b0 : b0 + chunk]
        spec = scipy.fft.rfft(w, n=length, axis=1)
        z = scipy.fft.irfft(spec[:, None, :] * fat[None, :, :], n=length, axis=2)
        blk = z[:, :, s - 1 : s - 1 + h]  # (B, t, h)
        out[b0 * h : (b0 + w.shape[0]) * h] = blk.transpose(0, 2, 1).reshape(-1, t)
    return out


def _transformed_factor(A: np.ndarray, length: int) -> np.ndarray:
    return scipy.fft.rfft(np.ascontiguousarray(A.T), n=length, axis=1)


def _layout(op: ToeplitzOperator) -> tuple[int, int]:
    h = min(op.rows, op.cols)
    return h, next_pow2(h + op.cols - 1)


def fast_matmat(op: ToeplitzOperator, A) -> np.ndarray:
    """``op @ A`` via circulant embedding, one row block of height ``s`` at a time.

    All blocks share one embedding length and one transform of ``A``.  When
    ``N`` is not a multiple of ``s`` the last block is a shorter slice.
    """
    A = _check_matrix(op, A)
    N, s = op.shape
    g = op.generating
    if s == 1:
        # X is the column g itself
        return g[:, None] * A[0][None, :]
    h, length = _layout(op)
    fa = _transformed_factor(A, length)
    nfull, rem = divmod(N, h)
    windows = sliding_window_view(g, h + s - 1)[::h][:nfull]
    out = np.empty((N, A.shape[1]))
    out[: nfull * h] = _block_products(windows, fa, length, s, h)
    if rem:
        tail = g[nfull * h :][None, :]
        out[nfull * h :] = _block_products(tail, fa, length, s, rem)
    return out


def fast_matvec(op: ToeplitzOperator, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (op.cols,):
        raise ValueError(f"vector of length {op.cols} expected, got shape {a.shape}")
    return fast_matmat(op, a[:, None])[:, 0]


def block_matmat(stream, L: int, s: int, A, workers: int = 1) -> np.ndarray:
    """``X A`` for ``N = L s`` as ``L`` independent block products ``X_l A``.

    Each task handles one ``s x s`` block and keeps only ``O(s t)`` values
    in flight.  The output is bit-identical to :func:`fast_matmat` on the
    full operator for any ``workers``.
    """
    if L < 1:
        raise ValueError(f"need L >= 1, got {L}")
    op = build_operator(stream, L * s, s)
    A = _check_matrix(op, A)
    if s == 1:
        return fast_matmat(op, A)
    h, length = _layout(op)
    fa = _transformed_factor(A, length)
    g = op.generating
    out = np.empty((L * s, A.shape[1]))

    def task(ell: int) -> None:
        w = g[ell * s : ell * s + 2 * s - 1][None, :]
        out[ell * s : (ell + 1) * s] = _block_products(w, fa, length, s, s)

    if workers <= 1:
        for ell in range(L):
            task(ell)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(task, range(L)))
    return out


def dense_matmat(X, A, batch: int = 1) -> np.ndarray:
    """Plain ``X @ A`` for an explicit sample matrix, ``batch`` rows per product.

    ``batch=1`` is the standard MC cost model: each sample's ``x_n A`` is
    formed on its own, with O(t) extra memory per sample.
    """
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if X.ndim != 2 or A.ndim != 2 or X.shape[1] != A.shape[0]:
        raise ValueError(f"shape mismatch {X.shape} @ {A.shape}")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    out = np.empty((X.shape[0], A.shape[1]))
    if batch == 1:
        for n in range(X.shape[0]):
            out[n] = X[n] @ A
    else:
        for n0 in range(0, X.shape[0], batch):
            out[n0 : n0 + batch] = X[n0 : n0 + batch] @ A
    return out
