"""
Toeplitz products with the FFT
==============================

A stream x_1, x_2, ... of i.i.d. draws, read through a sliding window of
width s, gives an N x s matrix whose n-th row is (x_{n+s-1}, ..., x_n).
Every diagonal of that matrix is constant, so products with it are
convolutions and can be done with FFTs instead of N*s multiply-adds.
"""

import time

import numpy as np

from toeplitz_mc import Law, block_matmat, build_operator, fast_matmat, fast_matvec, make_stream, naive_matvec

# a small operator, written out densely
op = build_operator(np.array([1.0, 2.0, 3.0]), 2, 2)
print(op.to_dense())
print("X @ (1, 1) =", fast_matvec(op, [1.0, 1.0]))

# a realistic one: N = 8192 windows of width s = 1024 from a normal stream
N, s = 8192, 1024
stream = make_stream(seed=1, stream_index=0, law=Law.NORMAL, count=N + s - 1)
op = build_operator(stream, N, s)
a = np.random.default_rng(0).standard_normal(s)

t0 = time.perf_counter()
slow = naive_matvec(op, a)
t_naive = time.perf_counter() - t0
t0 = time.perf_counter()
fast = fast_matvec(op, a)
t_fast = time.perf_counter() - t0
print(f"naive {t_naive:.3f}s  fft {t_fast:.4f}s  max rel err {np.max(np.abs(fast - slow)) / np.max(np.abs(slow)):.1e}")

# matrix products reuse one transform of the stream for every column of A
A = np.random.default_rng(1).standard_normal((s, 64))
Y = fast_matmat(op, A)
print("Y shape", Y.shape)

# the block form splits the rows into N/s blocks that can run on separate
# workers; the result does not depend on the worker count
L = N // s
Y1 = block_matmat(stream, L, s, A, workers=1)
Y4 = block_matmat(stream, L, s, A, workers=4)
print("blocks identical:", np.array_equal(Y1, Y4), " equal to full product:", np.array_equal(Y1, Y))
