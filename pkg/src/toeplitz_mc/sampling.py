"""Seeded scalar sample streams, inverse normal CDF, and MVN point generation.

Streams come from xoshiro256** whose 256-bit state is filled by splitmix64.
The splitmix64 seed for replication ``stream_index`` of master ``seed`` is::

    seed XOR mix64((stream_index + 1) * 0x9E3779B97F4A7C15)

where ``mix64`` is the splitmix64 output finalizer.  Each 64-bit output
``r`` becomes the open-interval uniform ``((r >> 11) + 0.5) * 2**-53``.
Normals are the inverse normal CDF of those uniforms, one uniform per draw,
so MC and TMC consume streams identically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

from .toeplitz import build_operator, dense_matmat, fast_matmat

__all__ = [
    "Law",
    "SampleStream",
    "TriangularFactor",
    "make_stream",
    "uniform_draws",
    "normal_inverse_cdf",
    "random_upper_factor",
    "generate_mvn",
]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Law(str, enum.Enum):
    """Univariate sampling laws for scalar streams."""

    UNIFORM_CENTERED = "uniform_centered"  # U(-1/2, 1/2)
    UNIFORM = "uniform"  # U(0, 1)
    NORMAL = "normal"  # N(0, 1)


# stream index reserved for random factors
FACTOR_STREAM_INDEX = (1 << 62) + 1


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _splitmix64(state: int, count: int) -> list[int]:
    out = []
    for _ in range(count):
        state = (state + _GOLDEN) & _MASK
        out.append(_mix64(state))
    return out


def stream_state(seed: int, stream_index: int) -> np.ndarray:
    """xoshiro256** state for ``(seed, stream_index)``."""
    if stream_index < 0:
        raise ValueError("stream_index must be >= 0")
    sm = (int(seed) & _MASK) ^ _mix64(((stream_index + 1) * _GOLDEN) & _MASK)
    state = _splitmix64(sm, 4)
    if not any(state):
        state[0] = _GOLDEN
    return np.array(state, dtype=np.uint64)


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True, nogil=True)
def _xoshiro_uniform(state, count):
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    out = np.empty(count, dtype=np.float64)
    scale = 1.0 / 9007199254740992.0  # 2**-53
    for i in range(count):
        r = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        out[i] = (np.float64(r >> np.uint64(11)) + 0.5) * scale
    return out


def uniform_draws(seed: int, stream_index: int, count: int) -> np.ndarray:
    """``count`` U(0,1) draws, never exactly 0 or 1."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return _xoshiro_uniform(stream_state(seed, stream_index), int(count))


# AS241 (PPND16) coefficients
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coefs, x):
    acc = np.full_like(x, coefs[-1])
    for c in coefs[-2::-1]:
        acc = acc * x + c
    return acc


def normal_inverse_cdf(u):
    """Standard normal quantile by Wichura's AS241 rational approximations.

    Accepts a scalar or an array; every value must lie strictly in (0, 1).
    Absolute error is around 1e-15 over the double range.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(~((u_arr > 0.0) & (u_arr < 1.0))):
        raise ValueError("normal_inverse_cdf is defined on the open interval (0, 1)")
    q = u_arr - 0.5
    out = np.empty_like(q)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.sqrt(-np.log(np.minimum(u_arr[tail], 1.0 - u_arr[tail])))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)

    if np.ndim(u) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SampleStream:
    """``len(values)`` i.i.d. draws of ``law``, reproducible from ``(seed, stream_index)``."""

    seed: int
    law: Law
    values: np.ndarray
    stream_index: int = 0

    def __len__(self) -> int:
        return self.values.size


def make_stream(seed: int, stream_index: int, law: Law | str, count: int) -> SampleStream:
    law = Law(law)
    u = uniform_draws(seed, stream_index, count)
    if law is Law.UNIFORM:
        values = u
    elif law is Law.UNIFORM_CENTERED:
        values = u - 0.5
    else:
        values = normal_inverse_cdf(u) if count else u
    values.setflags(write=False)
    return SampleStream(int(seed), law, values, int(stream_index))


@dataclass(frozen=True)
class TriangularFactor:
    """Upper-triangular ``s x s`` factor ``A`` with positive diagonal, ``Sigma = A^T A``."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("factor must be square")
        if np.any(np.tril(a, -1) != 0.0):
            raise ValueError("factor must be upper triangular")
        if np.any(np.diag(a) <= 0.0):
            raise ValueError("factor diagonal must be strictly positive")
        object.__setattr__(self, "entries", a)

    @property
    def s(self) -> int:
        return self.entries.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.entries.T @ self.entries


def random_upper_factor(s: int, seed: int) -> TriangularFactor:
    """Strict upper part N(0,1), diagonal |N(0,1)| + 0.1.

    Drawn from a reserved stream index so the factor never shares draws
    with sample streams of the same seed.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    z = make_stream(seed, FACTOR_STREAM_INDEX, Law.NORMAL, s * s).values.reshape(s, s)
    a = np.triu(z, 1)
    a[np.diag_indices(s)] = np.abs(np.diag(z)) + 0.1
    return TriangularFactor(a)


def generate_mvn(method: str, mu, factor: TriangularFactor, N: int, seed: int,
                 stream_index: int = 0) -> np.ndarray:
    """``N`` points of ``N(mu, A^T A)`` as rows of an ``N x s`` array.

    ``"MC"`` uses ``N*s`` fresh normals and a dense sample-by-sample product;
    ``"TMC"`` uses ``N + s - 1`` normals arranged as a Toeplitz matrix.
    """
    A = factor.entries
    s = factor.s
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (s,))
    method = method.upper()
    if method == "MC":
        x = make_stream(seed, stream_index, Law.NORMAL, N * s).values.reshape(N, s)
        return mu + dense_matmat(x, A)
    if method == "TMC":
        stream = make_stream(seed, stream_index, Law.NORMAL, N + s - 1)
        return mu + fast_matmat(build_operator(stream, N, s), A)
    raise ValueError(f"unknown method {method!r}")
