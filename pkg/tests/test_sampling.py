import mpmath
import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtri

from toeplitz_mc.sampling import (
    Law,
    TriangularFactor,
    generate_mvn,
    make_stream,
    normal_inverse_cdf,
    random_upper_factor,
    stream_state,
    uniform_draws,
)


def test_stream_determinism_and_separation():
    a = make_stream(7, 0, Law.UNIFORM, 3)
    b = make_stream(7, 0, Law.UNIFORM, 3)
    np.testing.assert_array_equal(a.values, b.values)
    c = make_stream(7, 1, Law.UNIFORM, 3)
    assert not np.array_equal(a.values, c.values)
    d = make_stream(8, 0, Law.UNIFORM, 3)
    assert not np.array_equal(a.values, d.values)
    assert len(a) == 3 and a.seed == 7 and a.law is Law.UNIFORM


def test_prefix_property_and_laws_share_uniforms():
    long = make_stream(5, 2, Law.UNIFORM, 1000).values
    short = make_stream(5, 2, Law.UNIFORM, 10).values
    np.testing.assert_array_equal(long[:10], short)
    centered = make_stream(5, 2, Law.UNIFORM_CENTERED, 10).values
    np.testing.assert_array_equal(centered, short - 0.5)
    normal = make_stream(5, 2, Law.NORMAL, 10).values
    np.testing.assert_allclose(normal, ndtri(short), atol=1e-12)


def test_stream_values_are_read_only():
    s = make_stream(1, 0, "normal", 4)
    with pytest.raises(ValueError):
        s.values[0] = 1.0


def test_empty_stream():
    assert len(make_stream(1, 0, Law.NORMAL, 0)) == 0


def test_stream_state_derivation():
    st = stream_state(123, 4)
    assert st.dtype == np.uint64 and st.shape == (4,) and np.any(st != 0)
    assert not np.array_equal(st, stream_state(123, 5))
    with pytest.raises(ValueError):
        stream_state(1, -1)


def test_xoshiro_reference_values():
    # xoshiro256** from a fixed state, checked against a plain-python implementation
    mask = (1 << 64) - 1
    state = [int(v) for v in stream_state(42, 0)]

    def rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & mask

    ref = []
    s0, s1, s2, s3 = state
    for _ in range(20):
        r = (rotl((s1 * 5) & mask, 7) * 9) & mask
        t = (s1 << 17) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = rotl(s3, 45)
        ref.append(((r >> 11) + 0.5) * 2.0 ** -53)
    np.testing.assert_array_equal(uniform_draws(42, 0, 20), ref)


def test_uniform_moments_clt():
    x = make_stream(11, 0, Law.UNIFORM_CENTERED, 10**6).values
    assert abs(x.mean()) <= 4 * (1 / np.sqrt(12)) / 1e3
    assert abs(x.var() - 1 / 12) <= 4 * np.sqrt(1 / 180) / 1e3
    assert x.min() > -0.5 and x.max() < 0.5


def test_inverse_cdf_examples():
    assert normal_inverse_cdf(0.5) == 0.0
    assert abs(normal_inverse_cdf(0.975) - 1.959964) <= 1e-6
    for bad in (0.0, 1.0, -0.1, 1.5, np.nan):
        with pytest.raises(ValueError):
            normal_inverse_cdf(bad)
    with pytest.raises(ValueError):
        normal_inverse_cdf(np.array([0.2, 1.0]))


def test_inverse_cdf_against_high_precision():
    rng = np.random.default_rng(0)
    us = np.concatenate([rng.uniform(size=200), 10.0 ** -rng.uniform(1, 15, size=100),
                         1 - 10.0 ** -rng.uniform(1, 15, size=100), [1e-300, 0.02425, 0.97575]])
    us = us[(us > 0) & (us < 1)]
    got = normal_inverse_cdf(us)
    for u, g in zip(us, got):
        # enough digits to resolve 2u - 1 in the far tails
        with mpmath.workdps(30 + int(-np.log10(min(u, 1 - u)))):
            ref = float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(u) - 1))
        assert abs(g - ref) < 1e-9, u


def test_inverse_cdf_antisymmetry():
    u = np.random.default_rng(1).uniform(1e-12, 1 - 1e-12, size=10000)
    np.testing.assert_allclose(normal_inverse_cdf(1 - u), -normal_inverse_cdf(u), atol=1e-9)


def test_normal_ks_over_seeds():
    crit = 1.63 / np.sqrt(10**5)  # asymptotic 1% critical value
    passed = 0
    for seed in range(100):
        x = make_stream(seed, 0, Law.NORMAL, 10**5).values
        passed += stats.kstest(x, "norm").statistic < crit
    assert passed >= 95


def test_triangular_factor_validation():
    with pytest.raises(ValueError):
        TriangularFactor(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        TriangularFactor(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        TriangularFactor(np.ones((2, 3)))


def test_random_upper_factor():
    f1 = random_upper_factor(1, 3)
    assert f1.entries.shape == (1, 1) and f1.entries[0, 0] > 0
    f3 = random_upper_factor(3, 3)
    assert np.all(np.tril(f3.entries, -1) == 0)
    assert np.all(np.diag(f3.entries) >= 0.1)
    np.testing.assert_array_equal(f3.entries, random_upper_factor(3, 3).entries)
    f = random_upper_factor(50, 9)
    np.linalg.cholesky(f.covariance)
    np.testing.assert_allclose(f.covariance, f.covariance.T)
    with pytest.raises(ValueError):
        random_upper_factor(0, 1)


def test_mvn_identity_factor_gives_windows():
    f = TriangularFactor(np.eye(4))
    Y = generate_mvn("TMC", np.zeros(4), f, 10, 5)
    x = make_stream(5, 0, Law.NORMAL, 13).values
    for n in range(10):
        np.testing.assert_allclose(Y[n], x[n : n + 4][::-1], atol=1e-14)
    Ymc = generate_mvn("MC", np.zeros(4), f, 10, 5)
    np.testing.assert_array_equal(Ymc, make_stream(5, 0, Law.NORMAL, 40).values.reshape(10, 4))
    with pytest.raises(ValueError):
        generate_mvn("QMC", 0, f, 2, 1)


def test_mvn_covariance_tmc():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    Y = generate_mvn("TMC", np.zeros(2), TriangularFactor(A), 10**5, 21)
    np.testing.assert_allclose(np.cov(Y.T), [[1, 1], [1, 2]], atol=0.05)


def test_mvn_column_means():
    A = np.array([[1.0, 0.5, -0.3], [0.0, 2.0, 0.1], [0.0, 0.0, 0.7]])
    mu = np.array([1.0, -2.0, 0.5])
    f = TriangularFactor(A)
    N = 20000
    sd = np.sqrt(np.diag(f.covariance))
    for method in ("MC", "TMC"):
        Y = generate_mvn(method, mu, f, N, 4)
        # TMC rows are 2-dependent, so inflate the CLT bound by sqrt(2s - 1)
        bound = 4 * sd / np.sqrt(N) * (np.sqrt(5) if method == "TMC" else 1)
        assert np.all(np.abs(Y.mean(axis=0) - mu) <= bound)


def test_mvn_per_row_law_over_replications():
    A = np.array([[1.0, 0.5, -0.3], [0.0, 2.0, 0.1], [0.0, 0.0, 0.7]])
    f = TriangularFactor(A)
    R, N = 6000, 5
    Ys = np.stack([generate_mvn("TMC", np.zeros(3), f, N, 17, r) for r in range(R)])  # (R, N, 3)
    sigma = f.covariance
    for n in range(N):
        rows = Ys[:, n, :]
        assert np.all(np.abs(rows.mean(axis=0)) <= 4 * np.sqrt(np.diag(sigma) / R))
        np.testing.assert_allclose(np.cov(rows.T), sigma, atol=0.15)
