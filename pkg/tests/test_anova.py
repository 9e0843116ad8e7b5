import itertools
import math

import numpy as np
import pytest

from toeplitz_mc.anova import (
    MAX_ENUMERATION_BITS,
    alpha,
    anova_decompose,
    corollary_bound,
    cross_term,
    enumerate_variance_exact,
    gauss_hermite_law,
    gauss_legendre_law,
    mc_variance,
    multilinear_integrand,
    nodes_for_degree,
    random_multilinear,
    subsets,
    tmc_variance_theorem,
    two_point_law,
)
from toeplitz_mc.estimators import Integrand
from toeplitz_mc.sampling import Law

EXAMPLE = {(0,): 1, (1,): -1, (2,): -1, (0, 1): 1, (0, 2): -1, (1, 2): -1}


@pytest.fixture(scope="module")
def example():
    return anova_decompose(multilinear_integrand(3, EXAMPLE), 3, gauss_hermite_law(4))


def test_laws():
    for law in (gauss_hermite_law(5), gauss_legendre_law(5), two_point_law()):
        assert law.weights.sum() == pytest.approx(1.0, abs=1e-14)
    gh = gauss_hermite_law(5)
    assert np.dot(gh.weights, gh.nodes ** 2) == pytest.approx(1.0, abs=1e-13)
    assert np.dot(gh.weights, gh.nodes ** 4) == pytest.approx(3.0, abs=1e-12)
    gl = gauss_legendre_law(4)
    assert np.dot(gl.weights, gl.nodes ** 2) == pytest.approx(1 / 12, abs=1e-15)
    assert np.all(np.abs(gl.nodes) < 0.5)
    assert nodes_for_degree(1) == 3 and nodes_for_degree(2) == 4 and nodes_for_degree(4) == 5


def test_subsets_order():
    assert list(subsets(2)) == [(), (0,), (1,), (0, 1)]
    assert len(list(subsets(5))) == 32


def test_example_effects(example):
    nodes = example.law.nodes
    x = nodes
    expect = {
        (0,): x, (1,): -x, (2,): -x,
        (0, 1): np.outer(x, x), (0, 2): -np.outer(x, x), (1, 2): -np.outer(x, x),
    }
    for u, ref in expect.items():
        np.testing.assert_allclose(example.effect_on(u), ref, atol=1e-12)
    np.testing.assert_allclose(example.effect_on((0, 1, 2)), 0.0, atol=1e-12)
    assert example.mean == pytest.approx(0.0, abs=1e-14)
    for u, m in example.second_moments.items():
        target = 0.0 if len(u) in (0, 3) else 1.0
        assert m == pytest.approx(target, abs=1e-12), u


def test_constant_and_singleton():
    dec = anova_decompose(Integrand(3, func=lambda x: np.full(x.shape[0], 4.0)), 3, gauss_legendre_law(3))
    assert dec.mean == pytest.approx(4.0)
    assert all(abs(m) < 1e-24 for u, m in dec.second_moments.items() if u)
    assert mc_variance(dec, 5) == pytest.approx(0.0, abs=1e-24)
    assert corollary_bound(dec, 5) == pytest.approx(0.0, abs=1e-12)
    assert all(alpha(dec, l) == pytest.approx(0.0, abs=1e-12) for l in (1, 2, 3))

    dec = anova_decompose(multilinear_integrand(2, {(0,): 1}), 2, two_point_law())
    np.testing.assert_array_equal(dec.effect_on((0,)), [-1, 1])
    np.testing.assert_array_equal(dec.effect_on((1,)), [0, 0])
    np.testing.assert_array_equal(dec.effect_on((0, 1)), np.zeros((2, 2)))


def _random_polynomial(s, deg, rng):
    exps = rng.integers(0, deg + 1, size=(6, s))
    coefs = rng.standard_normal(6)

    def f(x):
        return sum(c * np.prod(x ** e, axis=1) for c, e in zip(coefs, exps))

    return Integrand(s, func=f)


@pytest.mark.parametrize("law_name", ["normal", "uniform", "two_point"])
def test_effect_identities(law_name):
    rng = np.random.default_rng({"normal": 1, "uniform": 2, "two_point": 3}[law_name])
    s, deg = 4, 3
    q = nodes_for_degree(2 * deg)
    law = {"normal": gauss_hermite_law(q), "uniform": gauss_legendre_law(q), "two_point": two_point_law()}[law_name]
    f = _random_polynomial(s, deg, rng)
    dec = anova_decompose(f, s, law)
    w = law.weights
    for u in subsets(s):
        if not u:
            continue
        e = dec.effect_on(u)
        # zero marginals along each coordinate of u
        for k in range(len(u)):
            marg = np.tensordot(e, w, axes=([k], [0]))
            assert np.max(np.abs(marg)) < 1e-10
    # orthogonality
    for u, v in itertools.combinations(list(subsets(s)), 2):
        prod = dec.effects[u] * dec.effects[v]
        ip = _weighted_sum(prod, law)
        assert abs(ip) < 1e-10, (u, v)
    recon = sum(dec.effects.values())
    np.testing.assert_allclose(np.broadcast_to(recon, dec.values.shape), dec.values, atol=1e-10)
    total = math.fsum(m for u, m in dec.second_moments.items() if u)
    assert total == pytest.approx(dec.variance, abs=1e-9)


def _weighted_sum(arr, law):
    arr = np.broadcast_to(arr, arr.shape)
    out = arr
    for ax in reversed(range(arr.ndim)):
        out = np.tensordot(out, law.weights, axes=([ax], [0])) if out.shape[ax] > 1 else out.sum(axis=ax)
    return float(out)


def test_mc_variance_examples(example):
    for N in (1, 3, 10, 1000):
        assert mc_variance(example, N) == pytest.approx(6 / N, abs=1e-12)
    s = 5
    dec = anova_decompose(multilinear_integrand(s, {(j,): 1 for j in range(s)}), s, gauss_hermite_law(3))
    assert mc_variance(dec, 7) == pytest.approx(s / 7, abs=1e-12)
    with pytest.raises(ValueError):
        mc_variance(dec, 0)


def test_cross_terms(example):
    assert cross_term(example, [1], 2) == pytest.approx(-1.0, abs=1e-12)
    assert cross_term(example, [1, 2], 1) == pytest.approx(-1.0, abs=1e-12)
    assert cross_term(example, [1], 1) == pytest.approx(-1.0, abs=1e-12)
    assert cross_term(example, [2], 1) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        cross_term(example, [3], 1)
    with pytest.raises(ValueError):
        cross_term(example, [], 1)
    with pytest.raises(ValueError):
        cross_term(example, [0], 1)


def test_cross_term_zero_effect():
    dec = anova_decompose(multilinear_integrand(3, {(0,): 1, (2,): 2}), 3, gauss_hermite_law(3))
    assert cross_term(dec, [1], 1) == pytest.approx(0.0, abs=1e-14)


def test_tmc_variance_examples(example):
    for N in (3, 4, 5, 16, 100):
        rep = tmc_variance_theorem(example, N)
        assert rep.v_tmc == pytest.approx(2 / N + 6 / N ** 2, abs=1e-12)
        assert rep.v_mc == pytest.approx(6 / N, abs=1e-12)
        assert rep.v_tmc == pytest.approx(rep.v_mc + 2 * rep.cross_sum / N ** 2, abs=1e-14)
    assert tmc_variance_theorem(example, 4).v_tmc == pytest.approx(0.875, abs=1e-12)

    one = anova_decompose(multilinear_integrand(3, {(0,): 1}), 3, gauss_hermite_law(3))
    rep = tmc_variance_theorem(one, 9)
    assert rep.v_tmc == pytest.approx(rep.v_mc, abs=1e-14)

    add2 = anova_decompose(multilinear_integrand(2, {(0,): 1, (1,): 1}), 2, gauss_hermite_law(3))
    assert tmc_variance_theorem(add2, 4).v_tmc == pytest.approx(0.875, abs=1e-12)


def test_tmc_variance_matches_window_covariance():
    # independent oracle: Var of the window mean from the covariance of f at lags
    rng = np.random.default_rng(5)
    s, N = 3, 6
    f = random_multilinear(s, rng)
    dec = anova_decompose(f, s, two_point_law())
    streams = np.array(list(itertools.product([-1.0, 1.0], repeat=2 * s - 1)))
    vals = f(streams[:, s - 1 : 2 * s - 1][:, ::-1])
    cov = []
    for lag in range(s):
        a = f(streams[:, s - 1 : 2 * s - 1][:, ::-1])
        b = f(streams[:, s - 1 - lag : 2 * s - 1 - lag][:, ::-1])
        cov.append(np.mean(a * b) - np.mean(a) * np.mean(b))
    v = (cov[0] * N + 2 * sum((N - l) * cov[l] for l in range(1, s))) / N ** 2
    assert tmc_variance_theorem(dec, N).v_tmc == pytest.approx(v, abs=1e-12)
    assert np.var(vals) == pytest.approx(cov[0])


def test_alpha_and_bound(example):
    assert alpha(example, 1) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert alpha(example, 2) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert alpha(example, 3) == pytest.approx(1.0, abs=1e-12)
    assert corollary_bound(example, 4) == pytest.approx((math.sqrt(3) + math.sqrt(2) + 1) ** 2 / 4, abs=1e-12)
    assert corollary_bound(example, 4) == pytest.approx(4.298, abs=1e-3)
    with pytest.raises(ValueError):
        alpha(example, 0)
    with pytest.raises(ValueError):
        alpha(example, 4)


def test_additive_equal_alphas():
    s = 4
    dec = anova_decompose(multilinear_integrand(s, {(j,): 1 for j in range(s)}), s, gauss_hermite_law(3))
    for l in range(1, s + 1):
        assert alpha(dec, l) == pytest.approx(1.0, abs=1e-12)
    assert corollary_bound(dec, 10) == pytest.approx(s ** 2 / 10, abs=1e-12)
    ratios = [tmc_variance_theorem(dec, N).v_tmc / mc_variance(dec, N) for N in (10, 100, 10000)]
    assert ratios[0] < ratios[1] < ratios[2] < s
    assert ratios[2] == pytest.approx(s, rel=1e-3)


def test_bound_chain_corpus():
    rng = np.random.default_rng(11)
    for trial in range(30):
        s = int(rng.integers(1, 6))
        law = [gauss_hermite_law(4), gauss_legendre_law(4), two_point_law()][trial % 3]
        f = random_multilinear(s, rng) if trial % 2 else _random_polynomial(s, 2, rng)
        if trial % 2 == 0 and law.size < 4:
            continue
        dec = anova_decompose(f, s, law)
        for N in (1, 2, 3, 7, 50):
            v = tmc_variance_theorem(dec, N).v_tmc
            assert -1e-12 <= v <= corollary_bound(dec, N) + 1e-12
            if mc_variance(dec, N) > 1e-12:
                assert v / mc_variance(dec, N) <= s + 1e-9


def test_enumeration_examples():
    f = multilinear_integrand(2, {(0, 1): 1}, Law.NORMAL)
    v_mc, v_tmc = enumerate_variance_exact(f, 2, 2)
    assert v_mc == pytest.approx(0.5, abs=1e-15) and v_tmc == pytest.approx(0.5, abs=1e-15)
    c = Integrand(3, func=lambda x: np.full(x.shape[0], 2.0))
    assert enumerate_variance_exact(c, 3, 3) == (0.0, 0.0)
    g = multilinear_integrand(2, {(0,): 1, (1,): 1, (0, 1): 1})
    dec = anova_decompose(g, 2, two_point_law())
    v_mc, v_tmc = enumerate_variance_exact(g, 3, 2)
    assert v_mc == pytest.approx(mc_variance(dec, 3), abs=1e-12)
    assert v_tmc == pytest.approx(tmc_variance_theorem(dec, 3).v_tmc, abs=1e-12)
    with pytest.raises(ValueError):
        enumerate_variance_exact(g, MAX_ENUMERATION_BITS, 2)


@pytest.mark.parametrize("N,s", [(2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (1, 3)])
def test_enumeration_matches_formula(N, s):
    rng = np.random.default_rng(100 * N + s)
    for _ in range(20):
        f = random_multilinear(s, rng)
        dec = anova_decompose(f, s, two_point_law())
        v_mc, v_tmc = enumerate_variance_exact(f, N, s)
        assert abs(v_mc - mc_variance(dec, N)) <= 1e-12
        assert abs(v_tmc - tmc_variance_theorem(dec, N).v_tmc) <= 1e-12


def test_grid_cap():
    with pytest.raises(ValueError):
        anova_decompose(multilinear_integrand(12, {(0,): 1}), 12, gauss_hermite_law(4))
    with pytest.raises(ValueError):
        anova_decompose(multilinear_integrand(1, {(0,): 1}), 0, two_point_law())
