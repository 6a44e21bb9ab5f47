import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from mdwelfare.errors import DomainError, ParameterError
from mdwelfare.margins import (
    BetaMixture,
    GammaMixture,
    OrdinalModel,
    marginal_mean,
    marginal_quantile,
    mixture_cdf,
    mixture_pdf,
    ordinal_category_probs,
)


@st.composite
def gamma_mixtures(draw):
    k = draw(st.integers(1, 3))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    mu = draw(st.lists(st.floats(0.5, 50.0), min_size=k, max_size=k, unique=True))
    nu = draw(st.lists(st.floats(0.8, 20.0), min_size=k, max_size=k))
    return GammaMixture(w / w.sum(), mu, nu)


@st.composite
def beta_mixtures(draw):
    k = draw(st.integers(1, 3))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    s = draw(st.lists(st.floats(1.5, 40.0), min_size=k, max_size=k))
    m = draw(st.lists(st.floats(0.1, 0.9), min_size=k, max_size=k, unique=True))
    return BetaMixture(w / w.sum(), s, m)


def test_exponential_special_case():
    g = GammaMixture([1.0], [1.0], [1.0])
    assert mixture_pdf(1.0, g) == pytest.approx(np.exp(-1), abs=1e-12)
    assert mixture_cdf(1.0, g) == pytest.approx(1 - np.exp(-1), abs=1e-12)
    assert marginal_quantile(0.5, g) == pytest.approx(np.log(2), abs=1e-10)
    assert mixture_cdf(0.0, g) == 0.0


def test_uniform_beta():
    b = BetaMixture([1.0], [2.0], [0.5])
    y = np.linspace(0.01, 0.99, 17)
    np.testing.assert_allclose(mixture_pdf(y, b), 1.0, atol=1e-12)
    np.testing.assert_allclose(mixture_cdf(y, b), y, atol=1e-12)


def test_degenerate_mixture_matches_single_component():
    one = GammaMixture([1.0], [3.0], [2.5])
    two = GammaMixture([0.5, 0.5], [3.0, 3.0], [2.5, 2.5])
    y = np.linspace(0.1, 20, 50)
    np.testing.assert_allclose(mixture_pdf(y, two), mixture_pdf(y, one), rtol=1e-13)


def test_gamma_matches_scipy():
    g = GammaMixture([0.3, 0.7], [20000, 60000], [3, 5])
    y = np.geomspace(1000, 300000, 40)
    ref = 0.3 * stats.gamma.pdf(y, 3, scale=20000 / 3) + 0.7 * stats.gamma.pdf(y, 5, scale=60000 / 5)
    np.testing.assert_allclose(mixture_pdf(y, g), ref, rtol=1e-10)


def test_components_sorted_by_mean():
    g = GammaMixture([0.2, 0.8], [50.0, 10.0], [2.0, 3.0])
    np.testing.assert_array_equal(g.means, [10.0, 50.0])
    np.testing.assert_array_equal(g.weights, [0.8, 0.2])
    np.testing.assert_array_equal(g.shapes, [3.0, 2.0])
    b = BetaMixture([0.4, 0.6], [5.0, 9.0], [0.7, 0.2])
    np.testing.assert_array_equal(b.means, [0.2, 0.7])
    np.testing.assert_array_equal(b.precisions, [9.0, 5.0])


@pytest.mark.parametrize("bad", [
    dict(weights=[0.5, 0.6], means=[1, 2], shapes=[1, 1]),
    dict(weights=[1.0], means=[-1.0], shapes=[1.0]),
    dict(weights=[1.0], means=[1.0], shapes=[0.0]),
    dict(weights=[0.5, 0.5], means=[1.0], shapes=[1.0]),
])
def test_gamma_invalid_parameters(bad):
    with pytest.raises(ParameterError):
        GammaMixture(**bad)


def test_beta_invalid_means():
    with pytest.raises(ParameterError):
        BetaMixture([1.0], [2.0], [1.0])


def test_domain_errors():
    g = GammaMixture([1.0], [1.0], [1.0])
    b = BetaMixture([1.0], [2.0], [0.5])
    with pytest.raises(DomainError):
        mixture_pdf(0.0, g)
    with pytest.raises(DomainError):
        mixture_pdf(-1.0, g)
    with pytest.raises(DomainError):
        mixture_pdf(0.0, b)
    with pytest.raises(DomainError):
        mixture_pdf(1.0, b)
    with pytest.raises(DomainError):
        mixture_cdf(1.5, b)
    with pytest.raises(DomainError):
        marginal_quantile(1.0, g)


def test_pdf_integrates_to_one():
    g = GammaMixture([0.4, 0.6], [2.0, 9.0], [1.5, 6.0])
    b = BetaMixture([0.3, 0.7], [6.0, 20.0], [0.3, 0.7])
    assert integrate.quad(lambda y: mixture_pdf(y, g), 0, np.inf, limit=200)[0] == pytest.approx(1, abs=1e-6)
    assert integrate.quad(lambda y: mixture_pdf(y, b), 0, 1, limit=200)[0] == pytest.approx(1, abs=1e-6)


def test_cdf_matches_integrated_pdf(rng):
    g = GammaMixture([0.5, 0.5], [1.0, 5.0], [2.0, 4.0])
    b = BetaMixture([0.6, 0.4], [4.0, 12.0], [0.35, 0.8])
    for m, ys in ((g, rng.uniform(0.05, 12, 10)), (b, rng.uniform(0.02, 0.98, 10))):
        for y in ys:
            ref = integrate.quad(lambda t: mixture_pdf(t, m), 0, y, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
            assert mixture_cdf(y, m) == pytest.approx(ref, abs=1e-8)


def test_ordinal_examples():
    np.testing.assert_allclose(ordinal_category_probs(OrdinalModel([0.0])), [0.5, 0.5], atol=1e-15)
    p = ordinal_category_probs(OrdinalModel([-1.6448536, -0.5, 0.5, 1.6448536]))
    assert p[0] == pytest.approx(0.05, abs=1e-7)
    assert p[4] == pytest.approx(0.05, abs=1e-7)
    assert marginal_quantile(0.25, OrdinalModel([0.0])) == 1


def test_ordinal_invalid():
    with pytest.raises(ParameterError):
        OrdinalModel([0.5, 0.5])
    with pytest.raises(ParameterError):
        OrdinalModel([])


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6, unique=True))
def test_ordinal_probs_simplex(tau):
    tau = np.sort(tau)
    if np.any(np.diff(tau) < 1e-3):
        return
    p = ordinal_category_probs(OrdinalModel(tau))
    assert p.size == tau.size + 1
    assert np.all((p > 0) & (p < 1))
    assert abs(p.sum() - 1) <= 1e-12


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=4, unique=True), st.floats(0.01, 0.5))
def test_ordinal_shift_changes_probs(tau, shift):
    tau = np.sort(tau)
    if np.any(np.diff(tau) < 1e-3):
        return
    a, b = OrdinalModel(tau), OrdinalModel(tau + shift)
    assert not np.allclose(a.category_probs(), b.category_probs(), atol=1e-12, rtol=0)
    np.testing.assert_array_equal(OrdinalModel(tau.copy()).category_probs(), a.category_probs())


@given(gamma_mixtures())
def test_gamma_cdf_monotone_and_bounded(g):
    y = np.geomspace(1e-3, 1e3, 200)
    f = mixture_cdf(y, g)
    assert np.all(np.diff(f) >= 0)
    assert np.all((f >= 0) & (f <= 1))
    assert np.all(mixture_pdf(y, g) >= 0)


@given(beta_mixtures())
def test_beta_cdf_monotone_and_bounded(b):
    y = np.linspace(1e-4, 1 - 1e-4, 200)
    f = mixture_cdf(y, b)
    assert np.all(np.diff(f) >= 0)
    assert np.all((f >= 0) & (f <= 1))
    assert mixture_cdf(0.0, b) == 0.0 and mixture_cdf(1.0, b) == pytest.approx(1.0, abs=1e-12)


@given(gamma_mixtures(), st.floats(1e-6, 1 - 1e-6))
def test_gamma_quantile_roundtrip(g, u):
    assert mixture_cdf(marginal_quantile(u, g), g) == pytest.approx(u, abs=1e-8)


@given(beta_mixtures(), st.floats(1e-6, 1 - 1e-6))
def test_beta_quantile_roundtrip(b, u):
    assert mixture_cdf(marginal_quantile(u, b), b) == pytest.approx(u, abs=1e-8)


def test_quantile_roundtrip_many(rng):
    g = GammaMixture([0.6, 0.4], [25000, 60000], [3, 5])
    u = rng.uniform(size=1000)
    np.testing.assert_allclose(mixture_cdf(marginal_quantile(u, g), g), u, atol=1e-10)


@pytest.mark.parametrize("m, upper", [
    (GammaMixture([0.4, 0.6], [2.0, 9.0], [1.5, 6.0]), np.inf),
    (BetaMixture([0.3, 0.7], [6.0, 20.0], [0.3, 0.7]), 1.0),
])
def test_mean_closed_form(m, upper):
    ref = integrate.quad(lambda y: y * mixture_pdf(y, m), 0, upper, limit=200)[0]
    assert marginal_mean(m) == pytest.approx(ref, abs=1e-6)


def test_ordinal_mean():
    o = OrdinalModel([-1.0, -0.2, 0.5, 1.3])
    assert marginal_mean(o) == pytest.approx(np.arange(1, 6) @ o.category_probs(), abs=1e-15)
