import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdwelfare.copula import joint_cdf
from mdwelfare.dominance import PovertyLines
from mdwelfare.errors import DomainError, ParameterError
from mdwelfare.harness import make_scenario
from mdwelfare.indices import (
    DeprivationRule,
    NormalizationBenchmarks,
    NormalizationWarning,
    af_counting,
    attribute_means,
    deprivations,
    headcount,
    mwi,
    normalize_attribute,
    posterior_mean_difference,
    weighted_sample_mean,
)
from mdwelfare.sampler.types import WeightedSample

LINES = PovertyLines(20164.0, 0.5, 2, 2)


def sample(rows, weights=None):
    rows = np.asarray(rows, dtype=float)
    w = np.ones(len(rows)) if weights is None else np.asarray(weights, dtype=float)
    return WeightedSample(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], w)


@st.composite
def samples(draw, n_max=30):
    n = draw(st.integers(1, n_max))
    inc = draw(st.lists(st.floats(1000, 200000), min_size=n, max_size=n))
    hl = draw(st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n))
    ed = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    hp = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n))
    return WeightedSample(inc, hl, ed, hp, w)


def test_normalize_examples():
    b = NormalizationBenchmarks()
    assert normalize_attribute(5495.0, "income", b) == 0.0
    assert normalize_attribute(150000.0, "income", b) == pytest.approx(1.0, abs=1e-15)
    assert normalize_attribute(np.sqrt(5495.0 * 150000.0), "income", b) == pytest.approx(0.5, abs=1e-14)
    assert normalize_attribute(3, "education", b) == 0.5
    assert normalize_attribute(0.37, "health", b) == 0.37
    with pytest.raises(DomainError):
        normalize_attribute(0.0, "income", b)
    with pytest.warns(NormalizationWarning):
        assert normalize_attribute(1000.0, "income", b) == 0.0


def test_benchmarks_validation():
    with pytest.raises(ParameterError):
        NormalizationBenchmarks(income=(10.0, 5.0))
    with pytest.raises(ParameterError):
        NormalizationBenchmarks(income=(0.0, 5.0))


def test_mwi_extremes_and_enumeration():
    top = sample([[150000, 0.99, 5, 5]] * 3)
    assert mwi(top, attributes=("income", "education", "happiness")).value == pytest.approx(1.0)
    bottom = sample([[5495, 0.01, 1, 1]] * 3)
    assert mwi(bottom, attributes=("income", "education")).value == 0.0
    # per-record normalised means 0.2 and 0.6 on (health, education)
    two = sample([[20000, 0.4, 1, 3], [20000, 0.2, 5, 3]])
    assert mwi(two, attributes=("health", "education")).value == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ParameterError):
        mwi(two, attributes=())


@given(samples())
def test_mwi_duplication_invariant(s):
    doubled = WeightedSample(np.tile(s.income, 2), np.tile(s.health, 2), np.tile(s.education, 2),
                             np.tile(s.happiness, 2), np.tile(s.weights, 2))
    assert mwi(doubled, warn=False).value == pytest.approx(mwi(s, warn=False).value, abs=1e-12)
    assert 0.0 <= mwi(s, warn=False).value <= 1.0


def test_headcount_examples():
    s = sample([[10000, 0.6, 3, 3], [15000, 0.6, 3, 3], [25000, 0.6, 3, 3], [30000, 0.6, 3, 3]])
    assert headcount(s, LINES, "income").value == 0.5
    w = sample([[10000, 0.6, 3, 3], [30000, 0.6, 3, 3]], weights=[3, 1])
    assert headcount(w, LINES, "income").value == 0.75
    rich = sample([[90000, 0.9, 5, 5]] * 2)
    assert headcount(rich, LINES, ("income", "health")).value == 0.0
    poor = sample([[9000, 0.1, 1, 1]] * 2)
    assert headcount(poor, LINES, ("income", "education")).value == 1.0
    r = headcount(s, LINES, ("income", "health"))
    assert r.name == "HC2" and r.attributes == ("income", "health")
    with pytest.raises(ParameterError):
        headcount(s, LINES, ("income", "health", "education"))


def test_deprivation_convention():
    s = sample([[20164.0, 0.5, 2, 3]])
    d = deprivations(s, LINES)
    np.testing.assert_array_equal(d[0], [False, False, True, False])
    d2 = deprivations(s, LINES, DeprivationRule(continuous_strict=False, ordinal_strict=True))
    np.testing.assert_array_equal(d2[0], [True, True, False, False])


def af_example():
    # deprivation counts 0, 1, 2, 4
    return sample([
        [30000, 0.8, 4, 4],
        [10000, 0.8, 4, 4],
        [10000, 0.3, 4, 4],
        [10000, 0.3, 1, 2],
    ])


def test_af_example():
    s = af_example()
    r = {j: af_counting(s, LINES, j) for j in range(1, 5)}
    assert r[1].mh == 0.75
    assert r[2].mh == 0.5
    assert r[4].mh == 0.25
    assert r[2].mha == 0.375
    assert r[4].a == 1.0


def test_af_edge_cases():
    nobody = sample([[90000, 0.9, 5, 5]] * 3)
    for j in range(1, 5):
        r = af_counting(nobody, LINES, j)
        assert (r.mh, r.mha, r.a) == (0.0, 0.0, None)
    everybody = sample([[9000, 0.1, 1, 1]] * 3)
    for j in range(1, 5):
        r = af_counting(everybody, LINES, j)
        assert (r.mh, r.a, r.mha) == (1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        af_counting(nobody, LINES, 5)


@given(samples())
def test_af_properties(s):
    res = [af_counting(s, LINES, j) for j in range(1, 5)]
    mh = [r.mh for r in res]
    assert all(x >= y - 1e-15 for x, y in zip(mh, mh[1:]))
    for r in res:
        assert 0.0 <= r.mha <= r.mh + 1e-15 <= 1.0 + 1e-15


def test_means():
    m = make_scenario("identical").model_a
    means = attribute_means(m)
    assert means[0] == pytest.approx(0.6 * 25000 + 0.4 * 60000)
    s = sample([[1, 0.2, 1, 2], [3, 0.4, 3, 4]], weights=[1, 3])
    assert weighted_sample_mean(s, "income") == 2.5
    assert posterior_mean_difference([m, m], [m, m], "education") == 0.0
    b = make_scenario("income_shift").model_b
    assert posterior_mean_difference([m], [b], "income") == pytest.approx(0.1 * means[0])


def test_headcount_predictive_converges_to_model():
    m = make_scenario("identical").model_a
    rep = headcount([m], LINES, ("income", "health"), n_predictive=100_000, seed=1)
    p = joint_cdf([LINES.income, LINES.health, 5, 5], m, tol=1e-8)
    assert rep.source == "predictive"
    assert rep.value == pytest.approx(p, abs=3 * np.sqrt(p * (1 - p) / 100_000))


def test_mwi_predictive_report():
    m = make_scenario("identical").model_a
    rep = mwi([m, m], n_predictive=500, seed=3)
    assert rep.interval[0] <= rep.posterior_mean <= rep.interval[1]
    assert rep.to_dict()["source"] == "predictive"


def test_af_share_never_exceeds_one():
    s = sample([[1000, 0.5, 1, 1]] * 5, weights=[0.5, 0.5, 0.1015625, 0.1015625, 0.1015625])
    r = af_counting(s, LINES, 1)
    assert r.mh == 1.0 and r.mha <= r.mh
