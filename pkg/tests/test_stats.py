import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as sps

from sramage import stats
from sramage.errors import ContractViolation, DegenerateInput


# -- Welch ---------------------------------------------------------------------

def test_welch_reference_example():
    t, p, df = stats.welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert t == pytest.approx(-1.0, abs=1e-12)
    assert df == pytest.approx(8.0, abs=1e-12)
    assert p == pytest.approx(0.3466, abs=1e-3)


def test_welch_identical():
    t, p, _ = stats.welch_t_test([1, 2, 4], [1, 2, 4])
    assert t == 0.0 and p == 1.0


def test_welch_against_scipy(rng):
    for _ in range(50):
        a = rng.normal(0, rng.uniform(0.5, 3), rng.integers(2, 40))
        b = rng.normal(0.5, rng.uniform(0.5, 3), rng.integers(2, 40))
        t, p, _ = stats.welch_t_test(a, b)
        ref = sps.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


def test_welch_separated(rng):
    _, p, _ = stats.welch_t_test(rng.normal(0, 1, 50), rng.normal(5, 1, 50))
    assert p < 1e-6


def test_welch_degenerate():
    with pytest.raises(DegenerateInput):
        stats.welch_t_test([1, 1], [2, 2])
    with pytest.raises(DegenerateInput):
        stats.welch_t_test([1], [2, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20),
       st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_welch_antisymmetric(a, b):
    try:
        t1, p1, _ = stats.welch_t_test(a, b)
    except DegenerateInput:
        return
    t2, p2, _ = stats.welch_t_test(b, a)
    assert t1 == pytest.approx(-t2, abs=1e-9)
    assert p1 == pytest.approx(p2, abs=1e-12)


# -- Shapiro-Wilk --------------------------------------------------------------

def test_shapiro_three_points():
    w, p = stats.shapiro_wilk([1, 2, 3])
    assert w == pytest.approx(1.0, abs=1e-9)
    assert stats.shapiro_coefficients(3) == pytest.approx([-2**-0.5, 0, 2**-0.5])


def test_shapiro_bimodal():
    _, p = stats.shapiro_wilk([0] * 25 + [1] * 25)
    assert p < 0.05


def test_shapiro_normal_quantiles():
    x = special.ndtri((np.arange(1, 101) - 0.5) / 100)
    w, _ = stats.shapiro_wilk(x)
    assert w > 0.99


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 11, 12, 18, 50, 200, 1000, 5000])
def test_shapiro_against_scipy(n):
    rng = np.random.default_rng(n)
    for sample in (rng.standard_normal(n), rng.exponential(size=n), rng.uniform(size=n)):
        w, p = stats.shapiro_wilk(sample)
        ref = sps.shapiro(sample)
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-5)


def test_shapiro_degenerate():
    with pytest.raises(DegenerateInput):
        stats.shapiro_wilk([1, 2])
    with pytest.raises(DegenerateInput):
        stats.shapiro_wilk([4, 4, 4, 4])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-1e3, 1e3), st.integers(3, 60))
def test_shapiro_invariance(seed, c, d, n):
    x = np.random.default_rng(seed).standard_normal(n)
    w1, _ = stats.shapiro_wilk(x)
    w2, _ = stats.shapiro_wilk(c * x + d)
    w3, _ = stats.shapiro_wilk(-c * x + d)
    assert 0 < w1 <= 1
    assert w2 == pytest.approx(w1, abs=1e-9)
    assert w3 == pytest.approx(w1, abs=1e-9)


# -- ROC -----------------------------------------------------------------------

def _pairwise_brute(new, aged):
    wins = 0.0
    for a in aged:
        for b in new:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(new) * len(aged))


def test_roc_small_examples():
    assert stats.roc([0, 0, 0], [1, 1, 1]).auroc == 1.0
    assert stats.roc([1, 3], [2, 4]).auroc == pytest.approx(0.75)


def test_roc_random_classifier(rng):
    assert stats.roc(rng.normal(size=10_000), rng.normal(size=10_000)).auroc == pytest.approx(0.5, abs=0.02)


def test_roc_shape(rng):
    c = stats.roc(rng.integers(0, 5, 30), rng.integers(2, 8, 20))
    assert c.points[0] == (0.0, 0.0) and c.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert c.auroc == pytest.approx(np.trapezoid(c.tpr, c.fpr), abs=1e-12)


def test_trapezoid_equals_pairwise_on_1000_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n, m = rng.integers(1, 40, 2)
        new = rng.integers(0, 12, n).astype(float)
        aged = (rng.integers(0, 12, m) + rng.integers(0, 4)).astype(float)
        worst = max(worst, abs(stats.roc(new, aged).auroc - stats.auroc_pairwise(new, aged)))
    assert worst < 1e-9


def test_pairwise_against_brute_force(rng):
    for _ in range(50):
        new = rng.integers(0, 6, rng.integers(1, 15)).tolist()
        aged = rng.integers(0, 6, rng.integers(1, 15)).tolist()
        assert stats.auroc_pairwise(new, aged) == pytest.approx(_pairwise_brute(new, aged), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30), st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_auroc_complement(new, aged):
    assert stats.roc(new, aged).auroc + stats.roc(aged, new).auroc == pytest.approx(1.0, abs=1e-12)


def test_roc_empty():
    with pytest.raises(ContractViolation):
        stats.roc([], [1])


# -- informedness --------------------------------------------------------------

def test_informedness():
    assert stats.informedness(10, 0, 10, 0) == 1.0
    assert stats.informedness(5, 5, 5, 5) == 0.0
    with pytest.raises(ContractViolation):
        stats.informedness(0, 1, 1, 0)
