import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from lagtrend.stats import (
    NOTCH_CONSTANT,
    accuracy,
    auc,
    box_stats,
    mean_and_variance,
    notches_overlap,
    regularized_incomplete_beta,
    t_cdf,
    t_ppf,
    t_sf,
    upper_tail_test,
)

from oracles import exact_permutation_p, incomplete_beta_mp, t_sf_mp


def brute_force_auc(scores, targets):
    pos = [s for s, t in zip(scores, targets) if t == 1]
    neg = [s for s, t in zip(scores, targets) if t == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


# -- accuracy and AUC ----------------------------------------------------------------


def test_accuracy_examples():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 0, 1], [0, 1, 0]) == 0.0
    with pytest.raises(ValueError):
        accuracy([1, 0], [1])
    with pytest.raises(ValueError):
        accuracy([], [])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50), st.randoms())
def test_accuracy_permutation_invariant(pairs, rnd):
    p, t = map(list, zip(*pairs))
    order = list(range(len(p)))
    rnd.shuffle(order)
    assert accuracy(p, t) == accuracy([p[i] for i in order], [t[i] for i in order])


def test_auc_examples():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), st.integers(0, 1)), min_size=2, max_size=40))
def test_auc_matches_pairwise_count(rows):
    scores, targets = map(list, zip(*rows))
    if len(set(targets)) < 2:
        return
    assert auc(scores, targets) == pytest.approx(brute_force_auc(scores, targets), abs=1e-12)


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=30), st.randoms())
def test_auc_invariant_under_increasing_transform(scores, rnd):
    # integer scores keep the transformed values distinct in floating point
    targets = [rnd.randint(0, 1) for _ in scores]
    targets[0], targets[1] = 0, 1
    assert auc(scores, targets) == auc([math.exp(s / 7) * 3 + 1 for s in scores], targets)


# -- mean and variance ---------------------------------------------------------------


def test_mean_and_variance_examples():
    assert mean_and_variance([0.5, 0.5]) == (0.5, 0.0)
    assert mean_and_variance([0, 1]) == (0.5, 0.5)
    with pytest.raises(ValueError):
        mean_and_variance([1.0])


# -- t distribution --------------------------------------------------------------------


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (10.0, 0.5, 0.2), (1.5, 40.0, 0.01), (25.0, 0.5, 0.97)])
def test_incomplete_beta_against_series(a, b, x):
    assert regularized_incomplete_beta(a, b, x) == pytest.approx(incomplete_beta_mp(a, b, x), abs=1e-13)


def test_incomplete_beta_edges_and_errors():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    for args in ((0.0, 1.0, 0.5), (1.0, -1.0, 0.5), (1.0, 1.0, 1.5)):
        with pytest.raises(ValueError):
            regularized_incomplete_beta(*args)


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.floats(0.5, 500))
def test_t_sf_against_high_precision(t, df):
    assert t_sf(t, df) == pytest.approx(t_sf_mp(t, df), abs=1e-9)


def test_t_distribution_helpers():
    assert t_sf(0.0, 7.0) == 0.5
    assert t_sf(math.inf, 3.0) == 0.0 and t_sf(-math.inf, 3.0) == 1.0
    assert t_cdf(1.3, 9.0) == pytest.approx(1 - t_sf(1.3, 9.0), abs=1e-15)
    for q, df in ((0.999, 4.0), (0.975, 30.0), (0.1, 2.5)):
        assert t_ppf(q, df) == pytest.approx(sps.t.ppf(q, df), abs=1e-9)
        assert t_cdf(t_ppf(q, df), df) == pytest.approx(q, abs=1e-12)
    with pytest.raises(ValueError):
        t_ppf(1.0, 3.0)
    with pytest.raises(ValueError):
        t_sf(1.0, 0.0)


# -- Welch test ---------------------------------------------------------------------------


def test_welch_identical_samples():
    res = upper_tail_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
    assert res.p_value == pytest.approx(0.5, abs=1e-12)
    assert res.mean_difference == 0.0


def test_welch_clear_difference_agrees_with_permutation():
    rng = np.random.default_rng(0)
    model = 0.6 + rng.normal(0, 1e-3, 8)
    base = 0.5 + rng.normal(0, 1e-3, 8)
    res = upper_tail_test(model, base)
    assert res.p_value < 1e-3
    assert abs(res.p_value - exact_permutation_p(model, base)) < 0.02
    assert res.ci_lower_bound > 0


def test_welch_matches_reference_statistics():
    rng = np.random.default_rng(1)
    a, b = rng.normal(0.58, 0.02, 12), rng.normal(0.51, 0.05, 9)
    res = upper_tail_test(a, b)
    ref = sps.ttest_ind(a, b, equal_var=False, alternative="greater")
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-12)
    assert res.test_statistic == pytest.approx(ref.statistic, rel=1e-12)
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    lower = (a.mean() - b.mean()) - sps.t.ppf(0.999, res.degrees_of_freedom) * se
    assert res.ci_lower_bound == pytest.approx(lower, abs=1e-10)
    assert 0 <= res.p_value <= 1


def test_welch_degenerate_cases():
    res = upper_tail_test([0.5, 0.5], [0.5, 0.5])
    assert res.degenerate and res.p_value == 0.5
    assert upper_tail_test([0.6, 0.6], [0.5, 0.5]).p_value == 0.0
    assert upper_tail_test([0.4, 0.4], [0.5, 0.5]).p_value == 1.0
    with pytest.raises(ValueError):
        upper_tail_test([0.5], [0.5, 0.6])


@given(st.lists(st.floats(0, 1), min_size=3, max_size=10, unique=True), st.floats(0.001, 0.5))
def test_welch_p_decreases_as_model_shifts_up(model, shift):
    baseline = [0.5, 0.52, 0.47, 0.51]
    p0 = upper_tail_test(model, baseline).p_value
    p1 = upper_tail_test([m + shift for m in model], baseline).p_value
    assert p1 <= p0


# -- box statistics --------------------------------------------------------------------------


def test_box_stats_examples():
    b = box_stats([1, 2, 3, 4, 5])
    assert (b.median, b.q1, b.q3) == (3.0, 2.0, 4.0)
    assert b.notch == pytest.approx(NOTCH_CONSTANT * 2 / math.sqrt(5))
    assert (b.whisker_low, b.whisker_high, b.outliers) == (1.0, 5.0, ())
    c = box_stats([0.7] * 6)
    assert c.iqr == 0 and c.notch == 0 and c.outliers == ()
    with pytest.raises(ValueError):
        box_stats([])


def test_box_stats_outliers_and_whiskers():
    b = box_stats([1, 2, 3, 4, 5, 6, 7, 8, 100])
    assert b.outliers == (100.0,)
    assert b.whisker_high == 8.0 and b.whisker_low == 1.0


def test_notch_overlap_decision():
    low = box_stats(np.linspace(0.45, 0.55, 30))
    high = box_stats(np.linspace(0.65, 0.75, 30))
    assert not notches_overlap(low, high)
    assert notches_overlap(low, box_stats(np.linspace(0.46, 0.56, 30)))


@given(st.integers(2, 400))
def test_notch_scales_with_inverse_root_n(n):
    # a sample with fixed quartiles 0 and 1 for any n: half zeros, half ones
    sample = [0.0] * (n // 2) + [1.0] * (n - n // 2)
    b = box_stats(sample * 4)
    assert b.notch * math.sqrt(b.n) == pytest.approx(NOTCH_CONSTANT * b.iqr, rel=1e-12)
    assert b.q1 <= b.median <= b.q3
