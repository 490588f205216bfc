from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagtrend.baselines import (
    LinearClassifier,
    SVCConfig,
    best_of,
    compute_baselines,
    decision_function,
    one_class_mocks,
    predict_linear,
    shuffled_mock,
    train_linear_svc,
)
from lagtrend.stats import accuracy


def test_shuffled_mock_examples():
    out = shuffled_mock(np.array([1, 1, 0]), seed=3)
    assert sorted(out.tolist()) == [0, 1, 1]
    assert shuffled_mock(np.array([1, 1, 1, 1]), seed=5).tolist() == [1, 1, 1, 1]
    with pytest.raises(ValueError):
        shuffled_mock(np.array([]))


def test_shuffled_mock_preserves_class_counts_over_many_cases():
    rng = np.random.default_rng(0)
    for case in range(1000):
        pred = rng.integers(0, 2, size=int(rng.integers(1, 60)))
        out = shuffled_mock(pred, seed=case)
        assert Counter(out.tolist()) == Counter(pred.tolist())


def test_shuffled_mock_is_deterministic_per_seed():
    pred = np.random.default_rng(1).integers(0, 2, 200)
    assert np.array_equal(shuffled_mock(pred, 17), shuffled_mock(pred, 17))
    assert not np.array_equal(shuffled_mock(pred, 17), shuffled_mock(pred, 18))


def test_one_class_mocks():
    down, up = one_class_mocks(3)
    assert down.tolist() == [0, 0, 0] and up.tolist() == [1, 1, 1]
    with pytest.raises(ValueError):
        one_class_mocks(0)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_one_class_accuracies_are_complementary(targets):
    down, up = one_class_mocks(len(targets))
    assert accuracy(down, targets) + accuracy(up, targets) == 1.0


def test_one_class_accuracy_reference_split():
    # 991 of 2000 targets are DOWN -> 0.4955 / 0.5045
    targets = np.array([0] * 991 + [1] * 1009)
    down, up = one_class_mocks(targets.size)
    assert accuracy(down, targets) == 0.4955
    assert accuracy(up, targets) == 0.5045


def test_best_of_examples():
    assert best_of((0.50, 0.4955, 0.5045)) == 0.5045


@given(st.lists(st.integers(0, 1), min_size=1, max_size=100), st.integers(0, 2**32 - 1))
def test_best_of_never_below_half(truth, seed):
    pred = np.random.default_rng(seed).integers(0, 2, len(truth))
    mocks = compute_baselines(pred, np.array(truth), seed)
    assert mocks.best_of >= 0.5
    assert mocks.best_of == max(mocks.shuffled_accuracy, mocks.all_down_accuracy, mocks.all_up_accuracy)
    assert Counter(mocks.shuffled.tolist()) == Counter(pred.tolist())


def test_compute_baselines_deterministic():
    rng = np.random.default_rng(4)
    pred, truth = rng.integers(0, 2, 50), rng.integers(0, 2, 50)
    a, b = compute_baselines(pred, truth, 9), compute_baselines(pred, truth, 9)
    assert np.array_equal(a.shuffled, b.shuffled) and a.best_of == b.best_of


# -- linear SVC ------------------------------------------------------------------


def _blobs(n=100, seed=0):
    rng = np.random.default_rng(seed)
    up = rng.integers(0, 2, n)
    centers = np.where(up[:, None] == 1, [2.0, 2.0], [-2.0, -2.0])
    return centers + rng.normal(0, 0.5, size=(n, 2)), up


def test_svc_separates_blobs():
    x, classes = _blobs()
    clf = train_linear_svc(x, classes, SVCConfig(seed=1))
    assert accuracy(predict_linear(clf, x), classes) == 1.0
    assert np.all(np.isfinite(clf.weights)) and np.isfinite(clf.bias)


def test_svc_accepts_one_hot_labels():
    x, classes = _blobs(60, 2)
    a = train_linear_svc(x, classes, SVCConfig(seed=3))
    b = train_linear_svc(x, np.eye(2)[classes], SVCConfig(seed=3))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_svc_zero_classifier_predicts_down():
    clf = LinearClassifier(np.zeros(3), 0.0, SVCConfig())
    assert predict_linear(clf, np.random.default_rng(0).normal(size=(5, 3))).tolist() == [0] * 5


@given(st.floats(1e-3, 1e3))
def test_svc_decision_invariant_under_positive_rescaling(c):
    x, classes = _blobs(40, 5)
    clf = train_linear_svc(x, classes, SVCConfig(epochs=5))
    scaled = LinearClassifier(clf.weights * c, clf.bias * c, clf.config)
    assert np.array_equal(predict_linear(clf, x), predict_linear(scaled, x))


def test_svc_deterministic_and_validated():
    x, classes = _blobs(50, 6)
    a = train_linear_svc(x, classes, SVCConfig(seed=8, epochs=10))
    b = train_linear_svc(x, classes, SVCConfig(seed=8, epochs=10))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias
    assert np.array_equal(decision_function(a, x), decision_function(b, x))
    with pytest.raises(ValueError):
        train_linear_svc(np.empty((0, 2)), np.empty(0))
    with pytest.raises(ValueError):
        SVCConfig(step=0)
