import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from trustfl.evaluation import (DimensionError, ValidationSet, data_quality, normalize_accuracy,
                                raw_gain, recovery_signal, reference_direction, update_consistency,
                                update_frequency, validation_loss)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vectors(d):
    return hnp.arrays(float, d, elements=finite)


def test_validation_loss_examples():
    x = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    w = np.array([0.3, -0.7])
    assert validation_loss(w, ValidationSet(x, x @ w)) == 0.0
    assert validation_loss(np.zeros(2), ValidationSet(x, np.zeros(3))) == 0.0
    # ((1*1)^2 + (1*2)^2) / 2
    assert validation_loss([1.0], ValidationSet([[1.0], [2.0]], [0.0, 0.0])) == 2.5


def test_validation_loss_dimension_mismatch():
    with pytest.raises(DimensionError):
        validation_loss([1.0, 2.0], ValidationSet([[1.0]], [0.0]))


def test_raw_gain_cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 3))
    w_star = np.array([1.0, -2.0, 0.5])
    vs = ValidationSet(x, x @ w_star)
    g = 0.9 * w_star
    assert raw_gain(g, np.zeros(3), vs) == 0.0
    assert raw_gain(g, -g, vs) < 0
    u = rng.standard_normal(3)
    assert raw_gain(g, u, vs) == validation_loss(g, vs) - validation_loss(g + u, vs)
    with pytest.raises(DimensionError):
        raw_gain(g, np.zeros(2), vs)


@given(vectors(3), hnp.arrays(float, (4, 3), elements=finite), vectors(4))
def test_zero_update_has_zero_gain(g, x, y):
    assert raw_gain(g, np.zeros(3), ValidationSet(x, y)) == 0.0


def test_normalize_accuracy_examples():
    assert normalize_accuracy({"a": 0.5})["a"] == pytest.approx(1.0, abs=1e-11)
    assert normalize_accuracy({"a": -1.0, "b": -0.2}) == {"a": 0.0, "b": 0.0}
    out = normalize_accuracy({"a": 0.4, "b": 0.2, "c": -0.1})
    assert out["a"] == pytest.approx(1.0, abs=1e-9)
    assert out["b"] == pytest.approx(0.5, abs=1e-9)
    assert out["c"] == 0.0
    with pytest.raises(ValueError):
        normalize_accuracy({})


@given(st.dictionaries(st.text(min_size=1, max_size=3), finite, min_size=1, max_size=8))
def test_normalize_accuracy_range_and_ranking(gains):
    out = normalize_accuracy(gains)
    assert all(0.0 <= v <= 1.0 for v in out.values())
    pos = [k for k, g in gains.items() if g > 0]
    for a in pos:
        for b in pos:
            if gains[a] > gains[b]:
                assert out[a] >= out[b]


def test_reference_direction_examples():
    assert np.array_equal(reference_direction([np.array([3.0, -1.0])]), [3.0, -1.0])
    assert np.array_equal(reference_direction([[0.0], [0.0], [9.0]]), [0.0])
    assert np.array_equal(reference_direction([[-1.0], [1.0]]), [0.0])
    with pytest.raises(ValueError):
        reference_direction([])
    with pytest.raises(DimensionError):
        reference_direction([[1.0], [1.0, 2.0]])


@given(hnp.arrays(float, st.tuples(st.integers(1, 7), st.integers(1, 4)), elements=finite))
def test_reference_direction_within_range(mat):
    ref = reference_direction(list(mat))
    assert (ref >= mat.min(axis=0)).all() and (ref <= mat.max(axis=0)).all()


def test_data_quality_examples():
    r = np.array([1.0, 2.0, -0.5])
    assert data_quality(r, r) == pytest.approx(1.0, abs=1e-12)
    assert data_quality(-r, r) == 0.0
    assert data_quality([1.0, 0.0], [0.0, 3.0]) == 0.0
    assert data_quality(np.zeros(3), r) == 0.0
    with pytest.raises(DimensionError):
        data_quality([1.0], [1.0, 2.0])


@given(vectors(3), vectors(3), st.floats(1e-3, 1e3))
def test_data_quality_scale_invariant(u, ref, c):
    d1 = data_quality(u, ref)
    d2 = data_quality(c * u, ref)
    assert 0.0 <= d1 <= 1.0
    if np.linalg.norm(u) > 1e-6:
        assert d2 == pytest.approx(d1, abs=1e-9)


def test_consistency_examples():
    assert update_consistency(1.0, True, 0.3) == 1.0
    assert update_consistency(0.5, True, 0.3) == pytest.approx(0.65, abs=1e-12)
    assert update_consistency(0.5, False, 0.3) == pytest.approx(0.35, abs=1e-12)


def test_frequency_examples():
    assert update_frequency([(True, True)] * 5, 10) == 1.0
    assert update_frequency([(True, True)] + [(True, False)] * 3, 10) == 0.25
    assert update_frequency([(False, False)] * 12, 10, previous=0.7) == 0.7
    # only the trailing window counts
    assert update_frequency([(True, False)] * 5 + [(True, True)] * 10, 10) == 1.0


def test_recovery_signal_examples():
    assert recovery_signal(0.9, []) == 0.0
    assert recovery_signal(0.4, [0.2, 0.4, 0.6]) == 0.0
    assert recovery_signal(0.9, [0.1, 0.1, 0.1]) == pytest.approx(0.8, abs=1e-12)
    # lookback is three rounds
    assert recovery_signal(0.5, [0.0, 0.5, 0.5, 0.5]) == 0.0


@given(st.floats(0, 1), st.lists(st.floats(0, 1), max_size=6), st.booleans(), st.floats(0, 1))
def test_metric_outputs_in_unit_interval(cur, hist, acc, rho):
    assert 0.0 <= recovery_signal(cur, hist) <= 1.0
    assert 0.0 <= update_consistency(cur, acc, rho) <= 1.0
