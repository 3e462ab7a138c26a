import numpy as np
import pytest

from ncodlab.errors import BadPairMap, SingleClass
from ncodlab.noise import (NoiseSpec, check_learnability, cyclic_pair_map, inject, inject_asymmetric,
                           inject_symmetric)
from ncodlab.numerics import Rng

N, C = 100_000, 10


@pytest.fixture(scope="module")
def labels():
    return np.arange(N) % C


def test_symmetric_rate_zero(labels):
    noisy, rep = inject_symmetric(labels, 0.0, Rng(0), C)
    assert np.array_equal(noisy, labels) and not rep.flip_mask.any()
    assert check_learnability(rep)


@pytest.mark.parametrize("rate", [0.2, 0.5, 0.8])
def test_symmetric_statistics(labels, rate):
    noisy, rep = inject_symmetric(labels, rate, Rng(1), C)
    sigma = np.sqrt(rate * (1 - rate) / N)
    assert abs(rep.realized_rate - rate) <= 3 * sigma
    assert np.all(noisy[rep.flip_mask] != labels[rep.flip_mask])
    np.testing.assert_array_equal(rep.flip_mask, noisy != labels)
    # off-diagonal mass is the flip rate, split evenly over the C-1 other classes
    off = rep.confusion[~np.eye(C, dtype=bool)] / N
    assert abs(off.sum() - rate) <= 3 * sigma
    per = rate / (C * (C - 1))
    # 4.5 sigma per cell: Bonferroni over the 90 cells at ~3 sigma family-wise
    assert np.all(np.abs(off - per) <= 4.5 * np.sqrt(per * (1 - per) / N))


def test_symmetric_half_in_band(labels):
    _, rep = inject_symmetric(labels, 0.5, Rng(2), C)
    assert 0.49 <= rep.realized_rate <= 0.51
    assert check_learnability(rep)


def test_symmetric_confusion_margins(labels):
    noisy, rep = inject_symmetric(labels, 0.3, Rng(3), C)
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(noisy, minlength=C))
    np.testing.assert_array_equal(rep.confusion.sum(axis=0), np.bincount(labels, minlength=C))


def test_symmetric_high_rate_two_classes_not_learnable():
    y = np.arange(20_000) % 2
    _, rep = inject_symmetric(y, 0.95, Rng(4), 2)
    assert not check_learnability(rep)


def test_single_class_rejected():
    with pytest.raises(SingleClass):
        inject_symmetric(np.zeros(5, dtype=int), 0.2, Rng(0), 1)


def test_exact_count_mode(labels):
    _, rep = inject_symmetric(labels, 0.37, Rng(5), C, exact_count=True)
    assert rep.flip_mask.sum() == round(0.37 * N)


def test_asymmetric_cyclic_rates(labels):
    noisy, rep = inject_asymmetric(labels, 0.4, cyclic_pair_map(C), Rng(6), C)
    for c in range(C):
        members = labels == c
        rate_c = rep.flip_mask[members].mean()
        assert 0.38 <= rate_c <= 0.42
        assert np.all(noisy[members & rep.flip_mask] == (c + 1) % C)


def test_asymmetric_default_is_cyclic(labels):
    a, _ = inject_asymmetric(labels, 0.4, None, Rng(7), C)
    b, _ = inject_asymmetric(labels, 0.4, cyclic_pair_map(C), Rng(7), C)
    assert np.array_equal(a, b)


def test_asymmetric_rate_zero_and_scoping(labels):
    noisy, _ = inject_asymmetric(labels, 0.0, {0: 1}, Rng(8), C)
    assert np.array_equal(noisy, labels)
    noisy, rep = inject_asymmetric(labels, 0.5, {0: 1}, Rng(8), C)
    assert np.array_equal(noisy[labels != 0], labels[labels != 0])
    assert rep.flip_mask[labels == 0].any()


@pytest.mark.parametrize("pairs", [{0: 0}, {0: 10}, {}, {-1: 2}])
def test_bad_pair_map(labels, pairs):
    with pytest.raises(BadPairMap):
        inject_asymmetric(labels, 0.3, pairs, Rng(0), C)


def test_determinism(labels):
    spec = NoiseSpec("symmetric", 0.3)
    a, _ = inject(labels, spec, Rng(11), C)
    b, _ = inject(labels, spec, Rng(11), C)
    assert np.array_equal(a, b)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("symmetric", 1.0)
    with pytest.raises(ValueError):
        NoiseSpec("instance", 0.1)
