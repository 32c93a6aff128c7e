import numpy as np

from qaoa_precond import rng


def test_same_labels_same_draws():
    a = rng.stream(7, rng.SHOTS, "maxcut_3", "bfgs", 2).random(5)
    b = rng.stream(7, rng.SHOTS, "maxcut_3", "bfgs", 2).random(5)
    np.testing.assert_array_equal(a, b)


def test_labels_separate_streams():
    base = rng.stream(7, rng.SHOTS, "maxcut_3", "bfgs", 2).random(5)
    for other in (rng.stream(8, rng.SHOTS, "maxcut_3", "bfgs", 2),
                  rng.stream(7, rng.OPTIMIZER, "maxcut_3", "bfgs", 2),
                  rng.stream(7, rng.SHOTS, "maxcut_3", "dfp", 2),
                  rng.stream(7, rng.SHOTS, "maxcut_3", "bfgs", 3)):
        assert not np.array_equal(base, other.random(5))


def test_labels_are_compared_as_strings():
    np.testing.assert_array_equal(rng.stream(1, rng.TUNER, 4).random(3), rng.stream(1, rng.TUNER, "4").random(3))


def test_seed_reduced_modulo_64_bits():
    np.testing.assert_array_equal(rng.stream(-1, rng.INITIAL).random(3),
                                  rng.stream(2 ** 64 - 1, rng.INITIAL).random(3))
