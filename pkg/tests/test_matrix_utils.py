"""Tests for the numeric helpers in utils.matrix_utils."""

import unittest

import numpy as np

from utils.matrix_utils import l1_operator_norm, normalize_columns, spectral_norm, stochastic_power


def with_singular_values(rng, values):
    size = len(values)
    u, _ = np.linalg.qr(rng.standard_normal((size, size)))
    v, _ = np.linalg.qr(rng.standard_normal((size, size)))
    return u @ np.diag(values) @ v.T


class TestSpectralNorm(unittest.TestCase):
    def test_close_top_singular_values(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            matrix = with_singular_values(rng, [1.0, 0.99999, 0.5, 0.25, 0.1, 0.01])
            self.assertAlmostEqual(spectral_norm(matrix), 1.0, delta=1e-12)
            self.assertEqual(spectral_norm(matrix), float(np.linalg.norm(matrix, 2)))

    def test_never_below_any_column_image(self):
        rng = np.random.default_rng(11)
        matrix = np.abs(rng.standard_normal((5, 3)))
        norm = spectral_norm(matrix)
        for _ in range(20):
            x = rng.standard_normal(3)
            self.assertLessEqual(np.linalg.norm(matrix @ x), norm * np.linalg.norm(x) * (1 + 1e-12))

    def test_degenerate_shapes(self):
        self.assertEqual(spectral_norm(np.zeros((0, 2))), 0.0)
        self.assertEqual(spectral_norm(np.zeros((2, 2))), 0.0)
        self.assertAlmostEqual(spectral_norm(np.ones((1, 2))), np.sqrt(2.0))

    def test_l1_operator_norm(self):
        self.assertEqual(l1_operator_norm(np.array([[1.0, -3.0], [2.0, 0.5]])), 3.5)


class TestStochasticPower(unittest.TestCase):
    def test_matches_matrix_power(self):
        matrix = np.array([[0.9, 0.2, 0.1], [0.05, 0.7, 0.3], [0.05, 0.1, 0.6]])
        for exponent in (0, 1, 2, 7, 64):
            np.testing.assert_allclose(stochastic_power(matrix, exponent),
                                       np.linalg.matrix_power(matrix, exponent), atol=1e-12)

    def test_large_exponent_stays_stochastic(self):
        matrix = np.array([[0.75, 0.5], [0.25, 0.5]])
        power = stochastic_power(matrix, 10 ** 6)
        np.testing.assert_allclose(power.sum(axis=0), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(power[:, 0], [2 / 3, 1 / 3], atol=1e-12)

    def test_normalize_columns_keeps_zero_columns(self):
        result = normalize_columns(np.array([[2.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_allclose(result, [[0.5, 0.0], [0.5, 0.0]])


if __name__ == '__main__':
    unittest.main()
