"""Tests for vertex distributions of beta-KMS states and the transport maps."""

import math
import unittest

import numpy as np

from core.exceptions import CertificationError, DimensionMismatchError, IterationBudgetError, StateValidationError
from core.kms_inverse_limit import (SimplexVector, beta_infinity_transport, distribution_from_gauge,
                                    gauge_from_distribution, gauge_limit_vector, kms_vertex_distribution,
                                    limit_family, multi_seed_distribution, normalized_system, perron_check,
                                    perturbation_epsilons, perturbation_transport, rescale_family,
                                    round_trip_defect, scale_system, transport_constant,
                                    verify_perturbation_hypothesis)
from core.path_statistics import gauge_matrix, stochastic_matrix
from tests.helpers import load_data
from utils.matrix_utils import stochastic_power


def gauge_system(spec, beta, gaps):
    return [gauge_matrix(spec, g, beta).matrix for g in range(1, gaps + 1)]


class TestSimplexVector(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(StateValidationError):
            SimplexVector(1, ('L', 'R'), [1.5, -0.5])
        with self.assertRaises(StateValidationError):
            SimplexVector(1, ('L', 'R'), [0.2, 0.2])
        with self.assertRaises(DimensionMismatchError):
            SimplexVector(1, ('L', 'R'), [1.0])
        with self.assertRaises(DimensionMismatchError):
            SimplexVector.from_mapping(1, ('L', 'R'), {'Q': 1.0})

    def test_distance(self):
        a = SimplexVector.point(1, ('L', 'R'), 'L')
        b = SimplexVector.uniform(1, ('L', 'R'))
        self.assertAlmostEqual(a.distance(b), 1.0)


class TestVertexDistributions(unittest.TestCase):
    def test_br2_is_uniform_for_every_beta(self):
        spec = load_data('br2.json', exact=False)
        for beta in (-2.0, -1.0, 0.5, 1.0, 2.0):
            result = multi_seed_distribution(spec, beta, 1, 5)
            self.assertEqual(result['seeds'], 3)
            self.assertTrue(result['converged'])
            self.assertTrue(result['agree'], result['agreement'])
            for entry in result['distributions']:
                values = entry['values']
                self.assertAlmostEqual(values['L'], 0.5, delta=1e-8)
                self.assertAlmostEqual(values['R'], 0.5, delta=1e-8)

    def test_budget_exhaustion(self):
        spec = load_data('br2.json', exact=False)
        seed = SimplexVector.point(2, ('L', 'R'), 'L')
        with self.assertRaises(IterationBudgetError) as ctx:
            kms_vertex_distribution(spec, 2.0, 1, 1, seed, tol=1e-14, budget=3, strict=True)
        self.assertEqual(ctx.exception.exit_code, 3)
        relaxed = kms_vertex_distribution(spec, 2.0, 1, 1, seed, tol=1e-14, budget=3)
        self.assertFalse(relaxed.converged)
        self.assertEqual(relaxed.depth, 3)

    def test_finite_prefix_stops_at_depth(self):
        spec = load_data('br2.json', exact=False).expand(6)
        result = kms_vertex_distribution(spec, 1.0, 1, 5)
        self.assertEqual(result.depth, 5)
        self.assertAlmostEqual(result.values.sum(), 1.0)

    def test_seed_must_live_on_top_level(self):
        spec = load_data('br2.json', exact=False)
        with self.assertRaises(DimensionMismatchError):
            kms_vertex_distribution(spec, 1.0, 1, 3, SimplexVector.point(4, ('v0',), 'v0'))


class TestGaugeSystem(unittest.TestCase):
    def test_perron_data(self):
        result = perron_check(load_data('br2.json', exact=False), 1.0)
        x = math.exp(-1.0)
        self.assertAlmostEqual(result['eigenvalue'], 1.0 + x)
        self.assertAlmostEqual(result['ratio'], (1.0 - x) / (1.0 + x))
        np.testing.assert_allclose(result['perron_vector'], [0.5, 0.5])

    def test_perron_needs_stationary_block(self):
        with self.assertRaises(CertificationError):
            perron_check(load_data('growing_cross.json', exact=False), 1.0)

    def test_gauge_vector_and_distribution(self):
        spec = load_data('br2.json', exact=False)
        approximant = gauge_limit_vector(spec, 1.0, 1, 20)
        np.testing.assert_allclose(approximant.values, [0.5, 0.5])
        dist = distribution_from_gauge(spec, 1.0, 1, approximant.values)
        np.testing.assert_allclose(dist.values, [0.5, 0.5])
        np.testing.assert_allclose(gauge_from_distribution(spec, 1.0, dist), approximant.values)

    def test_limit_family_is_consistent(self):
        system = gauge_system(load_data('growing_cross.json', exact=False), 0.5, 8)
        family = limit_family(system, 8)
        self.assertAlmostEqual(float(family[0][0]), 1.0)
        for g in range(1, 9):
            np.testing.assert_allclose(system[g - 1] @ family[g], family[g - 1], rtol=1e-12)

    def test_normalized_gauge_is_stochastic_matrix(self):
        spec = load_data('growing_cross.json', exact=False)
        normalized = normalized_system(gauge_system(spec, 1.5, 6))
        for g in range(1, 7):
            np.testing.assert_allclose(normalized[g - 1], stochastic_matrix(spec, g, 1.5).matrix,
                                       rtol=1e-12, atol=1e-15)


class TestBetaInfinityTransport(unittest.TestCase):
    def test_growing_cross_distances_shrink(self):
        spec = load_data('growing_cross.json', exact=False)
        target = SimplexVector.point(30, spec.vertices(30), 'L')
        result = beta_infinity_transport(spec, target, [2.0, 8.0], 30)
        for report in result['reports']:
            self.assertIsNone(report['collapsed_from'])
            for distance, bound in zip(report['distances'], report['bounds']):
                self.assertLessEqual(distance, bound + 1e-12)
        first, second = result['reports']
        self.assertGreater(first['max_distance'], second['max_distance'])

    def test_br2_distances_stay_large(self):
        spec = load_data('br2.json', exact=False)
        depth = 10 ** 9
        target = SimplexVector.point(depth, ('L', 'R'), 'L')
        result = beta_infinity_transport(spec, target, [1, 2, 4, 8, 16], depth)
        for report in result['reports']:
            self.assertEqual(report['collapsed_from'], 6)
            self.assertGreaterEqual(report['max_distance'], 0.45)

    def test_target_must_match_depth(self):
        spec = load_data('br2.json', exact=False)
        with self.assertRaises(DimensionMismatchError):
            beta_infinity_transport(spec, SimplexVector.point(3, ('v0',), 'v0'), [1.0], 3)

    def test_stochastic_power(self):
        matrix = np.array([[0.75, 0.5], [0.25, 0.5]])
        np.testing.assert_allclose(stochastic_power(matrix, 5), np.linalg.matrix_power(matrix, 5))


class TestPerturbation(unittest.TestCase):
    def setUp(self):
        self.system = gauge_system(load_data('br2.json', exact=False), 1.0, 6)

    def test_close_system_is_accepted(self):
        epsilons = perturbation_epsilons(self.system, 6)
        self.assertTrue(all(0 < e < 0.5 for e in epsilons))
        close = [a * (1.0 + e / 2) for a, e in zip(self.system, epsilons)]
        report = verify_perturbation_hypothesis(self.system, epsilons, close)
        self.assertTrue(report['accepted'], report['first_failure'])
        self.assertEqual(len(report['rows']), 6)

    def test_far_system_is_rejected(self):
        epsilons = perturbation_epsilons(self.system, 6)
        far = [2.0 * a for a in self.system]
        report = verify_perturbation_hypothesis(self.system, epsilons, far)
        self.assertFalse(report['accepted'])
        self.assertEqual(report['first_failure'], {'gap': 1, 'condition': 'closeness_condition'})

    def test_transport_between_identical_systems(self):
        family = limit_family(self.system, 6)
        self.assertAlmostEqual(transport_constant(self.system, self.system, 3), 2.0 ** -3)
        moved = perturbation_transport(self.system, self.system, family, 1, 2)
        self.assertEqual(moved['level'], 0)
        np.testing.assert_allclose(moved['value'], family[0])
        self.assertIsNone(moved['warning'])
        defect = round_trip_defect(self.system, self.system, family, 1, 2)
        self.assertTrue(defect['passed'], defect)

    def test_round_trip_on_perturbed_systems(self):
        epsilons = perturbation_epsilons(self.system, 6)
        family = limit_family(self.system, 6)
        psi0 = float(family[0].reshape(-1)[0])
        for seed in range(10):
            with self.subTest(seed=seed):
                rng = np.random.default_rng(seed)
                factors = [1.0 + rng.uniform(0.0, 1.0, a.shape) * e / 2 for a, e in zip(self.system, epsilons)]
                perturbed = [a * f for a, f in zip(self.system, factors)]
                hypothesis = verify_perturbation_hypothesis(self.system, epsilons, perturbed)
                self.assertTrue(hypothesis['accepted'], hypothesis['first_failure'])

                moved = perturbation_transport(self.system, perturbed, limit_family(perturbed, 6), 1, 2,
                                               hypothesis=hypothesis)
                self.assertIsNone(moved['warning'])

                defect = round_trip_defect(self.system, perturbed, family, 1, 2)
                self.assertTrue(defect['passed'], defect)
                # B ≥ A entrywise, so the defect is at most the relative growth of gaps 4..6
                growth = math.prod(1.0 + e / 2 for e in epsilons[3:6]) - 1.0
                self.assertLessEqual(defect['defect'], growth * psi0 * (1 + 1e-9) + 1e-15)

    def test_rejected_hypothesis_adds_warning(self):
        family = limit_family(self.system, 6)
        moved = perturbation_transport(self.system, self.system, family, 1, 2,
                                       hypothesis={'accepted': False})
        self.assertIsNotNone(moved['warning'])

    def test_rescaled_family(self):
        multipliers = [2.0, 3.0, 0.5, 1.0, 4.0, 2.0]
        scaled = scale_system(self.system, multipliers)
        family = rescale_family(limit_family(self.system, 6), multipliers)
        for g in range(1, 7):
            np.testing.assert_allclose(scaled[g - 1] @ family[g], family[g - 1], rtol=1e-12)
        with self.assertRaises(ValueError):
            scale_system(self.system, [1.0, -1.0])


if __name__ == '__main__':
    unittest.main()
