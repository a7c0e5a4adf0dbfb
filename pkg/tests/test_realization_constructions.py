"""Tests for the realization constructions and their certificates."""

import unittest
from fractions import Fraction

from core.diagram_model import dump_spec, multiplicity_matrices, negate_potential, product
from core.exceptions import ConstructionError, DiagramValidationError
from core.realization_constructions import (GROUND_CEILING, MINUS_PREFIX, PLUS_PREFIX, SupernaturalSpec,
                                            _factorization_check,
                                            construct_ground_ceiling, construct_rigid_kms,
                                            construct_uhf_embedding, disjoint_union_diagram, dyadic_deltas,
                                            epsilon_from_delta, main_theorem_pipeline, parse_supernatural,
                                            regenerate, rigid_margins, telescope_for_multiplicity,
                                            uhf_schedule, verify_certificate)
from tests.helpers import load_data


class TestSupernatural(unittest.TestCase):
    def test_parse(self):
        self.assertEqual(parse_supernatural('2'), SupernaturalSpec((), (2,)))
        self.assertEqual(parse_supernatural('3,4;2'), SupernaturalSpec((3, 4), (2,)))
        bounded = parse_supernatural('3,4;')
        self.assertTrue(bounded.bounded)
        self.assertIsNone(bounded.factor(3))
        for text in ('x', '1', ''):
            with self.assertRaises(DiagramValidationError):
                parse_supernatural(text)

    def test_factors_cycle_through_repeat(self):
        uhf = parse_supernatural('3;2,5')
        self.assertEqual([uhf.factor(i) for i in range(1, 7)], [3, 2, 5, 2, 5, 2])

    def test_split(self):
        first, second = parse_supernatural('3,4;2').split()
        self.assertEqual(first, SupernaturalSpec((3,), (2,)))
        self.assertEqual(second, SupernaturalSpec((4,), (2,)))
        first, second = parse_supernatural('3,4,5;').split()
        self.assertEqual(first, SupernaturalSpec((3, 5)))
        self.assertEqual(second, SupernaturalSpec((4,)))
        with self.assertRaises(DiagramValidationError):
            parse_supernatural('3;').split()


class TestUhfSchedule(unittest.TestCase):
    def setUp(self):
        self.mult = multiplicity_matrices(load_data('two_column.json', exact=False), 2)

    def test_repeating_two(self):
        schedule = uhf_schedule(self.mult, [1, 1], parse_supernatural('2'))
        self.assertEqual([e['k'] for e in schedule], [2, 4])
        self.assertEqual([e['S'] for e in schedule], [2, 2])
        self.assertEqual([e['r'] for e in schedule], [0, 0])
        self.assertEqual(schedule[0]['u'], 'a')
        self.assertEqual(schedule[0]['need'], 2)

    def test_remainder(self):
        entry = uhf_schedule(self.mult[:1], [1], parse_supernatural('3'))[0]
        self.assertEqual(entry['factors'], [3, 3])
        self.assertEqual((entry['S'], entry['r']), (4, 1))

    def test_bounded_sequence_is_exhausted(self):
        with self.assertRaises(ConstructionError) as ctx:
            uhf_schedule(self.mult, [1, 1], parse_supernatural('2;'))
        self.assertEqual(ctx.exception.gap, 1)
        self.assertEqual(ctx.exception.exit_code, 4)


class TestUhfEmbedding(unittest.TestCase):
    def test_certificate(self):
        base = load_data('two_column.json', exact=False)
        certificate = construct_uhf_embedding(base, 1, parse_supernatural('2'), 2)
        self.assertTrue(certificate.verified, certificate.verification)
        self.assertEqual(certificate.verification['uhf_products']['products'], [4, 4])
        self.assertEqual(certificate.verification['entrywise_margin']['slack'], [0, 0])
        mult = multiplicity_matrices(certificate.spec, 2)
        self.assertEqual(mult[1].entry('a', 'b'), 2)
        self.assertEqual(mult[1].entry('a', 'a'), 2)

    def test_regenerate_reproduces_output(self):
        certificate = construct_uhf_embedding(load_data('br2.json', exact=False), 1, parse_supernatural('2'), 3)
        rebuilt = regenerate(certificate.recipe)
        self.assertEqual(dump_spec(rebuilt.spec), dump_spec(certificate.spec))
        self.assertTrue(verify_certificate(certificate))

    def test_embedded_potentials_are_kept(self):
        base = load_data('br2.json', exact=False)
        certificate = construct_uhf_embedding(base, 1, parse_supernatural('2'), 2)
        potentials = sorted(a.potential for a in certificate.spec.gap_arrows(2) if a.source == 'L' and a.target == 'R')
        self.assertEqual(potentials, [Fraction(0), Fraction(1)])


class TestGroundCeiling(unittest.TestCase):
    def test_disjoint_union(self):
        union = disjoint_union_diagram(load_data('two_column.json', exact=False),
                                       load_data('three_column.json', exact=False), 3)
        self.assertEqual(union.vertices(1), (PLUS_PREFIX + 'v0', MINUS_PREFIX + 'v0'))
        self.assertEqual(len(union.vertices(2)), 5)
        self.assertEqual(len(union.gap_arrows(1)), 2)

    def test_deltas_and_epsilons(self):
        union = disjoint_union_diagram(load_data('two_column.json', exact=False),
                                       load_data('three_column.json', exact=False), 3)
        deltas = dyadic_deltas(multiplicity_matrices(union, 3))
        for j, delta in enumerate(deltas, start=1):
            self.assertLess(delta, Fraction(1, 2))
            self.assertEqual(delta.numerator, 1)
            self.assertEqual(delta.denominator & (delta.denominator - 1), 0)
            epsilon = epsilon_from_delta(delta, j)
            self.assertGreater(epsilon, 0)
            self.assertLess(epsilon, delta / j)

    def test_profiles(self):
        plus = load_data('two_column.json', exact=False)
        minus = load_data('three_column.json', exact=False)
        certificate = construct_ground_ceiling(plus, minus, parse_supernatural('2'), 5, lookahead=2)
        verification = certificate.verification
        self.assertEqual(certificate.kind, GROUND_CEILING)
        self.assertTrue(verification['ground_profile']['passed'], verification['ground_profile'])
        self.assertTrue(verification['ceiling_profile']['passed'], verification['ceiling_profile'])
        self.assertEqual(verification['ground_profile']['block_counts'], [1, 2, 2])
        self.assertEqual(verification['ceiling_profile']['block_counts'], [1, 3, 3])
        self.assertTrue(verification['uhf_products']['passed'])
        self.assertTrue(verification['entrywise_margin']['passed'])
        self.assertTrue(verification['perturbation_hypothesis']['passed'],
                        verification['perturbation_hypothesis'])
        self.assertEqual(len(certificate.schedules['epsilon']), 5)

    def test_profiles_at_depth_twelve(self):
        plus = load_data('two_column.json', exact=False)
        minus = load_data('three_column.json', exact=False)
        certificate = construct_ground_ceiling(plus, minus, parse_supernatural('2'), 12, lookahead=2)
        verification = certificate.verification
        self.assertEqual(verification['ground_profile']['block_counts'], [1] + [2] * 9)
        self.assertEqual(verification['ceiling_profile']['block_counts'], [1] + [3] * 9)
        self.assertTrue(verification['ground_profile']['passed'], verification['ground_profile'])
        self.assertTrue(verification['ceiling_profile']['passed'], verification['ceiling_profile'])
        self.assertTrue(verification['uhf_products']['passed'])
        self.assertTrue(verification['perturbation_hypothesis']['passed'],
                        verification['perturbation_hypothesis'])
        self.assertEqual(len(certificate.schedules['epsilon']), 12)

    def test_shallow_depth(self):
        with self.assertRaises(ConstructionError):
            construct_ground_ceiling(load_data('two_column.json', exact=False),
                                     load_data('three_column.json', exact=False), parse_supernatural('2'), 1)


class TestRigidKms(unittest.TestCase):
    def test_telescope_for_multiplicity(self):
        spec, cuts = telescope_for_multiplicity(load_data('br2.json', exact=False), 2)
        self.assertEqual(cuts, [2, 4])
        for matrix in multiplicity_matrices(spec, 2):
            self.assertGreaterEqual(int(min(matrix.matrix.flat)), 2)

    def test_needs_multiplicity_two(self):
        with self.assertRaises(ConstructionError) as ctx:
            construct_rigid_kms(load_data('br2.json', exact=False), parse_supernatural('2'), 2)
        self.assertEqual(ctx.exception.gap, 1)

    def test_margins_enclose_potential_range(self):
        margins = rigid_margins(load_data('rigid_base.json').expand(3), 2)
        self.assertEqual(margins[0], (Fraction(-5, 4), Fraction(7, 4)))

    def test_rigid_base(self):
        certificate = construct_rigid_kms(load_data('rigid_base.json'), parse_supernatural('2'), 2)
        verification = certificate.verification
        self.assertTrue(verification['multiplicity_scaled'])
        self.assertTrue(verification['potential_margins']['passed'])
        self.assertTrue(verification['block_closeness']['passed'])
        for d in certificate.schedules['D']:
            self.assertGreaterEqual(d, 2)
            self.assertEqual(d & (d - 1), 0)


class TestMainPipeline(unittest.TestCase):
    def test_kms_structure_factorizes(self):
        certificate = main_theorem_pipeline(load_data('br2.json', exact=False),
                                            load_data('two_column.json', exact=False),
                                            load_data('three_column.json', exact=False),
                                            parse_supernatural('2'), 3, lookahead=1)
        self.assertEqual(set(certificate.components), {'ground_ceiling', 'rigid_kms'})
        factorization = certificate.verification['kms_factorization']
        self.assertTrue(factorization['passed'], factorization)
        left = certificate.components['ground_ceiling'].spec.vertices(3)
        right = certificate.components['rigid_kms'].spec.vertices(3)
        # every extreme point, a mixed seed when both sides branch, and the uniform seed
        seeds = len(left) * len(right) + (2 if min(len(left), len(right)) > 1 else 1)
        for beta in ('-1.0', '1.0'):
            self.assertEqual(factorization['per_beta'][beta]['seeds'], seeds)
            self.assertLessEqual(factorization['per_beta'][beta]['defect'], 1e-9)
        self.assertEqual(certificate.schedules['telescope_cuts'], [2, 4, 6, 8])
        self.assertEqual(len(certificate.spec.vertices(2)), 5 * 2)

    def test_factorization_detects_wrong_factor(self):
        spec = load_data('br2.json', exact=False).expand(4)
        combined = product(spec, spec)
        self.assertTrue(_factorization_check(combined, spec, spec, 1.0, 4)['passed'])
        result = _factorization_check(combined, spec, negate_potential(spec), 1.0, 4)
        self.assertFalse(result['passed'])
        self.assertGreater(result['defect'], 1e-3)


if __name__ == '__main__':
    unittest.main()
