"""Tests for the diagram model: validation, serialization and structural operations."""

import os
import unittest
from collections import Counter
from fractions import Fraction
from unittest import mock

import numpy as np

from core.diagram_model import (EVENTUALLY_PERIODIC, FINITE_PREFIX, dump_spec, enumerate_paths, load_spec,
                                multiplicity_matrices, negate_potential, product, telescope, to_dot)
from core.exceptions import CapacityExceededError, DiagramValidationError
from core.path_statistics import compute_level_stats
from tests.helpers import brute_force_paths, load_data, load_document, random_diagram


def expanded_potentials(spec, gap):
    """(source, target) -> 按重数展开后的势能多重集"""
    grouped = {}
    for arrow in spec.gap_arrows(gap):
        grouped.setdefault((arrow.source, arrow.target), Counter())[float(arrow.potential)] += arrow.multiplicity
    return grouped


class TestLoadAndValidate(unittest.TestCase):
    def test_periodic_file(self):
        spec = load_data('br2.json', exact=False)
        self.assertEqual(spec.presentation, EVENTUALLY_PERIODIC)
        self.assertEqual(spec.prefix_depth, 1)
        for j in range(1, 6):
            self.assertEqual(spec.vertices(j), ('L', 'R'))
        self.assertIsNone(spec.max_depth)

    def test_single_vertex_chain(self):
        spec = load_data('chain.json', exact=False)
        self.assertEqual(spec.vertices(7), ('v0',))
        self.assertEqual(len(enumerate_paths(spec, 6)), 1)

    def test_repeat_potential_grows_with_step(self):
        spec = load_data('growing_cross.json', exact=False)
        for gap in range(2, 8):
            cross = [a.potential for a in spec.gap_arrows(gap) if a.source != a.target]
            self.assertEqual(cross, [float(gap), float(gap)])
        self.assertFalse(spec.repeat.stationary)

    def test_sink_is_reported_with_coordinates(self):
        document = {
            'levels': [['v0'], ['a'], ['b', 'c'], ['d']],
            'arrows': [
                {'gap': 1, 'from': 'v0', 'to': 'a'},
                {'gap': 2, 'from': 'a', 'to': 'b'},
                {'gap': 2, 'from': 'a', 'to': 'c'},
                {'gap': 3, 'from': 'b', 'to': 'd'},
            ],
        }
        with self.assertRaises(DiagramValidationError) as ctx:
            load_document(document, exact=False)
        self.assertEqual(ctx.exception.kind, 'sink')
        self.assertEqual(ctx.exception.level, 2)
        self.assertEqual(ctx.exception.vertex, 'c')
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_unreachable_vertex(self):
        document = {'levels': [['v0'], ['a', 'b']], 'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a'}]}
        with self.assertRaises(DiagramValidationError) as ctx:
            load_document(document, exact=False)
        self.assertEqual(ctx.exception.kind, 'unreachable')
        self.assertEqual((ctx.exception.level, ctx.exception.vertex), (1, 'b'))

    def test_level_mismatch(self):
        document = {'levels': [['v0'], ['a']], 'arrows': [{'gap': 1, 'from': 'a', 'to': 'a'}]}
        with self.assertRaises(DiagramValidationError) as ctx:
            load_document(document, exact=False)
        self.assertEqual(ctx.exception.kind, 'level_mismatch')

    def test_schema_errors(self):
        bad_documents = [
            {'levels': [['v0', 'w0'], ['a']], 'arrows': []},
            {'levels': [['v0'], ['a']], 'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a', 'potential': 'x'}]},
            {'levels': [['v0'], ['a']], 'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a', 'count': 0}]},
            {'levels': [['v0'], ['a']], 'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a'}], 'colour': 'red'},
            {'levels': [['v0'], ['a']], 'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a'}],
             'repeat': {'from_level': 0, 'vertices': ['a'], 'arrows': [{'from': 'a', 'to': 'a'}]}},
        ]
        for document in bad_documents:
            with self.assertRaises(DiagramValidationError) as ctx:
                load_document(document, exact=False)
            self.assertEqual(ctx.exception.kind, 'schema')

    def test_invalid_json(self):
        with self.assertRaises(DiagramValidationError):
            load_spec('{"levels": [', exact=False)

    def test_exact_mode_reads_rationals(self):
        spec = load_data('rigid_base.json')
        self.assertTrue(spec.exact)
        potentials = sorted(a.potential for a in spec.gap_arrows(1))
        self.assertEqual(potentials, [Fraction(0), Fraction(1, 2)])
        self.assertTrue(all(isinstance(a.potential, Fraction) for a in spec.gap_arrows(4)))

    def test_exact_environment_variable(self):
        with mock.patch.dict(os.environ, {'BRATTELI_EXACT': '1'}):
            spec = load_data('br2.json')
        self.assertTrue(spec.exact)
        self.assertFalse(load_data('rigid_base.json', exact=False).exact)

    def test_finite_prefix_depth_is_enforced(self):
        spec = load_data('br2.json', exact=False).expand(3)
        self.assertEqual(spec.presentation, FINITE_PREFIX)
        with self.assertRaises(DiagramValidationError) as ctx:
            spec.gap_arrows(4)
        self.assertEqual(ctx.exception.kind, 'depth')


class TestSerialization(unittest.TestCase):
    def test_dump_is_stable_under_reload(self):
        rng = np.random.default_rng(7)
        specs = [load_data('br1.json', exact=False), load_data('rigid_base.json'),
                 load_data('growing_cross.json', exact=False), random_diagram(rng, 3)]
        for spec in specs:
            text = dump_spec(spec)
            self.assertEqual(dump_spec(load_spec(text)), text)

    def test_fingerprint_tracks_content(self):
        br1 = load_data('br1.json', exact=False)
        br2 = load_data('br2.json', exact=False)
        self.assertEqual(br1.fingerprint, load_data('br1.json', exact=False).fingerprint)
        self.assertNotEqual(br1.fingerprint, br2.fingerprint)

    def test_dot_export(self):
        spec = load_data('br2.json', exact=False)
        text = to_dot(spec, 2, highlight_vertices={(1, 'L')})
        self.assertTrue(text.startswith('digraph'))
        self.assertIn('color=red', text)
        self.assertEqual(text.count('->'), 2 + 4)


class TestMultiplicity(unittest.TestCase):
    def test_br2_matrices(self):
        mult = multiplicity_matrices(load_data('br2.json', exact=False), 3)
        np.testing.assert_array_equal(mult[0].matrix.astype(int), [[1], [1]])
        for matrix in mult[1:]:
            np.testing.assert_array_equal(matrix.matrix.astype(int), [[1, 1], [1, 1]])
        self.assertEqual(mult[0].rows, ('L', 'R'))
        self.assertEqual(mult[0].cols, ('v0',))

    def test_counts_are_summed(self):
        mult = multiplicity_matrices(load_data('rigid_base.json'), 2)
        self.assertEqual(mult[1].entry('y', 'y'), 3)
        self.assertEqual(mult[1].entry('x', 'y'), 2)


class TestTelescope(unittest.TestCase):
    def test_br2_telescoped_potentials(self):
        spec = telescope(load_data('br2.json', exact=False), [2, 4])
        self.assertEqual(spec.prefix_depth, 2)
        first = expanded_potentials(spec, 1)
        self.assertEqual(first[('v0', 'L')], Counter({0.0: 1, 1.0: 1}))
        self.assertEqual(first[('v0', 'R')], Counter({0.0: 1, 1.0: 1}))
        second = expanded_potentials(spec, 2)
        from_l = sorted(p for (s, _), c in second.items() if s == 'L' for p in c.elements())
        self.assertEqual(from_l, [0.0, 1.0, 1.0, 2.0])

    def test_path_counts_survive(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            spec = random_diagram(rng, 4)
            cuts = [1, 3, 4]
            shorter = telescope(spec, cuts)
            original = compute_level_stats(spec, 4, use_cache=False)
            telescoped = compute_level_stats(shorter, 3, use_cache=False)
            for new_level, old_level in enumerate(cuts, start=1):
                self.assertEqual(telescoped[new_level].path_count, original[old_level].path_count)
                self.assertEqual(telescoped[new_level].min_potential, original[old_level].min_potential)

    def test_composition(self):
        rng = np.random.default_rng(5)
        spec = random_diagram(rng, 4)
        direct = telescope(spec, [2, 4])
        staged = telescope(telescope(spec, [1, 2, 3, 4]), [2, 4])
        for gap in (1, 2):
            self.assertEqual(expanded_potentials(direct, gap), expanded_potentials(staged, gap))

    def test_bad_cuts(self):
        spec = load_data('br2.json', exact=False)
        for cuts in ([], [0, 2], [3, 3], [4, 2]):
            with self.assertRaises(DiagramValidationError):
                telescope(spec, cuts)


class TestProductAndNegation(unittest.TestCase):
    def test_product_counts_and_minima(self):
        rng = np.random.default_rng(3)
        first, second = random_diagram(rng, 3), random_diagram(rng, 3)
        combined = product(first, second)
        stats_a = compute_level_stats(first, 3, use_cache=False)
        stats_b = compute_level_stats(second, 3, use_cache=False)
        stats = compute_level_stats(combined, 3, use_cache=False)
        for v in first.vertices(3):
            for w in second.vertices(3):
                name = f"{v}|{w}"
                self.assertEqual(stats[3].path_count[name], stats_a[3].path_count[v] * stats_b[3].path_count[w])
                self.assertEqual(stats[3].min_potential[name],
                                 stats_a[3].min_potential[v] + stats_b[3].min_potential[w])

    def test_product_of_periodic_diagrams_is_periodic(self):
        combined = product(load_data('br1.json', exact=False), load_data('br2.json', exact=False))
        self.assertTrue(combined.is_periodic)
        self.assertEqual(combined.vertices(5), ('L|L', 'L|R', 'R|L', 'R|R'))

    def test_negation_is_an_involution(self):
        spec = load_data('growing_cross.json', exact=False)
        self.assertEqual(dump_spec(negate_potential(negate_potential(spec))), dump_spec(spec))
        negated = negate_potential(spec)
        self.assertEqual(sorted(float(a.potential) for a in negated.gap_arrows(4)), [-4.0, -4.0, 0.0, 0.0])


class TestEnumeration(unittest.TestCase):
    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        spec = random_diagram(rng, 3)
        paths = enumerate_paths(spec, 3)
        expected = sorted(p for _, p in brute_force_paths(spec, 3))
        self.assertEqual(sorted(float(p.potential) for p in paths), expected)

    def test_cap(self):
        with self.assertRaises(CapacityExceededError):
            enumerate_paths(load_data('br2.json', exact=False), 3, cap=4)


if __name__ == '__main__':
    unittest.main()
