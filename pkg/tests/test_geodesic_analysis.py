"""Tests for the tight subdiagram Br+ and the ground-state profile."""

import unittest

import numpy as np

from core.diagram_model import FinitePath, negate_potential, product
from core.exceptions import CertificationError
from core.geodesic_analysis import (EXACT, TRUNCATED, extract_geodesic_subdiagram, geodesic_prefix_data,
                                    ground_state_algebra_profile, profile_label, subdiagram_dot,
                                    subdiagram_report)
from tests.helpers import brute_force_minima, load_data, load_document, random_diagram


def column_path(spec, vertex, n):
    """沿 vertex 列的长度为 n 的路径（第一步由 v0 出发）"""
    path = FinitePath(0, ())
    here = spec.root
    for gap in range(1, n + 1):
        arrow = next(a for a in spec.gap_arrows(gap) if a.source == here and a.target == vertex)
        path = path.extend(arrow)
        here = vertex
    return path


class TestTightSubdiagram(unittest.TestCase):
    def test_br1_single_column(self):
        sub = extract_geodesic_subdiagram(load_data('br1.json', exact=False), 6)
        self.assertEqual(sub.certification.kind, EXACT)
        self.assertEqual(sub.certification.label(), 'Exact')
        for n in range(1, 7):
            self.assertEqual(sub.levels[n], ('L',))
            self.assertEqual(geodesic_prefix_data(sub, n).total, 1)
        profile = ground_state_algebra_profile(sub)
        self.assertEqual(profile.uniform_label(), 'C')
        self.assertEqual(profile.extreme_ground_state_count(), 1)

    def test_br2_two_columns(self):
        spec = load_data('br2.json', exact=False)
        sub = extract_geodesic_subdiagram(spec, 5)
        self.assertTrue(sub.certification.exact)
        for n in range(1, 6):
            self.assertEqual(sub.levels[n], ('L', 'R'))
            self.assertEqual(sub.min_potential[n], {'L': 0.0, 'R': 0.0})
        for gap_arrows in sub.arrows[1:]:
            self.assertTrue(all(a.source == a.target for a in gap_arrows))
        profile = ground_state_algebra_profile(sub)
        self.assertEqual(profile.labels()[0], 'C')
        self.assertEqual(profile.uniform_label(), 'C ⊕ C')
        self.assertEqual(profile.block_counts(), [1, 2, 2, 2, 2, 2])
        self.assertEqual(profile.extreme_ground_state_count(), 2)

    def test_br2_ceiling_uses_cross_arrows(self):
        spec = negate_potential(load_data('br2.json', exact=False))
        sub = extract_geodesic_subdiagram(spec, 5)
        for gap_arrows in sub.arrows[1:]:
            self.assertTrue(gap_arrows)
            self.assertTrue(all(a.source != a.target for a in gap_arrows))
        for n in range(1, 6):
            self.assertEqual(sub.min_potential[n], {'L': -(n - 1.0), 'R': -(n - 1.0)})
            self.assertEqual(geodesic_prefix_data(sub, n).per_vertex, {'L': 1, 'R': 1})
        self.assertEqual(ground_state_algebra_profile(sub).uniform_label(), 'C ⊕ C')

    def test_non_stationary_repeat_is_truncated(self):
        sub = extract_geodesic_subdiagram(load_data('growing_cross.json', exact=False), 4, lookahead=3)
        self.assertEqual(sub.certification.kind, TRUNCATED)
        self.assertTrue(sub.certification.stable)
        self.assertEqual(sub.certification.label(), 'TruncatedAtDepth(N=4, L=3)')
        self.assertEqual(sub.levels[4], ('L', 'R'))

    def test_finite_prefix(self):
        spec = load_data('br2.json', exact=False).expand(8)
        sub = extract_geodesic_subdiagram(spec, 3, lookahead=5)
        self.assertEqual(sub.certification.kind, TRUNCATED)
        self.assertEqual(sub.levels[3], ('L', 'R'))
        with self.assertRaises(CertificationError) as ctx:
            geodesic_prefix_data(sub, 4)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_dead_end_vertex_is_pruned(self):
        spec = load_document({
            'levels': [['v0'], ['a', 'b']],
            'arrows': [{'gap': 1, 'from': 'v0', 'to': 'a'}, {'gap': 1, 'from': 'v0', 'to': 'b'}],
            'repeat': {'from_level': 1, 'vertices': ['a', 'b'], 'arrows': [
                {'from': 'a', 'to': 'a', 'potential': 0},
                {'from': 'a', 'to': 'b', 'potential': 0},
                {'from': 'b', 'to': 'a', 'potential': 5},
                {'from': 'b', 'to': 'b', 'potential': 5},
            ]},
        }, exact=False)
        sub = extract_geodesic_subdiagram(spec, 4)
        self.assertEqual(sub.certification.kind, EXACT)
        self.assertEqual(sub.levels[0], ('v0',))
        for n in range(1, 5):
            self.assertEqual(sub.levels[n], ('a',))
        truncated = extract_geodesic_subdiagram(spec.expand(6), 3, lookahead=2)
        self.assertEqual(truncated.certification.kind, TRUNCATED)
        self.assertEqual(truncated.levels[1:], (('a',),) * 3)

    def test_product_of_subdiagrams(self):
        combined = product(load_data('br1.json', exact=False), load_data('br2.json', exact=False))
        sub = extract_geodesic_subdiagram(combined, 4)
        self.assertTrue(sub.certification.exact)
        for n in range(1, 5):
            self.assertEqual(sub.levels[n], ('L|L', 'L|R'))

    def test_surviving_paths_are_minimal(self):
        rng = np.random.default_rng(41)
        for _ in range(6):
            spec = random_diagram(rng, 5)
            sub = extract_geodesic_subdiagram(spec, 2, lookahead=3, window=0)
            for n in range(1, 3):
                minima = brute_force_minima(spec, n)
                data = geodesic_prefix_data(sub, n)
                self.assertEqual(len(data.paths), data.total)
                for path in data.paths:
                    self.assertEqual(float(path.potential), minima[path.range][0])
                    self.assertIn(path.range, sub.levels[n])


class TestGeodesicPrefixes(unittest.TestCase):
    def test_membership(self):
        spec = load_data('br2.json', exact=False)
        sub = extract_geodesic_subdiagram(spec, 3)
        data = geodesic_prefix_data(sub, 3)
        self.assertEqual(data.total, 2)
        self.assertTrue(data.contains(column_path(spec, 'L', 3)))
        self.assertTrue(data.contains(column_path(spec, 'R', 3)))

        crossing = FinitePath(0, ())
        crossing = crossing.extend(next(a for a in spec.gap_arrows(1) if a.target == 'L'))
        crossing = crossing.extend(next(a for a in spec.gap_arrows(2) if a.source == 'L' and a.target == 'R'))
        crossing = crossing.extend(next(a for a in spec.gap_arrows(3) if a.source == 'R' and a.target == 'R'))
        self.assertFalse(data.contains(crossing))
        self.assertFalse(data.contains(column_path(spec, 'L', 2)))

    def test_multiplicity_enlarges_blocks(self):
        spec = load_data('rigid_base.json')
        sub = extract_geodesic_subdiagram(spec, 3)
        profile = ground_state_algebra_profile(sub)
        # x 列每步 2 条紧箭头，y 列每步 3 条
        self.assertEqual(sub.levels[3], ('x', 'y'))
        self.assertEqual(profile.block_sizes[3], {'x': 8, 'y': 18})
        self.assertEqual(profile.label(3), 'M_8 ⊕ M_18')
        self.assertIsNone(profile.extreme_ground_state_count())

    def test_profile_label(self):
        self.assertEqual(profile_label([1, 1]), 'C ⊕ C')
        self.assertEqual(profile_label([2, 1]), 'M_2 ⊕ C')
        self.assertEqual(profile_label([]), '0')

    def test_reports(self):
        sub = extract_geodesic_subdiagram(load_data('br1.json', exact=False), 2)
        report = subdiagram_report(sub)
        self.assertEqual(report['surviving_vertices'], [['v0'], ['L'], ['L']])
        self.assertEqual(report['certification']['kind'], EXACT)
        self.assertIn('color=red', subdiagram_dot(sub))


if __name__ == '__main__':
    unittest.main()
