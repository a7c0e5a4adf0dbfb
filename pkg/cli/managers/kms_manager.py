"""
KMS 命令管理器
kms、kms-infinity 与 matrices 子命令
"""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from cli.report import CommandReport, exact_flag, load_diagram
from core.diagram_model import DiagramSpec
from core.exceptions import IterationBudgetError
from core.geodesic_analysis import extract_geodesic_subdiagram, ground_state_algebra_profile
from core.kms_inverse_limit import (SimplexVector, beta_infinity_transport, kms_vertex_distribution,
                                    multi_seed_distribution)
from core.path_statistics import (convergence_rows, criterion_sweep, gauge_matrix, stochastic_limit_matrix,
                                  stochastic_matrix)
from utils.common_utils import format_number
from utils.file_helper import get_full_path, write_file
from utils.logger import get_logger

logger = get_logger(__name__)

MATRIX_KINDS = ('gauge', 'stochastic', 'limit')
DEFAULT_PERIODIC_DEPTH = 50


def parse_float_list(text: str) -> List[float]:
    """'1,2,-0.5' -> [1.0, 2.0, -0.5]（负数请写成 --beta=-1,2）"""
    return [float(x) for x in text.split(',') if x.strip()]


def parse_int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(',') if x.strip()]


def csv_text(header: Sequence[str], rows: Sequence[Sequence], precision: int) -> str:
    """确定性的 CSV 文本（数值按固定有效数字输出）"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(x, precision) if not isinstance(x, str) else x for x in row])
    return buffer.getvalue()


class KmsManager:
    """KMS 数据命令管理器"""

    def __init__(self, config):
        self.config = config

    def register(self, subparsers):
        """注册子命令"""
        parser = subparsers.add_parser('kms', help='beta-KMS vertex distributions from several seeds.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--beta', type=parse_float_list, required=True, help='Comma separated beta values.')
        parser.add_argument('--levels', type=parse_int_list, default=[1], help='Levels to report.')
        parser.add_argument('--depth', type=int, default=None, help='Product length k (finite prefix: to the end).')
        parser.add_argument('--seeds', type=int, default=None,
                            help='Number of seeds (default: every extreme point and the uniform one).')
        parser.add_argument('--csv', default=None, help='Write the distributions as CSV.')
        parser.set_defaults(handler=self.cmd_kms)

        parser = subparsers.add_parser('kms-infinity', help='beta -> infinity criterion and local KMS_inf data.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--beta-grid', type=parse_float_list, default=None, help='Comma separated beta grid.')
        parser.add_argument('--depth', type=int, default=20, help='Number of gaps in the l1 sums.')
        parser.add_argument('--window', type=int, default=None, help='Tail detection window.')
        parser.add_argument('--transport-depth', type=int, default=None,
                            help='Also transport extreme targets from this depth.')
        parser.add_argument('--csv', default=None, help='Write per-gap l1 distances as CSV.')
        parser.set_defaults(handler=self.cmd_kms_infinity)

        parser = subparsers.add_parser('matrices', help='Dense dumps of projective system matrices.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--kind', choices=MATRIX_KINDS, default='stochastic')
        parser.add_argument('--beta', type=float, default=1.0)
        parser.add_argument('--gaps', type=parse_int_list, default=[1], help='Comma separated gaps.')
        parser.add_argument('--text', default=None, help='Write the dense text dumps to this file.')
        parser.set_defaults(handler=self.cmd_matrices)

    def _map_betas(self, function, betas: Sequence[float]) -> list:
        """按 β 并行；结果保持 β 的输入顺序"""
        workers = self.config.get_max_threads()
        if workers > 1 and len(betas) > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                return list(executor.map(function, betas))
        return [function(b) for b in betas]

    def _seeds(self, spec: DiagramSpec, top: int, count: Optional[int]) -> List[SimplexVector]:
        vertices = spec.vertices(top)
        seeds = [SimplexVector.uniform(top, vertices)] + [SimplexVector.point(top, vertices, v) for v in vertices]
        if count is None:
            return seeds
        rng = np.random.default_rng(self.config.get_random_seed())
        while len(seeds) < count:
            seeds.append(SimplexVector(top, vertices, rng.dirichlet(np.ones(len(vertices)))))
        return seeds[:max(count, 1)]

    def _product_depth(self, spec: DiagramSpec, level: int, depth: Optional[int]) -> int:
        if depth is not None:
            return depth
        if spec.is_periodic:
            return DEFAULT_PERIODIC_DEPTH
        return spec.prefix_depth - level

    def cmd_kms(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        tolerances = self.config.get_tolerances()
        budget = self.config.get_iteration_budget()

        def run(beta):
            levels = []
            for level in args.levels:
                depth = self._product_depth(spec, level, args.depth)
                seeds = self._seeds(spec, level + depth, args.seeds)
                result = multi_seed_distribution(spec, beta, level, depth, seeds, tolerances['convergence'],
                                                 budget, tolerances['tie'])
                if spec.is_periodic and not result['converged']:
                    raise IterationBudgetError(
                        f"vertex distribution at beta={beta}, level {level} did not converge within "
                        f"{budget} steps", max(result['residuals']))
                uniform = result['distributions'][0]
                levels.append({
                    'level': level,
                    'depth': uniform['depth'],
                    'distribution': uniform['values'],
                    'residual': max(result['residuals']),
                    'seeds': result['seeds'],
                    'agreement': result['agreement'],
                    'agree': result['agree'],
                    'converged': result['converged'],
                    'tolerance': tolerances['convergence'],
                })
            return {'beta': float(beta), 'levels': levels}

        per_beta = self._map_betas(run, args.beta)
        report.results = {'betas': per_beta, 'note': 'agreement is measured over the listed seeds only'}
        if args.csv:
            rows = [
                (entry['beta'], level['level'], vertex, value, level['residual'], level['agreement'])
                for entry in per_beta for level in entry['levels']
                for vertex, value in level['distribution'].items()
            ]
            write_file(get_full_path(args.csv), csv_text(
                ('beta', 'level', 'vertex', 'probability', 'residual', 'agreement'), rows,
                self.config.get_output_precision()))
            report.results['csv'] = args.csv

    def cmd_kms_infinity(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        tolerances = self.config.get_tolerances()
        grid = args.beta_grid or self.config.get_beta_grid()
        window = self.config.get_stability_window() if args.window is None else args.window

        sweep = criterion_sweep(spec, grid, args.depth, window, tolerances['criterion'], tolerances['tie'],
                                self.config.get_max_threads())
        lookahead = self.config.get_lookahead()
        profile_depth = min(3, args.depth) if spec.is_periodic else max(0, min(3, spec.prefix_depth - lookahead))
        sub = extract_geodesic_subdiagram(spec, profile_depth, lookahead, window,
                                          tolerances['tie'], tolerances['tie_ambiguity_factor'])
        profile = ground_state_algebra_profile(sub)

        if sweep['holds']:
            conclusion = 'criterion holds: all local KMS_inf states are KMS_inf states'
        else:
            conclusion = f"criterion fails: {sweep['reason']}"
        report.results = {
            'criterion': {'holds': sweep['holds'], 'reason': sweep['reason'], 'threshold': sweep['threshold']},
            'conclusion': conclusion,
            'reports': sweep['reports'],
            'local_kms_infinity_simplex': {
                'block_counts': profile.block_counts(),
                'dimension': profile.block_counts()[-1] - 1,
                'certification': sub.certification.to_dict(),
            },
        }

        if not sweep['holds'] and (spec.is_periodic or spec.prefix_depth > 1):
            depth = DEFAULT_PERIODIC_DEPTH if spec.is_periodic else spec.prefix_depth - 1
            candidate = kms_vertex_distribution(spec, max(grid), 1, depth, tol=tolerances['convergence'],
                                                budget=self.config.get_iteration_budget())
            report.results['kms_infinity_candidate'] = {
                'beta': float(max(grid)),
                'level': 1,
                'distribution': candidate.to_dict()['values'],
                'residual': candidate.residual,
                'note': f"limit of beta-KMS vertex distributions along the grid (largest beta {max(grid)})",
            }

        if args.transport_depth:
            depth = args.transport_depth if spec.is_periodic else min(args.transport_depth, spec.prefix_depth)
            vertices = spec.vertices(depth)
            transports = []
            for vertex in vertices:
                target = SimplexVector.point(depth, vertices, vertex)
                result = beta_infinity_transport(spec, target, grid, depth, tie_tol=tolerances['tie'],
                                                 max_workers=self.config.get_max_threads())
                floor = min(r['max_distance'] for r in result['reports'])
                transports.append({'target': vertex, 'l1_floor': floor, 'reports': result['reports']})
            report.results['transport'] = {'depth': depth, 'targets': transports}

        if args.csv:
            rows = [row for r in sweep['reports'] for row in convergence_rows(r)]
            write_file(get_full_path(args.csv), csv_text(
                ('gap', 'beta', 'l1_distance', 'partial_sum'), rows, self.config.get_output_precision()))
            report.results['csv'] = args.csv
        logger.info(conclusion)

    def cmd_matrices(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        tolerances = self.config.get_tolerances()
        precision = self.config.get_output_precision()
        matrices = []
        for gap in args.gaps:
            if args.kind == 'gauge':
                matrix = gauge_matrix(spec, gap, args.beta)
            elif args.kind == 'stochastic':
                matrix = stochastic_matrix(spec, gap, args.beta, tolerances['tie'])
            else:
                matrix = stochastic_limit_matrix(spec, gap, tolerances['tie'], tolerances['tie_ambiguity_factor'])
            matrices.append(matrix)
        report.results = {
            'kind': args.kind,
            'beta': None if args.kind == 'limit' else args.beta,
            'matrices': [
                {'gap': m.gap, 'rows': list(m.rows), 'cols': list(m.cols), 'matrix': m.matrix,
                 'column_sums': m.column_sums(),
                 'exact': None if m.exact_matrix is None else [[str(x) for x in row] for row in m.exact_matrix]}
                for m in matrices
            ],
        }
        if args.text:
            write_file(get_full_path(args.text), '\n'.join(m.dump(precision) for m in matrices))
            report.results['text'] = args.text
