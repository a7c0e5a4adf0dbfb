"""
态命令管理器
state 子命令写出 Gibbs / τ∘Q_F / 局部 KMS_∞ / 随机态文件，check 子命令运行 KMS 与基态检验
"""

import json
from typing import Dict, Optional

import numpy as np

from cli.report import CommandReport, exact_flag, load_diagram, read_input
from core.diagram_model import DiagramSpec
from core.exceptions import CertificationError, StateValidationError
from core.geodesic_analysis import TRUNCATED, TightSubdiagram, extract_geodesic_subdiagram
from core.level_algebra import (GeodesicCompression, build_level_algebra, check_ground, check_kms, dump_state,
                                gibbs_state, load_state, local_kms_infinity_state, random_state,
                                trace_to_ground)
from utils.file_helper import get_file_string, get_full_path, write_file
from utils.logger import get_logger

logger = get_logger(__name__)

STATE_KINDS = ('gibbs', 'ground', 'kms-infinity', 'random')


def parse_weights(text: Optional[str]) -> Optional[Dict[str, float]]:
    """JSON 映射文本，或以 @ 开头的文件路径"""
    if text is None:
        return None
    if text.startswith('@'):
        text = get_file_string(get_full_path(text[1:]))
    try:
        weights = json.loads(text)
    except json.JSONDecodeError as e:
        raise StateValidationError(f"weights must be a JSON object: {e}") from e
    if not isinstance(weights, dict):
        raise StateValidationError("weights must be a JSON object mapping vertices to numbers")
    return {str(k): float(v) for k, v in weights.items()}


def uniform_weights(vertices) -> Dict[str, float]:
    return {v: 1.0 / len(vertices) for v in vertices}


class StateManager:
    """有限层态命令管理器"""

    def __init__(self, config):
        self.config = config

    def register(self, subparsers):
        """注册子命令"""
        parser = subparsers.add_parser('state', help='Write a state file on the level-n algebra.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--level', type=int, required=True)
        parser.add_argument('--kind', choices=STATE_KINDS, default='gibbs')
        parser.add_argument('--beta', type=float, default=1.0, help='Inverse temperature for Gibbs states.')
        parser.add_argument('--weights', default=None, help='JSON vertex weights, or @file.')
        parser.add_argument('--out', required=True, help='State file to write.')
        parser.set_defaults(handler=self.cmd_state)

        parser = subparsers.add_parser('check', help='Run the KMS and ground-state checks on a state file.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--level', type=int, required=True)
        parser.add_argument('--state', required=True, help='State JSON file.')
        parser.add_argument('--beta', type=float, default=None, help='Run the KMS check at this beta.')
        parser.add_argument('--ground', action='store_true', help='Run the ground-state check.')
        parser.set_defaults(handler=self.cmd_check)

    def _subdiagram(self, spec: DiagramSpec, n: int) -> TightSubdiagram:
        tolerances = self.config.get_tolerances()
        lookahead = self.config.get_lookahead()
        if not spec.is_periodic:
            lookahead = min(lookahead, spec.prefix_depth - n)
            if lookahead < 0:
                raise CertificationError(f"level {n} is beyond the finite prefix depth {spec.prefix_depth}",
                                         TRUNCATED)
        return extract_geodesic_subdiagram(spec, n, lookahead, self.config.get_stability_window(),
                                           tolerances['tie'], tolerances['tie_ambiguity_factor'])

    def cmd_state(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        tolerances = self.config.get_tolerances()
        weights = parse_weights(args.weights)
        alg = build_level_algebra(spec, args.level, self.config.get_path_cap())

        results: Dict[str, object] = {'kind': args.kind, 'level': args.level}
        if args.kind == 'gibbs':
            state = gibbs_state(alg, args.beta, weights or uniform_weights(alg.vertices))
            results['beta'] = args.beta
        elif args.kind == 'random':
            state = random_state(alg, np.random.default_rng(self.config.get_random_seed()))
            results['seed'] = self.config.get_random_seed()
        else:
            sub = self._subdiagram(spec, args.level)
            compression = GeodesicCompression(alg, sub, tolerances['tie'])
            if args.kind == 'ground':
                state = trace_to_ground(compression, weights or uniform_weights(compression.plus_alg.vertices),
                                        tolerances['stochastic'])
            else:
                state = local_kms_infinity_state(spec, sub, args.level,
                                                 weights or uniform_weights(sub.levels[args.level]),
                                                 alg, tolerances['tie'])
            results['projection_value'] = compression.projection_value(state)
            results['certification'] = sub.certification.label()

        write_file(get_full_path(args.out), dump_state(state, self.config.get_output_precision()))
        results['vertex_weights'] = state.vertex_weights()
        results['notes'] = list(state.notes)
        results['out'] = args.out
        report.results = results

    def cmd_check(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        tolerances = self.config.get_tolerances()
        alg = build_level_algebra(spec, args.level, self.config.get_path_cap())
        state = load_state(read_input(report, 'state', args.state), alg, tolerances['psd'], tolerances['stochastic'])

        results: Dict[str, object] = {'level': args.level, 'dimensions': alg.dimensions()}
        if args.beta is not None:
            results['kms'] = check_kms(alg, state, args.beta, tolerances['kms'])
        if args.ground:
            results['ground'] = check_ground(alg, state, self.config.get_ground_trials(), tolerances['ground'],
                                             self.config.get_random_seed())
            try:
                compression = GeodesicCompression(alg, self._subdiagram(spec, args.level), tolerances['tie'])
                results['projection_value'] = compression.projection_value(state)
            except CertificationError as e:
                logger.warning(f"无法计算 ω(Q_n): {e}")
        if args.beta is None and not args.ground:
            logger.warning("未指定 --beta 或 --ground，只校验了态文件")
        report.results = results
