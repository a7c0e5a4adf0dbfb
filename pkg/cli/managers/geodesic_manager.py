"""
测地命令管理器
validate 与 geodesics 子命令：图表校验、Br⁺ / Br⁻ 剖面与 DOT 导出
"""

from cli.report import CommandReport, exact_flag, load_diagram
from core.diagram_model import multiplicity_matrices, negate_potential
from core.exceptions import CertificationError
from core.geodesic_analysis import (TRUNCATED, extract_geodesic_subdiagram, geodesic_prefix_data,
                                    ground_state_algebra_profile, subdiagram_dot, subdiagram_report)
from utils.file_helper import get_full_path, write_file
from utils.logger import get_logger

logger = get_logger(__name__)


class GeodesicManager:
    """图表与测地子图命令管理器"""

    def __init__(self, config):
        self.config = config

    def register(self, subparsers):
        """注册子命令"""
        parser = subparsers.add_parser('validate', help='Load a diagram file and report its shape.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.set_defaults(handler=self.cmd_validate)

        parser = subparsers.add_parser('geodesics', help='Ground-state (or ceiling-state) profile from Br+.')
        parser.add_argument('file', help='Diagram JSON file.')
        parser.add_argument('--depth', type=int, default=5, help='Number of levels to certify.')
        parser.add_argument('--lookahead', type=int, default=None, help='Lookahead for finite prefixes.')
        parser.add_argument('--neg', action='store_true', help='Use -F (ceiling states).')
        parser.add_argument('--dot', default=None, help='Write a DOT file with Br+ highlighted.')
        parser.set_defaults(handler=self.cmd_geodesics)

    def cmd_validate(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        depth = max(spec.prefix_depth, 1) if spec.is_periodic else spec.prefix_depth
        mult = multiplicity_matrices(spec, depth) if depth else []
        report.results = {
            'valid': True,
            'presentation': spec.presentation,
            'prefix_depth': spec.prefix_depth,
            'exact': spec.exact,
            'fingerprint': spec.fingerprint,
            'vertices_per_level': [len(spec.vertices(j)) for j in range(depth + 1)],
            'arrows_per_gap': [sum(a.multiplicity for a in spec.gap_arrows(g)) for g in range(1, depth + 1)],
            'min_multiplicity': min((int(min(m.matrix.flat)) for m in mult), default=None),
            'repeat': None if spec.repeat is None else {
                'from_level': spec.repeat.from_level,
                'vertices': list(spec.repeat.vertices),
                'stationary': spec.repeat.stationary,
            },
        }

    def cmd_geodesics(self, args, report: CommandReport):
        spec = load_diagram(report, 'diagram', args.file, exact_flag(args, self.config))
        side = 'ceiling' if args.neg else 'ground'
        if args.neg:
            spec = negate_potential(spec)

        tolerances = self.config.get_tolerances()
        lookahead = self.config.get_lookahead() if args.lookahead is None else args.lookahead
        if not spec.is_periodic and args.depth + lookahead > spec.prefix_depth:
            raise CertificationError(
                f"depth {args.depth} with lookahead {lookahead} exceeds the finite prefix depth "
                f"{spec.prefix_depth}", TRUNCATED)

        sub = extract_geodesic_subdiagram(
            spec, args.depth, lookahead, self.config.get_stability_window(),
            tolerances['tie'], tolerances['tie_ambiguity_factor'])
        profile = ground_state_algebra_profile(sub)
        certification = sub.certification.label()
        uniform = profile.uniform_label()
        if uniform is not None:
            summary = f"{side}-state profile: {uniform} at every level; certification: {certification}"
        else:
            summary = f"{side}-state profile: {' | '.join(profile.labels()[1:])}; certification: {certification}"
        extreme = profile.extreme_ground_state_count()

        materialize_cap = self.config.get_materialize_cap()
        report.results = {
            'side': side,
            'summary': summary,
            'labels': profile.labels(),
            'block_counts': profile.block_counts(),
            'block_sizes': [dict(sizes) for sizes in profile.block_sizes],
            'geodesic_paths': [geodesic_prefix_data(sub, n, materialize_cap=0).total
                               for n in range(args.depth + 1)],
            'extreme_states': extreme,
            'extreme_states_note': None if extreme is None else f"{extreme} extreme {side} states",
            'certification': sub.certification.to_dict(),
            'subdiagram': subdiagram_report(sub),
        }
        if args.depth <= 8:
            data = geodesic_prefix_data(sub, args.depth, materialize_cap)
            if data.paths is not None and len(data.paths) <= 64:
                report.results['geodesic_prefixes'] = [p.label() for p in data.paths]
        if args.dot:
            write_file(get_full_path(args.dot), subdiagram_dot(sub, f"{side} geodesics"))
            report.results['dot'] = args.dot
        logger.info(summary)
