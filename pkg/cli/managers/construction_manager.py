"""
构造命令管理器
construct 子命令组：uhf-embed、ground-ceiling、rigid-kms、main 与 regenerate
"""

from cli.report import CommandReport, exact_flag, load_diagram, read_input
from core.diagram_model import dump_spec, load_spec
from core.exceptions import ConstructionError
from core.realization_constructions import (DEFAULT_LOOKAHEAD, ConstructionCertificate, construct_ground_ceiling,
                                            construct_rigid_kms, construct_uhf_embedding, main_theorem_pipeline,
                                            parse_supernatural, regenerate, telescope_for_multiplicity)
from utils.common_utils import dumps_deterministic
from utils.file_helper import get_full_path, get_object_from_file, write_file
from utils.logger import get_logger

logger = get_logger(__name__)


class ConstructionManager:
    """构造命令管理器"""

    def __init__(self, config):
        self.config = config

    def register(self, subparsers):
        """注册 construct 及其子命令"""
        construct = subparsers.add_parser('construct', help='Run a diagram construction and certify it.')
        constructions = construct.add_subparsers(dest='construction')
        constructions.required = True

        parser = constructions.add_parser('uhf-embed', help='Fatten a diagram inside a UHF algebra.')
        parser.add_argument('--base', required=True, help='Base diagram JSON file.')
        parser.add_argument('--margin', type=int, default=1, help='Entrywise margin m_j.')
        self._common(parser)

        parser = constructions.add_parser('ground-ceiling', help='Prescribed ground and ceiling structure.')
        parser.add_argument('--plus', required=True, help='Diagram presenting the ground-state algebra.')
        parser.add_argument('--minus', required=True, help='Diagram presenting the ceiling-state algebra.')
        self._common(parser)

        parser = constructions.add_parser('rigid-kms', help='One ground and one ceiling state, same KMS data.')
        parser.add_argument('--base', required=True, help='Diagram with potential F.')
        parser.add_argument('--telescope', action='store_true',
                            help='Telescope the base to multiplicity >= 2 first.')
        self._common(parser)

        parser = constructions.add_parser('main', help='Product of the ground/ceiling and rigid constructions.')
        parser.add_argument('--potential', required=True, help='Diagram with the prescribed KMS structure.')
        parser.add_argument('--plus', required=True)
        parser.add_argument('--minus', required=True)
        self._common(parser)

        parser = constructions.add_parser('regenerate', help='Rebuild a certificate from its recipe.')
        parser.add_argument('--certificate', required=True, help='Certificate JSON file.')
        parser.add_argument('--depth', type=int, default=None, help='New depth (default: the recorded one).')
        parser.add_argument('--out', required=True, help='Certificate file to write.')
        parser.add_argument('--diagram-out', default=None, help='Also write the output diagram.')
        parser.set_defaults(handler=self.cmd_construct)

    def _common(self, parser):
        parser.add_argument('--uhf', default='2', help='Supernatural sequence: "2", "3,4;2" or "3,4;".')
        parser.add_argument('--depth', type=int, default=8)
        parser.add_argument('--lookahead', type=int, default=DEFAULT_LOOKAHEAD)
        parser.add_argument('--out', required=True, help='Certificate file to write.')
        parser.add_argument('--diagram-out', default=None, help='Also write the output diagram.')
        parser.set_defaults(handler=self.cmd_construct)

    def _build(self, args, report: CommandReport) -> ConstructionCertificate:
        exact = exact_flag(args, self.config)
        name = args.construction
        if name == 'regenerate':
            recipe = get_object_from_file(get_full_path(args.certificate))['recipe']
            read_input(report, 'certificate', args.certificate)
            return regenerate(recipe, args.depth)

        uhf = parse_supernatural(args.uhf)
        if name == 'uhf-embed':
            base = load_diagram(report, 'base', args.base, exact)
            return construct_uhf_embedding(base, args.margin, uhf, args.depth)
        if name == 'ground-ceiling':
            plus = load_diagram(report, 'plus', args.plus, exact)
            minus = load_diagram(report, 'minus', args.minus, exact)
            return construct_ground_ceiling(plus, minus, uhf, args.depth, args.lookahead)
        if name == 'rigid-kms':
            base = load_diagram(report, 'base', args.base, exact)
            if args.telescope:
                base, cuts = telescope_for_multiplicity(base, args.depth + 1)
                report.results['telescope_cuts'] = cuts
            return construct_rigid_kms(base, uhf, args.depth, args.lookahead)
        potential = load_diagram(report, 'potential', args.potential, exact)
        plus = load_diagram(report, 'plus', args.plus, exact)
        minus = load_diagram(report, 'minus', args.minus, exact)
        return main_theorem_pipeline(potential, plus, minus, uhf, args.depth, args.lookahead)

    def cmd_construct(self, args, report: CommandReport):
        certificate = self._build(args, report)
        precision = self.config.get_output_precision()

        diagram_text = dump_spec(certificate.spec)
        # 输出图表必须能被 load_spec 重新读入
        reloaded = load_spec(diagram_text, exact=True)
        if dump_spec(reloaded) != diagram_text:
            raise ConstructionError("the output diagram does not survive a reload")

        write_file(get_full_path(args.out), dumps_deterministic(certificate.to_document(), precision))
        if args.diagram_out:
            write_file(get_full_path(args.diagram_out), diagram_text + "\n")

        report.results.update({
            'construction': certificate.kind,
            'verified': certificate.verified,
            'verification': certificate.verification,
            'components': {name: c.verified for name, c in certificate.components.items()},
            'schedules': certificate.schedules,
            'output_fingerprint': reloaded.fingerprint,
            'certificate': args.out,
        })
        if not certificate.verified:
            failed = [k for k, v in certificate.verification.items() if not _passed(v)]
            report.exit_code = ConstructionError.exit_code
            report.warnings.append(f"certificate verification failed: {failed}")
            logger.error(f"构造证书验证失败: {failed}")


def _passed(value) -> bool:
    if isinstance(value, dict):
        return bool(value.get('passed', True))
    return bool(value)
