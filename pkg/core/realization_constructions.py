"""
实现构造模块
构造带势能的图表以实现指定的基态 / 天花板态 / KMS 结构：UHF 加粗嵌入、基态-天花板构造、
刚性 KMS 构造及其乘积流水线，每个构造输出可重新验证的证书
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.diagram_model import (Arrow, DiagramSpec, build_spec, dump_spec, load_spec, multiplicity_matrices,
                                negate_potential, product, spec_to_document, telescope)
from core.exceptions import ConstructionError, DiagramValidationError
from core.geodesic_analysis import extract_geodesic_subdiagram, geodesic_prefix_data
from core.kms_inverse_limit import (SimplexVector, kms_vertex_distribution, multi_seed_distribution,
                                    perturbation_epsilons, verify_perturbation_hypothesis)
from core.path_statistics import gauge_matrix
from utils.common_utils import sha256_text
from utils.logger import get_logger
from utils.matrix_utils import l1_distance, spectral_norm

logger = get_logger(__name__)

UHF_EMBED = 'uhf-embed'
GROUND_CEILING = 'ground-ceiling'
RIGID_KMS = 'rigid-kms'
MAIN_PIPELINE = 'main'

ROOT = 'v0'
PLUS_PREFIX = '+:'
MINUS_PREFIX = '-:'

EPSILON_MARGIN = Fraction(2 ** 40 - 1, 2 ** 40)
MARGIN_FRACTION = Fraction(1, 10)
BETA_SAMPLES = 50
PROBE_BETAS = (-2.0, -1.0, 1.0, 2.0)
DEFAULT_LOOKAHEAD = 2
FACTORIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SupernaturalSpec:
    """UHF 代数的超自然数表示：每层一个顶点，第 j 个间隙 d_j 条箭头（d_j ≥ 2）"""

    prefix: Tuple[int, ...] = ()
    repeat: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'prefix', tuple(int(d) for d in self.prefix))
        object.__setattr__(self, 'repeat', tuple(int(d) for d in self.repeat))
        if not self.prefix and not self.repeat:
            raise DiagramValidationError("supernatural sequence is empty", kind='schema')
        if any(d < 2 for d in self.prefix + self.repeat):
            raise DiagramValidationError("supernatural factors must be at least 2", kind='schema')

    @property
    def bounded(self) -> bool:
        return not self.repeat

    def factor(self, position: int) -> Optional[int]:
        """第 position 个因子（从 1 开始），有限序列越界时为 None"""
        if position <= len(self.prefix):
            return self.prefix[position - 1]
        if self.bounded:
            return None
        return self.repeat[(position - len(self.prefix) - 1) % len(self.repeat)]

    def split(self) -> Tuple['SupernaturalSpec', 'SupernaturalSpec']:
        """交错拆分 U ≅ U₁ ⊗ U₂：奇数位因子给 U₁，偶数位给 U₂"""
        if self.bounded:
            if len(self.prefix) < 2:
                raise DiagramValidationError("a finite sequence needs two factors to split", kind='schema')
            return SupernaturalSpec(self.prefix[0::2]), SupernaturalSpec(self.prefix[1::2])
        head = len(self.prefix) + len(self.prefix) % 2
        sequence = [self.factor(i) for i in range(1, head + 2 * len(self.repeat) + 1)]
        return (SupernaturalSpec(tuple(sequence[0:head:2]), tuple(sequence[head::2])),
                SupernaturalSpec(tuple(sequence[1:head:2]), tuple(sequence[head + 1::2])))

    def to_dict(self) -> dict:
        return {'prefix': list(self.prefix), 'repeat': list(self.repeat)}

    @classmethod
    def from_dict(cls, document: dict) -> 'SupernaturalSpec':
        return cls(tuple(document.get('prefix', ())), tuple(document.get('repeat', ())))


def parse_supernatural(text: str) -> SupernaturalSpec:
    """
    解析 "2"（重复 2）、"3,4;2"（前缀 3,4 后重复 2）或 "3,4;"（有限序列）
    """
    try:
        if ';' in text:
            head, tail = text.split(';', 1)
        else:
            head, tail = '', text
        prefix = tuple(int(x) for x in head.split(',') if x.strip())
        repeat = tuple(int(x) for x in tail.split(',') if x.strip())
    except ValueError as e:
        raise DiagramValidationError(f"invalid supernatural sequence {text!r}: {e}", kind='schema') from e
    return SupernaturalSpec(prefix, repeat)


@dataclass(eq=False)
class ConstructionCertificate:
    """构造输出：图表、所用调度、验证表与可重建的配方"""

    kind: str
    spec: DiagramSpec
    schedules: Dict[str, list]
    verification: Dict[str, object]
    inputs: Dict[str, str]
    recipe: dict
    components: Dict[str, 'ConstructionCertificate'] = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return all(_is_passed(v) for v in self.verification.values()) and \
            all(c.verified for c in self.components.values())

    def to_document(self) -> dict:
        return {
            'kind': self.kind,
            'inputs': self.inputs,
            'schedules': self.schedules,
            'verification': self.verification,
            'verified': self.verified,
            'recipe': self.recipe,
            'components': {name: c.to_document() for name, c in self.components.items()},
            'diagram': spec_to_document(self.spec),
        }


def _is_passed(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, dict) and 'passed' in value:
        return bool(value['passed'])
    return True


def _hash_spec(spec: DiagramSpec) -> str:
    return sha256_text(dump_spec(spec))


def _margin_sequence(margins: Union[int, Sequence[int]], depth: int) -> List[int]:
    if isinstance(margins, int):
        return [margins] * depth
    values = [int(m) for m in margins]
    if len(values) < depth:
        raise ConstructionError(f"{len(values)} margins given for {depth} gaps", gap=len(values) + 1)
    return values[:depth]


def uhf_schedule(mult: Sequence, margins: Sequence[int], uhf: SupernaturalSpec) -> List[dict]:
    """
    贪心选择切点 k_j：Π_{i=k_{j−1}+1}^{k_j} d_i = S_j·#Br_j + r_j 且 S_j ≥ max Br^(j) + m_j

    Raises:
        ConstructionError: 有限超自然序列在某个间隙无法达到 S_j 下界
    """
    schedule = []
    position = 0
    for gap, (matrix, margin) in enumerate(zip(mult, margins), start=1):
        vertices = matrix.rows
        need = int(max(matrix.matrix.flat)) + margin
        factors: List[int] = []
        value = 1
        while not factors or value // len(vertices) < need:
            position += 1
            d = uhf.factor(position)
            if d is None:
                logger.error(f"超自然序列在第 {gap} 个间隙耗尽")
                raise ConstructionError(
                    f"supernatural sequence is exhausted at gap {gap}: product {value} cannot reach "
                    f"S >= {need} over {len(vertices)} vertices", gap=gap)
            factors.append(d)
            value *= d
        schedule.append({
            'gap': gap, 'k': position, 'factors': factors, 'product': value,
            'S': value // len(vertices), 'r': value % len(vertices), 'u': vertices[0], 'need': need,
        })
    return schedule


def _fattened_spec(base: DiagramSpec, schedule: Sequence[dict],
                   potential_of: Callable[[Arrow], Fraction]) -> DiagramSpec:
    """按调度加粗：嵌入箭头保留（势能由 potential_of 给出），补足箭头势能为 0"""
    depth = len(schedule)
    arrows: List[Arrow] = []
    for entry in schedule:
        gap = entry['gap']
        grouped = base.arrows_by_pair(gap)
        for source in base.vertices(gap - 1):
            for target in base.vertices(gap):
                total = entry['S'] + (entry['r'] if target == entry['u'] else 0)
                embedded = grouped.get((source, target), [])
                for arrow in embedded:
                    arrows.append(Arrow(gap, source, target, potential_of(arrow), 0, arrow.multiplicity))
                filler = total - sum(a.multiplicity for a in embedded)
                if filler > 0:
                    arrows.append(Arrow(gap, source, target, Fraction(0), 0, filler))
    levels = [base.vertices(j) for j in range(depth + 1)]
    return build_spec(levels, arrows, None, exact=True)


def interleaved_diagram(base: DiagramSpec, schedule: Sequence[dict]) -> DiagramSpec:
    """Br''：奇数层为 Br_j，偶数层为单点 c_j"""
    levels: List[Tuple[str, ...]] = [base.vertices(0)]
    arrows: List[Arrow] = []
    previous = base.root
    for entry in schedule:
        j = entry['gap']
        vertices = base.vertices(j)
        connector = f"c{j}"
        levels.append(vertices)
        levels.append((connector,))
        for v in vertices:
            count = entry['S'] + (entry['r'] if v == entry['u'] else 0)
            arrows.append(Arrow(2 * j - 1, previous, v, Fraction(0), 0, count))
            arrows.append(Arrow(2 * j, v, connector, Fraction(0), 0, 1))
        previous = connector
    return build_spec(levels, arrows, None, exact=True)


def _verify_uhf(output: DiagramSpec, base: DiagramSpec, margins: Sequence[int],
                schedule: Sequence[dict]) -> Dict[str, object]:
    depth = len(schedule)
    out_mult = multiplicity_matrices(output, depth)
    base_mult = multiplicity_matrices(base, depth)
    same_vertices = all(output.vertices(j) == base.vertices(j) for j in range(depth + 1))

    slack = []
    for out_m, base_m, margin in zip(out_mult, base_mult, margins):
        slack.append(int(min((out_m.matrix - base_m.matrix).flat)) - margin)

    interleaved = interleaved_diagram(base, schedule)
    one_vertex = telescope(interleaved, [2 * j for j in range(1, depth + 1)])
    products = [sum(a.multiplicity for a in one_vertex.gap_arrows(g)) for g in range(1, depth + 1)]
    odd = telescope(interleaved, [2 * j - 1 for j in range(1, depth + 1)])
    odd_matches = all(
        np.array_equal(a.matrix, b.matrix) for a, b in zip(multiplicity_matrices(odd, depth), out_mult))

    minimal = []
    for entry in schedule:
        shorter = entry['product'] // entry['factors'][-1]
        n = len(output.vertices(entry['gap']))
        minimal.append(len(entry['factors']) == 1 or shorter // n < entry['need'])

    return {
        'same_vertices': same_vertices,
        'entrywise_margin': {'passed': all(s >= 0 for s in slack), 'slack': slack},
        'uhf_products': {'passed': products == [e['product'] for e in schedule], 'products': products},
        'odd_telescope': odd_matches,
        'greedy_minimal': {'passed': all(minimal), 'per_gap': minimal},
    }


def construct_uhf_embedding(base: DiagramSpec, margins: Union[int, Sequence[int]], uhf: SupernaturalSpec,
                            depth: int) -> ConstructionCertificate:
    """
    加粗 base 使 Br'^(j) ≥ Br^(j) + m_j 且 AF(Br') ≅ U（嵌入箭头保留势能，补足箭头势能为 0）

    Raises:
        ConstructionError: 超自然序列在某个间隙无法满足下界
    """
    if depth < 1:
        raise ConstructionError("construction depth must be at least 1")
    base.require_depth(depth)
    base_exact = base.to_exact().expand(depth)
    margin_values = _margin_sequence(margins, depth)
    schedule = uhf_schedule(multiplicity_matrices(base_exact, depth), margin_values, uhf)
    output = _fattened_spec(base_exact, schedule, lambda a: a.potential)
    verification = _verify_uhf(output, base_exact, margin_values, schedule)
    logger.info(f"UHF 加粗完成: 深度 {depth}, 切点 {[e['k'] for e in schedule]}")
    return ConstructionCertificate(
        kind=UHF_EMBED, spec=output,
        schedules={'uhf': schedule},
        verification=verification,
        inputs={'base': _hash_spec(base)},
        recipe={'construction': UHF_EMBED, 'inputs': {'base': spec_to_document(base)},
                'margins': margin_values, 'uhf': uhf.to_dict(), 'depth': depth},
    )


def disjoint_union_diagram(spec_plus: DiagramSpec, spec_minus: DiagramSpec, depth: int) -> DiagramSpec:
    """Br_j = Br(+)_{j−1} ⊔ Br(−)_{j−1}，v0 各有一条箭头指向两个顶点"""
    spec_plus.require_depth(depth - 1)
    spec_minus.require_depth(depth - 1)
    levels = [(ROOT,)] + [
        tuple(PLUS_PREFIX + v for v in spec_plus.vertices(j - 1))
        + tuple(MINUS_PREFIX + v for v in spec_minus.vertices(j - 1))
        for j in range(1, depth + 1)
    ]
    arrows = [Arrow(1, ROOT, PLUS_PREFIX + spec_plus.root, Fraction(0)),
              Arrow(1, ROOT, MINUS_PREFIX + spec_minus.root, Fraction(0))]
    for gap in range(2, depth + 1):
        for prefix, side in ((PLUS_PREFIX, spec_plus), (MINUS_PREFIX, spec_minus)):
            for a in side.gap_arrows(gap - 1):
                arrows.append(Arrow(gap, prefix + a.source, prefix + a.target, Fraction(0), 0, a.multiplicity))
    return build_spec(levels, arrows, None, exact=True)


def _path_counts(mult: Sequence) -> List[np.ndarray]:
    """(Br'^(j)···Br'^(1))_{w,v0}，整数精确"""
    counts = [np.array([1], dtype=object)]
    for matrix in mult:
        counts.append(matrix.matrix.dot(counts[-1]))
    return counts


def dyadic_deltas(mult: Sequence) -> List[Fraction]:
    """
    δ_j 取满足 δ_j·#Br_j·Π_{k≤j}(2‖Br'^(k)‖+1) / min_w (Br'^(j)···Br'^(1))_{w,v0} ≤ 4^{−j} 的最大 2 的幂（< 1/2）
    """
    counts = _path_counts(mult)
    log_norms = 0.0
    deltas = []
    for j, matrix in enumerate(mult, start=1):
        log_norms += math.log(2 * spectral_norm(np.array(matrix.matrix, dtype=float)) + 1)
        log_bound = (-j * math.log(4) - math.log(len(matrix.rows)) - log_norms
                     + math.log(int(min(counts[j]))))
        exponent = max(2, math.ceil(-log_bound / math.log(2)))
        while -exponent * math.log(2) > log_bound:
            exponent += 1
        deltas.append(Fraction(1, 2 ** exponent))
    return deltas


def epsilon_from_delta(delta: Fraction, gap: int) -> Fraction:
    """ε_j = log(1+δ_j)/j，向下取为二进有理数（相对余量 2^-40）"""
    return Fraction(math.log1p(float(delta)) / gap) * EPSILON_MARGIN


def _side_profile(sub, prefix: str, side: DiagramSpec, levels: int) -> dict:
    expected = [[prefix + v for v in side.vertices(n - 1)] for n in range(1, levels + 1)]
    actual = [sorted(sub.levels[n]) for n in range(1, levels + 1)]
    counts = [geodesic_prefix_data(sub, n, materialize_cap=0).total for n in range(1, levels + 1)]
    return {
        'passed': actual == [sorted(e) for e in expected],
        'block_counts': [len(level) for level in actual],
        'geodesic_paths': counts,
        'certification': sub.certification.label(),
    }


def _verify_ground_ceiling(output: DiagramSpec, union: DiagramSpec, spec_plus: DiagramSpec,
                           spec_minus: DiagramSpec, schedule: Sequence[dict], deltas: Sequence[Fraction],
                           lookahead: int, probe_betas: Sequence[float]) -> Dict[str, object]:
    depth = len(schedule)
    verification = _verify_uhf(output, union, [1] * depth, schedule)

    checked = depth - lookahead
    if checked >= 1:
        ground = extract_geodesic_subdiagram(output, checked, lookahead)
        ceiling = extract_geodesic_subdiagram(negate_potential(output), checked, lookahead)
        verification['ground_profile'] = _side_profile(ground, PLUS_PREFIX, spec_plus, checked)
        verification['ceiling_profile'] = _side_profile(ceiling, MINUS_PREFIX, spec_minus, checked)
    else:
        verification['ground_profile'] = {'passed': False, 'reason': 'depth too small for the lookahead'}

    transposed = [np.array(m.matrix, dtype=float).T for m in multiplicity_matrices(output, depth)]
    hypothesis = {}
    for beta in probe_betas:
        gauge = [gauge_matrix(output, g, beta).matrix for g in range(1, depth + 1)]
        start = max(1, math.ceil(abs(beta)))
        report = verify_perturbation_hypothesis(transposed, [float(d) for d in deltas], gauge, (start, depth))
        hypothesis[str(beta)] = {'passed': report['accepted'], 'first_failure': report['first_failure']}
    verification['perturbation_hypothesis'] = {
        'passed': all(h['passed'] for h in hypothesis.values()), 'per_beta': hypothesis}

    if depth >= 2:
        probes = {}
        for beta in probe_betas:
            result = multi_seed_distribution(output, beta, 1, depth - 1, tol=1e-8)
            probes[str(beta)] = {'agreement': result['agreement'], 'seeds': result['seeds'],
                                 'passed': result['agreement'] <= 1e-8}
        verification['kms_uniqueness_probe'] = {
            'passed': all(p['passed'] for p in probes.values()), 'per_beta': probes,
            'note': 'agreement of extreme and uniform seeds; uniqueness itself is not proved'}
    return verification


def construct_ground_ceiling(spec_plus: DiagramSpec, spec_minus: DiagramSpec, uhf: SupernaturalSpec,
                             depth: int, lookahead: int = DEFAULT_LOOKAHEAD,
                             probe_betas: Sequence[float] = PROBE_BETAS) -> ConstructionCertificate:
    """
    基态对应 A₊、天花板态对应 A₋ 且每个 β 只有一个 KMS 态的 UHF 流

    Raises:
        ConstructionError: 超自然序列无法完成加粗
    """
    if depth < 2:
        raise ConstructionError("ground/ceiling construction needs depth >= 2")
    union = disjoint_union_diagram(spec_plus, spec_minus, depth)
    mult = multiplicity_matrices(union, depth)
    schedule = uhf_schedule(mult, [1] * depth, uhf)
    # 势能只作用于嵌入箭头，先用加粗后的重数矩阵确定 δ_j
    fattened = _fattened_spec(union, schedule, lambda a: Fraction(0))
    deltas = dyadic_deltas(multiplicity_matrices(fattened, depth))
    epsilons = [epsilon_from_delta(d, j) for j, d in enumerate(deltas, start=1)]

    def potential_of(arrow: Arrow) -> Fraction:
        if arrow.gap == 1:
            return Fraction(0)
        if arrow.source.startswith(PLUS_PREFIX):
            return -epsilons[arrow.gap - 1]
        return epsilons[arrow.gap - 1]

    output = _fattened_spec(union, schedule, potential_of)
    verification = _verify_ground_ceiling(output, union, spec_plus, spec_minus, schedule, deltas,
                                          lookahead, probe_betas)
    logger.info(f"基态-天花板构造完成: 深度 {depth}, 验证{'通过' if all(map(_is_passed, verification.values())) else '失败'}")
    return ConstructionCertificate(
        kind=GROUND_CEILING, spec=output,
        schedules={'uhf': schedule, 'delta': [str(d) for d in deltas], 'epsilon': [str(e) for e in epsilons]},
        verification=verification,
        inputs={'plus': _hash_spec(spec_plus), 'minus': _hash_spec(spec_minus)},
        recipe={'construction': GROUND_CEILING,
                'inputs': {'plus': spec_to_document(spec_plus), 'minus': spec_to_document(spec_minus)},
                'uhf': uhf.to_dict(), 'depth': depth, 'lookahead': lookahead},
    )


def minimum_multiplicity(spec: DiagramSpec, depth: int) -> Tuple[int, int]:
    """返回 (最小重数矩阵元, 所在间隙)"""
    worst = None
    for matrix in multiplicity_matrices(spec, depth):
        value = int(min(matrix.matrix.flat))
        if worst is None or value < worst[0]:
            worst = (value, matrix.level)
    return worst


def telescope_for_multiplicity(spec: DiagramSpec, gaps: int, minimum: int = 2,
                               search: int = 64) -> Tuple[DiagramSpec, List[int]]:
    """
    贪心选择切点使每个伸缩后的重数矩阵元都不小于 minimum

    Raises:
        ConstructionError: 在 search 层内无法达到
    """
    cuts: List[int] = []
    lower = 0
    for gap in range(1, gaps + 1):
        for upper in range(lower + 1, lower + search + 1):
            if spec.max_depth is not None and upper > spec.max_depth:
                break
            trial = telescope(spec, [upper] if lower == 0 else [lower, upper])
            if int(min(multiplicity_matrices(trial, trial.prefix_depth)[-1].matrix.flat)) >= minimum:
                cuts.append(upper)
                lower = upper
                break
        else:
            raise ConstructionError(f"no telescoping reaches multiplicity {minimum} at gap {gap}", gap=gap)
        if len(cuts) < gap:
            raise ConstructionError(f"diagram too shallow to telescope gap {gap} to multiplicity {minimum}",
                                    gap=gap)
    return telescope(spec, cuts), cuts


def reference_path(spec: DiagramSpec, depth: int) -> List[Arrow]:
    """字典序第一的路径：每层取当前顶点的第一条出箭头"""
    path = []
    here = spec.root
    for gap in range(1, depth + 1):
        arrow = next(a for a in spec.gap_arrows(gap) if a.source == here)
        path.append(arrow)
        here = arrow.target
    return path


def rigid_margins(spec: DiagramSpec, depth: int) -> List[Tuple[Fraction, Fraction]]:
    """m^±_j：F(a)+F(b)−F(c) 的极值外扩区间宽度的 10%（区间退化时外扩 1/10）"""
    result = []
    for j in range(1, depth + 1):
        here = [a.potential for a in spec.gap_arrows(j)]
        nxt = [a.potential for a in spec.gap_arrows(j + 1)]
        low = min(here) + min(nxt) - max(nxt)
        high = max(here) + max(nxt) - min(nxt)
        margin = (high - low) * MARGIN_FRACTION if high > low else MARGIN_FRACTION
        result.append((low - margin, high + margin))
    return result


def _beta_grid(gap: int) -> np.ndarray:
    return np.linspace(-gap, gap, BETA_SAMPLES + 2)


def _rigid_requirement(m_plus: Fraction, m_minus: Fraction, f_q: Fraction, gap: int) -> float:
    """max_β |e^{−β(m⁻−F(q))} + e^{−β(m⁺−F(q))} − 2|，β 取网格"""
    betas = _beta_grid(gap)
    values = np.abs(np.exp(-betas * float(m_minus - f_q)) + np.exp(-betas * float(m_plus - f_q)) - 2.0)
    return float(values.max())


def _verify_rigid(output: DiagramSpec, base: DiagramSpec, blocks: Sequence[int],
                  margins: Sequence[Tuple[Fraction, Fraction]], path: Sequence[Arrow],
                  epsilons: Sequence[float], lookahead: int, probe_betas: Sequence[float]) -> Dict[str, object]:
    depth = len(blocks)
    out_mult = multiplicity_matrices(output, depth)
    base_mult = multiplicity_matrices(base, depth)
    scaled = all(np.array_equal(o.matrix, d * b.matrix) for o, b, d in zip(out_mult, base_mult, blocks))

    margin_rows = []
    for j, (m_plus, m_minus) in enumerate(margins, start=1):
        here = [a.potential for a in base.gap_arrows(j)]
        nxt = [a.potential for a in base.gap_arrows(j + 1)]
        margin_rows.append(m_plus < min(here) + min(nxt) - max(nxt) and
                           max(here) + max(nxt) - min(nxt) < m_minus)

    closeness = []
    for j, ((m_plus, m_minus), arrow, eps, d) in enumerate(zip(margins, path, epsilons, blocks), start=1):
        closeness.append(_rigid_requirement(m_plus, m_minus, arrow.potential, j) <= eps * d)

    verification: Dict[str, object] = {
        'multiplicity_scaled': scaled,
        'potential_margins': {'passed': all(margin_rows), 'per_gap': margin_rows},
        'block_closeness': {'passed': all(closeness), 'per_gap': closeness,
                            'beta_samples': BETA_SAMPLES + 2},
    }

    checked = depth - lookahead
    if checked >= 1:
        for name, spec in (('single_ground_geodesic', output), ('single_ceiling_geodesic', negate_potential(output))):
            sub = extract_geodesic_subdiagram(spec, checked, lookahead)
            counts = [geodesic_prefix_data(sub, n, materialize_cap=0).total for n in range(1, checked + 1)]
            verification[name] = {'passed': all(c == 1 for c in counts), 'geodesic_paths': counts,
                                  'certification': sub.certification.label()}

    hypothesis = {}
    for beta in probe_betas:
        base_gauge = [gauge_matrix(base, g, beta).matrix for g in range(1, depth + 1)]
        out_gauge = [gauge_matrix(output, g, beta).matrix / float(d) for g, d in zip(range(1, depth + 1), blocks)]
        start = max(1, math.ceil(abs(beta)))
        report = verify_perturbation_hypothesis(base_gauge, epsilons, out_gauge, (start, depth))
        hypothesis[str(beta)] = {'passed': report['accepted'], 'first_failure': report['first_failure']}
    verification['perturbation_hypothesis'] = {
        'passed': all(h['passed'] for h in hypothesis.values()), 'per_beta': hypothesis}
    return verification


def construct_rigid_kms(base: DiagramSpec, uhf_minus: SupernaturalSpec, depth: int,
                        lookahead: int = DEFAULT_LOOKAHEAD,
                        probe_betas: Sequence[float] = (-1.0, 1.0)) -> ConstructionCertificate:
    """
    乘以 UHF 块 D_j 并重新分配参考路径上两条箭头的势能，使基态与天花板态各只有一个，
    同时 KMS 结构与 base 一致

    Raises:
        ConstructionError: base 的重数矩阵元小于 2（需先伸缩）或 D_j 无法达到
    """
    if depth < 1:
        raise ConstructionError("construction depth must be at least 1")
    base.require_depth(depth + 1)
    base_exact = base.to_exact().expand(depth + 1)
    smallest, at_gap = minimum_multiplicity(base_exact, depth + 1)
    if smallest < 2:
        raise ConstructionError(
            f"multiplicity {smallest} < 2 at gap {at_gap}; telescope the diagram first "
            f"(see telescope_for_multiplicity)", gap=at_gap)

    margins = rigid_margins(base_exact, depth)
    path = reference_path(base_exact, depth)

    epsilons = []
    for j in range(1, depth + 1):
        candidates = []
        for beta in _beta_grid(j):
            system = [gauge_matrix(base_exact, g, float(beta)).matrix for g in range(1, j + 1)]
            candidates.append(perturbation_epsilons(system, j)[-1])
        epsilons.append(min(candidates))

    blocks: List[int] = []
    block_factors: List[List[int]] = []
    position = 0
    for j, ((m_plus, m_minus), arrow, eps) in enumerate(zip(margins, path, epsilons), start=1):
        if not eps > 0:
            raise ConstructionError(f"perturbation tolerance underflows at gap {j}", gap=j)
        requirement = _rigid_requirement(m_plus, m_minus, arrow.potential, j) / eps
        if not math.isfinite(requirement):
            raise ConstructionError(f"block requirement overflows at gap {j}", gap=j)
        value, factors = 1, []
        while value < 2 or value < requirement:
            position += 1
            d = uhf_minus.factor(position)
            if d is None:
                logger.error(f"刚性构造在第 {j} 个间隙无法达到 D_j")
                raise ConstructionError(
                    f"supernatural sequence is exhausted at gap {j}: D = {value} < {requirement:.6g}", gap=j)
            factors.append(d)
            value *= d
        blocks.append(value)
        block_factors.append(factors)

    arrows: List[Arrow] = []
    for j in range(1, depth + 1):
        d = blocks[j - 1]
        q = path[j - 1]
        m_plus, m_minus = margins[j - 1]
        for arrow in base_exact.gap_arrows(j):
            if arrow.key == q.key:
                arrows.append(Arrow(j, arrow.source, arrow.target, m_plus, 0, 1))
                arrows.append(Arrow(j, arrow.source, arrow.target, m_minus, 0, 1))
                if d * arrow.multiplicity > 2:
                    arrows.append(Arrow(j, arrow.source, arrow.target, arrow.potential, 0,
                                        d * arrow.multiplicity - 2))
            else:
                arrows.append(Arrow(j, arrow.source, arrow.target, arrow.potential, 0, d * arrow.multiplicity))
    levels = [base_exact.vertices(j) for j in range(depth + 1)]
    output = build_spec(levels, arrows, None, exact=True)

    verification = _verify_rigid(output, base_exact, blocks, margins, path, epsilons, lookahead, probe_betas)
    logger.info(f"刚性 KMS 构造完成: 深度 {depth}, D = {blocks}")
    return ConstructionCertificate(
        kind=RIGID_KMS, spec=output,
        schedules={
            'D': blocks, 'factors': block_factors,
            'm_plus': [str(m) for m, _ in margins], 'm_minus': [str(m) for _, m in margins],
            'epsilon': epsilons, 'reference_path': [a.label() for a in path],
        },
        verification=verification,
        inputs={'base': _hash_spec(base)},
        recipe={'construction': RIGID_KMS, 'inputs': {'base': spec_to_document(base)},
                'uhf': uhf_minus.to_dict(), 'depth': depth, 'lookahead': lookahead},
    )


def _factorization_check(combined: DiagramSpec, left: DiagramSpec, right: DiagramSpec, beta: float,
                         depth: int, tol: float = FACTORIZATION_TOLERANCE) -> dict:
    """
    乘积图表上逐种子比较顶点分布与两因子分布的张量积

    种子为顶层全部极点 (a, b)、一个非乘积的对角混合与均匀分布；
    极点 (a, b) 的结果应为 kron(左侧以 a 为种子, 右侧以 b 为种子)，其余按线性组合
    """
    left_vertices, right_vertices = left.vertices(depth), right.vertices(depth)
    vertices = combined.vertices(depth)

    def factor(spec, seed):
        return kms_vertex_distribution(spec, beta, 1, depth - 1, seed, iterate=False).values

    left_points = {a: factor(left, SimplexVector.point(depth, left_vertices, a))
                   for a in left_vertices}
    right_points = {b: factor(right, SimplexVector.point(depth, right_vertices, b))
                    for b in right_vertices}

    seeds, expected = [], []
    for i, a in enumerate(left_vertices):
        for k, b in enumerate(right_vertices):
            seeds.append(SimplexVector.point(depth, vertices, vertices[i * len(right_vertices) + k]))
            expected.append(np.kron(left_points[a], right_points[b]))
    diagonal = min(len(left_vertices), len(right_vertices))
    if diagonal > 1:
        weights = np.zeros(len(vertices))
        weights[[i * len(right_vertices) + i for i in range(diagonal)]] = 1.0 / diagonal
        seeds.append(SimplexVector(depth, vertices, weights))
        expected.append(sum(np.kron(left_points[left_vertices[i]], right_points[right_vertices[i]])
                            for i in range(diagonal)) / diagonal)
    seeds.append(SimplexVector.uniform(depth, vertices))
    expected.append(np.kron(factor(left, None), factor(right, None)))

    joint = multi_seed_distribution(combined, beta, 1, depth - 1, seeds)
    defects = [l1_distance(list(d['values'].values()), e) for d, e in zip(joint['distributions'], expected)]
    worst = int(np.argmax(defects))
    return {'seeds': joint['seeds'], 'defect': defects[worst], 'worst_seed': worst,
            'passed': defects[worst] <= tol}


def main_theorem_pipeline(
spec_f: DiagramSpec, spec_plus: DiagramSpec, spec_minus: DiagramSpec,
                          uhf: SupernaturalSpec, depth: int, lookahead: int = DEFAULT_LOOKAHEAD,
                          probe_betas: Sequence[float] = (-1.0, 1.0)) -> ConstructionCertificate:
    """
    U ≅ U₁ ⊗ U₂：在 U₁ 上做基态-天花板构造，在 U₂ 上做刚性 KMS 构造，输出两者的乘积
    """
    u1, u2 = uhf.split()
    first = construct_ground_ceiling(spec_plus, spec_minus, u1, depth, lookahead, probe_betas)

    cuts = None
    base = spec_f
    if spec_f.max_depth is None or spec_f.max_depth >= depth + 1:
        smallest, _ = minimum_multiplicity(spec_f, depth + 1)
        if smallest < 2:
            base, cuts = telescope_for_multiplicity(spec_f, depth + 1)
            logger.info(f"势能图表的重数不足 2，已伸缩到切点 {cuts}")
    second = construct_rigid_kms(base, u2, depth, lookahead, probe_betas)

    combined = product(first.spec, second.spec)
    verification: Dict[str, object] = {}
    checked = depth - lookahead
    if checked >= 1:
        ground = extract_geodesic_subdiagram(combined, checked, lookahead)
        ceiling = extract_geodesic_subdiagram(negate_potential(combined), checked, lookahead)
        expected_ground = [len(spec_plus.vertices(n - 1)) for n in range(1, checked + 1)]
        expected_ceiling = [len(spec_minus.vertices(n - 1)) for n in range(1, checked + 1)]
        ground_counts = [len(ground.levels[n]) for n in range(1, checked + 1)]
        ceiling_counts = [len(ceiling.levels[n]) for n in range(1, checked + 1)]
        verification['ground_blocks'] = {'passed': ground_counts == expected_ground, 'counts': ground_counts}
        verification['ceiling_blocks'] = {'passed': ceiling_counts == expected_ceiling, 'counts': ceiling_counts}

    factorization = {}
    for beta in probe_betas:
        factorization[str(beta)] = _factorization_check(combined, first.spec, second.spec, beta, depth)
    verification['kms_factorization'] = {
        'passed': all(f['passed'] for f in factorization.values()), 'per_beta': factorization}

    logger.info(f"主定理流水线完成: 深度 {depth}")
    return ConstructionCertificate(
        kind=MAIN_PIPELINE, spec=combined,
        schedules={'split': [u1.to_dict(), u2.to_dict()], 'telescope_cuts': cuts},
        verification=verification,
        inputs={'potential': _hash_spec(spec_f), 'plus': _hash_spec(spec_plus), 'minus': _hash_spec(spec_minus)},
        recipe={'construction': MAIN_PIPELINE,
                'inputs': {'potential': spec_to_document(spec_f), 'plus': spec_to_document(spec_plus),
                           'minus': spec_to_document(spec_minus)},
                'uhf': uhf.to_dict(), 'depth': depth, 'lookahead': lookahead},
        components={'ground_ceiling': first, 'rigid_kms': second},
    )


def _load_document(document: dict) -> DiagramSpec:
    return load_spec(json.dumps(document), exact=bool(document.get('exact', False)))


def regenerate(recipe: dict, depth: Optional[int] = None) -> ConstructionCertificate:
    """按证书中的配方重新运行构造（可指定更深的深度）"""
    kind = recipe.get('construction')
    inputs = {name: _load_document(doc) for name, doc in recipe.get('inputs', {}).items()}
    uhf = SupernaturalSpec.from_dict(recipe['uhf'])
    depth = int(recipe['depth'] if depth is None else depth)
    lookahead = int(recipe.get('lookahead', DEFAULT_LOOKAHEAD))
    if kind == UHF_EMBED:
        margins = recipe['margins']
        margins = margins + [margins[-1]] * (depth - len(margins)) if len(margins) < depth else margins
        return construct_uhf_embedding(inputs['base'], margins, uhf, depth)
    if kind == GROUND_CEILING:
        return construct_ground_ceiling(inputs['plus'], inputs['minus'], uhf, depth, lookahead)
    if kind == RIGID_KMS:
        return construct_rigid_kms(inputs['base'], uhf, depth, lookahead)
    if kind == MAIN_PIPELINE:
        return main_theorem_pipeline(inputs['potential'], inputs['plus'], inputs['minus'], uhf, depth, lookahead)
    raise ConstructionError(f"unknown construction {kind!r} in recipe")


def verify_certificate(certificate: ConstructionCertificate) -> bool:
    """由配方重新构造并比较输出图表与验证结果"""
    rebuilt = regenerate(certificate.recipe)
    same = dump_spec(rebuilt.spec) == dump_spec(certificate.spec)
    if not same:
        logger.warning("重新构造的图表与证书中的图表不一致")
    return same and rebuilt.verified
