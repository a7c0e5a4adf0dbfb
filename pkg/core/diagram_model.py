"""
Bratteli 图表模型模块
表示带箭头势能的分层多重图，提供校验、序列化、伸缩（telescoping）、乘积与取负等结构操作
"""

import json
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from core.config import EXACT_ENV_VAR
from core.exceptions import CapacityExceededError, DiagramValidationError
from utils.common_utils import Number, format_number, parse_potential, sha256_text, sum_potentials
from utils.logger import get_logger

logger = get_logger(__name__)

FINITE_PREFIX = 'FinitePrefix'
EVENTUALLY_PERIODIC = 'EventuallyPeriodic'

DEFAULT_ENUMERATION_CAP = 1000000


@dataclass(frozen=True)
class Arrow:
    """
    一个箭头束：multiplicity 条共享同一势能的平行箭头

    gap 为 j 的箭头从第 j-1 层指向第 j 层；index 在 (gap, source, target) 内区分不同的箭头束。
    """

    gap: int
    source: str
    target: str
    potential: Number
    index: int = 0
    multiplicity: int = 1

    @property
    def key(self) -> Tuple[int, str, str, int]:
        return (self.gap, self.source, self.target, self.index)

    def label(self) -> str:
        return f"{self.source}>{self.target}#{self.index}"


@dataclass(frozen=True)
class BlockArrow:
    """重复块中的箭头；第 t 次重复时势能为 potential + step·t"""

    source: str
    target: str
    potential: Number
    step: Number = 0
    index: int = 0
    multiplicity: int = 1


@dataclass(frozen=True)
class RepeatBlock:
    """从 from_level 开始无限重复的块，顶点集与 from_level 层相同"""

    from_level: int
    vertices: Tuple[str, ...]
    arrows: Tuple[BlockArrow, ...]

    @property
    def stationary(self) -> bool:
        return all(a.step == 0 for a in self.arrows)

    def arrows_at(self, gap: int) -> Tuple[Arrow, ...]:
        shift = gap - self.from_level - 1
        return tuple(
            Arrow(gap, a.source, a.target, a.potential + a.step * shift, a.index, a.multiplicity)
            for a in self.arrows
        )

    def shifted(self, repetitions: int) -> 'RepeatBlock':
        """把块的起点后移若干次重复"""
        return RepeatBlock(
            self.from_level + repetitions,
            self.vertices,
            tuple(replace(a, potential=a.potential + a.step * repetitions) for a in self.arrows),
        )


@dataclass(frozen=True)
class FinitePath:
    """有限路径：箭头束序列加上每个束内选取的副本编号"""

    start_level: int
    arrows: Tuple[Arrow, ...]
    copies: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.copies:
            object.__setattr__(self, 'copies', tuple(0 for _ in self.arrows))
        for first, second in zip(self.arrows, self.arrows[1:]):
            if first.target != second.source or second.gap != first.gap + 1:
                raise ValueError(f"arrows {first.label()} and {second.label()} are not composable")

    @property
    def length(self) -> int:
        return len(self.arrows)

    @property
    def source(self) -> Optional[str]:
        return self.arrows[0].source if self.arrows else None

    @property
    def range(self) -> Optional[str]:
        return self.arrows[-1].target if self.arrows else None

    @property
    def potential(self) -> Number:
        return sum_potentials(a.potential for a in self.arrows)

    def extend(self, arrow: Arrow, copy: int = 0) -> 'FinitePath':
        return FinitePath(self.start_level, self.arrows + (arrow,), self.copies + (copy,))

    def label(self) -> str:
        if not self.arrows:
            return "()"
        parts = [self.arrows[0].source]
        for arrow, copy in zip(self.arrows, self.copies):
            suffix = f".{copy}" if arrow.multiplicity > 1 else ""
            parts.append(f"{arrow.target}[{arrow.index}{suffix}]")
        return "-".join(parts)


@dataclass(frozen=True)
class MultiplicityMatrix:
    """第 j 个间隙的重数矩阵，行为 Br_j，列为 Br_{j-1}"""

    level: int
    rows: Tuple[str, ...]
    cols: Tuple[str, ...]
    matrix: np.ndarray = field(compare=False)

    def entry(self, target: str, source: str) -> int:
        return self.matrix[self.rows.index(target), self.cols.index(source)]


@dataclass(frozen=True)
class DiagramSpec:
    """
    带势能的 Bratteli 图表

    levels[j] 为第 j 层顶点，arrows[j-1] 为第 j 个间隙的箭头；repeat 非空时为最终周期表示，
    其 from_level 等于最后一个显式层。
    """

    levels: Tuple[Tuple[str, ...], ...]
    arrows: Tuple[Tuple[Arrow, ...], ...]
    repeat: Optional[RepeatBlock] = None
    exact: bool = False

    @property
    def prefix_depth(self) -> int:
        return len(self.levels) - 1

    @property
    def is_periodic(self) -> bool:
        return self.repeat is not None

    @property
    def presentation(self) -> str:
        return EVENTUALLY_PERIODIC if self.is_periodic else FINITE_PREFIX

    @property
    def max_depth(self) -> Optional[int]:
        """可用的最大层级，周期表示为 None（无界）"""
        return None if self.is_periodic else self.prefix_depth

    @property
    def root(self) -> str:
        return self.levels[0][0]

    @cached_property
    def fingerprint(self) -> str:
        return sha256_text(dump_spec(self))

    def require_depth(self, depth: int):
        """深度超出有限前缀时报错"""
        if depth < 0:
            raise DiagramValidationError(f"depth must be non-negative, got {depth}", kind='depth')
        if not self.is_periodic and depth > self.prefix_depth:
            raise DiagramValidationError(
                f"requested depth {depth} exceeds the finite prefix depth {self.prefix_depth}",
                kind='depth', level=depth)

    def vertices(self, level: int) -> Tuple[str, ...]:
        if level <= self.prefix_depth:
            return self.levels[level]
        self.require_depth(level)
        return self.repeat.vertices

    def gap_arrows(self, gap: int) -> Tuple[Arrow, ...]:
        if gap < 1:
            raise DiagramValidationError(f"gaps start at 1, got {gap}", kind='depth')
        if gap <= self.prefix_depth:
            return self.arrows[gap - 1]
        self.require_depth(gap)
        return self.repeat.arrows_at(gap)

    def expand(self, depth: int) -> 'DiagramSpec':
        """展开为给定深度的有限前缀"""
        self.require_depth(depth)
        levels = tuple(self.vertices(j) for j in range(depth + 1))
        arrows = tuple(self.gap_arrows(g) for g in range(1, depth + 1))
        return DiagramSpec(levels, arrows, None, self.exact)

    def to_exact(self) -> 'DiagramSpec':
        """把浮点势能按二进制精确值转为有理数"""
        if self.exact:
            return self
        arrows = tuple(
            tuple(replace(a, potential=Fraction(a.potential)) for a in gap)
            for gap in self.arrows
        )
        repeat = None
        if self.repeat is not None:
            repeat = replace(self.repeat, arrows=tuple(
                replace(a, potential=Fraction(a.potential), step=Fraction(a.step))
                for a in self.repeat.arrows))
        return DiagramSpec(self.levels, arrows, repeat, True)

    def arrows_by_pair(self, gap: int) -> Dict[Tuple[str, str], List[Arrow]]:
        grouped: Dict[Tuple[str, str], List[Arrow]] = defaultdict(list)
        for arrow in self.gap_arrows(gap):
            grouped[(arrow.source, arrow.target)].append(arrow)
        return grouped


def _renumber(arrows: Iterable[Arrow]) -> Tuple[Arrow, ...]:
    """按出现顺序在每个 (gap, source, target) 内重新编号"""
    counters: Dict[Tuple[int, str, str], int] = defaultdict(int)
    result = []
    for arrow in arrows:
        key = (arrow.gap, arrow.source, arrow.target)
        result.append(replace(arrow, index=counters[key]))
        counters[key] += 1
    return tuple(result)


def _renumber_block(arrows: Iterable[BlockArrow]) -> Tuple[BlockArrow, ...]:
    counters: Dict[Tuple[str, str], int] = defaultdict(int)
    result = []
    for arrow in arrows:
        key = (arrow.source, arrow.target)
        result.append(replace(arrow, index=counters[key]))
        counters[key] += 1
    return tuple(result)


def build_spec(levels: Sequence[Sequence[str]], arrows: Sequence[Arrow],
               repeat: Optional[RepeatBlock] = None, exact: bool = False,
               validate: bool = True) -> DiagramSpec:
    """
    由层列表与扁平箭头列表构造图表

    Args:
        levels: 各层顶点名
        arrows: 所有显式箭头（index 会按出现顺序重排）
        repeat: 可选重复块
        exact: 是否为有理数模式
        validate: 是否执行校验

    Returns:
        DiagramSpec: 图表
    """
    depth = len(levels) - 1
    coerce = Fraction if exact else float
    per_gap: List[List[Arrow]] = [[] for _ in range(max(depth, 0))]
    for arrow in arrows:
        arrow = replace(arrow, potential=coerce(arrow.potential))
        if not 1 <= arrow.gap <= depth:
            raise DiagramValidationError(
                f"arrow {arrow.label()} has gap {arrow.gap} outside 1..{depth}",
                kind='level_mismatch', level=arrow.gap)
        per_gap[arrow.gap - 1].append(arrow)
    if repeat is not None:
        repeat = replace(repeat, vertices=tuple(repeat.vertices), arrows=_renumber_block(
            replace(a, potential=coerce(a.potential), step=coerce(a.step)) for a in repeat.arrows))
    spec = DiagramSpec(
        tuple(tuple(level) for level in levels),
        tuple(_renumber(gap) for gap in per_gap),
        repeat,
        exact,
    )
    if validate:
        validate_spec(spec)
    return spec


def validate_spec(spec: DiagramSpec):
    """
    校验图表不变量

    Raises:
        DiagramValidationError: 任一不变量被违反（带层级/顶点坐标）
    """
    if not spec.levels:
        raise DiagramValidationError("diagram has no levels", kind='schema')
    if len(spec.levels[0]) != 1:
        raise DiagramValidationError(
            f"level 0 must contain exactly one vertex, found {len(spec.levels[0])}",
            kind='schema', level=0)

    for j, level in enumerate(spec.levels):
        if not level:
            raise DiagramValidationError("empty level", kind='schema', level=j)
        seen: Set[str] = set()
        for name in level:
            if not isinstance(name, str) or not name:
                raise DiagramValidationError(f"vertex names must be non-empty strings, got {name!r}",
                                             kind='schema', level=j)
            if name in seen:
                raise DiagramValidationError("duplicate vertex", kind='schema', level=j, vertex=name)
            seen.add(name)

    emitted: List[Set[str]] = [set() for _ in spec.levels]
    received: List[Set[str]] = [set() for _ in spec.levels]
    for gap, gap_arrows in enumerate(spec.arrows, start=1):
        sources = set(spec.levels[gap - 1])
        targets = set(spec.levels[gap])
        for arrow in gap_arrows:
            _check_arrow_value(arrow.potential, arrow.multiplicity, spec.exact, gap)
            if arrow.gap != gap:
                raise DiagramValidationError(f"arrow {arrow.label()} stored under gap {gap}",
                                             kind='level_mismatch', level=gap)
            if arrow.source not in sources:
                raise DiagramValidationError(f"arrow source {arrow.source!r} is not in level {gap - 1}",
                                             kind='level_mismatch', level=gap - 1, vertex=arrow.source)
            if arrow.target not in targets:
                raise DiagramValidationError(f"arrow range {arrow.target!r} is not in level {gap}",
                                             kind='level_mismatch', level=gap, vertex=arrow.target)
            emitted[gap - 1].add(arrow.source)
            received[gap].add(arrow.target)

    if spec.repeat is not None:
        block = spec.repeat
        if block.from_level != spec.prefix_depth:
            raise DiagramValidationError(
                f"repeat.from_level must be the last explicit level {spec.prefix_depth}, got {block.from_level}",
                kind='schema', level=block.from_level)
        if tuple(block.vertices) != tuple(spec.levels[-1]):
            raise DiagramValidationError("repeat.vertices must equal the last explicit level",
                                         kind='schema', level=block.from_level)
        block_set = set(block.vertices)
        block_emits: Set[str] = set()
        block_receives: Set[str] = set()
        for arrow in block.arrows:
            _check_arrow_value(arrow.potential, arrow.multiplicity, spec.exact, block.from_level + 1)
            if spec.exact != isinstance(arrow.step, Fraction) and arrow.step != 0:
                raise DiagramValidationError("step type does not match the arithmetic mode", kind='schema')
            if arrow.source not in block_set or arrow.target not in block_set:
                raise DiagramValidationError(
                    f"repeat arrow {arrow.source}->{arrow.target} leaves the block vertex set",
                    kind='level_mismatch', level=block.from_level + 1)
            block_emits.add(arrow.source)
            block_receives.add(arrow.target)
        for name in block.vertices:
            if name not in block_emits:
                raise DiagramValidationError("vertex emits no arrow in the repeating block",
                                             kind='sink', level=block.from_level, vertex=name)
            if name not in block_receives:
                raise DiagramValidationError("vertex receives no arrow in the repeating block",
                                             kind='unreachable', level=block.from_level + 1, vertex=name)

    for j, level in enumerate(spec.levels):
        for name in level:
            if j < spec.prefix_depth and name not in emitted[j]:
                raise DiagramValidationError("vertex emits no arrow", kind='sink', level=j, vertex=name)
            if j > 0 and name not in received[j]:
                raise DiagramValidationError("vertex receives no arrow", kind='unreachable', level=j, vertex=name)


def _check_arrow_value(potential, multiplicity, exact: bool, gap: int):
    if not isinstance(multiplicity, int) or isinstance(multiplicity, bool) or multiplicity < 1:
        raise DiagramValidationError(f"arrow count must be a positive integer, got {multiplicity!r}",
                                     kind='schema', level=gap)
    if exact and not isinstance(potential, Fraction):
        raise DiagramValidationError("exact mode requires rational potentials", kind='schema', level=gap)
    if not exact and not isinstance(potential, float):
        raise DiagramValidationError("float mode requires float potentials", kind='schema', level=gap)


def _resolve_exact(document: dict, exact: Optional[bool]) -> bool:
    if exact is not None:
        return exact
    env_value = os.environ.get(EXACT_ENV_VAR, '').strip().lower()
    if env_value in ('1', 'true', 'yes', 'on'):
        return True
    return bool(document.get('exact', False))


def _parse_count(entry: dict, where: str) -> int:
    count = entry.get('count', 1)
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise DiagramValidationError(f"{where}: count must be a positive integer, got {count!r}", kind='schema')
    return count


def load_spec(text: str, exact: Optional[bool] = None) -> DiagramSpec:
    """
    解析并校验 JSON 图表

    Args:
        text: JSON 文本
        exact: 是否使用有理数模式；None 时依次参考环境变量 BRATTELI_EXACT 与文件中的 "exact"

    Returns:
        DiagramSpec: 校验过的图表

    Raises:
        DiagramValidationError: 格式错误、汇点、不可达顶点或层级不匹配
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise DiagramValidationError(f"invalid JSON: {e}", kind='schema') from e
    if not isinstance(document, dict):
        raise DiagramValidationError("top level must be an object", kind='schema')
    unknown = set(document) - {'levels', 'arrows', 'repeat', 'exact'}
    if unknown:
        raise DiagramValidationError(f"unknown keys {sorted(unknown)}", kind='schema')

    exact_mode = _resolve_exact(document, exact)
    levels = document.get('levels')
    if not isinstance(levels, list) or not all(isinstance(level, list) for level in levels):
        raise DiagramValidationError("'levels' must be an array of arrays", kind='schema')

    arrows: List[Arrow] = []
    for position, entry in enumerate(document.get('arrows', [])):
        where = f"arrows[{position}]"
        if not isinstance(entry, dict):
            raise DiagramValidationError(f"{where} must be an object", kind='schema')
        try:
            gap = entry['gap']
            source = entry['from']
            target = entry['to']
            potential = parse_potential(entry.get('potential', 0), exact_mode)
        except KeyError as e:
            raise DiagramValidationError(f"{where} is missing {e}", kind='schema') from e
        except (ValueError, ZeroDivisionError) as e:
            raise DiagramValidationError(f"{where}: {e}", kind='schema') from e
        if not isinstance(gap, int) or isinstance(gap, bool):
            raise DiagramValidationError(f"{where}: gap must be an integer", kind='schema')
        arrows.append(Arrow(gap, source, target, potential, 0, _parse_count(entry, where)))

    repeat = None
    block_doc = document.get('repeat')
    if block_doc is not None:
        if not isinstance(block_doc, dict):
            raise DiagramValidationError("'repeat' must be an object", kind='schema')
        try:
            from_level = block_doc['from_level']
            vertices = tuple(block_doc['vertices'])
            block_arrows = []
            for position, entry in enumerate(block_doc['arrows']):
                where = f"repeat.arrows[{position}]"
                block_arrows.append(BlockArrow(
                    entry['from'], entry['to'],
                    parse_potential(entry.get('potential', 0), exact_mode),
                    parse_potential(entry.get('step', 0), exact_mode),
                    0, _parse_count(entry, where)))
        except KeyError as e:
            raise DiagramValidationError(f"repeat is missing {e}", kind='schema') from e
        except (ValueError, TypeError, ZeroDivisionError) as e:
            raise DiagramValidationError(f"repeat: {e}", kind='schema') from e
        repeat = RepeatBlock(from_level, vertices, tuple(block_arrows))

    spec = build_spec(levels, arrows, repeat, exact_mode)
    logger.debug(f"载入图表: {len(spec.levels)} 个显式层, 表示方式 {spec.presentation}, 精确模式 {exact_mode}")
    return spec


def _potential_out(value: Number):
    if isinstance(value, Fraction):
        return format_number(value)
    return float(value)


def spec_to_document(spec: DiagramSpec) -> dict:
    """图表的 JSON 文档结构"""
    document = {
        'levels': [list(level) for level in spec.levels],
        'arrows': [
            {'gap': a.gap, 'from': a.source, 'to': a.target,
             'potential': _potential_out(a.potential), 'count': a.multiplicity}
            for gap in spec.arrows for a in gap
        ],
        'exact': spec.exact,
    }
    if spec.repeat is not None:
        document['repeat'] = {
            'from_level': spec.repeat.from_level,
            'vertices': list(spec.repeat.vertices),
            'arrows': [
                {'from': a.source, 'to': a.target, 'potential': _potential_out(a.potential),
                 'step': _potential_out(a.step), 'count': a.multiplicity}
                for a in spec.repeat.arrows
            ],
        }
    return document


def dump_spec(spec: DiagramSpec) -> str:
    """序列化为规范 JSON 文本（load_spec 的逆）"""
    return json.dumps(spec_to_document(spec), sort_keys=True, separators=(',', ':'))


def multiplicity_matrices(spec: DiagramSpec, depth: int) -> List[MultiplicityMatrix]:
    """
    计算第 1..depth 个间隙的重数矩阵

    Args:
        spec: 图表
        depth: 最大间隙

    Returns:
        List[MultiplicityMatrix]: 第 j 项的 (v, w) 元为 w→v 箭头数
    """
    if depth < 1:
        raise DiagramValidationError(f"depth must be at least 1, got {depth}", kind='depth')
    spec.require_depth(depth)
    result = []
    for gap in range(1, depth + 1):
        rows = spec.vertices(gap)
        cols = spec.vertices(gap - 1)
        row_index = {v: i for i, v in enumerate(rows)}
        col_index = {w: i for i, w in enumerate(cols)}
        matrix = np.zeros((len(rows), len(cols)), dtype=object)
        for arrow in spec.gap_arrows(gap):
            matrix[row_index[arrow.target], col_index[arrow.source]] += arrow.multiplicity
        result.append(MultiplicityMatrix(gap, rows, cols, matrix))
    return result


def telescope(spec: DiagramSpec, cut_levels: Sequence[int],
              cap: int = DEFAULT_ENUMERATION_CAP) -> DiagramSpec:
    """
    伸缩：新箭头为相邻切点之间的路径，势能为路径势能之和

    Args:
        spec: 图表
        cut_levels: 严格递增的正整数 k_1 < k_2 < ...
        cap: 单个间隙内枚举的箭头束路径上限

    Returns:
        DiagramSpec: 深度为 len(cut_levels) 的有限前缀
    """
    cuts = list(cut_levels)
    if not cuts:
        raise DiagramValidationError("telescoping needs at least one cut level", kind='depth')
    if any(not isinstance(k, int) for k in cuts) or cuts[0] < 1 or any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise DiagramValidationError(f"cut levels must be strictly increasing positive integers: {cuts}",
                                     kind='depth')
    spec.require_depth(cuts[-1])

    levels = [spec.vertices(0)] + [spec.vertices(k) for k in cuts]
    new_arrows: List[Arrow] = []
    lower = 0
    for new_gap, upper in enumerate(cuts, start=1):
        for source in spec.vertices(lower):
            # (当前顶点, 势能, 重数)
            frontier = [(source, 0, 1)]
            for gap in range(lower + 1, upper + 1):
                outgoing = defaultdict(list)
                for arrow in spec.gap_arrows(gap):
                    outgoing[arrow.source].append(arrow)
                frontier = [
                    (arrow.target, potential + arrow.potential, mult * arrow.multiplicity)
                    for vertex, potential, mult in frontier
                    for arrow in outgoing[vertex]
                ]
                if len(frontier) > cap:
                    raise CapacityExceededError(len(frontier), cap, 'telescoped arrow bundles')
            for target, potential, mult in frontier:
                if not spec.exact:
                    potential = float(potential)
                new_arrows.append(Arrow(new_gap, source, target, potential, 0, mult))
        lower = upper

    logger.debug(f"伸缩完成: 切点 {cuts}, 新箭头束 {len(new_arrows)} 个")
    return build_spec(levels, new_arrows, None, spec.exact)


def _pair_name(first: str, second: str) -> str:
    return f"{first}|{second}"


def product(spec_a: DiagramSpec, spec_b: DiagramSpec) -> DiagramSpec:
    """
    两个图表的逐层乘积，箭头对的势能相加

    两者皆为周期表示时结果仍为周期表示；否则截至共同可用深度。
    """
    if spec_a.exact != spec_b.exact:
        spec_a, spec_b = spec_a.to_exact(), spec_b.to_exact()
    exact = spec_a.exact

    if spec_a.is_periodic and spec_b.is_periodic:
        depth = max(spec_a.prefix_depth, spec_b.prefix_depth)
    else:
        depth = min(d for d in (spec_a.max_depth, spec_b.max_depth) if d is not None)

    levels = [
        tuple(_pair_name(v, w) for v in spec_a.vertices(j) for w in spec_b.vertices(j))
        for j in range(depth + 1)
    ]
    arrows = [
        Arrow(gap, _pair_name(a.source, b.source), _pair_name(a.target, b.target),
              a.potential + b.potential, 0, a.multiplicity * b.multiplicity)
        for gap in range(1, depth + 1)
        for a in spec_a.gap_arrows(gap)
        for b in spec_b.gap_arrows(gap)
    ]

    repeat = None
    if spec_a.is_periodic and spec_b.is_periodic:
        block_a = spec_a.repeat.shifted(depth - spec_a.repeat.from_level)
        block_b = spec_b.repeat.shifted(depth - spec_b.repeat.from_level)
        repeat = RepeatBlock(
            depth,
            levels[depth],
            tuple(
                BlockArrow(_pair_name(a.source, b.source), _pair_name(a.target, b.target),
                           a.potential + b.potential, a.step + b.step, 0,
                           a.multiplicity * b.multiplicity)
                for a in block_a.arrows for b in block_b.arrows
            ),
        )
    return build_spec(levels, arrows, repeat, exact)


def negate_potential(spec: DiagramSpec) -> DiagramSpec:
    """所有势能取负（天花板态 = −F 的基态）"""
    arrows = tuple(tuple(replace(a, potential=-a.potential) for a in gap) for gap in spec.arrows)
    repeat = None
    if spec.repeat is not None:
        repeat = replace(spec.repeat, arrows=tuple(
            replace(a, potential=-a.potential, step=-a.step) for a in spec.repeat.arrows))
    return DiagramSpec(spec.levels, arrows, repeat, spec.exact)


def enumerate_paths(spec: DiagramSpec, n: int, cap: int = 4096,
                    expand_copies: bool = True) -> List[FinitePath]:
    """
    显式枚举从 v0 出发、长度为 n 的路径

    Args:
        spec: 图表
        n: 路径长度
        cap: 路径数上限
        expand_copies: 是否把箭头束展开为各个副本

    Returns:
        List[FinitePath]: 按字典序排列的路径

    Raises:
        CapacityExceededError: 路径数超过上限
    """
    spec.require_depth(n)
    paths = [FinitePath(0, ())]
    for gap in range(1, n + 1):
        outgoing = defaultdict(list)
        for arrow in spec.gap_arrows(gap):
            outgoing[arrow.source].append(arrow)
        extended = []
        for path in paths:
            here = path.range if path.arrows else spec.root
            for arrow in outgoing[here]:
                copies = range(arrow.multiplicity) if expand_copies else (0,)
                for copy in copies:
                    extended.append(path.extend(arrow, copy))
                    if len(extended) > cap:
                        raise CapacityExceededError(len(extended), cap)
        paths = extended
    return paths


def _dot_id(level: int, name: str) -> str:
    return json.dumps(f"L{level}:{name}")


def to_dot(spec: DiagramSpec, depth: int, highlight: Optional[Set[Tuple[int, str, str, int]]] = None,
           highlight_vertices: Optional[Set[Tuple[int, str]]] = None, title: str = 'bratteli') -> str:
    """
    导出有限前缀的 Graphviz DOT 文本

    Args:
        spec: 图表
        depth: 导出深度
        highlight: 需要高亮的箭头键 (gap, source, target, index)
        highlight_vertices: 需要高亮的顶点 (level, name)
        title: 图名

    Returns:
        str: DOT 文本
    """
    spec.require_depth(depth)
    highlight = highlight or set()
    highlight_vertices = highlight_vertices or set()
    lines = [f"digraph {json.dumps(title)} {{", "  rankdir=TB;", "  node [shape=circle];"]
    for level in range(depth + 1):
        names = []
        for name in spec.vertices(level):
            style = ', color=red, penwidth=2' if (level, name) in highlight_vertices else ''
            lines.append(f"  {_dot_id(level, name)} [label={json.dumps(name)}{style}];")
            names.append(_dot_id(level, name))
        lines.append(f"  {{ rank=same; {'; '.join(names)}; }}")
    for gap in range(1, depth + 1):
        for arrow in spec.gap_arrows(gap):
            label = str(format_number(arrow.potential))
            if arrow.multiplicity > 1:
                label += f" x{arrow.multiplicity}"
            style = ', color=red, penwidth=2' if arrow.key in highlight else ''
            lines.append(
                f"  {_dot_id(gap - 1, arrow.source)} -> {_dot_id(gap, arrow.target)} "
                f"[label={json.dumps(label)}{style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
