"""
测地分析模块
由紧箭头构造子图并向后剪枝得到 Br⁺，提供测地前缀路径集 G_n 的计数与成员判定，
以及 AF(Br⁺) 的块结构（基态集合与其态空间仿射同胚）
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from core.diagram_model import (Arrow, DiagramSpec, FinitePath, MultiplicityMatrix, build_spec,
                                multiplicity_matrices, to_dot)
from core.exceptions import CertificationError
from core.path_statistics import (DEFAULT_AMBIGUITY_FACTOR, DEFAULT_TIE_TOLERANCE, LevelStats,
                                  compute_level_stats)
from utils.common_utils import Number, format_number, tie_scale
from utils.logger import get_logger

logger = get_logger(__name__)

EXACT = 'Exact'
TRUNCATED = 'TruncatedAtDepth'

DEFAULT_PERIOD_SEARCH = 256
VIRTUAL_SINK = '__sink__'


@dataclass(frozen=True)
class Certification:
    """Br⁺ 的认证方式：周期不动点（Exact）或前瞻截断"""

    kind: str
    depth: int
    lookahead: Optional[int] = None
    stable: bool = True
    period: Optional[int] = None
    cycle_start: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.kind == EXACT

    def label(self) -> str:
        if self.exact:
            return EXACT
        suffix = '' if self.stable else ', unstable'
        return f"{TRUNCATED}(N={self.depth}, L={self.lookahead}{suffix})"

    def to_dict(self) -> dict:
        return {
            'kind': self.kind, 'label': self.label(), 'depth': self.depth,
            'lookahead': self.lookahead, 'stable': self.stable,
            'period': self.period, 'cycle_start': self.cycle_start,
        }


@dataclass(frozen=True, eq=False)
class TightSubdiagram:
    """剪枝后的紧箭头子图（Br⁺ 的有限层表示）"""

    spec: DiagramSpec
    depth: int
    levels: Tuple[Tuple[str, ...], ...]
    arrows: Tuple[Tuple[Arrow, ...], ...]
    min_potential: Tuple[Dict[str, Number], ...]
    certification: Certification
    _keys: FrozenSet[Tuple[int, str, str, int]] = field(default=frozenset(), repr=False)

    def __post_init__(self):
        keys = frozenset(a.key for gap in self.arrows for a in gap)
        object.__setattr__(self, '_keys', keys)

    def contains_arrow(self, arrow: Arrow) -> bool:
        return arrow.key in self._keys

    def surviving_vertices(self, level: int) -> Tuple[str, ...]:
        self.require_level(level)
        return self.levels[level]

    def require_level(self, n: int):
        if n > self.depth:
            raise CertificationError(
                f"level {n} is beyond the certified depth {self.depth}", self.certification.label())


@dataclass(frozen=True, eq=False)
class GeodesicPrefix:
    """长度为 n 的测地前缀路径族 G_n（计数、成员判定、可选显式列表）"""

    n: int
    total: int
    per_vertex: Dict[str, int]
    paths: Optional[List[FinitePath]]
    certification: Certification
    _sub: TightSubdiagram = field(repr=False, default=None)

    def contains(self, path: FinitePath) -> bool:
        if path.length != self.n or path.start_level != 0:
            return False
        if path.arrows and path.arrows[0].source != self._sub.spec.root:
            return False
        return all(self._sub.contains_arrow(a) for a in path.arrows)


@dataclass(frozen=True, eq=False)
class AlgebraProfile:
    """AF(Br⁺) 的维数数据：每层块大小与 Br⁺ 的重数矩阵"""

    depth: int
    block_sizes: Tuple[Dict[str, int], ...]
    multiplicities: Tuple[MultiplicityMatrix, ...]
    spec: DiagramSpec
    arrow_map: Dict[Tuple[int, str, str, int], Arrow]
    certification: Certification

    def block_counts(self) -> List[int]:
        return [len(sizes) for sizes in self.block_sizes]

    def label(self, level: int) -> str:
        return profile_label(self.block_sizes[level].values())

    def labels(self) -> List[str]:
        return [self.label(n) for n in range(self.depth + 1)]

    def uniform_label(self, from_level: int = 1) -> Optional[str]:
        """从 from_level 起各层标签相同时返回该标签"""
        labels = self.labels()[from_level:]
        if labels and all(lab == labels[0] for lab in labels):
            return labels[0]
        return None

    def extreme_ground_state_count(self) -> Optional[int]:
        """
        Br⁺ 由互不相交的列组成时（每个重数矩阵都是置换矩阵形状），极端基态数等于列数；
        其他情形返回 None
        """
        for mult in self.multiplicities[1:]:
            pattern = np.array([[1 if x else 0 for x in row] for row in mult.matrix])
            if pattern.shape[0] != pattern.shape[1]:
                return None
            if not (pattern.sum(axis=0) == 1).all() or not (pattern.sum(axis=1) == 1).all():
                return None
            if any(x > 1 for row in mult.matrix for x in row):
                return None
        return len(self.block_sizes[-1])


def profile_label(sizes) -> str:
    """块大小列表的标签，例如 [1, 1] -> 'C ⊕ C'，[2, 1] -> 'M_2 ⊕ C'"""
    parts = ['C' if size == 1 else f"M_{size}" for size in sizes]
    return ' ⊕ '.join(parts) if parts else '0'


def _tight_graph(stats: Sequence[LevelStats], horizon: int) -> nx.DiGraph:
    """紧箭头分层图，节点为 (层, 顶点)"""
    graph = nx.DiGraph()
    for gap in range(1, horizon + 1):
        graph.add_edges_from(((gap - 1, a.source), (gap, a.target)) for a in stats[gap].tight_arrows)
    return graph


def _ancestors_of(graph: nx.DiGraph, targets) -> Set:
    """能到达 targets 中某个节点的全部节点（含 targets 本身）"""
    graph.add_edges_from((node, VIRTUAL_SINK) for node in targets)
    if VIRTUAL_SINK not in graph:
        return set()
    return nx.ancestors(graph, VIRTUAL_SINK)


def _prune_backwards(stats: Sequence[LevelStats], horizon: int, alive_at_horizon: Set[str]) -> List[Set[str]]:
    """从 horizon 层向 0 层剪枝：保留至少有一条紧箭头路径通往存活顶点的顶点"""
    graph = _tight_graph(stats, horizon)
    alive: List[Set[str]] = [set() for _ in range(horizon + 1)]
    for level, v in _ancestors_of(graph, [(horizon, v) for v in alive_at_horizon]):
        alive[level].add(v)
    return alive


def _normalized_state(stats: LevelStats) -> Tuple:
    values = [stats.min_potential[v] for v in stats.vertices]
    low = min(values)
    return tuple(v - low for v in values)


def _states_equal(first: Tuple, second: Tuple, tol: float) -> bool:
    if first and not isinstance(first[0], float):
        return first == second
    return all(abs(a - b) <= tol * tie_scale(b) for a, b in zip(first, second))


def _find_cycle(spec: DiagramSpec, stats: List[LevelStats], tol: float, ambiguity_factor: float,
                search: int) -> Optional[Tuple[int, int, List[LevelStats]]]:
    """在周期区内寻找规范化最小势能向量的重复，返回 (起点, 周期, 统计序列)"""
    start = spec.prefix_depth
    seen: List[Tuple] = []
    level = start
    while level <= start + search:
        if len(stats) <= level + 1:
            stats = compute_level_stats(spec, level + 1, (), tol, ambiguity_factor)
        state = _normalized_state(stats[level])
        for offset, earlier in enumerate(seen):
            if _states_equal(earlier, state, tol):
                return start + offset, level - (start + offset), stats
        seen.append(state)
        level += 1
    return None


def extract_geodesic_subdiagram(spec: DiagramSpec, depth: int, lookahead: int = 5, window: int = 3,
                                tol: float = DEFAULT_TIE_TOLERANCE,
                                ambiguity_factor: float = DEFAULT_AMBIGUITY_FACTOR,
                                period_search: int = DEFAULT_PERIOD_SEARCH) -> TightSubdiagram:
    """
    计算紧箭头子图并剪枝为 Br⁺

    Args:
        spec: 图表
        depth: 需要的层数
        lookahead: 有限前缀的前瞻层数 L
        window: 稳定性窗口 W（检查前瞻 L-W..L 的存活集是否一致）
        tol: 紧箭头判定容差
        ambiguity_factor: 模糊带倍数
        period_search: 周期表示中寻找不动点的最大层数

    Returns:
        TightSubdiagram: 存活顶点/箭头与认证标志

    Raises:
        DiagramValidationError: depth + lookahead 超出有限前缀
        TieAmbiguityError: 浮点模式下紧箭头判定不确定
    """
    if depth < 0 or lookahead < 0:
        raise ValueError("depth and lookahead must be non-negative")

    if spec.is_periodic and spec.repeat.stationary:
        stats = compute_level_stats(spec, max(depth, spec.prefix_depth) + 1, (), tol, ambiguity_factor)
        found = _find_cycle(spec, stats, tol, ambiguity_factor, period_search)
        if found is not None:
            cycle_start, period, stats = found
            sub = _exact_subdiagram(spec, depth, stats, cycle_start, period, tol, ambiguity_factor)
            logger.info(f"Br⁺ 认证为精确（周期 {period}，起点 {cycle_start}）")
            return sub
        logger.warning(f"在 {period_search} 层内未找到最小势能的周期，改用前瞻截断")

    horizon = depth + lookahead
    spec.require_depth(horizon)
    stats = compute_level_stats(spec, horizon, (), tol, ambiguity_factor)
    alive = _prune_backwards(stats, horizon, set(stats[horizon].vertices))

    stable = True
    for shorter in range(max(0, lookahead - window), lookahead):
        other = _prune_backwards(stats, depth + shorter, set(stats[depth + shorter].vertices))
        if any(other[n] != alive[n] for n in range(depth + 1)):
            stable = False
            break
    if not stable:
        logger.warning(f"存活顶点集在前瞻 {max(0, lookahead - window)}..{lookahead} 内不稳定，建议增大前瞻")

    certification = Certification(TRUNCATED, depth, lookahead, stable)
    logger.debug(f"Br⁺ 以前瞻截断认证: {certification.label()}")
    return _assemble(spec, depth, stats, alive, certification)


def _exact_subdiagram(spec: DiagramSpec, depth: int, stats: List[LevelStats], cycle_start: int,
                      period: int, tol: float, ambiguity_factor: float) -> TightSubdiagram:
    top = max(depth, cycle_start + period)
    if len(stats) <= top:
        stats = compute_level_stats(spec, top, (), tol, ambiguity_factor)

    # 周期上的紧箭头图：存活顶点为能走到有向环的顶点
    graph = nx.DiGraph()
    graph.add_nodes_from((i, v) for i in range(period) for v in stats[cycle_start + i].vertices)
    for i in range(period):
        graph.add_edges_from(((i, a.source), ((i + 1) % period, a.target))
                             for a in stats[cycle_start + i + 1].tight_arrows)
    on_cycles = [node for component in nx.strongly_connected_components(graph)
                 for node in component if len(component) > 1 or graph.has_edge(node, node)]
    cycle: List[Set[str]] = [set() for _ in range(period)]
    for i, v in _ancestors_of(graph, on_cycles):
        cycle[i].add(v)

    alive: List[Set[str]] = [set() for _ in range(top + 1)]
    for level in range(cycle_start, top + 1):
        alive[level] = set(cycle[(level - cycle_start) % period])
    alive[:cycle_start + 1] = _prune_backwards(stats, cycle_start, alive[cycle_start])

    certification = Certification(EXACT, depth, None, True, period, cycle_start)
    return _assemble(spec, depth, stats, alive, certification)


def _assemble(spec: DiagramSpec, depth: int, stats: Sequence[LevelStats], alive: Sequence[Set[str]],
              certification: Certification) -> TightSubdiagram:
    levels = tuple(tuple(v for v in stats[n].vertices if v in alive[n]) for n in range(depth + 1))
    arrows = tuple(
        tuple(a for a in stats[gap].tight_arrows if a.source in alive[gap - 1] and a.target in alive[gap])
        for gap in range(1, depth + 1)
    )
    minima = tuple(dict(stats[n].min_potential) for n in range(depth + 1))
    return TightSubdiagram(spec, depth, levels, arrows, minima, certification)


def geodesic_prefix_data(sub: TightSubdiagram, n: int, materialize_cap: int = 1000000) -> GeodesicPrefix:
    """
    G_n 的计数（按存活箭头动态规划）、逐顶点计数与成员判定

    Raises:
        CertificationError: n 超出已认证深度
    """
    sub.require_level(n)
    counts: Dict[str, int] = {sub.spec.root: 1}
    for gap in range(1, n + 1):
        following: Dict[str, int] = defaultdict(int)
        for arrow in sub.arrows[gap - 1]:
            following[arrow.target] += counts.get(arrow.source, 0) * arrow.multiplicity
        counts = {v: following[v] for v in sub.levels[gap] if following.get(v)}
    total = sum(counts.values())

    paths = None
    if total <= materialize_cap:
        paths = [FinitePath(0, ())]
        for gap in range(1, n + 1):
            outgoing: Dict[str, List[Arrow]] = defaultdict(list)
            for arrow in sub.arrows[gap - 1]:
                outgoing[arrow.source].append(arrow)
            paths = [
                path.extend(arrow, copy)
                for path in paths
                for arrow in outgoing[path.range if path.arrows else sub.spec.root]
                for copy in range(arrow.multiplicity)
            ]
    else:
        logger.info(f"G_{n} 共 {total} 条路径，超过物化上限 {materialize_cap}，仅提供计数")
    return GeodesicPrefix(n, total, counts, paths, sub.certification, sub)


def ground_state_algebra_profile(sub: TightSubdiagram, depth: Optional[int] = None) -> AlgebraProfile:
    """
    AF(Br⁺) 的维数剖面，并给出 Br⁺ 本身的图表表示（可供其他模块复用）
    """
    depth = sub.depth if depth is None else depth
    sub.require_level(depth)
    arrows = [a for gap in sub.arrows[:depth] for a in gap]
    plus_spec = build_spec(sub.levels[:depth + 1], arrows, None, sub.spec.exact)

    # 重新编号后的箭头与原箭头按 (gap, source, target) 内的顺序一一对应
    arrow_map: Dict[Tuple[int, str, str, int], Arrow] = {}
    for original_gap, plus_gap in zip(sub.arrows[:depth], plus_spec.arrows):
        for original, renamed in zip(original_gap, plus_gap):
            arrow_map[original.key] = renamed

    block_sizes = []
    for n in range(depth + 1):
        data = geodesic_prefix_data(sub, n, materialize_cap=0)
        block_sizes.append({v: data.per_vertex[v] for v in sub.levels[n]})
    multiplicities = tuple(multiplicity_matrices(plus_spec, depth)) if depth >= 1 else ()
    return AlgebraProfile(depth, tuple(block_sizes), multiplicities, plus_spec, arrow_map, sub.certification)


def subdiagram_report(sub: TightSubdiagram) -> dict:
    """JSON 报告 {levels, surviving vertices, tight arrows, certification}"""
    return {
        'depth': sub.depth,
        'levels': [list(sub.spec.vertices(n)) for n in range(sub.depth + 1)],
        'surviving_vertices': [list(level) for level in sub.levels],
        'tight_arrows': [[a.label() for a in gap] for gap in sub.arrows],
        'min_potential': [
            {v: format_number(m) for v, m in minima.items()} for minima in sub.min_potential
        ],
        'certification': sub.certification.to_dict(),
    }


def subdiagram_dot(sub: TightSubdiagram, title: str = 'geodesics') -> str:
    """导出 DOT，高亮 Br⁺ 的顶点与箭头"""
    vertices = {(n, v) for n, level in enumerate(sub.levels) for v in level}
    return to_dot(sub.spec, sub.depth, set(sub._keys), vertices, title)
