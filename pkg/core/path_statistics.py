"""
路径统计模块
以动态规划逐层计算配分函数（对数域）、最小势能、最小路径数与路径数，
并由此得到规范矩阵、左随机矩阵及其 β→∞ 极限矩阵，不枚举路径
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from core.diagram_model import Arrow, DiagramSpec
from core.exceptions import TieAmbiguityError
from utils.common_utils import AMBIGUOUS, TIGHT, Number, classify_gap
from utils.logger import get_logger
from utils.matrix_utils import dump_matrix, l1_operator_norm, normalize_columns
from utils.stats_cache import get_stats_cache

logger = get_logger(__name__)

RAW_GAUGE = 'RawGauge'
LEFT_STOCHASTIC = 'LeftStochastic'
STOCHASTIC_LIMIT = 'StochasticLimit'
USER_SUPPLIED = 'UserSupplied'

TAIL_CERTIFIED = 'certified'
TAIL_DIVERGENT = 'divergent'
TAIL_INCONCLUSIVE = 'inconclusive'
TAIL_NOT_APPLICABLE = 'not_applicable'

DEFAULT_TIE_TOLERANCE = 1e-9
DEFAULT_AMBIGUITY_FACTOR = 1000.0


@dataclass(frozen=True, eq=False)
class LevelStats:
    """第 level 层每个顶点的统计量"""

    level: int
    vertices: Tuple[str, ...]
    path_count: Dict[str, int]
    min_potential: Dict[str, Number]
    min_count: Dict[str, int]
    log_z: Dict[float, Dict[str, float]]
    tight_arrows: Tuple[Arrow, ...] = ()

    def log_z_vector(self, beta: float) -> np.ndarray:
        values = self.log_z[float(beta)]
        return np.array([values[v] for v in self.vertices], dtype=float)


@dataclass(frozen=True, eq=False)
class ProjectiveSystemMatrix:
    """第 gap 个间隙的矩阵，行为 Br_{gap-1}，列为 Br_gap"""

    gap: int
    rows: Tuple[str, ...]
    cols: Tuple[str, ...]
    matrix: np.ndarray
    flavor: str
    beta: Optional[float] = None
    exact_matrix: Optional[np.ndarray] = field(default=None)

    def column_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def dump(self, precision: int = 17) -> str:
        title = f"{self.flavor} gap={self.gap}"
        if self.beta is not None:
            title += f" beta={self.beta:.{precision}g}"
        return dump_matrix(self.matrix, self.rows, self.cols, precision, title)


def _initial_stats(spec: DiagramSpec, betas: Sequence[float]) -> LevelStats:
    root = spec.root
    zero: Number = Fraction(0) if spec.exact else 0.0
    return LevelStats(
        level=0,
        vertices=spec.vertices(0),
        path_count={root: 1},
        min_potential={root: zero},
        min_count={root: 1},
        log_z={float(b): {root: 0.0} for b in betas},
    )


def advance_level_stats(spec: DiagramSpec, prev: LevelStats, betas: Sequence[float],
                        tol: float = DEFAULT_TIE_TOLERANCE,
                        ambiguity_factor: float = DEFAULT_AMBIGUITY_FACTOR) -> LevelStats:
    """
    由第 j-1 层统计量递推第 j 层

    Raises:
        TieAmbiguityError: 浮点模式下某个势能差落入模糊带
    """
    level = prev.level + 1
    vertices = spec.vertices(level)
    arrows = spec.gap_arrows(level)

    path_count = {v: 0 for v in vertices}
    min_potential: Dict[str, Number] = {}
    terms: Dict[float, Dict[str, List[float]]] = {float(b): {v: [] for v in vertices} for b in betas}

    for arrow in arrows:
        s, t = arrow.source, arrow.target
        path_count[t] += prev.path_count[s] * arrow.multiplicity
        candidate = prev.min_potential[s] + arrow.potential
        if t not in min_potential or candidate < min_potential[t]:
            min_potential[t] = candidate
        log_mult = math.log(arrow.multiplicity)
        potential = float(arrow.potential)
        for beta, per_vertex in terms.items():
            per_vertex[t].append(prev.log_z[beta][s] - beta * potential + log_mult)

    min_count = {v: 0 for v in vertices}
    tight: List[Arrow] = []
    for arrow in arrows:
        t = arrow.target
        difference = prev.min_potential[arrow.source] + arrow.potential - min_potential[t]
        verdict = classify_gap(difference, min_potential[t], tol, ambiguity_factor)
        if verdict == AMBIGUOUS:
            logger.error(f"第 {level} 层顶点 {t} 的紧箭头判定不确定，差值 {float(difference):.3e}")
            raise TieAmbiguityError(level, t, float(difference))
        if verdict == TIGHT:
            min_count[t] += prev.min_count[arrow.source] * arrow.multiplicity
            tight.append(arrow)

    log_z = {
        beta: {v: float(logsumexp(per_vertex[v])) for v in vertices}
        for beta, per_vertex in terms.items()
    }
    return LevelStats(level, vertices, path_count, min_potential, min_count, log_z, tuple(tight))


def iter_level_stats(spec: DiagramSpec, betas: Sequence[float] = (),
                     tol: float = DEFAULT_TIE_TOLERANCE,
                     ambiguity_factor: float = DEFAULT_AMBIGUITY_FACTOR,
                     start: Optional[LevelStats] = None) -> Iterator[LevelStats]:
    """
    逐层产出 LevelStats；周期表示时为无限序列

    Args:
        spec: 图表
        betas: 需要配分函数的 β 列表
        tol: 紧箭头判定容差
        ambiguity_factor: 模糊带倍数
        start: 可选起始层（从其下一层继续）
    """
    current = start if start is not None else _initial_stats(spec, betas)
    if start is None:
        yield current
    while spec.max_depth is None or current.level < spec.max_depth:
        current = advance_level_stats(spec, current, betas, tol, ambiguity_factor)
        yield current


def compute_level_stats(spec: DiagramSpec, depth: int, betas: Sequence[float] = (),
                        tol: float = DEFAULT_TIE_TOLERANCE,
                        ambiguity_factor: float = DEFAULT_AMBIGUITY_FACTOR,
                        use_cache: bool = True) -> List[LevelStats]:
    """
    计算第 0..depth 层的统计量

    Args:
        spec: 图表
        depth: 最大层级
        betas: β 列表
        tol: 紧箭头判定容差
        ambiguity_factor: 模糊带倍数
        use_cache: 是否使用全局 LRU 缓存

    Returns:
        List[LevelStats]: 长度为 depth+1 的序列
    """
    spec.require_depth(depth)
    betas = tuple(float(b) for b in betas)
    key = (spec.fingerprint, betas, tol, ambiguity_factor)
    cache = get_stats_cache() if use_cache else None

    stats: List[LevelStats] = []
    if cache is not None:
        cached = cache.get_stats(key, depth)
        if cached is not None:
            if len(cached) > depth:
                return cached
            stats = cached

    if not stats:
        stats = [_initial_stats(spec, betas)]
    while stats[-1].level < depth:
        stats.append(advance_level_stats(spec, stats[-1], betas, tol, ambiguity_factor))
        if stats[-1].level % 500 == 0:
            logger.debug(f"层统计计算进度: 第 {stats[-1].level} 层")

    if cache is not None:
        cache.put_stats(key, stats)
    return stats


def gauge_matrix(spec: DiagramSpec, gap: int, beta: float) -> ProjectiveSystemMatrix:
    """
    规范矩阵 Br(β)^(j)：(v, w) 元为 w 的入箭头中来自 v 的 e^{-βF(a)} 之和

    Returns:
        ProjectiveSystemMatrix: 行 Br_{j-1}，列 Br_j
    """
    rows = spec.vertices(gap - 1)
    cols = spec.vertices(gap)
    row_index = {v: i for i, v in enumerate(rows)}
    col_index = {w: i for i, w in enumerate(cols)}
    matrix = np.zeros((len(rows), len(cols)))
    for arrow in spec.gap_arrows(gap):
        matrix[row_index[arrow.source], col_index[arrow.target]] += (
            arrow.multiplicity * math.exp(-beta * float(arrow.potential)))
    return ProjectiveSystemMatrix(gap, rows, cols, matrix, RAW_GAUGE, float(beta))


def stochastic_from_stats(spec: DiagramSpec, prev: LevelStats, cur: LevelStats,
                          beta: float) -> ProjectiveSystemMatrix:
    """由相邻两层的 log Z 计算左随机矩阵（对数域）"""
    beta = float(beta)
    gap = cur.level
    rows, cols = prev.vertices, cur.vertices
    row_index = {v: i for i, v in enumerate(rows)}
    col_index = {w: i for i, w in enumerate(cols)}
    log_entries = np.full((len(rows), len(cols)), -np.inf)
    prev_z, cur_z = prev.log_z[beta], cur.log_z[beta]
    for arrow in spec.gap_arrows(gap):
        i, k = row_index[arrow.source], col_index[arrow.target]
        term = (prev_z[arrow.source] - beta * float(arrow.potential)
                + math.log(arrow.multiplicity) - cur_z[arrow.target])
        log_entries[i, k] = np.logaddexp(log_entries[i, k], term)
    matrix = normalize_columns(np.exp(log_entries))
    return ProjectiveSystemMatrix(gap, rows, cols, matrix, LEFT_STOCHASTIC, beta)


def stochastic_matrix(spec: DiagramSpec, gap: int, beta: float,
                      tol: float = DEFAULT_TIE_TOLERANCE) -> ProjectiveSystemMatrix:
    """
    左随机矩阵：(v, w) 元 = Z_{j-1}(v)·Br(β)^(j)_{v,w} / Z_j(w)，列和为 1
    """
    stats = compute_level_stats(spec, gap, [beta], tol)
    return stochastic_from_stats(spec, stats[gap - 1], stats[gap], beta)


def limit_from_stats(prev: LevelStats, cur: LevelStats) -> ProjectiveSystemMatrix:
    """由最小路径计数计算极限矩阵，仅统计紧箭头"""
    rows, cols = prev.vertices, cur.vertices
    row_index = {v: i for i, v in enumerate(rows)}
    col_index = {w: i for i, w in enumerate(cols)}
    exact = np.full((len(rows), len(cols)), Fraction(0), dtype=object)
    for arrow in cur.tight_arrows:
        i, k = row_index[arrow.source], col_index[arrow.target]
        exact[i, k] += Fraction(prev.min_count[arrow.source] * arrow.multiplicity,
                                cur.min_count[arrow.target])
    matrix = np.array([[float(x) for x in row] for row in exact], dtype=float).reshape(exact.shape)
    return ProjectiveSystemMatrix(cur.level, rows, cols, matrix, STOCHASTIC_LIMIT, None, exact)


def stochastic_limit_matrix(spec: DiagramSpec, gap: int,
                            tol: float = DEFAULT_TIE_TOLERANCE,
                            ambiguity_factor: float = DEFAULT_AMBIGUITY_FACTOR) -> ProjectiveSystemMatrix:
    """
    β→∞ 极限矩阵：(v, w) 元 = 经 v 到达 w 的最小路径数 / 到达 w 的最小路径数

    Raises:
        TieAmbiguityError: 浮点模式下紧箭头判定不确定
    """
    stats = compute_level_stats(spec, gap, (), tol, ambiguity_factor)
    return limit_from_stats(stats[gap - 1], stats[gap])


def _tail_estimate(distances: Sequence[float], window: int) -> Dict:
    """对周期区间内最后 window+1 个距离估计几何尾界"""
    if len(distances) < window + 1 or window < 1:
        return {'status': TAIL_INCONCLUSIVE, 'bound': None, 'ratio': None,
                'reason': f"need {window + 1} periodic gaps, have {len(distances)}"}
    observed = list(distances[-(window + 1):])
    if all(d == 0.0 for d in observed):
        return {'status': TAIL_CERTIFIED, 'bound': 0.0, 'ratio': 0.0, 'reason': 'distances vanish'}
    if any(b > a for a, b in zip(observed, observed[1:])) and min(observed) == 0.0:
        return {'status': TAIL_INCONCLUSIVE, 'bound': None, 'ratio': None,
                'reason': 'distances vanish and reappear'}
    ratios = [b / a for a, b in zip(observed, observed[1:]) if a > 0.0]
    rho = max(ratios)
    if rho < 1.0 - 1e-9:
        last = observed[-1]
        return {'status': TAIL_CERTIFIED, 'bound': last * rho / (1.0 - rho), 'ratio': rho,
                'reason': 'geometric decay over the observed window'}
    if min(ratios) >= 1.0 - 1e-6:
        return {'status': TAIL_DIVERGENT, 'bound': None, 'ratio': rho,
                'reason': 'per-gap distances do not decay'}
    return {'status': TAIL_INCONCLUSIVE, 'bound': None, 'ratio': rho,
            'reason': 'decay ratio not uniformly below 1'}


def l1_convergence_report(spec: DiagramSpec, beta: float, depth: int, window: int = 3,
                          tol: float = DEFAULT_TIE_TOLERANCE) -> Dict:
    """
    逐间隙计算 ‖左随机矩阵(β) − 极限矩阵‖₁ 及部分和；周期表示时估计几何尾界

    Args:
        spec: 图表
        beta: 逆温度
        depth: 最大间隙
        window: 尾界检测窗口（周期区间内的比值个数）
        tol: 紧箭头判定容差

    Returns:
        dict: {beta, depth, distances, partial_sums, partial_sum, tail: {status, bound, ratio, reason}, total}
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    stats = compute_level_stats(spec, depth, [beta], tol)
    distances = []
    for gap in range(1, depth + 1):
        finite_beta = stochastic_from_stats(spec, stats[gap - 1], stats[gap], beta)
        limit = limit_from_stats(stats[gap - 1], stats[gap])
        distances.append(l1_operator_norm(finite_beta.matrix - limit.matrix))
    partial_sums = np.cumsum(distances).tolist()

    if spec.is_periodic:
        periodic = distances[spec.prefix_depth:]
        tail = _tail_estimate(periodic, window)
    else:
        tail = {'status': TAIL_NOT_APPLICABLE, 'bound': None, 'ratio': None,
                'reason': 'finite prefix: the infinite sum cannot be certified'}

    total = partial_sums[-1] + tail['bound'] if tail['status'] == TAIL_CERTIFIED else None
    logger.debug(f"ℓ¹ 收敛报告 β={beta}: 部分和 {partial_sums[-1]:.6g}, 尾界状态 {tail['status']}")
    return {
        'beta': float(beta),
        'depth': depth,
        'distances': distances,
        'partial_sums': partial_sums,
        'partial_sum': partial_sums[-1],
        'tail': tail,
        'total': total,
    }


def criterion_sweep(spec: DiagramSpec, betas: Sequence[float], depth: int, window: int = 3,
                    threshold: float = 1e-6, tol: float = DEFAULT_TIE_TOLERANCE,
                    max_workers: int = 1) -> Dict:
    """
    在 β 网格上检查 Σ‖左随机矩阵(β) − 极限矩阵‖₁ → 0 判据

    判据成立：所有尾界已认证，总和随 β 单调不增，且最大 β 处总和不超过 threshold。

    Returns:
        dict: {holds, reason, reports, threshold}
    """
    grid = sorted(float(b) for b in betas)
    if max_workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            reports = list(executor.map(
                lambda b: l1_convergence_report(spec, b, depth, window, tol), grid))
    else:
        reports = [l1_convergence_report(spec, b, depth, window, tol) for b in grid]

    uncertified = [r['beta'] for r in reports if r['tail']['status'] != TAIL_CERTIFIED]
    if uncertified:
        statuses = sorted({r['tail']['status'] for r in reports if r['beta'] in uncertified})
        holds, reason = False, f"tail not certified at beta {uncertified} ({', '.join(statuses)})"
    else:
        totals = [r['total'] for r in reports]
        if any(b > a * (1 + 1e-12) + 1e-300 for a, b in zip(totals, totals[1:])):
            holds, reason = False, 'totals increase along the beta grid'
        elif totals[-1] > threshold:
            holds, reason = False, f"total {totals[-1]:.3e} at beta {grid[-1]} exceeds {threshold:.1e}"
        else:
            holds, reason = True, 'all tails certified and totals decrease to within the threshold'
    logger.info(f"β→∞ 判据: {'成立' if holds else '不成立'} ({reason})")
    return {'holds': holds, 'reason': reason, 'reports': reports, 'threshold': threshold}


def convergence_rows(report: Dict) -> List[Tuple[int, float, float, float]]:
    """CSV 行 (gap, beta, l1_distance, partial_sum)"""
    return [
        (gap, report['beta'], distance, partial)
        for gap, (distance, partial) in enumerate(zip(report['distances'], report['partial_sums']), start=1)
    ]
