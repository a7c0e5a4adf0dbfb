"""
KMS 逆极限模块
数值实现参数化 β-KMS 态的逆极限：左随机流上的顶点分布、规范系统的 ψ 向量、
β→∞ 输运、扰动输运映射及其假设检验
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eig
from scipy.spatial.distance import pdist

from core.diagram_model import DiagramSpec
from core.exceptions import (CertificationError, DimensionMismatchError, IterationBudgetError,
                             StateValidationError)
from core.path_statistics import (DEFAULT_TIE_TOLERANCE, ProjectiveSystemMatrix, compute_level_stats,
                                  gauge_matrix, iter_level_stats, limit_from_stats, stochastic_from_stats)
from utils.logger import get_logger
from utils.matrix_utils import l1_distance, l1_operator_norm, normalize_columns, spectral_norm, stochastic_power

logger = get_logger(__name__)

GAUGE_SYSTEM = 'GaugeSystem'
STOCHASTIC_SYSTEM = 'StochasticSystem'
STOCHASTIC_LIMIT_SYSTEM = 'StochasticLimitSystem'

SIMPLEX_TOLERANCE = 1e-9
DEFAULT_CONVERGENCE_TOLERANCE = 1e-9
DEFAULT_ITERATION_BUDGET = 10000
CONSTANT_MATRIX_TOLERANCE = 1e-12
SEED_TOLERANCE_FACTOR = 0.1

UNIQUENESS_NOTE = 'uniqueness is inferred from multi-seed agreement, not proved'

Matrices = Sequence[Union[np.ndarray, ProjectiveSystemMatrix]]


@dataclass(frozen=True, eq=False)
class SimplexVector:
    """Δ_{Br_j} 中的元素：非负且和为 1 的顶点分布"""

    level: int
    vertices: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape != (len(self.vertices),):
            raise DimensionMismatchError(
                f"{len(values)} values for {len(self.vertices)} vertices at level {self.level}")
        if values.size and values.min() < -SIMPLEX_TOLERANCE:
            raise StateValidationError(f"simplex entries must be non-negative, got {values.min()!r}")
        total = values.sum()
        if abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise StateValidationError(f"simplex entries sum to {total!r}, expected 1")
        values = np.clip(values, 0.0, None)
        object.__setattr__(self, 'values', values / values.sum())
        object.__setattr__(self, 'vertices', tuple(self.vertices))

    @classmethod
    def uniform(cls, level: int, vertices: Sequence[str]) -> 'SimplexVector':
        return cls(level, tuple(vertices), np.full(len(vertices), 1.0 / len(vertices)))

    @classmethod
    def point(cls, level: int, vertices: Sequence[str], vertex: str) -> 'SimplexVector':
        values = np.zeros(len(vertices))
        values[list(vertices).index(vertex)] = 1.0
        return cls(level, tuple(vertices), values)

    @classmethod
    def from_mapping(cls, level: int, vertices: Sequence[str], weights: Mapping[str, float]) -> 'SimplexVector':
        unknown = set(weights) - set(vertices)
        if unknown:
            raise DimensionMismatchError(f"weights name unknown vertices {sorted(unknown)}")
        return cls(level, tuple(vertices), np.array([float(weights.get(v, 0.0)) for v in vertices]))

    def as_dict(self) -> Dict[str, float]:
        return {v: float(x) for v, x in zip(self.vertices, self.values)}

    def distance(self, other: 'SimplexVector') -> float:
        if self.vertices != other.vertices:
            raise DimensionMismatchError("simplex vectors live over different vertex sets")
        return l1_distance(self.values, other.values)

    def to_dict(self) -> dict:
        return {'level': self.level, 'weights': self.as_dict()}


@dataclass(frozen=True, eq=False)
class InverseLimitApproximant:
    """逆极限元素在 base_level 层的近似值"""

    flavor: str
    beta: Optional[float]
    base_level: int
    depth: int
    vertices: Tuple[str, ...]
    values: np.ndarray
    residual: float
    converged: bool
    diameter: Optional[float] = None

    def as_simplex(self) -> SimplexVector:
        if self.flavor == GAUGE_SYSTEM:
            raise ValueError("gauge approximants are not simplex vectors; use distribution_from_gauge")
        return SimplexVector(self.base_level, self.vertices, self.values)

    def to_dict(self) -> dict:
        return {
            'flavor': self.flavor, 'beta': self.beta, 'level': self.base_level, 'depth': self.depth,
            'values': {v: float(x) for v, x in zip(self.vertices, self.values)},
            'residual': self.residual, 'converged': self.converged, 'diameter': self.diameter,
        }


def _arrays(system: Matrices) -> List[np.ndarray]:
    return [np.asarray(m.matrix if isinstance(m, ProjectiveSystemMatrix) else m, dtype=float) for m in system]


def _seed_values(seed: Optional[SimplexVector], vertices: Tuple[str, ...]) -> np.ndarray:
    """种子在某层的取值：顶点集一致时沿用，否则取均匀分布"""
    if seed is not None and seed.vertices == vertices:
        return seed.values
    return np.full(len(vertices), 1.0 / len(vertices))


def _column_diameter(product: np.ndarray) -> float:
    if product.shape[1] < 2:
        return 0.0
    return float(pdist(product.T, 'cityblock').max())


def kms_vertex_distribution(spec: DiagramSpec, beta: float, base_level: int, depth: int,
                            seed: Optional[SimplexVector] = None,
                            tol: float = DEFAULT_CONVERGENCE_TOLERANCE,
                            budget: int = DEFAULT_ITERATION_BUDGET, iterate: Optional[bool] = None,
                            strict: bool = False,
                            tie_tol: float = DEFAULT_TIE_TOLERANCE) -> InverseLimitApproximant:
    """
    左随机矩阵乘积 underline Br(β)^(j+1)···underline Br(β)^(j+k) 作用在种子分布上

    Args:
        spec: 图表
        beta: 逆温度
        base_level: 输出层 j
        depth: 乘积长度 k（≥ 1）
        seed: j+k 层上的种子分布（默认均匀）
        tol: 收敛容差（残差为深度 k 与 k−1 结果的 ℓ¹ 距离）
        budget: 最大矩阵乘法次数
        iterate: 残差未达标时是否继续加深（周期表示默认继续）
        strict: 预算耗尽时是否抛出 IterationBudgetError
        tie_tol: 紧箭头判定容差

    Returns:
        InverseLimitApproximant: StochasticSystem 近似，附残差与乘积列直径
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    beta = float(beta)
    spec.require_depth(base_level + depth)
    if seed is not None and seed.vertices != spec.vertices(base_level + depth):
        raise DimensionMismatchError(f"seed does not live on level {base_level + depth}")
    iterate = spec.is_periodic if iterate is None else iterate

    stream = iter_level_stats(spec, [beta], tie_tol)
    prev = next(stream)
    while prev.level < base_level:
        prev = next(stream)
    product = np.eye(len(prev.vertices))
    previous_value = _seed_values(seed, prev.vertices)
    value, residual, k = previous_value, math.inf, 0

    for cur in stream:
        product = normalize_columns(product @ stochastic_from_stats(spec, prev, cur, beta).matrix)
        k += 1
        prev = cur
        value = product @ _seed_values(seed, cur.vertices)
        residual = l1_distance(value, previous_value)
        previous_value = value
        if k >= depth and (not iterate or residual < tol or k >= budget):
            break
        if k % 1000 == 0:
            logger.debug(f"顶点分布迭代 β={beta}: 深度 {k}, 残差 {residual:.3e}")

    converged = residual < tol
    if not converged:
        message = f"vertex distribution at beta={beta} did not reach tol {tol:.1e} (residual {residual:.3e}, depth {k})"
        if iterate and k >= budget:
            logger.warning(message)
            if strict:
                raise IterationBudgetError(message, residual)
        else:
            logger.debug(message)
    return InverseLimitApproximant(STOCHASTIC_SYSTEM, beta, base_level, k, spec.vertices(base_level),
                                   value / value.sum(), residual, converged, _column_diameter(product))


def multi_seed_distribution(spec: DiagramSpec, beta: float, base_level: int, depth: int,
                            seeds: Optional[Sequence[SimplexVector]] = None,
                            tol: float = DEFAULT_CONVERGENCE_TOLERANCE,
                            budget: int = DEFAULT_ITERATION_BUDGET,
                            tie_tol: float = DEFAULT_TIE_TOLERANCE) -> dict:
    """
    对多个种子（默认：j+k 层的全部极点加均匀分布）计算顶点分布并比较

    Returns:
        dict: {beta, level, distributions, residuals, agreement, agree, seeds, note}
    """
    top = base_level + depth
    vertices = spec.vertices(top)
    if seeds is None:
        seeds = [SimplexVector.point(top, vertices, v) for v in vertices] + [SimplexVector.uniform(top, vertices)]
    # 逐种子容差取 tol 的十分之一，种子间距离按 tol 比较
    seed_tol = tol * SEED_TOLERANCE_FACTOR
    results = [kms_vertex_distribution(spec, beta, base_level, depth, s, seed_tol, budget, tie_tol=tie_tol)
               for s in seeds]
    agreement = max((l1_distance(a.values, b.values) for a in results for b in results), default=0.0)
    return {
        'beta': float(beta),
        'level': base_level,
        'distributions': [r.to_dict() for r in results],
        'residuals': [r.residual for r in results],
        'converged': all(r.converged for r in results),
        'agreement': agreement,
        'agree': agreement <= tol,
        'seeds': len(results),
        'note': UNIQUENESS_NOTE,
    }


def limit_family(system: Matrices, top: int, end_vector: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """
    由 ψ^top 向上回推 ψ^{m−1} = A^(m) ψ^m，并归一化使 ψ⁰ = 1（逐步缩放避免溢出）

    Args:
        system: 第 g 个元素为第 g+1 个间隙的矩阵（行 Br_g，列 Br_{g+1}）
        top: 起始层
        end_vector: ψ^top 的方向（默认全 1）

    Returns:
        List[np.ndarray]: ψ^0, …, ψ^top
    """
    matrices = _arrays(system)
    if top > len(matrices):
        raise DimensionMismatchError(f"system has {len(matrices)} gaps, need {top}")
    size = matrices[top - 1].shape[1] if top else 1
    vector = np.ones(size) if end_vector is None else np.asarray(end_vector, dtype=float)
    total = vector.sum()
    directions = [vector / total]
    log_scales = [0.0]
    for gap in range(top, 0, -1):
        image = matrices[gap - 1] @ directions[-1]
        total = image.sum()
        if total <= 0:
            raise DimensionMismatchError(f"gap {gap} maps the vector to zero")
        directions.append(image / total)
        log_scales.append(log_scales[-1] + math.log(total))
    directions.reverse()
    log_scales.reverse()
    psi0_log = log_scales[0] + math.log(directions[0][0])
    return [d * math.exp(s - psi0_log) for d, s in zip(directions, log_scales)]


def system_limit_vector(system: Matrices, base_level: int, depth: int,
                        end_vector: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """ψ^base 的深度 depth 近似与相对残差（与深度 depth−1 比较）"""
    value = limit_family(system, base_level + depth, end_vector)[base_level]
    residual = math.inf
    if depth >= 2:
        shorter = limit_family(system, base_level + depth - 1)[base_level]
        residual = l1_distance(value, shorter) / max(np.abs(value).sum(), 1e-300)
    return value, residual


def gauge_limit_vector(spec: DiagramSpec, beta: float, base_level: int, depth: int,
                       tol: float = DEFAULT_CONVERGENCE_TOLERANCE) -> InverseLimitApproximant:
    """规范矩阵系统的 ψ 向量（ψ⁰ = 1）在 base_level 层的近似"""
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    spec.require_depth(base_level + depth)
    system = [gauge_matrix(spec, g, beta) for g in range(1, base_level + depth + 1)]
    value, residual = system_limit_vector(system, base_level, depth)
    return InverseLimitApproximant(GAUGE_SYSTEM, float(beta), base_level, depth, spec.vertices(base_level),
                                   value, residual, residual < tol)


def distribution_from_gauge(spec: DiagramSpec, beta: float, level: int, psi: np.ndarray,
                            tie_tol: float = DEFAULT_TIE_TOLERANCE) -> SimplexVector:
    """t_v = Z_j(v)·ψ_v"""
    stats = compute_level_stats(spec, level, [beta], tie_tol)
    z = np.exp(stats[level].log_z_vector(beta))
    return SimplexVector(level, spec.vertices(level), z * np.asarray(psi, dtype=float))


def gauge_from_distribution(spec: DiagramSpec, beta: float, dist: SimplexVector,
                            tie_tol: float = DEFAULT_TIE_TOLERANCE) -> np.ndarray:
    """ψ_v = t_v / Z_j(v)"""
    stats = compute_level_stats(spec, dist.level, [beta], tie_tol)
    return dist.values * np.exp(-stats[dist.level].log_z_vector(beta))


def perron_check(spec: DiagramSpec, beta: float) -> dict:
    """
    平稳重复块的规范矩阵的 Perron 数据

    Returns:
        dict: {beta, eigenvalue, ratio (|λ₂/λ₁|), perron_vector (和为 1)}

    Raises:
        CertificationError: 图表没有平稳重复块
    """
    if not spec.is_periodic or not spec.repeat.stationary:
        raise CertificationError("Perron check needs a stationary repeating block", spec.presentation)
    block = gauge_matrix(spec, spec.prefix_depth + 1, beta).matrix
    eigenvalues, vectors = eig(block)
    order = np.argsort(-np.abs(eigenvalues))
    leading = eigenvalues[order[0]]
    vector = np.abs(np.real(vectors[:, order[0]]))
    ratio = float(abs(eigenvalues[order[1]]) / abs(leading)) if len(order) > 1 else 0.0
    return {
        'beta': float(beta),
        'vertices': list(spec.repeat.vertices),
        'eigenvalue': float(np.real(leading)),
        'ratio': ratio,
        'perron_vector': (vector / vector.sum()).tolist(),
    }


def _transport_one(spec: DiagramSpec, beta: float, target: np.ndarray, depth: int, report_levels: int,
                   tie_tol: float) -> dict:
    collapse_allowed = spec.is_periodic and spec.repeat.stationary
    stream = iter_level_stats(spec, [beta], tie_tol)
    prev = next(stream)
    explicit_s: List[np.ndarray] = []
    explicit_l: List[np.ndarray] = []
    gap_distances: List[float] = []
    tail_total = 0.0
    tail_s: Optional[np.ndarray] = None
    tail_l: Optional[np.ndarray] = None
    last: Optional[Tuple[np.ndarray, np.ndarray]] = None
    collapsed_from = None

    for cur in stream:
        gap = cur.level
        m = stochastic_from_stats(spec, prev, cur, beta).matrix
        lim = limit_from_stats(prev, cur).matrix
        prev = cur
        distance = l1_operator_norm(m - lim)
        if gap <= report_levels:
            explicit_s.append(m)
            explicit_l.append(lim)
        elif (collapse_allowed and last is not None and gap > spec.prefix_depth + 1 and gap < depth
              and last[0].shape == m.shape
              and np.abs(m - last[0]).max() <= CONSTANT_MATRIX_TOLERANCE
              and np.abs(lim - last[1]).max() <= CONSTANT_MATRIX_TOLERANCE):
            # 平稳尾部：第 gap..depth 个间隙的矩阵相同
            remaining = depth - gap + 1
            power_s, power_l = stochastic_power(m, remaining), stochastic_power(lim, remaining)
            tail_s = power_s if tail_s is None else normalize_columns(tail_s @ power_s)
            tail_l = power_l if tail_l is None else normalize_columns(tail_l @ power_l)
            tail_total = distance * remaining
            collapsed_from = gap
            break
        else:
            tail_s = m if tail_s is None else normalize_columns(tail_s @ m)
            tail_l = lim if tail_l is None else normalize_columns(tail_l @ lim)
        gap_distances.append(distance)
        last = (m, lim)
        if gap >= depth:
            break

    phi = target if tail_s is None else tail_s @ target
    psi = target if tail_l is None else tail_l @ target
    distances = [l1_distance(phi, psi)]
    for m, lim in zip(reversed(explicit_s), reversed(explicit_l)):
        phi, psi = m @ phi, lim @ psi
        distances.append(l1_distance(phi, psi))
    distances.reverse()
    # 折叠的尾部各间隙距离相同，按 距离×个数 计入界
    suffix = (np.cumsum(gap_distances[::-1])[::-1] + tail_total).tolist() + [tail_total]
    bounds = suffix[:len(distances)]
    return {
        'beta': float(beta),
        'distances': distances,
        'bounds': bounds,
        'max_distance': max(distances[1:], default=0.0),
        'collapsed_from': collapsed_from,
        'approximant': phi.tolist(),
    }


def beta_infinity_transport(spec: DiagramSpec, target: SimplexVector, betas: Sequence[float], depth: int,
                            report_levels: int = 5, tie_tol: float = DEFAULT_TIE_TOLERANCE,
                            max_workers: int = 1) -> dict:
    """
    φ^β(k)_j = underline Br(β)^(j+1)···underline Br(β)^(k) ψ_k 与极限流族 ψ_j 的 ℓ¹ 距离

    平稳重复块的尾部矩阵相同时以重复平方计算高次幂，因此 depth 可以极大。

    Args:
        spec: 图表
        target: depth 层上的分布 ψ_k，极限流族 ψ_j 由它生成
        betas: β 网格
        depth: 凝聚近似的深度 k
        report_levels: 报告的层数 R（j = 0..R）
        tie_tol: 紧箭头判定容差
        max_workers: 并行线程数

    Returns:
        dict: {depth, report_levels, target, reports: [{beta, distances, bounds, max_distance, ...}]}
    """
    spec.require_depth(depth)
    if target.vertices != spec.vertices(depth):
        raise DimensionMismatchError(f"target must live on the vertex set of level {depth}")
    levels = min(report_levels, depth)
    grid = [float(b) for b in betas]

    def run(beta):
        return _transport_one(spec, beta, target.values, depth, levels, tie_tol)

    if max_workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            reports = list(executor.map(run, grid))
    else:
        reports = [run(b) for b in grid]
    for report in reports:
        logger.info(f"β={report['beta']}: 与极限流族的最大 ℓ¹ 距离 {report['max_distance']:.6g}")
    return {'depth': depth, 'report_levels': levels, 'target': target.as_dict(), 'reports': reports}


def _log_row_products(matrices: List[np.ndarray], top: int) -> List[np.ndarray]:
    """log (A^(1)···A^(g))_{v0,·}，g = 0..top"""
    row = np.ones(1)
    log_scale = 0.0
    result = [np.zeros(1)]
    for g in range(1, top + 1):
        row = row @ matrices[g - 1]
        total = row.sum()
        row = row / total
        log_scale += math.log(total)
        with np.errstate(divide='ignore'):
            result.append(np.log(row) + log_scale)
    return result


def perturbation_epsilons(system: Matrices, gaps: int, slack: float = 0.5) -> List[float]:
    """满足增长条件的 ε_j（取上界乘以 slack，并限制在 ]0, 1/2[ 内）"""
    matrices = _arrays(system)
    rows = _log_row_products(matrices, gaps)
    log_norms = 0.0
    epsilons = []
    for g in range(1, gaps + 1):
        log_norms += math.log(2 * spectral_norm(matrices[g - 1]) + 1)
        log_bound = (-g * math.log(4) - 0.5 * math.log(matrices[g - 1].shape[1])
                     + rows[g].min() - log_norms)
        epsilons.append(min(slack * math.exp(log_bound), 0.49))
    return epsilons


def verify_perturbation_hypothesis(system_a: Matrices, epsilons: Sequence[float], system_b: Matrices,
                                   window: Optional[Tuple[int, int]] = None, rel_slack: float = 1e-12) -> dict:
    """
    逐间隙检验增长条件与接近条件 |A − B| ≤ ε A

    Args:
        system_a: 系统 A（第 g 个元素为第 g+1 个间隙）
        epsilons: ε_1, ε_2, …
        system_b: 系统 B
        window: 检查的间隙区间 (first, last)，默认全部
        rel_slack: 接近条件的浮点相对余量

    Returns:
        dict: {accepted, first_failure: {gap, condition} | None, rows}
    """
    a, b = _arrays(system_a), _arrays(system_b)
    if len(a) != len(b) or any(x.shape != y.shape for x, y in zip(a, b)):
        raise DimensionMismatchError("the two systems have different shapes")
    first, last = window or (1, len(a))
    last = min(last, len(a), len(epsilons))
    rows_log = _log_row_products(a, last)
    log_norms = 0.0
    rows = []
    failure = None
    for g in range(1, last + 1):
        log_norms += math.log(2 * spectral_norm(a[g - 1]) + 1)
        if g < first:
            continue
        eps = float(epsilons[g - 1])
        log_lhs = (math.log(eps) + 0.5 * math.log(a[g - 1].shape[1]) - rows_log[g].min() + log_norms
                   if eps > 0 else -math.inf)
        growth = 0 < eps < 0.5 and log_lhs <= -g * math.log(4) + 1e-12
        excess = np.abs(a[g - 1] - b[g - 1]) - eps * a[g - 1]
        closeness = bool((excess <= rel_slack * np.abs(a[g - 1]) + 1e-300).all())
        rows.append({'gap': g, 'epsilon': eps, 'growth_condition': growth,
                     'growth_log_margin': -g * math.log(4) - log_lhs,
                     'closeness_condition': closeness, 'closeness_excess': float(excess.max())})
        if failure is None and not growth:
            failure = {'gap': g, 'condition': 'growth_condition'}
        if failure is None and not closeness:
            failure = {'gap': g, 'condition': 'closeness_condition'}
    accepted = failure is None
    if not accepted:
        logger.info(f"扰动假设在第 {failure['gap']} 个间隙不成立（{failure['condition']}）")
    return {'accepted': accepted, 'first_failure': failure, 'rows': rows, 'window': [first, last]}


def transport_constant(system_a: Matrices, system_b: Matrices, n: int) -> float:
    """K_N = 2^{−N}·max_w (A^(1)···A^(N))_{v0,w} / (B^(1)···B^(N))_{v0,w}"""
    a_rows = _log_row_products(_arrays(system_a), n)[n]
    b_rows = _log_row_products(_arrays(system_b), n)[n]
    return math.exp(float((a_rows - b_rows).max()) - n * math.log(2))


def perturbation_transport(system_a: Matrices, system_b: Matrices, phi: Sequence[np.ndarray],
                           base_level: int, depth: int, hypothesis: Optional[dict] = None,
                           n: int = 1) -> dict:
    """
    S：lim B → lim A，ψ^{j−1} ≈ A^(j)···A^(j+k) φ^{j+k}，附几何尾界 K_N φ⁰ 2^{−(j+k)}

    Args:
        system_a: 系统 A
        system_b: 系统 B
        phi: lim B 中的族 φ^0, φ^1, …（至少到 j+k 层）
        base_level: j（≥ 1，输出在 j−1 层）
        depth: k
        hypothesis: verify_perturbation_hypothesis 的报告，未通过时附加警告标志
        n: K_N 中的 N

    Returns:
        dict: {level, value, bound, K_N, warning}
    """
    a, b = _arrays(system_a), _arrays(system_b)
    if len(a) != len(b) or any(x.shape != y.shape for x, y in zip(a, b)):
        raise DimensionMismatchError("the two systems have different shapes")
    top = base_level + depth
    if base_level < 1 or top > len(a) or top >= len(phi):
        raise DimensionMismatchError(f"need gaps up to {top} and a family up to level {top}")
    value = np.asarray(phi[top], dtype=float)
    for g in range(top, base_level - 1, -1):
        value = a[g - 1] @ value
    k_n = transport_constant(a, b, n)
    phi0 = float(np.asarray(phi[0]).reshape(-1)[0])
    warning = None
    if hypothesis is not None and not hypothesis.get('accepted', False):
        warning = 'perturbation hypothesis not accepted; the bound is not guaranteed'
        logger.warning(warning)
    return {'level': base_level - 1, 'value': value, 'bound': k_n * phi0 * 2.0 ** -top,
            'K_N': k_n, 'warning': warning}


def round_trip_defect(system_a: Matrices, system_b: Matrices, psi: Sequence[np.ndarray],
                      base_level: int, depth: int) -> dict:
    """
    ‖A^(j)···A^(j+k)(Tψ)^{j+k} − ψ^{j−1}‖（欧氏范数），(Tψ)^{j+k} 用族中可用的最深层近似

    Returns:
        dict: {defect, bound (4^{−j−k+1}·ψ⁰), passed}
    """
    a, b = _arrays(system_a), _arrays(system_b)
    top = len(psi) - 1
    middle = base_level + depth
    if base_level < 1 or middle >= top or top > len(b):
        raise DimensionMismatchError(f"family must extend beyond level {middle}")
    transported = np.asarray(psi[top], dtype=float)
    for g in range(top, middle, -1):
        transported = b[g - 1] @ transported
    value = transported
    for g in range(middle, base_level - 1, -1):
        value = a[g - 1] @ value
    defect = float(np.linalg.norm(value - np.asarray(psi[base_level - 1], dtype=float)))
    psi0 = float(np.asarray(psi[0]).reshape(-1)[0])
    bound = 4.0 ** (-base_level - depth + 1) * psi0
    return {'defect': defect, 'bound': bound, 'passed': defect <= bound}


def scale_system(system: Matrices, multipliers: Sequence[float]) -> List[np.ndarray]:
    """B^(j) = m_j A^(j)"""
    matrices = _arrays(system)
    if len(multipliers) < len(matrices) or any(m <= 0 for m in multipliers[:len(matrices)]):
        raise ValueError("one positive multiplier per gap is required")
    return [m * a for m, a in zip(multipliers, matrices)]


def rescale_family(family: Sequence[np.ndarray], multipliers: Sequence[float]) -> List[np.ndarray]:
    """lim A → lim (m_j A^(j))：第 j 层除以 m_1···m_j"""
    result, scale = [], 1.0
    for level, vector in enumerate(family):
        if level:
            scale *= multipliers[level - 1]
        result.append(np.asarray(vector, dtype=float) / scale)
    return result


def normalized_system(system: Matrices) -> List[np.ndarray]:
    """左随机归一化 S^(j)_{v,w} = z_{j−1}(v) A_{v,w} / z_j(w)，z_j 为 v0 出发的行乘积"""
    matrices = _arrays(system)
    rows = _log_row_products(matrices, len(matrices))
    result = []
    for g, a in enumerate(matrices, start=1):
        with np.errstate(over='ignore', invalid='ignore'):
            entries = np.exp(rows[g - 1][:, None] - rows[g][None, :]) * a
        result.append(normalize_columns(np.nan_to_num(entries)))
    return result


def distribution_rows(approximants: Sequence[InverseLimitApproximant]) -> List[Tuple[float, int, str, float, float]]:
    """CSV 行 (beta, level, vertex, value, residual)"""
    return [
        (a.beta, a.base_level, v, float(x), a.residual)
        for a in approximants for v, x in zip(a.vertices, a.values)
    ]
