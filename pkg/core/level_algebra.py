"""
有限层代数模块
AF_n(Br) = ⊕_v M_{#P_n^v} 的显式块表示：矩阵单元、哈密顿量、生成元 δ_F、Gibbs 态、
条件期望 R、压缩 Q_F、KMS / 基态检验与局部 KMS_∞ 态
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import nnls
from scipy.special import logsumexp

from core.diagram_model import DiagramSpec, FinitePath, enumerate_paths
from core.exceptions import DimensionMismatchError, NonTracialError, StateValidationError
from core.geodesic_analysis import AlgebraProfile, TightSubdiagram, ground_state_algebra_profile
from core.kms_inverse_limit import SimplexVector
from core.path_statistics import DEFAULT_TIE_TOLERANCE, compute_level_stats, limit_from_stats
from utils.common_utils import Number, format_number, potentials_equal
from utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_PATH_CAP = 4096
DEFAULT_PSD_TOLERANCE = 1e-10
DEFAULT_TRACE_TOLERANCE = 1e-12
DEFAULT_KMS_TOLERANCE = 1e-12
DEFAULT_GROUND_TOLERANCE = 1e-10
DEFAULT_SEED = 20200910

PathKey = Tuple[Tuple[Tuple[int, str, str, int], ...], Tuple[int, ...]]
Weights = Union[SimplexVector, Mapping[str, float]]


def path_key(path: FinitePath) -> PathKey:
    return tuple(a.key for a in path.arrows), tuple(path.copies)


@dataclass(frozen=True, eq=False)
class BlockElement:
    """AF_n 中的元素：每个顶点一个复矩阵块"""

    level: int
    blocks: Dict[str, np.ndarray]

    def _check(self, other: 'BlockElement'):
        if self.level != other.level or set(self.blocks) != set(other.blocks):
            raise DimensionMismatchError(
                f"elements live in different algebras (levels {self.level} and {other.level})")
        for v, block in self.blocks.items():
            if block.shape != other.blocks[v].shape:
                raise DimensionMismatchError(f"block {v!r} has shapes {block.shape} and {other.blocks[v].shape}")

    def _combine(self, other: 'BlockElement', op) -> 'BlockElement':
        self._check(other)
        return BlockElement(self.level, {v: op(b, other.blocks[v]) for v, b in self.blocks.items()})

    def __add__(self, other: 'BlockElement') -> 'BlockElement':
        return self._combine(other, np.add)

    def __sub__(self, other: 'BlockElement') -> 'BlockElement':
        return self._combine(other, np.subtract)

    def __matmul__(self, other: 'BlockElement') -> 'BlockElement':
        return self._combine(other, np.matmul)

    def scale(self, factor: complex) -> 'BlockElement':
        return BlockElement(self.level, {v: factor * b for v, b in self.blocks.items()})

    def __rmul__(self, factor: complex) -> 'BlockElement':
        return self.scale(factor)

    def adjoint(self) -> 'BlockElement':
        return BlockElement(self.level, {v: b.conj().T for v, b in self.blocks.items()})

    def norm(self) -> float:
        """C*-范数：各块算子范数的最大值"""
        return max((float(np.linalg.norm(b, 2)) for b in self.blocks.values() if b.size), default=0.0)

    def max_abs(self) -> float:
        return max((float(np.abs(b).max()) for b in self.blocks.values() if b.size), default=0.0)


@dataclass(frozen=True, eq=False)
class BlockState:
    """以块密度矩阵表示的态：ω(x) = Σ_v tr(ρ_v x_v)"""

    level: int
    blocks: Dict[str, np.ndarray]
    notes: Tuple[str, ...] = ()

    def evaluate(self, element: BlockElement) -> complex:
        if element.level != self.level or set(element.blocks) != set(self.blocks):
            raise DimensionMismatchError("state and element live in different algebras")
        return complex(sum(np.trace(rho @ element.blocks[v]) for v, rho in self.blocks.items()))

    def vertex_weights(self) -> Dict[str, float]:
        """ω(p^v_n)"""
        return {v: float(np.trace(rho).real) for v, rho in self.blocks.items()}

    def diagonal(self, vertex: str) -> np.ndarray:
        return np.real(np.diag(self.blocks[vertex]))


@dataclass(frozen=True, eq=False)
class LevelAlgebra:
    """第 n 层有限维代数：按顶点分块的显式路径基"""

    spec: DiagramSpec
    level: int
    vertices: Tuple[str, ...]
    paths: Dict[str, Tuple[FinitePath, ...]]
    potentials: Dict[str, np.ndarray]
    exact_potentials: Dict[str, Tuple[Number, ...]]
    _index: Dict[PathKey, Tuple[str, int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        index = {path_key(p): (v, i) for v, block in self.paths.items() for i, p in enumerate(block)}
        object.__setattr__(self, '_index', index)

    def block_size(self, vertex: str) -> int:
        return len(self.paths[vertex])

    def dimensions(self) -> Dict[str, int]:
        return {v: len(self.paths[v]) for v in self.vertices}

    @property
    def total_paths(self) -> int:
        return sum(self.dimensions().values())

    def locate(self, path: FinitePath) -> Tuple[str, int]:
        try:
            return self._index[path_key(path)]
        except KeyError as e:
            raise DimensionMismatchError(f"path {path.label()} is not a basis path of level {self.level}") from e

    def zero(self) -> BlockElement:
        return BlockElement(self.level, {v: np.zeros((len(p), len(p)), dtype=complex) for v, p in self.paths.items()})

    def identity(self) -> BlockElement:
        return BlockElement(self.level, {v: np.eye(len(p), dtype=complex) for v, p in self.paths.items()})

    def matrix_unit(self, mu: FinitePath, nu: FinitePath) -> BlockElement:
        """E_{μ,ν}，要求 r(μ) = r(ν)"""
        v, i = self.locate(mu)
        w, k = self.locate(nu)
        if v != w:
            raise DimensionMismatchError(f"E_(mu,nu) needs paths with the same range, got {v!r} and {w!r}")
        element = self.zero()
        element.blocks[v][i, k] = 1.0
        return element

    def hamiltonian(self) -> BlockElement:
        return BlockElement(self.level, {v: np.diag(h).astype(complex) for v, h in self.potentials.items()})

    def random_element(self, rng: np.random.Generator) -> BlockElement:
        return BlockElement(self.level, {
            v: rng.standard_normal((len(p), len(p))) + 1j * rng.standard_normal((len(p), len(p)))
            for v, p in self.paths.items()
        })

    def labels(self, vertex: str) -> List[str]:
        return [p.label() for p in self.paths[vertex]]


def build_level_algebra(spec: DiagramSpec, n: int, cap: int = DEFAULT_PATH_CAP) -> LevelAlgebra:
    """
    枚举 P_n 并按终点分块

    Raises:
        CapacityExceededError: #P_n 超过上限
    """
    paths = enumerate_paths(spec, n, cap, expand_copies=True)
    vertices = spec.vertices(n)
    grouped: Dict[str, List[FinitePath]] = {v: [] for v in vertices}
    for path in paths:
        grouped[path.range if path.arrows else spec.root].append(path)
    blocks = {v: tuple(grouped[v]) for v in vertices}
    exact = {v: tuple(p.potential for p in block) for v, block in blocks.items()}
    floats = {v: np.array([float(x) for x in values], dtype=float) for v, values in exact.items()}
    logger.debug(f"第 {n} 层代数: {len(paths)} 条路径, 块大小 {[len(b) for b in blocks.values()]}")
    return LevelAlgebra(spec, n, vertices, blocks, floats, exact)


def generator_apply(alg: LevelAlgebra, a: BlockElement) -> BlockElement:
    """δ_F(a) = i(H_n a − a H_n)"""
    if a.level != alg.level or set(a.blocks) != set(alg.vertices):
        raise DimensionMismatchError("element does not belong to this level algebra")
    return BlockElement(alg.level, {
        v: 1j * (alg.potentials[v][:, None] * b - b * alg.potentials[v][None, :])
        for v, b in a.blocks.items()
    })


def _weights_dict(weights: Weights, vertices: Sequence[str], tol: float = DEFAULT_TRACE_TOLERANCE) -> Dict[str, float]:
    values = weights.as_dict() if isinstance(weights, SimplexVector) else dict(weights)
    unknown = set(values) - set(vertices)
    if unknown:
        raise DimensionMismatchError(f"weights name vertices outside the level: {sorted(unknown)}")
    result = {v: float(values.get(v, 0.0)) for v in vertices}
    if any(w < -tol for w in result.values()):
        raise StateValidationError("vertex weights must be non-negative")
    if abs(sum(result.values()) - 1.0) > tol * max(1, len(result)):
        raise StateValidationError(f"vertex weights sum to {sum(result.values())!r}, expected 1")
    return {v: max(w, 0.0) for v, w in result.items()}


def validate_state(alg: LevelAlgebra, state: BlockState, psd_tol: float = DEFAULT_PSD_TOLERANCE,
                   trace_tol: float = DEFAULT_TRACE_TOLERANCE):
    """
    检查块形状、自伴性、半正定性与总迹

    Raises:
        DimensionMismatchError: 块与代数不匹配
        StateValidationError: 非半正定或总迹不为 1
    """
    if state.level != alg.level or set(state.blocks) != set(alg.vertices):
        raise DimensionMismatchError(
            f"state on level {state.level} with blocks {sorted(state.blocks)} does not match level {alg.level}")
    total = 0.0
    for v, rho in state.blocks.items():
        size = alg.block_size(v)
        if rho.shape != (size, size):
            raise DimensionMismatchError(f"block {v!r} has shape {rho.shape}, expected {(size, size)}")
        if np.abs(rho - rho.conj().T).max(initial=0.0) > psd_tol:
            raise StateValidationError(f"block {v!r} is not self-adjoint")
        if size and np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -psd_tol:
            raise StateValidationError(f"block {v!r} is not positive semidefinite")
        total += float(np.trace(rho).real)
    if abs(total - 1.0) > trace_tol:
        raise StateValidationError(f"total trace {total!r} differs from 1")


def gibbs_state(alg: LevelAlgebra, beta: float, vertex_weights: Weights) -> BlockState:
    """ρ_v = weight(v)·e^{−βH}/Tr_v(e^{−βH})，对数域归一化"""
    weights = _weights_dict(vertex_weights, alg.vertices)
    blocks = {}
    for v in alg.vertices:
        exponent = -float(beta) * alg.potentials[v]
        probabilities = np.exp(exponent - logsumexp(exponent))
        blocks[v] = np.diag(weights[v] * probabilities).astype(complex)
    return BlockState(alg.level, blocks)


def random_state(alg: LevelAlgebra, rng: np.random.Generator) -> BlockState:
    """随机（一般非迹）态，用于检验"""
    blocks = {}
    for v in alg.vertices:
        size = alg.block_size(v)
        g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        blocks[v] = g @ g.conj().T
    total = sum(float(np.trace(b).real) for b in blocks.values())
    return BlockState(alg.level, {v: b / total for v, b in blocks.items()})


def path_state(alg: LevelAlgebra, path: FinitePath) -> BlockState:
    """集中在一条路径上的纯态 ω = ⟨·e_μ, e_μ⟩"""
    v, i = alg.locate(path)
    blocks = {w: np.zeros((alg.block_size(w), alg.block_size(w)), dtype=complex) for w in alg.vertices}
    blocks[v][i, i] = 1.0
    return BlockState(alg.level, blocks)


def check_kms(alg: LevelAlgebra, state: BlockState, beta: float,
              tol: float = DEFAULT_KMS_TOLERANCE) -> dict:
    """
    对所有矩阵单元对检验 ω(E_{μ,μ'}E_{ν,ν'}) = e^{−β(F(μ)−F(μ'))} ω(E_{ν,ν'}E_{μ,μ'})

    两侧只在 μ'=ν 或 ν'=μ 时非零，按这三种情形逐块计算最大偏差。

    Returns:
        dict: {check, beta, passed, max_violation, witness, tolerances}
    """
    beta = float(beta)
    worst, witness = 0.0, None

    def consider(value, v, quadruple):
        nonlocal worst, witness
        if value > worst:
            worst = float(value)
            labels = alg.labels(v)
            witness = {'vertex': v, 'mu': labels[quadruple[0]], 'mu_prime': labels[quadruple[1]],
                       'nu': labels[quadruple[2]], 'nu_prime': labels[quadruple[3]]}

    with np.errstate(over='ignore', invalid='ignore'):
        for v, rho in state.blocks.items():
            size = rho.shape[0]
            if not size:
                continue
            h = alg.potentials[v]
            # factor[μ, μ'] = e^{−β(F(μ)−F(μ'))}
            factor = np.exp(-beta * (h[:, None] - h[None, :]))
            diag = np.real(np.diag(rho))

            # μ'=ν 且 ν'=μ：ρ[μ,μ] − factor·ρ[μ',μ']
            gap = np.nan_to_num(np.abs(diag[:, None] - factor * diag[None, :]), nan=0.0)
            i, k = np.unravel_index(np.argmax(gap), gap.shape)
            consider(gap[i, k], v, (i, k, k, i))

            off = np.abs(rho).copy()
            np.fill_diagonal(off, 0.0)
            if off.max() > 0:
                # μ'=ν, ν'≠μ：左侧为 ρ[ν',μ]
                nu_p, mu = np.unravel_index(np.argmax(off), off.shape)
                consider(off[nu_p, mu], v, (mu, 0, 0, nu_p))
                # ν'=μ, μ'≠ν：右侧为 factor[μ,μ']·ρ[μ',ν]
                scaled = np.nan_to_num(factor.max(axis=0)[:, None] * off, nan=0.0)
                mu_p, nu = np.unravel_index(np.argmax(scaled), scaled.shape)
                mu_best = int(np.argmax(factor[:, mu_p]))
                consider(scaled[mu_p, nu], v, (mu_best, mu_p, nu, mu_best))

    passed = worst <= tol
    if not passed:
        logger.debug(f"KMS 检验失败 β={beta}: 最大偏差 {worst:.3e}")
    return {'check': 'kms', 'beta': beta, 'passed': passed, 'max_violation': worst,
            'witness': witness, 'tolerances': {'kms': tol}}


def ground_value(alg: LevelAlgebra, state: BlockState, a: BlockElement) -> float:
    """−i ω(a*δ_F(a))（对任意 a 为实数）"""
    return float((-1j * state.evaluate(a.adjoint() @ generator_apply(alg, a))).real)


def ground_witness(alg: LevelAlgebra, state: BlockState, tol: float = DEFAULT_GROUND_TOLERANCE) -> Optional[dict]:
    """
    按基态判据的证明构造反例：若 ω 在势能严格大于块内最小值的路径 ν' 上有质量，
    取块内势能最小的 μ，则 −iω(E*δ(E)) = ω(E_{ν',ν'})(F(μ)−F(ν')) < 0，E = E_{μ,ν'}
    """
    best = None
    for v, rho in state.blocks.items():
        if not rho.shape[0]:
            continue
        h = alg.potentials[v]
        mu = int(np.argmin(h))
        values = np.real(np.diag(rho)) * (h[mu] - h)
        nu_p = int(np.argmin(values))
        if values[nu_p] < -tol and (best is None or values[nu_p] < best['value']):
            labels = alg.labels(v)
            best = {'vertex': v, 'mu': labels[mu], 'nu_prime': labels[nu_p], 'value': float(values[nu_p])}
    return best


def check_ground(alg: LevelAlgebra, state: BlockState, trials: int = 64,
                 tol: float = DEFAULT_GROUND_TOLERANCE, seed: int = DEFAULT_SEED) -> dict:
    """
    在全部矩阵单元与 trials 个随机元素上计算 −iω(a*δ_F(a)) 的最小值

    Returns:
        dict: {check, passed, min_value, witness, seed, trials, tolerances}
    """
    minimum, witness = np.inf, None
    for v, rho in state.blocks.items():
        if not rho.shape[0]:
            continue
        h = alg.potentials[v]
        # a = E_{μ,ν}: (F(μ) − F(ν))·ρ[ν,ν]
        values = (h[:, None] - h[None, :]) * np.real(np.diag(rho))[None, :]
        mu, nu = np.unravel_index(np.argmin(values), values.shape)
        if values[mu, nu] < minimum:
            labels = alg.labels(v)
            minimum = float(values[mu, nu])
            witness = {'kind': 'matrix_unit', 'vertex': v, 'mu': labels[mu], 'nu': labels[nu]}

    rng = np.random.default_rng(seed)
    for trial in range(trials):
        a = alg.random_element(rng)
        norm = a.norm()
        if norm == 0.0:
            continue
        value = ground_value(alg, state, a.scale(1.0 / norm))
        if value < minimum:
            minimum = value
            witness = {'kind': 'random', 'trial': trial}

    if minimum == np.inf:
        minimum = 0.0
    passed = minimum >= -tol
    return {'check': 'ground', 'passed': passed, 'min_value': float(minimum), 'witness': witness,
            'seed': seed, 'trials': trials, 'tolerances': {'ground': tol}}


def _energy_masks(alg: LevelAlgebra, tol: float) -> Dict[str, np.ndarray]:
    masks = {}
    for v, values in alg.exact_potentials.items():
        size = len(values)
        masks[v] = np.array([[potentials_equal(values[i], values[k], tol) for k in range(size)]
                             for i in range(size)], dtype=bool).reshape(size, size)
    return masks


def conditional_expectation(alg: LevelAlgebra, a: BlockElement,
                            tol: float = DEFAULT_TIE_TOLERANCE) -> BlockElement:
    """R：保留 F(μ) = F(μ') 的分量 E_{μ,μ'}，其余置零"""
    masks = _energy_masks(alg, tol)
    return BlockElement(a.level, {v: np.where(masks[v], b, 0.0) for v, b in a.blocks.items()})


class GeodesicCompression:
    """
    AF_n(Br) → AF_n(Br⁺) 的压缩 Q_F = q_F∘R

    记录每个 Br⁺ 块在原代数中的测地路径下标（按 Br⁺ 代数的路径顺序）。
    """

    def __init__(self, alg: LevelAlgebra, sub: TightSubdiagram, tol: float = DEFAULT_TIE_TOLERANCE,
                 profile: Optional[AlgebraProfile] = None):
        sub.require_level(alg.level)
        if sub.spec.fingerprint != alg.spec.fingerprint:
            raise DimensionMismatchError("subdiagram and algebra come from different diagrams")
        self.alg = alg
        self.sub = sub
        self.tol = tol
        if profile is None or profile.depth < alg.level:
            profile = ground_state_algebra_profile(sub, alg.level)
        self.profile = profile
        self.plus_alg = build_level_algebra(self.profile.spec, alg.level, cap=max(alg.total_paths, 1))

        arrow_map = self.profile.arrow_map
        self.indices: Dict[str, np.ndarray] = {}
        for v in self.plus_alg.vertices:
            positions = {path_key(p): i for i, p in enumerate(self.plus_alg.paths[v])}
            chosen = np.zeros(len(positions), dtype=int)
            for i, path in enumerate(alg.paths[v]):
                if not all(sub.contains_arrow(a) for a in path.arrows):
                    continue
                image = (tuple(arrow_map[a.key].key for a in path.arrows), tuple(path.copies))
                chosen[positions[image]] = i
            self.indices[v] = chosen
        logger.debug(f"Q_F 第 {alg.level} 层: Br⁺ 块大小 {self.plus_alg.dimensions()}")

    def is_geodesic(self, path: FinitePath) -> bool:
        return all(self.sub.contains_arrow(a) for a in path.arrows)

    def compress(self, a: BlockElement) -> BlockElement:
        reduced = conditional_expectation(self.alg, a, self.tol)
        return BlockElement(self.alg.level, {
            v: reduced.blocks[v][np.ix_(idx, idx)] for v, idx in self.indices.items()
        })

    def projection_value(self, state: BlockState) -> float:
        """ω(Q_n)，Q_n 为测地路径投影之和"""
        return float(sum(np.real(np.diag(state.blocks[v]))[idx].sum() for v, idx in self.indices.items()))

    def pull_back(self, trace_blocks: Dict[str, np.ndarray]) -> BlockState:
        """把 AF_n(Br⁺) 上的密度块经 Q_F 拉回为 AF_n(Br) 上的态"""
        blocks = {v: np.zeros((self.alg.block_size(v),) * 2, dtype=complex) for v in self.alg.vertices}
        for v, idx in self.indices.items():
            blocks[v][np.ix_(idx, idx)] = trace_blocks[v]
        return BlockState(self.alg.level, blocks)


def q_f_compress(alg: LevelAlgebra, sub: TightSubdiagram, a: BlockElement,
                 tol: float = DEFAULT_TIE_TOLERANCE) -> BlockElement:
    """Q_F(a) = Q_n R(a) Q_n，按 G_n 路径基重新编号"""
    return GeodesicCompression(alg, sub, tol).compress(a)


def positivity_decomposition(compression: GeodesicCompression, a: BlockElement) -> BlockElement:
    """
    Σ_μ b_μ* b_μ，其中 b_μ 为 a 的第 μ 行限制到测地列并乘以 sqrt(F(μ) − m_v)
    """
    alg = compression.alg
    result = {}
    for v, idx in compression.indices.items():
        block = a.blocks[v]
        h = alg.potentials[v]
        minimum = h[idx[0]] if len(idx) else 0.0
        rows = np.sqrt(np.clip(h - minimum, 0.0, None))[:, None] * block[:, idx]
        result[v] = rows.conj().T @ rows
    return BlockElement(a.level, result)


def positivity_defect(compression: GeodesicCompression, a: BlockElement) -> float:
    """|−iQ_F(a*δ_F(a)) − Σ b_μ*b_μ| 的最大元"""
    direct = compression.compress((a.adjoint() @ generator_apply(compression.alg, a)).scale(-1j))
    return (direct - positivity_decomposition(compression, a)).max_abs()


class Embedding:
    """ι_{n→n+1}(E_{μ,μ'}) = Σ_{a: s(a)=r(μ)} E_{μa,μ'a}（箭头束按副本展开）"""

    def __init__(self, lower: LevelAlgebra, upper: LevelAlgebra):
        if upper.level != lower.level + 1 or upper.spec.fingerprint != lower.spec.fingerprint:
            raise DimensionMismatchError(f"cannot embed level {lower.level} into level {upper.level}")
        self.lower = lower
        self.upper = upper
        groups: Dict[Tuple, Tuple[str, str, List[int], List[int]]] = {}
        for w, block in upper.paths.items():
            for position, path in enumerate(block):
                prefix = FinitePath(path.start_level, path.arrows[:-1], path.copies[:-1])
                v, i = lower.locate(prefix)
                key = (path.arrows[-1].key, path.copies[-1])
                groups.setdefault(key, (v, w, [], []))
                groups[key][2].append(i)
                groups[key][3].append(position)
        self.groups = [(v, w, np.array(pre), np.array(pos)) for v, w, pre, pos in groups.values()]

    def embed(self, a: BlockElement) -> BlockElement:
        result = self.upper.zero()
        for v, w, pre, pos in self.groups:
            result.blocks[w][np.ix_(pos, pos)] += a.blocks[v][np.ix_(pre, pre)]
        return result

    def restrict(self, state: BlockState) -> BlockState:
        """ω ↦ ω∘ι"""
        blocks = {v: np.zeros((self.lower.block_size(v),) * 2, dtype=complex) for v in self.lower.vertices}
        for v, w, pre, pos in self.groups:
            blocks[v][np.ix_(pre, pre)] += state.blocks[w][np.ix_(pos, pos)]
        return BlockState(self.lower.level, blocks)


def restrict_state(lower: LevelAlgebra, upper: LevelAlgebra, state: BlockState) -> BlockState:
    return Embedding(lower, upper).restrict(state)


def _minimal_mask(alg: LevelAlgebra, v: str, minimum: Number, tol: float) -> np.ndarray:
    return np.array([potentials_equal(x, minimum, tol) for x in alg.exact_potentials[v]], dtype=bool)


def local_kms_infinity_state(spec: DiagramSpec, sub: TightSubdiagram, n: int, vertex_weights: Weights,
                             alg: Optional[LevelAlgebra] = None, tol: float = DEFAULT_TIE_TOLERANCE,
                             flow_tol: float = 1e-9) -> BlockState:
    """
    ρ_v = weight(v)·(M_n^v 上的均匀对角)，M_n^v 为到达 v 的最小势能路径

    权重落在 Br⁺_n 之外或不在极限流的像中时记录警告，态照常构造。
    """
    alg = alg if alg is not None else build_level_algebra(spec, n)
    weights = _weights_dict(vertex_weights, alg.vertices)
    stats = compute_level_stats(spec, n + 1 if spec.max_depth is None or n < spec.max_depth else n, (), tol)
    notes: List[str] = []

    blocks = {}
    for v in alg.vertices:
        mask = _minimal_mask(alg, v, stats[n].min_potential[v], tol)
        diagonal = np.where(mask, weights[v] / mask.sum(), 0.0)
        blocks[v] = np.diag(diagonal).astype(complex)

    off_plus = []
    if n <= sub.depth:
        off_plus = [v for v in alg.vertices if weights[v] > 0 and v not in sub.levels[n]]
    if off_plus:
        notes.append(f"weight on vertices outside Br+ at level {n}: {off_plus}")
    if len(stats) > n + 1:
        limit = limit_from_stats(stats[n], stats[n + 1]).matrix
        target = np.array([weights[v] for v in alg.vertices])
        _, residual = nnls(limit, target)
        if residual > flow_tol:
            notes.append(f"weights are not in the image of the limit flow (residual {residual:.3e})")
    for note in notes:
        logger.warning(note)
    return BlockState(n, blocks, tuple(notes))


def trace_to_ground(compression: GeodesicCompression,
                    trace_weights: Mapping[str, Union[float, Sequence[float]]],
                    tol: float = DEFAULT_TRACE_TOLERANCE) -> BlockState:
    """
    τ∘Q_F：trace_weights 给出 AF_n(Br⁺) 各块的迹权重 t_v（或块对角线，须为常数）

    Raises:
        NonTracialError: 某块对角线权重不是常数
        StateValidationError: 权重为负或总和不为 1
    """
    plus = compression.plus_alg
    totals: Dict[str, float] = {}
    for v, raw in trace_weights.items():
        if v not in plus.paths:
            raise DimensionMismatchError(f"{v!r} is not a Br+ vertex at level {plus.level}")
        if np.ndim(raw) == 0:
            totals[v] = float(raw)
            continue
        diagonal = np.asarray(raw, dtype=float)
        if diagonal.shape != (plus.block_size(v),):
            raise DimensionMismatchError(f"block {v!r} needs {plus.block_size(v)} diagonal weights")
        if np.ptp(diagonal) > tol:
            raise NonTracialError(f"diagonal weights on block {v!r} are not constant")
        totals[v] = float(diagonal.sum())
    weights = _weights_dict(totals, plus.vertices, tol)
    trace_blocks = {
        v: np.eye(plus.block_size(v), dtype=complex) * (weights[v] / plus.block_size(v))
        for v in plus.vertices
    }
    return compression.pull_back(trace_blocks)


def dump_state(state: BlockState, precision: int = 17) -> str:
    """态文件 JSON {level, blocks: {v: {real, imag}}}"""
    document = {
        'level': state.level,
        'blocks': {
            v: {'real': [[format_number(x, precision) for x in row] for row in rho.real],
                'imag': [[format_number(x, precision) for x in row] for row in rho.imag]}
            for v, rho in state.blocks.items()
        },
    }
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def load_state(text: str, alg: LevelAlgebra, psd_tol: float = DEFAULT_PSD_TOLERANCE,
               trace_tol: float = DEFAULT_TRACE_TOLERANCE) -> BlockState:
    """
    读取并校验态文件

    Raises:
        StateValidationError: 格式错误、非半正定或迹不为 1
        DimensionMismatchError: 层级或块大小与代数不符
    """
    try:
        document = json.loads(text)
        level = int(document['level'])
        blocks = {
            v: np.array(entry['real'], dtype=float).reshape(-1, alg.block_size(v))
            + 1j * np.array(entry['imag'], dtype=float).reshape(-1, alg.block_size(v))
            for v, entry in document['blocks'].items()
            if v in alg.paths
        }
        extra = set(document['blocks']) - set(alg.paths)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise StateValidationError(f"invalid state file: {e}") from e
    if extra:
        raise DimensionMismatchError(f"state names vertices outside level {alg.level}: {sorted(extra)}")
    state = BlockState(level, blocks)
    validate_state(alg, state, psd_tol, trace_tol)
    return state
