"""
测试辅助模块
数据文件读取、随机图表生成与暴力路径枚举
"""

import json
import os
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.diagram_model import Arrow, DiagramSpec, build_spec, load_spec

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def load_data(name: str, exact: Optional[bool] = None) -> DiagramSpec:
    """读取 data/ 下的图表"""
    with open(data_path(name), 'r', encoding='utf-8') as f:
        return load_spec(f.read(), exact=exact)


def load_document(document: dict, exact: Optional[bool] = None) -> DiagramSpec:
    return load_spec(json.dumps(document), exact=exact)


def random_diagram(rng: np.random.Generator, depth: int, max_width: int = 3,
                   max_count: int = 2, low: int = -8, high: int = 8) -> DiagramSpec:
    """
    随机有限前缀图表

    势能取 k/4（k ∈ [low, high]），浮点求和无舍入误差，最小值的并列可以精确判定。
    每个顶点至少有一条入箭头，非顶层顶点至少有一条出箭头。
    """
    levels: List[Tuple[str, ...]] = [('v0',)]
    for j in range(1, depth + 1):
        width = int(rng.integers(1, max_width + 1))
        levels.append(tuple(f"x{j}_{i}" for i in range(width)))

    arrows = []
    for gap in range(1, depth + 1):
        sources, targets = levels[gap - 1], levels[gap]
        pairs = set()
        for target in targets:
            pairs.add((sources[int(rng.integers(len(sources)))], target))
        for source in sources:
            pairs.add((source, targets[int(rng.integers(len(targets)))]))
        for source in sources:
            for target in targets:
                if rng.random() < 0.3:
                    pairs.add((source, target))
        for source, target in sorted(pairs):
            bundles = int(rng.integers(1, 3))
            for _ in range(bundles):
                potential = float(rng.integers(low, high + 1)) / 4.0
                count = int(rng.integers(1, max_count + 1))
                arrows.append(Arrow(gap, source, target, potential, 0, count))
    return build_spec(levels, arrows)


def brute_force_paths(spec: DiagramSpec, n: int) -> List[Tuple[Tuple[str, ...], float]]:
    """
    展开重数后逐条列出长度为 n 的路径

    Returns:
        List[(顶点序列, 势能)]
    """
    paths = [((spec.root,), 0.0)]
    for gap in range(1, n + 1):
        outgoing: Dict[str, List[Arrow]] = defaultdict(list)
        for arrow in spec.gap_arrows(gap):
            outgoing[arrow.source].append(arrow)
        paths = [
            (vertices + (arrow.target,), potential + float(arrow.potential))
            for vertices, potential in paths
            for arrow in outgoing[vertices[-1]]
            for _ in range(arrow.multiplicity)
        ]
    return paths


def brute_force_partition(spec: DiagramSpec, n: int, beta: float) -> Dict[str, float]:
    """Z_n(v) = Σ_{r(μ)=v} e^{−βF(μ)}"""
    totals: Dict[str, float] = {v: 0.0 for v in spec.vertices(n)}
    for vertices, potential in brute_force_paths(spec, n):
        totals[vertices[-1]] += np.exp(-beta * potential)
    return totals


def brute_force_minima(spec: DiagramSpec, n: int) -> Dict[str, Tuple[float, int]]:
    """到达每个顶点的 (最小势能, 达到最小值的路径数)"""
    best: Dict[str, Tuple[float, int]] = {}
    for vertices, potential in brute_force_paths(spec, n):
        v = vertices[-1]
        if v not in best or potential < best[v][0]:
            best[v] = (potential, 1)
        elif potential == best[v][0]:
            best[v] = (potential, best[v][1] + 1)
    return best
