"""
矩阵工具模块
提供 ℓ¹ / 欧氏算子范数、列归一化与稠密矩阵文本输出
"""

from typing import Optional, Sequence

import numpy as np

from utils.logger import get_logger

logger = get_logger(__name__)


def l1_operator_norm(matrix: np.ndarray) -> float:
    """
    ℓ¹ 诱导算子范数（最大列绝对值和）

    Args:
        matrix: 实矩阵

    Returns:
        float: 范数
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.abs(matrix).sum(axis=0).max())


def spectral_norm(matrix: np.ndarray) -> float:
    """
    欧氏算子范数（最大奇异值）

    Args:
        matrix: 实矩阵

    Returns:
        float: ‖matrix‖₂，空矩阵为 0
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def normalize_columns(matrix: np.ndarray) -> np.ndarray:
    """把非零列归一为列和 1"""
    matrix = np.array(matrix, dtype=float)
    sums = matrix.sum(axis=0)
    nonzero = sums != 0
    matrix[:, nonzero] /= sums[nonzero]
    return matrix


def stochastic_power(matrix: np.ndarray, exponent: int) -> np.ndarray:
    """
    左随机矩阵的幂，numpy.linalg.matrix_power 后重新归一化一次列

    Args:
        matrix: 列和为 1 的方阵
        exponent: 非负整数指数

    Returns:
        np.ndarray: matrix ** exponent
    """
    return normalize_columns(np.linalg.matrix_power(np.asarray(matrix, dtype=float), int(exponent)))


def l1_distance(x: np.ndarray, y: np.ndarray) -> float:
    """向量 ℓ¹ 距离"""
    return float(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)).sum())


def dump_matrix(matrix: np.ndarray, row_names: Sequence[str], col_names: Sequence[str],
                precision: int = 17, title: Optional[str] = None) -> str:
    """
    稠密矩阵文本输出，首行/首列为顶点名

    Args:
        matrix: 矩阵
        row_names: 行顶点名
        col_names: 列顶点名
        precision: 有效数字位数
        title: 可选标题行

    Returns:
        str: 制表符分隔的文本
    """
    lines = []
    if title:
        lines.append(f"# {title}")
    lines.append("\t".join([""] + [str(c) for c in col_names]))
    for name, row in zip(row_names, np.asarray(matrix)):
        cells = []
        for value in row:
            if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
                cells.append(str(int(value)))
            else:
                cells.append(f"{float(value):.{precision}g}")
        lines.append("\t".join([str(name)] + cells))
    return "\n".join(lines) + "\n"
