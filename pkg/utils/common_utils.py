"""
公共工具函数模块
提供势能解析、数字格式化、容差比较与指纹计算等可复用函数
"""

import hashlib
import json
import math
from fractions import Fraction
from typing import Any, Iterable, Union

import numpy as np

from utils.logger import get_logger

logger = get_logger(__name__)

Number = Union[int, float, Fraction]

TIGHT = 'tight'
SLACK = 'slack'
AMBIGUOUS = 'ambiguous'


def parse_potential(raw: Any, exact: bool) -> Number:
    """
    解析势能值

    Args:
        raw: JSON 中的数字或 "p/q" 字符串
        exact: 是否返回有理数

    Returns:
        Number: 精确模式下为 Fraction，否则为 float

    Raises:
        ValueError: 无法解析
    """
    if isinstance(raw, bool):
        raise ValueError(f"potential must be a number, got {raw!r}")
    if isinstance(raw, (int, Fraction)):
        value = Fraction(raw)
    elif isinstance(raw, float):
        if not math.isfinite(raw):
            raise ValueError(f"potential must be finite, got {raw!r}")
        # 十进制表示按字面值转为有理数
        value = Fraction(repr(raw))
    elif isinstance(raw, str):
        value = Fraction(raw.strip())
    else:
        raise ValueError(f"potential must be a number or 'p/q' string, got {raw!r}")
    return value if exact else float(value)


def format_number(value: Any, precision: int = 17) -> Any:
    """
    将数值转换为确定性的输出形式

    Args:
        value: 数值
        precision: 有效数字位数

    Returns:
        float 格式化为字符串后再转回的 JSON 友好值；Fraction 输出 "p/q"
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value.numerator)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.{precision}g}")
    return value


def to_jsonable(obj: Any, precision: int = 17) -> Any:
    """递归地把报告对象转换为可 JSON 序列化的结构"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, precision) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist(), precision)
    if isinstance(obj, complex):
        return {'real': format_number(obj.real, precision), 'imag': format_number(obj.imag, precision)}
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict(), precision)
    return format_number(obj, precision)


def dumps_deterministic(obj: Any, precision: int = 17) -> str:
    """按键排序并固定精度输出 JSON 文本"""
    return json.dumps(to_jsonable(obj, precision), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def sha256_text(text: str) -> str:
    """计算文本的 sha256 指纹"""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def tie_scale(reference: Number) -> float:
    """容差缩放因子 1+|m|"""
    return 1.0 + abs(float(reference))


def classify_gap(difference: Number, reference: Number, tol: float,
                 ambiguity_factor: float = 1000.0) -> str:
    """
    判断势能差是否为零（紧箭头判定）

    Args:
        difference: m_s + F(a) - m_r
        reference: 参考量 m_r
        tol: 浮点容差
        ambiguity_factor: 模糊带宽度（容差的倍数）

    Returns:
        str: TIGHT, SLACK 或 AMBIGUOUS
    """
    if isinstance(difference, Fraction):
        return TIGHT if difference == 0 else SLACK
    bound = tol * tie_scale(reference)
    magnitude = abs(difference)
    if magnitude <= bound:
        return TIGHT
    if magnitude <= ambiguity_factor * bound:
        return AMBIGUOUS
    return SLACK


def potentials_equal(a: Number, b: Number, tol: float) -> bool:
    """两个势能和在容差内相等（有理数时严格相等）"""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol * tie_scale(b)


def sum_potentials(values: Iterable[Number]) -> Number:
    """按输入类型求和，空序列为 0"""
    total: Number = 0
    for value in values:
        total = total + value
    return total
