"""
异常定义模块
为图表校验、认证、构造等失败情形提供带坐标的异常类型
"""

from typing import Optional


class BratteliError(Exception):
    """所有领域异常的基类，exit_code 对应命令行退出码"""

    exit_code = 1


class DiagramValidationError(BratteliError):
    """
    图表校验失败

    Args:
        message: 错误描述
        kind: 错误种类 (schema, sink, unreachable, level_mismatch, depth)
        level: 出错的层级
        vertex: 出错的顶点名
    """

    exit_code = 2

    def __init__(self, message: str, kind: str = 'schema',
                 level: Optional[int] = None, vertex: Optional[str] = None):
        self.kind = kind
        self.level = level
        self.vertex = vertex
        location = []
        if level is not None:
            location.append(f"level {level}")
        if vertex is not None:
            location.append(f"vertex {vertex!r}")
        if location:
            message = f"{kind}: {message} ({', '.join(location)})"
        else:
            message = f"{kind}: {message}"
        super().__init__(message)


class TieAmbiguityError(BratteliError):
    """浮点模式下无法判定两个势能和是否相等"""

    exit_code = 2

    def __init__(self, level: int, vertex: str, gap: float):
        self.level = level
        self.vertex = vertex
        self.gap = gap
        super().__init__(
            f"tie ambiguity at level {level}, vertex {vertex!r} "
            f"(difference {gap:.3e}); rerun with BRATTELI_EXACT=1"
        )


class CertificationError(BratteliError):
    """请求的层级超出了已认证的深度"""

    exit_code = 3

    def __init__(self, message: str, flag: Optional[str] = None):
        self.flag = flag
        super().__init__(f"{message} [certification: {flag}]" if flag else message)


class IterationBudgetError(BratteliError):
    """迭代预算耗尽"""

    exit_code = 3

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class CapacityExceededError(BratteliError):
    """显式路径枚举超过上限"""

    exit_code = 2

    def __init__(self, count: int, cap: int, what: str = 'paths'):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} {what} exceed the cap of {cap}")


class StateValidationError(BratteliError):
    """态不是半正定或迹不为 1"""

    exit_code = 2


class DimensionMismatchError(BratteliError):
    """态或矩阵系统的维度与代数不一致"""

    exit_code = 2


class NonTracialError(BratteliError):
    """给定的权重不定义迹"""

    exit_code = 2


class ConstructionError(BratteliError):
    """构造过程中某个间隙的调度无法达成"""

    exit_code = 4

    def __init__(self, message: str, gap: Optional[int] = None):
        self.gap = gap
        super().__init__(f"{message} (gap {gap})" if gap is not None else message)
