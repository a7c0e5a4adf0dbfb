"""
命令报告模块
CommandReport 数据结构、警告收集与输入文件读取
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from core.diagram_model import DiagramSpec, load_spec
from utils.common_utils import dumps_deterministic, sha256_text
from utils.file_helper import get_file_string, get_full_path
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class CommandReport:
    """一次命令的结构化结果；计时只写日志，不进报告"""

    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    results: Dict[str, object] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> dict:
        return {
            'command': self.command,
            'inputs': self.inputs,
            'results': self.results,
            'warnings': self.warnings,
        }

    def render(self, precision: int = 17) -> str:
        return dumps_deterministic(self.to_dict(), precision)


class WarningCollector(logging.Handler):
    """命令执行期间收集 WARNING 及以上的日志消息"""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record: logging.LogRecord):
        self.messages.append(record.getMessage())


def read_input(report: CommandReport, name: str, path: str) -> str:
    """读取输入文件并把 sha256 记入报告"""
    text = get_file_string(get_full_path(path))
    report.inputs[name] = sha256_text(text)
    return text


def load_diagram(report: CommandReport, name: str, path: str, exact: Optional[bool] = None) -> DiagramSpec:
    """
    读取图表文件

    exact 为 None 时由 load_spec 按环境变量与文件决定
    """
    spec = load_spec(read_input(report, name, path), exact=exact)
    logger.debug(f"已加载图表 {os.path.basename(path)}: {spec.presentation}, 前缀深度 {spec.prefix_depth}")
    return spec


def exact_flag(args, config=None) -> Optional[bool]:
    """
    --exact 优先，其次 config.is_exact_mode()（环境变量在其中优先于 exact_mode）

    返回 None 时由 load_spec 按环境变量与文件的 "exact" 字段决定
    """
    if getattr(args, 'exact', False):
        return True
    if config is not None and config.is_exact_mode():
        return True
    return None
