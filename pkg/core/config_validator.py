"""
配置验证模块
检查容差、容量上限、迭代预算与日志配置
"""

import os
from typing import List, Tuple

from utils.logger import get_logger

logger = get_logger(__name__)


class ConfigValidator:
    """配置验证器类"""

    # 日志级别
    VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']

    # 容差键 -> 允许的最大值
    TOLERANCE_LIMITS = {
        'tie_tolerance': 1e-3,
        'stochastic_tolerance': 1e-6,
        'psd_tolerance': 1e-4,
        'kms_tolerance': 1e-4,
        'ground_tolerance': 1e-4,
        'convergence_tolerance': 1e-2,
        'criterion_threshold': 1.0,
    }

    def __init__(self):
        """初始化配置验证器"""
        self.errors: List[str] = []
        self.warnings: List[str] = []

    def validate_config(self, config) -> Tuple[bool, List[str], List[str]]:
        """
        验证配置对象

        Args:
            config: 配置管理器对象

        Returns:
            Tuple[bool, List[str], List[str]]: (是否有效, 错误列表, 警告列表)
        """
        self.errors.clear()
        self.warnings.clear()

        self._validate_tolerance_config(config)
        self._validate_capacity_config(config)
        self._validate_iteration_config(config)
        self._validate_logging_config(config)

        is_valid = len(self.errors) == 0

        if is_valid:
            logger.debug("配置验证通过")
        else:
            logger.error(f"配置验证失败，发现 {len(self.errors)} 个错误")

        if self.warnings:
            logger.warning(f"配置验证发现 {len(self.warnings)} 个警告")

        return is_valid, self.errors.copy(), self.warnings.copy()

    def _validate_tolerance_config(self, config):
        """验证数值容差"""
        for key, upper in self.TOLERANCE_LIMITS.items():
            raw = config.get(key, None)
            if raw is None:
                continue
            try:
                value = float(raw)
            except ValueError:
                self.errors.append(f"{key} 必须是数字: {raw}")
                continue
            if value <= 0:
                self.errors.append(f"{key} 必须大于 0")
            elif value > upper:
                self.warnings.append(f"{key} = {value} 过大，结果可能不可靠")

        factor = config.get_float('tie_ambiguity_factor', default=1000.0)
        if factor < 1:
            self.errors.append("tie_ambiguity_factor 必须 ≥ 1")

        try:
            grid = config.get_beta_grid()
            if not grid:
                self.errors.append("beta_grid 不能为空")
            elif grid != sorted(grid):
                self.warnings.append("beta_grid 未按升序排列，判据检查会先排序")
        except ValueError:
            self.errors.append("beta_grid 必须是逗号分隔的数字")

    def _validate_capacity_config(self, config):
        """验证容量上限"""
        path_cap = config.get_int('path_cap', default=4096)
        if path_cap <= 0:
            self.errors.append("path_cap 必须大于 0")
        elif path_cap > 65536:
            self.warnings.append(f"path_cap = {path_cap} 过大，稠密块运算可能耗尽内存")

        if config.get_int('materialize_cap', default=1000000) <= 0:
            self.errors.append("materialize_cap 必须大于 0")

        if config.get_int('max_threads', default=4) < 1:
            self.errors.append("max_threads 必须 ≥ 1")

        if config.get_int('stats_cache_size', default=32) < 1:
            self.errors.append("stats_cache_size 必须 ≥ 1")

        precision = config.get_int('output_precision', default=17)
        if not 1 <= precision <= 17:
            self.errors.append("output_precision 必须在 1-17 之间")

    def _validate_iteration_config(self, config):
        """验证迭代与前瞻参数"""
        if config.get_int('lookahead', default=5) < 0:
            self.errors.append("lookahead 不能为负")
        if config.get_int('stability_window', default=3) < 0:
            self.errors.append("stability_window 不能为负")
        budget = config.get_int('iteration_budget', default=10000)
        if budget <= 0:
            self.errors.append("iteration_budget 必须大于 0")
        elif budget > 10 ** 6:
            self.warnings.append(f"iteration_budget = {budget} 过大")
        if config.get_int('ground_trials', default=64) < 0:
            self.errors.append("ground_trials 不能为负")

    def _validate_logging_config(self, config):
        """验证日志配置"""
        log_level = config.get('log_level', 'INFO').upper()
        if log_level not in self.VALID_LOG_LEVELS:
            self.errors.append(
                f"无效的日志级别: {log_level}, "
                f"有效值: {', '.join(self.VALID_LOG_LEVELS)}"
            )

        log_file = config.get('log_file', 'bratteli.log')
        if log_file:
            log_dir = os.path.dirname(log_file)
            if log_dir and not os.path.exists(log_dir):
                try:
                    os.makedirs(log_dir, exist_ok=True)
                    logger.info(f"创建日志目录: {log_dir}")
                except OSError as e:
                    self.warnings.append(f"无法创建日志目录: {str(e)}")

    def get_validation_summary(self) -> str:
        """
        获取验证摘要信息

        Returns:
            str: 验证摘要
        """
        if not self.errors and not self.warnings:
            return ""

        summary_parts = []
        if self.errors:
            summary_parts.append(f"❌ 发现 {len(self.errors)} 个错误:")
            for i, error in enumerate(self.errors, 1):
                summary_parts.append(f"  {i}. {error}")

        if self.warnings:
            summary_parts.append(f"⚠️  发现 {len(self.warnings)} 个警告:")
            for i, warning in enumerate(self.warnings, 1):
                summary_parts.append(f"  {i}. {warning}")

        return "\n".join(summary_parts)


def validate_config(config) -> Tuple[bool, str]:
    """
    验证配置（便捷函数）

    Args:
        config: 配置管理器对象

    Returns:
        Tuple[bool, str]: (是否有效, 验证摘要)
    """
    validator = ConfigValidator()
    is_valid, _, _ = validator.validate_config(config)
    return is_valid, validator.get_validation_summary()
