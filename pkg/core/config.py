"""
配置管理模块
负责读取和管理数值容差、容量上限与日志等配置
"""

import configparser
import os
from typing import Dict, List

from utils.logger import get_logger

logger = get_logger(__name__)

EXACT_ENV_VAR = 'BRATTELI_EXACT'


class Config:
    """配置管理类"""

    def __init__(self, config_file=None):
        """初始化配置管理器"""
        if config_file is None:
            config_file = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'config.ini')

        self.config_file = config_file
        self.config = configparser.ConfigParser(inline_comment_prefixes=('#',))
        self.load_config()

    def load_config(self):
        """加载配置文件"""
        try:
            if os.path.exists(self.config_file):
                self.config.read(self.config_file, encoding='utf-8')
            else:
                logger.warning(f"配置文件不存在，使用默认值: {self.config_file}")
        except configparser.Error as e:
            logger.error(f"加载配置文件失败: {e}")

    def save_config(self):
        """保存配置到文件"""
        try:
            with open(self.config_file, 'w', encoding='utf-8') as f:
                self.config.write(f)
        except OSError as e:
            logger.error(f"保存配置文件失败: {e}")

    def get(self, key, default=None, section='Settings'):
        """获取配置值"""
        return self.config.get(section, key, fallback=default)

    def get_int(self, key, section='Settings', default=0):
        """获取整数配置值"""
        try:
            return int(self.config.get(section, key, fallback=str(default)))
        except (ValueError, TypeError) as e:
            logger.warning(f"获取整数配置失败 {key}: {e}")
            return default

    def get_bool(self, key, section='Settings', default=False):
        """获取布尔配置值"""
        value = self.config.get(section, key, fallback=str(default))
        return str(value).strip().lower() in ('true', '1', 'yes', 'on')

    def get_float(self, key, section='Settings', default=0.0):
        """获取浮点数配置值"""
        try:
            return float(self.config.get(section, key, fallback=str(default)))
        except (ValueError, TypeError) as e:
            logger.warning(f"获取浮点数配置失败 {key}: {e}")
            return default

    def set(self, key, value, section='Settings'):
        """设置配置值"""
        if not self.config.has_section(section):
            self.config.add_section(section)
        self.config.set(section, key, str(value))

    def is_exact_mode(self) -> bool:
        """是否使用有理数精确模式（环境变量优先）"""
        env_value = os.environ.get(EXACT_ENV_VAR)
        if env_value is not None and env_value.strip():
            return env_value.strip().lower() in ('1', 'true', 'yes', 'on')
        return self.get_bool('exact_mode', default=False)

    def get_tolerances(self) -> Dict[str, float]:
        """获取所有数值容差"""
        return {
            'tie': self.get_float('tie_tolerance', default=1e-9),
            'tie_ambiguity_factor': self.get_float('tie_ambiguity_factor', default=1000.0),
            'stochastic': self.get_float('stochastic_tolerance', default=1e-12),
            'psd': self.get_float('psd_tolerance', default=1e-10),
            'kms': self.get_float('kms_tolerance', default=1e-12),
            'ground': self.get_float('ground_tolerance', default=1e-10),
            'convergence': self.get_float('convergence_tolerance', default=1e-9),
            'criterion': self.get_float('criterion_threshold', default=1e-6),
        }

    def get_path_cap(self) -> int:
        """层代数显式路径枚举上限"""
        return self.get_int('path_cap', default=4096)

    def get_materialize_cap(self) -> int:
        """测地路径列表物化上限"""
        return self.get_int('materialize_cap', default=1000000)

    def get_lookahead(self) -> int:
        return self.get_int('lookahead', default=5)

    def get_stability_window(self) -> int:
        return self.get_int('stability_window', default=3)

    def get_iteration_budget(self) -> int:
        return self.get_int('iteration_budget', default=10000)

    def get_random_seed(self) -> int:
        return self.get_int('random_seed', default=20200910)

    def get_ground_trials(self) -> int:
        return self.get_int('ground_trials', default=64)

    def get_max_threads(self) -> int:
        return self.get_int('max_threads', default=4)

    def get_cache_size(self) -> int:
        return self.get_int('stats_cache_size', default=32)

    def get_output_precision(self) -> int:
        return self.get_int('output_precision', default=17)

    def get_beta_grid(self) -> List[float]:
        """获取 β→∞ 判据使用的 β 网格"""
        grid_str = self.get('beta_grid', '1,2,4,8,16')
        return [float(b.strip()) for b in grid_str.split(',') if b.strip()]
