#!/usr/bin/env python3
"""
bratteli-kms - Ground, ceiling and KMS states on AF algebras from Bratteli diagrams
主程序入口文件
"""

import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli.toolkit import BratteliToolkit
from core.config import Config
from core.config_validator import validate_config
from utils.logger import setup_logging, get_logger

logger = get_logger(__name__)

EXIT_INVALID_CONFIG = 2


def main(argv=None) -> int:
    """主程序入口函数"""
    config = Config(os.environ.get('BRATTELI_CONFIG'))
    setup_logging(log_level=config.get('log_level', 'INFO'), log_file=config.get('log_file', 'bratteli.log') or None)

    # 验证配置
    is_valid, validation_summary = validate_config(config)
    if not is_valid:
        logger.error(f"配置验证失败:\n{validation_summary}")
        return EXIT_INVALID_CONFIG
    elif validation_summary:
        logger.info(f"配置验证结果:\n{validation_summary}")

    try:
        return BratteliToolkit(config).run(argv)
    except SystemExit as e:
        # argparse 的用法错误
        return e.code if isinstance(e.code, int) else EXIT_INVALID_CONFIG
    except Exception as e:
        logger.critical(f"程序启动失败: {str(e)}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
