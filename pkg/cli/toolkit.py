"""
命令行工具协调器
构建参数解析器、分派到各命令管理器，并把领域异常映射为稳定的退出码
"""

import argparse
import logging
import time
from typing import List, Optional

from cli.managers import ConstructionManager, GeodesicManager, KmsManager, StateManager
from cli.report import CommandReport, WarningCollector
from core.exceptions import BratteliError
from utils.file_helper import get_full_path, write_file
from utils.logger import LoggerManager, get_logger
from utils.stats_cache import get_stats_cache

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_UNREADABLE_INPUT = 2


class BratteliToolkit:
    """命令行协调器"""

    def __init__(self, config):
        """
        初始化协调器

        Args:
            config: 配置管理器
        """
        self.config = config
        get_stats_cache(config.get_cache_size())
        self.managers = [
            GeodesicManager(config),
            KmsManager(config),
            StateManager(config),
            ConstructionManager(config),
        ]
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog='bratteli-kms',
            description='Ground, ceiling and KMS states of generalized gauge actions on AF algebras '
                        'given by Bratteli diagrams with arrow potentials.'
        )
        parser.add_argument('--exact', action='store_true', help='Use rational arithmetic for potentials.')
        parser.add_argument('--log-level', default=None, help='Override the configured log level.')
        parser.add_argument('--report', default=None, help='Write the JSON report to a file instead of stdout.')
        subparsers = parser.add_subparsers(dest='command', help='Available commands')
        subparsers.required = True
        for manager in self.managers:
            manager.register(subparsers)
        return parser

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        解析参数并执行一个命令

        Returns:
            int: 退出码（0 成功，2 校验失败，3 未认证/预算耗尽，4 构造失败，1 意外错误）
        """
        args = self.parser.parse_args(argv)
        if args.log_level:
            LoggerManager.set_level(args.log_level)

        command = args.command if args.command != 'construct' else f"construct {args.construction}"
        report = CommandReport(command)
        collector = WarningCollector()
        root = logging.getLogger()
        root.addHandler(collector)
        started = time.perf_counter()
        try:
            args.handler(args, report)
        except BratteliError as e:
            logger.error(f"{command} 失败: {e}")
            report.exit_code = e.exit_code
            report.results['error'] = {'type': type(e).__name__, 'message': str(e)}
        except OSError as e:
            # 输入文件不可读按校验失败处理
            logger.error(f"{command} 无法读取输入: {e}")
            report.exit_code = EXIT_UNREADABLE_INPUT
            report.results['error'] = {'type': type(e).__name__, 'message': str(e)}
        except Exception as e:
            logger.critical(f"{command} 意外失败: {e}", exc_info=True)
            report.exit_code = EXIT_UNEXPECTED
            report.results['error'] = {'type': type(e).__name__, 'message': str(e)}
        finally:
            root.removeHandler(collector)
        logger.info(f"{command} 用时 {time.perf_counter() - started:.3f} 秒")

        report.warnings.extend(m for m in collector.messages if m not in report.warnings)
        text = report.render(self.config.get_output_precision())
        if args.report:
            write_file(get_full_path(args.report), text)
        else:
            print(text, end='')
        return report.exit_code


def main(config, argv: Optional[List[str]] = None) -> int:
    """便捷入口"""
    return BratteliToolkit(config).run(argv)


__all__ = ['BratteliToolkit', 'EXIT_OK', 'main']
