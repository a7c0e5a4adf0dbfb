"""
层统计缓存模块
按 (图表指纹, β 列表, 容差) 缓存已计算的 LevelStats 序列，避免重复动态规划
"""

import threading
from collections import OrderedDict
from typing import Hashable, List, Optional

from utils.logger import get_logger

logger = get_logger(__name__)


class LevelStatsCache:
    """
    层统计缓存管理器类
    使用LRU策略管理缓存
    """

    def __init__(self, max_cache_size: int = 32):
        """
        初始化缓存管理器

        Args:
            max_cache_size: 最大缓存条目数
        """
        self.max_cache_size = max_cache_size
        self._cache: "OrderedDict[Hashable, list]" = OrderedDict()
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        logger.debug(f"层统计缓存已初始化，最大缓存数量: {max_cache_size}")

    def get_stats(self, key: Hashable, depth: int) -> Optional[List]:
        """
        获取缓存的层统计序列

        Args:
            key: 缓存键
            depth: 需要的最大层级

        Returns:
            list: 长度至少为 depth+1 的序列（截取返回），不足时返回已有的部分，无则 None
        """
        with self._lock:
            stats = self._cache.get(key)
            if stats is None:
                self._misses += 1
                logger.debug(f"缓存未命中: {key!r:.80}")
                return None
            self._cache.move_to_end(key)
            if len(stats) > depth:
                self._hits += 1
                return stats[:depth + 1]
            self._misses += 1
            return list(stats)

    def put_stats(self, key: Hashable, stats: List):
        """
        放入（或延长）缓存的层统计序列

        Args:
            key: 缓存键
            stats: 从第 0 层开始的统计序列
        """
        with self._lock:
            existing = self._cache.get(key)
            if existing is not None and len(existing) >= len(stats):
                self._cache.move_to_end(key)
                return
            if len(self._cache) >= self.max_cache_size and key not in self._cache:
                oldest_key = next(iter(self._cache))
                del self._cache[oldest_key]
                logger.debug("缓存已满，移除最旧项")
            self._cache[key] = list(stats)
            self._cache.move_to_end(key)

    def clear(self):
        """清空所有缓存"""
        with self._lock:
            self._cache.clear()
            self._hits = 0
            self._misses = 0
        logger.debug("已清空层统计缓存")

    def get_cache_stats(self) -> dict:
        """
        获取缓存统计信息

        Returns:
            dict: 缓存统计信息
        """
        with self._lock:
            return {
                'current_size': len(self._cache),
                'max_size': self.max_cache_size,
                'hits': self._hits,
                'misses': self._misses,
            }


# 全局缓存实例（单例模式）
_global_cache: Optional[LevelStatsCache] = None
_global_lock = threading.Lock()


def get_stats_cache(max_size: int = 32) -> LevelStatsCache:
    """
    获取全局层统计缓存实例

    Args:
        max_size: 最大缓存数量（仅首次创建时生效）

    Returns:
        LevelStatsCache: 缓存管理器实例
    """
    global _global_cache
    with _global_lock:
        if _global_cache is None:
            _global_cache = LevelStatsCache(max_size)
        return _global_cache
