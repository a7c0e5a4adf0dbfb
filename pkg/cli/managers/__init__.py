"""
命令管理器模块
每个管理器注册一组子命令并返回 CommandReport
"""

from cli.managers.construction_manager import ConstructionManager
from cli.managers.geodesic_manager import GeodesicManager
from cli.managers.kms_manager import KmsManager
from cli.managers.state_manager import StateManager

__all__ = [
    'ConstructionManager',
    'GeodesicManager',
    'KmsManager',
    'StateManager'
]
