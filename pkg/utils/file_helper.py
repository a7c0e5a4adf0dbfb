# file_helper.py - Helper functions for report and diagram file I/O
import json
import os
from typing import Any

from utils.logger import get_logger

logger = get_logger(__name__)


def get_full_path(file_path: str) -> str:
    """Returns the absolute path of a file."""
    if not os.path.isabs(file_path):
        return os.path.abspath(file_path)
    return file_path


def write_file(full_path: str, content: str):
    """Writes text content to a file, creating parent directories."""
    parent = os.path.dirname(full_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    # newline='' keeps output bytes identical across platforms
    with open(full_path, 'w', encoding='utf-8', newline='') as f:
        f.write(content)
    logger.info(f"写入文件: {full_path}")


def get_file_string(full_path: str) -> str:
    """Reads a file and returns its content as a string."""
    try:
        with open(full_path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        logger.error(f"读取文件失败 {full_path}: {e}")
        raise


def get_object_from_file(full_path: str) -> Any:
    """Reads a JSON file and returns the decoded object."""
    text = get_file_string(full_path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"无法解析 JSON {full_path}: {e}")
        raise
