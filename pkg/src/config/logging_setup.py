"""
日志配置
根 logger 的级别、格式（文本或 JSON 结构化记录）与可选的滚动日志文件
"""

import os
import sys
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from pythonjsonlogger import jsonlogger

from .config_manager import ConfigManager

JSON_FIELDS = '%(asctime)s %(levelname)s %(name)s %(message)s'
OWNED = "_gradflow_handler"


def _formatter(format_type: str, fmt: str) -> logging.Formatter:
    if format_type == 'json':
        return jsonlogger.JsonFormatter(JSON_FIELDS, rename_fields={'levelname': 'level', 'asctime': 'time'})
    return logging.Formatter(fmt)


def setup_logging(cm: Optional[ConfigManager] = None, level: Optional[str] = None) -> logging.Logger:
    """
    按配置初始化根 logger；日志写到 stderr，stdout 留给 CSV 输出

    Args:
        cm: 配置管理器
        level: 覆盖配置中的级别（如 CLI 的 --verbose）

    Returns:
        根 logger
    """
    cm = cm or ConfigManager()
    cfg = cm.get_logging_config()
    formatter = _formatter(cfg.get('format_type', 'text'), cfg.get('format') or JSON_FIELDS)

    root = logging.getLogger()
    # 只替换本函数此前装上的 handler
    for handler in [h for h in root.handlers if getattr(h, OWNED, False)]:
        root.removeHandler(handler)
        handler.close()
    root.setLevel((level or cfg.get('level') or 'INFO').upper())

    console = logging.StreamHandler(sys.stderr)
    setattr(console, OWNED, True)
    console.setFormatter(formatter)
    root.addHandler(console)

    log_file = cfg.get('file')
    if log_file:
        os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=int(cfg.get('max_size_mb', 10)) * 1024 * 1024,
            backupCount=int(cfg.get('backup_count', 5)),
            encoding='utf-8',
        )
        file_handler.setFormatter(formatter)
        setattr(file_handler, OWNED, True)
        root.addHandler(file_handler)
    return root
