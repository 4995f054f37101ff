#!/usr/bin/env python3
# 日志模块 - 控制台按配置级别输出，文件按日期记录 DEBUG 细节

import functools
import logging
import os
import time
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, Optional

from constants import LOG_BACKUP_COUNT, LOG_MAX_BYTES, LOG_RETENTION_DAYS

LOGGER_NAME = "MJLSHinf"
CONSOLE_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(funcName)s - %(message)s"


class LogManager:
    """日志管理类

    Args:
        log_dir: 日志目录，默认程序目录下的 logs/
        log_level: 控制台级别
        log_to_file: 是否写日志文件（测试或只读目录下关闭）
    """

    def __init__(self, log_dir: Optional[str] = None, log_level: int = logging.INFO, log_to_file: bool = True):
        self.log_dir = log_dir or os.path.join(os.path.dirname(os.path.abspath(__file__)), "logs")
        self.log_level = log_level
        self.log_to_file = log_to_file

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self.logger.handlers.clear()

        console = logging.StreamHandler()
        console.setLevel(log_level)
        console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))
        self.logger.addHandler(console)

        if log_to_file:
            os.makedirs(self.log_dir, exist_ok=True)
            self.remove_expired_logs()
            self.logger.addHandler(self._file_handler())

    def _file_handler(self) -> logging.Handler:
        path = os.path.join(self.log_dir, f"{datetime.now():%Y-%m-%d}.log")
        handler = RotatingFileHandler(path, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUP_COUNT, encoding="utf-8")
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
        return handler

    def remove_expired_logs(self) -> int:
        """删除超过保留天数的日志文件，返回删除数量"""
        cutoff = time.time() - LOG_RETENTION_DAYS * 24 * 3600
        removed = 0
        try:
            for name in os.listdir(self.log_dir):
                path = os.path.join(self.log_dir, name)
                if ".log" in name and os.path.isfile(path) and os.path.getmtime(path) < cutoff:
                    os.remove(path)
                    removed += 1
        except OSError as e:
            # 此时 handler 尚未建立
            print(f"清理过期日志失败: {e}")
        return removed

    def debug(self, message, *args, **kwargs):
        self.logger.debug(message, *args, **kwargs)

    def info(self, message, *args, **kwargs):
        self.logger.info(message, *args, **kwargs)

    def warning(self, message, *args, **kwargs):
        self.logger.warning(message, *args, **kwargs)

    def error(self, message, *args, **kwargs):
        self.logger.error(message, *args, **kwargs)

    def exception(self, message, *args, **kwargs):
        self.logger.exception(message, *args, **kwargs)

    def log_command(self, command: str, details: Dict[str, Any]) -> None:
        """一次 CLI 命令的关键参数，单行 key=value"""
        fields = ", ".join(f"{key}={value}" for key, value in details.items())
        self.info(f"命令 {command} | {fields}")

    def log_failure(self, kind: str, message: str, exit_code: int) -> None:
        self.error(f"{kind}: {message} | 退出码 {exit_code}")


_manager: Optional[LogManager] = None


def configure_logging(log_level: str = "INFO", log_dir: Optional[str] = None, log_to_file: bool = True) -> LogManager:
    """按配置重建全局日志管理器（CLI 启动时调用）"""
    global _manager
    _manager = LogManager(log_dir, getattr(logging, log_level.upper(), logging.INFO), log_to_file)
    return _manager


def get_logger() -> LogManager:
    """全局日志管理器；未配置时只在控制台输出 WARNING 以上"""
    global _manager
    if _manager is None:
        _manager = LogManager(log_level=logging.WARNING, log_to_file=False)
    return _manager


def log_function_call(func):
    """记录数值入口的调用与耗时；参数只记类型，避免把矩阵写进日志"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger()
        logger.debug(f"调用 {func.__name__}({', '.join(type(a).__name__ for a in args)}; {sorted(kwargs)})")
        started = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception:
            logger.exception(f"{func.__name__} 失败")
            raise
        logger.debug(f"{func.__name__} 完成，用时 {time.perf_counter() - started:.3f}s")
        return result

    return wrapper
