#!/usr/bin/env python3
# 性能监控模块 - 统计 CLI 各阶段（读取场景、求解、写出结果）的耗时

import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Iterator, Optional

from log_utils import get_logger


@dataclass
class SectionStats:
    executions: int = 0
    total_time: float = 0.0
    min_time: float = float("inf")
    max_time: float = 0.0

    def record(self, elapsed: float) -> None:
        self.executions += 1
        self.total_time += elapsed
        self.min_time = min(self.min_time, elapsed)
        self.max_time = max(self.max_time, elapsed)


class PerformanceMonitor:
    """按名称累计各阶段耗时；未 start() 时计时段不记录"""

    def __init__(self) -> None:
        self._is_running = False
        self._sections: Dict[str, SectionStats] = {}

    def start(self) -> None:
        self._is_running = True
        get_logger().debug("性能监控已启动")

    def stop(self) -> None:
        """停止监控并把报告写入日志"""
        self._is_running = False
        self.log_report()

    @contextmanager
    def section(self, section_name: str) -> Iterator[None]:
        """with 语句形式的计时段，异常时同样计入"""
        if not self._is_running:
            yield
            return
        started = time.perf_counter()
        try:
            yield
        finally:
            self._sections.setdefault(section_name, SectionStats()).record(time.perf_counter() - started)

    def get_report(self) -> Dict[str, Dict[str, Any]]:
        return {
            name: {
                "executions": stats.executions,
                "total_time": stats.total_time,
                "avg_time": stats.total_time / stats.executions,
                "min_time": stats.min_time,
                "max_time": stats.max_time,
            }
            for name, stats in self._sections.items()
        }

    def log_report(self) -> Optional[str]:
        """报告以 DEBUG 级别写入日志，返回报告文本"""
        report = self.get_report()
        if not report:
            return None
        lines = ["阶段耗时"] + [
            f"  {name}: {data['executions']} 次, 合计 {data['total_time']:.4f}s, 最长 {data['max_time']:.4f}s"
            for name, data in report.items()
        ]
        text = "\n".join(lines)
        get_logger().debug(text)
        return text

    def reset(self) -> None:
        self._sections.clear()


# 全局实例，main 每条命令开始时 reset
performance_monitor = PerformanceMonitor()
