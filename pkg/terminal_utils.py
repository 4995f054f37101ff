#!/usr/bin/env python3
# 终端输出模块 - 彩色提示与摘要表格；结果以 CSV 文件为准，终端输出只作提示

from enum import Enum
from typing import Any, Dict, List, Optional

import colorama
from prettytable import PrettyTable

# Windows 终端启用 ANSI 转义，其他平台无操作
colorama.just_fix_windows_console()


class Color(Enum):
    RESET = "\033[0m"
    RED = "\033[31m"
    YELLOW = "\033[33m"
    BRIGHT_RED = "\033[91m"
    BRIGHT_GREEN = "\033[92m"
    BRIGHT_YELLOW = "\033[93m"
    BRIGHT_BLUE = "\033[94m"
    BRIGHT_CYAN = "\033[96m"
    ORANGE = "\033[38;5;208m"
    SILVER = "\033[38;5;240m"
    BOLD = "\033[1m"


EXIT_CODE_MEANING = {0: "成功", 1: "输入错误", 2: "分析结论（不可行/发散/不可观测）"}


class TerminalUtils:
    """终端输出工具类；enabled=False 时输出纯文本（--no-color）"""

    enabled = True

    @staticmethod
    def colored(text: Any, color: Color = Color.RESET, style: Optional[Color] = None) -> str:
        if not TerminalUtils.enabled:
            return str(text)
        style_code = style.value if style else ""
        return f"{style_code}{color.value}{text}{Color.RESET.value}"

    @staticmethod
    def print_table(data: List[Dict[str, Any]], headers: Optional[List[str]] = None, title: Optional[str] = None,
                    align: str = "r") -> None:
        """用 PrettyTable 打印行字典列表

        Args:
            data: 行字典列表
            headers: 列名，默认取第一行的键
            title: 表格标题
            align: 对齐方式 l/c/r
        """
        if not data:
            return
        headers = headers or list(data[0].keys())
        table = PrettyTable(headers)
        table.align = align
        for row in data:
            table.add_row([row.get(header, "") for header in headers])
        if title:
            print(TerminalUtils.colored(title, Color.BRIGHT_CYAN, Color.BOLD))
        print(table)

    @staticmethod
    def print_error(message: str, exit_code: Optional[int] = None, suggestion: Optional[str] = None) -> None:
        """错误行；给出退出码时附上含义"""
        print(TerminalUtils.colored(f"✗ {message}", Color.BRIGHT_RED, Color.BOLD))
        if exit_code is not None:
            meaning = EXIT_CODE_MEANING.get(exit_code, "")
            print("  " + TerminalUtils.colored(f"退出码 {exit_code} {meaning}".rstrip(), Color.SILVER))
        if suggestion:
            print("  " + TerminalUtils.colored(f"建议: {suggestion}", Color.BRIGHT_YELLOW))

    @staticmethod
    def print_success(message: str) -> None:
        print(TerminalUtils.colored("✓ ", Color.BRIGHT_GREEN, Color.BOLD)
              + TerminalUtils.colored(message, Color.BRIGHT_GREEN))

    @staticmethod
    def print_warning(message: str) -> None:
        print(TerminalUtils.colored("⚠ ", Color.ORANGE, Color.BOLD)
              + TerminalUtils.colored(message, Color.ORANGE))

    @staticmethod
    def print_info(message: str) -> None:
        print(TerminalUtils.colored("ℹ ", Color.BRIGHT_BLUE, Color.BOLD)
              + TerminalUtils.colored(message, Color.BRIGHT_BLUE))
