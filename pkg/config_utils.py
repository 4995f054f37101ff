#!/usr/bin/env python3
# 配置管理工具模块

import copy
import json
import os
from typing import Any, Dict, Optional, Tuple

import psutil

from constants import (CONDITION_LIMIT, DIVERGENCE_BOUND, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL, GAMMA_SEARCH_HI,
                       GAMMA_SEARCH_HI_MAX, GAMMA_SEARCH_HORIZON_CAP, GAMMA_SEARCH_LO, GAMMA_SEARCH_TOL,
                       INPUT_POLICIES, MAX_CHANNELS, ORACLE_GRID_LOWER, ORACLE_GRID_STEP, ORACLE_GRID_UPPER,
                       ORACLE_MAX_GRID_POINTS, ORACLE_MAX_LEAVES, PD_THRESHOLD, SIM_SEED, SIM_STEPS, SIM_TRIALS,
                       SYMMETRY_TOL)
from terminal_utils import TerminalUtils, Color

VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并，override 中的值覆盖 base，返回新字典"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_max_workers(requested: Optional[int]) -> int:
    """并行线程数：显式配置优先，否则取物理核数并按当前负载折减"""
    if requested is not None:
        return max(1, int(requested))
    cores = psutil.cpu_count(logical=False) or os.cpu_count() or 1
    try:
        system_load = psutil.cpu_percent(interval=0.1) / 100.0
    except Exception:
        system_load = 0.5
    load_factor = 1.0 - system_load * 0.5
    return max(1, int(cores * load_factor))


class ConfigManager:
    """配置管理类"""

    def __init__(self, config_file: Optional[str] = None) -> None:
        # 使用绝对路径加载配置文件，确保无论程序在哪个目录下运行都能找到
        if config_file is None:
            current_dir = os.path.dirname(os.path.abspath(__file__))
            self.config_file: str = os.path.join(current_dir, "config.json")
        else:
            self.config_file: str = config_file

        # 配置模板
        self.config_template: Dict[str, Any] = {
            "solver": {
                "tolerance": FIXED_POINT_TOL,  # 不动点逐元素残差阈值
                "max_iterations": FIXED_POINT_MAX_ITER,
                "divergence_bound": DIVERGENCE_BOUND,  # ‖Ξ‖ 超过即判发散
                "pd_threshold": PD_THRESHOLD,  # 正定判定相对阈值
                "condition_limit": CONDITION_LIMIT,
                "symmetry_tolerance": SYMMETRY_TOL,
            },
            "gamma_search": {
                "lo": GAMMA_SEARCH_LO,
                "hi": GAMMA_SEARCH_HI,
                "hi_max": GAMMA_SEARCH_HI_MAX,  # 上界倍增的最大值
                "tol": GAMMA_SEARCH_TOL,
                "horizon_cap": GAMMA_SEARCH_HORIZON_CAP,  # 每次谓词评估的最大迭代次数
            },
            "observability": {
                "max_length": None,  # None 表示 n·𝓜
            },
            "oracle": {
                "grid_lower": ORACLE_GRID_LOWER,
                "grid_upper": ORACLE_GRID_UPPER,
                "grid_step": ORACLE_GRID_STEP,
                "max_leaves": ORACLE_MAX_LEAVES,
                "max_grid_points": ORACLE_MAX_GRID_POINTS,
            },
            "simulation": {
                "steps": SIM_STEPS,
                "trials": SIM_TRIALS,
                "seed": SIM_SEED,
                "input_policy": "zero",  # zero（零输入）/ hold（保持上次送达值，对照模式）
            },
            "max_channels": MAX_CHANNELS,
            "max_workers": None,  # None 表示按 CPU 物理核数自动确定
            "output_dir": "results",
            "log_level": "INFO",
            "log_to_file": True,
        }

        # 默认配置（与模板相同，使用深拷贝避免嵌套字典共享引用）
        self.default_config: Dict[str, Any] = copy.deepcopy(self.config_template)
        self.config: Dict[str, Any] = self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """加载配置文件，缺省项取模板值；文件无效时回退到默认配置"""
        try:
            if not os.path.exists(self.config_file):
                return copy.deepcopy(self.default_config)
            with open(self.config_file, "r", encoding="utf-8") as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ValueError("配置文件顶层必须是对象")

            merged_config = deep_merge(self.default_config, config)
            is_valid, message = self.validate_config(merged_config)
            if not is_valid:
                print(TerminalUtils.colored(f"配置文件验证失败: {message}，将使用默认配置", Color.YELLOW))
                return copy.deepcopy(self.default_config)
            return merged_config
        except (OSError, ValueError) as e:
            print(TerminalUtils.colored(f"加载配置文件失败: {str(e)}，将使用默认配置", Color.RED))
            return copy.deepcopy(self.default_config)

    def save_config(self) -> Tuple[bool, str]:
        """保存配置到文件"""
        try:
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=4, ensure_ascii=False)
            return True, f"配置已成功保存到: {self.config_file}"
        except OSError as e:
            return False, f"保存配置失败: {str(e)}"

    def get_config(self) -> Dict[str, Any]:
        """获取当前配置（深拷贝）"""
        return copy.deepcopy(self.config)

    def get_section(self, name: str) -> Dict[str, Any]:
        """获取某个配置段"""
        return copy.deepcopy(self.config[name])

    def update_config(self, overrides: Dict[str, Any]) -> Tuple[bool, str]:
        """在内存中合并覆盖项（场景文件、命令行参数），不写回文件"""
        candidate = deep_merge(self.config, overrides)
        is_valid, message = self.validate_config(candidate)
        if is_valid:
            self.config = candidate
        return is_valid, message

    def set_log_level(self, level: str) -> Tuple[bool, str]:
        """设置日志级别"""
        if level.upper() in VALID_LOG_LEVELS:
            self.config["log_level"] = level.upper()
            return True, f"日志级别已设置为 {level.upper()}"
        return False, f"无效的日志级别: {level}，有效值: {', '.join(VALID_LOG_LEVELS)}"

    @staticmethod
    def _positive(section: Dict[str, Any], key: str, integer: bool = False) -> Optional[str]:
        value = section.get(key)
        expected = int if integer else (int, float)
        if isinstance(value, bool) or not isinstance(value, expected) or value <= 0:
            return f"{key} 必须是正{'整' if integer else ''}数，当前为 {value!r}"
        return None

    def validate_config(self, config: Dict[str, Any]) -> Tuple[bool, str]:
        """验证配置的取值范围"""
        checks = {
            "solver": [("tolerance", False), ("max_iterations", True), ("divergence_bound", False),
                       ("pd_threshold", False), ("condition_limit", False), ("symmetry_tolerance", False)],
            "gamma_search": [("lo", False), ("hi", False), ("hi_max", False), ("tol", False),
                             ("horizon_cap", True)],
            "oracle": [("grid_step", False), ("max_leaves", True), ("max_grid_points", True)],
            "simulation": [("steps", True), ("trials", True)],
        }
        for section_name, keys in checks.items():
            section = config.get(section_name)
            if not isinstance(section, dict):
                return False, f"{section_name} 必须是对象"
            for key, integer in keys:
                problem = self._positive(section, key, integer)
                if problem:
                    return False, f"{section_name}.{problem}"

        search = config["gamma_search"]
        if not search["lo"] < search["hi"] <= search["hi_max"]:
            return False, "gamma_search 需满足 lo < hi ≤ hi_max"
        oracle = config["oracle"]
        if not oracle["grid_lower"] < oracle["grid_upper"]:
            return False, "oracle.grid_lower 必须小于 grid_upper"
        simulation = config["simulation"]
        if simulation.get("input_policy") not in INPUT_POLICIES:
            return False, f"simulation.input_policy 必须是 {INPUT_POLICIES} 之一"
        seed = simulation.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            return False, "simulation.seed 必须是非负整数"

        max_length = config.get("observability", {}).get("max_length")
        if max_length is not None and (not isinstance(max_length, int) or max_length < 1):
            return False, "observability.max_length 必须是正整数或 null"
        max_workers = config.get("max_workers")
        if max_workers is not None and (not isinstance(max_workers, int) or max_workers < 1):
            return False, "max_workers 必须是正整数或 null"
        max_channels = config.get("max_channels")
        if isinstance(max_channels, bool) or not isinstance(max_channels, int) or not 1 <= max_channels <= 30:
            return False, "max_channels 必须是 1..30 的整数"
        if str(config.get("log_level", "")).upper() not in VALID_LOG_LEVELS:
            return False, f"无效的日志级别: {config.get('log_level')}，有效值: {', '.join(VALID_LOG_LEVELS)}"
        if not isinstance(config.get("log_to_file"), bool):
            return False, "log_to_file 必须是布尔值"
        return True, "配置有效"

    def get_config_template(self) -> Dict[str, Any]:
        """获取配置模板"""
        return copy.deepcopy(self.config_template)
