#!/usr/bin/env python3
# 结果输出工具模块 - CSV 为结果契约，终端表格仅作提示

import csv
import json
import os
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from analysis_service import GammaSearchResult, ObservabilityReport, SweepTable
from constants import CSV_SIGNIFICANT_DIGITS
from model_utils import ValidationReport
from riccati_solver import FiniteHorizonSolution, FixedPointSolution, ValueSeries
from simulation_service import SimulationSummary, TrajectoryRecord
from terminal_utils import TerminalUtils, Color


def format_number(value: Any) -> str:
    """CSV 单元格格式：浮点取 17 位有效数字，空值为空串"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), f".{CSV_SIGNIFICANT_DIGITS}g")
    return str(value)


def matrix_headers(prefix: str, shape: Tuple[int, int]) -> List[str]:
    """行优先展开的列名，如 Gamma_1_2（1 起）"""
    rows, cols = shape
    return [f"{prefix}_{r + 1}_{c + 1}" for r in range(rows) for c in range(cols)]


def _flatten(*matrices: np.ndarray) -> List[float]:
    row: List[float] = []
    for matrix in matrices:
        row.extend(np.asarray(matrix, dtype=float).ravel().tolist())
    return row


class ResultExporter:
    """结果导出类：每个方法返回 (成功状态, 消息)"""

    @staticmethod
    def ensure_output_dir(output_dir: str) -> Tuple[bool, str]:
        try:
            os.makedirs(output_dir, exist_ok=True)
            return True, output_dir
        except OSError as e:
            return False, f"无法创建输出目录 {output_dir}: {str(e)}"

    @staticmethod
    def write_csv(output_path: str, headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> Tuple[bool, str]:
        """写出带表头的 CSV；行尾固定为 \\n 以保证跨平台字节一致"""
        try:
            with open(output_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(headers)
                for row in rows:
                    writer.writerow([format_number(value) for value in row])
            return True, f"已写出: {output_path}"
        except OSError as e:
            return False, f"写出 {output_path} 失败: {str(e)}"

    @staticmethod
    def export_value_series(series: ValueSeries, output_dir: str) -> Tuple[bool, str]:
        """value.csv：N, J_N, 相对变化量"""
        rows = zip(series.horizons, series.values, series.relative_changes())
        return ResultExporter.write_csv(os.path.join(output_dir, "value.csv"), ["N", "J_N", "relative_change"], rows)

    @staticmethod
    def export_finite_gains(solution: FiniteHorizonSolution, output_dir: str) -> Tuple[bool, str]:
        """gains_<i>_<j>.csv 记录 k = 1..N−1 的条件增益；gains_<i>_hat.csv 记录 k = 0 的带帽增益

        i 为模态（1 起），j 为上一步信道结果编号（0..2^m−1，第 h−1 位对应信道 h）。
        """
        if not solution.feasible:
            return False, "有限时域解不可行，不导出增益"
        stage0 = solution.stages[0]
        num_modes, num_outcomes = stage0.gamma_gain.shape[:2]
        n = stage0.xi.shape[-1]
        gain_shape, psi_shape = stage0.gamma_gain.shape[2:], stage0.psi.shape[2:]
        headers = (["k"] + matrix_headers("Gamma", gain_shape) + matrix_headers("Psi", psi_shape)
                   + matrix_headers("Xi", (n, n)))

        written = 0
        for i in range(num_modes):
            hat_row = [0] + _flatten(stage0.gamma_gain[i, 0], stage0.psi[i, 0], stage0.xi[i, 0])
            success, message = ResultExporter.write_csv(
                os.path.join(output_dir, f"gains_{i + 1}_hat.csv"), headers, [hat_row])
            if not success:
                return False, message
            written += 1
            for j in range(num_outcomes):
                rows = []
                for k in range(1, solution.horizon):
                    stage = solution.stages[k]
                    rows.append([k] + _flatten(stage.gamma_gain[i, j], stage.psi[i, j], stage.xi[i, j]))
                success, message = ResultExporter.write_csv(
                    os.path.join(output_dir, f"gains_{i + 1}_{j}.csv"), headers, rows)
                if not success:
                    return False, message
                written += 1
        return True, f"已写出 {written} 个增益文件到 {output_dir}"

    @staticmethod
    def export_stationary_gains(solution: FixedPointSolution, output_dir: str) -> Tuple[bool, str]:
        """无限时域增益：每个文件一行，k 列为 "stationary" """
        num_modes, num_outcomes = solution.gamma_bar.shape[:2]
        n = solution.xi_bar.shape[-1]
        headers = (["k"] + matrix_headers("Gamma", solution.gamma_bar.shape[2:])
                   + matrix_headers("Psi", solution.psi_bar.shape[2:]) + matrix_headers("Xi", (n, n)))
        written = 0
        for i in range(num_modes):
            jobs = [(f"gains_{i + 1}_hat.csv",
                     _flatten(solution.gamma_hat[i], solution.psi_hat[i], solution.xi_hat[i]))]
            jobs += [(f"gains_{i + 1}_{j}.csv",
                      _flatten(solution.gamma_bar[i, j], solution.psi_bar[i, j], solution.xi_bar[i, j]))
                     for j in range(num_outcomes)]
            for file_name, values in jobs:
                success, message = ResultExporter.write_csv(
                    os.path.join(output_dir, file_name), headers, [["stationary"] + values])
                if not success:
                    return False, message
                written += 1
        return True, f"已写出 {written} 个增益文件到 {output_dir}"

    @staticmethod
    def export_gamma_search(result: GammaSearchResult, output_dir: str) -> Tuple[bool, str]:
        """gamma_c.csv 为搜索结论；gamma_c_bracket.csv 为每次谓词评估的记录"""
        success, message = ResultExporter.write_csv(
            os.path.join(output_dir, "gamma_c.csv"),
            ["gamma_c", "found", "square_disturbance", "evaluations", "message"],
            [[result.gamma_c, result.found, result.square_disturbance, len(result.bracket_log), result.message]])
        if not success:
            return False, message
        rows = [[index + 1, step.gamma, step.status, step.accepted, step.lo, step.hi]
                for index, step in enumerate(result.bracket_log)]
        return ResultExporter.write_csv(os.path.join(output_dir, "gamma_c_bracket.csv"),
                                        ["evaluation", "gamma", "status", "accepted", "lo", "hi"], rows)

    @staticmethod
    def export_sweep(table: SweepTable, output_dir: str) -> Tuple[bool, str]:
        """sweep.csv：gamma_c 为空表示该点不存在有限的 γ_c"""
        rows = [[table.channel, table.field_name, point.value, point.gamma_c, point.message]
                for point in table.points]
        return ResultExporter.write_csv(os.path.join(output_dir, "sweep.csv"),
                                        ["channel", "field", "value", "gamma_c", "message"], rows)

    @staticmethod
    def export_trajectory(record: TrajectoryRecord, output_dir: str) -> Tuple[bool, str]:
        """trajectory.csv：每步一行，最后一行只有终点状态"""
        n, m = record.states.shape[1], record.commands.shape[1]
        s, p = record.disturbances.shape[1], record.outputs.shape[1]
        headers = (["k", "mode", "outcome"] + [f"x_{a + 1}" for a in range(n)] + [f"u_{a + 1}" for a in range(m)]
                   + [f"ua_{a + 1}" for a in range(m)] + [f"w_{a + 1}" for a in range(s)]
                   + [f"z_{a + 1}" for a in range(p)])
        rows = []
        for k in range(record.steps):
            rows.append([k, int(record.modes[k]) + 1, int(record.outcomes[k])]
                        + _flatten(record.states[k], record.commands[k], record.applied[k],
                                   record.disturbances[k], record.outputs[k]))
        rows.append([record.steps, None, None] + _flatten(record.states[-1]) + [None] * (2 * m + s + p))
        return ResultExporter.write_csv(os.path.join(output_dir, "trajectory.csv"), headers, rows)

    @staticmethod
    def export_summary(summary: SimulationSummary, output_dir: str) -> Tuple[bool, str]:
        """summary.csv：按步的均方量；汇总统计写入 run.json"""
        steps = summary.steps
        rows = []
        for k in range(steps + 1):
            rows.append([k, summary.mean_square_state[k],
                         summary.mean_output_energy[k] if k < steps else None,
                         summary.mean_disturbance_energy[k] if k < steps else None])
        return ResultExporter.write_csv(
            os.path.join(output_dir, "summary.csv"),
            ["k", "mean_square_state", "mean_output_energy", "mean_disturbance_energy"], rows)

    @staticmethod
    def export_manifest(manifest: Dict[str, Any], output_dir: str) -> Tuple[bool, str]:
        """run.json：命令、状态与解析后的参数；不含时间戳，重复运行字节一致"""
        output_path = os.path.join(output_dir, "run.json")
        try:
            with open(output_path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(manifest, f, indent=2, ensure_ascii=False, sort_keys=True)
                f.write("\n")
            return True, f"已写出: {output_path}"
        except (OSError, TypeError, ValueError) as e:
            return False, f"写出 {output_path} 失败: {str(e)}"


class ResultDisplay:
    """终端摘要显示类"""

    @staticmethod
    def display_validation(report: ValidationReport) -> None:
        data = [{"检查项": finding.name,
                 "结果": TerminalUtils.colored("通过", Color.BRIGHT_GREEN) if finding.passed
                 else TerminalUtils.colored("失败", Color.BRIGHT_RED),
                 "说明": finding.detail} for finding in report.findings]
        TerminalUtils.print_table(data, title="模型检查", align="l")

    @staticmethod
    def display_observability(report: ObservabilityReport) -> None:
        if report.observable:
            path = ", ".join(str(r + 1) for r in report.witness_path)
            TerminalUtils.print_success(f"弱可观测：见证路径 {{{path}}}")
        else:
            TerminalUtils.print_warning(f"长度 ≤ {report.max_length_searched} 的路径中没有满秩见证（最大秩 {report.rank}）")

    @staticmethod
    def display_channels(stationary: np.ndarray, outcome_probs: np.ndarray) -> None:
        TerminalUtils.print_table(
            [{"信道": h + 1, "平稳送达概率": f"{p:.6f}"} for h, p in enumerate(stationary)], title="信道平稳概率")
        TerminalUtils.print_table(
            [{"结果 j": j, "送达集合": "{" + ", ".join(str(h + 1) for h in range(len(stationary)) if j >> h & 1) + "}",
              "概率": f"{p:.6f}"} for j, p in enumerate(outcome_probs)], title="平稳结果分布")

    @staticmethod
    def display_value_series(series: ValueSeries, max_rows: int = 10) -> None:
        changes = series.relative_changes()
        data = [{"N": n, "J_N": f"{value:.10g}", "相对变化": "" if change is None else f"{change:.3e}"}
                for n, value, change in zip(series.horizons, series.values, changes)]
        if len(data) > max_rows:
            data = data[:max_rows // 2] + data[-(max_rows // 2):]
        TerminalUtils.print_table(data, title=f"博弈值序列（γ = {series.gamma:g}）")

    @staticmethod
    def display_gamma_search(result: GammaSearchResult) -> None:
        if result.found:
            TerminalUtils.print_success(f"γ_c ≈ {result.gamma_c:.6g}（{len(result.bracket_log)} 次评估）")
        else:
            TerminalUtils.print_warning(result.message or "不存在有限的 γ_c")

    @staticmethod
    def display_sweep(table: SweepTable) -> None:
        data = [{"取值": f"{point.value:g}", "γ_c": "无" if point.gamma_c is None else f"{point.gamma_c:.6g}"}
                for point in table.points]
        TerminalUtils.print_table(data, title=f"信道 {table.channel} 的 {table.field_name} 扫描")

    @staticmethod
    def display_summary(summary: SimulationSummary) -> None:
        gain = "无" if summary.empirical_gain is None else f"{summary.empirical_gain:.6g} ± {summary.gain_stderr:.2e}"
        data = [
            {"统计量": "试验次数", "值": summary.trials},
            {"统计量": "E‖x_K‖² / E‖x_0‖²", "值": f"{summary.terminal_ratio:.3e}"},
            {"统计量": "经验增益", "值": gain},
            {"统计量": "γ²", "值": f"{summary.gamma ** 2:.6g}"},
            {"统计量": "L2 证书", "值": "成立" if summary.l2_certificate_holds else "不成立"},
        ]
        TerminalUtils.print_table(data, title="蒙特卡洛仿真摘要", align="l")
        if summary.comparison_mode:
            TerminalUtils.print_warning(f"输入策略 {summary.input_policy} 为对照模式，不是零输入策略")


def summary_manifest(summary: SimulationSummary) -> Dict[str, Any]:
    """仿真汇总中适合写入 run.json 的标量"""
    return {
        "trials": summary.trials,
        "steps": summary.steps,
        "seed": summary.seed,
        "gamma": summary.gamma,
        "input_policy": summary.input_policy,
        "comparison_mode": summary.comparison_mode,
        "empirical_gain": summary.empirical_gain,
        "gain_stderr": summary.gain_stderr,
        "margin_mean": summary.margin_mean,
        "margin_stderr": summary.margin_stderr,
        "l2_certificate_holds": summary.l2_certificate_holds,
        "terminal_ratio": summary.terminal_ratio,
        "channel_success_rate": [float(p) for p in summary.channel_success_rate],
    }
