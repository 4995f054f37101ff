#!/usr/bin/env python3
# MJLS H∞ 工具 - 命令行入口：场景文件输入，CSV 结果输出

import argparse
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from analysis_service import GammaSearchSettings, gamma_critical, sweep, weak_observability
from channel_utils import STATIONARY, outcome_distribution, stationary_success_vector
from config_utils import ConfigManager, deep_merge, resolve_max_workers
from constants import CHANNEL_FIELDS, EXIT_ANALYTIC_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, SCENARIO_COMMANDS
from error_utils import DomainError, MJLSError, ScenarioError
from log_utils import configure_logging, get_logger
from model_utils import MjlsModel, validate_model, with_channel
from performance_monitor import performance_monitor
from result_utils import ResultDisplay, ResultExporter, summary_manifest
from riccati_solver import SolverSettings, solve_finite_horizon, solve_infinite_horizon, value_series
from scenario_utils import Scenario, load_scenario
from simulation_service import monte_carlo, simulate
from terminal_utils import TerminalUtils, Color

PROG_NAME = "mjls-hinf"
MANIFEST_SECTIONS = ("solver", "gamma_search", "observability", "oracle", "simulation")


class MJLSHinfTool:
    """一次命令行调用：加载配置与场景、执行命令、写出结果"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config_manager = ConfigManager(args.config)
        self.scenario: Optional[Scenario] = None
        self.output_dir = ""
        self.max_workers = 1

    # ------------------------------------------------------------ 准备

    def _cli_overrides(self) -> Dict[str, Any]:
        """命令行参数覆盖项，优先级最高"""
        args = self.args
        overrides: Dict[str, Any] = {}
        if args.tol is not None:
            section = "gamma_search" if args.command in ("gamma-c", "sweep") else "solver"
            key = "tol" if section == "gamma_search" else "tolerance"
            overrides[section] = {key: args.tol}
        if args.seed is not None:
            overrides["simulation"] = {"seed": args.seed}
        if args.workers is not None:
            overrides["max_workers"] = args.workers
        if args.log_level is not None:
            overrides["log_level"] = args.log_level.upper()
        return overrides

    def prepare(self) -> None:
        """配置优先级：模板 < config.json < 场景 settings < 命令行"""
        config = self.config_manager.get_config()
        self.scenario = load_scenario(self.args.scenario, max_channels=config["max_channels"])

        for source, overrides in (("场景 settings", self.scenario.settings), ("命令行参数", self._cli_overrides())):
            if not overrides:
                continue
            is_valid, message = self.config_manager.update_config(overrides)
            if not is_valid:
                raise ScenarioError(f"{source} 无效: {message}")

        config = self.config_manager.get_config()
        configure_logging(config["log_level"], log_to_file=config["log_to_file"])
        self.max_workers = resolve_max_workers(config["max_workers"])
        self.output_dir = self.args.out or self.scenario.output_dir or config["output_dir"]
        success, message = ResultExporter.ensure_output_dir(self.output_dir)
        if not success:
            raise OSError(message)
        get_logger().log_command(self.args.command, {"scenario": self.scenario.source, "out": self.output_dir,
                                                     "workers": self.max_workers})

    def solver_settings(self, max_workers: Optional[int] = None) -> SolverSettings:
        return SolverSettings.from_config(self.config_manager.get_section("solver"),
                                          self.max_workers if max_workers is None else max_workers)

    def search_settings(self) -> GammaSearchSettings:
        section = deep_merge(self.config_manager.get_section("gamma_search"), self.scenario.game.gamma_search)
        if self.args.tol is not None and self.args.command in ("gamma-c", "sweep"):
            section["tol"] = self.args.tol
        return GammaSearchSettings.from_config(section)

    def resolve_gamma(self) -> Optional[float]:
        """γ 取 --gamma、game.gamma；都没有时取 gamma_margin·γ_c

        给出 game.gamma_reference 时 γ_c 按参考信道组计算，多个场景可共用同一 γ。
        返回 None 表示不存在有限的 γ_c
        """
        gamma = self.args.gamma if self.args.gamma is not None else self.scenario.game.gamma
        if gamma is not None:
            if gamma <= 0.0:
                raise ScenarioError(f"γ 必须为正，实际为 {gamma}")
            return float(gamma)
        margin = self.scenario.game.gamma_margin
        if margin is None:
            raise ScenarioError("需要 γ：在场景 game.gamma 或 game.gamma_margin 中给出，或使用 --gamma")
        with performance_monitor.section("gamma_search"):
            result = gamma_critical(self.gamma_reference_model(), self.search_settings(), self.solver_settings())
        if not result.found:
            TerminalUtils.print_warning(result.message)
            self.write_manifest("no_finite_gamma", EXIT_ANALYTIC_FAILURE,
                                {"gamma_margin": margin, "message": result.message})
            return None
        gamma = margin * result.gamma_c
        TerminalUtils.print_info(f"γ = {margin:g} × γ_c = {gamma:.6g}（γ_c ≈ {result.gamma_c:.6g}）")
        return gamma

    def gamma_reference_model(self) -> MjlsModel:
        model = self.scenario.model
        reference = self.scenario.game.gamma_reference
        if reference is None:
            return model
        for index, pair in enumerate(reference, start=1):
            for name, value in zip(CHANNEL_FIELDS, pair):
                model = with_channel(model, index, name, value)
        TerminalUtils.print_info(f"γ_c 按参考信道组计算: {list(reference)}")
        return model

    def resolve_horizon(self) -> Optional[int]:
        """None 表示无限时域"""
        if self.args.horizon is not None:
            if self.args.horizon < 1:
                raise ScenarioError("--horizon 必须 ≥ 1")
            return int(self.args.horizon)
        if self.scenario.game.infinite:
            return None
        return self.scenario.game.horizon

    def initial_state(self, x0: Optional[Tuple[float, ...]], default: float) -> np.ndarray:
        model = self.scenario.model
        return np.full(model.n, default) if x0 is None else np.array(x0, dtype=float)

    def require_valid_model(self) -> None:
        report = validate_model(self.scenario.model)
        if not report.passed:
            ResultDisplay.display_validation(report)
            names = ", ".join(finding.name for finding in report.failures())
            raise ScenarioError(f"模型未通过校验: {names}")

    def write_manifest(self, status: str, exit_code: int, details: Dict[str, Any]) -> None:
        """run.json：不含时间戳与线程数，重复运行字节一致"""
        config = self.config_manager.get_config()
        manifest = {
            "command": self.args.command,
            "status": status,
            "exit_code": exit_code,
            "scenario": os.path.basename(self.scenario.source),
            "parameters": {section: config[section] for section in MANIFEST_SECTIONS},
            "results": details,
        }
        self._check(ResultExporter.export_manifest(manifest, self.output_dir))

    @staticmethod
    def _check(outcome: Tuple[bool, str]) -> None:
        success, message = outcome
        if not success:
            raise OSError(message)
        get_logger().info(message)

    # ------------------------------------------------------------ 命令

    def check(self) -> int:
        """模型校验、弱可观测性、信道平稳概率"""
        model = self.scenario.model
        with performance_monitor.section("validate"):
            report = validate_model(model)
        ResultDisplay.display_validation(report)

        max_length = self.config_manager.get_section("observability")["max_length"]
        with performance_monitor.section("observability"):
            observability = weak_observability(model, max_length)
        ResultDisplay.display_observability(observability)

        try:
            stationary = stationary_success_vector(model.bank)
            outcome_probs = outcome_distribution(model.bank, STATIONARY).probs
            ResultDisplay.display_channels(stationary, outcome_probs)
        except DomainError as e:
            TerminalUtils.print_warning(str(e))
            stationary, outcome_probs = None, None

        if not report.passed:
            exit_code, status = EXIT_INPUT_ERROR, "invalid"
        elif not observability.observable:
            exit_code, status = EXIT_ANALYTIC_FAILURE, "not_observable"
        else:
            exit_code, status = EXIT_OK, "ok"
        self.write_manifest(status, exit_code, {
            "findings": [{"name": f.name, "passed": f.passed, "detail": f.detail} for f in report.findings],
            "observable": observability.observable,
            "witness_path": None if observability.witness_path is None
            else [r + 1 for r in observability.witness_path],
            "max_length_searched": observability.max_length_searched,
            "stationary_success": None if stationary is None else [float(p) for p in stationary],
            "stationary_outcome_distribution": None if outcome_probs is None else [float(p) for p in outcome_probs],
        })
        return exit_code

    def solve(self) -> int:
        """有限时域（写 value.csv 与各阶段增益）或无限时域（写平稳增益）"""
        self.require_valid_model()
        model = self.scenario.model
        gamma = self.resolve_gamma()
        if gamma is None:
            return EXIT_ANALYTIC_FAILURE
        horizon = self.resolve_horizon()
        settings = self.solver_settings()

        if horizon is None:
            with performance_monitor.section("infinite_horizon"):
                result = solve_infinite_horizon(model, gamma, settings=settings)
            details: Dict[str, Any] = {"gamma": gamma, "horizon": None, "iterations": result.iterations,
                                       "residual": result.residual}
            if not result.converged:
                TerminalUtils.print_warning(f"无限时域迭代结果: {result.status.value}（{result.iterations} 次迭代）")
                if result.failure is not None:
                    details["failure"] = self._failure_dict(result.failure)
                self.write_manifest(result.status.value, EXIT_ANALYTIC_FAILURE, details)
                return EXIT_ANALYTIC_FAILURE
            self._check(ResultExporter.export_stationary_gains(result.solution, self.output_dir))
            x0 = self.initial_state(self.scenario.game.x0, 1.0)
            details["game_value"] = result.solution.game_value(x0, self.scenario.game.r0 - 1)
            TerminalUtils.print_success(f"无限时域迭代收敛: {result.iterations} 次，残差 {result.residual:.3e}")
            self.write_manifest(result.status.value, EXIT_OK, details)
            return EXIT_OK

        x0 = self.initial_state(self.scenario.game.x0, 1.0)
        r0 = self.scenario.game.r0 - 1
        with performance_monitor.section("value_series"):
            series = value_series(model, gamma, horizon, x0, r0, settings=settings)
        self._check(ResultExporter.export_value_series(series, self.output_dir))
        ResultDisplay.display_value_series(series)
        details = {"gamma": gamma, "horizon": horizon, "x0": [float(v) for v in x0], "r0": r0 + 1,
                   "first_infeasible": series.first_infeasible, "diverged": series.diverged}

        if series.first_infeasible is not None or series.diverged:
            status = "infeasible" if series.first_infeasible is not None else "diverged"
            TerminalUtils.print_warning(f"博弈值序列{'不可行' if status == 'infeasible' else '发散'}，"
                                        f"已计算到 N={len(series.values)}")
            self.write_manifest(status, EXIT_ANALYTIC_FAILURE, details)
            return EXIT_ANALYTIC_FAILURE

        with performance_monitor.section("finite_horizon"):
            solution = solve_finite_horizon(model, gamma, horizon, settings=settings)
        if not solution.feasible:
            details["failure"] = self._failure_dict(solution.failure)
            self.write_manifest("infeasible", EXIT_ANALYTIC_FAILURE, details)
            return EXIT_ANALYTIC_FAILURE
        self._check(ResultExporter.export_finite_gains(solution, self.output_dir))
        details["game_value"] = solution.game_value(x0, r0)
        details["collapse_spread"] = solution.collapse_spread
        TerminalUtils.print_success(f"有限时域求解完成: J_{horizon} = {details['game_value']:.10g}")
        self.write_manifest("feasible", EXIT_OK, details)
        return EXIT_OK

    def gamma_c(self) -> int:
        self.require_valid_model()
        search = self.search_settings()
        with performance_monitor.section("gamma_search"):
            result = gamma_critical(self.scenario.model, search, self.solver_settings())
        self._check(ResultExporter.export_gamma_search(result, self.output_dir))
        ResultDisplay.display_gamma_search(result)
        exit_code = EXIT_OK if result.found else EXIT_ANALYTIC_FAILURE
        self.write_manifest("found" if result.found else "no_finite_gamma", exit_code, {
            "gamma_c": result.gamma_c, "evaluations": len(result.bracket_log),
            "square_disturbance": result.square_disturbance, "message": result.message,
        })
        return exit_code

    def sweep(self) -> int:
        self.require_valid_model()
        spec = self.scenario.sweep
        if spec is None:
            raise ScenarioError("sweep 命令需要场景中的 sweep 段")
        # 点间并行，单点内部串行
        with performance_monitor.section("sweep"):
            table = sweep(self.scenario.model, spec.channel, spec.field_name, spec.grid, self.search_settings(),
                          self.solver_settings(max_workers=1), max_workers=self.max_workers)
        self._check(ResultExporter.export_sweep(table, self.output_dir))
        ResultDisplay.display_sweep(table)
        self.write_manifest("ok", EXIT_OK, {
            "channel": spec.channel, "field": spec.field_name,
            "points": len(table.points), "without_finite_gamma": sum(p.gamma_c is None for p in table.points),
        })
        return EXIT_OK

    def simulate(self) -> int:
        """用无限时域增益（或 N ≥ K 的有限时域增益）做蒙特卡洛仿真"""
        self.require_valid_model()
        model = self.scenario.model
        spec = self.scenario.simulation
        sim_config = self.config_manager.get_section("simulation")
        steps = spec.steps or sim_config["steps"]
        trials = spec.trials or sim_config["trials"]
        seed = sim_config["seed"] if self.args.seed is not None or spec.seed is None else spec.seed
        input_policy = spec.input_policy or sim_config["input_policy"]
        gamma = self.resolve_gamma()
        if gamma is None:
            return EXIT_ANALYTIC_FAILURE
        horizon = self.resolve_horizon()
        settings = self.solver_settings()

        with performance_monitor.section("gains"):
            if horizon is None:
                result = solve_infinite_horizon(model, gamma, settings=settings)
                if not result.converged:
                    TerminalUtils.print_warning(f"无限时域迭代结果: {result.status.value}，无法仿真")
                    self.write_manifest(result.status.value, EXIT_ANALYTIC_FAILURE, {"gamma": gamma})
                    return EXIT_ANALYTIC_FAILURE
                gains = result.solution
            else:
                if horizon < steps:
                    raise ScenarioError(f"有限时域增益只覆盖 N={horizon} 步，少于仿真步数 K={steps}")
                gains = solve_finite_horizon(model, gamma, horizon, settings=settings)
                if not gains.feasible:
                    self.write_manifest("infeasible", EXIT_ANALYTIC_FAILURE,
                                        {"gamma": gamma, "failure": self._failure_dict(gains.failure)})
                    return EXIT_ANALYTIC_FAILURE

        x0 = self.initial_state(spec.x0, 0.0)
        r0 = spec.r0 - 1
        disturbance = spec.disturbance.build()
        with performance_monitor.section("simulate"):
            record = simulate(model, gains, disturbance, x0, r0, steps, seed, 0, input_policy)
            summary = monte_carlo(model, gains, disturbance, x0, r0, steps, trials, seed, input_policy,
                                  max_workers=self.max_workers)
        self._check(ResultExporter.export_trajectory(record, self.output_dir))
        self._check(ResultExporter.export_summary(summary, self.output_dir))
        ResultDisplay.display_summary(summary)
        details = summary_manifest(summary)
        details.update(x0=[float(v) for v in x0], r0=spec.r0, horizon=horizon, disturbance=spec.disturbance.kind)
        self.write_manifest("ok", EXIT_OK, details)
        return EXIT_OK

    @staticmethod
    def _failure_dict(failure) -> Dict[str, Any]:
        return {"stage": failure.stage, "mode": failure.mode + 1, "prior": failure.prior, "reason": failure.reason}

    # ------------------------------------------------------------ 调度

    def _get_command_handlers(self) -> Dict[str, Callable[[], int]]:
        return {
            "check": self.check,
            "solve": self.solve,
            "gamma-c": self.gamma_c,
            "sweep": self.sweep,
            "simulate": self.simulate,
        }

    def run(self) -> int:
        """执行命令并返回退出码：0 成功，1 输入错误，2 不可行/发散等分析结论"""
        performance_monitor.reset()
        performance_monitor.start()
        try:
            with performance_monitor.section("prepare"):
                self.prepare()
            return self._get_command_handlers()[self.args.command]()
        except ScenarioError as e:
            get_logger().log_failure("场景错误", str(e), EXIT_INPUT_ERROR)
            TerminalUtils.print_error(str(e), EXIT_INPUT_ERROR, "检查场景文件与 docs/scenario.schema.json")
            return EXIT_INPUT_ERROR
        except MJLSError as e:
            get_logger().log_failure(type(e).__name__, str(e), EXIT_INPUT_ERROR)
            TerminalUtils.print_error(str(e), EXIT_INPUT_ERROR)
            return EXIT_INPUT_ERROR
        except OSError as e:
            get_logger().log_failure("文件错误", str(e), EXIT_INPUT_ERROR)
            TerminalUtils.print_error(str(e), EXIT_INPUT_ERROR, "检查输出目录是否可写")
            return EXIT_INPUT_ERROR
        finally:
            performance_monitor.stop()


class _ArgumentParser(argparse.ArgumentParser):
    """参数错误按输入错误退出（1），退出码 2 留给分析结论"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        TerminalUtils.print_error(f"参数错误: {message}", EXIT_INPUT_ERROR)
        sys.exit(EXIT_INPUT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog=PROG_NAME, description="多信道丢包下马尔可夫跳变线性系统的 H∞ 极小极大控制")
    parser.add_argument("command", choices=SCENARIO_COMMANDS, help="要执行的命令")
    parser.add_argument("--scenario", required=True, help="场景 JSON 文件路径")
    parser.add_argument("--gamma", type=float, help="衰减水平 γ，覆盖场景 game.gamma")
    parser.add_argument("--horizon", type=int, help="有限时域长度 N，覆盖场景 game.horizon")
    parser.add_argument("--tol", type=float, help="solve: 不动点容差；gamma-c/sweep: 二分容差")
    parser.add_argument("--seed", type=int, help="仿真随机种子")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--workers", type=int, help="并行线程数（默认按 CPU 核数）")
    parser.add_argument("--log-level", help="日志级别 DEBUG/INFO/WARNING/ERROR")
    parser.add_argument("--config", help="配置文件路径（默认使用程序目录下的 config.json）")
    parser.add_argument("--no-color", action="store_true", help="关闭终端颜色")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.no_color:
        TerminalUtils.enabled = False
    print(TerminalUtils.colored(f"{PROG_NAME} {args.command}", Color.BRIGHT_CYAN, Color.BOLD))
    return MJLSHinfTool(args).run()


if __name__ == "__main__":
    sys.exit(main())
