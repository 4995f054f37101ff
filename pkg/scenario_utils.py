#!/usr/bin/env python3
# 场景文件模块 - 读取/校验/序列化 JSON 场景文件，错误定位到行列

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import CHANNEL_FIELDS, INPUT_POLICIES, MAX_CHANNELS, SCENARIO_FORMAT_VERSION
from error_utils import MJLSError, ScenarioError
from model_utils import MjlsModel, build_model
from simulation_service import (DisturbancePolicy, WaveformDisturbance, WorstCaseDisturbance, ZeroDisturbance,
                                damped_sinusoid)

DISTURBANCE_KINDS = ("zero", "waveform", "damped_sinusoid", "worst_case")
TOP_LEVEL_KEYS = ("format_version", "model", "game", "simulation", "sweep", "outputs", "settings")


@dataclass(frozen=True)
class DisturbanceSpec:
    """扰动描述；waveform 用 table，damped_sinusoid 用 amplitude/omega/decay，worst_case 可带 probe"""

    kind: str = "zero"
    table: Optional[Tuple[Tuple[float, ...], ...]] = None
    amplitude: float = 1.0
    omega: float = 0.2 * math.pi
    decay: float = 0.5
    probe: Optional["DisturbanceSpec"] = None

    def build(self) -> DisturbancePolicy:
        if self.kind == "zero":
            return ZeroDisturbance()
        if self.kind == "waveform":
            return WaveformDisturbance(np.array(self.table, dtype=float))
        if self.kind == "damped_sinusoid":
            return WaveformDisturbance(damped_sinusoid(self.amplitude, self.omega, self.decay))
        probe = self.probe.build() if self.probe is not None else None
        return WorstCaseDisturbance(probe)


@dataclass(frozen=True)
class GameSpec:
    gamma: Optional[float] = None
    gamma_margin: Optional[float] = None
    gamma_reference: Optional[Tuple[Tuple[float, float], ...]] = None
    horizon: Optional[int] = None
    infinite: bool = False
    gamma_search: Dict[str, Any] = field(default_factory=dict)
    x0: Optional[Tuple[float, ...]] = None
    r0: int = 1


@dataclass(frozen=True)
class SimulationSpec:
    x0: Optional[Tuple[float, ...]] = None
    r0: int = 1
    steps: Optional[int] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    input_policy: Optional[str] = None
    disturbance: DisturbanceSpec = DisturbanceSpec()


@dataclass(frozen=True)
class SweepSpec:
    channel: int
    field_name: str
    grid: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Scenario:
    """解析后的场景；模态编号 r0 在文件中从 1 开始"""

    model: MjlsModel
    game: GameSpec = GameSpec()
    simulation: SimulationSpec = SimulationSpec()
    sweep: Optional[SweepSpec] = None
    output_dir: Optional[str] = None
    settings: Dict[str, Any] = field(default_factory=dict)
    source: str = "<scenario>"


class _Locator:
    """在原始文本中按键路径查找位置，用于语义错误的行列号"""

    def __init__(self, text: str):
        self.text = text

    def position(self, path: Sequence[Any]) -> Tuple[Optional[int], Optional[int]]:
        offset, found = 0, None
        for key in path:
            if isinstance(key, int):
                continue
            index = self.text.find(f'"{key}"', offset)
            if index < 0:
                break
            offset = found = index
        if found is None:
            return None, None
        line = self.text.count("\n", 0, found) + 1
        column = found - (self.text.rfind("\n", 0, found) + 1) + 1
        return line, column

    def error(self, path: Sequence[Any], message: str) -> ScenarioError:
        line, column = self.position(path)
        where = ".".join(str(p) if isinstance(p, str) else f"[{p}]" for p in path)
        return ScenarioError(f"{where}: {message}" if where else message, line, column)


class _Reader:
    """带路径的取值工具，所有错误都转换为 ScenarioError"""

    def __init__(self, locator: _Locator):
        self.locator = locator

    def section(self, data: Dict[str, Any], key: str, path: Sequence[Any], required: bool = False) -> Dict[str, Any]:
        value = data.get(key)
        if value is None:
            if required:
                raise self.locator.error(list(path) + [key], "缺少必填项")
            return {}
        if not isinstance(value, dict):
            raise self.locator.error(list(path) + [key], "必须是对象")
        return value

    def number(self, data: Dict[str, Any], key: str, path: Sequence[Any], default=None, required: bool = False,
               integer: bool = False, minimum: Optional[float] = None):
        value = data.get(key, default)
        if value is None:
            if required:
                raise self.locator.error(list(path) + [key], "缺少必填项")
            return None
        expected = int if integer else (int, float)
        if isinstance(value, bool) or not isinstance(value, expected):
            raise self.locator.error(list(path) + [key], f"必须是{'整数' if integer else '数值'}，实际为 {value!r}")
        if not math.isfinite(value):
            raise self.locator.error(list(path) + [key], "必须是有限值")
        if minimum is not None and value < minimum:
            raise self.locator.error(list(path) + [key], f"必须 ≥ {minimum:g}，实际为 {value!r}")
        return value

    def vector(self, data: Dict[str, Any], key: str, path: Sequence[Any]) -> Optional[Tuple[float, ...]]:
        value = data.get(key)
        if value is None:
            return None
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value):
            raise self.locator.error(list(path) + [key], "必须是数值数组")
        return tuple(float(v) for v in value)

    def matrix(self, value: Any, path: Sequence[Any]) -> List[List[float]]:
        if (not isinstance(value, list) or not value or
                not all(isinstance(row, list) and row for row in value) or
                not all(isinstance(v, (int, float)) and not isinstance(v, bool) for row in value for v in row)):
            raise self.locator.error(path, "必须是按行排列的非空数值二维数组")
        if len({len(row) for row in value}) != 1:
            raise self.locator.error(path, "各行长度不一致")
        return [[float(v) for v in row] for row in value]


def _parse_channels(reader: _Reader, raw_channels: Any, path: List[Any], max_channels: int
                    ) -> List[Tuple[float, float]]:
    """信道数组，每项 {stay_good, recover}"""
    if not isinstance(raw_channels, list) or not raw_channels:
        raise reader.locator.error(path, "必须是非空数组")
    if len(raw_channels) > max_channels:
        raise reader.locator.error(path, f"信道数 {len(raw_channels)} 超过上限 {max_channels}")
    channels = []
    for index, raw in enumerate(raw_channels):
        if not isinstance(raw, dict):
            raise reader.locator.error(path + [index], "每个信道必须是对象")
        channels.append(tuple(reader.number(raw, name, path + [index], required=True) for name in CHANNEL_FIELDS))
    return channels


def _parse_model(reader: _Reader, data: Dict[str, Any], max_channels: int) -> MjlsModel:
    path = ["model"]
    raw_modes = data.get("modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise reader.locator.error(path + ["modes"], "必须是非空数组")
    modes = []
    for index, raw in enumerate(raw_modes):
        if not isinstance(raw, dict):
            raise reader.locator.error(path + ["modes", index], "每个模态必须是对象")
        modes.append({key: reader.matrix(raw.get(key), path + ["modes", index, key])
                      for key in ("A", "B", "C", "D", "D1")})

    transition = reader.matrix(data.get("transition"), path + ["transition"])

    channels = _parse_channels(reader, data.get("channels"), path + ["channels"], max_channels)

    terminal = data.get("terminal_weight")
    if terminal is not None:
        terminal = reader.matrix(terminal, path + ["terminal_weight"])

    try:
        return build_model(modes, transition, channels, terminal)
    except MJLSError as e:
        raise reader.locator.error(path, str(e)) from e


def _parse_disturbance(reader: _Reader, data: Dict[str, Any], path: List[Any], allow_probe: bool = True
                       ) -> DisturbanceSpec:
    kind = data.get("kind", "zero")
    if kind not in DISTURBANCE_KINDS:
        raise reader.locator.error(path + ["kind"], f"未知扰动类型 {kind!r}，可选 {DISTURBANCE_KINDS}")
    table = None
    if kind == "waveform":
        raw = data.get("table")
        if not isinstance(raw, list) or not raw:
            raise reader.locator.error(path + ["table"], "waveform 扰动需要非空采样表")
        rows = [row if isinstance(row, list) else [row] for row in raw]
        table = tuple(tuple(row) for row in reader.matrix(rows, path + ["table"]))
    probe = None
    if kind == "worst_case" and data.get("probe") is not None:
        if not allow_probe:
            raise reader.locator.error(path + ["probe"], "探测波形不能再嵌套探测波形")
        probe = _parse_disturbance(reader, reader.section(data, "probe", path), path + ["probe"], allow_probe=False)
        if probe.kind not in ("waveform", "damped_sinusoid"):
            raise reader.locator.error(path + ["probe", "kind"], "探测波形必须是 waveform 或 damped_sinusoid")
    return DisturbanceSpec(
        kind=kind,
        table=table,
        amplitude=float(reader.number(data, "amplitude", path, default=1.0)),
        omega=float(reader.number(data, "omega", path, default=0.2 * math.pi)),
        decay=float(reader.number(data, "decay", path, default=0.5, minimum=0.0)),
        probe=probe,
    )


def _parse_gamma_reference(reader: _Reader, raw: Any, model: MjlsModel, max_channels: int
                          ) -> Optional[Tuple[Tuple[float, float], ...]]:
    """γ_c 参考信道组：与 model.channels 同形，各概率在 [0, 1] 内"""
    if raw is None:
        return None
    path = ["game", "gamma_reference"]
    channels = _parse_channels(reader, raw, path, max_channels)
    if len(channels) != model.m:
        raise reader.locator.error(path, f"信道数应与模型一致（m={model.m}），实际为 {len(channels)}")
    for index, pair in enumerate(channels):
        for name, value in zip(CHANNEL_FIELDS, pair):
            if not 0.0 <= value <= 1.0:
                raise reader.locator.error(path + [index, name], f"概率必须在 [0, 1] 内，实际为 {value}")
    return tuple((float(a), float(b)) for a, b in channels)


def _check_state(reader: _Reader, model: MjlsModel, x0: Optional[Tuple[float, ...]], r0: int,
                 path: List[Any]) -> None:
    if x0 is not None and len(x0) != model.n:
        raise reader.locator.error(path + ["x0"], f"长度应为 n={model.n}，实际为 {len(x0)}")
    if not 1 <= r0 <= model.num_modes:
        raise reader.locator.error(path + ["r0"], f"初始模态应在 1..{model.num_modes}，实际为 {r0}")


def parse_scenario(text: str, source: str = "<scenario>", max_channels: int = MAX_CHANNELS) -> Scenario:
    """解析场景文本

    Raises:
        ScenarioError: JSON 语法错误、缺项、类型或维度错误，带行列号
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"JSON 语法错误: {e.msg}", e.lineno, e.colno) from e
    locator = _Locator(text)
    reader = _Reader(locator)
    if not isinstance(data, dict):
        raise ScenarioError("场景文件顶层必须是对象", 1, 1)
    unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise locator.error([unknown[0]], f"未知的顶层字段，可用字段 {TOP_LEVEL_KEYS}")
    version = data.get("format_version")
    if version != SCENARIO_FORMAT_VERSION:
        raise locator.error(["format_version"], f"只支持 format_version={SCENARIO_FORMAT_VERSION}，实际为 {version!r}")

    model = _parse_model(reader, reader.section(data, "model", [], required=True), max_channels)

    raw_game = reader.section(data, "game", [])
    game_search = reader.section(raw_game, "gamma_search", ["game"])
    infinite = raw_game.get("infinite", False)
    if not isinstance(infinite, bool):
        raise locator.error(["game", "infinite"], "必须是布尔值")
    game = GameSpec(
        gamma=reader.number(raw_game, "gamma", ["game"], minimum=0.0),
        gamma_margin=reader.number(raw_game, "gamma_margin", ["game"], minimum=1.0),
        gamma_reference=_parse_gamma_reference(reader, raw_game.get("gamma_reference"), model, max_channels),
        horizon=reader.number(raw_game, "horizon", ["game"], integer=True, minimum=1),
        infinite=infinite,
        gamma_search=dict(game_search),
        x0=reader.vector(raw_game, "x0", ["game"]),
        r0=reader.number(raw_game, "r0", ["game"], default=1, integer=True),
    )
    _check_state(reader, model, game.x0, game.r0, ["game"])

    raw_sim = reader.section(data, "simulation", [])
    input_policy = raw_sim.get("input_policy")
    if input_policy is not None and input_policy not in INPUT_POLICIES:
        raise locator.error(["simulation", "input_policy"], f"必须是 {INPUT_POLICIES} 之一")
    simulation = SimulationSpec(
        x0=reader.vector(raw_sim, "x0", ["simulation"]),
        r0=reader.number(raw_sim, "r0", ["simulation"], default=1, integer=True),
        steps=reader.number(raw_sim, "steps", ["simulation"], integer=True, minimum=1),
        trials=reader.number(raw_sim, "trials", ["simulation"], integer=True, minimum=1),
        seed=reader.number(raw_sim, "seed", ["simulation"], integer=True, minimum=0),
        input_policy=input_policy,
        disturbance=_parse_disturbance(reader, reader.section(raw_sim, "disturbance", ["simulation"]),
                                       ["simulation", "disturbance"]),
    )
    _check_state(reader, model, simulation.x0, simulation.r0, ["simulation"])
    table = simulation.disturbance.table
    if table is not None and len(table[0]) not in (1, model.s):
        raise locator.error(["simulation", "disturbance", "table"], f"每行长度应为 1 或 s={model.s}")

    sweep = None
    if data.get("sweep") is not None:
        raw_sweep = reader.section(data, "sweep", [])
        field_name = raw_sweep.get("field")
        if field_name not in CHANNEL_FIELDS:
            raise locator.error(["sweep", "field"], f"必须是 {CHANNEL_FIELDS} 之一")
        channel = reader.number(raw_sweep, "channel", ["sweep"], required=True, integer=True)
        if not 1 <= channel <= model.m:
            raise locator.error(["sweep", "channel"], f"信道编号应在 1..{model.m}")
        grid = reader.vector(raw_sweep, "grid", ["sweep"])
        if not grid:
            raise locator.error(["sweep", "grid"], "必须是非空数值数组")
        sweep = SweepSpec(channel, field_name, grid)

    raw_outputs = reader.section(data, "outputs", [])
    output_dir = raw_outputs.get("dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise locator.error(["outputs", "dir"], "必须是字符串")

    return Scenario(model=model, game=game, simulation=simulation, sweep=sweep, output_dir=output_dir,
                    settings=dict(reader.section(data, "settings", [])), source=source)


def load_scenario(path: str, max_channels: int = MAX_CHANNELS) -> Scenario:
    """读取场景文件；文件不可读同样报 ScenarioError"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ScenarioError(f"无法读取场景文件 {path}: {e.strerror or e}") from e
    return parse_scenario(text, source=os.path.abspath(path), max_channels=max_channels)


def _matrix_list(matrix: np.ndarray) -> List[List[float]]:
    return [[float(v) for v in row] for row in np.asarray(matrix)]


def _disturbance_dict(spec: DisturbanceSpec) -> Dict[str, Any]:
    data: Dict[str, Any] = {"kind": spec.kind}
    if spec.kind == "waveform":
        data["table"] = [list(row) for row in spec.table]
    if spec.kind == "damped_sinusoid":
        data.update(amplitude=spec.amplitude, omega=spec.omega, decay=spec.decay)
    if spec.probe is not None:
        data["probe"] = _disturbance_dict(spec.probe)
    return data


def serialize_scenario(scenario: Scenario) -> Dict[str, Any]:
    """场景转回 JSON 对象；parse(serialize(s)) 与 s 逐字段相同"""
    model = scenario.model
    data: Dict[str, Any] = {
        "format_version": SCENARIO_FORMAT_VERSION,
        "model": {
            "modes": [{key: _matrix_list(getattr(mode, key)) for key in ("A", "B", "C", "D", "D1")}
                      for mode in model.modes],
            "transition": _matrix_list(model.transition),
            "channels": [{"stay_good": c.stay_good, "recover": c.recover} for c in model.bank.channels],
            "terminal_weight": _matrix_list(model.terminal_weight),
        },
    }
    game = scenario.game
    data["game"] = {"gamma": game.gamma, "gamma_margin": game.gamma_margin, "horizon": game.horizon,
                    "infinite": game.infinite, "gamma_search": dict(game.gamma_search), "r0": game.r0}
    if game.gamma_reference is not None:
        data["game"]["gamma_reference"] = [dict(zip(CHANNEL_FIELDS, pair)) for pair in game.gamma_reference]
    if game.x0 is not None:
        data["game"]["x0"] = list(game.x0)
    sim = scenario.simulation
    data["simulation"] = {"r0": sim.r0, "steps": sim.steps, "trials": sim.trials, "seed": sim.seed,
                          "input_policy": sim.input_policy, "disturbance": _disturbance_dict(sim.disturbance)}
    if sim.x0 is not None:
        data["simulation"]["x0"] = list(sim.x0)
    if scenario.sweep is not None:
        data["sweep"] = {"channel": scenario.sweep.channel, "field": scenario.sweep.field_name,
                         "grid": list(scenario.sweep.grid)}
    if scenario.output_dir is not None:
        data["outputs"] = {"dir": scenario.output_dir}
    if scenario.settings:
        data["settings"] = dict(scenario.settings)
    return data


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(serialize_scenario(scenario), indent=2, ensure_ascii=False) + "\n"
