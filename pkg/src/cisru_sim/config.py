"""Run configuration: per-module dataclasses, scenario overrides, and the
CISRU_SIM_CONFIG override file (applied last)."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

from .manip import ToolKind
from .nav import NavConfig
from .percept import PerceptConfig
from .supervise import SuperviseConfig


@dataclass
class SimTiming:
    dt: float = 1.0
    v_max: float = 0.5
    omega_max: float = 0.8
    astronaut_speed: float = 0.8
    sensor_range: float = 6.0
    sensor_fov: float = 2 * math.pi
    reveal_every: int = 1
    fusion_sync_interval: int = 50
    max_ticks: int = 2000


@dataclass
class NetConfig:
    latency_ticks: int = 0
    drop_probability: float = 0.0
    retransmit_period: int = 5


@dataclass
class ExecConfig:
    interest_threshold: float = 0.7
    max_retries: int = 3
    transfer_range: float = 2.0
    rendezvous_tolerance: float = 1.0
    slot_approach_distance: float = 0.6
    lane_spacing: float = 0.0  # 0 = use sensor range


@dataclass
class ManipConfig:
    link_lengths: tuple[float, float] = (0.6, 0.5)
    mount_offset: tuple[float, float, float] = (0.3, 0.0, 0.0)
    localize_sigma: float = 0.01
    localize_range: float = 3.0
    scoop_range: float = 0.8
    sampling_tool: str = ToolKind.SHOVEL.value


@dataclass
class RunConfig:
    sim: SimTiming = field(default_factory=SimTiming)
    nav: NavConfig = field(default_factory=NavConfig)
    percept: PerceptConfig = field(default_factory=PerceptConfig)
    supervise: SuperviseConfig = field(default_factory=SuperviseConfig)
    net: NetConfig = field(default_factory=NetConfig)
    executive: ExecConfig = field(default_factory=ExecConfig)
    manip: ManipConfig = field(default_factory=ManipConfig)


_SECTIONS = {
    "sim": SimTiming,
    "nav": NavConfig,
    "percept": PerceptConfig,
    "supervise": SuperviseConfig,
    "net": NetConfig,
    "executive": ExecConfig,
    "manip": ManipConfig,
}


def _apply_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    for section_name, values in overrides.items():
        if section_name not in _SECTIONS:
            raise ValueError(f"config: unknown section {section_name!r}")
        section = getattr(config, section_name)
        names = {f.name for f in dataclasses.fields(section)}
        for key, value in values.items():
            if key not in names:
                raise ValueError(f"config: unknown key {section_name}.{key}")
            current = getattr(section, key)
            if isinstance(current, tuple):
                value = tuple(value)
            setattr(section, key, value)
    return config


def build_config(scenario_overrides: dict | None = None) -> RunConfig:
    """Defaults, then scenario `config` section, then the file named by the
    CISRU_SIM_CONFIG environment variable."""
    config = RunConfig()
    if scenario_overrides:
        _apply_overrides(config, scenario_overrides)
    env_path = os.environ.get("CISRU_SIM_CONFIG")
    if env_path:
        with open(env_path, "r", encoding="utf-8") as fh:
            _apply_overrides(config, json.load(fh))
    # keep NavConfig motion limits aligned with the kernel's
    config.nav.v_max = config.sim.v_max
    config.nav.omega_max = config.sim.omega_max
    return config
