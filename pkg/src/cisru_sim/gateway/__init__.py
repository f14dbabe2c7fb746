from .events import EventLog, EventRecord, LogCorrupt, read_log
from .runner import ReplayReport, SimKernel, replay, run_headless
from .scenario import ScenarioSpec, load_scenario_file, parse_scenario

__all__ = [
    "EventLog",
    "EventRecord",
    "LogCorrupt",
    "read_log",
    "ReplayReport",
    "SimKernel",
    "replay",
    "run_headless",
    "ScenarioSpec",
    "load_scenario_file",
    "parse_scenario",
]
