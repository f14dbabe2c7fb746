from .kernel import KERNEL_NAME, available_kernels, march
from .planner import (
    UNREACHABLE,
    GoalInObstacle,
    NavConfig,
    Path,
    Unreachable,
    arrival_time,
    dump_field,
    extract_path,
    follow,
    load_field,
    obstacle_distance,
    plan,
    speed_map,
)

__all__ = [
    "KERNEL_NAME",
    "available_kernels",
    "march",
    "UNREACHABLE",
    "GoalInObstacle",
    "NavConfig",
    "Path",
    "Unreachable",
    "arrival_time",
    "dump_field",
    "extract_path",
    "follow",
    "load_field",
    "obstacle_distance",
    "plan",
    "speed_map",
]
