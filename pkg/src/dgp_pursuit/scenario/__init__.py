"""Target motion, training data, closed-loop runs and reports."""

from .config import ConfigError, ScenarioConfig, from_dict, load_config
from .dataset import EmptySectorError, ExpertRegions, generate_dataset
from .report import gain_condition_report
from .simulate import RunMetrics, RunTrace, run
from .target import TargetMotion, target_velocity_duffing, target_velocity_square

__all__ = [
    "ConfigError", "ScenarioConfig", "from_dict", "load_config",
    "EmptySectorError", "ExpertRegions", "generate_dataset",
    "gain_condition_report",
    "RunMetrics", "RunTrace", "run",
    "TargetMotion", "target_velocity_duffing", "target_velocity_square",
]
