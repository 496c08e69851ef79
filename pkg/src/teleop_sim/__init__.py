"""Discrete-time leader-follower teleoperation simulator with pluggable
transport delay models, tracking-error metrics and a nonparametric
statistics battery."""

__version__ = "0.1.0"

from .config import ContactEvent, ScenarioConfig
from .core import ControlPacket, Direction, JointVector, RngStream, derive_seed
from .dynamics import ArmModel, ArmState, ControlGains, OperatorTrajectory
from .kernel import BACKEND
from .metrics import error_index, error_series, timing_stats
from .simulator import RunFailure, RunTrace, run_batch, run_scenario
from .stats import compare_conditions, friedman, ks_normality, wilcoxon_signed_rank
from .transport import DelaySampler, TransportConfig, preset, submit

__all__ = [
    "ArmModel", "ArmState", "BACKEND", "ContactEvent", "ControlGains", "ControlPacket", "DelaySampler",
    "Direction", "JointVector", "OperatorTrajectory", "RngStream", "RunFailure", "RunTrace",
    "ScenarioConfig", "TransportConfig", "compare_conditions", "derive_seed", "error_index",
    "error_series", "friedman", "ks_normality", "preset", "run_batch", "run_scenario", "submit",
    "timing_stats", "wilcoxon_signed_rank",
]
