"""Deterministic 2D navigation benchmark with an FSM safety controller."""
from .bench import EpisodeRecord, EnvScore, SuiteConfig, optimal_time, run_suite, score_trial
from .episode import EpisodeResult, Outcome, run_episode
from .fsm import ControllerConfig, FsmController, FsmState
from .geometry import Pose2D, RobotFootprint, Twist2D
from .grid import OccupancyGrid
from .safety import ForwardSafety, SafetyMode
from .sim import LaserScan, LidarConfig, SimConfig
from .worldgen import GenParams, WorldSpec, generate_batch, generate_world

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig", "EnvScore", "EpisodeRecord", "EpisodeResult", "ForwardSafety", "FsmController",
    "FsmState", "GenParams", "LaserScan", "LidarConfig", "OccupancyGrid", "Outcome", "Pose2D",
    "RobotFootprint", "SafetyMode", "SimConfig", "SuiteConfig", "Twist2D", "WorldSpec",
    "generate_batch", "generate_world", "optimal_time", "run_episode", "run_suite", "score_trial",
]
