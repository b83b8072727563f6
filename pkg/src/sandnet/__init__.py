"""Network-QoS-to-product-quality simulator for remotely controlled sanding."""

from .netchan import NetworkConditions, TimedMessage, channel_create, channel_poll, channel_send
from .path import ControllerParams, PlannedTrajectory, Pose, TrajectoryLog, plan_raster, simulate_follow
from .surface import DeviationMap, GridSpec, Heatmap, deviation_map, replay_trajectory, stamp_imprint
from .quality import ProductQuality, TransportInstance, build_transport, emd_exact, score_product
from .kpi import RobotKpis, compute_kpis
from .utility import Emos, ExogenousFactors, KpiRequirement, UtilitySpec, emos_cust, emos_robot
from .config import ExperimentConfig, load_config, save_config
from .experiment import demo_loop, run_once, sweep

__version__ = "0.1.0"

__all__ = [
    "NetworkConditions",
    "TimedMessage",
    "channel_create",
    "channel_send",
    "channel_poll",
    "Pose",
    "PlannedTrajectory",
    "TrajectoryLog",
    "ControllerParams",
    "plan_raster",
    "simulate_follow",
    "GridSpec",
    "Heatmap",
    "DeviationMap",
    "stamp_imprint",
    "replay_trajectory",
    "deviation_map",
    "TransportInstance",
    "ProductQuality",
    "build_transport",
    "emd_exact",
    "score_product",
    "RobotKpis",
    "compute_kpis",
    "Emos",
    "ExogenousFactors",
    "KpiRequirement",
    "UtilitySpec",
    "emos_robot",
    "emos_cust",
    "ExperimentConfig",
    "load_config",
    "save_config",
    "run_once",
    "sweep",
    "demo_loop",
]
