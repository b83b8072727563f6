"""Robot-control QoS metrics extracted from a plan and a trajectory log.

Four metric groups: XY trajectory error against the planned polyline,
tool speed statistics, Z deviation from the reference height, and the RMS
tilt of the tool axis away from the surface normal.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .path import PlannedTrajectory, TrajectoryLog

__all__ = [
    "RobotKpis",
    "trajectory_error",
    "velocity_stats",
    "z_distance",
    "orientation_error",
    "compute_kpis",
]

PHASES = ("scanning", "sanding")


@dataclass
class RobotKpis:
    traj_err_mean: float
    traj_err_max: float
    vel_mean: float
    vel_max: float
    vel_min: float
    vel_std: float
    z_dev_mean: float
    z_dev_max: float
    orient_err_rms: float
    phase: str = "sanding"

    def validate(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        numeric = {k: v for k, v in self.to_dict().items() if k != "phase"}
        for k, v in numeric.items():
            if v < 0 or not np.isfinite(v):
                raise ValueError(f"{k} must be finite and >= 0, got {v}")
        if not self.vel_min <= self.vel_mean <= self.vel_max:
            raise ValueError("velocity stats out of order")
        if self.traj_err_mean > self.traj_err_max or self.z_dev_mean > self.z_dev_max:
            raise ValueError("mean exceeds max")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RobotKpis":
        kpis = cls(**{k: (v if k == "phase" else float(v)) for k, v in d.items()})
        kpis.validate()
        return kpis


def _xy_polyline_distances(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Min distance from each XY point to the polyline, point-to-segment."""
    best = np.full(len(points), np.inf)
    for a, b in zip(polyline[:-1], polyline[1:]):
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.hypot(points[:, 0] - proj[:, 0], points[:, 1] - proj[:, 1])
        np.minimum(best, d, out=best)
    return best


def trajectory_error(plan: PlannedTrajectory, log: TrajectoryLog) -> tuple[float, float]:
    """(mean, max) XY distance from the stored samples to the planned path."""
    if not log.samples:
        raise ValueError("empty trajectory log")
    d = _xy_polyline_distances(log.xy(), plan.polyline())
    return float(d.mean()), float(d.max())


def velocity_stats(log: TrajectoryLog) -> tuple[float, float, float, float]:
    """(mean, max, min, std) of per-interval 3D speed on the time-uniform log."""
    poses = log.time_uniform()
    if len(poses) < 2:
        raise ValueError("need at least 2 samples for velocity statistics")
    arr = np.array([[p.t, p.x, p.y, p.z] for p in poses])
    dt = np.diff(arr[:, 0])
    if np.any(dt <= 0):
        raise ValueError("timestamps must be strictly increasing")
    disp = np.sqrt(np.sum(np.diff(arr[:, 1:4], axis=0) ** 2, axis=1))
    speed = disp / dt
    return float(speed.mean()), float(speed.max()), float(speed.min()), float(speed.std())


def z_distance(log: TrajectoryLog, z_ref: float) -> tuple[float, float]:
    """(mean, max) of |z - z_ref| over the stored samples."""
    if not log.samples:
        raise ValueError("empty trajectory log")
    dz = np.abs(np.array([p.z for p in log.samples]) - z_ref)
    return float(dz.mean()), float(dz.max())


def orientation_error(log: TrajectoryLog) -> float:
    """RMS tilt angle between the tool axis and the surface normal.

    The tool axis is the unit Z rotated by yaw-pitch-roll; its angle to the
    vertical depends only on roll and pitch: arccos(cos(pitch) * cos(roll)).
    """
    if not log.samples:
        raise ValueError("empty trajectory log")
    rp = np.array([[p.roll, p.pitch] for p in log.samples])
    tilt = np.arccos(np.clip(np.cos(rp[:, 0]) * np.cos(rp[:, 1]), -1.0, 1.0))
    return float(np.sqrt(np.mean(tilt**2)))


def compute_kpis(
    plan: PlannedTrajectory, log: TrajectoryLog, phase: str = "sanding"
) -> RobotKpis:
    te_mean, te_max = trajectory_error(plan, log)
    v_mean, v_max, v_min, v_std = velocity_stats(log)
    z_mean, z_max = z_distance(log, plan.z_ref)
    kpis = RobotKpis(
        traj_err_mean=te_mean,
        traj_err_max=te_max,
        vel_mean=v_mean,
        vel_max=v_max,
        vel_min=v_min,
        vel_std=v_std,
        z_dev_mean=z_mean,
        z_dev_max=z_max,
        orient_err_rms=orientation_error(log),
        phase=phase,
    )
    kpis.validate()
    return kpis
