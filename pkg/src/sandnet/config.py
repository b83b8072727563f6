"""Experiment configuration: one structured file drives every output byte.

Field names carry explicit units. A config round-trips through YAML, and
its canonical JSON hash keys the output directory of each run, so a rerun
with the same effective config lands in the same place with identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .netchan import NetworkConditions
from .path import ControllerParams
from .utility import UtilitySpec, ExogenousFactors, default_sanding_spec, default_customer_spec

__all__ = ["ExperimentConfig", "load_config", "save_config", "DEFAULT_CONFIG_ENV"]

DEFAULT_CONFIG_ENV = "SANDNET_CONFIG"


@dataclass
class ExperimentConfig:
    # surface and grid
    surface_width_mm: float = 200.0
    surface_height_mm: float = 100.0
    grid_cell_size_mm: float = 1.0

    # plan
    tool_radius_mm: float = 12.5
    overlap: float = 0.55
    z_ref_mm: float = 40.0
    nominal_speed_mm_s: float = 120.0

    # controller
    control_rate_hz: float = 100.0
    gain_per_s: float = 3.0
    max_speed_mm_s: float = 600.0
    max_accel_mm_s2: float = 500.0
    waypoint_capture_radius_mm: float | None = None  # default: tool_radius / 4
    z_compliance_mm_per_mm_s2: float = 0.006
    orientation_noise_std_rad: float = 0.02
    command_payload_bytes: int = 0

    # network
    delay_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_rate: float = 0.0
    bandwidth_kbps: float = 1000.0
    seed: int = 20260811

    # simulation
    log_resolution_mm: float = 0.5
    duration_limit_s: float = 150.0
    symmetric_delay: bool = False

    # quality scoring
    deviation_window_cells: int | None = None  # default: odd(8 * tool_radius / cell)
    edge_margin_mm: float | None = None  # default: min(1.5 * tool_radius, dims / 5)
    downsample_max_side: int = 24
    mass_per_sample: float = 1.0

    # sweep
    sweep_delays_ms: list[float] = field(default_factory=lambda: [float(d) for d in range(0, 101, 10)])
    sweep_tool_radii_mm: list[float] = field(default_factory=lambda: [12.5, 25.0, 37.5])

    # utility chain
    robot_utility: dict = field(default_factory=lambda: default_sanding_spec().to_dict())
    customer_utility: dict = field(
        default_factory=lambda: default_customer_spec(emd_good=0.01, emd_bad=0.03).to_dict()
    )
    material_score: float = 5.0
    tool_score: float = 5.0

    # nrm / demo loop
    nrm_host: str = "127.0.0.1"
    nrm_port: int = 47474
    nrm_latency_floor_ms: float = 1.0
    nrm_latency_ceiling_ms: float = 200.0
    nrm_bandwidth_cap_kbps: float = 10000.0
    demo_start_budget_ms: float = 100.0
    demo_round_limit: int = 10

    output_dir: str = "runs"

    # ------------------------------------------------------------------
    def validate(self) -> None:
        self.conditions().validate()
        self.controller().validate()
        self.robot_spec().validate()
        self.customer_spec().validate()
        self.exogenous().validate()
        if self.surface_width_mm <= 2 * self.tool_radius_mm or self.surface_height_mm <= 2 * self.tool_radius_mm:
            raise ValueError("surface too small for the tool")
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must be in [0,1)")
        if self.downsample_max_side < 1:
            raise ValueError("downsample_max_side must be >= 1")
        if self.log_resolution_mm <= 0:
            raise ValueError("log_resolution_mm must be > 0")

    # ---- derived pieces ----------------------------------------------
    def conditions(self, delay_ms: float | None = None, tool_radius: float | None = None) -> NetworkConditions:
        return NetworkConditions(
            delay_mean_ms=self.delay_ms if delay_ms is None else delay_ms,
            jitter_ms=self.jitter_ms,
            loss_rate=self.loss_rate,
            bandwidth_kbps=self.bandwidth_kbps,
            seed=self.seed,
        )

    def controller(self) -> ControllerParams:
        return ControllerParams(
            control_rate=self.control_rate_hz,
            gain=self.gain_per_s,
            max_speed=self.max_speed_mm_s,
            max_accel=self.max_accel_mm_s2,
            waypoint_capture_radius=self.waypoint_capture_radius_mm,
            z_compliance=self.z_compliance_mm_per_mm_s2,
            orientation_noise_std=self.orientation_noise_std_rad,
            command_payload_bytes=self.command_payload_bytes,
        )

    def robot_spec(self) -> UtilitySpec:
        return UtilitySpec.from_dict(self.robot_utility)

    def customer_spec(self) -> UtilitySpec:
        return UtilitySpec.from_dict(self.customer_utility)

    def exogenous(self) -> ExogenousFactors:
        return ExogenousFactors(material_score=self.material_score, tool_score=self.tool_score)

    def deviation_window(self, tool_radius: float | None = None) -> int:
        if self.deviation_window_cells is not None:
            return self.deviation_window_cells
        r = self.tool_radius_mm if tool_radius is None else tool_radius
        win = int(round(8.0 * r / self.grid_cell_size_mm))
        win += (win + 1) % 2
        cap = max(
            int(self.surface_width_mm / self.grid_cell_size_mm),
            int(self.surface_height_mm / self.grid_cell_size_mm),
        )
        cap += (cap + 1) % 2
        return min(win, cap)

    def edge_margin(self, tool_radius: float | None = None) -> float:
        if self.edge_margin_mm is not None:
            return self.edge_margin_mm
        r = self.tool_radius_mm if tool_radius is None else tool_radius
        return min(1.5 * r, self.surface_width_mm / 5.0, self.surface_height_mm / 5.0)

    # ---- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def content_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kwargs.items() if v is not None})
        return ExperimentConfig.from_dict(d)


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Load a YAML config file; missing path means built-in defaults."""
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    return ExperimentConfig.from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
