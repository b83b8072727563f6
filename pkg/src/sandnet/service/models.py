"""Pydantic request/response schemas for the HTTP service.

The experiment config travels as a plain dict validated by the core
dataclass (one source of truth for defaults); the schemas here shape the
envelopes and the typed responses.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class ConfigPayload(BaseModel):
    """Overrides onto the built-in experiment defaults."""

    config: dict[str, Any] = Field(default_factory=dict)


class PlanRequest(BaseModel):
    width_mm: float = 200.0
    height_mm: float = 100.0
    tool_radius_mm: float = 12.5
    overlap: float = 0.55


class PlanResponse(BaseModel):
    waypoints: list[tuple[float, float]]
    lane_spacing_mm: float
    path_length_mm: float


class KpiRecord(BaseModel):
    traj_err_mean: float
    traj_err_max: float
    vel_mean: float
    vel_max: float
    vel_min: float
    vel_std: float
    z_dev_mean: float
    z_dev_max: float
    orient_err_rms: float
    phase: str


class RunRequest(ConfigPayload):
    out_dir: Optional[str] = None


class RunResponse(BaseModel):
    config_hash: str
    complete: bool
    samples: int
    kpis: KpiRecord
    emd: float
    emos_robot: float
    emos_cust: float
    out_dir: Optional[str] = None


class SweepRequest(ConfigPayload):
    out_dir: Optional[str] = None
    workers: int = 1


class SweepRow(BaseModel):
    tool_radius: float
    delay_ms: float
    emd: float
    emos_robot: float
    kpis: KpiRecord


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    out_dir: Optional[str] = None


class EmdRequest(BaseModel):
    """Deviation grid to score: rows of signed cell masses."""

    cells: list[list[float]]
    cell_size_mm: float = 1.0
    downsample: int = 1


class EmdResponse(BaseModel):
    emd: float
    work: float
    supplies: int
    demands: int


class CalibrationRowModel(BaseModel):
    delay_ms: float
    kpis: KpiRecord


class TranslateRequest(BaseModel):
    utility: dict[str, Any]
    table: list[CalibrationRowModel]
    defaults_bandwidth_kbps: float = 1000.0
    defaults_loss_budget: float = 0.0


class TranslateResponse(BaseModel):
    latency_budget_ms: float
    jitter_budget_ms: float
    loss_budget: float
    bandwidth_kbps: float
    feasible: bool
    reason: Optional[str] = None


class DemoLoopRequest(ConfigPayload):
    mode: Literal["simple", "detailed"] = "detailed"
    server_host: Optional[str] = None
    server_port: Optional[int] = None
    calibration: Optional[list[CalibrationRowModel]] = None
    out_dir: Optional[str] = None


class DemoLoopResponse(BaseModel):
    mode: str
    converged: bool
    rounds: int
    feedback_rounds: int
    target_emos: float
    final_latency_budget_ms: float
    transcript: list[dict[str, Any]]


class HealthResponse(BaseModel):
    status: str
    version: str
