"""QoS translation and adaptation policies on the network-operator side.

`translate_g_nw` turns a robot operator's utility function plus an
empirical delay-to-KPI calibration table into a network latency budget:
the largest delay whose predicted KPIs still score at or above the target
eMOS. `adapt_simple` is the fallback when only a bare eMOS number comes
back: halve the budget when unhappy, creep it back up when comfortably
happy (additive-increase / multiplicative-decrease).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..kpi import RobotKpis
from ..utility import UtilitySpec, emos_robot
from .wire import QoSRequirements

__all__ = [
    "PolicyCaps",
    "SessionState",
    "CalibrationTable",
    "InfeasibleTarget",
    "translate_g_nw",
    "adapt_simple",
    "AIMD_INCREASE_MS",
    "AIMD_PATIENCE",
    "AIMD_FLOOR_MS",
    "AIMD_HEADROOM",
]

AIMD_FLOOR_MS = 1.0
AIMD_INCREASE_MS = 5.0
AIMD_PATIENCE = 3
AIMD_HEADROOM = 0.5  # eMOS margin above target that counts as "comfortable"

_KPI_FIELDS = [
    "traj_err_mean",
    "traj_err_max",
    "vel_mean",
    "vel_max",
    "vel_min",
    "vel_std",
    "z_dev_mean",
    "z_dev_max",
    "orient_err_rms",
]


class InfeasibleTarget(RuntimeError):
    """No delay in the calibration table reaches the target eMOS."""


@dataclass
class PolicyCaps:
    """What the operator's network can actually provide."""

    latency_floor_ms: float = 1.0
    latency_ceiling_ms: float = 200.0
    jitter_floor_ms: float = 0.0
    loss_floor: float = 0.0
    bandwidth_cap_kbps: float = 10000.0

    def check(self, req: QoSRequirements) -> str | None:
        """Returns a denial reason, or None when the request is grantable."""
        if req.latency_budget_ms < self.latency_floor_ms:
            return (
                f"latency budget {req.latency_budget_ms} ms below the "
                f"{self.latency_floor_ms} ms floor"
            )
        if req.jitter_budget_ms < self.jitter_floor_ms:
            return f"jitter budget below the {self.jitter_floor_ms} ms floor"
        if req.loss_budget < self.loss_floor:
            return f"loss budget below the {self.loss_floor} floor"
        if req.bandwidth_kbps > self.bandwidth_cap_kbps:
            return (
                f"bandwidth {req.bandwidth_kbps} kbps above the "
                f"{self.bandwidth_cap_kbps} kbps cap"
            )
        return None

    def clamp(self, req: QoSRequirements) -> QoSRequirements:
        return QoSRequirements(
            latency_budget_ms=min(
                max(req.latency_budget_ms, self.latency_floor_ms), self.latency_ceiling_ms
            ),
            jitter_budget_ms=max(req.jitter_budget_ms, self.jitter_floor_ms),
            loss_budget=max(req.loss_budget, self.loss_floor),
            bandwidth_kbps=min(req.bandwidth_kbps, self.bandwidth_cap_kbps),
        )


@dataclass
class SessionState:
    session_id: str
    mode: str | None = None  # direct | simple | detailed
    granted: QoSRequirements | None = None
    history: list = field(default_factory=list)
    good_streak: int = 0


@dataclass
class CalibrationTable:
    """Empirical delay -> predicted KPIs map at one tool/controller setup."""

    rows: list[tuple[float, RobotKpis]]
    tool_radius: float = 0.0

    def validate(self) -> None:
        if len(self.rows) < 2:
            raise ValueError("calibration table needs at least 2 rows")
        delays = [d for d, _ in self.rows]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("calibration delays must be strictly increasing")

    def delays(self) -> list[float]:
        return [d for d, _ in self.rows]

    def predict(self, delay_ms: float) -> RobotKpis:
        """KPIs at an arbitrary delay, linear interpolation between rows
        (clamped to the table's delay range)."""
        self.validate()
        rows = self.rows
        if delay_ms <= rows[0][0]:
            return rows[0][1]
        if delay_ms >= rows[-1][0]:
            return rows[-1][1]
        for (d0, k0), (d1, k1) in zip(rows, rows[1:]):
            if d0 <= delay_ms <= d1:
                f = (delay_ms - d0) / (d1 - d0)
                blended = {
                    name: (1 - f) * getattr(k0, name) + f * getattr(k1, name)
                    for name in _KPI_FIELDS
                }
                return RobotKpis(phase=k0.phase, **blended)
        raise AssertionError("unreachable")

    @classmethod
    def from_csv(cls, path: str | Path, tool_radius: float | None = None) -> "CalibrationTable":
        """Load from the sweep-produced calibration table, optionally
        filtered to one tool radius."""
        rows: list[tuple[float, RobotKpis]] = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                r = float(rec["tool_radius"])
                if tool_radius is not None and abs(r - tool_radius) > 1e-9:
                    continue
                kpis = RobotKpis(
                    phase=rec.get("phase", "sanding"),
                    **{name: float(rec[name]) for name in _KPI_FIELDS},
                )
                rows.append((float(rec["delay_ms"]), kpis))
        rows.sort(key=lambda t: t[0])
        table = cls(rows=rows, tool_radius=tool_radius if tool_radius is not None else 0.0)
        table.validate()
        return table


def translate_g_nw(
    spec: UtilitySpec, table: CalibrationTable, defaults: QoSRequirements
) -> QoSRequirements:
    """Largest latency budget whose predicted eMOS still meets the target.

    Jitter budget is pinned to zero (the calibration assumes none); loss
    and bandwidth come from the defaults.
    """
    spec.validate()
    table.validate()
    feasible = [
        delay for delay, kpis in table.rows if emos_robot(kpis, spec).value >= spec.target_emos
    ]
    if not feasible:
        raise InfeasibleTarget(
            f"no delay in the table reaches eMOS {spec.target_emos}; "
            "relax the target or change the process"
        )
    return QoSRequirements(
        latency_budget_ms=max(feasible),
        jitter_budget_ms=0.0,
        loss_budget=defaults.loss_budget,
        bandwidth_kbps=defaults.bandwidth_kbps,
    )


def adapt_simple(
    state: SessionState, emos_value: float, target: float, caps: PolicyCaps
) -> QoSRequirements:
    """AIMD adaptation on the latency budget from a bare eMOS report."""
    if state.granted is None:
        raise ValueError("no granted conditions to adapt")
    g = state.granted
    latency = g.latency_budget_ms
    if emos_value < target:
        latency = max(AIMD_FLOOR_MS, latency / 2.0)
        state.good_streak = 0
    elif emos_value >= target + AIMD_HEADROOM:
        state.good_streak += 1
        if state.good_streak >= AIMD_PATIENCE:
            latency = min(latency + AIMD_INCREASE_MS, caps.latency_ceiling_ms)
            state.good_streak = 0
    else:
        state.good_streak = 0
    new = QoSRequirements(
        latency_budget_ms=latency,
        jitter_budget_ms=g.jitter_budget_ms,
        loss_budget=g.loss_budget,
        bandwidth_kbps=g.bandwidth_kbps,
    )
    state.granted = new
    return new
