"""Utility functions mapping measured quality onto 1-5 opinion scores.

Each requirement scores one metric piecewise-linearly between its `good`
threshold (score 5) and its `bad` threshold (score 1), lower is better;
the overall estimated MOS is the weighted average. The robot operator
scores control KPIs per processing phase; the customer scores the surface
flatness plus exogenous factors (material, tooling) that have nothing to
do with the network.
"""

from __future__ import annotations

from dataclasses import dataclass

from .kpi import PHASES, RobotKpis
from .quality import ProductQuality

__all__ = [
    "KpiRequirement",
    "UtilitySpec",
    "Emos",
    "ExogenousFactors",
    "emos_robot",
    "emos_cust",
    "default_sanding_spec",
    "default_scanning_spec",
    "default_customer_spec",
]

# exogenous factor names enter the customer utility as ready-made 1-5
# scores rather than thresholded measurements
SCORE_IS_DIRECT = ("material_score", "tool_score")


@dataclass
class KpiRequirement:
    kpi_name: str
    weight: float
    good: float = 0.0
    bad: float = 1.0
    direction: str = "lower_is_better"

    def validate(self) -> None:
        if self.weight < 0:
            raise ValueError("weight must be >= 0")
        if self.direction != "lower_is_better":
            raise ValueError(f"unsupported direction {self.direction!r}")
        if self.kpi_name not in SCORE_IS_DIRECT and not self.good < self.bad:
            raise ValueError(f"{self.kpi_name}: good threshold must be < bad threshold")

    def score(self, x: float) -> float:
        if self.kpi_name in SCORE_IS_DIRECT:
            return min(5.0, max(1.0, x))
        if x <= self.good:
            return 5.0
        if x >= self.bad:
            return 1.0
        return 5.0 - 4.0 * (x - self.good) / (self.bad - self.good)

    def to_dict(self) -> dict:
        return {
            "kpi": self.kpi_name,
            "weight": self.weight,
            "good": self.good,
            "bad": self.bad,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KpiRequirement":
        req = cls(
            kpi_name=str(d["kpi"]),
            weight=float(d["weight"]),
            good=float(d.get("good", 0.0)),
            bad=float(d.get("bad", 1.0)),
        )
        req.validate()
        return req


@dataclass
class UtilitySpec:
    phase: str
    requirements: list[KpiRequirement]
    target_emos: float = 4.0

    def validate(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        for r in self.requirements:
            r.validate()
        total = sum(r.weight for r in self.requirements)
        if self.phase == "sanding" and not total > 0:
            raise ValueError("sanding phase needs at least one positive weight")
        if not 1.0 <= self.target_emos <= 5.0:
            raise ValueError("target_emos must be in [1,5]")

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "target_emos": self.target_emos,
            "requirements": [r.to_dict() for r in self.requirements],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UtilitySpec":
        spec = cls(
            phase=str(d.get("phase", "sanding")),
            requirements=[KpiRequirement.from_dict(r) for r in d.get("requirements", [])],
            target_emos=float(d.get("target_emos", 4.0)),
        )
        spec.validate()
        return spec


@dataclass
class Emos:
    value: float

    def __post_init__(self):
        if not 1.0 <= self.value <= 5.0:
            raise ValueError(f"eMOS must be in [1,5], got {self.value}")


@dataclass
class ExogenousFactors:
    """Quality proxies outside the network's reach (paint shade, tooling)."""

    material_score: float = 5.0
    tool_score: float = 5.0

    def validate(self) -> None:
        for v in (self.material_score, self.tool_score):
            if not 1.0 <= v <= 5.0:
                raise ValueError("exogenous scores must be in [1,5]")


def _weighted_emos(values: dict[str, float], spec: UtilitySpec) -> Emos:
    total_w = sum(r.weight for r in spec.requirements)
    if total_w == 0:
        # unconstrained phase (stop-and-scan): nothing to complain about
        return Emos(5.0)
    acc = 0.0
    for r in spec.requirements:
        if r.kpi_name not in values:
            raise KeyError(f"unknown kpi_name {r.kpi_name!r}")
        acc += r.weight * r.score(values[r.kpi_name])
    return Emos(min(5.0, max(1.0, acc / total_w)))


def emos_robot(kpis: RobotKpis, spec: UtilitySpec) -> Emos:
    """Robot operator's estimated MOS for the control quality of one run."""
    spec.validate()
    if kpis.phase != spec.phase:
        raise ValueError(f"phase mismatch: kpis {kpis.phase!r} vs spec {spec.phase!r}")
    values = {k: v for k, v in kpis.to_dict().items() if k != "phase"}
    return _weighted_emos(values, spec)


def emos_cust(
    quality: ProductQuality,
    exogenous: ExogenousFactors,
    spec: UtilitySpec,
) -> Emos:
    """Customer's estimated MOS: surface flatness plus exogenous factors."""
    spec.validate()
    exogenous.validate()
    values = {
        "emd": quality.emd,
        "material_score": exogenous.material_score,
        "tool_score": exogenous.tool_score,
    }
    return _weighted_emos(values, spec)


def default_sanding_spec(target_emos: float = 4.0) -> UtilitySpec:
    """Sanding-phase weights: trajectory error and velocities dominate,
    Z distance matters some, perpendicularity not at all."""
    return UtilitySpec(
        phase="sanding",
        target_emos=target_emos,
        requirements=[
            KpiRequirement("traj_err_max", weight=4.0, good=3.0, bad=9.0),
            KpiRequirement("vel_max", weight=2.0, good=150.0, bad=450.0),
            KpiRequirement("vel_mean", weight=2.0, good=120.0, bad=360.0),
            KpiRequirement("z_dev_max", weight=1.0, good=3.0, bad=9.0),
            KpiRequirement("orient_err_rms", weight=0.0, good=0.1, bad=0.5),
        ],
    )


def default_scanning_spec() -> UtilitySpec:
    """Stop-and-scan is insensitive to the network: no constraints."""
    return UtilitySpec(
        phase="scanning",
        target_emos=1.0,
        requirements=[
            KpiRequirement("traj_err_max", weight=0.0, good=3.0, bad=9.0),
        ],
    )


def default_customer_spec(
    emd_good: float, emd_bad: float, target_emos: float = 4.0
) -> UtilitySpec:
    """Customer weights: surface flatness 3, paint shade 1, tooling 1.

    The EMD thresholds are calibrated against this artifact's own
    zero-delay baseline (grid resolution makes absolute values setup
    specific), hence required arguments rather than built-in numbers.
    """
    return UtilitySpec(
        phase="sanding",
        target_emos=target_emos,
        requirements=[
            KpiRequirement("emd", weight=3.0, good=emd_good, bad=emd_bad),
            KpiRequirement("material_score", weight=1.0),
            KpiRequirement("tool_score", weight=1.0),
        ],
    )
