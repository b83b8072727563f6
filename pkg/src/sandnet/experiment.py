"""Experiment runner: single runs, sweeps, and the closed feedback loop.

Every command writes plain data files into a subdirectory keyed by the
content hash of its effective configuration, so identical configs land in
identical places with identical bytes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig
from .kpi import RobotKpis, compute_kpis
from .path import PlannedTrajectory, TrajectoryLog, plan_raster, simulate_follow, write_log_csv
from .quality import (
    ProductQuality,
    RESULTS_HEADER,
    auto_downsample_factor,
    crop_margin,
    score_product,
)
from .surface import GridSpec, deviation_map, replay_trajectory, write_grid_text, write_pgm
from .utility import Emos, emos_cust, emos_robot
from .nrm.client import NrmClient, granted_requirements
from .nrm.server import serve
from .nrm.translate import CalibrationTable, PolicyCaps
from .nrm.wire import QoSRequirements

__all__ = [
    "RunResult",
    "SweepAborted",
    "run_once",
    "sweep",
    "demo_loop",
    "CALIBRATION_HEADER",
]


class SweepAborted(RuntimeError):
    """A sweep point failed; completed rows were kept and flagged partial."""

    def __init__(self, tool: float, delay: float, cause: Exception, rows: list):
        super().__init__(f"sweep aborted at tool {tool} mm, delay {delay} ms: {cause}")
        self.tool = tool
        self.delay = delay
        self.cause = cause
        self.rows = rows

_KPI_COLUMNS = [
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

CALIBRATION_HEADER = "tool_radius,delay_ms,jitter_ms,loss," + ",".join(_KPI_COLUMNS) + ",phase,emd"


@dataclass
class RunResult:
    config: ExperimentConfig
    plan: PlannedTrajectory
    log: TrajectoryLog
    kpis: RobotKpis
    quality: ProductQuality
    emos_robot: Emos
    emos_cust: Emos
    out_dir: Path | None = None

    def summary(self) -> dict:
        return {
            "config_hash": self.config.content_hash(),
            "tool_radius_mm": self.config.tool_radius_mm,
            "delay_ms": self.config.delay_ms,
            "jitter_ms": self.config.jitter_ms,
            "loss_rate": self.config.loss_rate,
            "complete": self.log.complete,
            "samples": len(self.log.samples),
            "kpis": self.kpis.to_dict(),
            "emd": self.quality.emd,
            "emos_robot": self.emos_robot.value,
            "emos_cust": self.emos_cust.value,
        }

    def calibration_row(self) -> str:
        k = self.kpis
        vals = [getattr(k, name) for name in _KPI_COLUMNS]
        return (
            f"{self.config.tool_radius_mm!r},{self.config.delay_ms!r},"
            f"{self.config.jitter_ms!r},{self.config.loss_rate!r},"
            + ",".join(repr(v) for v in vals)
            + f",{k.phase},{self.quality.emd!r}"
        )


def _simulate(cfg: ExperimentConfig) -> tuple[PlannedTrajectory, TrajectoryLog]:
    plan = plan_raster(
        cfg.surface_width_mm,
        cfg.surface_height_mm,
        cfg.tool_radius_mm,
        cfg.overlap,
        z_ref=cfg.z_ref_mm,
        nominal_speed=cfg.nominal_speed_mm_s,
    )
    log = simulate_follow(
        plan,
        cfg.controller(),
        cfg.conditions(),
        duration_limit=cfg.duration_limit_s,
        resolution=cfg.log_resolution_mm,
        symmetric_delay=cfg.symmetric_delay,
    )
    return plan, log


def run_once(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunResult:
    """One full pipeline pass: simulate, sand, score, rate.

    With `out_dir` set, writes the trajectory table, both maps in text and
    graymap form, the KPI record, the quality row and the eMOS summary into
    `<out_dir>/run-<confighash>/`.
    """
    cfg.validate()
    plan, log = _simulate(cfg)
    kpis = compute_kpis(plan, log)

    cells_w = int(round(cfg.surface_width_mm / cfg.grid_cell_size_mm))
    cells_h = int(round(cfg.surface_height_mm / cfg.grid_cell_size_mm))
    grid = GridSpec(cells_w, cells_h, cfg.grid_cell_size_mm)
    heatmap = replay_trajectory(log, cfg.tool_radius_mm, cfg.mass_per_sample, grid)
    interior = crop_margin(heatmap, cfg.edge_margin())
    dev = deviation_map(interior, cfg.deviation_window())
    quality = score_product(
        dev,
        auto_downsample_factor(dev, cfg.downsample_max_side),
        total_removed_mass=heatmap.total_mass(),
        tool_radius=cfg.tool_radius_mm,
        conditions=cfg.conditions(),
    )

    e_robot = emos_robot(kpis, cfg.robot_spec())
    e_cust = emos_cust(quality, cfg.exogenous(), cfg.customer_spec())

    result = RunResult(cfg, plan, log, kpis, quality, e_robot, e_cust)

    if out_dir is not None:
        run_dir = Path(out_dir) / f"run-{cfg.content_hash()}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_log_csv(log, run_dir / "trajectory.csv")
        write_grid_text(heatmap.cells, run_dir / "heatmap.txt")
        write_pgm(heatmap.cells, run_dir / "heatmap.pgm")
        write_grid_text(dev.cells, run_dir / "deviation.txt")
        write_pgm(dev.cells, run_dir / "deviation.pgm")
        (run_dir / "kpis.json").write_text(
            json.dumps(kpis.to_dict(), sort_keys=True, indent=2) + "\n"
        )
        (run_dir / "results.csv").write_text(
            RESULTS_HEADER + "\n" + quality.results_row() + "\n"
        )
        (run_dir / "summary.json").write_text(
            json.dumps(result.summary(), sort_keys=True, indent=2) + "\n"
        )
        result.out_dir = run_dir
    return result


def _sweep_point(args: tuple[dict, float, float]) -> dict:
    cfg_dict, tool, delay = args
    cfg = ExperimentConfig.from_dict(cfg_dict).with_overrides(
        tool_radius_mm=tool, delay_ms=delay
    )
    res = run_once(cfg)
    return {
        "tool_radius": tool,
        "delay_ms": delay,
        "results_row": res.quality.results_row(),
        "calibration_row": res.calibration_row(),
        "summary": res.summary(),
    }


def sweep(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> list[dict]:
    """One run per (tool radius, delay): the data behind the delay-vs-quality
    plots and the calibration table the resource manager consumes."""
    cfg.validate()
    points = [(t, d) for t in cfg.sweep_tool_radii_mm for d in cfg.sweep_delays_ms]
    if len(points) < 2:
        raise ValueError("sweep needs at least 2 points")
    args = [(cfg.to_dict(), t, d) for t, d in points]

    rows: list[dict] = []
    failure: SweepAborted | None = None
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for (_, t, d), row in zip(args, pool.map(_sweep_point, args)):
                    rows.append(row)
        else:
            for _, t, d in args:
                rows.append(_sweep_point((cfg.to_dict(), t, d)))
    except Exception as exc:  # abort, keep what finished
        done = len(rows)
        t, d = points[done] if done < len(points) else points[-1]
        failure = SweepAborted(t, d, exc, rows)
    rows.sort(key=lambda r: (r["tool_radius"], r["delay_ms"]))

    if out_dir is not None:
        sweep_dir = Path(out_dir) / f"sweep-{cfg.content_hash()}"
        sweep_dir.mkdir(parents=True, exist_ok=True)
        (sweep_dir / "results.csv").write_text(
            RESULTS_HEADER + "\n" + "\n".join(r["results_row"] for r in rows) + "\n"
        )
        (sweep_dir / "calibration.csv").write_text(
            CALIBRATION_HEADER + "\n" + "\n".join(r["calibration_row"] for r in rows) + "\n"
        )
        (sweep_dir / "status.json").write_text(
            json.dumps(
                {
                    "partial": failure is not None,
                    "rows": len(rows),
                    "points": len(points),
                    "error": str(failure) if failure else None,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
    if failure is not None:
        raise failure
    return rows


def calibration_from_rows(rows: list[dict], tool_radius: float) -> CalibrationTable:
    """Build the delay->KPIs table for one tool radius out of sweep rows."""
    table_rows = []
    for r in rows:
        if abs(r["tool_radius"] - tool_radius) > 1e-9:
            continue
        table_rows.append((r["delay_ms"], RobotKpis.from_dict(r["summary"]["kpis"])))
    table_rows.sort(key=lambda t: t[0])
    table = CalibrationTable(rows=table_rows, tool_radius=tool_radius)
    table.validate()
    return table


def demo_loop(
    cfg: ExperimentConfig,
    mode: str,
    server_address: tuple[str, int] | None = None,
    table: CalibrationTable | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """Closed loop: grant, simulate under the grant, rate, feed back, regrant.

    In `detailed` mode the feedback carries the KPI record and the utility
    function and the server re-translates against its calibration table; in
    `simple` mode only the eMOS value goes back and the server adapts by
    AIMD. Stops once the achieved eMOS meets the target, or after the
    configured round limit (flagged unconverged). Returns the transcript.
    """
    if mode not in ("simple", "detailed"):
        raise ValueError(f"mode must be simple or detailed, got {mode!r}")
    cfg.validate()
    spec = cfg.robot_spec()
    target = spec.target_emos
    caps = PolicyCaps(
        latency_floor_ms=cfg.nrm_latency_floor_ms,
        latency_ceiling_ms=cfg.nrm_latency_ceiling_ms,
        bandwidth_cap_kbps=cfg.nrm_bandwidth_cap_kbps,
    )
    own_server = None
    if server_address is None:
        if mode == "detailed" and table is None:
            raise ValueError("detailed mode needs a calibration table")
        own_server = serve(caps, (cfg.nrm_host, 0), table=table,
                           defaults=QoSRequirements(bandwidth_kbps=cfg.bandwidth_kbps))
        server_address = own_server.address

    transcript: list[dict] = []
    converged = False
    try:
        with NrmClient(*server_address) as client:
            reply = client.request_qos(
                QoSRequirements(
                    latency_budget_ms=cfg.demo_start_budget_ms,
                    jitter_budget_ms=0.0,
                    loss_budget=0.0,
                    bandwidth_kbps=cfg.bandwidth_kbps,
                )
            )
            transcript.append({"round": 0, "direction": "grant", "message": reply})
            granted = granted_requirements(reply)

            for rnd in range(1, cfg.demo_round_limit + 1):
                run_cfg = cfg.with_overrides(
                    delay_ms=granted.latency_budget_ms,
                    jitter_ms=granted.jitter_budget_ms,
                    loss_rate=granted.loss_budget,
                    bandwidth_kbps=granted.bandwidth_kbps,
                )
                res = run_once(run_cfg)
                achieved = res.emos_robot.value
                transcript.append(
                    {
                        "round": rnd,
                        "direction": "measurement",
                        "delay_ms": granted.latency_budget_ms,
                        "emos_robot": achieved,
                        "kpis": res.kpis.to_dict(),
                    }
                )
                if achieved >= target:
                    converged = True
                    break
                if mode == "simple":
                    reply = client.simple_feedback(achieved, target)
                else:
                    reply = client.detailed_feedback(res.kpis, spec)
                transcript.append({"round": rnd, "direction": "grant", "message": reply})
                if reply.get("type") != "qos_grant":
                    break
                granted = granted_requirements(reply)
    finally:
        if own_server is not None:
            own_server.stop()

    measurements = sum(1 for t in transcript if t["direction"] == "measurement")
    outcome = {
        "mode": mode,
        "target_emos": target,
        "converged": converged,
        "rounds": measurements,
        # grants after the initial one, i.e. how many feedback cycles it took
        "feedback_rounds": sum(1 for t in transcript if t["direction"] == "grant") - 1,
        "final_latency_budget_ms": granted.latency_budget_ms,
        "transcript": transcript,
    }
    if out_dir is not None:
        demo_dir = Path(out_dir) / f"demo-{mode}-{cfg.content_hash()}"
        demo_dir.mkdir(parents=True, exist_ok=True)
        (demo_dir / "transcript.jsonl").write_text(
            "\n".join(json.dumps(t, sort_keys=True) for t in transcript) + "\n"
        )
        (demo_dir / "outcome.json").write_text(
            json.dumps({k: v for k, v in outcome.items() if k != "transcript"},
                       sort_keys=True, indent=2) + "\n"
        )
    return outcome
