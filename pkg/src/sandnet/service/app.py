"""FastAPI application exposing the simulator and the QoS translation."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import ExperimentConfig
from ..experiment import SweepAborted, demo_loop, run_once, sweep
from ..kpi import RobotKpis
from ..path import plan_raster
from ..quality import build_transport, downsample_map, solve_transport
from ..surface import DeviationMap
from ..utility import UtilitySpec
from ..nrm.translate import CalibrationTable, InfeasibleTarget, translate_g_nw
from ..nrm.wire import QoSRequirements
from .models import (
    DemoLoopRequest,
    DemoLoopResponse,
    EmdRequest,
    EmdResponse,
    HealthResponse,
    PlanRequest,
    PlanResponse,
    RunRequest,
    RunResponse,
    SweepRequest,
    SweepResponse,
    SweepRow,
    TranslateRequest,
    TranslateResponse,
)

__all__ = ["create_app"]


def _config_from(payload_config: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig().with_overrides(**payload_config)
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _table_from(rows) -> CalibrationTable:
    table = CalibrationTable(
        rows=[(r.delay_ms, RobotKpis.from_dict(r.kpis.model_dump())) for r in rows]
    )
    try:
        table.validate()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return table


def create_app() -> FastAPI:
    app = FastAPI(title="sandnet", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/plan", response_model=PlanResponse)
    def plan(req: PlanRequest) -> PlanResponse:
        try:
            p = plan_raster(req.width_mm, req.height_mm, req.tool_radius_mm, req.overlap)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        offsets = sorted({wp[1] for wp in p.waypoints})
        spacing = offsets[1] - offsets[0] if len(offsets) > 1 else 0.0
        return PlanResponse(
            waypoints=[(float(x), float(y)) for x, y in p.waypoints],
            lane_spacing_mm=float(spacing),
            path_length_mm=p.path_length(),
        )

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        cfg = _config_from(req.config)
        try:
            res = run_once(cfg, out_dir=req.out_dir)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        s = res.summary()
        return RunResponse(
            config_hash=s["config_hash"],
            complete=s["complete"],
            samples=s["samples"],
            kpis=s["kpis"],
            emd=s["emd"],
            emos_robot=s["emos_robot"],
            emos_cust=s["emos_cust"],
            out_dir=str(res.out_dir) if res.out_dir else None,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def run_sweep(req: SweepRequest) -> SweepResponse:
        cfg = _config_from(req.config)
        try:
            rows = sweep(cfg, out_dir=req.out_dir, workers=req.workers)
        except SweepAborted as exc:
            # partial tables (if any) are already on disk, flagged in status.json
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        out = [
            SweepRow(
                tool_radius=r["tool_radius"],
                delay_ms=r["delay_ms"],
                emd=r["summary"]["emd"],
                emos_robot=r["summary"]["emos_robot"],
                kpis=r["summary"]["kpis"],
            )
            for r in rows
        ]
        out_dir = None
        if req.out_dir is not None:
            out_dir = f"{req.out_dir}/sweep-{cfg.content_hash()}"
        return SweepResponse(rows=out, out_dir=out_dir)

    @app.post("/emd", response_model=EmdResponse)
    def emd(req: EmdRequest) -> EmdResponse:
        cells = np.asarray(req.cells, dtype=float)
        if cells.ndim != 2 or cells.size == 0:
            raise HTTPException(status_code=422, detail="cells must be a non-empty 2D grid")
        dev = DeviationMap(cells=cells, cell_size=req.cell_size_mm)
        try:
            coarse = downsample_map(dev, req.downsample)
            inst = build_transport(coarse)
            work, _ = solve_transport(inst)
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        total = float(inst.supply_mass.sum())
        return EmdResponse(
            emd=work / total if total > 0 else 0.0,
            work=work,
            supplies=len(inst.supply_mass),
            demands=len(inst.demand_mass),
        )

    @app.post("/translate", response_model=TranslateResponse)
    def translate(req: TranslateRequest) -> TranslateResponse:
        try:
            spec = UtilitySpec.from_dict(req.utility)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        table = _table_from(req.table)
        defaults = QoSRequirements(
            bandwidth_kbps=req.defaults_bandwidth_kbps,
            loss_budget=req.defaults_loss_budget,
        )
        try:
            granted = translate_g_nw(spec, table, defaults)
        except InfeasibleTarget as exc:
            return TranslateResponse(
                latency_budget_ms=0.0,
                jitter_budget_ms=0.0,
                loss_budget=req.defaults_loss_budget,
                bandwidth_kbps=req.defaults_bandwidth_kbps,
                feasible=False,
                reason=str(exc),
            )
        return TranslateResponse(**granted.to_wire(), feasible=True)

    @app.post("/demo-loop", response_model=DemoLoopResponse)
    def run_demo(req: DemoLoopRequest) -> DemoLoopResponse:
        cfg = _config_from(req.config)
        address = None
        if req.server_host is not None and req.server_port is not None:
            address = (req.server_host, req.server_port)
        table = _table_from(req.calibration) if req.calibration else None
        try:
            outcome = demo_loop(
                cfg, req.mode, server_address=address, table=table, out_dir=req.out_dir
            )
        except (ValueError, ConnectionError, OSError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return DemoLoopResponse(
            mode=outcome["mode"],
            converged=outcome["converged"],
            rounds=outcome["rounds"],
            feedback_rounds=outcome["feedback_rounds"],
            target_emos=outcome["target_emos"],
            final_latency_budget_ms=outcome["final_latency_budget_ms"],
            transcript=outcome["transcript"],
        )

    return app
