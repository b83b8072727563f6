"""Command-line client. All compute goes through the HTTP service layer;
by default the app is hosted in-process, `--server` targets a remote one.

The default config file comes from --config or the SANDNET_CONFIG
environment variable; flags override file values.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .config import DEFAULT_CONFIG_ENV, ExperimentConfig, load_config

__all__ = ["main"]


class ApiClient:
    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # this starlette build warns about its own httpx usage
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        r = self._client.post(path, json=payload)
        if r.status_code != 200:
            try:
                detail = r.json().get("detail", r.text)
            except Exception:
                detail = r.text
            raise click.ClickException(f"{path} failed ({r.status_code}): {detail}")
        return r.json()


def _effective_config(config_path: str | None, **overrides) -> ExperimentConfig:
    path = config_path or os.environ.get(DEFAULT_CONFIG_ENV)
    try:
        cfg = load_config(path)
        return cfg.with_overrides(**overrides)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"bad config: {exc}")


def _emit(data: dict) -> None:
    click.echo(json.dumps(data, sort_keys=True, indent=2))


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help=f"YAML config file (default: ${DEFAULT_CONFIG_ENV})",
)
server_option = click.option(
    "--server", default=None, help="URL of a running sandnet API (default: in-process)"
)


@click.group()
def main() -> None:
    """Deterministic network-QoS-to-product-quality experiments."""


@main.command()
@config_option
@server_option
@click.option("--tool-radius", type=float, default=None, help="tool radius [mm]")
@click.option("--overlap", type=float, default=None)
def plan(config_path, server, tool_radius, overlap) -> None:
    """Print the raster plan for the configured surface and tool."""
    cfg = _effective_config(config_path, tool_radius_mm=tool_radius, overlap=overlap)
    out = ApiClient(server).post(
        "/plan",
        {
            "width_mm": cfg.surface_width_mm,
            "height_mm": cfg.surface_height_mm,
            "tool_radius_mm": cfg.tool_radius_mm,
            "overlap": cfg.overlap,
        },
    )
    _emit(out)


@main.command()
@config_option
@server_option
@click.option("--delay", type=float, default=None, help="channel delay [ms]")
@click.option("--jitter", type=float, default=None, help="channel jitter [ms]")
@click.option("--loss", type=float, default=None, help="loss probability")
@click.option("--tool-radius", type=float, default=None, help="tool radius [mm]")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", default=None, help="artifact directory (default: config output_dir)")
def run(config_path, server, delay, jitter, loss, tool_radius, seed, out_dir) -> None:
    """One full run: simulate, sand, score, rate; write the artifacts."""
    cfg = _effective_config(
        config_path,
        delay_ms=delay,
        jitter_ms=jitter,
        loss_rate=loss,
        tool_radius_mm=tool_radius,
        seed=seed,
    )
    out = ApiClient(server).post(
        "/run", {"config": cfg.to_dict(), "out_dir": out_dir or cfg.output_dir}
    )
    _emit(out)


@main.command()
@config_option
@server_option
@click.option("--delays", default=None, help="comma-separated delay list [ms]")
@click.option("--tools", default=None, help="comma-separated tool radius list [mm]")
@click.option("--workers", type=int, default=1, help="parallel sweep workers")
@click.option("--out", "out_dir", default=None)
def sweep(config_path, server, delays, tools, workers, out_dir) -> None:
    """Delay x tool-radius sweep; emits results.csv and calibration.csv."""
    overrides = {}
    if delays:
        overrides["sweep_delays_ms"] = [float(v) for v in delays.split(",")]
    if tools:
        overrides["sweep_tool_radii_mm"] = [float(v) for v in tools.split(",")]
    cfg = _effective_config(config_path, **overrides)
    out = ApiClient(server).post(
        "/sweep",
        {"config": cfg.to_dict(), "out_dir": out_dir or cfg.output_dir, "workers": workers},
    )
    _emit(out)


@main.command()
@server_option
@click.argument("mapfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--cell-size", type=float, default=1.0, help="cell size [mm]")
@click.option("--downsample", type=int, default=1)
def emd(server, mapfile, cell_size, downsample) -> None:
    """Exact EMD of a deviation map stored as a plain-text grid."""
    cells = []
    for line in Path(mapfile).read_text().splitlines():
        line = line.strip()
        if line:
            cells.append([float(v) for v in line.split()])
    if not cells:
        raise click.ClickException(f"{mapfile} holds no grid")
    out = ApiClient(server).post(
        "/emd", {"cells": cells, "cell_size_mm": cell_size, "downsample": downsample}
    )
    _emit(out)


@main.command("serve-nrm")
@config_option
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False), default=None,
              help="sweep calibration.csv enabling detailed-feedback translation")
@click.option("--tool-radius", type=float, default=None, help="table row filter [mm]")
def serve_nrm(config_path, host, port, calibration, tool_radius) -> None:
    """Run the network-operator NRM endpoint (line protocol over TCP)."""
    from .nrm.server import serve
    from .nrm.translate import CalibrationTable, PolicyCaps
    from .nrm.wire import QoSRequirements

    cfg = _effective_config(config_path)
    caps = PolicyCaps(
        latency_floor_ms=cfg.nrm_latency_floor_ms,
        latency_ceiling_ms=cfg.nrm_latency_ceiling_ms,
        bandwidth_cap_kbps=cfg.nrm_bandwidth_cap_kbps,
    )
    table = None
    if calibration:
        table = CalibrationTable.from_csv(
            calibration, tool_radius if tool_radius is not None else cfg.tool_radius_mm
        )
    server = serve(
        caps,
        (host or cfg.nrm_host, port if port is not None else cfg.nrm_port),
        table=table,
        defaults=QoSRequirements(bandwidth_kbps=cfg.bandwidth_kbps),
        background=False,
    )
    click.echo(f"nrm server on {server.address[0]}:{server.address[1]}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.server_close()


@main.command("demo-loop")
@config_option
@server_option
@click.option("--mode", type=click.Choice(["simple", "detailed"]), default="detailed")
@click.option("--nrm-server", default=None, help="host:port of a running NRM server (default: ephemeral)")
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--tool-radius", type=float, default=None)
@click.option("--out", "out_dir", default=None)
def demo_loop_cmd(config_path, server, mode, nrm_server, calibration, tool_radius, out_dir) -> None:
    """Closed feedback loop: grant, simulate, rate, feed back, regrant."""
    cfg = _effective_config(config_path, tool_radius_mm=tool_radius)
    payload: dict = {
        "config": cfg.to_dict(),
        "mode": mode,
        "out_dir": out_dir or cfg.output_dir,
    }
    if nrm_server:
        host, _, port = nrm_server.rpartition(":")
        try:
            payload["server_host"] = host
            payload["server_port"] = int(port)
        except ValueError:
            raise click.ClickException(f"--nrm-server must be host:port, got {nrm_server!r}")
    if calibration:
        from .nrm.translate import CalibrationTable

        table = CalibrationTable.from_csv(calibration, cfg.tool_radius_mm)
        payload["calibration"] = [
            {"delay_ms": d, "kpis": k.to_dict()} for d, k in table.rows
        ]
    out = ApiClient(server).post("/demo-loop", payload)
    _emit(out)
    if not out.get("converged"):
        sys.exit(3)


@main.command("serve-api")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve_api(host, port) -> None:
    """Run the HTTP service that the other subcommands talk to."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
