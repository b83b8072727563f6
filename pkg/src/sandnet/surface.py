"""Cumulative sanding model: Gaussian tool imprints accumulated on a grid.

Each stored trajectory sample deposits one tool imprint: an isotropic 2D
Gaussian with sigma = tool_radius / 2, truncated at 3 sigma and normalized
so a fully in-grid stamp deposits exactly its nominal mass. Deposition is
the analytic cell integral (deterministic); a seeded Monte Carlo mode
exists for fidelity experiments. The deviation map subtracts the local
average over a square window, truncated at the grid edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .path import TrajectoryLog

__all__ = [
    "Heatmap",
    "DeviationMap",
    "stamp_imprint",
    "stamp_imprint_sampled",
    "replay_trajectory",
    "deviation_map",
    "write_grid_text",
    "read_grid_text",
    "write_pgm",
]

_SQRT2 = math.sqrt(2.0)
# mass of a 1D standard normal inside [-3, 3]; the 2D separable truncation
# window then carries this factor squared
_TRUNC_1D = erf(3.0 / _SQRT2)


@dataclass
class GridSpec:
    width_cells: int
    height_cells: int
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("grid must be at least 1x1")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")


@dataclass
class Heatmap:
    """Cumulative hit mass per cell. `cells[iy, ix]`, row iy spans y."""

    cells: np.ndarray
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def empty(cls, spec: GridSpec) -> "Heatmap":
        spec.validate()
        return cls(
            cells=np.zeros((spec.height_cells, spec.width_cells)),
            cell_size=spec.cell_size,
            origin=spec.origin,
        )

    def total_mass(self) -> float:
        return float(self.cells.sum())


@dataclass
class DeviationMap:
    """Signed deviation of each cell from its truncated-window local average."""

    cells: np.ndarray
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    window: int = 1


def _axis_profile(lo: float, n: int, cell: float, center: float, sigma: float) -> np.ndarray:
    """Integral of a 1D truncated normal over each of n cells starting at lo."""
    edges = lo + cell * np.arange(n + 1)
    a = np.clip(edges, center - 3.0 * sigma, center + 3.0 * sigma)
    z = (a - center) / (sigma * _SQRT2)
    cdf = 0.5 * (1.0 + erf(z))
    return np.diff(cdf)


def stamp_imprint(
    hm: Heatmap, center: tuple[float, float], tool_radius: float, mass: float = 1.0
) -> None:
    """Deposit one tool imprint centered at `center` (mm) into the heatmap.

    Off-grid parts of the imprint are simply lost; a stamp far from any edge
    adds exactly `mass` in total.
    """
    if not mass > 0:
        raise ValueError("mass must be > 0")
    if not tool_radius > 0:
        raise ValueError("tool_radius must be > 0")
    sigma = tool_radius / 2.0
    reach = 3.0 * sigma
    cx, cy = center
    x0, y0 = hm.origin
    h, w = hm.cells.shape
    cell = hm.cell_size

    ix0 = max(0, int(math.floor((cx - reach - x0) / cell)))
    ix1 = min(w, int(math.ceil((cx + reach - x0) / cell)))
    iy0 = max(0, int(math.floor((cy - reach - y0) / cell)))
    iy1 = min(h, int(math.ceil((cy + reach - y0) / cell)))
    if ix0 >= ix1 or iy0 >= iy1:
        return

    px = _axis_profile(x0 + ix0 * cell, ix1 - ix0, cell, cx, sigma)
    py = _axis_profile(y0 + iy0 * cell, iy1 - iy0, cell, cy, sigma)
    scale = mass / (_TRUNC_1D * _TRUNC_1D)
    hm.cells[iy0:iy1, ix0:ix1] += scale * np.outer(py, px)


def stamp_imprint_sampled(
    hm: Heatmap,
    center: tuple[float, float],
    tool_radius: float,
    mass: float,
    rng: np.random.Generator,
    particles: int = 256,
) -> None:
    """Monte Carlo variant: `particles` random hits, mass/particles each.

    Draws are rejected outside the 3-sigma truncation window so the expected
    deposit matches the analytic stamp.
    """
    sigma = tool_radius / 2.0
    n = 0
    hits = []
    while n < particles:
        p = rng.normal(0.0, sigma, size=(particles, 2))
        keep = np.all(np.abs(p) <= 3.0 * sigma, axis=1)
        hits.append(p[keep])
        n += int(keep.sum())
    pts = np.concatenate(hits)[:particles] + np.asarray(center)
    x0, y0 = hm.origin
    h, w = hm.cells.shape
    ix = np.floor((pts[:, 0] - x0) / hm.cell_size).astype(int)
    iy = np.floor((pts[:, 1] - y0) / hm.cell_size).astype(int)
    ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    np.add.at(hm.cells, (iy[ok], ix[ok]), mass / particles)


def replay_trajectory(
    log: TrajectoryLog,
    tool_radius: float,
    mass_per_sample: float,
    grid: GridSpec,
    sampled: bool = False,
    seed: int = 0,
) -> Heatmap:
    """Accumulate one imprint per stored sample; returns the heatmap."""
    if not log.samples:
        raise ValueError("empty trajectory log")
    hm = Heatmap.empty(grid)
    if sampled:
        rng = np.random.default_rng([int(seed), 0x57A3])
        for p in log.samples:
            stamp_imprint_sampled(hm, (p.x, p.y), tool_radius, mass_per_sample, rng)
    else:
        for p in log.samples:
            stamp_imprint(hm, (p.x, p.y), tool_radius, mass_per_sample)
    return hm


def deviation_map(hm: Heatmap, window: int) -> DeviationMap:
    """Per-cell deviation from the window-sized local mean.

    `window` is an odd side length in cells; neighborhoods are truncated at
    the grid edges (the mean divides by the in-grid cell count).
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 1, got {window}")
    cells = hm.cells
    h, w = cells.shape
    r = window // 2

    # summed-area table, exact truncated-window means without edge padding
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = np.cumsum(np.cumsum(cells, axis=0), axis=1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - r, 0, h)
    y1 = np.clip(ys + r + 1, 0, h)
    x0 = np.clip(xs - r, 0, w)
    x1 = np.clip(xs + r + 1, 0, w)

    window_sum = (
        sat[np.ix_(y1, x1)] - sat[np.ix_(y0, x1)] - sat[np.ix_(y1, x0)] + sat[np.ix_(y0, x0)]
    )
    counts = np.outer(y1 - y0, x1 - x0).astype(float)
    dev = cells - window_sum / counts
    return DeviationMap(cells=dev, cell_size=hm.cell_size, origin=hm.origin, window=window)


def write_grid_text(grid_cells: np.ndarray, path) -> None:
    """Plain-text export: one row of space-separated numbers per line."""
    with open(path, "w") as fh:
        for row in grid_cells:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_grid_text(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split()])
    return np.asarray(rows)


def write_pgm(grid_cells: np.ndarray, path) -> None:
    """16-bit binary portable graymap with linear min-max scaling."""
    lo = float(grid_cells.min())
    hi = float(grid_cells.max())
    span = hi - lo
    if span <= 0:
        scaled = np.zeros_like(grid_cells, dtype=np.uint16)
    else:
        scaled = np.round((grid_cells - lo) / span * 65535.0).astype(np.uint16)
    h, w = grid_cells.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(scaled.astype(">u2").tobytes())
