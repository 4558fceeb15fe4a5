"""Photovoltaic harvesting from illuminance traces and per-node energy neutrality."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError, InputError
from .trace import SensorTrace, Unit, _parse_pairs


@dataclass(frozen=True)
class HarvestModel:
    """Monotone piecewise-linear ``lux -> W`` curve of one cell plus scaling factors.

    Output is ``efficiency * cells * area_scale * curve(lux)``, linear between
    breakpoints and flat beyond the last one.
    """

    curve: tuple
    efficiency: float = 0.79
    cells: int = 1
    area_scale: float = 1.0
    max_cells: int = 1000

    def __post_init__(self):
        pts = tuple(sorted((float(x), float(w)) for x, w in self.curve))
        object.__setattr__(self, "curve", pts)
        if len(pts) < 2:
            raise ConfigError("harvest curve needs at least 2 breakpoints")
        if pts[0] != (0.0, 0.0):
            raise ConfigError("harvest curve must start at (0 lux, 0 W)")
        xs = [x for x, _ in pts]
        ws = [w for _, w in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("harvest curve lux values must be distinct")
        if any(b < a for a, b in zip(ws, ws[1:])):
            raise ConfigError("harvest curve must be non-decreasing")
        if not 0 < self.efficiency <= 1:
            raise ConfigError("efficiency must be in (0, 1]")
        if int(self.cells) != self.cells or self.cells < 1:
            raise ConfigError("cells must be a positive integer")
        if not self.area_scale > 0:
            raise ConfigError("area_scale must be positive")
        if self.max_cells < 1:
            raise ConfigError("max_cells must be >= 1")

    @property
    def max_power_w(self):
        return self.efficiency * self.cells * self.area_scale * self.curve[-1][1]

    def single_cell(self):
        return replace(self, cells=1)


def harvest_power(illuminance_lux, model: HarvestModel):
    """Harvested power (W) at the given illuminance; scalar or array."""
    lux = np.asarray(illuminance_lux, dtype=np.float64)
    if np.any(np.isnan(lux)) or np.any(lux < 0):
        raise InputError("illuminance must be non-negative")
    xs = [x for x, _ in model.curve]
    ws = [w for _, w in model.curve]
    out = model.efficiency * model.cells * model.area_scale * np.interp(lux, xs, ws)
    return float(out) if out.ndim == 0 else out


def mean_harvest(trace: SensorTrace, model: HarvestModel) -> float:
    """Time average of harvested power over the trace (samples are equally weighted)."""
    if trace.unit is not Unit.LUX:
        raise InputError(f"node {trace.node_id}: harvesting needs a lux trace, got {trace.unit.value}")
    if len(trace) == 0:
        return 0.0
    return math.fsum(harvest_power(trace.v, model)) / len(trace)


@dataclass(frozen=True)
class NodeNeutrality:
    node_id: int
    mean_consumed_w: float
    mean_harvested_w: float
    neutral: bool
    cells_needed: int
    capped: bool = False


@dataclass(frozen=True)
class NeutralityReport:
    nodes: tuple
    model: HarvestModel = field(repr=False)

    @property
    def total_cells(self):
        return sum(n.cells_needed for n in self.nodes)

    @property
    def neutral_count(self):
        return sum(n.neutral for n in self.nodes)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("node_id,consumed_uw,harvested_uw,neutral,cells_needed,capped\n")
        for n in self.nodes:
            out.write(f"{n.node_id},{n.mean_consumed_w * 1e6:.6g},{n.mean_harvested_w * 1e6:.6g},"
                      f"{int(n.neutral)},{n.cells_needed},{int(n.capped)}\n")
        return out.getvalue()

    def series(self, which) -> str:
        """Two-column ``node_id value_uw`` series for plotting on a log axis.

        Zero values are written as the smallest positive double so log scales
        do not drop the point.
        """
        attr = {"consumed": "mean_consumed_w", "harvested": "mean_harvested_w"}[which]
        out = io.StringIO()
        out.write(f"# node_id {which}_uw\n")
        for n in self.nodes:
            value = max(getattr(n, attr) * 1e6, np.finfo(np.float64).tiny)
            out.write(f"{n.node_id} {value:.6g}\n")
        return out.getvalue()


def cells_needed(consumed_w, per_cell_w, max_cells):
    """Smallest cell count whose harvest covers ``consumed_w`` (at least 1), capped at ``max_cells``.

    Returns ``(cells, capped)``.
    """
    if consumed_w <= 0:
        return 1, False
    if per_cell_w <= 0:
        return max_cells, True
    ratio = consumed_w / per_cell_w
    if not math.isfinite(ratio):
        # a vanishing harvest can overflow the ratio
        return max_cells, True
    n = max(1, math.ceil(ratio))
    # guard against ceil of a ratio that rounded just above an integer
    if n > 1 and (n - 1) * per_cell_w >= consumed_w:
        n -= 1
    if n > max_cells:
        return max_cells, True
    return n, False


def neutrality(node_powers: Mapping, light_traces: Mapping, model: HarvestModel) -> NeutralityReport:
    """Energy-neutrality verdict and cells needed for every node in ``node_powers``."""
    missing = sorted(set(node_powers) - set(light_traces))
    if missing:
        raise InputError(f"no light trace for nodes: {missing}")
    per_cell_model = model.single_cell()
    rows = []
    for node in sorted(node_powers):
        consumed = float(node_powers[node])
        if not consumed >= 0:
            raise InputError(f"node {node}: consumption must be non-negative")
        per_cell = mean_harvest(light_traces[node], per_cell_model)
        harvested = per_cell * model.cells
        n, capped = cells_needed(consumed, per_cell, model.max_cells)
        rows.append(NodeNeutrality(node, consumed, harvested, harvested >= consumed, n, capped))
    return NeutralityReport(tuple(rows), model)


def parse_curve(text) -> tuple:
    """Parse a ``lux,watts`` CSV into breakpoints (``#`` comments allowed)."""
    return tuple(_parse_pairs(text, ("lux", "watts")))


def read_curve(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        return parse_curve(fh.read())


def gnuplot_script(consumed_file, harvested_file, title="Energy consumed and harvested") -> str:
    return (
        f'set title "{title}"\n'
        "set logscale y\n"
        'set xlabel "node"\n'
        'set ylabel "average power [uW]"\n'
        "set key top left\n"
        f'plot "{consumed_file}" using 1:2 with linespoints title "consumed", \\\n'
        f'     "{harvested_file}" using 1:2 with linespoints title "harvested"\n'
    )
