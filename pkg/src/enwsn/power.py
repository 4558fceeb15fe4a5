"""Event-based average power model and the configuration sweep.

A node's average power is the always-on floor plus, for each operating
condition, occurrence rate times the energy of one occurrence:

    P = P_floor + sum_k rate_k * E_k,   k in {overhear, route, sample_tx, sample_only}

Every constant comes from :class:`~enwsn.hw.HwCatalog`; this module holds no
device figures of its own.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from .dbp import DbpParams, DbpResult, run_dbp
from .errors import ConfigError, InfeasibleConfigError, InputError
from .hw import (
    BASELINE_ID,
    HwCatalog,
    HwConfig,
    McuMode,
    RadioIdle,
    Software,
    Verdict,
    Wakeup,
    Workload,
    default_catalog,
    enumerate_configs,
    feasible,
    get_config,
)
from .topology import CollectionTree, NodeLoads, Topology, build_tree, node_loads

EVENT_KINDS = ("overhear", "route", "sample_tx", "sample_only")


@dataclass(frozen=True)
class Segment:
    """One component held at ``power_w`` for ``duration_s``.

    ``concurrent`` segments overlap another segment in time (the MCU staying
    awake while the radio works) and do not add to busy time.
    """

    component: str
    power_w: float
    duration_s: float
    concurrent: bool = False

    @property
    def energy_j(self):
        return self.power_w * self.duration_s


@dataclass(frozen=True)
class EventEnergy:
    energy_j: float
    busy_s: float
    segments: tuple = ()

    @classmethod
    def from_segments(cls, segments):
        segments = tuple(segments)
        energy = math.fsum(s.energy_j for s in segments)
        busy = math.fsum(s.duration_s for s in segments if not s.concurrent)
        return cls(energy, busy, segments)


@dataclass(frozen=True)
class OperatingConditionRates:
    """Occurrence rates (1/s) of the four event-driven operating conditions.

    Waiting is the residual and is billed through the floor power.
    """

    sampling_period_s: float
    overhear_per_s: float = 0.0
    route_per_s: float = 0.0
    sample_tx_per_s: float = 0.0
    sample_only_per_s: float = 0.0
    link_tx_multiplier: float = 1.0

    def as_dict(self):
        return {
            "overhear": self.overhear_per_s,
            "route": self.route_per_s,
            "sample_tx": self.sample_tx_per_s,
            "sample_only": self.sample_only_per_s,
        }

    def scaled(self, k):
        return replace(self, overhear_per_s=k * self.overhear_per_s, route_per_s=k * self.route_per_s,
                       sample_tx_per_s=k * self.sample_tx_per_s, sample_only_per_s=k * self.sample_only_per_s)


@dataclass(frozen=True)
class PowerBreakdown:
    floor_w: float
    contributions: dict
    total_w: float
    ratio: float | None = None

    def with_baseline(self, baseline_w):
        return replace(self, ratio=baseline_w / self.total_w)


# -- per-event composition ----------------------------------------------------------


def packet_airtime(catalog: HwCatalog) -> float:
    radio = catalog.radio
    if not radio.phy_rate_bps > 0 or radio.frame_bytes < 0:
        raise ConfigError("phy_rate_bps must be positive and frame_bytes non-negative")
    return 8 * radio.frame_bytes / radio.phy_rate_bps


def radio_idle_w(config: HwConfig, catalog: HwCatalog) -> float:
    """Idle power of the data transceiver.

    With a wake-up receiver the transceiver is power-gated (``deep_off_w``);
    otherwise it rests in LPM1 or LPM2.
    """
    radio = catalog.radio
    if config.wakeup is not Wakeup.NONE:
        return radio.deep_off_w
    if config.radio_idle is RadioIdle.LPM1:
        return radio.lpm1_w
    return radio.lpm2_w


def floor_power(config: HwConfig, catalog: HwCatalog | None = None) -> float:
    """Continuous power drawn while the node waits for the next event."""
    catalog = catalog or default_catalog()
    parts = [catalog.mcu.power_w(config.mcu_mode), radio_idle_w(config, catalog)]
    if config.wakeup is Wakeup.NONE:
        parts.append(catalog.radio.rx_w * catalog.mac.duty)
    else:
        wur = catalog.wur(config.wakeup)
        parts += [wur.listen_w, wur.tx_standby_w]
    if config.software is Software.MBS:
        parts.append(catalog.mbs.sleep_w)
    return math.fsum(parts)


def _mcu_wake(config, catalog):
    return Segment("mcu", catalog.mcu.active_processing_w, catalog.mcu.wake_s(config.mcu_mode))


def _radio_up(catalog):
    return Segment("radio", catalog.radio.rx_w, catalog.radio.startup_s)


def _rx_front(config, catalog):
    """Wake-up receiver decoding on the receiving side (nothing under ContikiMAC)."""
    if config.wakeup is Wakeup.NONE:
        return []
    wur = catalog.wur(config.wakeup)
    return [Segment("wur", wur.decode_w, wur.trigger_s(config.wakeup.addressed))]


def _rx_frame(catalog, airtime):
    return [
        Segment("radio", catalog.radio.rx_w, airtime),
        Segment("mcu", catalog.mcu.active_processing_w, airtime, concurrent=True),
    ]


def _tx(config, catalog, airtime, multiplier):
    """Rendezvous with the next hop, then the frame itself (``multiplier`` copies)."""
    mcu_w = catalog.mcu.active_processing_w
    tx_w = catalog.radio.tx_w
    if config.wakeup is Wakeup.NONE:
        front = catalog.mac.strobe_expected_s
        segs = [Segment("radio", tx_w, front)]
    else:
        wur = catalog.wur(config.wakeup)
        front = wur.trigger_s(config.wakeup.addressed)
        segs = [Segment("wur", wur.tx_active_w, front)]
    segs.append(Segment("mcu", mcu_w, front, concurrent=True))
    frame = multiplier * airtime
    segs += [Segment("radio", tx_w, frame), Segment("mcu", mcu_w, frame, concurrent=True)]
    return segs


def _sample(config, catalog):
    if config.software is Software.MBS:
        return [Segment("mbs", catalog.mbs.active_w, catalog.mbs.sample_active_s)]
    return [Segment("mcu", catalog.mcu.active_processing_w, catalog.mcu.sample_s)]


def event_segments(config: HwConfig, kind: str, catalog: HwCatalog, link_tx_multiplier=1.0) -> list:
    airtime = packet_airtime(catalog)
    if kind == "overhear":
        if config.wakeup.addressed:
            # the address does not match: only the wake-up receiver decodes
            return _rx_front(config, catalog)
        if config.radio_idle is RadioIdle.LPM2_FF:
            return [*_rx_front(config, catalog), _radio_up(catalog),
                    Segment("radio", catalog.radio.rx_w, catalog.radio.header_s)]
        return [*_rx_front(config, catalog), _mcu_wake(config, catalog), _radio_up(catalog),
                *_rx_frame(catalog, airtime)]
    if kind == "route":
        return [*_rx_front(config, catalog), _mcu_wake(config, catalog), _radio_up(catalog),
                *_rx_frame(catalog, airtime), *_tx(config, catalog, airtime, link_tx_multiplier)]
    if kind == "sample_tx":
        if config.software is Software.MBS:
            head = [*_sample(config, catalog), _mcu_wake(config, catalog)]
        else:
            head = [_mcu_wake(config, catalog), *_sample(config, catalog)]
        return [*head, _radio_up(catalog), *_tx(config, catalog, airtime, link_tx_multiplier)]
    if kind == "sample_only":
        if config.software is Software.MBS:
            return _sample(config, catalog)
        return [_mcu_wake(config, catalog), *_sample(config, catalog)]
    raise ConfigError(f"unknown event kind {kind!r}")


def event_energy(config: HwConfig, kind: str, catalog: HwCatalog | None = None, link_tx_multiplier=1.0):
    """Energy and busy time of one occurrence of ``kind`` under ``config``."""
    catalog = catalog or default_catalog()
    if link_tx_multiplier < 1:
        raise ConfigError("link_tx_multiplier must be >= 1")
    return EventEnergy.from_segments(event_segments(config, kind, catalog, link_tx_multiplier))


# -- rates and node power -------------------------------------------------------------


def own_tx_rate(software, sampling_period_s, dbp: DbpResult | None = None, horizon_s=None):
    """Rate at which a node originates packets under ``software``."""
    software = Software(software)
    if not sampling_period_s > 0:
        raise ConfigError("sampling_period_s must be positive")
    if software is Software.NO_DBP:
        return 1.0 / sampling_period_s
    if dbp is None:
        raise ConfigError(f"software {software.value} needs a DBP result")
    if horizon_s is None:
        horizon_s = dbp.horizon_s
        if not horizon_s > 0:
            horizon_s = dbp.samples_total * sampling_period_s
    return dbp.transmissions / horizon_s


def condition_rates(loads: NodeLoads, dbp: DbpResult | None, sampling_period_s, software,
                    horizon_s=None) -> OperatingConditionRates:
    software = Software(software)
    sample_rate = 1.0 / sampling_period_s if sampling_period_s > 0 else math.nan
    tx = own_tx_rate(software, sampling_period_s, dbp, horizon_s)
    sample_only = 0.0 if software is Software.NO_DBP else max(sample_rate - tx, 0.0)
    return OperatingConditionRates(
        sampling_period_s=sampling_period_s,
        overhear_per_s=loads.overheard_per_s,
        route_per_s=loads.intended_rx_per_s,
        sample_tx_per_s=tx,
        sample_only_per_s=sample_only,
        link_tx_multiplier=loads.link_tx_multiplier,
    )


def event_table(config, catalog, link_tx_multiplier=1.0):
    return {k: event_energy(config, k, catalog, link_tx_multiplier) for k in EVENT_KINDS}


def workload(config, rates: OperatingConditionRates, catalog) -> Workload:
    events = event_table(config, catalog, rates.link_tx_multiplier)
    return Workload(rates.sampling_period_s, rates.as_dict(), {k: e.busy_s for k, e in events.items()})


def check_feasible(config, rates, catalog) -> Verdict:
    return feasible(config, workload(config, rates, catalog), catalog)


def node_power(config: HwConfig, rates: OperatingConditionRates, catalog: HwCatalog | None = None,
               check=True) -> PowerBreakdown:
    """Weighted-average power of one node; refuses infeasible configurations."""
    catalog = catalog or default_catalog()
    if check:
        verdict = check_feasible(config, rates, catalog)
        if not verdict:
            raise InfeasibleConfigError(verdict.reason)
    events = event_table(config, catalog, rates.link_tx_multiplier)
    floor = floor_power(config, catalog)
    contrib = {k: r * events[k].energy_j for k, r in rates.as_dict().items()}
    total = math.fsum([floor, *contrib.values()])
    return PowerBreakdown(floor, contrib, total)


# -- network evaluation ---------------------------------------------------------------


@dataclass
class Network:
    """A topology, its collection tree and one light trace per non-sink node."""

    topology: Topology
    traces: Mapping
    tree: CollectionTree | None = None
    dbp_params: DbpParams = field(default_factory=DbpParams)
    dbp_results: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tree is None:
            self.tree = build_tree(self.topology)
        missing = [n for n in self.tree.parent if n not in self.traces]
        if missing:
            raise InputError(f"no trace for nodes: {missing}")

    @property
    def nodes(self):
        return self.tree.nodes

    def dbp(self, node):
        if node not in self.dbp_results:
            self.dbp_results[node] = run_dbp(self.traces[node], self.dbp_params)
        return self.dbp_results[node]

    def rates(self, software) -> dict:
        """Operating-condition rates for every node under ``software``.

        Own transmission rates are computed for all nodes first so forwarding
        and overhearing loads are consistent across the network.
        """
        software = Software(software)
        own, periods, dbps = {}, {}, {}
        for n in self.nodes:
            period = self.traces[n].period_s
            dbps[n] = None if software is Software.NO_DBP else self.dbp(n)
            periods[n] = period
            own[n] = own_tx_rate(software, period, dbps[n])
        loads = node_loads(self.tree, self.topology, own)
        return {n: condition_rates(loads[n], dbps[n], periods[n], software) for n in self.nodes}


@dataclass(frozen=True)
class SweepCell:
    config: HwConfig
    avg_w: float | None
    ratio: float | None
    reason: str | None = None
    per_node: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def feasible(self):
        return self.reason is None

    @property
    def status(self):
        return "ok" if self.feasible else f"infeasible: {self.reason}"


def evaluate_cell(network: Network, config: HwConfig, rates: dict, catalog: HwCatalog) -> SweepCell:
    per_node = {}
    for n in network.nodes:
        verdict = check_feasible(config, rates[n], catalog)
        if not verdict:
            return SweepCell(config, None, None, f"{verdict.reason} (node {n})")
        per_node[n] = node_power(config, rates[n], catalog, check=False)
    avg = math.fsum(b.total_w for b in per_node.values()) / len(per_node)
    return SweepCell(config, avg, None, None, per_node)


@dataclass
class SweepTable:
    cells: dict
    baseline_w: float
    modes: tuple

    def cell(self, config_id, software) -> SweepCell:
        return self.cells[(config_id, Software(software))]

    @property
    def config_ids(self):
        return sorted({k[0] for k in self.cells})

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("id,mcu,radio,wakeup,software,avg_uw,ratio,status\n")
        for cid in self.config_ids:
            for sw in self.modes:
                c = self.cells[(cid, sw)]
                cfg = c.config
                avg = "" if c.avg_w is None else f"{c.avg_w * 1e6:.6g}"
                ratio = "" if c.ratio is None else f"{c.ratio:.6g}"
                out.write(f"{cid},{cfg.mcu_mode.value},{cfg.radio_idle.value},{cfg.wakeup.value},"
                          f"{sw.value},{avg},{ratio},{c.status}\n")
        return out.getvalue()

    def per_node_csv(self) -> str:
        out = io.StringIO()
        out.write("id,software,node_id,total_uw,floor_uw," + ",".join(f"{k}_uw" for k in EVENT_KINDS) + "\n")
        for cid in self.config_ids:
            for sw in self.modes:
                c = self.cells[(cid, sw)]
                for n, b in sorted(c.per_node.items()):
                    parts = ",".join(f"{b.contributions[k] * 1e6:.6g}" for k in EVENT_KINDS)
                    out.write(f"{cid},{sw.value},{n},{b.total_w * 1e6:.6g},{b.floor_w * 1e6:.6g},{parts}\n")
        return out.getvalue()

    def to_text(self) -> str:
        return format_table(self)

    def mbs_savings(self, config_id):
        return mbs_savings(
            {n: b.total_w for n, b in self.cell(config_id, Software.DBP).per_node.items()},
            {n: b.total_w for n, b in self.cell(config_id, Software.MBS).per_node.items()},
        )


def sweep(network: Network, software_modes=tuple(Software), catalog: HwCatalog | None = None,
          config_ids=None) -> SweepTable:
    """Evaluate every (configuration, software) cell on ``network``.

    Cells that fail feasibility carry the reason instead of a power figure;
    one bad cell never aborts the others. The ratio column is relative to
    configuration 1 without DBP, which is always evaluated.
    """
    catalog = catalog or default_catalog()
    modes = tuple(Software(s) for s in software_modes)
    ids = [c.id for c in enumerate_configs()] if config_ids is None else sorted(config_ids)
    for cid in ids:
        get_config(cid)
    if Software.MBS in modes and network.dbp_params.m > catalog.mbs.max_buffered_samples:
        raise ConfigError(f"DBP window m={network.dbp_params.m} exceeds the MBS buffer "
                          f"({catalog.mbs.max_buffered_samples} samples)")

    rates = {sw: network.rates(sw) for sw in {*modes, Software.NO_DBP}}
    base = evaluate_cell(network, get_config(BASELINE_ID), rates[Software.NO_DBP], catalog)
    if not base.feasible:
        raise InfeasibleConfigError(f"baseline configuration is infeasible: {base.reason}")
    cells = {}
    for cid in ids:
        for sw in modes:
            cell = evaluate_cell(network, get_config(cid, sw), rates[sw], catalog)
            if cell.feasible:
                cell = replace(cell, ratio=base.avg_w / cell.avg_w)
            cells[(cid, sw)] = cell
    return SweepTable(cells, base.avg_w, modes)


# -- MBS savings ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Savings:
    min: float
    avg: float
    max: float
    per_node: dict = field(default_factory=dict, compare=False, repr=False)


# representative sleep-mode configurations for the MBS-over-DBP comparison, one per WuR kind
SAVINGS_CONFIGS = {"us": 6, "radio": 9}


def mbs_savings(dbp_power: Mapping, mbs_power: Mapping) -> Savings:
    """Per-node percentage saved by MBS over software DBP: ``100 * (1 - P_mbs / P_dbp)``."""
    if set(dbp_power) != set(mbs_power):
        raise InputError("DBP and MBS power maps cover different nodes")
    if not dbp_power:
        raise InputError("no nodes")
    per = {n: 100.0 * (1.0 - mbs_power[n] / dbp_power[n]) for n in sorted(dbp_power)}
    vals = list(per.values())
    return Savings(min(vals), math.fsum(vals) / len(vals), max(vals), per)


# -- text rendering --------------------------------------------------------------------------

_MCU_LABEL = {McuMode.STANDBY: "Standby", McuMode.SLEEP: "Sleep", McuMode.HIBERNATION: "Hib.",
              McuMode.ML_HIBERNATION: "ML Hib."}
_RADIO_LABEL = {RadioIdle.LPM1: "LPM1", RadioIdle.LPM2: "LPM2", RadioIdle.LPM2_FF: "LPM2+FF"}
_WAKE_LABEL = {Wakeup.NONE: "none", Wakeup.US: "US", Wakeup.US_ADDRESSED: "USa", Wakeup.RADIO: "Radio",
               Wakeup.RADIO_ADDRESSED: "Radioa"}
_MODE_LABEL = {Software.NO_DBP: "no-DBP", Software.DBP: "DBP", Software.MBS: "MBS"}


def format_uw(watts):
    uw = watts * 1e6
    if uw >= 100:
        return f"{uw:.0f}"
    return f"{uw:.3g}" if uw >= 1 else f"{uw:.2g}"


def format_ratio(ratio):
    return f"{ratio:.1f}x" if ratio < 10 else f"{ratio:.0f}x"


def format_table(table: SweepTable) -> str:
    reasons = []
    header = f"{'ID':>3}  {'MCU':<8}{'Transceiver':<12}{'Wake-Up':<8}"
    for sw in table.modes:
        header += f"| {_MODE_LABEL[sw] + ' [uW]':>12} {'Ratio':>7} "
    lines = [header, "-" * len(header)]
    for cid in table.config_ids:
        cfg = table.cell(cid, table.modes[0]).config
        row = f"{cid:>3}  {_MCU_LABEL[cfg.mcu_mode]:<8}{_RADIO_LABEL[cfg.radio_idle]:<12}{_WAKE_LABEL[cfg.wakeup]:<8}"
        for sw in table.modes:
            c = table.cell(cid, sw)
            if c.feasible:
                row += f"| {format_uw(c.avg_w):>12} {format_ratio(c.ratio):>7} "
            else:
                if c.reason not in reasons:
                    reasons.append(c.reason)
                mark = f"-[{reasons.index(c.reason) + 1}]"
                row += f"| {mark:>12} {'-':>7} "
        lines.append(row.rstrip())
    lines.append("")
    lines.append(f"baseline (ID {BASELINE_ID}, no-DBP): {format_uw(table.baseline_w)} uW")
    for i, reason in enumerate(reasons, start=1):
        lines.append(f"[{i}] {reason}")
    if any(table.cell(cid, table.modes[0]).config.wakeup is not Wakeup.NONE for cid in table.config_ids):
        lines.append("note: rows with a wake-up receiver power-gate the data transceiver (radio.deep_off_w) "
                     "instead of holding it in LPM2")
    return "\n".join(lines) + "\n"
