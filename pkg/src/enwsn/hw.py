"""Hardware catalog, the 23-row configuration matrix and feasibility rules.

All power figures are watts and all durations seconds. The catalog is
immutable; :func:`load_catalog` applies ``section.field = value`` overrides on
top of :func:`default_catalog`.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import ConfigError, ParseError

CATALOG_ENV = "ENWSN_CATALOG"


class McuMode(str, Enum):
    STANDBY = "standby"
    SLEEP = "sleep"
    HIBERNATION = "hibernation"
    ML_HIBERNATION = "ml_hibernation"


class RadioIdle(str, Enum):
    LPM1 = "lpm1"
    LPM2 = "lpm2"
    LPM2_FF = "lpm2_ff"


class Wakeup(str, Enum):
    NONE = "none"
    US = "us"
    US_ADDRESSED = "us_addressed"
    RADIO = "radio"
    RADIO_ADDRESSED = "radio_addressed"

    @property
    def wur_kind(self):
        if self is Wakeup.NONE:
            return None
        return "us" if self.value.startswith("us") else "radio"

    @property
    def addressed(self):
        return self.value.endswith("_addressed")


class Software(str, Enum):
    NO_DBP = "no_dbp"
    DBP = "dbp"
    MBS = "mbs"


@dataclass(frozen=True)
class McuSpec:
    active_processing_w: float = 13e-3
    # platform figure while transmitting; the event model bills the
    # transceiver separately and keeps the MCU at active_processing_w
    active_tx_w: float = 66e-3
    standby_w: float = 14.67e-6
    sleep_w: float = 1.32e-6
    hibernation_w: float = 0.36e-6
    ml_hibernation_w: float = 0.36e-6
    wake_standby_s: float = 25e-3
    wake_sleep_s: float = 25e-3
    wake_hibernation_s: float = 500e-3
    wake_ml_hibernation_s: float = 27e-3
    sample_s: float = 5e-3

    def power_w(self, mode):
        return getattr(self, f"{McuMode(mode).value}_w")

    def wake_s(self, mode):
        return getattr(self, f"wake_{McuMode(mode).value}_s")

    @staticmethod
    def retains_data(mode):
        """Standby and sleep keep RAM; hibernation restores the VM heap on wake; ML hibernation keeps nothing."""
        return McuMode(mode) is not McuMode.ML_HIBERNATION


@dataclass(frozen=True)
class RadioSpec:
    lpm1_w: float = 3e-3
    lpm2_w: float = 13.5e-6
    rx_w: float = 69.9e-3
    tx_min_dbm: float = -18.0
    tx_min_w: float = 48.6e-3
    tx_max_dbm: float = 5.0
    tx_max_w: float = 100.8e-3
    tx_dbm: float = 0.0
    phy_rate_bps: float = 250000.0
    frame_bytes: int = 128
    header_s: float = 0.5e-3
    startup_s: float = 0.3e-3
    deep_off_w: float = 0.0
    frame_filtering: bool = True

    def tx_w_at(self, dbm):
        if not self.tx_min_dbm <= dbm <= self.tx_max_dbm:
            raise ConfigError(f"tx power {dbm} dBm outside [{self.tx_min_dbm}, {self.tx_max_dbm}]")
        frac = (dbm - self.tx_min_dbm) / (self.tx_max_dbm - self.tx_min_dbm)
        return self.tx_min_w + frac * (self.tx_max_w - self.tx_min_w)

    @property
    def tx_w(self):
        return self.tx_w_at(self.tx_dbm)


@dataclass(frozen=True)
class WurSpec:
    kind: str
    listen_w: float
    decode_w: float
    tx_standby_w: float
    tx_active_w: float
    trigger_broadcast_s: float
    trigger_addressed_s: float
    range_m: float
    throughput_bps: float
    radiation_pattern: str = ""
    frequency: str = ""
    sensitivity_dbm: float | None = None

    def trigger_s(self, addressed):
        return self.trigger_addressed_s if addressed else self.trigger_broadcast_s


US_WUR = WurSpec("us", 1640e-9, 14e-6, 40e-9, 37e-3, 50e-3, 450e-3, 15.0, 20.0, "55 deg at -6dB", "40kHz")
RADIO_WUR = WurSpec("radio", 462e-9, 49e-6, 690e-9, 78e-3, 130e-6, 0.8e-3, 20.0, 10000.0, "omnidirectional",
                    "868MHz", -42.0)


@dataclass(frozen=True)
class MbsSpec:
    sleep_w: float = 36e-9
    active_w: float = 10.8e-6
    sample_active_s: float = 10e-3
    ram_bytes: int = 1024
    max_buffered_samples: int = 512


@dataclass(frozen=True)
class MacSpec:
    """ContikiMAC duty cycling, used only when no wake-up receiver is fitted."""

    interval_s: float = 0.1
    channel_check_s: float = 1e-3

    @property
    def strobe_expected_s(self):
        return self.interval_s / 2

    @property
    def duty(self):
        return self.channel_check_s / self.interval_s


@dataclass(frozen=True)
class HarvesterCatalogEntry:
    technology: str
    density_min: float
    density_max: float
    unit: str
    qualifier: str = ""


INDOOR_HARVESTERS = (
    HarvesterCatalogEntry("photovoltaic", 0.0, 10.0, "uW/cm2", "less than"),
    HarvesterCatalogEntry("electromagnetic", 1.0, 4.0, "uW/cm3"),
    HarvesterCatalogEntry("vibration (electrostatic)", 3.8, 3.8, "uW/cm2"),
    HarvesterCatalogEntry("radio frequency", 0.1, 0.1, "uW/cm2"),
    HarvesterCatalogEntry("acoustic noise", 0.003, 0.096, "uW/cm3"),
)


@dataclass(frozen=True)
class HwCatalog:
    mcu: McuSpec = field(default_factory=McuSpec)
    radio: RadioSpec = field(default_factory=RadioSpec)
    wur_us: WurSpec = US_WUR
    wur_radio: WurSpec = RADIO_WUR
    mbs: MbsSpec = field(default_factory=MbsSpec)
    mac: MacSpec = field(default_factory=MacSpec)
    harvesters: tuple = INDOOR_HARVESTERS

    def wur(self, kind):
        if kind in ("us", Wakeup.US, Wakeup.US_ADDRESSED):
            return self.wur_us
        if kind in ("radio", Wakeup.RADIO, Wakeup.RADIO_ADDRESSED):
            return self.wur_radio
        raise ConfigError(f"unknown wake-up receiver {kind!r}")


def default_catalog() -> HwCatalog:
    return HwCatalog()


# -- overrides ----------------------------------------------------------------

_SECTIONS = ("mcu", "radio", "wur_us", "wur_radio", "mbs", "mac")
_UNIT_SUFFIXES = ("_w", "_s", "_bps", "_dbm", "_m")
_UNITLESS = {"frame_bytes", "ram_bytes", "max_buffered_samples", "frame_filtering"}


def parse_catalog_overrides(text) -> dict:
    """Parse ``section.field = value`` lines (``#`` comments allowed).

    Field names carry their unit as a suffix (``_w``, ``_s``, ``_bps``,
    ``_dbm``, ``_m``); counts (``*_bytes``, ``max_buffered_samples``) and the
    ``frame_filtering`` flag are unitless.
    """
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ParseError(f"unknown catalog key {key!r}", lineno)
        if name not in _UNITLESS and not name.endswith(_UNIT_SUFFIXES):
            raise ParseError(f"catalog key {key!r} lacks a unit suffix", lineno)
        try:
            if name == "frame_filtering":
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError
                parsed = value.lower() in ("true", "1")
            elif name in _UNITLESS:
                parsed = int(value)
            else:
                parsed = float(value)
        except ValueError:
            raise ParseError(f"bad value for {key}: {value!r}", lineno) from None
        overrides[key] = parsed
    return overrides


def apply_overrides(catalog: HwCatalog, overrides: Mapping[str, object]) -> HwCatalog:
    sections = {}
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        sections.setdefault(section, {})[name] = value
    changes = {}
    for section, fields in sections.items():
        current = getattr(catalog, section, None)
        if current is None:
            raise ConfigError(f"unknown catalog section {section!r}")
        known = {f.name for f in dataclasses.fields(current)}
        unknown = set(fields) - known
        if unknown:
            raise ConfigError(f"unknown fields in {section}: {sorted(unknown)}")
        changes[section] = dataclasses.replace(current, **fields)
    return dataclasses.replace(catalog, **changes)


def load_catalog(path=None) -> HwCatalog:
    """Default catalog with overrides from ``path`` or ``$ENWSN_CATALOG``."""
    path = path or os.environ.get(CATALOG_ENV) or None
    catalog = default_catalog()
    if path is None:
        return catalog
    with open(path, encoding="utf-8") as fh:
        return apply_overrides(catalog, parse_catalog_overrides(fh.read()))


# -- configuration matrix -----------------------------------------------------


@dataclass(frozen=True)
class HwConfig:
    id: int
    mcu_mode: McuMode
    radio_idle: RadioIdle
    wakeup: Wakeup
    software: Software = Software.NO_DBP

    def __post_init__(self):
        object.__setattr__(self, "mcu_mode", McuMode(self.mcu_mode))
        object.__setattr__(self, "radio_idle", RadioIdle(self.radio_idle))
        object.__setattr__(self, "wakeup", Wakeup(self.wakeup))
        object.__setattr__(self, "software", Software(self.software))

    def with_software(self, software):
        return dataclasses.replace(self, software=Software(software))

    @property
    def triple(self):
        return (self.mcu_mode, self.radio_idle, self.wakeup)


_M, _R, _W = McuMode, RadioIdle, Wakeup
_TABLE = (
    (_M.STANDBY, _R.LPM1, _W.NONE),
    (_M.STANDBY, _R.LPM2, _W.NONE),
    (_M.STANDBY, _R.LPM2_FF, _W.NONE),
    (_M.SLEEP, _R.LPM2, _W.NONE),
    (_M.SLEEP, _R.LPM2_FF, _W.NONE),
    (_M.SLEEP, _R.LPM2, _W.US),
    (_M.SLEEP, _R.LPM2_FF, _W.US),
    (_M.SLEEP, _R.LPM2, _W.US_ADDRESSED),
    (_M.SLEEP, _R.LPM2, _W.RADIO),
    (_M.SLEEP, _R.LPM2_FF, _W.RADIO),
    (_M.SLEEP, _R.LPM2, _W.RADIO_ADDRESSED),
    (_M.HIBERNATION, _R.LPM2, _W.US),
    (_M.HIBERNATION, _R.LPM2_FF, _W.US),
    (_M.HIBERNATION, _R.LPM2, _W.US_ADDRESSED),
    (_M.HIBERNATION, _R.LPM2, _W.RADIO),
    (_M.HIBERNATION, _R.LPM2_FF, _W.RADIO),
    (_M.HIBERNATION, _R.LPM2, _W.RADIO_ADDRESSED),
    (_M.ML_HIBERNATION, _R.LPM2, _W.US),
    (_M.ML_HIBERNATION, _R.LPM2_FF, _W.US),
    (_M.ML_HIBERNATION, _R.LPM2, _W.US_ADDRESSED),
    (_M.ML_HIBERNATION, _R.LPM2, _W.RADIO),
    (_M.ML_HIBERNATION, _R.LPM2_FF, _W.RADIO),
    (_M.ML_HIBERNATION, _R.LPM2, _W.RADIO_ADDRESSED),
)

BASELINE_ID = 1


def enumerate_configs(software=Software.NO_DBP) -> list[HwConfig]:
    return [HwConfig(i, *row, software=software) for i, row in enumerate(_TABLE, start=1)]


def get_config(config_id, software=Software.NO_DBP) -> HwConfig:
    if not 1 <= config_id <= len(_TABLE):
        raise ConfigError(f"configuration id must be in 1..{len(_TABLE)}, got {config_id}")
    return HwConfig(config_id, *_TABLE[config_id - 1], software=software)


# -- feasibility --------------------------------------------------------------


@dataclass(frozen=True)
class Workload:
    """Per-node workload summary: event rates (1/s) and busy time per event (s)."""

    sampling_period_s: float
    rates: Mapping[str, float] = field(default_factory=dict)
    busy_s: Mapping[str, float] = field(default_factory=dict)

    @property
    def utilization(self):
        return sum(rate * self.busy_s.get(kind, 0.0) for kind, rate in self.rates.items())


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None

    def __bool__(self):
        return self.ok


NO_RETENTION = "no data retention: memory-less hibernation cannot keep the DBP model between samples"


def feasible(config: HwConfig, workload: Workload, catalog: HwCatalog | None = None) -> Verdict:
    """Apply the feasibility rules to one node's workload.

    MBS is always accepted. Otherwise a configuration is rejected when DBP
    runs on an MCU without data retention, when the sampling period is
    shorter than the MCU wake-up time, or, without DBP in hibernation, when
    the events keep the MCU busy 100% of the time or more. Busy time per event
    already includes the wake-up transition.
    """
    catalog = catalog or default_catalog()
    if config.software is Software.MBS:
        return Verdict(True)
    if config.software is Software.DBP and not McuSpec.retains_data(config.mcu_mode):
        return Verdict(False, NO_RETENTION)
    wake = catalog.mcu.wake_s(config.mcu_mode)
    if workload.sampling_period_s < wake:
        return Verdict(False, f"sampling period {workload.sampling_period_s:g} s is shorter than the "
                              f"{wake:g} s MCU wake-up time")
    if config.software is Software.NO_DBP and config.mcu_mode is McuMode.HIBERNATION:
        u = workload.utilization
        if u >= 1.0:
            return Verdict(False, f"MCU utilization overrun ({u:.2f}): hibernation wake-up cannot keep up "
                                  f"with the event rate")
    return Verdict(True)
