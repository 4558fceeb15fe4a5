"""Sensor time series: parsing, synthesis, calibration and validation.

Timestamps are float seconds with a dataset-local zero; only differences
matter, so no calendar or timezone logic is applied beyond what is needed to
turn the Intel-lab ``date time`` columns into deltas.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyTraceError, ParseError, ValidationError

SECONDS_PER_DAY = 86400.0


class Kind(str, Enum):
    LIGHT = "light"
    TEMPERATURE = "temperature"
    HUMIDITY = "humidity"


class Unit(str, Enum):
    LUX = "lux"
    CELSIUS = "celsius"
    RH_PERCENT = "rh_percent"
    RAW = "raw"


_NATIVE_UNIT = {Kind.LIGHT: Unit.LUX, Kind.TEMPERATURE: Unit.CELSIUS, Kind.HUMIDITY: Unit.RH_PERCENT}

# column index in an Intel-lab record, keyed by the sensor kind
_INTEL_COLUMN = {Kind.TEMPERATURE: 4, Kind.HUMIDITY: 5, Kind.LIGHT: 6}


@dataclass(frozen=True)
class SensorTrace:
    """Timestamped scalar samples for one node and one sensor kind.

    ``holes`` lists ``(index, gap_s)`` for every inter-sample gap larger than
    ``period_s + jitter_s``; ``index`` is the position of the sample that
    follows the gap. Holes are recorded, never filled.
    """

    node_id: int
    kind: Kind
    unit: Unit
    period_s: float
    t: np.ndarray
    v: np.ndarray
    holes: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "unit", Unit(self.unit))
        t = np.asarray(self.t, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)

    def __len__(self):
        return len(self.t)

    @property
    def duration_s(self):
        """Nominal horizon covered by the samples: one period per sample."""
        return len(self.t) * self.period_s

    def samples(self) -> Iterator[tuple[float, float]]:
        return zip(self.t.tolist(), self.v.tolist())

    def __eq__(self, other):
        if not isinstance(other, SensorTrace):
            return NotImplemented
        return (
            self.node_id == other.node_id
            and self.kind == other.kind
            and self.unit == other.unit
            and self.period_s == other.period_s
            and self.holes == other.holes
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None


def check_unit(kind, unit):
    kind, unit = Kind(kind), Unit(unit)
    if unit is not Unit.RAW and unit is not _NATIVE_UNIT[kind]:
        raise ValidationError(f"unit {unit.value!r} is inconsistent with kind {kind.value!r}")
    return kind, unit


def infer_period(t):
    if len(t) < 2:
        return None
    return float(np.median(np.diff(t)))


def find_holes(t, period_s, jitter_s):
    gaps = np.diff(t)
    idx = np.nonzero(gaps > period_s + jitter_s)[0]
    return tuple((int(i) + 1, float(gaps[i])) for i in idx)


def make_trace(node_id, kind, unit, t, v, period_s=None, jitter=0.5):
    """Validate raw arrays and build a :class:`SensorTrace`.

    ``jitter`` is the hole tolerance as a fraction of the period. Samples are
    sorted by time (stable); duplicate timestamps are rejected.
    """
    kind, unit = check_unit(kind, unit)
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if t.shape != v.shape or t.ndim != 1:
        raise ValidationError("t and v must be 1-d arrays of equal length")
    if len(t) == 0:
        raise EmptyTraceError("trace has no samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ValidationError("non-finite sample")
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    dup = np.nonzero(np.diff(t) <= 0)[0]
    if len(dup):
        raise ValidationError(f"duplicate timestamp {t[dup[0]]!r}")
    if period_s is None:
        period_s = infer_period(t)
        if period_s is None:
            raise ValidationError("cannot infer the sampling period from a single sample")
    if not period_s > 0:
        raise ValidationError("period_s must be positive")
    if jitter < 0:
        raise ValidationError("jitter must be non-negative")
    holes = find_holes(t, period_s, jitter * period_s)
    return SensorTrace(node_id, kind, unit, float(period_s), t, v, holes)


# -- CSV ``t,v`` -------------------------------------------------------------


def parse_trace(text, kind, unit, node_id=0, period_s=None, jitter=0.5):
    """Parse a ``t,v`` CSV document into a validated trace."""
    lines = text.splitlines()
    header_seen = False
    ts, vs = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["t", "v"]:
                raise ParseError("expected header 't,v'", lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", lineno)
        try:
            ts.append(float(parts[0]))
            vs.append(float(parts[1]))
        except ValueError:
            raise ParseError(f"not a number in {line!r}", lineno) from None
    if not header_seen:
        raise ParseError("missing header 't,v'", 1)
    if not ts:
        raise EmptyTraceError("trace body is empty")
    return make_trace(node_id, kind, unit, ts, vs, period_s=period_s, jitter=jitter)


def format_time(t):
    t = float(t)
    return str(int(t)) if t.is_integer() and abs(t) < 2**53 else repr(t)


def format_value(v):
    return f"{float(v):.6g}"


def serialize_trace(trace):
    """Render a trace as ``t,v`` CSV; values use 6 significant digits."""
    out = io.StringIO()
    out.write("t,v\n")
    for t, v in trace.samples():
        out.write(f"{format_time(t)},{format_value(v)}\n")
    return out.getvalue()


def read_trace(path, kind, unit, node_id=0, period_s=None, jitter=0.5):
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read(), kind, unit, node_id=node_id, period_s=period_s, jitter=jitter)


def write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_trace(trace))


# -- Intel Berkeley lab ------------------------------------------------------


@dataclass
class IntelLab(Mapping):
    """Per-mote traces parsed from the Intel-lab record stream.

    Behaves as a read-only mapping ``moteid -> SensorTrace``; ``dropped``
    counts records whose selected column was missing or NaN and
    ``duplicates`` counts repeated timestamps discarded within a mote.
    """

    traces: dict
    dropped: int = 0
    duplicates: int = 0

    def __getitem__(self, key):
        return self.traces[key]

    def __iter__(self):
        return iter(self.traces)

    def __len__(self):
        return len(self.traces)


def _intel_timestamp(date, clock):
    try:
        return datetime.fromisoformat(f"{date} {clock}")
    except ValueError:
        return None


def parse_intel_lab(text, kind, period_s=31.0, jitter=0.5):
    """Parse the published Intel-lab ``data.txt`` format.

    Each record is ``date time epoch moteid temperature humidity light
    voltage``. Timestamps become seconds from the first valid timestamp in the
    file.
    """
    kind = Kind(kind)
    col = _INTEL_COLUMN[kind]
    per_mote: dict[int, list[tuple[datetime, float]]] = {}
    dropped = 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) < 4:
            dropped += 1
            continue
        try:
            mote = int(parts[3])
        except ValueError:
            raise ParseError(f"bad moteid {parts[3]!r}", lineno) from None
        stamp = _intel_timestamp(parts[0], parts[1])
        if stamp is None or len(parts) <= col:
            dropped += 1
            continue
        try:
            value = float(parts[col])
        except ValueError:
            dropped += 1
            continue
        if math.isnan(value) or math.isinf(value):
            dropped += 1
            continue
        per_mote.setdefault(mote, []).append((stamp, value))
    if not per_mote:
        raise EmptyTraceError("no valid records for kind " + kind.value)

    origin = min(s for recs in per_mote.values() for s, _ in recs)
    traces = {}
    duplicates = 0
    for mote in sorted(per_mote):
        recs = per_mote[mote]
        t = np.array([(s - origin).total_seconds() for s, _ in recs])
        v = np.array([x for _, x in recs])
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
        keep = np.concatenate(([True], np.diff(t) > 0))
        duplicates += int(np.count_nonzero(~keep))
        traces[mote] = make_trace(mote, kind, _NATIVE_UNIT[kind], t[keep], v[keep], period_s, jitter)
    return IntelLab(traces, dropped, duplicates)


# -- synthesis ---------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    days: int = 1
    period_s: float = 30.0
    base: float = 0.0
    diurnal_amplitude: float = 0.0
    noise_sigma: float = 0.0
    step_events_per_day: float = 0.0
    step_magnitude: float = 0.0
    seed: int = 0
    minimum: float | None = None

    def __post_init__(self):
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if not self.period_s > 0:
            raise ConfigError("period_s must be positive")
        if self.noise_sigma < 0 or self.step_events_per_day < 0:
            raise ConfigError("noise_sigma and step_events_per_day must be non-negative")


def synth_trace(spec: SynthSpec, node_id=0, kind=Kind.LIGHT, unit=Unit.LUX) -> SensorTrace:
    """Generate a reproducible synthetic trace.

    ``v(t) = base + A sin(2 pi t / 86400) + N(0, sigma) + steps(t)``.

    Randomness comes from numpy's ``Generator`` over the PCG64 bit generator
    seeded with ``spec.seed``: first the Gaussian noise vector
    (``standard_normal``), then step arrival gaps (``exponential``), then one
    ``random`` draw per step for its sign. Steps arrive as a Poisson process
    with ``step_events_per_day`` mean rate. The level returns towards zero
    offset: a step from a positive offset goes down, from a negative offset
    goes up, and from zero offset takes a random sign, so the accumulated
    offset stays within ``[-step_magnitude, +step_magnitude]``. Values are
    finally clamped at ``minimum`` when one is set.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = int(round(spec.days * SECONDS_PER_DAY / spec.period_s))
    t = np.arange(n, dtype=np.float64) * spec.period_s
    v = spec.base + spec.diurnal_amplitude * np.sin(2.0 * np.pi * t / SECONDS_PER_DAY)
    noise = rng.standard_normal(n)
    if spec.noise_sigma > 0:
        v = v + spec.noise_sigma * noise

    if spec.step_events_per_day > 0 and spec.step_magnitude != 0:
        horizon = n * spec.period_s
        mean_gap = SECONDS_PER_DAY / spec.step_events_per_day
        step_times, offsets = [], []
        now, offset = 0.0, 0.0
        while True:
            now += rng.exponential(mean_gap)
            if now >= horizon:
                break
            if offset > 0:
                offset -= spec.step_magnitude
            elif offset < 0:
                offset += spec.step_magnitude
            else:
                offset = spec.step_magnitude if rng.random() < 0.5 else -spec.step_magnitude
            step_times.append(now)
            offsets.append(offset)
        if step_times:
            which = np.searchsorted(np.asarray(step_times), t, side="right")
            level = np.concatenate(([0.0], offsets))
            v = v + level[which]
    if spec.minimum is not None:
        v = np.maximum(v, spec.minimum)
    return SensorTrace(node_id, kind, unit, float(spec.period_s), t, v, ())


# -- calibration -------------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    """Monotone piecewise-linear ``raw -> engineering unit`` map, clamped at both ends."""

    breakpoints: tuple

    def __post_init__(self):
        pts = tuple((float(r), float(e)) for r, e in self.breakpoints)
        if len(pts) < 2:
            raise ConfigError("calibration needs at least 2 breakpoints")
        raws = [r for r, _ in pts]
        if any(b <= a for a, b in zip(raws, raws[1:])):
            raise ConfigError("calibration raw values must be strictly increasing")
        object.__setattr__(self, "breakpoints", pts)

    def __call__(self, raw):
        xs = [r for r, _ in self.breakpoints]
        ys = [e for _, e in self.breakpoints]
        return np.interp(raw, xs, ys)


def apply_calibration(trace: SensorTrace, cal: Calibration, unit=Unit.LUX) -> SensorTrace:
    if not isinstance(cal, Calibration):
        cal = Calibration(cal)
    if trace.unit is not Unit.RAW:
        raise ValidationError(f"calibration expects a raw trace, got {trace.unit.value}")
    kind, unit = check_unit(trace.kind, unit)
    return SensorTrace(trace.node_id, kind, unit, trace.period_s, trace.t, cal(trace.v), trace.holes)


def parse_calibration(text) -> Calibration:
    """Parse a ``raw,value`` CSV into a :class:`Calibration`."""
    return Calibration(_parse_pairs(text, ("raw", "value")))


def _parse_pairs(text, header: Sequence[str]):
    pairs = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [c.strip() for c in line.split(",")]
        if not header_seen:
            if fields != list(header):
                raise ParseError(f"expected header {','.join(header)!r}", lineno)
            header_seen = True
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        try:
            pairs.append((float(fields[0]), float(fields[1])))
        except ValueError:
            raise ParseError(f"not a number in {line!r}", lineno) from None
    return pairs
