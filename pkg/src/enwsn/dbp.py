"""Derivative-Based Prediction (DBP).

A node fits a line through the averages of the first and last ``l`` samples
of its latest ``m``-sample window and ships it to the sink. Afterwards every
sample is compared with the line; the sink replays the same line, so samples
within tolerance never leave the node. After ``w_consec + 1`` consecutive
misses the node refits on the current window and sends the new model.
"""

from __future__ import annotations

import io
import math
import numbers
from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .errors import ConfigError, FitError, InsufficientDataError, ParseError, ValidationError
from .trace import SensorTrace

TOLERANCE_MODES = ("max", "min")


@dataclass(frozen=True)
class DbpParams:
    """DBP configuration.

    ``tolerance_mode="max"`` accepts a sample when either allowance holds
    (``|err| <= max(eps_abs, eps_rel*|actual|)``); ``"min"`` requires both.
    """

    m: int = 16
    l: int = 4
    eps_abs: float = 15.0
    eps_rel: float = 0.05
    w_consec: int = 2
    tolerance_mode: str = "max"

    def __post_init__(self):
        if not all(isinstance(x, numbers.Integral) for x in (self.m, self.l, self.w_consec)):
            raise ConfigError("m, l and w_consec must be integers")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "w_consec", int(self.w_consec))
        if not 1 <= self.l <= self.m / 2:
            raise ConfigError(f"need 1 <= l <= m/2, got m={self.m}, l={self.l}")
        if self.eps_abs < 0 or self.eps_rel < 0:
            raise ConfigError("tolerances must be non-negative")
        if self.w_consec < 0:
            raise ConfigError("w_consec must be non-negative")
        if self.tolerance_mode not in TOLERANCE_MODES:
            raise ConfigError(f"tolerance_mode must be one of {TOLERANCE_MODES}")

    @classmethod
    def parse(cls, text, base=None):
        """Parse ``m=..,l=..,eps-abs=..,eps-rel=..,w=..`` (any subset)."""
        keys = {"m": "m", "l": "l", "eps-abs": "eps_abs", "eps_abs": "eps_abs", "eps-rel": "eps_rel",
                "eps_rel": "eps_rel", "w": "w_consec", "w_consec": "w_consec", "mode": "tolerance_mode",
                "tolerance_mode": "tolerance_mode"}
        values = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            if "=" not in item:
                raise ConfigError(f"expected key=value, got {item!r}")
            key, val = (s.strip() for s in item.split("=", 1))
            if key not in keys:
                raise ConfigError(f"unknown DBP parameter {key!r}")
            name = keys[key]
            try:
                if name in ("m", "l", "w_consec"):
                    values[name] = int(val)
                elif name == "tolerance_mode":
                    values[name] = val
                else:
                    values[name] = float(val)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {val!r}") from None
        base = base or cls()
        return cls(**{**base.__dict__, **values})


@dataclass(frozen=True)
class DbpModel:
    slope: float
    anchor_t: float
    anchor_v: float
    fitted_at: float

    def predict(self, t):
        return self.anchor_v + self.slope * (t - self.anchor_t)


def fit_model(t, v, l) -> DbpModel:
    """Fit the edge-point line on one window (timestamps ``t``, values ``v``).

    Sums use ``math.fsum`` so the result is independent of summation order.
    """
    t = list(t)
    v = list(v)
    if len(t) != len(v) or len(t) < 2 * l:
        raise FitError(f"window of {len(t)} samples cannot hold 2*l={2 * l} edge points")
    c_first = math.fsum(t[:l]) / l
    c_last = math.fsum(t[-l:]) / l
    if c_last == c_first:
        raise FitError("degenerate window: edge centroids share a timestamp")
    avg_first = math.fsum(v[:l]) / l
    avg_last = math.fsum(v[-l:]) / l
    slope = (avg_last - avg_first) / (c_last - c_first)
    return DbpModel(slope, c_last, avg_last, float(t[-1]))


def predict(model: DbpModel, t):
    return model.predict(t)


def within_tolerance(predicted, actual, eps_abs, eps_rel, mode="max"):
    err = abs(predicted - actual)
    rel = eps_rel * abs(actual)
    if mode == "max":
        return err <= max(eps_abs, rel)
    if mode == "min":
        return err <= min(eps_abs, rel)
    raise ConfigError(f"unknown tolerance mode {mode!r}")


@dataclass(frozen=True)
class DbpResult:
    events: tuple
    event_indices: tuple
    samples_total: int
    max_abs_error: float
    max_abs_error_in_tolerance: float
    period_s: float = float("nan")

    @property
    def model_events(self):
        return [(ev.fitted_at, ev) for ev in self.events]

    @property
    def transmissions(self):
        return len(self.events)

    @property
    def suppression(self):
        return 1.0 - self.transmissions / self.samples_total

    @property
    def horizon_s(self):
        return self.samples_total * self.period_s


class DbpEvaluator:
    """Streaming DBP state machine for one sensor.

    Feed samples with :meth:`push` or :meth:`extend`; each returns the models
    emitted. Not thread-safe; one evaluator per stream.
    """

    def __init__(self, params: DbpParams):
        self.params = params
        self._tbuf = deque(maxlen=params.m)
        self._vbuf = deque(maxlen=params.m)
        self.model = None
        self.violations = 0
        self.samples = 0
        self.events = []
        self.event_indices = []
        self.max_abs_error = 0.0
        self.max_abs_error_in_tolerance = 0.0
        self._last_t = -math.inf

    def push(self, t, v):
        return self.extend((t,), (v,))

    def extend(self, ts, vs):
        p = self.params
        m, l, w = p.m, p.l, p.w_consec
        eps_abs, eps_rel = p.eps_abs, p.eps_rel
        use_max = p.tolerance_mode == "max"
        tbuf, vbuf = self._tbuf, self._vbuf
        emitted = []
        model = self.model
        violations = self.violations
        n = self.samples
        last_t = self._last_t
        max_err, max_ok = self.max_abs_error, self.max_abs_error_in_tolerance
        if model is not None:
            slope, at, av = model.slope, model.anchor_t, model.anchor_v
        for t, v in zip(ts, vs):
            t = float(t)
            v = float(v)
            if not t > last_t:
                raise ValidationError(f"timestamps must be strictly increasing ({t!r} after {last_t!r})")
            last_t = t
            tbuf.append(t)
            vbuf.append(v)
            if model is None:
                if len(tbuf) == m:
                    model = fit_model(tbuf, vbuf, l)
                    slope, at, av = model.slope, model.anchor_t, model.anchor_v
                    emitted.append(model)
                    self.event_indices.append(n)
                n += 1
                continue
            err = abs(av + slope * (t - at) - v)
            rel = eps_rel * abs(v)
            if use_max:
                ok = err <= (eps_abs if eps_abs >= rel else rel)
            else:
                ok = err <= (eps_abs if eps_abs <= rel else rel)
            if ok:
                violations = 0
                if err > max_ok:
                    max_ok = err
                if err > max_err:
                    max_err = err
            else:
                violations += 1
                if violations > w:
                    model = fit_model(tbuf, vbuf, l)
                    slope, at, av = model.slope, model.anchor_t, model.anchor_v
                    emitted.append(model)
                    self.event_indices.append(n)
                    violations = 0
                elif err > max_err:
                    max_err = err
            n += 1
        self.model = model
        self.violations = violations
        self.samples = n
        self._last_t = last_t
        self.max_abs_error, self.max_abs_error_in_tolerance = max_err, max_ok
        self.events.extend(emitted)
        return emitted

    def result(self, period_s=float("nan")) -> DbpResult:
        if self.samples < self.params.m:
            raise InsufficientDataError(f"need at least m={self.params.m} samples, got {self.samples}")
        return DbpResult(
            tuple(self.events),
            tuple(self.event_indices),
            self.samples,
            self.max_abs_error,
            self.max_abs_error_in_tolerance,
            float(period_s),
        )


def run_dbp(trace, params: DbpParams = DbpParams()) -> DbpResult:
    """Run DBP over a whole trace (a :class:`SensorTrace` or a ``(t, v)`` pair)."""
    if isinstance(trace, SensorTrace):
        t, v, period = trace.t, trace.v, trace.period_s
    else:
        t, v = trace
        period = float("nan")
    if len(t) < params.m:
        raise InsufficientDataError(f"need at least m={params.m} samples, got {len(t)}")
    ev = DbpEvaluator(params)
    ev.extend(np.asarray(t, dtype=np.float64).tolist(), np.asarray(v, dtype=np.float64).tolist())
    return ev.result(period)


def traffic_rate(result: DbpResult, horizon_s=None):
    """Model updates per hour over ``horizon_s`` (defaults to the trace horizon)."""
    if horizon_s is None:
        horizon_s = result.horizon_s
    if not horizon_s > 0:
        raise ConfigError("horizon_s must be positive")
    return result.transmissions * 3600.0 / horizon_s


def reconstruct(result: DbpResult, t):
    """Sink-side reconstruction: value of the model active at each time in ``t``.

    Times before the first model use the first model.
    """
    t = np.asarray(t, dtype=np.float64)
    fitted = np.array([ev.fitted_at for ev in result.events])
    slope = np.array([ev.slope for ev in result.events])
    at = np.array([ev.anchor_t for ev in result.events])
    av = np.array([ev.anchor_v for ev in result.events])
    idx = np.clip(np.searchsorted(fitted, t, side="right") - 1, 0, None)
    return av[idx] + slope[idx] * (t - at[idx])


# -- CSV ----------------------------------------------------------------------

_FOOTER_KEYS = ("samples_total", "transmissions", "suppression", "max_abs_error",
                "max_abs_error_in_tolerance", "period_s")


def result_to_csv(result: DbpResult) -> str:
    out = io.StringIO()
    out.write("t,slope,anchor_t,anchor_v\n")
    for ev in result.events:
        out.write(f"{ev.fitted_at!r},{ev.slope!r},{ev.anchor_t!r},{ev.anchor_v!r}\n")
    for key in _FOOTER_KEYS:
        out.write(f"# {key}={getattr(result, key)!r}\n")
    out.write("# event_indices=" + " ".join(str(i) for i in result.event_indices) + "\n")
    return out.getvalue()


def result_from_csv(text) -> DbpResult:
    events, footer = [], {}
    lines = text.splitlines()
    if not lines or lines[0].strip() != "t,slope,anchor_t,anchor_v":
        raise ParseError("expected header 't,slope,anchor_t,anchor_v'", 1)
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            footer[key] = val
            continue
        try:
            t, slope, at, av = (float(x) for x in line.split(","))
        except ValueError:
            raise ParseError(f"bad event record {line!r}", lineno) from None
        events.append(DbpModel(slope, at, av, t))
    try:
        indices = tuple(int(i) for i in footer.get("event_indices", "").split())
        return DbpResult(
            tuple(events), indices, int(footer["samples_total"]), float(footer["max_abs_error"]),
            float(footer["max_abs_error_in_tolerance"]), float(footer.get("period_s", "nan")),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad or missing stats footer: {exc}") from None


# -- estimator ----------------------------------------------------------------


class DbpPredictor(RegressorMixin, BaseEstimator):
    """scikit-learn style wrapper around :func:`run_dbp`.

    ``fit(X, y)`` takes sample times ``X`` (shape ``(n,)`` or ``(n, 1)``) and
    values ``y``; ``predict(X)`` returns the sink's reconstruction at those
    times.
    """

    def __init__(self, m=16, l=4, eps_abs=15.0, eps_rel=0.05, w_consec=2, tolerance_mode="max"):
        self.m = m
        self.l = l
        self.eps_abs = eps_abs
        self.eps_rel = eps_rel
        self.w_consec = w_consec
        self.tolerance_mode = tolerance_mode

    def _params(self):
        return DbpParams(self.m, self.l, self.eps_abs, self.eps_rel, self.w_consec, self.tolerance_mode)

    def fit(self, X, y):
        t = _as_times(X)
        y = column_or_1d(check_array(np.asarray(y, dtype=np.float64).reshape(-1, 1)))
        if len(t) != len(y):
            raise ValueError(f"X and y have different lengths ({len(t)} vs {len(y)})")
        self.n_features_in_ = 1
        period = float(np.median(np.diff(t))) if len(t) > 1 else float("nan")
        self.result_ = run_dbp((t, y), self._params())
        self.result_ = DbpResult(*(getattr(self.result_, f) for f in (
            "events", "event_indices", "samples_total", "max_abs_error", "max_abs_error_in_tolerance")), period)
        self.events_ = self.result_.events
        self.suppression_ = self.result_.suppression
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return reconstruct(self.result_, _as_times(X))


def _as_times(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single time column, got {X.shape[1]} features")
    return X[:, 0]


__all__ = [
    "DbpParams", "DbpModel", "DbpResult", "DbpEvaluator", "DbpPredictor", "fit_model", "predict",
    "within_tolerance", "run_dbp", "traffic_rate", "reconstruct", "result_to_csv", "result_from_csv",
]
