import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enwsn.errors import ConfigError, InputError, ParseError
from enwsn.fixtures import default_curve_path
from enwsn.harvest import (
    HarvestModel,
    cells_needed,
    gnuplot_script,
    harvest_power,
    mean_harvest,
    neutrality,
    parse_curve,
    read_curve,
)
from enwsn.trace import make_trace

CURVE = ((0, 0), (100, 40e-6), (1000, 500e-6))


def _light(values, node=1):
    return make_trace(node, "light", "lux", np.arange(len(values)) * 30.0, values, period_s=30.0)


def test_zero_lux_harvests_nothing():
    assert harvest_power(0.0, HarvestModel(CURVE)) == 0.0


def test_interpolation_midpoint():
    model = HarvestModel(((0, 0), (100, 40e-6)))
    assert harvest_power(50.0, model) == pytest.approx(20e-6 * 0.79, rel=1e-15)
    assert harvest_power(1e6, model) == pytest.approx(40e-6 * 0.79, rel=1e-15)


def test_area_and_cells_scale_exactly():
    lux = np.array([0.0, 37.0, 250.0, 5000.0])
    base = harvest_power(lux, HarvestModel(CURVE))
    np.testing.assert_allclose(harvest_power(lux, HarvestModel(CURVE, area_scale=0.1)), base * 0.1, rtol=1e-15)
    np.testing.assert_allclose(harvest_power(lux, HarvestModel(CURVE, cells=3)), base * 3, rtol=1e-15)


def test_negative_lux_rejected():
    with pytest.raises(InputError):
        harvest_power(-1.0, HarvestModel(CURVE))
    with pytest.raises(InputError):
        harvest_power([1.0, float("nan")], HarvestModel(CURVE))


@pytest.mark.parametrize("kwargs", [
    {"curve": ((1, 0), (2, 1))}, {"curve": ((0, 0), (10, 2), (20, 1))}, {"curve": ((0, 0),)},
    {"curve": ((0, 0), (10, 1), (10, 2))}, {"curve": CURVE, "efficiency": 0}, {"curve": CURVE, "cells": 0},
    {"curve": CURVE, "area_scale": 0}, {"curve": CURVE, "max_cells": 0},
])
def test_model_validation(kwargs):
    with pytest.raises(ConfigError):
        HarvestModel(**kwargs)


def test_zero_consumption_is_neutral_with_one_cell():
    report = neutrality({1: 0.0}, {1: _light([0.0] * 10)}, HarvestModel(CURVE))
    node = report.nodes[0]
    assert node.neutral and node.cells_needed == 1 and not node.capped


def test_dark_node_is_capped():
    report = neutrality({1: 1e-6}, {1: _light([0.0] * 10)}, HarvestModel(CURVE, max_cells=50))
    node = report.nodes[0]
    assert not node.neutral and node.cells_needed == 50 and node.capped


def test_cells_needed_examples():
    assert cells_needed(10e-6, 5e-6, 1000) == (2, False)
    assert cells_needed(10.0001e-6, 5e-6, 1000) == (3, False)
    assert cells_needed(3e-6, 5e-6, 1000) == (1, False)
    assert cells_needed(1.0, 1e-6, 1000) == (1000, True)
    assert cells_needed(0.3, 0.1, 1000) == (3, False)


def test_missing_trace_rejected():
    with pytest.raises(InputError):
        neutrality({1: 1e-6, 2: 1e-6}, {1: _light([10.0])}, HarvestModel(CURVE))


def test_non_lux_trace_rejected():
    raw = make_trace(1, "light", "raw", [0, 30], [1, 2])
    with pytest.raises(InputError):
        mean_harvest(raw, HarvestModel(CURVE))


def test_neutrality_verdict_matches_means():
    lights = {1: _light([100.0] * 4), 2: _light([1000.0] * 4, 2)}
    report = neutrality({1: 40e-6, 2: 40e-6}, lights, HarvestModel(CURVE))
    by_id = {n.node_id: n for n in report.nodes}
    assert by_id[1].mean_harvested_w == pytest.approx(40e-6 * 0.79)
    assert not by_id[1].neutral and by_id[1].cells_needed == 2
    assert by_id[2].neutral and by_id[2].cells_needed == 1
    assert report.neutral_count == 1 and report.total_cells == 3


lux_values = st.lists(st.floats(0, 20000, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 20000), st.floats(0, 20000))
def test_harvest_monotone_in_lux(a, b):
    model = HarvestModel(CURVE)
    lo, hi = sorted((a, b))
    assert harvest_power(lo, model) <= harvest_power(hi, model)


@settings(max_examples=100, deadline=None)
@given(lux_values, st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_harvest_monotone_in_efficiency(values, e1, e2):
    lo, hi = sorted((e1, e2))
    tr = _light(values)
    assert mean_harvest(tr, HarvestModel(CURVE, efficiency=lo)) <= mean_harvest(tr, HarvestModel(CURVE, efficiency=hi))


@settings(max_examples=100, deadline=None)
@given(lux_values, lux_values)
def test_time_average_is_linear_over_concatenation(a, b):
    model = HarvestModel(CURVE)
    whole = mean_harvest(_light(a + b), model)
    parts = (len(a) * mean_harvest(_light(a), model) + len(b) * mean_harvest(_light(b), model)) / (len(a) + len(b))
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(lux_values, st.floats(0, 1e-3), st.floats(0, 1))
def test_lower_consumption_never_needs_more_cells(values, consumed, shrink):
    model = HarvestModel(CURVE)
    lights = {1: _light(values)}
    high = neutrality({1: consumed}, lights, model).nodes[0]
    low = neutrality({1: consumed * shrink}, lights, model).nodes[0]
    assert low.cells_needed <= high.cells_needed
    assert high.neutral <= low.neutral


def test_curve_round_trip_and_default():
    text = "# one cell\nlux,watts\n" + "".join(f"{x},{w!r}\n" for x, w in CURVE)
    assert parse_curve(text) == tuple((float(x), float(w)) for x, w in CURVE)
    curve = read_curve(default_curve_path())
    HarvestModel(curve)
    with pytest.raises(ParseError):
        parse_curve("lux,power\n0,0\n")


def test_report_outputs():
    report = neutrality({1: 1e-6, 2: 0.0}, {1: _light([100.0]), 2: _light([0.0], 2)}, HarvestModel(CURVE))
    lines = report.to_csv().splitlines()
    assert lines[0] == "node_id,consumed_uw,harvested_uw,neutral,cells_needed,capped"
    assert lines[1] == f"1,1,{40 * 0.79:.6g},1,1,0"
    series = report.series("harvested").splitlines()
    assert series[0].startswith("#") and float(series[2].split()[1]) > 0
    script = gnuplot_script("a.dat", "b.dat")
    assert "logscale y" in script and '"a.dat"' in script and '"b.dat"' in script


def test_cells_needed_subnormal_harvest_is_capped():
    assert cells_needed(1e-3, 5e-324, 1000) == (1000, True)
