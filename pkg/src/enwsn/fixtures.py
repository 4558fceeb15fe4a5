"""Synthetic networks and light traces used by tests, examples and ``enwsn synth``."""

from __future__ import annotations

import math
from importlib import resources

from .topology import Topology, parse_topology
from .trace import SynthSpec, synth_trace

TUNNEL_DAYS = 47
TUNNEL_PERIOD_S = 30.0
TUNNEL_ENTRANCE = frozenset({1, 2, 3, 21, 22, 23})


def data_path(name):
    return resources.files("enwsn") / "data" / name


def default_curve_path():
    return data_path("am1816_illustrative.csv")


def tunnel_topology() -> Topology:
    """40 nodes in two rows along a road tunnel, sink at the entrance, 15 hops deep."""
    return parse_topology(data_path("tunnel_layout.csv").read_text(encoding="utf-8"))


def tunnel_light_spec(node, days=TUNNEL_DAYS, seed=0) -> SynthSpec:
    """Light pattern of one tunnel node.

    Entrance nodes see daylight: a strong diurnal swing with occasional
    cloud steps. Interior nodes sit under dim artificial lighting with small
    noise and lamp switching steps.
    """
    node_seed = seed * 1000 + node
    if node in TUNNEL_ENTRANCE:
        return SynthSpec(days=days, period_s=TUNNEL_PERIOD_S, base=1500.0, diurnal_amplitude=1400.0,
                         noise_sigma=5.0, step_events_per_day=0.5, step_magnitude=100.0, seed=node_seed,
                         minimum=0.0)
    return SynthSpec(days=days, period_s=TUNNEL_PERIOD_S, base=30.0 + (node * 7) % 40, diurnal_amplitude=0.0,
                     noise_sigma=1.0, step_events_per_day=1.0, step_magnitude=20.0, seed=node_seed,
                     minimum=0.0)


def tunnel_traces(days=TUNNEL_DAYS, seed=0, topology=None) -> dict:
    topology = topology or tunnel_topology()
    return {n: synth_trace(tunnel_light_spec(n, days, seed), n) for n in topology.nodes if n != topology.sink}


def lab_topology(comm_range_m=10.0) -> Topology:
    """54 motes on a 9x6 grid around a central sink, with distance-derived link qualities.

    Delivery ratio ``q = 1 - 0.9 (d / range)^2`` for links within range. The
    least-ETX collection tree is 4 hops deep.
    """
    positions = {0: (20.5, 15.0)}
    for row in range(6):
        for col in range(9):
            positions[1 + row * 9 + col] = (2.5 + col * 4.5, 2.5 + row * 5.0)
    lq = {}
    for u, pu in positions.items():
        for v, pv in positions.items():
            d = math.dist(pu, pv)
            if u != v and d <= comm_range_m:
                lq[(u, v)] = round(1.0 - 0.9 * (d / comm_range_m) ** 2, 3)
    return Topology(positions, 0, comm_range_m, link_quality=lq)


def lab_light_spec(node, days=1, seed=0) -> SynthSpec:
    return SynthSpec(days=days, period_s=31.0, base=300.0, diurnal_amplitude=250.0, noise_sigma=4.0,
                     step_events_per_day=4.0, step_magnitude=60.0, seed=seed * 1000 + node, minimum=0.0)


def chain_topology(hops=2, spacing_m=10.0, comm_range_m=15.0) -> Topology:
    """Sink 0 followed by ``hops`` nodes on a line."""
    positions = {i: (i * spacing_m, 0.0) for i in range(hops + 1)}
    return Topology(positions, 0, comm_range_m)
