"""Independent reference implementations used to check the library.

The DBP reference does not keep a streaming violation counter: for each
emitted model it refits from scratch on the window that ends at the event
sample, then searches forward for the first sample that closes a run of
``w_consec + 1`` violations of that model.

The power replay walks every packet hop by hop over the horizon and bills
each event where it happens, instead of multiplying rates by energies.
"""

import math

import numpy as np

from enwsn.power import event_energy, floor_power


# -- DBP -----------------------------------------------------------------------------


def _mean(xs):
    return math.fsum(xs) / len(xs)


def reference_fit(t, v, l):
    """Edge-point line through the first and last ``l`` samples of a window.

    Returns ``(slope, anchor_t, anchor_v)``.
    """
    c0, c1 = _mean(t[:l]), _mean(t[-l:])
    a0, a1 = _mean(v[:l]), _mean(v[-l:])
    return (a1 - a0) / (c1 - c0), c1, a1


def _violates(model, t, v, params):
    slope, at, av = model
    err = abs(av + slope * (t - at) - v)
    allowance = (max if params.tolerance_mode == "max" else min)(params.eps_abs, params.eps_rel * abs(v))
    return not err <= allowance


def reference_dbp(t, v, params):
    """Return ``[(index, slope, anchor_t, anchor_v, fitted_at), ...]`` for every model emitted."""
    t = [float(x) for x in t]
    v = [float(x) for x in v]
    m, l, w = params.m, params.l, params.w_consec
    n = len(t)
    events = []
    j = m - 1
    while j < n:
        model = reference_fit(t[j - m + 1:j + 1], v[j - m + 1:j + 1], l)
        events.append((j, *model, t[j]))
        run = 0
        nxt = None
        for i in range(j + 1, n):
            run = run + 1 if _violates(model, t[i], v[i], params) else 0
            if run == w + 1:
                nxt = i
                break
        if nxt is None:
            break
        j = nxt
    return events


def random_walk_trace(rng, n, period=30.0):
    """Random walk plus noise with occasional jumps and flat stretches; jittered timestamps."""
    steps = rng.normal(0.0, rng.uniform(0.5, 20.0), n)
    steps[rng.random(n) < 0.7] *= rng.uniform(0.0, 0.2)
    jumps = (rng.random(n) < 0.002) * rng.normal(0.0, 200.0, n)
    v = rng.uniform(0.0, 500.0) + np.cumsum(steps + jumps) + rng.normal(0.0, rng.uniform(0.0, 5.0), n)
    dt = period * (1.0 + rng.uniform(-0.2, 0.2, n))
    dt[rng.random(n) < 0.01] *= rng.integers(2, 6)
    t = np.cumsum(dt)
    return t, v


# -- floor power -----------------------------------------------------------------------

# Sleep MCU 1.32 uW + radio WuR listen 0.462 uW + WuR transmitter standby 0.69 uW
# + MBS sleep 0.036 uW; the power-gated transceiver draws nothing.
HAND_FLOOR_ID11_MBS_UW = 1.32 + 0.462 + 0.69 + 0.036

# Standby MCU 14.67 uW + LPM1 3000 uW + ContikiMAC checks 69.9 mW * 1 ms / 100 ms.
HAND_FLOOR_ID1_UW = 14.67 + 3000.0 + 69.9e3 * 1e-3 / 0.1


# -- discrete-event power replay -------------------------------------------------------------


def replay_network_power(topology, tree, tx_times, sample_counts, horizon_s, config, catalog, software):
    """Average power per non-sink node obtained by replaying every packet.

    ``tx_times[node]`` lists the times the node originates a packet;
    ``sample_counts[node]`` is the number of samples it takes over the
    horizon. Each packet is followed from its origin to the sink: the origin
    bills a sample-and-transmit event, every intermediate node a route event,
    and every communication neighbour of each sender that is neither the
    addressee nor the sink bills an overhear event. Samples that are not
    transmitted bill a sample-only event.
    """
    comm = topology.comm_graph()
    lq = topology.link_quality
    energy = {n: 0.0 for n in tree.parent}
    cache = {}

    def bill(node, kind):
        mult = 1.0 if lq is None or kind in ("overhear", "sample_only") else 1.0 / lq[(node, tree.parent[node])]
        key = (kind, mult)
        if key not in cache:
            cache[key] = event_energy(config.with_software(software), kind, catalog, mult).energy_j
        energy[node] += cache[key]

    for origin, times in tx_times.items():
        for _ in times:
            path = tree.path_to_sink(origin)
            for hop, sender in enumerate(path[:-1]):
                receiver = path[hop + 1]
                bill(sender, "sample_tx" if hop == 0 else "route")
                for u in comm[sender]:
                    if u != receiver and u != tree.sink:
                        bill(u, "overhear")
        if software != "no_dbp":
            for _ in range(sample_counts[origin] - len(times)):
                bill(origin, "sample_only")

    floor = floor_power(config.with_software(software), catalog)
    return {n: floor + e / horizon_s for n, e in energy.items()}
