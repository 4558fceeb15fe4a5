"""Connectivity graphs, collection trees and per-node traffic loads."""

from __future__ import annotations

import heapq
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParseError, UnreachableNodeError, ValidationError


@dataclass(frozen=True)
class Topology:
    """Node positions (metres) plus ranges and optional link delivery ratios.

    ``link_quality[(u, v)]`` is the probability that a frame sent by ``u``
    reaches ``v``. When given, it defines the communication graph; positions
    then only feed the interference graph.
    """

    positions: dict
    sink: int
    comm_range_m: float = 15.0
    interference_range_m: float | None = None
    link_quality: dict | None = None

    def __post_init__(self):
        positions = {int(k): (float(x), float(y)) for k, (x, y) in self.positions.items()}
        object.__setattr__(self, "positions", positions)
        if self.interference_range_m is None:
            object.__setattr__(self, "interference_range_m", 2.0 * self.comm_range_m)
        if self.sink not in positions:
            raise ValidationError(f"sink {self.sink} has no position")
        if not self.comm_range_m > 0:
            raise ValidationError("comm_range_m must be positive")
        if self.interference_range_m < self.comm_range_m:
            raise ValidationError("interference range must be at least the communication range")
        if self.link_quality is not None:
            lq = {(int(u), int(v)): float(q) for (u, v), q in self.link_quality.items()}
            for (u, v), q in lq.items():
                if (v, u) not in lq:
                    raise ValidationError(f"link quality for ({u}, {v}) has no reverse entry")
                if not 0 < q <= 1:
                    raise ValidationError(f"link quality ({u}, {v}) = {q} outside (0, 1]")
                if u not in positions or v not in positions:
                    raise ValidationError(f"link quality references unknown node in ({u}, {v})")
            object.__setattr__(self, "link_quality", lq)

    @property
    def nodes(self):
        return sorted(self.positions)

    def graphs(self):
        comm, interference = unit_disk_graph(self.positions, self.comm_range_m, self.interference_range_m)
        if self.link_quality is not None:
            comm = {n: set() for n in self.positions}
            for u, v in self.link_quality:
                if u != v:
                    comm[u].add(v)
            comm = {n: frozenset(s) for n, s in comm.items()}
        return comm, interference

    def comm_graph(self):
        return self.graphs()[0]


def unit_disk_graph(positions, comm_range, interference_range):
    """Return ``(comm, interference)`` adjacency maps ``node -> frozenset``.

    Nodes within distance ``<= range`` are adjacent; no self loops.
    """
    if not positions:
        raise InputError("empty position set")
    if not (comm_range > 0 and interference_range > 0):
        raise InputError("ranges must be positive")
    ids = sorted(positions)
    xy = np.array([positions[i] for i in ids], dtype=np.float64)
    dist = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    np.fill_diagonal(dist, np.inf)

    def adjacency(r):
        return {ids[a]: frozenset(ids[b] for b in np.nonzero(dist[a] <= r)[0]) for a in range(len(ids))}

    return adjacency(comm_range), adjacency(interference_range)


@dataclass(frozen=True)
class CollectionTree:
    sink: int
    parent: dict
    depth: dict
    subtree_size: dict = field(default_factory=dict)

    @property
    def max_depth(self):
        return max(self.depth.values(), default=0)

    @property
    def nodes(self):
        return sorted(self.parent)

    def children(self):
        kids = {n: [] for n in [self.sink, *self.parent]}
        for child, par in sorted(self.parent.items()):
            kids[par].append(child)
        return kids

    def path_to_sink(self, node):
        path = [node]
        while path[-1] != self.sink:
            path.append(self.parent[path[-1]])
        return path

    def depth_histogram(self):
        hist = {}
        for d in self.depth.values():
            hist[d] = hist.get(d, 0) + 1
        return dict(sorted(hist.items()))


def build_tree(topology: Topology) -> CollectionTree:
    """Shortest-path collection tree towards the sink.

    Without link qualities: fewest hops. With link qualities: least expected
    transmissions, edge cost ``1/q(child, parent)``. Ties pick the smallest
    parent id.
    """
    comm = topology.comm_graph()
    sink = topology.sink
    lq = topology.link_quality
    if lq is None:
        dist = {sink: 0}
        queue = deque([sink])
        while queue:
            u = queue.popleft()
            for v in sorted(comm[u]):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)

        def cost(child, par):
            return 1
    else:
        def cost(child, par):
            return 1.0 / lq[(child, par)]

        dist = {sink: 0.0}
        heap = [(0.0, sink)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v in comm[u]:
                # v reaches the sink through u, so v's uplink is (v, u)
                if (v, u) not in lq:
                    continue
                nd = d + cost(v, u)
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))

    missing = [n for n in topology.positions if n not in dist]
    if missing:
        raise UnreachableNodeError(missing)

    parent = {}
    for n in topology.positions:
        if n == sink:
            continue
        best = None
        for p in sorted(comm[n]):
            if lq is not None and (n, p) not in lq:
                continue
            total = dist[p] + cost(n, p)
            if lq is None:
                tight = total == dist[n]
            else:
                tight = math.isclose(total, dist[n], rel_tol=1e-12, abs_tol=1e-12) and dist[p] < dist[n]
            if tight:
                best = p
                break
        parent[n] = best

    depth = {}

    def depth_of(n):
        if n == sink:
            return 0
        if n not in depth:
            depth[n] = depth_of(parent[n]) + 1
        return depth[n]

    for n in parent:
        depth_of(n)

    size = {n: 0 for n in parent}
    for n in parent:
        p = parent[n]
        while p != sink:
            size[p] += 1
            p = parent[p]
    return CollectionTree(sink, dict(sorted(parent.items())), dict(sorted(depth.items())), size)


@dataclass(frozen=True)
class NodeLoads:
    originated_per_s: float
    forwarded_per_s: float
    overheard_per_s: float
    intended_rx_per_s: float
    link_tx_multiplier: float = 1.0

    @property
    def uplink_per_s(self):
        return self.originated_per_s + self.forwarded_per_s


def node_loads(tree: CollectionTree, topology: Topology, per_node_tx_rate) -> dict:
    """Per-node event rates implied by every node's own transmission rate.

    A node forwards everything its strict descendants originate and hears,
    without being the addressee, every uplink frame of its communication
    neighbours that is not sent to it. The sink is excluded.
    """
    unknown = set(per_node_tx_rate) - set(tree.parent)
    if unknown:
        raise InputError(f"rates given for nodes outside the tree: {sorted(unknown)}")
    missing = set(tree.parent) - set(per_node_tx_rate)
    if missing:
        raise InputError(f"no transmission rate for nodes: {sorted(missing)}")
    for n, r in per_node_tx_rate.items():
        if not (r >= 0 and math.isfinite(r)):
            raise InputError(f"rate for node {n} must be finite and non-negative, got {r}")

    forwarded = {n: 0.0 for n in tree.parent}
    for n in tree.parent:
        r = per_node_tx_rate[n]
        p = tree.parent[n]
        while p != tree.sink:
            forwarded[p] += r
            p = tree.parent[p]
    uplink = {n: per_node_tx_rate[n] + forwarded[n] for n in tree.parent}

    comm = topology.comm_graph()
    lq = topology.link_quality
    loads = {}
    for n in tree.parent:
        heard = 0.0
        for u in sorted(comm[n]):
            if u == tree.sink or u not in tree.parent or tree.parent[u] == n:
                continue
            heard += uplink[u]
        mult = 1.0 if lq is None else 1.0 / lq[(n, tree.parent[n])]
        loads[n] = NodeLoads(per_node_tx_rate[n], forwarded[n], heard, forwarded[n], mult)
    return loads


# -- files ----------------------------------------------------------------------


def parse_topology(text, link_quality=None) -> Topology:
    """Parse ``node_id,x,y`` CSV with ``# key: value`` header comments.

    Recognised comment keys: ``sink`` (default: first node), ``comm_range_m``
    (default 15) and ``interference_range_m`` (default twice the range).
    """
    meta = {}
    positions = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        fields = [c.strip() for c in line.split(",")]
        if not header_seen:
            if fields != ["node_id", "x", "y"]:
                raise ParseError("expected header 'node_id,x,y'", lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            node = int(fields[0])
            positions[node] = (float(fields[1]), float(fields[2]))
        except ValueError:
            raise ParseError(f"bad record {line!r}", lineno) from None
    if not positions:
        raise InputError("topology has no nodes")
    try:
        sink = int(meta.get("sink", min(positions)))
        comm = float(meta.get("comm_range_m", 15.0))
        interf = float(meta["interference_range_m"]) if "interference_range_m" in meta else None
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}") from None
    return Topology(positions, sink, comm, interf, link_quality)


def serialize_topology(topology: Topology) -> str:
    out = io.StringIO()
    out.write(f"# sink: {topology.sink}\n")
    out.write(f"# comm_range_m: {topology.comm_range_m!r}\n")
    out.write(f"# interference_range_m: {topology.interference_range_m!r}\n")
    out.write("node_id,x,y\n")
    for n in topology.nodes:
        x, y = topology.positions[n]
        out.write(f"{n},{x!r},{y!r}\n")
    return out.getvalue()


def parse_link_quality(text) -> dict:
    """Parse ``u,v,quality`` CSV (directional delivery ratios)."""
    lq = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [c.strip() for c in line.split(",")]
        if not header_seen:
            if fields != ["u", "v", "quality"]:
                raise ParseError("expected header 'u,v,quality'", lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            lq[(int(fields[0]), int(fields[1]))] = float(fields[2])
        except ValueError:
            raise ParseError(f"bad record {line!r}", lineno) from None
    return lq


def serialize_link_quality(lq) -> str:
    out = io.StringIO()
    out.write("u,v,quality\n")
    for (u, v), q in sorted(lq.items()):
        out.write(f"{u},{v},{q!r}\n")
    return out.getvalue()


def read_topology(path, link_quality_path=None) -> Topology:
    lq = None
    if link_quality_path is not None:
        with open(link_quality_path, encoding="utf-8") as fh:
            lq = parse_link_quality(fh.read())
    with open(path, encoding="utf-8") as fh:
        return parse_topology(fh.read(), lq)
