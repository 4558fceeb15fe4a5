"""``enwsn`` command line: dbp, sweep, sustain, synth and topo subcommands.

Exit codes: 0 success, 1 computation refused (e.g. every cell infeasible),
2 input or validation error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import fixtures
from .dbp import DbpParams, result_to_csv, run_dbp
from .errors import EnwsnError, InfeasibleConfigError, InputError
from .harvest import HarvestModel, gnuplot_script, neutrality, read_curve
from .hw import CATALOG_ENV, Software, load_catalog
from .power import SAVINGS_CONFIGS, Network, sweep
from .topology import build_tree, read_topology, serialize_link_quality, serialize_topology
from .trace import Kind, SynthSpec, Unit, read_trace, serialize_trace, synth_trace

EXIT_OK, EXIT_REFUSED, EXIT_INPUT = 0, 1, 2

_DEFAULT_UNIT = {Kind.LIGHT: Unit.LUX, Kind.TEMPERATURE: Unit.CELSIUS, Kind.HUMIDITY: Unit.RH_PERCENT}


class Refusal(Exception):
    pass


def _existing(path):
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such input: {path}")
    return p


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    if not os.access(p, os.W_OK):
        raise InputError(f"output directory not writable: {path}")
    return p


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _modes(text):
    try:
        return tuple(Software(m.strip().replace("-", "_")) for m in text.split(",") if m.strip())
    except ValueError:
        raise InputError(f"unknown software mode in {text!r}; expected no-dbp, dbp, mbs") from None


def _catalog(args):
    path = args.catalog or os.environ.get(CATALOG_ENV) or None
    return load_catalog(_existing(path))


def _dbp_params(args):
    return DbpParams.parse(args.dbp) if args.dbp else DbpParams()


def _load_traces(directory, kind, nodes):
    d = _existing(directory)
    if not d.is_dir():
        raise InputError(f"no such input directory: {directory}")
    unit = _DEFAULT_UNIT[kind]
    traces, missing = {}, []
    for n in nodes:
        f = d / f"{n}.csv"
        if f.exists():
            traces[n] = read_trace(f, kind, unit, node_id=n)
        else:
            missing.append(n)
    if missing:
        raise InputError(f"no trace file for nodes: {missing}")
    return traces


def _network(args):
    topo = read_topology(_existing(args.topology), _existing(args.link_quality))
    tree = build_tree(topo)
    traces = _load_traces(args.traces, Kind(args.kind), tree.nodes)
    return Network(topo, traces, tree, _dbp_params(args))


# -- subcommands -----------------------------------------------------------------------------


def cmd_dbp(args):
    kind = Kind(args.kind)
    params = _dbp_params(args)
    trace = read_trace(_existing(args.trace), kind, _DEFAULT_UNIT[kind])
    result = run_dbp(trace, params)
    print(f"samples: {result.samples_total}")
    print(f"transmissions: {result.transmissions}")
    print(f"suppression: {result.suppression:.4%}")
    print(f"max_abs_error: {result.max_abs_error:.6g}")
    if args.out:
        out = _out_dir(args.out)
        _write(out / "dbp_events.csv", result_to_csv(result))
    return EXIT_OK


def cmd_sweep(args):
    catalog = _catalog(args)
    network = _network(args)
    ids = [args.only_id] if args.only_id is not None else None
    table = sweep(network, _modes(args.modes), catalog, ids)
    text = table.to_text()
    sys.stdout.write(text)
    for wur, cid in SAVINGS_CONFIGS.items():
        if all((cid, sw) in table.cells and table.cell(cid, sw).feasible for sw in (Software.DBP, Software.MBS)):
            s = table.mbs_savings(cid)
            print(f"MBS saving over DBP, ID {cid} ({wur} WuR): avg {s.avg:.1f}% (min {s.min:.1f}%, max {s.max:.1f}%)")
    if args.out:
        out = _out_dir(args.out)
        _write(out / "sweep.csv", table.to_csv())
        _write(out / "sweep.txt", text)
        _write(out / "sweep_nodes.csv", table.per_node_csv())
    if not any(c.feasible for c in table.cells.values()):
        raise Refusal("every configuration is infeasible")
    return EXIT_OK


def cmd_sustain(args):
    catalog = _catalog(args)
    network = _network(args)
    modes = _modes(args.modes)
    curve = read_curve(_existing(args.curve) if args.curve else fixtures.default_curve_path())
    model = HarvestModel(curve, args.efficiency, args.cells, args.area_scale, args.max_cells)
    light = network.traces
    if args.light:
        light = _load_traces(args.light, Kind.LIGHT, network.nodes)
    table = sweep(network, modes, catalog, [args.id])
    out = _out_dir(args.out) if args.out else None
    for sw in modes:
        cell = table.cell(args.id, sw)
        if not cell.feasible:
            print(f"ID {args.id} {sw.value}: infeasible ({cell.reason})")
            continue
        report = neutrality({n: b.total_w for n, b in cell.per_node.items()}, light, model)
        print(f"ID {args.id} {sw.value}: {report.neutral_count}/{len(report.nodes)} nodes neutral, "
              f"{report.total_cells} cells needed")
        if out:
            stem = f"sustain_{args.id}_{sw.value}"
            _write(out / f"{stem}.csv", report.to_csv())
            _write(out / f"{stem}_consumed.dat", report.series("consumed"))
            _write(out / f"{stem}_harvested.dat", report.series("harvested"))
            _write(out / f"{stem}.gp", gnuplot_script(f"{stem}_consumed.dat", f"{stem}_harvested.dat",
                                                     f"ID {args.id} {sw.value}"))
    if not any(table.cell(args.id, sw).feasible for sw in modes):
        raise Refusal(f"configuration {args.id} is infeasible for every selected mode")
    return EXIT_OK


def cmd_synth(args):
    out = _out_dir(args.out)
    if args.fixture == "tunnel":
        topo = fixtures.tunnel_topology()
        traces = fixtures.tunnel_traces(args.days or fixtures.TUNNEL_DAYS, args.seed, topo)
    elif args.fixture == "lab":
        topo = fixtures.lab_topology()
        traces = {n: synth_trace(fixtures.lab_light_spec(n, args.days or 1, args.seed), n)
                  for n in topo.nodes if n != topo.sink}
        _write(out / "link_quality.csv", serialize_link_quality(topo.link_quality))
    else:
        topo = fixtures.chain_topology()
        traces = {n: synth_trace(SynthSpec(days=args.days or 1, base=100.0, noise_sigma=1.0,
                                           seed=args.seed * 1000 + n, minimum=0.0), n)
                  for n in topo.nodes if n != topo.sink}
    _write(out / "topology.csv", serialize_topology(topo))
    tdir = out / "traces"
    tdir.mkdir(exist_ok=True)
    for n, trace in sorted(traces.items()):
        _write(tdir / f"{n}.csv", serialize_trace(trace))
    print(f"wrote {len(traces)} traces and topology to {out}")
    return EXIT_OK


def cmd_topo(args):
    topo = read_topology(_existing(args.topology), _existing(args.link_quality))
    tree = build_tree(topo)
    print(f"nodes: {len(tree.nodes)} (sink {tree.sink})")
    print(f"max depth: {tree.max_depth}")
    print("depth histogram: " + ", ".join(f"{d}:{c}" for d, c in tree.depth_histogram().items()))
    lines = ["node_id,parent,depth,subtree_size"]
    lines += [f"{n},{tree.parent[n]},{tree.depth[n]},{tree.subtree_size[n]}" for n in tree.nodes]
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(_out_dir(args.out) / "tree.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="enwsn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, network=True):
        p.add_argument("--catalog", help=f"catalog override file (fallback ${CATALOG_ENV})")
        p.add_argument("--dbp", help="DBP parameters, e.g. m=16,l=4,eps-abs=15,eps-rel=0.05,w=2")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--kind", default="light", choices=[k.value for k in Kind])
        if network:
            p.add_argument("--topology", required=True)
            p.add_argument("--link-quality")
            p.add_argument("--traces", required=True, help="directory of <node_id>.csv traces")

    p = sub.add_parser("dbp", help="run DBP over one trace")
    p.add_argument("trace")
    common(p, network=False)
    p.set_defaults(func=cmd_dbp)

    p = sub.add_parser("sweep", help="evaluate the 23 configurations x software modes")
    common(p)
    p.add_argument("--modes", default="no-dbp,dbp,mbs")
    p.add_argument("--only-id", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sustain", help="energy neutrality and cells needed for one configuration")
    common(p)
    p.add_argument("--modes", default="dbp,mbs")
    p.add_argument("--id", type=int, default=11)
    p.add_argument("--curve", help="lux,watts curve CSV (default: illustrative curve)")
    p.add_argument("--light", help="directory of light traces if different from --traces")
    p.add_argument("--efficiency", type=float, default=0.79)
    p.add_argument("--cells", type=int, default=1)
    p.add_argument("--area-scale", type=float, default=1.0)
    p.add_argument("--max-cells", type=int, default=1000)
    p.set_defaults(func=cmd_sustain)

    p = sub.add_parser("synth", help="write a synthetic fixture (topology + traces)")
    p.add_argument("--fixture", choices=["tunnel", "lab", "chain"], default="tunnel")
    p.add_argument("--days", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("topo", help="build the collection tree and report depths")
    p.add_argument("--topology", required=True)
    p.add_argument("--link-quality")
    p.add_argument("--out")
    p.set_defaults(func=cmd_topo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"enwsn: no such input: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ValueError) as exc:
        print(f"enwsn: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (Refusal, InfeasibleConfigError) as exc:
        print(f"enwsn: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except EnwsnError as exc:
        print(f"enwsn: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
