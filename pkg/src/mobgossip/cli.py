"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 failed certification (a bound that
must hold mathematically did not verify, which signals a bug or a corrupted
instance, never a tolerable outcome).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .bounds import (
    CertificationError,
    InvalidFlowError,
    bidirectional_flow,
    column_wave_bound,
    export_edge_loads,
    direct_flow,
    hub_chain,
    hub_flow,
    hub_instance,
    l_shaped_flow,
    lower_bound_via_merge,
    column_partition,
    relay_flow,
    row_partition,
    singleton_partition,
    torus_plus_mobile_instance,
    verify_flow,
)
from .chain import (
    contact_probabilities,
    expected_matrix,
    export_dense_csv,
    export_sparse_coo,
    relaxation_time,
    second_eigenvalue,
)
from .engine import GossipConfig, error_curves, estimate_ave_time
from .mobility import HORIZONTAL, assignment_from_name
from .topology import build_rgg, parse_descriptor


def _load_config_file(path: str) -> dict:
    """key=value lines; blank lines and #-comments ignored."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _build_topology(args):
    desc = args.topology
    if desc.startswith("rgg:"):
        parts = desc.split(":")
        n = int(parts[1])
        c1 = float(parts[2]) if len(parts) > 2 else 10.0
        topo, points = build_rgg(n, c1, seed=args.seed)
        return topo, points
    return parse_descriptor(desc), None


def _build_instance(args):
    topo, points = _build_topology(args)
    assignment = assignment_from_name(args.mobility, topo, seed=args.seed, positions=points)
    return topo, assignment


def _chain_for(args, topo, assignment):
    mode = args.mode
    contact = contact_probabilities(topo, assignment, mode, samples=args.samples, seed=args.seed)
    return expected_matrix(contact), contact


def _cmd_simulate(args) -> int:
    topo, assignment = _build_instance(args)
    cfg = GossipConfig(
        topo, assignment, profile=args.profile, epsilon=args.epsilon,
        max_ticks=args.ticks, trials=args.trials, seed=args.seed, workers=args.workers,
    )
    out = Path(args.out)
    curves = error_curves(cfg, record_every=max(1, args.ticks // 1000))
    experiments.write_csv(
        out / "trace_quantiles.csv",
        ["tick", "median_rel_l2_error", "q10_rel_l2_error", "q90_rel_l2_error", "mean_rel_l2_error"],
        zip(curves["ticks"], curves["q50"], curves["q10"], curves["q90"], curves["mean"]),
    )
    est = estimate_ave_time(cfg)
    summary = {
        "topology": topo.descriptor(),
        "mobility": args.mobility,
        "profile": est.profile,
        "epsilon": est.epsilon,
        "trials": est.trials,
        "ave_time_ticks": est.ticks,
        "ave_time_ci_low": est.ci_low,
        "ave_time_ci_high": est.ci_high,
        "saturated": est.saturated,
    }
    experiments.write_summary(out / "simulate_summary.txt", summary)
    for key, value in summary.items():
        print(f"{key}={value}")
    return 0


def _cmd_spectrum(args) -> int:
    topo, assignment = _build_instance(args)
    tm, contact = _chain_for(args, topo, assignment)
    lam2 = second_eigenvalue(tm)
    report = {
        "topology": topo.descriptor(),
        "mobility": args.mobility,
        "method": contact.method,
        "samples": contact.samples,
        "lambda2": f"{lam2:.12g}",
        "t_relax_ticks": f"{relaxation_time(tm):.12g}",
        "tolerance": "1e-10",
    }
    for key, value in report.items():
        print(f"{key}={value}")
    if args.out:
        out = Path(args.out)
        experiments.write_summary(out / "spectrum.txt", report)
        out.mkdir(parents=True, exist_ok=True)
        export_dense_csv(tm, out / "matrix_dense.csv")
        export_sparse_coo(tm, out / "matrix_sparse.txt")
    return 0


_PARTITIONS = {"rows": row_partition, "columns": column_partition, "sites": singleton_partition}


def _cmd_lower_bound(args) -> int:
    if args.method == "column-wave":
        side = int(args.topology.split(":")[1])
        rep = column_wave_bound(side, args.mobile)
        report = {
            "instance": f"torus:{side}+{args.mobile} roamers, merged",
            "method": "rayleigh-lower",
            "t_relax_lower_bound_ticks": f"{rep.bound:.12g}",
            "merged_chain_t_relax_ticks": f"{rep.t_relax:.12g}",
        }
        for key, value in report.items():
            print(f"{key}={value}")
        if args.out:
            experiments.write_summary(Path(args.out) / "lower_bound.txt", report)
        return 0
    topo, assignment = _build_instance(args)
    if not topo.discrete:
        print("merge partitions are only built in for discrete topologies", file=sys.stderr)
        return 2
    partition = _PARTITIONS[args.partition](topo)
    res = lower_bound_via_merge(
        topo, assignment, partition, mode=args.mode, samples=args.samples, seed=args.seed
    )
    report = {
        "topology": topo.descriptor(),
        "mobility": args.mobility,
        "partition": args.partition,
        "method": f"merge-lower/{res['method']}",
        "merged_states": res["induced"].n,
        "t_relax_lower_bound_ticks": f"{res['t_relax']:.12g}",
    }
    for key, value in report.items():
        print(f"{key}={value}")
    if args.out:
        experiments.write_summary(Path(args.out) / "lower_bound.txt", report)
    return 0


def _cmd_flow_bound(args) -> int:
    name = args.flow
    if name == "hub":
        n = args.size
        tm = hub_chain(n)
        flow = hub_flow(n)
        if args.mode != "ideal":
            topo, assignment = hub_instance(n)
            tm, _ = _chain_for(args, topo, assignment)
        instance = f"cycle:{n}+rover"
    elif name == "direct":
        topo = parse_descriptor(f"torus:{args.size}")
        assignment = assignment_from_name("full", topo)
        tm, _ = _chain_for(args, topo, assignment)
        flow = direct_flow(tm.stationary)
        instance = f"torus:{args.size} full"
    elif name == "relay":
        topo, assignment = torus_plus_mobile_instance(args.size, args.mobile)
        tm, _ = _chain_for(args, topo, assignment)
        flow = relay_flow(args.size * args.size, args.mobile)
        instance = f"torus:{args.size}+{args.mobile} roamers"
    elif name == "l-shaped":
        topo = parse_descriptor(f"torus:{args.size}")
        assignment = assignment_from_name(f"local:{args.window}", topo)
        tm, _ = _chain_for(args, topo, assignment)
        flow = l_shaped_flow(args.size, args.window)
        instance = f"torus:{args.size} local:{args.window}"
    else:  # bidirectional
        topo = parse_descriptor(f"torus:{args.size}")
        assignment = assignment_from_name("bidirectional", topo, seed=args.seed)
        tm, _ = _chain_for(args, topo, assignment)
        h = [a for a, p in enumerate(assignment.patterns) if p.kind == HORIZONTAL]
        v = [a for a, p in enumerate(assignment.patterns) if p.kind != HORIZONTAL]
        flow = bidirectional_flow(np.array(h), np.array(v))
        instance = f"torus:{args.size} bidirectional"
    try:
        report = verify_flow(flow, tm)
    except (InvalidFlowError, CertificationError) as exc:
        print(f"certification-failed={exc}", file=sys.stderr)
        return 3
    out = {
        "instance": instance,
        "method": "flow-upper",
        "flow": flow.name,
        "rho": f"{report.rho:.12g}",
        "length": report.length,
        "bound_ticks": f"{report.bound:.12g}",
        "t_relax_ticks": f"{report.t_relax:.12g}" if report.t_relax is not None else "n/a",
        "demand_error": f"{report.demand_error:.3g}",
    }
    if report.pessimistic_bound is not None:
        out["pessimistic_bound_ticks"] = f"{report.pessimistic_bound:.12g}"
    if report.flagged_edges:
        out["flagged_edges"] = report.flagged_edges
    for key, value in out.items():
        print(f"{key}={value}")
    if args.out:
        outdir = Path(args.out)
        experiments.write_summary(outdir / "flow_bound.txt", out)
        export_edge_loads(flow, tm, outdir / "flow_edges.csv")
    return 0


def _cmd_experiment(args) -> int:
    params = {}
    if args.trials is not None:
        params["trials"] = args.trials
    if args.ticks is not None:
        params["ticks"] = args.ticks
    params["seed"] = args.seed
    params["workers"] = args.workers
    if args.name == "scaling-fit":
        params = {"seed": args.seed}
    summary = experiments.run_experiment(args.name, args.out, **params)
    for key, value in summary.items():
        if key != "fits":
            print(f"{key}={value}")
    return 0


def _cmd_fit(args) -> int:
    sides = [int(s) for s in args.sides.split(",")]
    values = []
    for side in sides:
        topo = parse_descriptor(f"{args.topology}:{side}")
        assignment = assignment_from_name(args.mobility, topo, seed=args.seed)
        if args.quantity == "t-relax":
            tm, _ = _chain_for(args, topo, assignment)
            values.append(relaxation_time(tm))
        else:
            cfg = GossipConfig(
                topo, assignment, epsilon=args.epsilon, max_ticks=args.ticks,
                trials=args.trials, seed=args.seed, workers=args.workers,
            )
            values.append(estimate_ave_time(cfg).ticks)
    ns = [parse_descriptor(f"{args.topology}:{s}").n_sites for s in sides]
    fit = experiments.fit_scaling(ns, values)
    print(f"quantity={args.quantity}")
    print(f"sizes={ns}")
    print(f"values={[round(v, 4) for v in values]}")
    print(f"slope={fit.slope:.4f}")
    print(f"slope_ci=[{fit.ci_low:.4f},{fit.ci_high:.4f}]")
    print(f"residual={fit.residual:.4g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobgossip",
        description="Gossip averaging under agent mobility: simulation and bounds",
    )
    parser.add_argument("--config", help="key=value defaults file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, topology=True):
        if topology:
            p.add_argument("--topology", default="torus:8",
                           help="torus:<side> | cycle:<n> | rgg:<n>:<c1>")
            p.add_argument("--mobility", default="static",
                           help="static|full|horizontal|vertical|bidirectional|"
                                "local:<m>|rw:<steps>|plus-mobile:<m>")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--samples", type=int, default=100_000,
                       help="Monte Carlo placement samples")
        p.add_argument("--mode", default="exact", choices=["exact", "enumerate", "mc", "ideal"],
                       help="contact-probability mode (ideal: literature-rate hub chain)")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="run gossip trials and estimate the averaging time")
    common(p)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--ticks", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--profile", default="linear", choices=["linear", "spike"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("spectrum", help="lambda2 and relaxation time of the expected matrix")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_spectrum)

    p = sub.add_parser("lower-bound", help="merged-chain lower bound on the relaxation time")
    common(p)
    p.add_argument("--partition", default="rows", choices=sorted(_PARTITIONS))
    p.add_argument("--method", default="merge", choices=["merge", "column-wave"],
                   help="column-wave: column-profile quotient on the merged roamer chain")
    p.add_argument("--mobile", type=int, default=1, help="roaming agents (column-wave)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_lower_bound)

    p = sub.add_parser("flow-bound", help="congestion upper bound from a named flow")
    common(p, topology=False)
    p.add_argument("--flow", required=True,
                   choices=["direct", "hub", "relay", "l-shaped", "bidirectional"])
    p.add_argument("--size", type=int, required=True,
                   help="torus side (direct/relay/l-shaped/bidirectional) or ring length (hub)")
    p.add_argument("--mobile", type=int, default=1, help="roaming agents (relay)")
    p.add_argument("--window", type=int, default=1, help="local window half-width (l-shaped)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_flow_bound)

    p = sub.add_parser("experiment", help="run a named study")
    p.add_argument("name", choices=list(experiments.EXPERIMENTS))
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--ticks", type=int, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("fit", help="scaling exponent over a size sweep")
    common(p)
    p.add_argument("--quantity", default="t-relax", choices=["t-relax", "t-ave-estimate"])
    p.add_argument("--sides", default="4,6,8,10,12")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--ticks", type=int, default=20_000)
    p.add_argument("--trials", type=int, default=60)
    p.set_defaults(fn=_cmd_fit)
    return parser


def _apply_config(args, argv) -> None:
    """Config values fill in any option the user did not pass explicitly."""
    explicit = {tok.split("=", 1)[0].lstrip("-").replace("-", "_")
                for tok in argv if tok.startswith("--")}
    for key, value in _load_config_file(args.config).items():
        if key in explicit or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        else:
            setattr(args, key, value)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(args, argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
