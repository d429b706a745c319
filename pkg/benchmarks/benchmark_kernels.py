#!/usr/bin/env python3
"""Benchmark the compiled gossip kernels against the interpreted fallback.

Both backends run the same code over the same random stream, so outputs are
bit-identical; this script measures the speed gap.

Usage:
    python benchmarks/benchmark_kernels.py
    python benchmarks/benchmark_kernels.py --sides 8 16 24 --ticks 4000
    python benchmarks/benchmark_kernels.py --json results.json
"""

import argparse
import json
import time

import numpy as np

from mobgossip import _kernels as kern
from mobgossip.mobility import KernelRNG, assignment_from_name, start_positions
from mobgossip.topology import build_torus


def _trace_inputs(side, mobility, ticks, seed=1):
    topo = build_torus(side)
    assign = assignment_from_name(mobility, topo, seed=seed)
    kinds, home_r, home_c, param = assign.kernel_arrays(topo)
    rng = KernelRNG(seed, 1)
    pos = start_positions(topo, assign, rng)
    x0 = (pos[:, 0] + pos[:, 1]).astype(float)
    return dict(
        rows=pos[:, 0], cols=pos[:, 1], kinds=kinds, home_r=home_r, home_c=home_c,
        param=param, side=side, x0=x0, mean=float(x0.mean()),
        norm0=float(np.linalg.norm(x0)), ticks=ticks, state=rng.state,
    )


def _run_trace(fn, inp):
    rows = inp["rows"].copy()
    cols = inp["cols"].copy()
    x = inp["x0"].copy()
    err = np.empty(inp["ticks"] + 1)
    t0 = time.perf_counter()
    fn(rows, cols, inp["kinds"], inp["home_r"], inp["home_c"], inp["param"],
       inp["side"], inp["side"], x, inp["mean"], inp["norm0"], err, inp["state"])
    return time.perf_counter() - t0, err


def _run_contact(fn, inp, samples):
    rows = inp["rows"].copy()
    cols = inp["cols"].copy()
    n = rows.shape[0]
    p_sum = np.zeros((n, n))
    p_sq = np.zeros((n, n))
    t0 = time.perf_counter()
    fn(rows, cols, inp["kinds"], inp["home_r"], inp["home_c"], inp["param"],
       inp["side"], inp["side"], samples, p_sum, p_sq, inp["state"])
    return time.perf_counter() - t0, p_sum


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sides", type=int, nargs="+", default=[8, 12, 16])
    parser.add_argument("--ticks", type=int, default=4000)
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--mobility", default="horizontal")
    parser.add_argument("--json", default=None)
    args = parser.parse_args()

    if not kern.NUMBA_ENABLED:
        print("numba backend disabled (MOBGOSSIP_NUMBA=0 or numba missing); "
              "benchmarking the interpreted path only")

    results = {"ticks": args.ticks, "samples": args.samples,
               "mobility": args.mobility, "rows": []}

    # compile outside the timed region
    if kern.NUMBA_ENABLED:
        warm = _trace_inputs(4, args.mobility, 10)
        _run_trace(kern.gossip_trace_discrete, warm)
        _run_contact(kern.contact_mc_discrete, warm, 5)

    print(f"\ngossip trace: {args.ticks} ticks, {args.mobility} mobility")
    print(f"{'side':>6} {'agents':>7} {'compiled (s)':>13} {'fallback (s)':>13} {'speedup':>9}")
    for side in args.sides:
        inp = _trace_inputs(side, args.mobility, args.ticks)
        row = {"side": side, "agents": side * side}
        if kern.NUMBA_ENABLED:
            t_jit, e_jit = _run_trace(kern.gossip_trace_discrete, inp)
        else:
            t_jit, e_jit = float("nan"), None
        py_ticks = max(10, min(args.ticks, 200_000 // (side * side)))
        inp_py = dict(inp, ticks=py_ticks)
        with np.errstate(over="ignore"):
            t_py, e_py = _run_trace(kern.python_impl(kern.gossip_trace_discrete), inp_py)
        t_py_scaled = t_py * args.ticks / py_ticks
        if e_jit is not None:
            assert np.array_equal(e_jit[: py_ticks + 1], e_py), "backends diverged"
        speedup = t_py_scaled / t_jit if t_jit == t_jit else float("nan")
        print(f"{side:>6} {side*side:>7} {t_jit:>13.4f} {t_py_scaled:>13.4f} {speedup:>8.0f}x")
        row.update(trace_compiled_s=t_jit, trace_fallback_s=t_py_scaled, trace_speedup=speedup)
        results["rows"].append(row)

    print(f"\ncontact sampling: {args.samples} placements, {args.mobility} mobility")
    print(f"{'side':>6} {'agents':>7} {'compiled (s)':>13} {'fallback (s)':>13} {'speedup':>9}")
    for row in results["rows"]:
        side = row["side"]
        inp = _trace_inputs(side, args.mobility, 1)
        if kern.NUMBA_ENABLED:
            t_jit, p_jit = _run_contact(kern.contact_mc_discrete, inp, args.samples)
        else:
            t_jit, p_jit = float("nan"), None
        py_samples = max(2, min(args.samples, 40_000 // (side * side)))
        with np.errstate(over="ignore"):
            t_py, p_py = _run_contact(
                kern.python_impl(kern.contact_mc_discrete), inp, py_samples)
        t_py_scaled = t_py * args.samples / py_samples
        speedup = t_py_scaled / t_jit if t_jit == t_jit else float("nan")
        print(f"{side:>6} {side*side:>7} {t_jit:>13.4f} {t_py_scaled:>13.4f} {speedup:>8.0f}x")
        row.update(contact_compiled_s=t_jit, contact_fallback_s=t_py_scaled,
                   contact_speedup=speedup)

    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
        print(f"\nresults written to {args.json}")


if __name__ == "__main__":
    main()
