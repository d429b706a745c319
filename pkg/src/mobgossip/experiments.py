"""Experiment drivers: the four simulation studies and scaling-exponent fits.

Every driver emits CSV files (one per curve, headers naming units) plus a
key=value summary, and is deterministic for a fixed seed and worker count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .bounds import lower_bound_via_merge, row_partition, torus_plus_mobile_chain
from .chain import contact_probabilities, expected_matrix, relaxation_time
from .engine import GossipConfig, error_curves, median_crossing
from .mobility import assignment_from_name
from .topology import build_torus

EXPERIMENTS = (
    "no-vs-horizontal",
    "full-vs-bidirectional",
    "add-mobile",
    "random-walk-mixing",
    "scaling-fit",
)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    residual: float
    xs: tuple
    values: tuple


def fit_scaling(xs, values, confidence: float = 0.95) -> ScalingFit:
    """Least-squares slope of log(value) against log(x) with a t confidence interval."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.size < 3:
        raise ValueError("need at least 3 sizes for a scaling fit")
    lx = np.log(xs)
    ly = np.log(values)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fitted = A @ coef
    dof = xs.size - 2
    resid = float(np.sum((ly - fitted) ** 2))
    if dof > 0:
        s2 = resid / dof
        se = float(np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2)))
        tq = float(stats.t.ppf(0.5 + confidence / 2, dof))
    else:
        se, tq = 0.0, 0.0
    return ScalingFit(
        slope, intercept, se, slope - tq * se, slope + tq * se, resid,
        tuple(xs.tolist()), tuple(values.tolist()),
    )


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def write_summary(path: Path, entries: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


_CURVE_HEADER = [
    "tick",
    "median_rel_l2_error",
    "q10_rel_l2_error",
    "q90_rel_l2_error",
    "mean_rel_l2_error",
]


def _emit_curve(out: Path, name: str, config: GossipConfig, record_every: int) -> dict:
    curves = error_curves(config, record_every)
    write_csv(
        out / f"{name}.csv",
        _CURVE_HEADER,
        zip(curves["ticks"], curves["q50"], curves["q10"], curves["q90"], curves["mean"]),
    )
    return curves


def no_vs_horizontal(
    out: Path, sides=(8, 12, 16), ticks=10_000, trials=40, seed=1, workers=1
) -> dict:
    """Static torus versus horizontal mobility at a fixed tick budget.

    The gap ratio of a side is the ratio of the two median errors at the
    final tick (horizontal over static); it shrinks toward 1 as the network
    grows because both chains slow down like n^2 while their rate difference
    shrinks like 1/n^2.
    """
    out = Path(out)
    gap_ratios = {}
    for side in sides:
        topo = build_torus(side)
        finals = {}
        for mob in ("static", "horizontal"):
            cfg = GossipConfig(
                topo, assignment_from_name(mob, topo), max_ticks=ticks,
                trials=trials, seed=seed, workers=workers,
            )
            curves = _emit_curve(out, f"no_vs_horizontal_side{side}_{mob}", cfg,
                                 record_every=max(1, ticks // 500))
            finals[mob] = float(curves["q50"][-1])
        gap_ratios[side] = finals["horizontal"] / finals["static"]
    summary = {f"gap_ratio_side{s}": gap_ratios[s] for s in sides}
    summary["monotone_decreasing"] = all(
        gap_ratios[a] > gap_ratios[b] for a, b in zip(sides, sides[1:])
    )
    write_summary(out / "no_vs_horizontal_summary.txt", summary)
    return summary


def full_vs_bidirectional(
    out: Path, side=12, epsilon=0.01, ticks=6_000, trials=60, seed=1, workers=1
) -> dict:
    """Median ticks to reach epsilon for full versus coin-flip 1D mobility."""
    out = Path(out)
    topo = build_torus(side)
    medians = {}
    for mob in ("full", "bidirectional"):
        cfg = GossipConfig(
            topo, assignment_from_name(mob, topo, seed=seed), epsilon=epsilon,
            max_ticks=ticks, trials=trials, seed=seed, workers=workers,
        )
        _emit_curve(out, f"full_vs_bidirectional_side{side}_{mob}", cfg,
                    record_every=max(1, ticks // 500))
        medians[mob] = median_crossing(cfg)
    ratio = medians["bidirectional"] / medians["full"]
    summary = {
        "ticks_to_eps_full": medians["full"],
        "ticks_to_eps_bidirectional": medians["bidirectional"],
        "ratio": ratio,
    }
    write_summary(out / "full_vs_bidirectional_summary.txt", summary)
    return summary


def add_mobile(
    out: Path, side=14, ms=(0, 1, 2, 4, 8), ticks=20_000, trials=50, seed=1, workers=1
) -> dict:
    """Error after a fixed budget as roaming agents are added to a static grid."""
    out = Path(out)
    topo = build_torus(side)
    finals = {}
    for m in ms:
        name = "static" if m == 0 else f"plus-mobile:{m}"
        cfg = GossipConfig(
            topo, assignment_from_name(name, topo), max_ticks=ticks,
            trials=trials, seed=seed, workers=workers,
        )
        curves = _emit_curve(out, f"add_mobile_side{side}_m{m}", cfg,
                             record_every=max(1, ticks // 500))
        finals[m] = float(curves["q50"][-1])
    summary = {f"final_error_m{m}": finals[m] for m in ms}
    summary["monotone_decreasing"] = all(
        finals[a] > finals[b] for a, b in zip(ms, ms[1:])
    )
    write_summary(out / "add_mobile_summary.txt", summary)
    return summary


def random_walk_mixing(
    out: Path, side=10, steps=(1, 4, 16, 64), ticks=8_000, trials=40, seed=1, workers=1
) -> dict:
    """Row random walks of increasing speed against the iid horizontal limit."""
    out = Path(out)
    topo = build_torus(side)
    finals = {}
    cfg = GossipConfig(
        topo, assignment_from_name("horizontal", topo), max_ticks=ticks,
        trials=trials, seed=seed, workers=workers,
    )
    curves = _emit_curve(out, f"random_walk_side{side}_horizontal", cfg,
                         record_every=max(1, ticks // 500))
    horizontal = float(curves["q50"][-1])
    for st in steps:
        cfg = GossipConfig(
            topo, assignment_from_name(f"rw:{st}", topo), max_ticks=ticks,
            trials=trials, seed=seed, workers=workers,
        )
        curves = _emit_curve(out, f"random_walk_side{side}_steps{st}", cfg,
                             record_every=max(1, ticks // 500))
        finals[st] = float(curves["q50"][-1])
    summary = {f"final_error_steps{s}": finals[s] for s in steps}
    summary["final_error_horizontal"] = horizontal
    summary["ordered"] = all(finals[a] >= finals[b] for a, b in zip(steps, steps[1:]))
    summary["bounded_by_horizontal"] = all(v >= horizontal * 0.8 for v in finals.values())
    write_summary(out / "random_walk_summary.txt", summary)
    return summary


def scaling_fit(
    out: Path, sides=(4, 6, 8, 10, 12), m_sweep=(1, 2, 4, 8), m_side=12, seed=1, **_
) -> dict:
    """Relaxation-time scaling exponents from exact chains.

    Fits: static torus and full mobility against n; the row-merged horizontal
    lower bound against n; the torus-plus-roamers chain against m at fixed
    side.
    """
    out = Path(out)
    rows = []
    fits = {}

    def sweep(label, values):
        fit = fit_scaling([v[0] for v in values], [v[1] for v in values])
        fits[label] = fit
        for x, t in values:
            rows.append((label, x, t))
        return fit

    static_vals = []
    full_vals = []
    merged_vals = []
    for side in sides:
        topo = build_torus(side)
        n = side * side
        tm_s = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
        static_vals.append((n, relaxation_time(tm_s)))
        tm_f = expected_matrix(contact_probabilities(topo, assignment_from_name("full", topo)))
        full_vals.append((n, relaxation_time(tm_f)))
        res = lower_bound_via_merge(
            topo, assignment_from_name("horizontal", topo), row_partition(topo)
        )
        merged_vals.append((n, res["t_relax"]))
    sweep("static_torus_vs_n", static_vals)
    sweep("full_mobility_vs_n", full_vals)
    sweep("horizontal_merged_vs_n", merged_vals)
    mobile_vals = [(m, relaxation_time(torus_plus_mobile_chain(m_side, m))) for m in m_sweep]
    sweep("torus_plus_mobile_vs_m", mobile_vals)

    write_csv(out / "scaling_points.csv", ["sweep", "x", "t_relax_ticks"], rows)
    summary = {}
    for label, fit in fits.items():
        summary[f"{label}_slope"] = fit.slope
        summary[f"{label}_ci"] = f"[{fit.ci_low:.4f},{fit.ci_high:.4f}]"
    write_summary(out / "scaling_summary.txt", summary)
    return {"fits": fits, **summary}


def run_experiment(name: str, out, **params) -> dict:
    """Dispatch an experiment by its CLI name."""
    drivers = {
        "no-vs-horizontal": no_vs_horizontal,
        "full-vs-bidirectional": full_vs_bidirectional,
        "add-mobile": add_mobile,
        "random-walk-mixing": random_walk_mixing,
        "scaling-fit": scaling_fit,
    }
    if name not in drivers:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    return drivers[name](Path(out), **params)
