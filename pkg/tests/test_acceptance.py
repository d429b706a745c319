"""Acceptance suite: one test per criterion, each printing PASS/FAIL lines.

Four sub-checks encode idealized asymptotic constants that the exactly
computed chains do not realize at the tested sizes; they are implemented
faithfully and fail honestly, with the measured values printed and the
analysis recorded in the project notes:

* criterion 4: the column-wave quotient ratio at side 16 (measured ~1.21,
  asserted range [2.5, 6]);
* criterion 5: the roamer-count scaling exponent of the relaxation time
  (measured ~-0.20 because the lattice term dominates the spectral gap for
  m <= 8, asserted -1.0 +/- 0.3; the congestion bound does scale like 1/m);
* criterion 6: the large-t second-moment decay rate (measured ~2x log
  lambda2 exactly and empirically, asserted within 5% of log lambda2);
* criterion 7d: the row-walk ordering against iid horizontal mobility
  (measured differences are sub-2% with the opposite sign).
"""

import numpy as np
import pytest

import mobgossip as mg
from mobgossip.bounds import (
    MergeMap,
    bidirectional_flow,
    circulant_eigenvalues,
    circulant_matrix,
    column_wave_bound,
    cycle_generator,
    direct_flow,
    hub_chain,
    hub_flow,
    hub_instance,
    induce_chain,
    l_shaped_flow,
    lower_bound_via_merge,
    merged_mobile_chain,
    relay_flow,
    row_partition,
    torus_plus_mobile_chain,
    verify_flow,
)
from mobgossip.chain import (
    TransitionMatrix,
    contact_probabilities,
    dirichlet_form,
    expected_matrix,
    is_psd,
    rayleigh_lower_bound,
    relaxation_time,
    second_eigenvalue,
    second_eigenvector,
)
from mobgossip.engine import GossipConfig, run_trace_with_final, second_moment_curve
from mobgossip.experiments import (
    add_mobile,
    fit_scaling,
    full_vs_bidirectional,
    no_vs_horizontal,
    random_walk_mixing,
)
from mobgossip.mobility import (
    HORIZONTAL,
    KernelRNG,
    assignment_from_name,
    start_positions,
)
from mobgossip.engine import initial_values
from mobgossip.topology import build_cycle, build_torus

WORKERS = 4


def _report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def _exact_instances():
    cases = []
    for side, name in [(4, "static"), (6, "full"), (6, "horizontal"), (6, "vertical"),
                       (6, "local:1"), (6, "bidirectional")]:
        topo = build_torus(side)
        cases.append((f"torus:{side}/{name}", topo, assignment_from_name(name, topo, seed=3)))
    topo = build_cycle(12)
    cases.append(("cycle:12/static", topo, assignment_from_name("static", topo)))
    cases.append(("cycle:16+rover", *hub_instance(16)))
    topo = build_torus(6)
    cases.append(("torus:6+3 roamers", topo, assignment_from_name("plus-mobile:3", topo)))
    return cases


# ---------------------------------------------------------------------------
# criterion 1: exactness suite
# ---------------------------------------------------------------------------


def test_c1_mass_conservation_and_monotone_error():
    rng = np.random.default_rng(0)
    names = ["static", "full", "horizontal", "vertical", "local:1", "rw:2",
             "bidirectional", "plus-mobile:2"]
    traces = 0
    worst_mass = 0.0
    worst_rise = -np.inf
    for k in range(50):
        side = int(rng.integers(3, 7))
        topo = build_torus(side)
        assign = assignment_from_name(names[k % len(names)], topo, seed=k)
        cfg = GossipConfig(topo, assign, max_ticks=150, trials=30, seed=1000 + k)
        for trial in range(20):
            # homeless roamers draw their start from the trial's own stream
            pos = start_positions(topo, assign, KernelRNG(cfg.seed, trial + 1))
            x0 = initial_values(cfg, pos)
            err, x = run_trace_with_final(cfg, trial)
            traces += 1
            worst_mass = max(worst_mass,
                             abs(x.sum() - x0.sum()) / (len(assign) * max(1.0, abs(x0.sum()))))
            worst_rise = max(worst_rise, float(np.diff(err).max()))
    ok = traces == 1000 and worst_mass <= 1e-12 and worst_rise <= 1e-12
    assert _report("1a", ok,
                   f"{traces} traces, worst mass drift {worst_mass:.2e}, "
                   f"worst error rise {worst_rise:.2e}")


def test_c1_expected_matrices_symmetric_doubly_stochastic_psd():
    worst_sym = worst_row = 0.0
    all_psd = True
    for label, topo, assign in _exact_instances():
        tm = expected_matrix(contact_probabilities(topo, assign))
        W = tm.matrix
        worst_sym = max(worst_sym, float(np.abs(W - W.T).max()))
        worst_row = max(worst_row, float(np.abs(W.sum(axis=1) - 1.0).max()))
        all_psd = all_psd and is_psd(tm)
    ok = worst_sym <= 1e-12 and worst_row <= 1e-10 and all_psd
    assert _report("1b", ok,
                   f"symmetry {worst_sym:.2e}, row sums {worst_row:.2e}, PSD {all_psd}")


def test_c1_induced_chains_stochastic_and_stationary():
    rng = np.random.default_rng(4)
    worst_row = worst_pi = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 12))
        pi = rng.dirichlet(np.ones(n)) + 0.02
        pi /= pi.sum()
        theta = np.triu(rng.random((n, n)), 1)
        theta += theta.T
        W = theta / (pi[:, None] * 1.5 * np.max(theta.sum(1) / pi))
        W[np.diag_indices(n)] = 1 - W.sum(1)
        tm = TransitionMatrix(W, pi)
        merged = induce_chain(tm, MergeMap.from_labels(rng.integers(0, 3, n)))
        worst_row = max(worst_row, float(np.abs(merged.matrix.sum(1) - 1).max()))
        worst_pi = max(worst_pi, float(
            np.abs(merged.stationary @ merged.matrix - merged.stationary).max()))
    topo = build_torus(6)
    res = lower_bound_via_merge(topo, assignment_from_name("horizontal", topo),
                                row_partition(topo))
    merged = res["induced"]
    worst_row = max(worst_row, float(np.abs(merged.matrix.sum(1) - 1).max()))
    worst_pi = max(worst_pi, float(
        np.abs(merged.stationary @ merged.matrix - merged.stationary).max()))
    ok = worst_row <= 1e-10 and worst_pi <= 1e-10
    assert _report("1c", ok, f"row sums {worst_row:.2e}, stationarity {worst_pi:.2e}")


def test_c1_flow_demands_satisfied():
    worst = 0.0
    checks = []
    checks.append(verify_flow(hub_flow(16), hub_chain(16)))
    checks.append(verify_flow(relay_flow(64, 4), torus_plus_mobile_chain(8, 4)))
    topo = build_torus(6)
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("local:3", topo)))
    checks.append(verify_flow(l_shaped_flow(6, 3), tm))
    topo = build_torus(8)
    assign = assignment_from_name("bidirectional", topo, seed=3)
    tm = expected_matrix(contact_probabilities(topo, assign))
    h = np.array([a for a, p in enumerate(assign.patterns) if p.kind == HORIZONTAL])
    v = np.array([a for a, p in enumerate(assign.patterns) if p.kind != HORIZONTAL])
    checks.append(verify_flow(bidirectional_flow(h, v), tm))
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("full", topo)))
    checks.append(verify_flow(direct_flow(tm.stationary), tm))
    worst = max(rep.demand_error for rep in checks)
    ok = worst <= 1e-12
    assert _report("1d", ok, f"worst demand error {worst:.2e} over {len(checks)} flows")


# ---------------------------------------------------------------------------
# criterion 2: merging never increases the relaxation time
# ---------------------------------------------------------------------------


def test_c2_contraction_under_merging():
    rng = np.random.default_rng(12)
    violations = 0
    worst_margin = -np.inf
    for _ in range(200):
        n = int(rng.integers(3, 13))
        pi = rng.dirichlet(np.ones(n)) + 0.02
        pi /= pi.sum()
        theta = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.85), 1)
        theta += theta.T
        scale = 1.5 * np.max(theta.sum(1) / pi)
        W = theta / (pi[:, None] * scale)
        W[np.diag_indices(n)] = 1 - W.sum(1)
        tm = TransitionMatrix(W, pi)
        merged = induce_chain(tm, MergeMap.from_labels(
            rng.integers(0, max(2, int(rng.integers(2, n + 1))), n)))
        t_orig = relaxation_time(tm)
        if not np.isfinite(t_orig):
            continue
        t_merged = relaxation_time(merged)
        worst_margin = max(worst_margin, t_merged - t_orig)
        if t_merged > t_orig + 1e-8:
            violations += 1
    ok = violations == 0
    assert _report("2", ok,
                   f"0 violations required, got {violations}; "
                   f"worst T(merged)-T(original) = {worst_margin:.2e}")


# ---------------------------------------------------------------------------
# criterion 3: congestion bounds hold; hub congestion exact
# ---------------------------------------------------------------------------


def test_c3_hub_congestion_exact():
    worst = 0.0
    for n in (8, 16, 32):
        rep = verify_flow(hub_flow(n), hub_chain(n))
        worst = max(worst, abs(rep.rho - n ** 3 / (n + 1)))
    ok = worst <= 1e-10
    assert _report("3a", ok, f"worst |rho - n^3/(n+1)| = {worst:.2e}")


def test_c3_congestion_bound_holds_on_every_builtin_flow():
    results = []

    def check(label, flow, tm):
        rep = verify_flow(flow, tm)  # raises on violation
        results.append((label, rep.bound / rep.t_relax))

    for n in (8, 16, 32, 64):
        topo, assign = hub_instance(n)
        check(f"hub:{n}", hub_flow(n),
              expected_matrix(contact_probabilities(topo, assign)))
    for side in (4, 6, 8, 10):
        topo = build_torus(side)
        tm = expected_matrix(contact_probabilities(topo, assignment_from_name("full", topo)))
        check(f"direct:{side}", direct_flow(tm.stationary), tm)
    for m in (1, 2, 4, 8):
        check(f"relay:8+{m}", relay_flow(64, m), torus_plus_mobile_chain(8, m))
    for side, m in ((6, 2), (6, 3), (9, 3), (10, 5)):
        topo = build_torus(side)
        tm = expected_matrix(
            contact_probabilities(topo, assignment_from_name(f"local:{m}", topo)))
        check(f"l-shaped:{side}/{m}", l_shaped_flow(side, m), tm)
    for side in (6, 8, 10):
        topo = build_torus(side)
        assign = assignment_from_name("bidirectional", topo, seed=3)
        tm = expected_matrix(contact_probabilities(topo, assign))
        h = np.array([a for a, p in enumerate(assign.patterns) if p.kind == HORIZONTAL])
        v = np.array([a for a, p in enumerate(assign.patterns) if p.kind != HORIZONTAL])
        check(f"bidirectional:{side}", bidirectional_flow(h, v), tm)
    margins = min(r for _, r in results)
    # the full-mobility direct flow attains equality, so allow float slack
    ok = margins >= 1.0 - 1e-9
    assert _report("3b", ok,
                   f"{len(results)} flows verified, min bound/T_relax = {margins:.12f}")


# ---------------------------------------------------------------------------
# criterion 4: Rayleigh certificates
# ---------------------------------------------------------------------------


def _wave_chains():
    return [(side, m, merged_mobile_chain(side, m))
            for side in (8, 12, 16) for m in (1, 4, 16)]


def test_c4_random_test_functions_never_exceed():
    rng = np.random.default_rng(21)
    worst = -np.inf
    for side, m, tm in _wave_chains():
        t_relax = relaxation_time(tm)
        for _ in range(100):
            g = rng.standard_normal(tm.n)
            worst = max(worst, rayleigh_lower_bound(tm, g) - t_relax)
    ok = worst <= 1e-8
    assert _report("4a", ok, f"worst quotient - T_relax = {worst:.2e} over 900 functions")


def test_c4_eigenvector_attains_relaxation_time():
    worst = 0.0
    for side, m, tm in _wave_chains():
        g = second_eigenvector(tm)
        t_relax = relaxation_time(tm)
        worst = max(worst, abs(rayleigh_lower_bound(tm, g) - t_relax) / t_relax)
    ok = worst <= 1e-8
    assert _report("4b", ok, f"worst relative |quotient - T_relax| = {worst:.2e}")


def test_c4_column_wave_ratio_at_side_16():
    """Asserted ratio ~4 embeds unit constants; the exact chains give ~1.21.

    The lattice-edge term of the Dirichlet form dominates the aggregate-state
    term for m <= 8 at every size (their ratio is ~m/12, size-independent),
    so the quotient cannot scale like 1/m until m > 12.
    """
    b1 = column_wave_bound(16, 1)
    b4 = column_wave_bound(16, 4)
    ratio = b1.bound / b4.bound
    lower_ok = b1.bound <= b1.t_relax + 1e-8 and b4.bound <= b4.t_relax + 1e-8
    ok = lower_ok and 2.5 <= ratio <= 6.0
    assert _report("4c", ok,
                   f"bound(m=1)/bound(m=4) = {ratio:.3f}, asserted [2.5, 6]; "
                   f"bounds stay below T_relax: {lower_ok}")


# ---------------------------------------------------------------------------
# criterion 5: scaling exponents of the relaxation time
# ---------------------------------------------------------------------------


def _slope(ns, ts):
    return fit_scaling(ns, ts).slope


def test_c5_static_torus_slope():
    sides = (4, 6, 8, 10, 12)
    ts = []
    for side in sides:
        topo = build_torus(side)
        tm = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
        ts.append(relaxation_time(tm))
    slope = _slope([s * s for s in sides], ts)
    ok = abs(slope - 2.0) <= 0.25
    assert _report("5a", ok, f"static torus T_relax slope {slope:.3f}, asserted 2.0 +/- 0.25")


def test_c5_horizontal_merged_slope():
    sides = (4, 6, 8, 10, 12)
    ts = []
    for side in sides:
        topo = build_torus(side)
        res = lower_bound_via_merge(topo, assignment_from_name("horizontal", topo),
                                    row_partition(topo))
        ts.append(res["t_relax"])
    slope = _slope([s * s for s in sides], ts)
    ok = abs(slope - 2.0) <= 0.25
    assert _report("5b", ok, f"merged horizontal slope {slope:.3f}, asserted 2.0 +/- 0.25")


def test_c5_full_mobility_slope():
    sides = (4, 6, 8, 10, 12)
    ts = []
    for side in sides:
        topo = build_torus(side)
        tm = expected_matrix(contact_probabilities(topo, assignment_from_name("full", topo)))
        ts.append(relaxation_time(tm))
    slope = _slope([s * s for s in sides], ts)
    ok = abs(slope - 1.0) <= 0.25
    assert _report("5c", ok, f"full mobility slope {slope:.3f}, asserted 1.0 +/- 0.25")


def test_c5_roamer_count_slope_at_side_12():
    """Asserted -1 power in m; the exact spectral gap gives ~-0.20 for m <= 8.

    gap(m) = lattice term + m * coupling term with the lattice term about
    12x the coupling at every size, so T_relax(m) flattens for small m.  The
    relay-flow congestion bound does scale like 1/m (see the flow tests).
    """
    ms = (1, 2, 4, 8)
    ts = [relaxation_time(torus_plus_mobile_chain(12, m)) for m in ms]
    slope = _slope(ms, ts)
    ok = abs(slope - (-1.0)) <= 0.3
    assert _report("5d", ok,
                   f"roamer-count slope {slope:.3f} over m={ms}, asserted -1.0 +/- 0.3; "
                   f"T_relax = {[f'{t:.0f}' for t in ts]}")


# ---------------------------------------------------------------------------
# criterion 6: simulation versus spectrum
# ---------------------------------------------------------------------------


def test_c6_second_moment_rate_matches_lambda2():
    """Asserted rate log(lambda2); measured (exactly and empirically) ~2x that.

    E||x(t) - mean||^2 <= lambda2^t holds and is tight only in the early
    window; at large t the decay follows the top eigenvalue of
    M -> E[W M W], which sits at lambda2^2 + o(gap) for lattice instances.
    """
    topo = build_torus(8)
    assign = assignment_from_name("static", topo)
    tm = expected_matrix(contact_probabilities(topo, assign))
    lam2 = second_eigenvalue(tm)
    cfg = GossipConfig(topo, assign, max_ticks=6000, trials=1000, seed=42, workers=WORKERS)
    msq = second_moment_curve(cfg)
    t1, t2 = 1500, 5000
    rate = float(np.polyfit(np.arange(t1, t2), np.log(msq[t1:t2]), 1)[0])
    rel = abs(rate - np.log(lam2)) / abs(np.log(lam2))
    ok = rel <= 0.05
    assert _report(
        "6", ok,
        f"measured rate {rate:.3e} vs log(lambda2) {np.log(lam2):.3e} "
        f"(ratio {rate / np.log(lam2):.2f}), asserted within 5%")


# ---------------------------------------------------------------------------
# criterion 7: figure reproductions
# ---------------------------------------------------------------------------


def test_c7_no_vs_horizontal_gap_shrinks(tmp_path):
    summary = no_vs_horizontal(tmp_path, sides=(8, 12, 16), ticks=10_000,
                               trials=40, seed=1, workers=WORKERS)
    gaps = [max(summary[f"gap_ratio_side{s}"], 1 / summary[f"gap_ratio_side{s}"])
            for s in (8, 12, 16)]
    ok = gaps[0] > gaps[1] > gaps[2]
    assert _report("7a", ok,
                   f"fixed-budget error-gap ratios {['%.2f' % g for g in gaps]} "
                   "decrease monotonically over sides 8, 12, 16")


def test_c7_bidirectional_within_factor_3_of_full(tmp_path):
    summary = full_vs_bidirectional(tmp_path, side=12, epsilon=0.01, ticks=6000,
                                    trials=60, seed=1, workers=WORKERS)
    ok = summary["ratio"] <= 3.0
    assert _report("7b", ok,
                   f"ticks-to-eps ratio bidirectional/full = {summary['ratio']:.2f} <= 3")


def test_c7_added_roamers_cut_error_monotonically(tmp_path):
    summary = add_mobile(tmp_path, side=14, ms=(0, 1, 2, 4, 8), ticks=20_000,
                         trials=50, seed=1, workers=WORKERS)
    finals = [summary[f"final_error_m{m}"] for m in (0, 1, 2, 4, 8)]
    ok = all(a > b for a, b in zip(finals, finals[1:]))
    # the log error also falls roughly linearly in m
    slope = np.polyfit([0, 1, 2, 4, 8], np.log(finals), 1)[0]
    assert _report("7c", ok,
                   f"final errors {['%.2e' % f for f in finals]} decrease with m "
                   f"(log-slope {slope:.3f}/roamer)")


def test_c7_random_walk_ordering(tmp_path):
    """Asserted ordering by walk speed, bounded below by iid horizontal.

    Honest measurement: at one averaging per timeslot, position mixing is
    never the bottleneck, so the walk variants sit within ~2% of the iid
    curve (slightly below it, and static below that); no ordering exists.
    """
    summary = random_walk_mixing(tmp_path, side=10, steps=(1, 4, 16, 64),
                                 ticks=8000, trials=60, seed=1, workers=WORKERS)
    finals = [summary[f"final_error_steps{s}"] for s in (1, 4, 16, 64)]
    horizontal = summary["final_error_horizontal"]
    ordered = all(a >= b for a, b in zip(finals, finals[1:]))
    bounded = all(f >= horizontal for f in finals)
    ok = ordered and bounded
    assert _report("7d", ok,
                   f"errors by steps {['%.3e' % f for f in finals]}, "
                   f"horizontal {horizontal:.3e}; ordered={ordered}, "
                   f"bounded below by horizontal={bounded}")


# ---------------------------------------------------------------------------
# criterion 8: circulant oracle
# ---------------------------------------------------------------------------


def test_c8_circulant_oracle():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(3, 48))
        gen = np.zeros(k)
        gen[0] = rng.standard_normal()
        for off in range(1, k // 2 + 1):
            v = rng.standard_normal()
            gen[off] = v
            gen[(k - off) % k] = v
        lam = np.sort(circulant_eigenvalues(gen))
        dense = np.sort(np.linalg.eigvalsh(circulant_matrix(gen)))
        worst = max(worst, float(np.abs(lam - dense).max()))
    ok = worst <= 1e-10
    assert _report("8a", ok, f"worst DFT-vs-dense gap {worst:.2e} over 20 generators")


def test_c8_merged_horizontal_chain_is_the_predicted_circulant():
    """The row-merged horizontal chain is exactly the nearest-neighbor circulant."""
    worst = 0.0
    for side in (6, 9, 12):
        topo = build_torus(side)
        res = lower_bound_via_merge(topo, assignment_from_name("horizontal", topo),
                                    row_partition(topo))
        merged = res["induced"]
        alpha = merged.matrix[0, 1]
        np.testing.assert_allclose(merged.matrix, circulant_matrix(cycle_generator(side, alpha)),
                                   atol=1e-14)
        lam2 = second_eigenvalue(merged)
        formula = 1 - 2 * alpha + 2 * alpha * np.cos(2 * np.pi / side)
        worst = max(worst, abs(lam2 - formula))
    ok = worst <= 1e-12
    assert _report("8b", ok, f"worst |lambda2 - (1-2a+2a cos(2pi/side))| = {worst:.2e}")
