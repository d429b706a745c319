"""Contact probabilities, expected matrices, spectra, and Rayleigh quotients."""

import numpy as np
import pytest

import mobgossip as mg
from mobgossip.bounds import circulant_eigenvalues, hub_instance
from mobgossip.chain import (
    ContactMatrix,
    TransitionMatrix,
    UnsupportedModeError,
    contact_probabilities,
    dirichlet_form,
    eigenvalues,
    expected_matrix,
    is_psd,
    power_iteration_second,
    rayleigh_lower_bound,
    relaxation_time,
    second_eigenvalue,
    second_eigenvector,
)
from mobgossip.mobility import (
    STATIC,
    MobilityAssignment,
    MobilityPattern,
    assignment_from_name,
)
from mobgossip.topology import build_cycle, build_rgg, build_torus


def _pair_instance():
    topo = build_cycle(3)
    pats = [MobilityPattern(STATIC, home=(0.0, 0.0)) for _ in range(2)]
    return topo, MobilityAssignment(pats)


def _random_reversible(rng, n):
    """Random reversible chain from random conductances and stationary weights."""
    pi = rng.dirichlet(np.ones(n))
    theta = rng.random((n, n))
    theta = np.triu(theta, 1)
    theta = theta + theta.T
    scale = 2.2 * np.max(theta.sum(axis=1) / pi)
    W = theta / (pi[:, None] * scale)
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    assert np.all(W.diagonal() > 0)
    return TransitionMatrix(W, pi)


# ---------------------------------------------------------------------------
# contact probabilities
# ---------------------------------------------------------------------------


def test_two_colocated_agents_contact_half():
    topo, assign = _pair_instance()
    c = contact_probabilities(topo, assign)
    assert c.probs[0, 1] == pytest.approx(0.5)
    assert c.probs[1, 0] == pytest.approx(0.5)


def test_static_cycle_neighbor_contacts():
    topo = build_cycle(10)
    c = contact_probabilities(topo, assignment_from_name("static", topo))
    P = c.probs
    assert P[0, 1] == pytest.approx(1.0 / 20)
    assert P[0, 9] == pytest.approx(1.0 / 20)
    assert P[0, 2] == 0.0
    assert P.sum() == pytest.approx(1.0)


def test_hub_instance_exact_contacts():
    """Ring + rover under uniform selection over all n+1 agents."""
    n = 8
    topo, assign = hub_instance(n)
    c = contact_probabilities(topo, assign)
    # static i picks the rover: rover adjacent with prob 3/n, then 1 of 3 neighbors
    assert c.probs[0, n] == pytest.approx(1.0 / (n * (n + 1)), abs=1e-15)
    assert c.probs[n, 0] == pytest.approx(1.0 / (n * (n + 1)), abs=1e-15)


def test_analytic_matches_enumeration_mixed_mobility():
    topo = build_torus(4)
    pats = []
    for a, (r, col) in enumerate(topo.all_sites()):
        if a == 2:
            pats.append(MobilityPattern(mg.mobility.HORIZONTAL, home=(float(r), float(col))))
        elif a == 9:
            pats.append(MobilityPattern(mg.mobility.LOCAL, home=(float(r), float(col)), m=1))
        else:
            pats.append(MobilityPattern(STATIC, home=(float(r), float(col))))
    assign = MobilityAssignment(pats)
    ca = contact_probabilities(topo, assign, "exact")
    ce = contact_probabilities(topo, assign, "enumerate")
    np.testing.assert_allclose(ca.probs, ce.probs, atol=1e-14)


def test_mc_agrees_with_exact_within_four_sigma():
    topo, assign = hub_instance(8)
    exact = contact_probabilities(topo, assign, "exact")
    mc = contact_probabilities(topo, assign, "mc", samples=30_000, seed=3)
    mask = mc.stderr > 0
    z = np.abs(mc.probs - exact.probs)[mask] / mc.stderr[mask]
    assert z.max() < 4.0
    # entries that are exactly zero in truth stay zero in the sample
    assert np.all(mc.probs[exact.probs == 0] == 0)


def test_mc_stderr_halves_with_doubling():
    topo = build_torus(3)
    assign = assignment_from_name("horizontal", topo)
    maxerr = []
    for samples in (2000, 4000, 8000, 16000):
        c = contact_probabilities(topo, assign, "mc", samples=samples, seed=5)
        maxerr.append(c.stderr.max())
    for a, b in zip(maxerr, maxerr[1:]):
        assert 0.6 < b / a < 0.82


def test_row_walk_has_no_expected_matrix():
    topo = build_torus(4)
    assign = assignment_from_name("rw:2", topo)
    with pytest.raises(UnsupportedModeError):
        contact_probabilities(topo, assign, "exact")


def test_enumeration_caps_joint_space():
    topo = build_torus(6)
    assign = assignment_from_name("full", topo)
    with pytest.raises(UnsupportedModeError):
        contact_probabilities(topo, assign, "enumerate")


@pytest.mark.filterwarnings("ignore:connectivity radius")
def test_continuous_mobility_requires_mc():
    topo, pts = build_rgg(30, seed=1)
    assign = assignment_from_name("horizontal", topo, positions=pts)
    with pytest.raises(UnsupportedModeError):
        contact_probabilities(topo, assign, "exact")
    c = contact_probabilities(topo, assign, "mc", samples=400, seed=1)
    assert c.probs.sum() <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# expected matrix
# ---------------------------------------------------------------------------


def test_expected_matrix_two_agent():
    tm = expected_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
    np.testing.assert_allclose(tm.matrix, [[0.5, 0.5], [0.5, 0.5]])
    assert second_eigenvalue(tm) == pytest.approx(0.0, abs=1e-12)
    assert relaxation_time(tm) == pytest.approx(1.0)


def test_expected_matrix_zero_contacts_is_identity():
    tm = expected_matrix(np.zeros((4, 4)))
    np.testing.assert_array_equal(tm.matrix, np.eye(4))
    assert relaxation_time(tm) == np.inf


def test_expected_matrix_static_four_cycle():
    topo = build_cycle(4)
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
    first_row = np.array([0.75, 0.125, 0.0, 0.125])
    np.testing.assert_allclose(tm.matrix[0], first_row, atol=1e-15)
    # circulant oracle agrees with the dense eigensolve
    lam_dft = np.sort(circulant_eigenvalues(first_row))[::-1]
    lam_dense = eigenvalues(tm)
    np.testing.assert_allclose(lam_dft, lam_dense, atol=1e-12)
    assert second_eigenvalue(tm) == pytest.approx(0.75)
    assert relaxation_time(tm) == pytest.approx(4.0)


def test_expected_matrix_rejects_corrupt_contacts():
    P = np.full((3, 3), 0.6)
    np.fill_diagonal(P, 0.0)
    with pytest.raises(ValueError, match="negative diagonal"):
        expected_matrix(P)


def test_gossip_matrices_are_doubly_stochastic_symmetric_psd():
    cases = [
        (build_torus(4), "static"),
        (build_torus(4), "full"),
        (build_torus(4), "horizontal"),
        (build_torus(4), "local:1"),
        (build_cycle(9), "static"),
    ]
    for topo, name in cases:
        tm = expected_matrix(contact_probabilities(topo, assignment_from_name(name, topo)))
        W = tm.matrix
        np.testing.assert_allclose(W, W.T, atol=1e-14)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(W >= -1e-15)
        assert is_psd(tm)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


def test_power_iteration_matches_dense():
    """Deflated power iteration agrees with the dense solve to 1e-10.

    Uses chains whose spectral gaps are either exact degeneracies or decently
    separated; convergence slows without bound as lambda3 -> lambda2.
    """
    cases = []
    topo = build_cycle(40)
    cases.append(expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo))))
    from mobgossip.bounds import hub_chain

    cases.append(hub_chain(12))
    rng = np.random.default_rng(2)
    cases.append(_random_reversible(rng, 6))
    for tm in cases:
        dense = second_eigenvalue(tm, method="dense")
        power, _ = power_iteration_second(tm)
        assert power == pytest.approx(dense, abs=1e-8)
        tight, _ = power_iteration_second(tm, tol=1e-14)
        assert tight == pytest.approx(dense, abs=1e-10)


def test_disconnected_chain_signalled():
    W = np.eye(4)
    tm = TransitionMatrix(W, np.full(4, 0.25))
    assert relaxation_time(tm) == np.inf


# ---------------------------------------------------------------------------
# Dirichlet form and Rayleigh bounds
# ---------------------------------------------------------------------------


def _two_state(p):
    W = np.array([[1 - p, p], [p, 1 - p]])
    return TransitionMatrix(W, np.array([0.5, 0.5]))


def test_dirichlet_form_basics():
    tm = _two_state(0.3)
    assert dirichlet_form(tm, np.array([5.0, 5.0])) == 0.0
    assert dirichlet_form(tm, np.array([1.0, -1.0])) == pytest.approx(2 * 0.3)
    g = np.array([0.2, -1.4])
    assert dirichlet_form(tm, g) == pytest.approx(dirichlet_form(tm, g + 7.0))


def test_rayleigh_two_state_exact():
    tm = _two_state(0.2)
    bound = rayleigh_lower_bound(tm, np.array([1.0, -1.0]))
    assert bound == pytest.approx(1.0 / (2 * 0.2))
    assert bound == pytest.approx(relaxation_time(tm))


def test_rayleigh_eigenvector_attains_relaxation_time():
    topo = build_cycle(7)
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
    g = second_eigenvector(tm)
    assert rayleigh_lower_bound(tm, g) == pytest.approx(relaxation_time(tm), abs=1e-8)


def test_rayleigh_random_functions_never_exceed():
    topo = build_cycle(4)
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
    t_relax = relaxation_time(tm)
    rng = np.random.default_rng(8)
    for _ in range(100):
        g = rng.standard_normal(4)
        assert rayleigh_lower_bound(tm, g) <= t_relax + 1e-8
    with pytest.raises(ValueError, match="constant"):
        rayleigh_lower_bound(tm, np.ones(4))


def test_matrix_exports(tmp_path):
    topo = build_cycle(5)
    tm = expected_matrix(contact_probabilities(topo, assignment_from_name("static", topo)))
    from mobgossip.chain import export_dense_csv, export_sparse_coo

    dense = tmp_path / "dense.csv"
    export_dense_csv(tm, dense)
    lines = dense.read_text().splitlines()
    assert lines[0].startswith("stationary,")
    got = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_allclose(got, tm.matrix, atol=0)

    sparse = tmp_path / "sparse.txt"
    export_sparse_coo(tm, sparse)
    entries = [line.split() for line in sparse.read_text().splitlines()[1:]]
    rebuilt = np.zeros((5, 5))
    for i, j, v in entries:
        rebuilt[int(i), int(j)] = float(v)
    np.testing.assert_allclose(rebuilt, tm.matrix, atol=0)
