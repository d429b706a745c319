"""Expected averaging matrix, spectra, and Rayleigh-quotient machinery.

The expected matrix W of one gossip tick is assembled from the contact
probabilities P[i, j] = Pr(agent i is selected and picks j).  Three exact
routes and one Monte Carlo route compute P:

* static placements: neighbor sets are fixed, P is a closed form;
* enumeration: few enough mobile agents that their joint placements can be
  iterated outright (the independent oracle for the analytic route);
* analytic: any iid placement with finite site supports, via Poisson-binomial
  convolutions of the per-agent occupation probabilities;
* Monte Carlo: everything else, with per-entry standard errors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels as kern
from .mobility import ROW_WALK, STATIC, MobilityAssignment, site_distribution
from .topology import Topology, adjacency, closed_neighborhood_sites

_ENUM_CAP = 250_000  # joint placements an enumeration may iterate


class UnsupportedModeError(ValueError):
    """The requested contact-probability mode cannot handle the instance."""


class DisconnectedChainError(ValueError):
    """lambda_2 is 1 up to tolerance: the chain does not mix."""


@dataclass(frozen=True)
class ContactMatrix:
    probs: np.ndarray
    method: str
    samples: int = 0
    stderr: np.ndarray | None = None


@dataclass(frozen=True)
class TransitionMatrix:
    """Reversible transition matrix with its stationary distribution.

    Gossip-derived matrices are symmetric and doubly stochastic (uniform
    stationary distribution); induced chains are merely reversible.
    """

    matrix: np.ndarray
    stationary: np.ndarray
    stderr: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# contact probabilities
# ---------------------------------------------------------------------------


def _check_no_row_walk(assignment: MobilityAssignment):
    if any(p.kind == ROW_WALK for p in assignment.patterns):
        raise UnsupportedModeError(
            "the row random walk is not iid across ticks; the expected one-tick "
            "matrix of the iid model does not describe it"
        )


def _contact_static(topology: Topology, assignment: MobilityAssignment) -> ContactMatrix:
    from .mobility import start_positions

    pos = start_positions(topology, assignment)
    adj = adjacency(topology, pos)
    n = len(assignment)
    degrees = adj.sum(axis=1)
    P = np.zeros((n, n))
    nz = degrees > 0
    P[nz] = adj[nz] / (n * degrees[nz, None])
    return ContactMatrix(P, "exact-static")


def _contact_enumerated(topology: Topology, assignment: MobilityAssignment) -> ContactMatrix:
    """Iterate the joint placements of the mobile agents (discrete, iid, uniform)."""
    _check_no_row_walk(assignment)
    if not topology.discrete:
        raise UnsupportedModeError("cannot enumerate placements on the unit torus")
    from .mobility import support_sites

    n = len(assignment)
    mobile = [a for a, p in enumerate(assignment.patterns) if p.kind != STATIC]
    supports = [support_sites(assignment.patterns[a], topology) for a in mobile]
    total = 1
    for s in supports:
        total *= len(s)
        if total > _ENUM_CAP:
            raise UnsupportedModeError(
                f"joint placement space exceeds {_ENUM_CAP} configurations"
            )
    base = np.zeros((n, 2), dtype=np.int64)
    for a, p in enumerate(assignment.patterns):
        if p.kind == STATIC:
            base[a] = p.home
    weight = 1.0 / total
    P = np.zeros((n, n))
    for combo in itertools.product(*supports) if mobile else [()]:
        pos = base.copy()
        for a, site in zip(mobile, combo):
            pos[a] = topology.site_location(site)
        adj = adjacency(topology, pos)
        deg = adj.sum(axis=1)
        nz = deg > 0
        P[nz] += weight * adj[nz] / (n * deg[nz, None])
    return ContactMatrix(P, "exact-enumerated")


def _binom_pmf(count: int, p: float) -> np.ndarray:
    if count == 0:
        return np.ones(1)
    return stats.binom.pmf(np.arange(count + 1), count, p)


def _class_expectations(values: tuple, counts: tuple, cache: dict) -> np.ndarray:
    """E[1/(1 + S_c)] for each class c, where S_c drops one member of class c.

    S is a sum of independent Bernoulli variables grouped by success
    probability; its pmf is the convolution of per-class binomials.
    """
    key = (values, counts)
    hit = cache.get(key)
    if hit is not None:
        return hit
    pmfs = [_binom_pmf(c, v) for v, c in zip(values, counts)]
    out = np.empty(len(values))
    for c in range(len(values)):
        pmf = np.ones(1)
        for c2 in range(len(values)):
            cnt = counts[c2] - (1 if c2 == c else 0)
            if cnt == counts[c2]:
                part = pmfs[c2]
            else:
                part = _binom_pmf(cnt, values[c2])
            pmf = np.convolve(pmf, part)
        out[c] = np.sum(pmf / (1.0 + np.arange(pmf.shape[0])))
    cache[key] = out
    return out


def _contact_analytic(topology: Topology, assignment: MobilityAssignment) -> ContactMatrix:
    """Exact P for independent placements with finite site supports.

    P[i, j] = (1/n) sum_p mu_i(p) q_j(p) E[1/(1 + S_ij(p))], where q_k(p) is
    the chance agent k lands in the closed neighborhood of p and S_ij(p)
    counts the other agents that do.
    """
    _check_no_row_walk(assignment)
    if not topology.discrete:
        raise UnsupportedModeError("analytic contact needs discrete site supports")
    n = len(assignment)
    dists = np.stack([site_distribution(p, topology) for p in assignment.patterns])
    P = np.zeros((n, n))
    cache: dict = {}
    n_sites = topology.n_sites
    nbhd = [closed_neighborhood_sites(topology, *topology.site_location(s))
            for s in range(n_sites)]
    for i in range(n):
        supp = np.nonzero(dists[i])[0]
        for site in supp:
            mu_ip = dists[i, site]
            q = dists[:, nbhd[site]].sum(axis=1)
            q[i] = 0.0
            others = np.nonzero(q > 0.0)[0]
            if others.size == 0:
                continue
            qo = q[others]
            values, inverse = np.unique(qo, return_inverse=True)
            counts = np.bincount(inverse, minlength=values.size)
            e_per_class = _class_expectations(tuple(values), tuple(counts), cache)
            P[i, others] += (mu_ip / n) * qo * e_per_class[inverse]
    return ContactMatrix(P, "exact-analytic")


def _contact_mc(
    topology: Topology, assignment: MobilityAssignment, samples: int, seed: int
) -> ContactMatrix:
    from .mobility import KernelRNG, start_positions

    n = len(assignment)
    rng = KernelRNG(seed, stream=0)
    pos = start_positions(topology, assignment, rng)
    kinds, home_r, home_c, param = assignment.kernel_arrays(topology)
    p_sum = np.zeros((n, n))
    p_sq = np.zeros((n, n))
    pos0 = pos[:, 0].copy()
    pos1 = pos[:, 1].copy()
    with kern.errstate_if_interpreted():
        if topology.discrete:
            side_r, side_c = topology.shape
            kern.contact_mc_discrete(
                pos0, pos1, kinds, home_r, home_c, param, side_r, side_c,
                samples, p_sum, p_sq, rng.state,
            )
        else:
            kern.contact_mc_continuous(
                pos0, pos1, kinds, topology.radius ** 2, samples, p_sum, p_sq, rng.state,
            )
    P = p_sum / samples
    var = np.maximum(p_sq / samples - P ** 2, 0.0)
    stderr = np.sqrt(var / samples)
    return ContactMatrix(P, "monte-carlo", samples=samples, stderr=stderr)


def contact_probabilities(
    topology: Topology,
    assignment: MobilityAssignment,
    mode: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
) -> ContactMatrix:
    """Contact probabilities P[i, j] = Pr(i selected and picks j) in one tick.

    mode "exact" picks the cheapest exact route (static closed form, else the
    analytic independent-placement formula); "enumerate" forces the brute
    placement iteration; "mc" estimates with `samples` draws and reports
    standard errors.
    """
    if mode == "mc":
        return _contact_mc(topology, assignment, samples, seed)
    if mode == "enumerate":
        return _contact_enumerated(topology, assignment)
    if mode != "exact":
        raise ValueError(f"unknown contact mode {mode!r}")
    if all(p.kind == STATIC for p in assignment.patterns):
        return _contact_static(topology, assignment)
    return _contact_analytic(topology, assignment)


# ---------------------------------------------------------------------------
# expected matrix and spectra
# ---------------------------------------------------------------------------


def expected_matrix(contact: ContactMatrix | np.ndarray) -> TransitionMatrix:
    """W[i, j] = (P[i, j] + P[j, i]) / 2 off-diagonal, diagonal filled to 1.

    The result is symmetric and doubly stochastic, so the stationary
    distribution is uniform.
    """
    P = contact.probs if isinstance(contact, ContactMatrix) else np.asarray(contact)
    n = P.shape[0]
    W = 0.5 * (P + P.T)
    np.fill_diagonal(W, 0.0)
    diag = 1.0 - W.sum(axis=1)
    if np.any(diag < -1e-12):
        raise ValueError("contact probabilities are corrupt: negative diagonal mass")
    W[np.diag_indices(n)] = diag
    stderr = None
    if isinstance(contact, ContactMatrix) and contact.stderr is not None:
        stderr = 0.5 * np.sqrt(contact.stderr ** 2 + contact.stderr.T ** 2)
        np.fill_diagonal(stderr, 0.0)
    return TransitionMatrix(W, np.full(n, 1.0 / n), stderr)


def _symmetrized(tm: TransitionMatrix) -> np.ndarray:
    """D^(1/2) W D^(-1/2) for D = diag(pi); symmetric for reversible chains."""
    root = np.sqrt(tm.stationary)
    S = (root[:, None] * tm.matrix) / root[None, :]
    return 0.5 * (S + S.T)


def eigenvalues(tm: TransitionMatrix) -> np.ndarray:
    """Full spectrum, descending (real; the chain must be reversible)."""
    return np.linalg.eigvalsh(_symmetrized(tm))[::-1]


def second_eigenvalue(tm: TransitionMatrix, method: str = "auto") -> float:
    """Second-largest eigenvalue; dense solve for n <= 2000, else deflated power iteration."""
    if tm.n < 2:
        raise ValueError("a single-state chain has no second eigenvalue")
    if method == "power" or (method == "auto" and tm.n > 2000):
        lam, _ = power_iteration_second(tm)
        return lam
    return float(eigenvalues(tm)[1])


def power_iteration_second(
    tm: TransitionMatrix,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    seed: int = 7,
) -> tuple[float, np.ndarray]:
    """Power iteration on the symmetrized operator with the top mode deflated.

    For a doubly stochastic chain the deflation subtracts the uniform
    component, i.e. iterates W - (1/n) 11^T.  Stops when the eigenvalue
    estimate changes by less than `tol` relatively.
    """
    S = _symmetrized(tm)
    top = np.sqrt(tm.stationary)
    top = top / np.linalg.norm(top)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(tm.n)
    y -= top * (top @ y)
    y /= np.linalg.norm(y)
    lam_prev = np.inf
    for _ in range(max_iter):
        z = S @ y
        z -= top * (top @ z)
        norm = np.linalg.norm(z)
        if norm == 0.0:
            return 0.0, y
        y = z / norm
        lam = float(y @ (S @ y))
        if abs(lam - lam_prev) <= tol * max(abs(lam), 1e-300):
            return lam, y
        lam_prev = lam
    return lam_prev, y


def second_eigenvector(tm: TransitionMatrix) -> np.ndarray:
    """Eigenvector of lambda_2 in the original (unsymmetrized) coordinates."""
    S = _symmetrized(tm)
    vals, vecs = np.linalg.eigh(S)
    v = vecs[:, -2]
    return v / np.sqrt(tm.stationary)


def relaxation_time(tm: TransitionMatrix, method: str = "auto") -> float:
    """1 / (1 - lambda_2); infinite when the chain is disconnected.

    A single-state chain is already mixed, so its relaxation time is zero.
    """
    if tm.n == 1:
        return 0.0
    lam2 = second_eigenvalue(tm, method)
    if lam2 >= 1.0 - 1e-12:
        return float("inf")
    return 1.0 / (1.0 - lam2)


def is_psd(tm: TransitionMatrix, tol: float = 1e-10) -> bool:
    """All eigenvalues in [0, 1]; true for any mean of averaging projections."""
    vals = eigenvalues(tm)
    return bool(vals[-1] >= -tol and vals[0] <= 1.0 + tol)


# ---------------------------------------------------------------------------
# Dirichlet form and Rayleigh bounds
# ---------------------------------------------------------------------------


def dirichlet_form(tm: TransitionMatrix, g: np.ndarray) -> float:
    """(1/2) sum_kl pi_k W_kl (g_k - g_l)^2; nonnegative, shift-invariant."""
    g = np.asarray(g, dtype=float)
    diff = g[:, None] - g[None, :]
    return float(0.5 * np.sum(tm.stationary[:, None] * tm.matrix * diff * diff))


def rayleigh_lower_bound(tm: TransitionMatrix, g: np.ndarray) -> float:
    """sum pi g^2 / D(g, g) after centering g to zero pi-mean.

    Always a lower bound on the relaxation time; the lambda_2 eigenvector
    attains it.  Returns inf when g has no Dirichlet energy (a disconnected
    direction).
    """
    g = np.asarray(g, dtype=float)
    g = g - float(tm.stationary @ g)
    num = float(tm.stationary @ (g * g))
    if num == 0.0:
        raise ValueError("test function is constant; the quotient is undefined")
    den = dirichlet_form(tm, g)
    if den <= 0.0:
        return float("inf")
    return num / den


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def export_dense_csv(tm: TransitionMatrix, path) -> None:
    """Write the matrix as plain CSV; the first line carries the stationary law."""
    with open(path, "w") as fh:
        fh.write("stationary," + ",".join(f"{p:.17g}" for p in tm.stationary) + "\n")
        for row in tm.matrix:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def export_sparse_coo(tm: TransitionMatrix, path, tol: float = 0.0) -> None:
    """Write nonzero entries as 'row col value' text lines (coordinate list)."""
    with open(path, "w") as fh:
        fh.write(f"# {tm.n} states, entries below: row col value\n")
        for i in range(tm.n):
            for j in range(tm.n):
                v = tm.matrix[i, j]
                if abs(v) > tol:
                    fh.write(f"{i} {j} {v:.17g}\n")
