"""Convergence-time certificates: merged-chain lower bounds and flow upper bounds.

Lower bounds merge agents whose mobility lives inside one partition class;
the induced chain's relaxation time never exceeds the original's.  Upper
bounds route the demands pi_i pi_j over explicit simple paths and apply the
congestion inequality T_relax <= rho(F) * l(F).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    TransitionMatrix,
    contact_probabilities,
    dirichlet_form,
    expected_matrix,
    rayleigh_lower_bound,
    relaxation_time,
)
from .mobility import (
    MobilityAssignment,
    plus_mobile,
    static_assignment,
    support_sites,
)
from .topology import Topology, build_cycle, build_torus


class InvalidFlowError(ValueError):
    """The flow violates a demand or uses a zero-capacity edge."""


class CertificationError(RuntimeError):
    """A bound that must hold mathematically failed numerically: a bug signal."""


# ---------------------------------------------------------------------------
# merged (induced) chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeMap:
    """Total map from states to group labels 0..n_groups-1."""

    labels: np.ndarray
    n_groups: int

    @staticmethod
    def from_labels(raw) -> "MergeMap":
        raw = np.asarray(raw)
        _, labels = np.unique(raw, return_inverse=True)
        return MergeMap(labels.astype(np.int64), int(labels.max()) + 1)

    @staticmethod
    def identity(n: int) -> "MergeMap":
        return MergeMap(np.arange(n, dtype=np.int64), n)

    @staticmethod
    def merge_groups(n: int, groups: list[list[int]]) -> "MergeMap":
        """Merge each listed group of states; everything else stays singleton."""
        raw = np.arange(n, dtype=np.int64)
        for g, members in enumerate(groups):
            raw[np.asarray(members, dtype=np.int64)] = n + g
        return MergeMap.from_labels(raw)


def induce_chain(tm: TransitionMatrix, merge: MergeMap) -> TransitionMatrix:
    """Aggregate states by the merge map, weighting rows by the stationary mass.

    The result is the induced chain: rows sum to one and the pushforward of
    pi is stationary for it.
    """
    labels = merge.labels
    if labels.shape[0] != tm.n:
        raise ValueError("merge map size does not match the chain")
    counts = np.bincount(labels, minlength=merge.n_groups)
    if np.any(counts == 0):
        raise ValueError("merge map has an empty group")
    onehot = np.zeros((tm.n, merge.n_groups))
    onehot[np.arange(tm.n), labels] = 1.0
    pi_hat = onehot.T @ tm.stationary
    flux = onehot.T @ (tm.stationary[:, None] * tm.matrix) @ onehot
    W_hat = flux / pi_hat[:, None]
    return TransitionMatrix(W_hat, pi_hat)


@dataclass(frozen=True)
class SitePartition:
    """Disjoint classes of discrete sites, as a label per site id."""

    site_labels: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.site_labels.max()) + 1


def row_partition(topology: Topology) -> SitePartition:
    """One class per lattice row (the merge that certifies horizontal mobility)."""
    side_r, side_c = topology.shape
    return SitePartition(np.repeat(np.arange(side_r), side_c))


def column_partition(topology: Topology) -> SitePartition:
    side_r, side_c = topology.shape
    return SitePartition(np.tile(np.arange(side_c), side_r))


def singleton_partition(topology: Topology) -> SitePartition:
    return SitePartition(np.arange(topology.n_sites))


def mobility_merge_map(
    assignment: MobilityAssignment, partition: SitePartition, topology: Topology
) -> MergeMap:
    """Merge the agents whose whole mobility support sits in one partition class."""
    n = len(assignment)
    raw = np.arange(n, dtype=np.int64)
    for a, pattern in enumerate(assignment.patterns):
        sites = support_sites(pattern, topology)
        classes = np.unique(partition.site_labels[sites])
        if classes.size == 1:
            raw[a] = n + int(classes[0])
    return MergeMap.from_labels(raw)


def lower_bound_via_merge(
    topology: Topology,
    assignment: MobilityAssignment,
    partition: SitePartition,
    mode: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
) -> dict:
    """Relaxation time of the partition-merged chain: a convergence lower bound."""
    contact = contact_probabilities(topology, assignment, mode, samples, seed)
    tm = expected_matrix(contact)
    merge = mobility_merge_map(assignment, partition, topology)
    induced = induce_chain(tm, merge)
    return {
        "t_relax": relaxation_time(induced),
        "induced": induced,
        "original": tm,
        "merge": merge,
        "method": contact.method,
    }


# ---------------------------------------------------------------------------
# circulant spectra
# ---------------------------------------------------------------------------


def circulant_eigenvalues(generator: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric circulant generated by the given first row.

    lambda_j = sum_m c_m cos(2 pi j m / k): the discrete Fourier transform,
    real because the generator is symmetric (c_m = c_{k-m}).
    """
    c = np.asarray(generator, dtype=float)
    k = c.shape[0]
    if k < 2:
        raise ValueError("generator needs at least 2 entries")
    j = np.arange(k)
    angles = 2.0 * np.pi * np.outer(j, j) / k
    return np.cos(angles) @ c


def circulant_matrix(generator: np.ndarray) -> np.ndarray:
    c = np.asarray(generator, dtype=float)
    k = c.shape[0]
    idx = (np.arange(k)[None, :] - np.arange(k)[:, None]) % k
    return c[idx]


def cycle_generator(k: int, alpha: float) -> np.ndarray:
    """First row (1-2a, a, 0, ..., 0, a) of the nearest-neighbor cycle chain."""
    c = np.zeros(k)
    c[0] = 1.0 - 2.0 * alpha
    c[1] = alpha
    c[-1] += alpha
    return c


# ---------------------------------------------------------------------------
# flows and the congestion bound
# ---------------------------------------------------------------------------


@dataclass
class Flow:
    """Demand-routing over explicit simple paths on the chain's transition graph."""

    n_states: int
    paths: list[tuple[int, ...]]
    values: np.ndarray
    name: str = "flow"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.paths) != self.values.shape[0]:
            raise ValueError("one value per path required")


@dataclass(frozen=True)
class FlowReport:
    rho: float
    length: int
    bound: float
    max_edge: tuple[int, int]
    demand_error: float
    t_relax: float | None = None
    pessimistic_bound: float | None = None
    flagged_edges: int = 0


def verify_flow(
    flow: Flow,
    tm: TransitionMatrix,
    check_relaxation: bool = True,
    demand_tol: float = 1e-12,
) -> FlowReport:
    """Check demands, compute rho(F) and l(F), and certify rho*l >= T_relax.

    Demands are pi_i pi_j for every ordered pair.  Capacities are
    C(e) = pi_i W_ij on directed edges.  With a Monte Carlo matrix the report
    adds a pessimistic bound using capacities shrunk by four standard errors.
    """
    n = tm.n
    if flow.n_states != n:
        raise InvalidFlowError("flow was built for a different number of states")
    routed = np.zeros((n, n))
    loads: dict[tuple[int, int], float] = {}
    length = 0
    for path, value in zip(flow.paths, flow.values):
        if value < 0:
            raise InvalidFlowError("negative flow value")
        if value == 0.0:
            continue
        if len(set(path)) != len(path):
            raise InvalidFlowError(f"path {path} is not simple")
        routed[path[0], path[-1]] += value
        length = max(length, len(path) - 1)
        for a, b in zip(path[:-1], path[1:]):
            loads[(a, b)] = loads.get((a, b), 0.0) + value
    demand = np.outer(tm.stationary, tm.stationary)
    np.fill_diagonal(demand, 0.0)
    gap = np.abs(routed - demand)
    worst = np.unravel_index(np.argmax(gap), gap.shape)
    if gap[worst] > demand_tol:
        raise InvalidFlowError(
            f"demand violated for pair {tuple(int(w) for w in worst)}: "
            f"routed {routed[worst]:.3e}, demanded {demand[worst]:.3e}"
        )
    rho = 0.0
    rho_pess = 0.0
    flagged = 0
    max_edge = (-1, -1)
    for (a, b), load in loads.items():
        cap = tm.stationary[a] * tm.matrix[a, b]
        if cap <= 0.0:
            raise InvalidFlowError(f"flow uses the zero-capacity edge ({a}, {b})")
        ratio = load / cap
        if ratio > rho:
            rho = ratio
            max_edge = (a, b)
        if tm.stderr is not None:
            cap_low = tm.stationary[a] * (tm.matrix[a, b] - 4.0 * tm.stderr[a, b])
            if cap_low <= 0.0:
                flagged += 1
            else:
                rho_pess = max(rho_pess, load / cap_low)
    bound = rho * length
    t_relax = None
    if check_relaxation and n <= 2000:
        t_relax = relaxation_time(tm)
        if np.isfinite(t_relax) and bound < t_relax - 1e-8:
            raise CertificationError(
                f"congestion bound {bound:.6g} fell below the relaxation time "
                f"{t_relax:.6g}; the flow or the chain is wrong"
            )
    return FlowReport(
        rho=rho,
        length=length,
        bound=bound,
        max_edge=max_edge,
        demand_error=float(gap[worst]),
        t_relax=t_relax,
        pessimistic_bound=(rho_pess * length if tm.stderr is not None and not flagged else None),
        flagged_edges=flagged,
    )


def edge_loads(flow: Flow) -> dict[tuple[int, int], float]:
    loads: dict[tuple[int, int], float] = {}
    for path, value in zip(flow.paths, flow.values):
        if value == 0.0:
            continue
        for a, b in zip(path[:-1], path[1:]):
            loads[(a, b)] = loads.get((a, b), 0.0) + value
    return loads


def export_edge_loads(flow: Flow, tm: TransitionMatrix, path) -> None:
    """Write per-edge load, capacity, and their ratio as CSV for inspection."""
    loads = edge_loads(flow)
    with open(path, "w") as fh:
        fh.write("from,to,load,capacity,load_over_capacity\n")
        for (a, b) in sorted(loads):
            load = loads[(a, b)]
            cap = tm.stationary[a] * tm.matrix[a, b]
            ratio = load / cap if cap > 0 else float("inf")
            fh.write(f"{a},{b},{load:.17g},{cap:.17g},{ratio:.17g}\n")


# ---------------------------------------------------------------------------
# flow constructors
# ---------------------------------------------------------------------------


def direct_flow(stationary: np.ndarray) -> Flow:
    """Route every demand on its own edge; needs all-pairs positive capacity."""
    pi = np.asarray(stationary, dtype=float)
    n = pi.shape[0]
    paths = []
    values = []
    for i in range(n):
        for j in range(n):
            if i != j:
                paths.append((i, j))
                values.append(pi[i] * pi[j])
    return Flow(n, paths, np.array(values), "direct")


def hub_flow(n_ring: int) -> Flow:
    """Everything through the roaming agent of a ring-plus-one-rover instance.

    States 0..n_ring-1 are the ring agents, state n_ring is the rover.  Ring
    demands ride two-hop paths (i, rover, j); demands touching the rover go
    direct.  All paths have length <= 2.
    """
    n = n_ring + 1
    hub = n_ring
    pi = 1.0 / n
    d = pi * pi
    paths = []
    values = []
    for i in range(n_ring):
        paths.append((i, hub))
        values.append(d)
        paths.append((hub, i))
        values.append(d)
        for j in range(n_ring):
            if i != j:
                paths.append((i, hub, j))
                values.append(d)
    return Flow(n, paths, np.array(values), "hub")


def relay_flow(n_static: int, m_mobile: int) -> Flow:
    """Static-to-static demands split equally across the m mobile relays.

    States 0..n_static-1 are the lattice agents, the rest are the roamers.
    Demands touching a roamer go direct.
    """
    if m_mobile < 1:
        raise ValueError("need at least one mobile relay")
    n = n_static + m_mobile
    pi = 1.0 / n
    d = pi * pi
    mobiles = range(n_static, n)
    paths = []
    values = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if i >= n_static or j >= n_static:
                paths.append((i, j))
                values.append(d)
            else:
                for k in mobiles:
                    paths.append((i, k, j))
                    values.append(d / m_mobile)
    return Flow(n, paths, np.array(values), "relay")


def _l_square_path(k: int, s0: tuple[int, int], s1: tuple[int, int]) -> list[tuple[int, int]]:
    """Squares visited moving horizontally then vertically, shortest wraparound."""

    def steps(a, b):
        fwd = (b - a) % k
        back = (a - b) % k
        if fwd <= back:
            return [(a + t) % k for t in range(1, fwd + 1)]
        return [(a - t) % k for t in range(1, back + 1)]

    path = [s0]
    r, c = s0
    for c2 in steps(c, s1[1]):
        path.append((r, c2))
        c = c2
    for r2 in steps(r, s1[0]):
        path.append((r2, c))
    return path


def l_shaped_flow(side: int, m: int) -> Flow:
    """L-shaped routing between the m x m sub-squares of a locally mobile torus.

    Agents sit one per site; the demand of a pair spreads uniformly over the
    agents of every intermediate square along the horizontal-then-vertical
    square path.  Flow only crosses between same-or-adjacent squares, where
    the (2m+1)-windows of local mobility guarantee contact probability.
    """
    if side % m != 0:
        raise ValueError(f"square side {m} does not tile torus side {side}")
    k = side // m
    n = side * side
    pi = 1.0 / n
    d = pi * pi
    square_members: dict[tuple[int, int], list[int]] = {}
    agent_square = {}
    for site in range(n):
        r, c = divmod(site, side)
        sq = (r // m, c // m)
        square_members.setdefault(sq, []).append(site)
        agent_square[site] = sq
    paths = []
    values = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            squares = _l_square_path(k, agent_square[i], agent_square[j])
            inner = squares[1:-1]
            if not inner:
                paths.append((i, j))
                values.append(d)
                continue
            stack = [(i,)]
            for sq in inner:
                stack = [p + (a,) for p in stack for a in square_members[sq]]
            share = d / len(stack)
            for p in stack:
                paths.append(p + (j,))
                values.append(share)
    return Flow(n, paths, np.array(values), "l-shaped")


def bidirectional_flow(h_agents: np.ndarray, v_agents: np.ndarray) -> Flow:
    """Same-direction demands relay once through every opposite-direction agent.

    Horizontal-horizontal pairs split their demand equally over all vertical
    movers; vertical-vertical pairs over all horizontal movers; mixed pairs go
    direct.  Every horizontal-vertical pair meets with positive probability,
    so all used edges have capacity.
    """
    h = np.asarray(h_agents, dtype=np.int64)
    v = np.asarray(v_agents, dtype=np.int64)
    if h.size == 0 or v.size == 0:
        raise ValueError("both direction classes must be nonempty")
    n = h.size + v.size
    pi = 1.0 / n
    d = pi * pi
    paths = []
    values = []
    for group, relays in ((h, v), (v, h)):
        share = d / relays.size
        for i in group:
            for j in group:
                if i == j:
                    continue
                for r in relays:
                    paths.append((int(i), int(r), int(j)))
                    values.append(share)
    for i in h:
        for j in v:
            paths.append((int(i), int(j)))
            values.append(d)
            paths.append((int(j), int(i)))
            values.append(d)
    return Flow(n, paths, np.array(values), "bidirectional")


# ---------------------------------------------------------------------------
# reference chains for the named certificates
# ---------------------------------------------------------------------------


def hub_chain(n_ring: int) -> TransitionMatrix:
    """Ring of n static agents plus a uniformly roaming one, literature rates.

    Uses the idealized contact rates P(neighbor pair) = (1/2n)(1 - 1/n) and
    P(agent, rover) = 1/n^2 under which the hub flow's congestion is exactly
    n^3/(n+1).  The algorithm-faithful chain (selection uniform over the n+1
    agents) is available through contact_probabilities on the same instance.
    """
    n = n_ring + 1
    W = np.zeros((n, n))
    p_ring = (1.0 / (2 * n_ring)) * (1.0 - 1.0 / n_ring)
    p_hub = 1.0 / (n_ring * n_ring)
    for i in range(n_ring):
        for j in ((i + 1) % n_ring, (i - 1) % n_ring):
            W[i, j] = p_ring
        W[i, n_ring] = p_hub
        W[n_ring, i] = p_hub
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return TransitionMatrix(W, np.full(n, 1.0 / n))


def hub_instance(n_ring: int) -> tuple[Topology, MobilityAssignment]:
    """The simulatable ring-plus-rover instance behind hub_chain."""
    topo = build_cycle(n_ring)
    return topo, plus_mobile(static_assignment(topo), 1)


def torus_plus_mobile_instance(side: int, m: int) -> tuple[Topology, MobilityAssignment]:
    """n static agents on the torus sites plus m uniformly roaming agents."""
    topo = build_torus(side)
    return topo, plus_mobile(static_assignment(topo), m)


def torus_plus_mobile_chain(side: int, m: int) -> TransitionMatrix:
    """Exact expected matrix of the torus-plus-roamers instance."""
    topo, assignment = torus_plus_mobile_instance(side, m)
    return expected_matrix(contact_probabilities(topo, assignment))


def merged_mobile_chain(side: int, m: int) -> TransitionMatrix:
    """Torus plus one aggregated roamer state: the roamers merged into one.

    This is the induced chain certified by the merge lemma; its last state is
    the aggregate.
    """
    tm = torus_plus_mobile_chain(side, m)
    n = side * side
    merge = MergeMap.merge_groups(tm.n, [list(range(n, n + m))])
    return induce_chain(tm, merge)


@dataclass(frozen=True)
class ColumnWaveReport:
    g: np.ndarray
    bound: float
    numerator: float
    dirichlet: float
    t_relax: float
    side: int
    m: int


def column_wave_profile(side: int) -> np.ndarray:
    """Triangular wave over torus columns: slope one per column, peak side/4."""
    cols = np.arange(side)
    return np.minimum(cols, side - cols).astype(float) - side / 4.0


def column_wave_bound(side: int, m: int) -> ColumnWaveReport:
    """Rayleigh lower bound from the column wave on the merged-roamer chain.

    The test function is constant on torus columns, zero on the aggregate
    state, and centered against the stationary distribution before the
    quotient is taken.
    """
    if side < 8:
        raise ValueError("the column profile degenerates below side 8")
    if m < 1:
        raise ValueError("need at least one roaming agent")
    tm = merged_mobile_chain(side, m)
    wave = column_wave_profile(side)
    g = np.zeros(tm.n)
    sites = np.arange(side * side)
    g[sites] = wave[sites % side]
    g -= float(tm.stationary @ g)
    bound = rayleigh_lower_bound(tm, g)
    num = float(tm.stationary @ (g * g))
    den = dirichlet_form(tm, g)
    return ColumnWaveReport(g, bound, num, den, relaxation_time(tm), side, m)
