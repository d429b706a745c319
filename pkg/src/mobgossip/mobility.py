"""Agent mobility patterns: per-tick iid position resampling plus a row random walk.

A pattern owns a per-tick position distribution (uniform on its support for
the iid variants) and the support itself, which the bound machinery needs to
decide which agents a partition may merge.  Sampling mirrors the kernel code
draw for draw, so a trace assembled from repeated `sample_positions` calls is
bit-identical to the fused kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .topology import Topology

STATIC = kern.K_STATIC
FULL = kern.K_FULL
HORIZONTAL = kern.K_HORIZONTAL
VERTICAL = kern.K_VERTICAL
LOCAL = kern.K_LOCAL
ROW_WALK = kern.K_ROW_WALK

_KIND_NAMES = {
    STATIC: "static",
    FULL: "full",
    HORIZONTAL: "horizontal",
    VERTICAL: "vertical",
    LOCAL: "local",
    ROW_WALK: "rw",
}


@dataclass(frozen=True)
class MobilityPattern:
    kind: int
    home: tuple[float, float] | None = None  # (row, col) or (u, v); None for roaming extras
    m: int = 0  # half-width of the local window
    steps: int = 1  # walk steps per tick (row random walk only)

    @property
    def iid(self) -> bool:
        return self.kind != ROW_WALK

    def name(self) -> str:
        if self.kind == LOCAL:
            return f"local:{self.m}"
        if self.kind == ROW_WALK:
            return f"rw:{self.steps}"
        return _KIND_NAMES[self.kind]


@dataclass
class MobilityAssignment:
    """One pattern per agent; extras appended by plus_mobile have home=None."""

    patterns: list[MobilityPattern]
    appended_mobile: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def iid(self) -> bool:
        return all(p.iid for p in self.patterns)

    def kernel_arrays(self, topology: Topology):
        """(kinds, home_r, home_c, param) arrays shared with the hot kernels."""
        key = ("arrays", topology.descriptor())
        if key not in self._cache:
            n = len(self.patterns)
            kinds = np.empty(n, np.int8)
            param = np.zeros(n, np.int64)
            if topology.discrete:
                home_r = np.zeros(n, np.int64)
                home_c = np.zeros(n, np.int64)
            else:
                home_r = np.zeros(n, np.float64)
                home_c = np.zeros(n, np.float64)
            for a, p in enumerate(self.patterns):
                kinds[a] = p.kind
                if p.kind == LOCAL:
                    param[a] = p.m
                elif p.kind == ROW_WALK:
                    param[a] = p.steps
                if p.home is not None:
                    home_r[a] = p.home[0]
                    home_c[a] = p.home[1]
            self._cache[key] = (kinds, home_r, home_c, param)
        return self._cache[key]

    def names(self) -> list[str]:
        return [p.name() for p in self.patterns]


class KernelRNG:
    """Thin handle over the kernel uint64 stream for step-by-step simulation.

    The state must stay an np.uint64 scalar: handing a plain Python int to a
    jitted kernel would be typed as int64 and change the arithmetic.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.state = kern.stream_state(seed, stream)

    def u01(self) -> float:
        with kern.errstate_if_interpreted():
            state, u = kern.python_impl(kern._u01)(self.state)
        self.state = np.uint64(state)
        return u

    def randint(self, n: int) -> int:
        with kern.errstate_if_interpreted():
            state, k = kern.python_impl(kern._randint)(self.state, n)
        self.state = np.uint64(state)
        return int(k)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _default_homes(topology: Topology) -> np.ndarray:
    """One agent per site for discrete spaces (the all-sites-occupied start)."""
    return topology.all_sites()


def uniform_assignment(topology: Topology, kind: int, positions=None, **kw) -> MobilityAssignment:
    """Every agent gets the same pattern kind, homed at its initial position."""
    if positions is None:
        if not topology.discrete:
            raise ValueError("continuous topologies need explicit initial positions")
        positions = _default_homes(topology)
    pats = [MobilityPattern(kind, home=(float(r), float(c)), **kw) for r, c in positions]
    return MobilityAssignment(pats)


def static_assignment(topology: Topology, positions=None) -> MobilityAssignment:
    return uniform_assignment(topology, STATIC, positions)


def full_assignment(topology: Topology, positions=None) -> MobilityAssignment:
    return uniform_assignment(topology, FULL, positions)


def horizontal_assignment(topology: Topology, positions=None) -> MobilityAssignment:
    return uniform_assignment(topology, HORIZONTAL, positions)


def vertical_assignment(topology: Topology, positions=None) -> MobilityAssignment:
    return uniform_assignment(topology, VERTICAL, positions)


def local_assignment(topology: Topology, m: int, positions=None) -> MobilityAssignment:
    if m < 1:
        raise ValueError(f"local window half-width must be >= 1, got {m}")
    return uniform_assignment(topology, LOCAL, positions, m=m)


def row_walk_assignment(topology: Topology, steps: int, positions=None) -> MobilityAssignment:
    if steps < 1:
        raise ValueError(f"walk steps per tick must be >= 1, got {steps}")
    return uniform_assignment(topology, ROW_WALK, positions, steps=steps)


def assign_bidirectional(topology: Topology, seed: int, positions=None) -> MobilityAssignment:
    """Each agent flips a fair coin once: horizontal or vertical forever."""
    if positions is None:
        if not topology.discrete:
            raise ValueError("continuous topologies need explicit initial positions")
        positions = _default_homes(topology)
    rng = KernelRNG(seed, stream=0)
    pats = []
    for r, c in positions:
        kind = HORIZONTAL if rng.u01() < 0.5 else VERTICAL
        pats.append(MobilityPattern(kind, home=(float(r), float(c))))
    return MobilityAssignment(pats)


def plus_mobile(base: MobilityAssignment, m: int) -> MobilityAssignment:
    """Append m fully mobile agents (no home site) to an existing population."""
    if m < 0:
        raise ValueError("cannot append a negative number of agents")
    pats = list(base.patterns) + [MobilityPattern(FULL, home=None) for _ in range(m)]
    return MobilityAssignment(pats, appended_mobile=base.appended_mobile + m)


def assignment_from_name(
    name: str, topology: Topology, seed: int = 0, positions=None
) -> MobilityAssignment:
    """Parse CLI-style names: static | full | horizontal | vertical |
    bidirectional | local:<m> | rw:<steps> | plus-mobile:<m> (on a static base).
    """
    base, _, arg = name.partition(":")
    if base == "static":
        return static_assignment(topology, positions)
    if base == "full":
        return full_assignment(topology, positions)
    if base == "horizontal":
        return horizontal_assignment(topology, positions)
    if base == "vertical":
        return vertical_assignment(topology, positions)
    if base == "bidirectional":
        return assign_bidirectional(topology, seed, positions)
    if base == "local":
        return local_assignment(topology, int(arg), positions)
    if base == "rw":
        return row_walk_assignment(topology, int(arg), positions)
    if base == "plus-mobile":
        return plus_mobile(static_assignment(topology, positions), int(arg))
    raise ValueError(f"unknown mobility name {name!r}")


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def start_positions(
    topology: Topology, assignment: MobilityAssignment, rng: KernelRNG | None = None
) -> np.ndarray:
    """Initial positions: the home of each agent; homeless extras are sampled."""
    n = len(assignment)
    dtype = np.int64 if topology.discrete else np.float64
    pos = np.zeros((n, 2), dtype=dtype)
    for a, p in enumerate(assignment.patterns):
        if p.home is not None:
            pos[a, 0] = p.home[0]
            pos[a, 1] = p.home[1]
        else:
            if rng is None:
                raise ValueError("homeless agents need an rng to draw a start position")
            if topology.discrete:
                side_r, side_c = topology.shape
                pos[a, 0] = rng.randint(side_r)
                pos[a, 1] = rng.randint(side_c)
            else:
                pos[a, 0] = rng.u01()
                pos[a, 1] = rng.u01()
    return pos


def sample_positions(
    assignment: MobilityAssignment,
    previous: np.ndarray,
    rng: KernelRNG,
    topology: Topology,
) -> np.ndarray:
    """Draw every agent's next position (one tick of mobility).

    The iid variants ignore `previous`; the row walk advances from it.  Draw
    order matches the fused kernels exactly, so mixed use stays reproducible.
    """
    pos = np.array(previous, copy=True)
    if topology.discrete:
        side_r, side_c = topology.shape
        for a, p in enumerate(assignment.patterns):
            if p.kind == STATIC:
                continue
            elif p.kind == FULL:
                pos[a, 0] = rng.randint(side_r)
                pos[a, 1] = rng.randint(side_c)
            elif p.kind == HORIZONTAL:
                pos[a, 1] = rng.randint(side_c)
            elif p.kind == VERTICAL:
                pos[a, 0] = rng.randint(side_r)
            elif p.kind == LOCAL:
                # the window stays centered on the home site, not the last position
                w = 2 * p.m + 1
                dr = rng.randint(w)
                dc = rng.randint(w)
                pos[a, 0] = (int(p.home[0]) - p.m + dr) % side_r
                pos[a, 1] = (int(p.home[1]) - p.m + dc) % side_c
            else:  # ROW_WALK
                c = int(pos[a, 1])
                for _ in range(p.steps):
                    u = rng.u01()
                    if u < 0.5:
                        continue
                    elif u < 0.75:
                        c = (c - 1) % side_c
                    else:
                        c = (c + 1) % side_c
                pos[a, 1] = c
    else:
        for a, p in enumerate(assignment.patterns):
            if p.kind == STATIC:
                continue
            elif p.kind == FULL:
                pos[a, 0] = rng.u01()
                pos[a, 1] = rng.u01()
            elif p.kind == HORIZONTAL:
                pos[a, 1] = rng.u01()
            elif p.kind == VERTICAL:
                pos[a, 0] = rng.u01()
            else:
                raise ValueError(f"{p.name()} mobility is undefined on the unit torus")
    return pos


# ---------------------------------------------------------------------------
# supports
# ---------------------------------------------------------------------------


def support_sites(pattern: MobilityPattern, topology: Topology) -> np.ndarray:
    """Site ids the pattern can ever occupy (discrete topologies only)."""
    if not topology.discrete:
        raise ValueError("site supports exist only on discrete topologies")
    side_r, side_c = topology.shape
    if pattern.kind == FULL or pattern.home is None:
        return np.arange(side_r * side_c, dtype=np.int64)
    r0, c0 = int(pattern.home[0]), int(pattern.home[1])
    if pattern.kind == STATIC:
        return np.array([topology.site_id(r0, c0)], dtype=np.int64)
    if pattern.kind in (HORIZONTAL, ROW_WALK):
        return np.array([topology.site_id(r0, c) for c in range(side_c)], dtype=np.int64)
    if pattern.kind == VERTICAL:
        return np.array([topology.site_id(r, c0) for r in range(side_r)], dtype=np.int64)
    # LOCAL: the (2m+1)^2 window around home, wrapped and deduplicated
    m = pattern.m
    sites = {
        topology.site_id((r0 + dr) % side_r, (c0 + dc) % side_c)
        for dr in range(-m, m + 1)
        for dc in range(-m, m + 1)
    }
    return np.array(sorted(sites), dtype=np.int64)


def site_distribution(pattern: MobilityPattern, topology: Topology) -> np.ndarray:
    """Per-tick site occupation probabilities (uniform over the support)."""
    if not pattern.iid:
        raise ValueError("the row walk has no single-tick site distribution")
    sites = support_sites(pattern, topology)
    dist = np.zeros(topology.n_sites)
    dist[sites] = 1.0 / len(sites)
    return dist


def support_predicate(pattern: MobilityPattern, topology: Topology):
    """Membership test for the pattern's support, usable on both space kinds."""
    if topology.discrete:
        sites = set(support_sites(pattern, topology).tolist())
        return lambda loc: topology.site_id(int(loc[0]), int(loc[1])) in sites
    if pattern.kind == FULL or pattern.home is None:
        return lambda loc: True
    y0, x0 = pattern.home
    if pattern.kind == STATIC:
        return lambda loc: loc[0] == y0 and loc[1] == x0
    if pattern.kind == HORIZONTAL:
        # a horizontal mover keeps its vertical coordinate forever
        return lambda loc: loc[0] == y0
    if pattern.kind == VERTICAL:
        return lambda loc: loc[1] == x0
    raise ValueError(f"{pattern.name()} mobility is undefined on the unit torus")
