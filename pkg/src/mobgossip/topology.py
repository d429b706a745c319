"""Spaces the agents move on: discrete torus, discrete cycle, unit torus.

Distances are wraparound in every case, and co-location always counts as
adjacency.  Agent positions are plain integer arrays of shape (n, 2) for the
discrete spaces (row, col; a cycle keeps row 0) and float arrays of shape
(n, 2) for the unit torus (u, v in [0, 1)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

TORUS = "torus"
CYCLE = "cycle"
UNIT_TORUS = "unit-torus"


@dataclass(frozen=True)
class Topology:
    kind: str
    side: int = 0  # torus side, or cycle length
    radius: float = 0.0  # unit torus connectivity radius
    seed: int = 0  # rng seed used to place RGG points

    @property
    def discrete(self) -> bool:
        return self.kind in (TORUS, CYCLE)

    @property
    def n_sites(self) -> int:
        if self.kind == TORUS:
            return self.side * self.side
        if self.kind == CYCLE:
            return self.side
        raise ValueError("unit torus has no discrete sites")

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) of the discrete lattice; a cycle is 1 x side."""
        if self.kind == TORUS:
            return self.side, self.side
        if self.kind == CYCLE:
            return 1, self.side
        raise ValueError("unit torus has no lattice shape")

    def site_id(self, row: int, col: int) -> int:
        _, side_c = self.shape
        return int(row) * side_c + int(col)

    def site_location(self, site: int) -> tuple[int, int]:
        _, side_c = self.shape
        return divmod(int(site), side_c)

    def all_sites(self) -> np.ndarray:
        """All site locations as an (n_sites, 2) array of (row, col)."""
        side_r, side_c = self.shape
        rr, cc = np.divmod(np.arange(side_r * side_c), side_c)
        return np.stack([rr, cc], axis=1)

    def descriptor(self) -> str:
        if self.kind == TORUS:
            return f"torus:{self.side}"
        if self.kind == CYCLE:
            return f"cycle:{self.side}"
        return f"unit-torus:radius={self.radius!r}:seed={self.seed}"


def build_torus(side: int) -> Topology:
    """Discrete side x side torus lattice; every site has 4 lattice neighbors."""
    if side < 2:
        raise ValueError(f"torus side must be >= 2, got {side}")
    return Topology(TORUS, side=int(side))


def build_cycle(n_sites: int) -> Topology:
    """Ring of n_sites locations, each adjacent to its two neighbors."""
    if n_sites < 3:
        raise ValueError(f"cycle needs at least 3 sites, got {n_sites}")
    return Topology(CYCLE, side=int(n_sites))


def rgg_radius(n: int, c1: float) -> float:
    """Connectivity radius sqrt(5 * c1 * log(n) / n)."""
    return float(np.sqrt(5.0 * c1 * np.log(n) / n))


def build_rgg(n: int, c1: float = 10.0, seed: int = 0) -> tuple[Topology, np.ndarray]:
    """n uniform points on the unit torus with the standard connectivity radius.

    Returns the topology and the (n, 2) initial locations.  c1 >= 10 keeps
    every sub-square of area c1*log(n)/n loaded with Theta(log n) agents with
    high probability.
    """
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    radius = rgg_radius(n, c1)
    if radius >= 0.5:
        warnings.warn(
            f"connectivity radius {radius:.3f} >= 0.5: the graph is trivially complete",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    points = rng.random((n, 2))
    return Topology(UNIT_TORUS, radius=radius, seed=seed), points


def wrap_distance(a: np.ndarray, b: np.ndarray, topology: Topology) -> np.ndarray:
    """Wraparound distance between locations (L1 on lattices, L2 on the unit torus)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if topology.discrete:
        side_r, side_c = topology.shape
        d = np.abs(a - b)
        d[..., 0] = np.minimum(d[..., 0], side_r - d[..., 0])
        d[..., 1] = np.minimum(d[..., 1], side_c - d[..., 1])
        return d.sum(axis=-1)
    d = np.abs(a - b)
    d = np.minimum(d, 1.0 - d)
    return np.sqrt((d * d).sum(axis=-1))


def adjacency(topology: Topology, positions: np.ndarray) -> np.ndarray:
    """Boolean matrix: True where two agents can communicate (self excluded)."""
    pos = np.asarray(positions)
    d = wrap_distance(pos[:, None, :], pos[None, :, :], topology)
    if topology.discrete:
        adj = d <= 1
    else:
        adj = d < topology.radius
    np.fill_diagonal(adj, False)
    return adj


def neighbors(topology: Topology, positions: np.ndarray, i: int) -> np.ndarray:
    """Agent ids k != i co-located with or adjacent to agent i, ascending."""
    pos = np.asarray(positions)
    d = wrap_distance(pos[i], pos, topology)
    if topology.discrete:
        mask = d <= 1
    else:
        mask = d < topology.radius
    mask[i] = False
    return np.nonzero(mask)[0]


def closed_neighborhood_sites(topology: Topology, row: int, col: int) -> np.ndarray:
    """Site ids within wraparound distance <= 1 of (row, col), deduplicated."""
    side_r, side_c = topology.shape
    cells = {(row % side_r, col % side_c)}
    cells.add((row % side_r, (col + 1) % side_c))
    cells.add((row % side_r, (col - 1) % side_c))
    cells.add(((row + 1) % side_r, col % side_c))
    cells.add(((row - 1) % side_r, col % side_c))
    return np.array(sorted(topology.site_id(r, c) for r, c in cells), dtype=np.int64)


@dataclass(frozen=True)
class SubsquarePartition:
    """Tiling of the space into a k x k grid of equal squares (k x 1 on a cycle)."""

    topology: Topology
    squares_per_side: int
    square_side: float  # effective side after the rounding rule

    @property
    def n_squares(self) -> int:
        if self.topology.kind == CYCLE:
            return self.squares_per_side
        return self.squares_per_side * self.squares_per_side

    def square_of(self, positions: np.ndarray) -> np.ndarray:
        """Square index for each location; rows scan top-to-bottom."""
        pos = np.asarray(positions)
        k = self.squares_per_side
        if self.topology.discrete:
            r = (pos[..., 0] // int(self.square_side)).astype(np.int64)
            c = (pos[..., 1] // int(self.square_side)).astype(np.int64)
            if self.topology.kind == CYCLE:
                return c
            return r * k + c
        r = np.minimum((pos[..., 0] * k).astype(np.int64), k - 1)
        c = np.minimum((pos[..., 1] * k).astype(np.int64), k - 1)
        return r * k + c

    def counts(self, positions: np.ndarray) -> np.ndarray:
        """Number of agents per square (the square loads B_i)."""
        idx = self.square_of(positions)
        return np.bincount(idx, minlength=self.n_squares)


def subsquare_partition(topology: Topology, square_side: float) -> SubsquarePartition:
    """Partition the space into equal squares of (approximately) the given side.

    Discrete lattices require an exact divisor.  On the unit torus the side is
    rounded to 1/k for the nearest integer k, since the usual
    sqrt(c1 log n / n) request almost never divides 1 exactly.
    """
    if topology.discrete:
        s = int(round(square_side))
        if s < 1 or abs(square_side - s) > 1e-9:
            raise ValueError(f"square side {square_side} must be a positive integer")
        _, side_c = topology.shape
        if topology.kind == TORUS and topology.side % s != 0:
            raise ValueError(f"square side {s} does not tile torus side {topology.side}")
        if topology.kind == CYCLE and side_c % s != 0:
            raise ValueError(f"square side {s} does not tile cycle length {side_c}")
        k = (topology.side if topology.kind == TORUS else side_c) // s
        return SubsquarePartition(topology, k, float(s))
    if not (0 < square_side < 1):
        raise ValueError(f"square side must lie in (0, 1), got {square_side}")
    k = int(round(1.0 / square_side))
    if k < 1:
        raise ValueError(f"square side {square_side} exceeds the unit torus")
    return SubsquarePartition(topology, k, 1.0 / k)


def parse_descriptor(text: str) -> Topology:
    """Parse 'torus:<side>' / 'cycle:<n>' / 'rgg:<n>:<c1>' style descriptors.

    The rgg form regenerates points from the stored seed, so it returns just
    the topology; callers fetch points via build_rgg with the same arguments.
    """
    parts = text.split(":")
    if parts[0] == "torus" and len(parts) == 2:
        return build_torus(int(parts[1]))
    if parts[0] == "cycle" and len(parts) == 2:
        return build_cycle(int(parts[1]))
    raise ValueError(f"unrecognized topology descriptor {text!r}")
