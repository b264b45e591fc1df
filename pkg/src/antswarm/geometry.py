"""Positions, visibility graphs, bearing observations and connectivity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")


@dataclass
class SwarmState:
    """Agent positions at one time step, stored as an ``(N, 2)`` array."""

    positions: np.ndarray
    time_step: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2 or len(self.positions) < 1:
            raise ValueError(f"positions must have shape (N>=1, 2), got {self.positions.shape}")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.time_step < 0:
            raise ValueError("time_step must be non-negative")

    @property
    def n(self) -> int:
        return len(self.positions)

    @classmethod
    def from_points(cls, points, time_step: int = 0) -> "SwarmState":
        return cls(np.array([[p.x, p.y] if isinstance(p, Position) else p for p in points], dtype=float),
                   time_step)


@dataclass
class Observation:
    """Bearings (unit rows) from one observer to its visible neighbours.

    ``coincident`` counts neighbours sitting exactly on the observer; they
    are graph neighbours but have no defined bearing.
    """

    bearings: np.ndarray
    observer_index: int = -1
    coincident: int = 0

    def __post_init__(self):
        self.bearings = np.ascontiguousarray(np.asarray(self.bearings, dtype=np.float64).reshape(-1, 2))

    def __len__(self):
        return len(self.bearings)


@dataclass
class VisibilityGraph:
    n: int
    edges: set = field(default_factory=set)

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for e in self.edges if i in e for j in e if j != i)


def distance(a, b) -> float:
    ax, ay = (a.x, a.y) if isinstance(a, Position) else a
    bx, by = (b.x, b.y) if isinstance(b, Position) else b
    dx = bx - ax
    dy = by - ay
    return math.hypot(dx, dy)


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[None, :, :] - positions[:, None, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def build_visibility_graph(state: SwarmState, V: float) -> VisibilityGraph:
    """Edge ``{i, j}`` iff ``d(p_i, p_j) <= V`` (boundary inclusive)."""
    if V <= 0:
        raise ValueError("visibility range must be positive")
    d = pairwise_distances(state.positions)
    ii, jj = np.nonzero(np.triu(d <= V, k=1))
    return VisibilityGraph(state.n, {frozenset((int(i), int(j))) for i, j in zip(ii, jj)})


def observe(state: SwarmState, i: int, V: float) -> Observation:
    if not 0 <= i < state.n:
        raise IndexError(f"agent index {i} out of range for {state.n} agents")
    P = state.positions
    bearings = kernels.gather_bearings(P, i, V)
    d = np.hypot(P[:, 0] - P[i, 0], P[:, 1] - P[i, 1])
    coincident = int(np.count_nonzero(d == 0.0)) - 1
    return Observation(bearings, i, coincident)


def connected_components(g: VisibilityGraph) -> list[list[int]]:
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        i, j = sorted(e)
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    blocks: dict[int, list[int]] = {}
    for v in range(g.n):
        blocks.setdefault(find(v), []).append(v)
    return sorted(blocks.values())


def is_cohesive(g: VisibilityGraph) -> bool:
    return len(connected_components(g)) == 1


def component_sizes(positions: np.ndarray, V: float) -> np.ndarray:
    """Component sizes straight from positions (fast path used by rollouts)."""
    labels = kernels.component_labels(np.ascontiguousarray(positions, dtype=np.float64), V)
    return np.bincount(labels)[np.unique(labels)]
