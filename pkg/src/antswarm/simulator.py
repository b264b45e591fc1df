"""Synchronous swarm dynamics, the two controllers, and rollouts.

Each round every agent computes its action from the same snapshot, then all
positions move at once by ``step_size * s_max`` along the action direction.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .equivariance import Action
from .geometry import Observation, SwarmState
from .policy import PolicyNet

log = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 2500
STEP_FRACTION = 0.05        # default s_max as a fraction of V
CONVERGENCE_FRACTION = 0.5  # default convergence radius as a fraction of V


@dataclass
class Controller:
    kind: str
    net: PolicyNet | None = None
    s_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("network", "analytical"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "network" and self.net is None:
            raise ValueError("network controller needs a PolicyNet")
        if self.s_max is not None and self.s_max <= 0:
            raise ValueError("s_max must be positive")

    @classmethod
    def analytical(cls, s_max=None) -> "Controller":
        return cls("analytical", None, s_max)

    @classmethod
    def network(cls, net: PolicyNet, s_max=None) -> "Controller":
        return cls("network", net, s_max)

    def step_length(self, V: float) -> float:
        return self.s_max if self.s_max is not None else STEP_FRACTION * V

    @property
    def label(self) -> str:
        return "analytical" if self.kind == "analytical" else f"network-{self.net.variant}"


@dataclass
class ScenarioResult:
    converged: bool
    convergence_step: int | None
    stayed_connected: bool
    largest_component_fraction_final: float
    steps_executed: int
    first_disconnection_step: int | None = None
    n_agents: int = 0
    final_max_centroid_dist: float = 0.0


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)
    max_centroid_dist: list = field(default_factory=list)
    n_components: list = field(default_factory=list)
    largest_fraction: list = field(default_factory=list)
    positions: list | None = None

    def __len__(self):
        return len(self.steps)

    def append(self, t, metrics, P=None):
        self.steps.append(t)
        self.max_centroid_dist.append(float(metrics[0]))
        self.n_components.append(int(metrics[1]))
        self.largest_fraction.append(float(metrics[2]))
        if self.positions is not None and P is not None:
            self.positions.append(P.copy())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "max_centroid_dist", "n_components", "largest_fraction"])
            for row in zip(self.steps, self.max_centroid_dist, self.n_components, self.largest_fraction):
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3])])

    def write_positions_csv(self, path) -> None:
        if self.positions is None:
            raise ValueError("trajectory was recorded without positions")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "agent", "x", "y"])
            for t, P in zip(self.steps, self.positions):
                for i, (x, y) in enumerate(P):
                    w.writerow([t, i, repr(float(x)), repr(float(y))])


def _bearings(obs) -> np.ndarray:
    b = obs.bearings if isinstance(obs, Observation) else obs
    return np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 2))


def smallest_enclosing_sector(obs):
    """``(angle, (b1, b2))`` for the tightest sector containing all bearings."""
    B = _bearings(obs)
    if len(B) == 0:
        raise ValueError("enclosing sector of an empty observation")
    sector, i1, i2 = kernels.enclosing_sector(B)
    return float(sector), (B[i1].copy(), B[i2].copy())


def analytical_action(obs) -> Action:
    dx, dy, s = kernels.analytical_agent_action(_bearings(obs))
    return Action((dx, dy), s)


def network_action(net: PolicyNet, obs) -> Action:
    dx, dy, s, _, _ = kernels.network_agent_action(_bearings(obs), net.params, net.mean_pool)
    return Action((dx, dy), s)


def actions(P: np.ndarray, controller: Controller, V: float):
    if controller.kind == "analytical":
        return kernels.analytical_actions(P, V)
    return kernels.network_actions(P, V, controller.net.params, controller.net.mean_pool)


def advance(P: np.ndarray, controller: Controller, V: float) -> np.ndarray:
    dirs, sig = actions(P, controller, V)
    return kernels.apply_actions(P, dirs, sig, controller.step_length(V))


def step(state: SwarmState, controller: Controller, V: float) -> SwarmState:
    return SwarmState(advance(state.positions, controller, float(V)), state.time_step + 1)


def rollout(initial: SwarmState, controller: Controller, V: float,
            max_steps: int = DEFAULT_MAX_STEPS, conv_threshold: float | None = None,
            record_positions: bool = False) -> tuple[ScenarioResult, Trajectory]:
    """Run until the swarm is connected and within ``conv_threshold`` of its
    centroid, or until ``max_steps`` steps have been applied."""
    V = float(V)
    thr = CONVERGENCE_FRACTION * V if conv_threshold is None else float(conv_threshold)
    P = np.ascontiguousarray(initial.positions, dtype=np.float64).copy()
    N = len(P)
    traj = Trajectory(positions=[] if record_positions else None)

    first_disc = None
    converged = False
    t = 0
    while True:
        m = kernels.step_metrics(P, V)
        traj.append(t, m, P)
        if m[1] > 1 and first_disc is None:
            first_disc = t
            if t == 0:
                log.warning("initial constellation is not connected")
        if m[1] == 1 and m[0] <= thr:
            converged = True
            break
        if t >= max_steps:
            break
        P = advance(P, controller, V)
        t += 1

    result = ScenarioResult(
        converged=converged,
        convergence_step=t if converged else None,
        stayed_connected=first_disc is None,
        largest_component_fraction_final=traj.largest_fraction[-1],
        steps_executed=t,
        first_disconnection_step=first_disc,
        n_agents=N,
        final_max_centroid_dist=traj.max_centroid_dist[-1],
    )
    return result, traj
