"""Bearing-only swarm gathering: a rotation-equivariant, permutation-invariant
policy network, its spectral training loss, a swarm simulator and an
evaluation harness."""

__version__ = "0.1.0"

from ._accel import backend
from .equivariance import Action, FrameRotation
from .geometry import Observation, SwarmState, VisibilityGraph
from .policy import PolicyNet, param_count
from .simulator import Controller, rollout

__all__ = [
    "Action", "Controller", "FrameRotation", "Observation", "PolicyNet", "SwarmState",
    "VisibilityGraph", "backend", "param_count", "rollout", "__version__",
]
