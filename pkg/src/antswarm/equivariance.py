"""Rotational frame transforms around the policy.

Before the network sees an observation it is rotated so the normalised sum
of its bearings points along +x; the network's action is rotated back
afterwards.  The composition commutes with any rotation of the input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Observation


@dataclass(frozen=True)
class FrameRotation:
    theta_star: float
    degenerate: bool
    cos: float = 1.0
    sin: float = 0.0

    @classmethod
    def identity(cls) -> "FrameRotation":
        return cls(0.0, True, 1.0, 0.0)


@dataclass(frozen=True)
class Action:
    direction: tuple
    step_size: float

    def __post_init__(self):
        if not 0.0 <= self.step_size <= 1.0:
            raise ValueError(f"step size {self.step_size} outside [0, 1]")

    @classmethod
    def stationary(cls) -> "Action":
        return cls((1.0, 0.0), 0.0)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.direction) * self.step_size


def _bearings(obs) -> np.ndarray:
    if isinstance(obs, Observation):
        return obs.bearings
    return np.ascontiguousarray(np.asarray(obs, dtype=np.float64).reshape(-1, 2))


def mean_direction(obs):
    """Unit vector along the bearing sum, or ``None`` when the sum vanishes."""
    c, s, degenerate = kernels.frame_from_bearings(_bearings(obs))
    return None if degenerate else np.array([c, s])


def frame_of(obs) -> FrameRotation:
    c, s, degenerate = kernels.frame_from_bearings(_bearings(obs))
    if degenerate:
        return FrameRotation.identity()
    # signed angle from +x; a zero y-component counts as positive
    if s == 0.0:
        theta = 0.0 if c > 0 else math.pi
    else:
        theta = math.atan2(s, c)
    return FrameRotation(theta, False, c, s)


def t_pre(obs, f: FrameRotation):
    b = _bearings(obs)
    out = b.copy() if f.degenerate else kernels.rotate_into(b, f.cos, f.sin)
    if isinstance(obs, Observation):
        return Observation(out, obs.observer_index, obs.coincident)
    return out


def t_post(a: Action, f: FrameRotation) -> Action:
    if f.degenerate:
        return a
    x, y = a.direction
    return Action((f.cos * x - f.sin * y, f.sin * x + f.cos * y), a.step_size)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])
