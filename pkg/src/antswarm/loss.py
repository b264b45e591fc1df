"""Training loss: cohesion via algebraic connectivity plus max centroid distance.

Edge weights are ``V - d`` on the visibility graph, so a pair contributes
most when coincident and nothing once it sits at the range limit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import SwarmState

EPS = kernels.COHESION_EPS
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 1.0


@dataclass
class WeightedVisibilityGraph:
    n: int
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray

    @classmethod
    def from_adjacency(cls, A) -> "WeightedVisibilityGraph":
        A = np.array(A, dtype=np.float64)
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T) or np.any(A < 0):
            raise ValueError("adjacency must be square, symmetric and non-negative")
        np.fill_diagonal(A, 0.0)
        deg = A.sum(axis=1)
        return cls(len(A), A, deg, np.ascontiguousarray(np.diag(deg) - A))


@dataclass
class SpectralResult:
    lambda2: float
    fiedler: np.ndarray
    gap_flag: bool
    eigenvalues: np.ndarray


def _positions(state) -> np.ndarray:
    P = state.positions if isinstance(state, SwarmState) else state
    return np.ascontiguousarray(P, dtype=np.float64)


def task_loss(state) -> tuple[float, np.ndarray]:
    value, grad = kernels.task_loss(_positions(state))
    return float(value), grad


def weighted_laplacian(state, V: float) -> WeightedVisibilityGraph:
    if V <= 0:
        raise ValueError("visibility range must be positive")
    L = kernels.weighted_laplacian(_positions(state), float(V))
    deg = np.diag(L).copy()
    A = np.diag(deg) - L
    return WeightedVisibilityGraph(len(L), A, deg, L)


def jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvector columns of a symmetric matrix."""
    M = np.ascontiguousarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    return kernels.jacobi_eigh(M)


def lambda2(g: WeightedVisibilityGraph) -> SpectralResult:
    if g.n < 2:
        raise ValueError("algebraic connectivity needs at least two vertices")
    w, Q = kernels.jacobi_eigh(g.laplacian)
    gap = bool(g.n >= 3 and (w[2] - w[1]) < 1e-8 * max(1.0, w[-1]))
    return SpectralResult(max(float(w[1]), 0.0), Q[:, 1].copy(), gap, w)


def lambda2_position_grad(state, V: float) -> np.ndarray:
    P = _positions(state)
    if len(P) < 2:
        raise ValueError("algebraic connectivity needs at least two agents")
    return kernels.lambda2_grad(P, float(V))[3]


def cohesiveness_loss(state, V: float) -> tuple[float, np.ndarray]:
    P = _positions(state)
    if len(P) < 2:
        raise ValueError("cohesiveness loss needs at least two agents")
    lam2, _, _, G, _ = kernels.lambda2_grad(P, float(V))
    value = 1.0 / (lam2 + EPS)
    return value, -value * value * G


def total_loss(state, V: float, alpha: float = DEFAULT_ALPHA,
               beta: float = DEFAULT_BETA) -> tuple[float, np.ndarray]:
    if alpha < 0 or beta < 0:
        raise ValueError("loss weights must be non-negative")
    P = _positions(state)
    if len(P) < 2:
        raise ValueError("total loss needs at least two agents")
    value, _, _, _, G = kernels.total_loss(P, float(V), float(alpha), float(beta))
    return float(value), G


def cheeger_lower_bound(g: WeightedVisibilityGraph) -> float:
    return lambda2(g).lambda2 / 2.0
