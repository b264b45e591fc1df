import math

import numpy as np
import pytest

from antswarm import kernels
from antswarm.geometry import SwarmState, build_visibility_graph, is_cohesive
from antswarm.loss import (EPS, WeightedVisibilityGraph, cheeger_lower_bound, cohesiveness_loss,
                           jacobi_eigh, lambda2, lambda2_position_grad, task_loss, total_loss,
                           weighted_laplacian)

from conftest import rel_err
from oracles import fd_lambda2, lambda2_dense


def S(*pts):
    return SwarmState.from_points(pts)


def test_task_loss_examples():
    assert task_loss(S((0, 0), (2, 0)))[0] == 1.0
    v, g = task_loss(S((1, 1), (1, 1), (1, 1)))
    assert v == 0.0 and not g.any()
    assert task_loss(S((0, 0), (0, 0), (3, 0)))[0] == 2.0


def test_task_loss_gradient_fd(rng):
    h = 1e-7
    for _ in range(30):
        P = rng.uniform(-2, 2, (6, 2))
        v, G = task_loss(P)
        F = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            Pp, Pm = P.copy(), P.copy()
            Pp[idx] += h
            Pm[idx] -= h
            F[idx] = (task_loss(Pp)[0] - task_loss(Pm)[0]) / (2 * h)
        assert rel_err(G, F) < 1e-6


def test_weighted_laplacian_examples():
    L = weighted_laplacian(S((0, 0), (0.5, 0)), 1.0).laplacian
    np.testing.assert_allclose(L, [[0.5, -0.5], [-0.5, 0.5]])
    L = weighted_laplacian(S((0, 0), (0, 0)), 1.0).laplacian
    assert L[0, 1] == -1.0
    L = weighted_laplacian(S((0, 0), (1, 0)), 1.0).laplacian
    assert not L.any()
    assert is_cohesive(build_visibility_graph(S((0, 0), (1, 0)), 1.0))


def test_laplacian_invariants(rng):
    for _ in range(50):
        P = rng.uniform(0, 2, (int(rng.integers(2, 12)), 2))
        g = weighted_laplacian(P, 1.0)
        assert np.array_equal(g.laplacian, g.laplacian.T)
        assert np.all(np.abs(g.laplacian.sum(axis=1)) <= 1e-12)
        assert np.all(g.adjacency >= 0) and np.all(g.adjacency <= 1.0)
        w = np.linalg.eigvalsh(g.laplacian)
        assert w.min() >= -1e-10 and abs(w[0]) <= 1e-10


def test_jacobi_against_lapack(rng):
    for n in (1, 2, 3, 7, 20, 40):
        A = rng.normal(size=(n, n))
        A = A + A.T
        w, Q = jacobi_eigh(A)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(A), atol=1e-11 * max(1, np.abs(w).max()))
        np.testing.assert_allclose(A @ Q, Q * w, atol=1e-10)
        np.testing.assert_allclose(Q.T @ Q, np.eye(n), atol=1e-12)
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))


def test_lambda2_examples():
    r = lambda2(weighted_laplacian(S((0, 0), (0.5, 0)), 1.0))
    assert r.lambda2 == pytest.approx(1.0, abs=1e-15)
    tri = S((0, 0), (0.5, 0), (0.25, 0.25 * math.sqrt(3)))
    r = lambda2(weighted_laplacian(tri, 1.0))
    assert r.lambda2 == pytest.approx(1.5, abs=1e-12)
    assert r.gap_flag
    r = lambda2(weighted_laplacian(S((0, 0), (0.5, 0), (5, 0)), 1.0))
    assert r.lambda2 == 0.0
    with pytest.raises(ValueError):
        lambda2(weighted_laplacian(S((0, 0)), 1.0))


def test_spectral_result_invariants(rng):
    for _ in range(50):
        g = weighted_laplacian(rng.uniform(0, 1.5, (int(rng.integers(2, 10)), 2)), 1.0)
        r = lambda2(g)
        scale = max(1.0, np.linalg.norm(g.laplacian, 2))
        resid = g.laplacian @ r.fiedler - r.eigenvalues[1] * r.fiedler
        assert np.linalg.norm(resid) <= 1e-9 * scale
        assert abs(r.fiedler.sum()) <= 1e-9 or r.lambda2 <= 1e-10
        assert abs(np.linalg.norm(r.fiedler) - 1) < 1e-12


def _connected_simple_state(rng, n, V=1.0):
    while True:
        P = rng.uniform(0, 1.2, (n, 2))
        lam, _, gap, _, w = kernels.lambda2_grad(P, V)
        if lam > 1e-3 and w[2] - w[1] > 1e-3 if n > 2 else lam > 1e-3:
            return P


def test_lambda2_gradient_fd(rng):
    for _ in range(25):
        P = _connected_simple_state(rng, int(rng.integers(5, 9)))
        assert rel_err(lambda2_position_grad(P, 1.0), fd_lambda2(P, 1.0)) < 1e-5


def test_lambda2_two_agent_analytic():
    # lambda2 = 2 (V - d), so d lambda2 / d d = -2
    G = lambda2_position_grad(S((0, 0), (0.3, 0.4)), 1.0)
    u = np.array([0.6, 0.8])
    np.testing.assert_allclose(G[1], -2 * u, atol=1e-14)
    np.testing.assert_allclose(G[0], 2 * u, atol=1e-14)
    lams = [lambda2(weighted_laplacian(S((0, 0), (d, 0)), 1.0)).lambda2 for d in np.linspace(0.05, 0.95, 19)]
    assert all(a > b for a, b in zip(lams, lams[1:]))


def test_lambda2_gradient_mirror_symmetry():
    P = np.array([[0.0, 0.3], [0.0, -0.3], [0.5, 0.1], [0.5, -0.1], [-0.4, 0.0]])
    G = lambda2_position_grad(P, 1.0)
    M = np.array([1.0, -1.0])
    np.testing.assert_allclose(G[1], G[0] * M, atol=1e-12)
    np.testing.assert_allclose(G[3], G[2] * M, atol=1e-12)
    assert abs(G[4, 1]) < 1e-12


def test_cohesiveness_examples():
    assert EPS == 1e-6
    assert cohesiveness_loss(S((0, 0), (5, 0)), 1.0)[0] == pytest.approx(1e6)
    assert cohesiveness_loss(S((0, 0), (0.5, 0)), 1.0)[0] == pytest.approx(1 / (1 + 1e-6), rel=1e-15)


def test_total_loss_composition(rng):
    P = rng.uniform(0, 1, (6, 2))
    c, gc = cohesiveness_loss(P, 1.0)
    t, gt = task_loss(P)
    v, g = total_loss(P, 1.0)
    assert v == pytest.approx(c + t, rel=1e-15)
    v, g = total_loss(P, 1.0, 1.0, 10.0)
    assert v == pytest.approx(c + 10 * t, rel=1e-15)
    np.testing.assert_allclose(g, gc + 10 * gt, rtol=1e-12, atol=1e-12)
    assert total_loss(P, 1.0, 1.0, 0.0)[0] == c
    assert total_loss(P, 1.0, 0.0, 1.0)[0] == t
    with pytest.raises(ValueError):
        total_loss(P, 1.0, -1.0, 1.0)


def test_total_loss_gradient_fd(rng):
    h = 1e-6
    for _ in range(10):
        P = _connected_simple_state(rng, 6)
        _, G = total_loss(P, 1.0, 1.0, 1.0)
        F = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            Pp, Pm = P.copy(), P.copy()
            Pp[idx] += h
            Pm[idx] -= h
            F[idx] = (total_loss(Pp, 1.0)[0] - total_loss(Pm, 1.0)[0]) / (2 * h)
        assert rel_err(G, F, floor=1e-4) < 1e-5


def test_lambda2_matches_lapack_oracle(rng):
    for _ in range(100):
        P = rng.uniform(0, 2, (int(rng.integers(2, 10)), 2))
        assert lambda2(weighted_laplacian(P, 1.0)).lambda2 == pytest.approx(max(lambda2_dense(P, 1.0)[0], 0), abs=1e-12)


def test_cheeger_bound_values():
    assert cheeger_lower_bound(weighted_laplacian(S((0, 0), (5, 0)), 1.0)) == 0.0
    assert cheeger_lower_bound(weighted_laplacian(S((0, 0), (0.5, 0)), 1.0)) == pytest.approx(0.5)


def test_from_adjacency_validation():
    g = WeightedVisibilityGraph.from_adjacency([[0, 2], [2, 0]])
    np.testing.assert_array_equal(g.laplacian, [[2, -2], [-2, 2]])
    with pytest.raises(ValueError):
        WeightedVisibilityGraph.from_adjacency([[0, 1], [2, 0]])


def _random_weighted(rng, n):
    P = rng.uniform(0, 0.5 * math.sqrt(n), (n, 2))
    return weighted_laplacian(P, 1.0)


def test_cheeger_volume_form_not_scale_free():
    # volume-normalised h ignores a global weight scale, lambda2 does not
    from oracles import cheeger_volume
    k3 = WeightedVisibilityGraph.from_adjacency(np.ones((3, 3)))
    assert cheeger_volume(k3.adjacency) == 1.0
    assert cheeger_lower_bound(k3) == pytest.approx(1.5)
    half = WeightedVisibilityGraph.from_adjacency(0.5 * np.ones((3, 3)))
    assert cheeger_volume(half.adjacency) == 1.0
    assert cheeger_lower_bound(half) == pytest.approx(0.75)


def test_isoperimetric_number_bound(rng):
    from oracles import cheeger_isoperimetric
    for _ in range(200):
        g = _random_weighted(rng, int(rng.integers(2, 9)))
        assert cheeger_isoperimetric(g.adjacency) >= cheeger_lower_bound(g) - 1e-12


def test_normalised_laplacian_cheeger_bound(rng):
    from oracles import cheeger_volume
    checked = 0
    while checked < 200:
        g = _random_weighted(rng, int(rng.integers(2, 9)))
        if np.any(g.degree <= 0):
            continue
        s = 1 / np.sqrt(g.degree)
        lam = np.linalg.eigvalsh(s[:, None] * g.laplacian * s[None, :])[1]
        assert cheeger_volume(g.adjacency) >= lam / 2 - 1e-12
        checked += 1
