import math

import numpy as np
import pytest

from antswarm.equivariance import (Action, FrameRotation, frame_of, mean_direction, rotation, t_post,
                                   t_pre)
from antswarm.geometry import Observation

from conftest import nondegenerate_bearings

S = 1 / math.sqrt(2)


def test_mean_direction_examples():
    np.testing.assert_allclose(mean_direction([[1.0, 0.0]]), [1, 0])
    np.testing.assert_allclose(mean_direction([[1.0, 0.0], [0.0, 1.0]]), [S, S], atol=1e-15)
    assert mean_direction([[1.0, 0.0], [-1.0, 0.0]]) is None
    assert mean_direction(np.zeros((0, 2))) is None


def test_frame_examples():
    assert frame_of([[0.0, 1.0]]).theta_star == pytest.approx(math.pi / 2, abs=1e-15)
    assert frame_of([[1.0, 0.0]]).theta_star == 0.0
    assert frame_of([[-1.0, 0.0]]).theta_star == math.pi
    f = frame_of([[1.0, 0.0], [-1.0, 0.0]])
    assert f.degenerate and f.theta_star == 0.0


def test_t_pre_examples():
    np.testing.assert_allclose(t_pre([[0.0, 1.0]], frame_of([[0.0, 1.0]])), [[1.0, 0.0]], atol=1e-15)
    B = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = t_pre(B, frame_of(B))
    expected = [[math.cos(-math.pi / 4), math.sin(-math.pi / 4)], [math.cos(math.pi / 4), math.sin(math.pi / 4)]]
    np.testing.assert_allclose(out, expected, atol=1e-15)
    D = np.array([[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(t_pre(D, frame_of(D)), D)
    obs = Observation(B, observer_index=4)
    assert t_pre(obs, frame_of(obs)).observer_index == 4


def test_t_post_examples():
    up = t_post(Action((1.0, 0.0), 0.3), FrameRotation(math.pi / 2, False, 0.0, 1.0))
    np.testing.assert_allclose(up.direction, (0, 1), atol=1e-15)
    assert up.step_size == 0.3
    right = t_post(Action((0.0, 1.0), 0.3), FrameRotation(-math.pi / 2, False, 0.0, -1.0))
    np.testing.assert_allclose(right.direction, (1, 0), atol=1e-15)
    a = Action((0.6, 0.8), 0.5)
    assert t_post(a, FrameRotation.identity()) == a


def test_action_validation():
    with pytest.raises(ValueError):
        Action((1.0, 0.0), 1.5)
    assert Action.stationary().step_size == 0.0


def test_canonicalisation_and_round_trip(rng):
    for _ in range(300):
        B = nondegenerate_bearings(rng, int(rng.integers(1, 12)))
        f = frame_of(B)
        C = t_pre(B, f)
        np.testing.assert_allclose(mean_direction(C), [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(np.hypot(C[:, 0], C[:, 1]), 1.0, atol=1e-12)
        assert -math.pi < f.theta_star <= math.pi
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        back = rotation(-f.theta_star) @ np.array(t_post(Action(tuple(d), 0.5), f).direction)
        np.testing.assert_allclose(back, d, atol=1e-12)


def test_theta_matches_acos_formula(rng):
    for _ in range(200):
        B = nondegenerate_bearings(rng, int(rng.integers(1, 8)))
        u = mean_direction(B)
        sign = 1.0 if u[1] >= 0 else -1.0
        assert frame_of(B).theta_star == pytest.approx(math.acos(np.clip(u[0], -1, 1)) * sign, abs=1e-7)
