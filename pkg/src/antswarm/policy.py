"""Permutation-invariant policy network over a variable number of bearings.

Layout (weights + biases)::

    encoder   2->16 tanh, 16->32 tanh, 32->16 tanh   (shared per bearing)
    pool      element-wise max (or mean) over bearings -> 16
    trunk     16->32 tanh, 32->32 tanh
    heads     direction 32->2 tanh (normalised afterwards)
              step size 32->32 relu, 32->1 logistic

for 3,875 trainable parameters regardless of how many bearings come in.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .equivariance import Action
from .geometry import Observation
from .prng import PCG32

CHECKPOINT_FORMAT = "antswarm-policy"
CHECKPOINT_VERSION = 1
VARIANTS = ("max", "mean")


class CheckpointError(ValueError):
    pass


@dataclass
class GradientTape:
    """Activations cached by :func:`forward` for :func:`backward`."""

    n_inputs: int
    cache: tuple

    @property
    def fallback(self) -> bool:
        return bool(self.cache[1])


class PolicyNet:
    def __init__(self, params: np.ndarray, variant: str = "max"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown aggregation variant {variant!r}")
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (kernels.N_PARAMS,):
            raise ValueError(f"expected {kernels.N_PARAMS} parameters, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameters must be finite")
        self.params = params
        self.variant = variant

    @property
    def mean_pool(self) -> bool:
        return self.variant == "mean"

    def layer(self, name: str):
        k = kernels.LAYER_NAMES.index(name)
        return kernels.layer(self.params, k)

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.params.copy(), self.variant)

    def __repr__(self):
        return f"PolicyNet(variant={self.variant!r}, params={self.params.size})"


def init(seed: int, variant: str = "max") -> PolicyNet:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    rng = PCG32(seed)
    theta = np.zeros(kernels.N_PARAMS)
    for k, (fi, fo) in enumerate(zip(kernels.FAN_IN, kernels.FAN_OUT)):
        limit = math.sqrt(6.0 / (fi + fo))
        w0 = kernels.W_OFF[k]
        for i in range(fi * fo):
            theta[w0 + i] = rng.uniform(-limit, limit)
    return PolicyNet(theta, variant)


def param_count(net: PolicyNet | None = None, layers=None) -> int:
    names = kernels.LAYER_NAMES if layers is None else layers
    total = 0
    for name in names:
        k = kernels.LAYER_NAMES.index(name)
        total += kernels.FAN_IN[k] * kernels.FAN_OUT[k] + kernels.FAN_OUT[k]
    if net is not None and layers is None:
        assert net.params.size == total
    return total


def _as_array(obs) -> np.ndarray:
    b = obs.bearings if isinstance(obs, Observation) else obs
    return np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 2))


def forward(net: PolicyNet, obs) -> tuple[Action, GradientTape | None]:
    """Evaluate the network on an already-canonicalised observation.

    An empty observation yields the stationary action and no tape.
    """
    X = _as_array(obs)
    if len(X) == 0:
        return Action.stationary(), None
    out = kernels.policy_forward(net.params, X, net.mean_pool)
    dx, dy, sigma, fallback = out[:4]
    tape = GradientTape(len(X), (sigma, fallback) + tuple(out[4:]))
    return Action((dx, dy), sigma), tape


def backward(net: PolicyNet, tape: GradientTape, d_direction, d_step: float):
    """Gradients of a scalar loss, given its gradient w.r.t. the action.

    Returns ``(param_grad, bearing_grad)``.
    """
    d_direction = np.asarray(d_direction, dtype=np.float64)
    if d_direction.shape != (2,):
        raise ValueError(f"direction gradient must have shape (2,), got {d_direction.shape}")
    cache = tape.cache
    if cache[3].shape[0] != tape.n_inputs or cache[7].shape[1] != net.layer("trunk1")[0].shape[0]:
        raise ValueError("tape does not match this network")
    grad = np.zeros(kernels.N_PARAMS)
    dX = kernels.policy_backward(net.params, net.mean_pool, *cache,
                                 float(d_direction[0]), float(d_direction[1]), float(d_step), grad)
    return grad, dX


# ---------------------------------------------------------------------------
# checkpoints


def _layer_header():
    return [{"name": n, "in": fi, "out": fo}
            for n, fi, fo in zip(kernels.LAYER_NAMES, kernels.FAN_IN, kernels.FAN_OUT)]


def to_dict(net: PolicyNet, extra: dict | None = None) -> dict:
    layers = []
    for k, name in enumerate(kernels.LAYER_NAMES):
        W, b = kernels.layer(net.params, k)
        layers.append({"name": name, "weight": W.ravel().tolist(), "bias": b.tolist()})
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "variant": net.variant,
        "param_count": int(net.params.size),
        "layout": _layer_header(),
        "layers": layers,
    }
    if extra:
        doc["meta"] = extra
    return doc


def from_dict(doc: dict) -> PolicyNet:
    try:
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"not a policy checkpoint: format={doc.get('format')!r}")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
        if doc.get("param_count") != kernels.N_PARAMS:
            raise CheckpointError(f"checkpoint has {doc.get('param_count')} parameters, "
                                  f"expected {kernels.N_PARAMS}")
        if doc.get("layout") != _layer_header():
            raise CheckpointError("layer layout does not match this network")
        theta = np.empty(kernels.N_PARAMS)
        for k, entry in enumerate(doc["layers"]):
            if entry["name"] != kernels.LAYER_NAMES[k]:
                raise CheckpointError(f"layer {k} is {entry['name']!r}, expected {kernels.LAYER_NAMES[k]!r}")
            nw = kernels.FAN_IN[k] * kernels.FAN_OUT[k]
            w = np.asarray(entry["weight"], dtype=np.float64)
            b = np.asarray(entry["bias"], dtype=np.float64)
            if w.shape != (nw,) or b.shape != (kernels.FAN_OUT[k],):
                raise CheckpointError(f"layer {entry['name']!r} has the wrong shape")
            theta[kernels.W_OFF[k]:kernels.W_OFF[k] + nw] = w
            theta[kernels.B_OFF[k]:kernels.B_OFF[k] + kernels.FAN_OUT[k]] = b
        return PolicyNet(theta, doc["variant"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc


def save(net: PolicyNet, path, extra: dict | None = None) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(to_dict(net, extra)))


def load(path) -> PolicyNet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    return from_dict(doc)
