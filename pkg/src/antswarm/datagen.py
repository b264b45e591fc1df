"""Seeded generation of connected initial constellations and dataset files.

Agents are placed one at a time.  A candidate is drawn uniformly from the
current sampling region and accepted once it lies strictly within
``V_eff = V * VR`` of some already-placed agent; after every accepted
placement the region grows by the new agent's visibility disk.  Agent
indices are shuffled at the end.

Dataset files are JSON lines: a header object, then one object per
constellation ``{"index", "seed", "positions": [[x, y], ...]}``.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import SwarmState
from .prng import PCG32

DATASET_FORMAT = "antswarm-dataset"
DATASET_VERSION = 1

EVAL_PROFILES = {
    "regular": 0.5,
    "vr625": 0.625,
    "challenging": 0.75,
    "vr875": 0.875,
    "marginal": 1.0,
}
TRAIN_AGENTS = 10


class GenerationError(RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (constellation {index})")
        self.index = index


class DatasetError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    num_agents: int
    visibility: float = 1.0
    visibility_ratio: float = 0.5
    seed: int = 0
    initial_boundary: float | None = None
    max_attempts: int = 1000

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if self.visibility <= 0:
            raise ValueError("visibility must be positive")
        if not 0 < self.visibility_ratio <= 1:
            raise ValueError("visibility_ratio must lie in (0, 1]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.initial_boundary is not None and self.initial_boundary <= 0:
            raise ValueError("initial_boundary must be positive")

    @property
    def v_eff(self) -> float:
        return self.visibility * self.visibility_ratio

    @property
    def boundary_side(self) -> float:
        if self.initial_boundary is not None:
            return self.initial_boundary
        return 2.0 * self.visibility * math.sqrt(self.num_agents)

    def with_seed(self, seed: int) -> "GeneratorConfig":
        return GeneratorConfig(self.num_agents, self.visibility, self.visibility_ratio, seed,
                               self.initial_boundary, self.max_attempts)


def _attempt(cfg: GeneratorConfig, rng: PCG32):
    side = cfg.boundary_side
    V = cfg.visibility
    v_eff = cfg.v_eff
    placed = [(rng.uniform(0.0, side), rng.uniform(0.0, side))]
    disks: list[tuple[float, float]] = []
    lo_x, lo_y, hi_x, hi_y = 0.0, 0.0, side, side

    for _ in range(cfg.num_agents - 1):
        for _ in range(cfg.max_attempts):
            x = rng.uniform(lo_x, hi_x)
            y = rng.uniform(lo_y, hi_y)
            inside = 0.0 <= x <= side and 0.0 <= y <= side
            if not inside:
                inside = any((x - cx) ** 2 + (y - cy) ** 2 <= V * V for cx, cy in disks)
            if not inside:
                continue
            if any(math.sqrt((x - px) ** 2 + (y - py) ** 2) < v_eff for px, py in placed):
                break
        else:
            return None
        placed.append((x, y))
        disks.append((x, y))
        lo_x, lo_y = min(lo_x, x - V), min(lo_y, y - V)
        hi_x, hi_y = max(hi_x, x + V), max(hi_y, y + V)
    return placed


def generate_constellation(cfg: GeneratorConfig) -> SwarmState:
    rng = PCG32(cfg.seed)
    for _ in range(cfg.max_attempts):
        placed = _attempt(cfg, rng)
        if placed is not None:
            rng.shuffle(placed)
            return SwarmState(np.array(placed, dtype=np.float64))
    raise GenerationError("Failed to create constellation")


@dataclass
class Dataset:
    config: GeneratorConfig
    seeds: list = field(default_factory=list)
    states: list = field(default_factory=list)
    profile: str | None = None

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, k) -> SwarmState:
        return self.states[k]

    def header(self) -> dict:
        return {"format": DATASET_FORMAT, "version": DATASET_VERSION, "profile": self.profile,
                "config": asdict(self.config), "count": len(self.states)}

    def lines(self):
        yield json.dumps(self.header(), sort_keys=True)
        for k, (seed, st) in enumerate(zip(self.seeds, self.states)):
            yield json.dumps({"index": k, "seed": seed, "positions": st.positions.tolist()})

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


def _generate_item(args):
    cfg, k = args
    seed = cfg.seed + k
    try:
        return seed, generate_constellation(cfg.with_seed(seed))
    except GenerationError as exc:
        raise GenerationError(str(exc), index=k) from exc


def generate_dataset(cfg: GeneratorConfig, count: int, profile: str | None = None,
                     jobs: int = 1) -> Dataset:
    """``count`` constellations; item ``k`` is generated from seed ``cfg.seed + k``.

    Items are independent, so ``jobs > 1`` fans them out over worker
    processes without changing the result.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    tasks = [(cfg, k) for k in range(count)]
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            items = list(pool.map(_generate_item, tasks, chunksize=max(1, count // (4 * jobs))))
    else:
        items = [_generate_item(t) for t in tasks]
    ds = Dataset(cfg, profile=profile)
    for seed, state in items:
        ds.seeds.append(seed)
        ds.states.append(state)
    return ds


def read_dataset(path) -> Dataset:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    try:
        header = json.loads(lines[0])
        if header.get("format") != DATASET_FORMAT:
            raise DatasetError(f"{path}: not an antswarm dataset")
        if header.get("version") != DATASET_VERSION:
            raise DatasetError(f"{path}: unsupported dataset version {header.get('version')!r}")
        ds = Dataset(GeneratorConfig(**header["config"]), profile=header.get("profile"))
        for line in lines[1:]:
            if not line.strip():
                continue
            item = json.loads(line)
            ds.seeds.append(int(item["seed"]))
            ds.states.append(SwarmState(np.array(item["positions"], dtype=np.float64)))
    except DatasetError:
        raise
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: malformed dataset ({exc})") from exc
    if len(ds) != header["count"]:
        raise DatasetError(f"{path}: header says {header['count']} items, found {len(ds)}")
    return ds


def profile_config(profile: str, num_agents: int | None = None, visibility: float = 1.0,
                   seed: int = 0, visibility_ratio: float | None = None) -> GeneratorConfig:
    if profile == "train10":
        return GeneratorConfig(TRAIN_AGENTS if num_agents is None else num_agents, visibility,
                               0.5 if visibility_ratio is None else visibility_ratio, seed)
    if profile not in EVAL_PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    return GeneratorConfig(10 if num_agents is None else num_agents, visibility,
                           EVAL_PROFILES[profile] if visibility_ratio is None else visibility_ratio, seed)
