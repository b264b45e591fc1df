"""Centralised training of the shared policy with a staged curriculum.

Each environment is rolled forward with the current policy; at every step
the loss is taken on the positions the actions lead to, and its gradient
flows back through the actions of all agents into the shared parameters
(positions entering the step are constants).  Gradients are averaged over
the environment's steps and applied with one Adam update per environment.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .datagen import Dataset, GeneratorConfig, generate_dataset
from .geometry import SwarmState
from .policy import PolicyNet, load, save
from .prng import PCG32
from .simulator import STEP_FRACTION

log = logging.getLogger(__name__)

LOG_COLUMNS = ["stage", "epoch", "env", "mean_loss", "lambda2_mean", "task_mean"]


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CurriculumStage:
    stage_id: int
    group: str
    vr: float
    epochs: int
    steps: int
    environments: int
    learning_rate: float


def _stages():
    rows = [
        # id, group, VR, epochs, steps, envs, lr
        (1, "A", 0.3, 5, 200, 120, 5e-5),
        (2, "A", 0.4, 5, 200, 120, 5e-5),
        (3, "A", 0.5, 10, 200, 120, 5e-5),
        (4, "A", 0.6, 25, 200, 120, 5e-5),
        (5, "B", 0.65, 10, 200, 120, 5e-6),
        (6, "B", 0.7, 35, 200, 120, 5e-6),
        (7, "B", 0.75, 35, 200, 120, 5e-6),
        (8, "B", 0.8, 35, 200, 120, 5e-6),
        (9, "C", 0.75, 35, 500, 180, 5e-6),
        (10, "C", 0.8, 35, 500, 180, 5e-6),
        (11, "C", 0.85, 35, 500, 180, 5e-6),
        (12, "C", 0.9, 35, 500, 180, 5e-6),
        (13, "C", 0.95, 35, 500, 180, 5e-6),
        (14, "C", 1.0, 35, 500, 180, 5e-6),
    ]
    return tuple(CurriculumStage(*r) for r in rows)


BUILTIN_CURRICULUM = _stages()


def select_stages(curriculum, groups=None, stage_ids=None, max_epochs=None, environments=None,
                  steps=None):
    """Filter and shrink a curriculum (for desk-scale runs)."""
    out = []
    for st in curriculum:
        if groups is not None and st.group not in groups:
            continue
        if stage_ids is not None and st.stage_id not in stage_ids:
            continue
        out.append(CurriculumStage(
            st.stage_id, st.group, st.vr,
            st.epochs if max_epochs is None else min(st.epochs, max_epochs),
            st.steps if steps is None else min(st.steps, steps),
            st.environments if environments is None else min(st.environments, environments),
            st.learning_rate))
    return out


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, n: int = kernels.N_PARAMS) -> "OptimizerState":
        return cls(np.zeros(n), np.zeros(n))

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t,
                "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerState":
        return cls(np.array(d["m"]), np.array(d["v"]), d["t"], d["beta1"], d["beta2"], d["eps"])


def adam_update(params: np.ndarray, grads: np.ndarray, opt: OptimizerState, lr: float) -> np.ndarray:
    if params.shape != grads.shape or params.shape != opt.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                         f"state {opt.m.shape}")
    opt.t += 1
    opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grads
    opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grads * grads
    m_hat = opt.m / (1.0 - opt.beta1 ** opt.t)
    v_hat = opt.v / (1.0 - opt.beta2 ** opt.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + opt.eps)


# ---------------------------------------------------------------------------
# steps and stages


@dataclass
class StepResult:
    loss: float
    cohesion: float
    task: float
    lambda2: float
    grad: np.ndarray
    next_positions: np.ndarray


def train_step(net: PolicyNet, state, V: float, alpha: float = 1.0, beta: float = 1.0,
               s_max: float | None = None) -> StepResult:
    P = state.positions if isinstance(state, SwarmState) else state
    P = np.ascontiguousarray(P, dtype=np.float64)
    if len(P) < 2:
        raise ValueError("training needs at least two agents")
    s = STEP_FRACTION * V if s_max is None else s_max
    loss, coh, task, lam2, grad, Pn = kernels.train_step(P, float(V), net.params, net.mean_pool,
                                                        float(s), float(alpha), float(beta))
    return StepResult(loss, coh, task, lam2, grad, Pn)


@dataclass
class TrainConfig:
    visibility: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    s_max: float | None = None
    seed: int = 0
    num_agents: int = 10

    @property
    def step_length(self) -> float:
        return STEP_FRACTION * self.visibility if self.s_max is None else self.s_max


@dataclass
class StageLog:
    rows: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)


def _shuffle_seed(seed: int, stage_id: int) -> int:
    return seed * 1_000_003 + stage_id


def train_stage(net: PolicyNet, stage: CurriculumStage, dataset: Dataset, optimizer: OptimizerState,
                cfg: TrainConfig | None = None, log_writer=None) -> StageLog:
    """Run one curriculum stage in place on ``net``."""
    cfg = cfg or TrainConfig()
    if abs(dataset.config.visibility_ratio - stage.vr) > 1e-12:
        raise ValueError(f"dataset VR {dataset.config.visibility_ratio} does not match "
                         f"stage {stage.stage_id} VR {stage.vr}")
    if len(dataset) < stage.environments:
        raise ValueError(f"stage {stage.stage_id} needs {stage.environments} environments, "
                         f"dataset has {len(dataset)}")
    V = cfg.visibility
    s_max = cfg.step_length
    rng = PCG32(_shuffle_seed(cfg.seed, stage.stage_id))
    out = StageLog()

    for epoch in range(stage.epochs):
        order = rng.permutation(stage.environments)
        epoch_loss = 0.0
        for env in order:
            P = np.ascontiguousarray(dataset[env].positions, dtype=np.float64)
            grad_sum = np.zeros(kernels.N_PARAMS)
            loss_sum = lam_sum = task_sum = 0.0
            for _ in range(stage.steps):
                loss, _, task, lam2, grad, P = kernels.train_step(
                    P, V, net.params, net.mean_pool, s_max, cfg.alpha, cfg.beta)
                grad_sum += grad
                loss_sum += loss
                lam_sum += lam2
                task_sum += task
            if not (math.isfinite(loss_sum) and np.all(np.isfinite(grad_sum))):
                raise NumericError(f"non-finite loss/gradient in stage {stage.stage_id}, "
                                   f"epoch {epoch}, environment {env}")
            net.params = adam_update(net.params, grad_sum / stage.steps, optimizer,
                                     stage.learning_rate)
            row = [stage.stage_id, epoch, int(env), loss_sum / stage.steps,
                   lam_sum / stage.steps, task_sum / stage.steps]
            out.rows.append(row)
            if log_writer is not None:
                log_writer.writerow(row)
            epoch_loss += loss_sum / stage.steps
        out.epoch_losses.append(epoch_loss / stage.environments)
        log.info("stage %d epoch %d mean loss %.6g", stage.stage_id, epoch, out.epoch_losses[-1])
    return out


def stage_dataset(stage: CurriculumStage, cfg: TrainConfig) -> Dataset:
    gen = GeneratorConfig(cfg.num_agents, cfg.visibility, stage.vr,
                          seed=cfg.seed * 1_000_000 + stage.stage_id * 10_000)
    return generate_dataset(gen, stage.environments, profile=f"train-stage-{stage.stage_id}")


def _ckpt_paths(out_dir: Path, stage_id: int):
    return out_dir / f"stage_{stage_id:02d}.json", out_dir / f"stage_{stage_id:02d}.opt.json"


def run_curriculum(net: PolicyNet, curriculum, cfg: TrainConfig, out_dir,
                   resume: bool = True) -> PolicyNet:
    """Run every stage in order, writing a policy and optimizer checkpoint
    after each.  Completed stages found in ``out_dir`` are skipped when
    ``resume`` is set."""
    out_dir = Path(out_dir)
    (out_dir / "datasets").mkdir(parents=True, exist_ok=True)
    opt = OptimizerState.for_params()
    log_path = out_dir / "train_log.csv"

    done = []
    if resume:
        for st in curriculum:
            pol, optp = _ckpt_paths(out_dir, st.stage_id)
            if not (pol.exists() and optp.exists()):
                break
            done.append(st.stage_id)
        if done:
            pol, optp = _ckpt_paths(out_dir, done[-1])
            net = load(pol)
            opt = OptimizerState.from_dict(json.loads(optp.read_text()))
            log.info("resuming after stage %d", done[-1])
    if not done:
        with open(log_path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(LOG_COLUMNS)

    for st in curriculum:
        if st.stage_id in done:
            continue
        ds = stage_dataset(st, cfg)
        ds.write(out_dir / "datasets" / f"stage_{st.stage_id:02d}.jsonl")
        with open(log_path, "a", newline="") as fh:
            train_stage(net, st, ds, opt, cfg, csv.writer(fh, lineterminator="\n"))
        pol, optp = _ckpt_paths(out_dir, st.stage_id)
        save(net, pol, extra={"stage": asdict(st), "train_config": asdict(cfg)})
        optp.write_text(json.dumps(opt.to_dict()))
    return net
