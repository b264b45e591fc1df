"""Command-line entry point: ``antswarm {gen,train,eval,compare,replay}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.  On
failure a single line ``antswarm: error code=<n> kind=<Exception> msg=<json>``
goes to stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .datagen import (DATASET_VERSION, EVAL_PROFILES, DatasetError, GenerationError, GeneratorConfig,
                      generate_dataset, profile_config, read_dataset)
from .evaluation import REPORT_VERSION, ReportError, compare, evaluate, read_report
from .policy import CHECKPOINT_VERSION, CheckpointError, init, load
from .simulator import DEFAULT_MAX_STEPS, Controller, rollout
from .training import (BUILTIN_CURRICULUM, CurriculumStage, NumericError, TrainConfig, run_curriculum,
                       select_stages)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

CONFIG_SECTIONS = {
    "generator": {"agents", "vr", "visibility", "count", "seed", "profile", "jobs"},
    "curriculum": {"stages", "groups", "max_epochs", "environments", "steps", "custom"},
    "simulator": {"s_max", "conv_threshold", "max_steps"},
    "training": {"alpha", "beta", "variant", "init_seed", "visibility", "num_agents"},
    "eval": {"controller", "dataset", "jobs"},
}
TOP_LEVEL_KEYS = {"seed", "output_dir"} | set(CONFIG_SECTIONS)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_manifest(target, command: str, config: dict, inputs=()) -> Path:
    target = Path(target)
    path = target / "manifest.json" if target.is_dir() else target.with_name(target.name + ".manifest.json")
    doc = {
        "tool": "antswarm",
        "version": __version__,
        "command": command,
        "config": config,
        "formats": {"dataset": DATASET_VERSION, "checkpoint": CHECKPOINT_VERSION, "report": REPORT_VERSION},
        "inputs": {str(p): git_blob_hash(p) for p in inputs},
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return path


def load_config(path) -> dict:
    """Read a JSON run config; unknown sections or keys are rejected."""
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cfg) - TOP_LEVEL_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for section, allowed in CONFIG_SECTIONS.items():
        extra = set(cfg.get(section, {})) - allowed
        if extra:
            raise UsageError(f"unknown keys in [{section}]: {sorted(extra)}")
    return cfg


def _pick(flag, cfg: dict, section: str, key: str, default=None):
    if flag is not None:
        return flag
    return cfg.get(section, {}).get(key, default)


def _default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _parse_ids(spec):
    if spec is None or isinstance(spec, list):
        return spec
    ids = []
    for part in str(spec).split(","):
        lo, _, hi = part.partition("-")
        ids.extend(range(int(lo), int(hi or lo) + 1))
    return ids


def _controller(spec: str, s_max=None) -> Controller:
    if spec == "analytical":
        return Controller.analytical(s_max)
    if spec.startswith("net:"):
        return Controller.network(load(spec[4:]), s_max)
    raise UsageError(f"controller must be 'analytical' or 'net:<checkpoint>', got {spec!r}")


def _controller_label(spec: str, ctrl: Controller) -> str:
    if ctrl.kind == "analytical":
        return "analytical"
    return f"{Path(spec[4:]).stem}-{ctrl.net.variant}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, cfg):
    seed = _pick(args.seed, cfg, "generator", "seed", cfg.get("seed", 0))
    profile = _pick(args.profile, cfg, "generator", "profile", "regular")
    count = 1000 if args.full else _pick(args.count, cfg, "generator", "count", 100)
    gen = profile_config(profile, _pick(args.agents, cfg, "generator", "agents"),
                         _pick(args.visibility, cfg, "generator", "visibility", 1.0), seed,
                         _pick(args.vr, cfg, "generator", "vr"))
    ds = generate_dataset(gen, count, profile=profile,
                          jobs=_pick(args.jobs, cfg, "generator", "jobs", _default_jobs()))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.write(out)
    write_manifest(out, "gen", {"generator": ds.header(), "seed": seed})
    print(f"wrote {len(ds)} constellations to {out}")


def cmd_train(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    cur_cfg = cfg.get("curriculum", {})
    if args.curriculum == "builtin":
        stages = list(BUILTIN_CURRICULUM)
    else:
        stages = [CurriculumStage(**s) for s in json.loads(Path(args.curriculum).read_text())]
    if "custom" in cur_cfg:
        stages = [CurriculumStage(**s) for s in cur_cfg["custom"]]
    stages = select_stages(
        stages,
        groups=_pick(args.groups, cfg, "curriculum", "groups"),
        stage_ids=_parse_ids(_pick(args.stages, cfg, "curriculum", "stages")),
        max_epochs=_pick(args.max_epochs, cfg, "curriculum", "max_epochs"),
        environments=_pick(args.environments, cfg, "curriculum", "environments"),
        steps=_pick(args.steps, cfg, "curriculum", "steps"),
    )
    if not stages:
        raise UsageError("no curriculum stages selected")
    tr = TrainConfig(
        visibility=_pick(None, cfg, "training", "visibility", 1.0),
        alpha=_pick(args.alpha, cfg, "training", "alpha", 1.0),
        beta=_pick(args.beta, cfg, "training", "beta", 1.0),
        s_max=_pick(args.s_max, cfg, "simulator", "s_max"),
        seed=seed,
        num_agents=_pick(None, cfg, "training", "num_agents", 10),
    )
    variant = _pick(args.variant, cfg, "training", "variant", "max")
    init_seed = _pick(args.init_seed, cfg, "training", "init_seed", seed)
    out = Path(args.out or cfg.get("output_dir") or "runs/train")
    out.mkdir(parents=True, exist_ok=True)
    run_curriculum(init(init_seed, variant), stages, tr, out, resume=not args.fresh)
    write_manifest(out, "train", {
        "seed": seed, "init_seed": init_seed, "variant": variant,
        "training": tr.__dict__, "stages": [s.__dict__ for s in stages]})
    print(f"trained {len(stages)} stage(s); checkpoints in {out}")


def cmd_eval(args, cfg):
    spec = _pick(args.controller, cfg, "eval", "controller")
    dataset = _pick(args.dataset, cfg, "eval", "dataset")
    if spec is None or dataset is None:
        raise UsageError("eval needs --controller and --dataset")
    ctrl = _controller(spec, _pick(args.s_max, cfg, "simulator", "s_max"))
    ds = read_dataset(dataset)
    rep = evaluate(ctrl, ds,
                   max_steps=_pick(args.max_steps, cfg, "simulator", "max_steps", DEFAULT_MAX_STEPS),
                   conv_threshold=_pick(args.conv_threshold, cfg, "simulator", "conv_threshold"),
                   jobs=_pick(args.jobs, cfg, "eval", "jobs", _default_jobs()),
                   label=_controller_label(spec, ctrl), dataset_name=Path(dataset).stem)
    out = Path(args.out or Path(dataset).with_suffix("").as_posix() + f".{rep.controller}.report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    rep.write(out)
    inputs = [dataset] + ([spec[4:]] if spec.startswith("net:") else [])
    write_manifest(out, "eval", {"controller": spec, "max_steps": rep.max_steps,
                                 "conv_threshold": rep.conv_threshold, "s_max": ctrl.s_max}, inputs)
    print(f"{rep.controller} on {rep.dataset}: convergence {rep.convergence_rate:.3f}, "
          f"mean steps {rep.mean_convergence_steps}, connected {rep.full_connectivity_rate:.3f}, "
          f"DR {rep.expected_disconnection_ratio:.2f}% -> {out}")


def cmd_compare(args, cfg):
    reports = [read_report(p) for p in args.reports]
    out = Path(args.out)
    table = compare(reports, out)
    write_manifest(out, "compare", {"reports": args.reports}, args.reports)
    print((out / "comparison.txt").read_text(), end="")
    return table


def cmd_replay(args, cfg):
    ds = read_dataset(args.dataset)
    if not 0 <= args.index < len(ds):
        raise DatasetError(f"index {args.index} out of range for {len(ds)} constellations")
    ctrl = _controller(args.controller, _pick(args.s_max, cfg, "simulator", "s_max"))
    max_steps = _pick(args.max_steps, cfg, "simulator", "max_steps", DEFAULT_MAX_STEPS)
    res, traj = rollout(ds[args.index], ctrl, ds.config.visibility, max_steps,
                        _pick(args.conv_threshold, cfg, "simulator", "conv_threshold"),
                        record_positions=True)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    traj.write_positions_csv(out)
    inputs = [args.dataset] + ([args.controller[4:]] if args.controller.startswith("net:") else [])
    write_manifest(out, "replay", {"index": args.index, "controller": args.controller,
                                   "max_steps": max_steps}, inputs)
    print(f"{len(traj)} states written to {out} (converged={res.converged})")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="antswarm", description="Decentralised bearing-only swarm gathering lab.")
    p.add_argument("--config", help="JSON run config (sections: generator, curriculum, simulator, "
                                    "training, eval)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a dataset of connected constellations")
    g.add_argument("--profile", choices=sorted(EVAL_PROFILES) + ["train10"])
    g.add_argument("--agents", type=int)
    g.add_argument("--vr", type=float, help="visibility ratio (overrides the profile)")
    g.add_argument("--visibility", type=float)
    g.add_argument("--count", type=int)
    g.add_argument("--full", action="store_true", help="1000 constellations")
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="run the training curriculum")
    t.add_argument("--curriculum", default="builtin", help="'builtin' or a JSON list of stages")
    t.add_argument("--seed", type=int)
    t.add_argument("--init-seed", type=int)
    t.add_argument("--variant", choices=["max", "mean"])
    t.add_argument("--alpha", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--s-max", type=float)
    t.add_argument("--groups", help="e.g. AB")
    t.add_argument("--stages", help="e.g. 1-8 or 1,3,5")
    t.add_argument("--max-epochs", type=int)
    t.add_argument("--environments", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--fresh", action="store_true", help="ignore existing checkpoints")
    t.add_argument("--jobs", type=int, default=1, help="training is single-worker")
    t.add_argument("--out")

    e = sub.add_parser("eval", help="evaluate a controller on a dataset")
    e.add_argument("--controller", help="'analytical' or 'net:<checkpoint>'")
    e.add_argument("--dataset")
    e.add_argument("--max-steps", type=int)
    e.add_argument("--conv-threshold", type=float)
    e.add_argument("--s-max", type=float)
    e.add_argument("--jobs", type=int)
    e.add_argument("--out")

    c = sub.add_parser("compare", help="compare evaluation reports")
    c.add_argument("--reports", nargs="+", required=True)
    c.add_argument("--out", required=True)

    r = sub.add_parser("replay", help="export one scenario's full trajectory")
    r.add_argument("--dataset", required=True)
    r.add_argument("--index", type=int, required=True)
    r.add_argument("--controller", default="analytical")
    r.add_argument("--max-steps", type=int)
    r.add_argument("--conv-threshold", type=float)
    r.add_argument("--s-max", type=float)
    r.add_argument("--out", required=True)
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare,
            "replay": cmd_replay}


def _fail(code: int, exc: BaseException) -> int:
    print(f"antswarm: error code={code} kind={type(exc).__name__} msg={json.dumps(str(exc))}",
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (DatasetError, CheckpointError, ReportError, GenerationError, FileNotFoundError,
            ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_DATA, exc)
    except (NumericError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
