"""Batch evaluation of controllers over datasets, and side-by-side comparison."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .simulator import CONVERGENCE_FRACTION, DEFAULT_MAX_STEPS, Controller, rollout

REPORT_FORMAT = "antswarm-eval-report"
REPORT_VERSION = 1
ROW_COLUMNS = ["index", "seed", "n_agents", "converged", "convergence_step", "stayed_connected",
               "largest_fraction_final", "steps_executed", "first_disconnection_step",
               "final_max_centroid_dist"]


class ReportError(ValueError):
    pass


@dataclass
class EvalReport:
    controller: str
    dataset: str
    dataset_hash: str
    visibility: float
    visibility_ratio: float
    n_agents: int
    max_steps: int
    conv_threshold: float
    n_scenarios: int = 0
    convergence_rate: float = 0.0
    mean_convergence_steps: float | None = None
    converged_count: int = 0
    excluded_fraction: float = 0.0
    full_connectivity_rate: float = 0.0
    expected_disconnection_ratio: float = 0.0
    rows: list = field(default_factory=list)
    series_mean: list = field(default_factory=list)
    series_std: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format"] = REPORT_FORMAT
        d["version"] = REPORT_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format") != REPORT_FORMAT or d.get("version") != REPORT_VERSION:
            raise ReportError("not an antswarm evaluation report (or unsupported version)")
        d = {k: v for k, v in d.items() if k not in ("format", "version")}
        try:
            return cls(**d)
        except TypeError as exc:
            raise ReportError(f"malformed report: {exc}") from exc

    def write(self, path) -> None:
        """Aggregates as JSON, with rows and series as sibling CSV files."""
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1))
        stem = path.with_suffix("")
        with open(f"{stem}.rows.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_COLUMNS)
            for r in self.rows:
                w.writerow([r[c] for c in ROW_COLUMNS])
        with open(f"{stem}.series.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "mean_max_centroid_dist", "std_max_centroid_dist"])
            for t, (m, s) in enumerate(zip(self.series_mean, self.series_std)):
                w.writerow([t, repr(m), repr(s)])


def read_report(path) -> EvalReport:
    try:
        return EvalReport.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc


def aggregate(rows: list) -> dict:
    """Report-level metrics from per-scenario rows."""
    n = len(rows)
    if n == 0:
        raise ValueError("no scenarios to aggregate")
    conv = [r for r in rows if r["converged"]]
    steps = [r["convergence_step"] for r in conv]
    dr = [100.0 * (1.0 - r["largest_fraction_final"]) for r in rows]
    return {
        "n_scenarios": n,
        "convergence_rate": len(conv) / n,
        "mean_convergence_steps": sum(steps) / len(steps) if steps else None,
        "converged_count": len(conv),
        "excluded_fraction": 1.0 - len(conv) / n,
        "full_connectivity_rate": sum(1 for r in rows if r["largest_fraction_final"] == 1.0) / n,
        "expected_disconnection_ratio": sum(dr) / n,
    }


def _series(curves: list) -> tuple[list, list]:
    # finished runs hold their last value so every step averages all scenarios
    T = max(len(c) for c in curves)
    M = np.array([c + [c[-1]] * (T - len(c)) for c in curves])
    return M.mean(axis=0).tolist(), M.std(axis=0).tolist()


def _run_one(args):
    k, seed, state, controller, V, max_steps, thr = args
    res, traj = rollout(state, controller, V, max_steps, thr)
    row = {
        "index": k,
        "seed": seed,
        "n_agents": res.n_agents,
        "converged": res.converged,
        "convergence_step": res.convergence_step,
        "stayed_connected": res.stayed_connected,
        "largest_fraction_final": res.largest_component_fraction_final,
        "steps_executed": res.steps_executed,
        "first_disconnection_step": res.first_disconnection_step,
        "final_max_centroid_dist": res.final_max_centroid_dist,
    }
    return row, traj.max_centroid_dist


def evaluate(controller: Controller, dataset: Dataset, V: float | None = None,
             max_steps: int = DEFAULT_MAX_STEPS, conv_threshold: float | None = None,
             jobs: int = 1, label: str | None = None, dataset_name: str = "") -> EvalReport:
    V = dataset.config.visibility if V is None else float(V)
    thr = CONVERGENCE_FRACTION * V if conv_threshold is None else float(conv_threshold)
    tasks = [(k, seed, st, controller, V, max_steps, thr)
             for k, (seed, st) in enumerate(zip(dataset.seeds, dataset.states))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    rows = [r for r, _ in results]
    mean, std = _series([c for _, c in results])
    rep = EvalReport(
        controller=label or controller.label,
        dataset=dataset_name or (dataset.profile or ""),
        dataset_hash=dataset.content_hash(),
        visibility=V,
        visibility_ratio=dataset.config.visibility_ratio,
        n_agents=dataset.config.num_agents,
        max_steps=max_steps,
        conv_threshold=thr,
        rows=rows,
        series_mean=mean,
        series_std=std,
    )
    for k, v in aggregate(rows).items():
        setattr(rep, k, v)
    return rep


# ---------------------------------------------------------------------------
# comparison


def _fmt(x, spec=".4g"):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return format(x, spec)


def compare(reports: list, out_dir=None) -> list:
    """Side-by-side table over the datasets every controller was evaluated on.

    Writes ``comparison.csv``/``comparison.txt`` (table), ``series.csv``
    (per-step mean/std of max centroid distance) and ``dr_cs.csv``
    (disconnection ratio and convergence steps per VR/N group) when
    ``out_dir`` is given.  Returns the table rows.
    """
    if len(reports) < 2:
        raise ReportError("compare needs at least two reports")
    # a controller seen twice on the same dataset is a distinct run
    by_ctrl: dict[str, dict[str, EvalReport]] = {}
    for r in reports:
        lab, k = r.controller, 1
        while r.dataset_hash in by_ctrl.get(lab, {}):
            k += 1
            lab = f"{r.controller}#{k}"
        by_ctrl.setdefault(lab, {})[r.dataset_hash] = r
    common = set.intersection(*(set(d) for d in by_ctrl.values()))
    if not common:
        raise ReportError("reports share no common dataset")
    datasets = sorted(common, key=lambda h: (next(iter(by_ctrl.values()))[h].visibility_ratio,
                                             next(iter(by_ctrl.values()))[h].n_agents, h))
    baseline = next((lab for lab in by_ctrl if lab.startswith("analytical")), None)

    table = []
    for h in datasets:
        for lab, reps in by_ctrl.items():
            r = reps[h]
            ratio = None
            if baseline is not None and lab != baseline:
                a = by_ctrl[baseline][h].mean_convergence_steps
                if a is not None and r.mean_convergence_steps:
                    ratio = a / r.mean_convergence_steps
            table.append({
                "dataset": r.dataset or h[:12],
                "dataset_hash": h,
                "vr": r.visibility_ratio,
                "n_agents": r.n_agents,
                "controller": lab,
                "convergence_rate": r.convergence_rate,
                "mean_convergence_steps": r.mean_convergence_steps,
                "full_connectivity_rate": r.full_connectivity_rate,
                "dr_percent": r.expected_disconnection_ratio,
                "steps_ratio_vs_analytical": ratio,
            })

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = list(table[0])
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, cols, lineterminator="\n")
            w.writeheader()
            w.writerows(table)
        shown = ["dataset", "vr", "n_agents", "controller", "convergence_rate",
                 "mean_convergence_steps", "full_connectivity_rate", "dr_percent",
                 "steps_ratio_vs_analytical"]
        cells = [shown] + [[_fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in shown]
                           for row in table]
        widths = [max(len(str(r[i])) for r in cells) for i in range(len(shown))]
        text = "\n".join("  ".join(str(v).ljust(wd) for v, wd in zip(r, widths)) for r in cells)
        (out / "comparison.txt").write_text(text + "\n")
        with open(out / "series.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "controller", "step", "mean_max_centroid_dist", "std_max_centroid_dist"])
            for h in datasets:
                for lab, reps in by_ctrl.items():
                    r = reps[h]
                    for t, (m, s) in enumerate(zip(r.series_mean, r.series_std)):
                        w.writerow([r.dataset or h[:12], lab, t, repr(m), repr(s)])
        with open(out / "dr_cs.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "vr", "n_agents", "controller", "dr_percent", "mean_convergence_steps",
                        "convergence_rate"])
            for row in table:
                w.writerow([f"VR={row['vr']:g},N={row['n_agents']}", row["vr"], row["n_agents"],
                            row["controller"], row["dr_percent"], row["mean_convergence_steps"],
                            row["convergence_rate"]])
    return table
