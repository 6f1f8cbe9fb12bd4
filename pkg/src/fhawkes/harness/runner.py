"""Monte Carlo orchestration over replications."""

from __future__ import annotations

import logging
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ExperimentError, HawkesError
from ..indeptest import run_independence_test
from ..model import model_to_theta
from ..simulate import SimConfig, replication_rng, simulate_hawkes
from ..whittle import FitOptions, mle_fit, whittle_fit
from .metrics import median_iqr, relative_error
from .presets import REJECTION_RATE, ExperimentPreset, get_preset, preset_models

log = logging.getLogger(__name__)

FAILURE_LIMIT = 0.10


@dataclass(frozen=True)
class Task:
    preset: str
    rep: int
    T_index: int
    T: float
    cell_index: int = 0
    estimators: tuple = ("whittle",)
    mt_rules: tuple = ("TlogT",)
    seed: int = 0


@dataclass
class Outcome:
    """One estimator applied to one simulated log."""

    estimator: str
    rule: str | None
    value: float | None
    theta_hat: tuple | None = None
    converged: bool | None = None
    seconds: float = 0.0
    error: str | None = None


@dataclass
class TaskResult:
    task: Task
    n_events: int
    outcomes: list = field(default_factory=list)


def run_task(task: Task) -> TaskResult:
    preset = get_preset(task.preset)
    cell, model = preset_models(preset)[task.cell_index]
    rng = replication_rng(task.seed, task.rep, task.T_index, task.cell_index)
    cfg = SimConfig(task.T, seed=task.seed, burn_in=preset.burn_in_factor * task.T)
    events = simulate_hawkes(model, cfg, rng)
    result = TaskResult(task, len(events))
    par = preset.parameterization
    theta0 = model_to_theta(par, model)
    for est in task.estimators:
        rules = task.mt_rules if est in ("whittle", "independence") else (None,)
        for rule in rules:
            start = time.perf_counter()
            try:
                if est == "independence":
                    rep = run_independence_test(events, rule)
                    out = Outcome(est, rule, rep.p_value)
                else:
                    if est == "whittle":
                        fit = whittle_fit(events, par, FitOptions(mt_rule=rule))
                    else:
                        fit = mle_fit(events, par, FitOptions())
                    out = Outcome(est, rule, relative_error(fit.theta_hat, theta0), fit.theta_hat, fit.converged)
            except HawkesError as exc:
                out = Outcome(est, rule, None, error=f"{type(exc).__name__}: {exc}")
            out.seconds = time.perf_counter() - start
            result.outcomes.append(out)
    return result


def _init_worker():
    import numba

    numba.set_num_threads(1)


def run_tasks(tasks: list[Task], threads: int = 1) -> list[TaskResult]:
    """Results come back in task order whatever the worker count."""
    if threads <= 1 or len(tasks) <= 1:
        return [run_task(t) for t in tasks]
    # Spawned workers: forking after numba has started its OpenMP pool is unsafe.
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx, initializer=_init_worker) as pool:
        return list(pool.map(run_task, tasks, chunksize=1))


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass
class ExperimentResult:
    preset: ExperimentPreset
    results: list
    alpha: float = 0.05

    def outcomes(self):
        for r in self.results:
            for o in r.outcomes:
                yield r.task, o

    def failure_fraction(self) -> float:
        outs = [o for _, o in self.outcomes()]
        return sum(o.value is None for o in outs) / max(len(outs), 1)

    def failures(self) -> list[str]:
        return [f"rep={t.rep} T={t.T:g} cell={t.cell_index} {o.estimator}/{o.rule}: {o.error}"
                for t, o in self.outcomes() if o.value is None]

    def groups(self) -> dict:
        """(T, cell_index, estimator, rule) -> list of values in replication order."""
        out: dict = {}
        for t, o in sorted(self.outcomes(), key=lambda x: (x[0].T, x[0].cell_index, x[0].rep)):
            if o.value is not None:
                out.setdefault((t.T, t.cell_index, o.estimator, o.rule), []).append(o.value)
        return out

    def timings(self) -> dict:
        out: dict = {}
        for t, o in self.outcomes():
            out.setdefault((t.T, o.estimator, o.rule), []).append(o.seconds)
        return {k: float(np.median(v)) for k, v in sorted(out.items(), key=lambda kv: str(kv[0]))}

    def rejection_rates(self) -> dict:
        return {k: float(np.mean(np.asarray(v) < self.alpha)) for k, v in self.groups().items()}

    def table(self) -> str:
        if self.preset.metric == REJECTION_RATE:
            return format_rejection_table(self)
        return format_error_table(self)


def _column(est: str, rule) -> str:
    return "MLE" if est == "mle" else f"WE M_T={rule}"


def format_error_table(res: ExperimentResult) -> str:
    """Median (IQR) of relative errors; one row per T, one column per estimator."""
    groups = res.groups()
    cols = sorted({(k[2], k[3] or "") for k in groups}, key=lambda c: (c[0] != "mle", c[1]))
    header = ["DGP"] + [_column(e, r) for e, r in cols]
    rows = [header]
    for T in sorted({k[0] for k in groups}):
        row = [f"{res.preset.name} T={T:g}"]
        for e, r in cols:
            vals = groups.get((T, 0, e, r or None), [])
            med, iqr = median_iqr(vals)
            row.append(f"{med:.4f}({iqr:.4f})")
        rows.append(row)
    return _render(rows)


def format_rejection_table(res: ExperimentResult) -> str:
    """Percentage of rejections at level alpha on the (a, b) grid."""
    rates = res.rejection_rates()
    cells = preset_models(res.preset)
    a_vals = sorted({c[0][0] for c in cells})
    b_vals = sorted({c[0][1] for c in cells})
    index = {c[0]: i for i, c in enumerate(cells)}
    T = res.preset.T[0] if not res.results else res.results[0].task.T
    rows = [["a \\ b"] + [f"{b:g}" for b in b_vals]]
    for a in a_vals:
        row = [f"{a:g}"]
        for b in b_vals:
            key = [k for k in rates if k[1] == index[(a, b)]]
            row.append(f"{100 * rates[key[0]]:.1f}%" if key else "n/a")
        rows.append(row)
    return f"{res.preset.name} rejection percentage at alpha={res.alpha:g}, T={T:g}\n" + _render(rows)


def _render(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in rows)


def build_tasks(preset: ExperimentPreset, reps: int, T=None, mt_rules=None, estimators=None,
                seed: int = 0) -> list[Task]:
    Ts = tuple(float(t) for t in (T or preset.T))
    rules = tuple(mt_rules or preset.mt_rules)
    ests = tuple(estimators or preset.estimators)
    ncell = len(preset_models(preset))
    return [
        Task(preset.name, r, k, t, c, ests, rules, seed)
        for c in range(ncell)
        for k, t in enumerate(Ts)
        for r in range(reps)
    ]


def run_experiment(preset: ExperimentPreset | str, reps: int | None = None, T=None, mt_rules=None,
                   estimators=None, seed: int = 0, threads: int = 1, alpha: float = 0.05) -> ExperimentResult:
    """Run every replication; raises :class:`ExperimentError` above 10 % failed fits."""
    if isinstance(preset, str):
        preset = get_preset(preset)
    tasks = build_tasks(preset, reps or preset.reps, T, mt_rules, estimators, seed)
    res = ExperimentResult(preset, run_tasks(tasks, threads), alpha)
    frac = res.failure_fraction()
    if frac > FAILURE_LIMIT:
        err = ExperimentError(f"{100 * frac:.1f}% of fits failed")
        err.result = res
        raise err
    return res


def replications_csv(res: ExperimentResult) -> str:
    """Per-replication values, one row per (task, estimator, rule)."""
    lines = ["rep,T,cell,estimator,rule,value,converged,n_events"]
    for r in sorted(res.results, key=lambda x: (x.task.cell_index, x.task.T, x.task.rep)):
        t = r.task
        for o in r.outcomes:
            value = "" if o.value is None else repr(o.value)
            conv = "" if o.converged is None else str(int(o.converged))
            lines.append(f"{t.rep},{t.T:g},{t.cell_index},{o.estimator},{o.rule or ''},{value},{conv},{r.n_events}")
    return "\n".join(lines) + "\n"


def timings_text(res: ExperimentResult) -> str:
    rows = [["T", "estimator", "M_T", "median seconds"]]
    for (T, est, rule), sec in res.timings().items():
        rows.append([f"{T:g}", est, rule or "-", f"{sec:.4f}"])
    return _render(rows)
