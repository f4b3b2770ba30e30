"""Canonical reproduction runs: published value next to the simulated value."""
from __future__ import annotations

from dataclasses import dataclass, replace

from ..analytics import batch_window, unbalanced_utility_threshold
from ..sim import run_experiment, threshold_sweep
from .config import ExperimentSpec, bundled_spec

TABLES = ("table2", "table3", "unbalanced", "batch")


@dataclass
class Cell:
    name: str
    published: float
    run: float
    ci_low: float = float("nan")
    ci_high: float = float("nan")

    @property
    def rel_err(self) -> float:
        return (self.run - self.published) / self.published if self.published else float("nan")


def _spec(name: str, seed: int | None, reps: int | None) -> ExperimentSpec:
    return bundled_spec(name).with_overrides(seed, reps)


def _sim(name, seed, reps, threads):
    return run_experiment(_spec(name, seed, reps).sim_config(), threads=threads)


def table2(seed=None, reps=None, threads=1, log=print) -> list[Cell]:
    published = {
        "exp": (4833, 4833, 3462),
        "pareto": (22095, 22102, 8259),
        "uniform": (908.4, 946.3, 908.4),
    }
    cells = []
    for fam, (theory, best, greedy) in published.items():
        for col, value in (("theory", theory), ("sim", best), ("greedy", greedy)):
            s = _sim(f"table2_{fam}_{col}.ini", seed, reps, threads)
            cells.append(Cell(f"{fam} {col} threshold rate" if col != "greedy" else f"{fam} greedy rate",
                              value, s.mean_rate, s.ci_low, s.ci_high))
            log(f"  done {cells[-1].name}")
    return cells


def table3(seed=None, reps=None, threads=1, log=print) -> list[Cell]:
    published = {
        "exp": (4833, 0.140, 5732, 0.150),
        "pareto": (22102, 0.334, 43750, 0.503),
        "uniform": (946.3, 0.027, 963.0, 0.021),
    }
    cells = []
    for fam, (pr, pa, ur, ua) in published.items():
        s = _sim(f"table2_{fam}_sim.ini", seed, reps, threads)
        cells.append(Cell(f"{fam} population rate", pr, s.mean_rate, s.ci_low, s.ci_high))
        cells.append(Cell(f"{fam} population abandoned", pa, s.abandon_frac_b))
        s = _sim(f"table3_{fam}_utility.ini", seed, reps, threads)
        cells.append(Cell(f"{fam} utility rate", ur, s.mean_rate, s.ci_low, s.ci_high))
        cells.append(Cell(f"{fam} utility abandoned", ua, s.abandon_frac_b))
        log(f"  done {fam}")
    return cells


def _argmax(sweep):
    return max(sweep, key=lambda item: item[1].mean_rate)


def unbalanced(seed=None, reps=None, threads=1, log=print) -> list[Cell]:
    spec = _spec("unbalanced.ini", seed, reps)
    sol = unbalanced_utility_threshold(spec.model, spec.params)
    s = run_experiment(spec.sim_config(), threads=threads)
    cells = [
        Cell("predicted threshold", 52.7, sol.threshold),
        Cell("predicted rate", 70992, sol.predicted_rate),
        Cell("rate at (52.7, 52.7)", 71010, s.mean_rate, s.ci_low, s.ci_high),
        Cell("buyer abandoned at (52.7, 52.7)", 0.681, s.abandon_frac_b),
        Cell("seller abandoned at (52.7, 52.7)", 0.363, s.abandon_frac_s),
    ]
    log("  done center point")
    fig = _spec("unbalanced_fig1.ini", seed, None if reps is None else min(reps, 20))
    cfg = fig.sim_config()
    for target, ref in (("v_b", 52.7), ("v_s", 52.3)):
        sweep = threshold_sweep(cfg, fig.grid, fig.common_random_numbers, target=target, threads=threads)
        best, summ = _argmax(sweep)
        cells.append(Cell(f"sweep argmax {target}", ref, best, summ.ci_low, summ.ci_high))
        log(f"  done sweep {target}")
    return cells


def batch(seed=None, reps=None, threads=1, log=print) -> list[Cell]:
    spec = _spec("batch_sweep.ini", seed, reps)
    sol = batch_window(spec.params, spec.model.alpha, scale=1.0 / spec.model.c)
    sweep = threshold_sweep(spec.sim_config(), spec.grid, spec.common_random_numbers, threads=threads)
    best, _ = _argmax(sweep)
    at = dict(sweep)
    s = at.get(0.75) or run_experiment(replace(spec.sim_config()), threads=threads)
    per_cycle = sum(r.mean_batch_matches for r in s.per_replication) / len(s.per_replication)
    return [
        Cell("analytic window", 0.76, sol.threshold),
        Cell("analytic upper bound", 28644, sol.predicted_rate),
        Cell("sweep argmax window", 0.75, best),
        Cell("rate at 0.75", 25168, s.mean_rate, s.ci_low, s.ci_high),
        Cell("matches per cycle at 0.75", 532, per_cycle),
    ]


RUNNERS = {"table2": table2, "table3": table3, "unbalanced": unbalanced, "batch": batch}
