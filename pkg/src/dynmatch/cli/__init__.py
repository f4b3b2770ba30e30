"""Command line entry point: ``dynmatch <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .. import analytics as an
from .. import fluid as fl
from ..specfun import ConvergenceError
from ..sim.engine import ReplicationResult
from ..sim.oracle import TruncationError
from ..sim import run_experiment, threshold_sweep
from ..utility_models import Exponential, Uniform
from .config import ExperimentSpec, SpecError, load_spec
from .output import write_csv
from .reproduce import RUNNERS, TABLES

log = logging.getLogger("dynmatch")

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 2, 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynmatch", description="Dynamic matching market toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required, help="experiment spec file")
        p.add_argument("--out", help="output CSV path (default: stdout or [output] path)")
        p.add_argument("--seed", type=_u64, help="override base_seed")
        p.add_argument("--reps", type=int, help="override replications")
        p.add_argument("--threads", type=int, default=1, help="worker threads for replications")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("analyze", help="analytic thresholds, rates and bounds"))
    common(sub.add_parser("simulate", help="run replications of one policy"))
    common(sub.add_parser("sweep", help="evaluate a threshold grid"))
    common(sub.add_parser("fluid", help="integrate a fluid limit"))
    rp = sub.add_parser("reproduce", help="rerun a published table and compare")
    rp.add_argument("table", choices=TABLES)
    common(rp, spec_required=False)
    return ap


def _out_path(args, spec: ExperimentSpec | None) -> str | None:
    if args.out:
        return args.out
    return spec.output if spec is not None else None


def _report(rows, stream=None):
    stream = stream or sys.stdout
    width = max(len(r[0]) for r in rows)
    for name, value, note in rows:
        val = f"{value:.6g}" if isinstance(value, float) else str(value)
        stream.write(f"{name:<{width}}  {val:>14}  {note}\n")


def cmd_analyze(spec: ExperimentSpec, args) -> int:
    m, p = spec.model, spec.params
    rows = []
    if p.is_symmetric:
        rows.append(("upper_bound_rate", an.upper_bound_rate(m, p), "limit"))
        rows.append(("greedy_rate", an.greedy_rate(m, p), "finite-n corrected"))
        rows.append(("greedy_rate_limit", an.greedy_rate(m, p, corrected=False), "limit"))
        pop = an.population_threshold(m, p)
        rows.append(("population_threshold", pop.threshold, pop.auxiliary.get("rule", "n z*")))
        rows.append(("population_rate", pop.predicted_rate, "predicted"))
        rows.append(("population_fluid_point", pop.fluid_point[0], "b = s"))
        if 0.0 < m.alpha < 1.0:
            ut = an.utility_threshold_opt(m, p)
            rows.append(("utility_x_star", ut.auxiliary["x_star"], "fluid stationary point"))
            rows.append(("utility_threshold", ut.threshold, "optimal"))
            rows.append(("utility_threshold_fluid_scale", ut.auxiliary["v_scaled"], "v / m(n)"))
            rows.append(("utility_rate", ut.predicted_rate, "predicted"))
            if m.iid:
                bw = an.batch_window(p, m.alpha, scale=1.0 / getattr(m, "c", 1.0))
                rows.append(("batch_window", bw.threshold, "Delta*"))
                rows.append(("batch_upper_bound", bw.predicted_rate, "limit"))
                rows.append(("batch_matches_per_cycle", bw.auxiliary["matches_per_cycle"], "fluid"))
                rows.append(("batch_lower_bound", bw.auxiliary["lower_bound"], "limit"))
        elif isinstance(m, Exponential):
            rows.append(("utility_threshold", an.utility_threshold_heuristic_exp(p, m.nu), "heuristic"))
        elif isinstance(m, Uniform):
            rows.append(("utility_threshold", an.utility_threshold_heuristic_uniform(p, m.a, m.b), "heuristic"))
    else:
        if not 0.0 < m.alpha < 1.0:
            raise SpecError("unbalanced analysis covers heavy-tailed models (alpha in (0, 1)) only")
        ub = an.unbalanced_utility_threshold(m, p)
        rows.append(("unbalanced_s_star", ub.auxiliary["s_star"], "seller fluid level"))
        rows.append(("unbalanced_b_star", ub.auxiliary["b_star"], "buyer fluid level"))
        rows.append(("unbalanced_tau_star", ub.auxiliary["tau_star"], ""))
        rows.append(("unbalanced_threshold", ub.threshold, "v_b = v_s"))
        rows.append(("unbalanced_rate", ub.predicted_rate, "predicted"))
        if m.iid:
            bw = an.unbalanced_batch_window(p, m.alpha, scale=1.0 / getattr(m, "c", 1.0))
            rows.append(("batch_window", bw.threshold, "Delta*"))
            rows.append(("batch_upper_bound", bw.predicted_rate, "limit"))
    _report(rows)
    out = _out_path(args, spec)
    if out:
        write_csv(out, ["quantity", "value", "note"], rows)
    return EXIT_OK


def _summary_lines(s) -> list[str]:
    lines = [f"mean_rate {s.mean_rate!r}", f"ci_95 [{s.ci_low!r}, {s.ci_high!r}]"]
    if s.ci_degenerate:
        lines.append("ci_note single replication; interval is degenerate")
    lines += [f"abandon_frac_b {s.abandon_frac_b!r}", f"abandon_frac_s {s.abandon_frac_s!r}",
              f"matches_per_unit_time {s.mean_matches_per_unit_time!r}",
              f"replications {s.replications}"]
    if not s.ci_degenerate:
        lo, hi = s.spread_band
        lines.append(f"replication_band_95 [{lo!r}, {hi!r}]")
    return lines


def cmd_simulate(spec: ExperimentSpec, args) -> int:
    cfg = spec.sim_config()
    s = run_experiment(cfg, threads=args.threads)
    out = _out_path(args, spec)
    write_csv(out, ReplicationResult.CSV_FIELDS, (r.csv_row() for r in s.per_replication))
    stream = sys.stderr if out in (None, "-") else sys.stdout
    stream.write("\n".join(_summary_lines(s)) + "\n")
    return EXIT_OK


def _suffixed(path: str | None, target: str | None, many: bool) -> str | None:
    if path in (None, "-") or not many:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{target}{p.suffix}"))


def cmd_sweep(spec: ExperimentSpec, args) -> int:
    if not spec.grid:
        raise SpecError(f"{spec.source}: [sweep] grid is missing or empty")
    cfg = spec.sim_config()
    out = _out_path(args, spec)
    many = len(spec.targets) > 1
    for target in spec.targets:
        sweep = threshold_sweep(cfg, spec.grid, spec.common_random_numbers, target=target,
                                threads=args.threads)
        best = max(range(len(sweep)), key=lambda i: sweep[i][1].mean_rate)
        rows = [(x, s.mean_rate, s.ci_low, s.ci_high, int(i == best))
                for i, (x, s) in enumerate(sweep)]
        write_csv(_suffixed(out, target, many), ["threshold", "mean", "ci_low", "ci_high", "argmax"], rows)
        label = target or "threshold"
        msg = f"argmax {label} = {sweep[best][0]!r}, mean {sweep[best][1].mean_rate!r}\n"
        (sys.stderr if out in (None, "-") else sys.stdout).write(msg)
    return EXIT_OK


def _fluid_value(text: str, default: float) -> float:
    return default if text.strip().lower() == "optimal" else float(text)


def cmd_fluid(spec: ExperimentSpec, args) -> int:
    f = spec.fluid
    if not f:
        raise SpecError(f"{spec.source}: a [fluid] section is required")
    kind = f.get("kind", "population")
    m, p = spec.model, spec.params
    t_end = float(f.get("t_end", 50.0))
    dt = float(f.get("dt", 1e-3))
    b0, s0 = float(f.get("b0", 0.0)), float(f.get("s0", 0.0))
    if kind == "population":
        if not p.is_symmetric:
            raise SpecError("population fluid needs symmetric rates")
        z_default = an.population_threshold(m, p).fluid_point[0] if m.alpha > 0 else 0.0
        z = _fluid_value(f.get("z", "optimal"), z_default)
        traj = fl.integrate_population_fluid(z, p.lam, p.eta, b0, s0, t_end, dt)
    elif kind == "utility":
        if not p.is_symmetric:
            raise SpecError("use kind = unbalanced for asymmetric rates")
        opt = an.utility_threshold_opt(m, p).auxiliary["v_scaled"] if 0 < m.alpha < 1 else math.nan
        v = _fluid_value(f.get("v", "optimal"), opt)
        traj = fl.integrate_utility_fluid(v, m, p.lam, p.eta, b0, s0, t_end, dt)
    elif kind == "unbalanced":
        opt = an.unbalanced_utility_threshold(m, p).auxiliary["v_scaled"]
        vb = _fluid_value(f.get("vb", "optimal"), opt)
        vs = _fluid_value(f.get("vs", "optimal"), opt)
        traj = fl.integrate_unbalanced_fluid(vb, vs, m, p, b0, s0, t_end, dt)
    elif kind == "batch":
        delta_default = an.unbalanced_batch_window(p, m.alpha).threshold if 0 < m.alpha < 1 else math.nan
        delta = _fluid_value(f.get("delta", "optimal"), delta_default)
        traj = fl.integrate_batch_fluid(p, delta, int(f.get("cycles", 20)), b0, s0)
    else:
        raise SpecError(f"unknown fluid kind {kind!r}; use population, utility, unbalanced or batch")
    out = _out_path(args, spec)
    write_csv(out, ["time", "b_bar", "s_bar", "l"], traj.rows())
    b, s = traj.terminal
    msg = f"terminal b_bar {b!r} s_bar {s!r}\n"
    if kind == "batch":
        msg += f"pre-match level (last cycle) {float(traj.meta['pre_match'][-1])!r}\n"
    (sys.stderr if out in (None, "-") else sys.stdout).write(msg)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    runner = RUNNERS[args.table]
    cells = runner(seed=args.seed, reps=args.reps, threads=args.threads,
                   log=lambda msg: log.info(msg))
    width = max(len(c.name) for c in cells)
    print(f"{'cell':<{width}}  {'published':>12}  {'run':>12}  {'rel_err':>8}  ci_95")
    for c in cells:
        ci = "" if math.isnan(c.ci_low) else f"[{c.ci_low:.6g}, {c.ci_high:.6g}]"
        print(f"{c.name:<{width}}  {c.published:>12.6g}  {c.run:>12.6g}  {100 * c.rel_err:>7.2f}%  {ci}")
    if args.out:
        write_csv(args.out, ["cell", "published", "run", "ci_low", "ci_high", "rel_err"],
                  [(c.name, float(c.published), c.run, c.ci_low, c.ci_high, c.rel_err) for c in cells])
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "fluid": cmd_fluid}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.reps is not None and args.reps < 1:
            raise SpecError("--reps must be >= 1")
        if args.threads < 1:
            raise SpecError("--threads must be >= 1")
        if args.command == "reproduce":
            return cmd_reproduce(args)
        spec = load_spec(args.spec).with_overrides(args.seed, args.reps)
        return COMMANDS[args.command](spec, args)
    except (ConvergenceError, TruncationError) as exc:
        print(f"error: numerical convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
