"""``smi`` command line: single-point evaluation, figure sweeps, optimisation."""
import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .io import write_csv, write_precoder
from .manifold import (
    ArmijoConfig,
    OptimizerConfig,
    baseline_ub_precoder,
    optimize_precoder,
)
from .model import build_correlations, eigenbeam_precoder, random_precoder
from .montecarlo import smi_monte_carlo
from .rmt import dof_bounds, smi_asymptotic, smi_lower_bound, smi_upper_bound

log = logging.getLogger("smisense")

OUTPUT_DIR_ENV = "SMI_OUTPUT_DIR"
ORDER_SLACK = 1e-9

SWEEP_COLUMNS = [
    "sweep_value", "smi_asymptotic", "smi_upper", "smi_lower", "smi_mc_mean",
    "smi_mc_stderr", "dof_lower", "dof_upper", "wall_time_ms",
]
FIG3_COLUMNS = SWEEP_COLUMNS + ["arm", "iterations", "termination"]
TRACE_COLUMNS = ["iter", "objective", "grad_norm", "step", "backtracks"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


@dataclass
class SweepRow:
    sweep_value: object
    smi_asymptotic: float
    smi_upper: float
    smi_lower: float
    smi_mc_mean: float
    smi_mc_stderr: float
    dof_lower: int
    dof_upper: int
    wall_time_ms: float = 0.0

    def check_order(self):
        tol = ORDER_SLACK * max(1.0, abs(self.smi_upper))
        if not (self.smi_lower <= self.smi_asymptotic + tol
                and self.smi_asymptotic <= self.smi_upper + tol):
            raise NumericalFailure(
                f"bound ordering violated at {self.sweep_value}: lower={self.smi_lower}, "
                f"asymptotic={self.smi_asymptotic}, upper={self.smi_upper}"
            )
        return self

    def in_units(self, log_base):
        if log_base == "nats":
            return self
        c = 1.0 / np.log(2.0)
        return SweepRow(self.sweep_value, self.smi_asymptotic * c, self.smi_upper * c,
                        self.smi_lower * c, self.smi_mc_mean * c, self.smi_mc_stderr * c,
                        self.dof_lower, self.dof_upper, self.wall_time_ms)


def _optimizer_config(cfg, objective=None):
    run = cfg.run
    return OptimizerConfig(
        max_iters=run.max_iters,
        grad_norm_tol=run.grad_norm_tol,
        armijo=ArmijoConfig(),
        objective=objective or run.objective,
        init=run.init,
        seed=run.seed,
    )


def _precoder(cfg, corr, scenario):
    run = cfg.run
    if run.precoder == "eigenbeam":
        f = eigenbeam_precoder(corr, scenario.n_targets, scenario.power_budget)
    elif run.precoder == "scaled-random":
        f = random_precoder(corr.n_tx, scenario.n_targets, scenario.power_budget, run.seed)
    else:
        f = optimize_precoder(corr, scenario, _optimizer_config(cfg)).precoder
    return f * np.sqrt(run.precoder_scale)


def evaluate_point(corr, f, scenario, n_trials, seed, sweep_value="", timing=False):
    """All estimates for one scenario/precoder pair."""
    t0 = time.perf_counter()
    mc = smi_monte_carlo(corr, f, scenario, n_trials, seed)
    dof = dof_bounds(scenario, f)
    row = SweepRow(
        sweep_value=sweep_value,
        smi_asymptotic=smi_asymptotic(corr, f, scenario).nats,
        smi_upper=smi_upper_bound(corr, f, scenario).nats,
        smi_lower=smi_lower_bound(corr, f, scenario).nats,
        smi_mc_mean=mc.mean_nats,
        smi_mc_stderr=mc.stderr,
        dof_lower=dof.lower,
        dof_upper=dof.upper,
    )
    if timing:
        row.wall_time_ms = 1e3 * (time.perf_counter() - t0)
    return row.check_order()


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(i, x) for i, x in enumerate(items)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(len(items)), items))


def cmd_eval(cfg, timing=False, jobs=1):
    scenario = cfg.build_scenario()
    corr = build_correlations(cfg.build_targets(scenario), scenario)
    f = _precoder(cfg, corr, scenario)
    row = evaluate_point(corr, f, scenario, cfg.run.n_trials, cfg.run.seed, timing=timing)
    return [asdict(row.in_units(cfg.run.log_base))], SWEEP_COLUMNS


def cmd_fig1(cfg, timing=False, jobs=1):
    """SMI against the number of frames with targets and precoder held fixed."""
    scenario = cfg.build_scenario()
    corr = build_correlations(cfg.build_targets(scenario), scenario)
    f = _precoder(cfg, corr, scenario)

    def point(i, n_frames):
        sc = scenario.replace(n_frames=int(n_frames))
        return evaluate_point(corr, f, sc, cfg.run.n_trials, (cfg.run.seed, i),
                              n_frames, timing)

    rows = _map(point, cfg.run.grid, jobs)
    return [asdict(r.in_units(cfg.run.log_base)) for r in rows], SWEEP_COLUMNS


def cmd_fig2(cfg, timing=False, jobs=1):
    """SMI against the number of targets at fixed N_S."""
    base = cfg.build_scenario()

    def point(i, k):
        sc = base.replace(n_targets=int(k))
        corr = build_correlations(cfg.build_targets(sc), sc)
        f = _precoder(cfg, corr, sc)
        return evaluate_point(corr, f, sc, cfg.run.n_trials, (cfg.run.seed, i), k, timing)

    rows = _map(point, cfg.run.grid, jobs)
    return [asdict(r.in_units(cfg.run.log_base)) for r in rows], SWEEP_COLUMNS


def cmd_fig3(cfg, timing=False, jobs=1):
    """Both precoding arms against SNR, scored by the asymptotic SMI and Monte-Carlo."""
    base = cfg.build_scenario()

    def point(i, snr_db):
        sc = base.replace(snr_db=float(snr_db))
        corr = build_correlations(cfg.build_targets(sc), sc)
        out = []
        for arm, runner in (("proposed", optimize_precoder), ("baseline", baseline_ub_precoder)):
            t0 = time.perf_counter()
            trace = runner(corr, sc, _optimizer_config(cfg, "asymptotic-smi"))
            row = evaluate_point(corr, trace.precoder, sc, cfg.run.n_trials,
                                 (cfg.run.seed, i), snr_db)
            if timing:
                row.wall_time_ms = 1e3 * (time.perf_counter() - t0)
            if trace.termination == "line-search-failure":
                log.info("snr %s dB, %s arm: line-search failure after %d iterations",
                         snr_db, arm, trace.n_iters)
            d = asdict(row.in_units(cfg.run.log_base))
            d.update(arm=arm, iterations=trace.n_iters, termination=trace.termination)
            out.append(d)
        return out

    rows = [r for pair in _map(point, cfg.run.grid, jobs) for r in pair]
    return rows, FIG3_COLUMNS


def cmd_optimize(cfg):
    scenario = cfg.build_scenario()
    corr = build_correlations(cfg.build_targets(scenario), scenario)
    trace = optimize_precoder(corr, scenario, _optimizer_config(cfg))
    c = 1.0 if cfg.run.log_base == "nats" else 1.0 / np.log(2.0)
    rows = [
        {"iter": r.iteration, "objective": r.objective * c, "grad_norm": r.grad_norm,
         "step": r.step, "backtracks": r.backtracks}
        for r in trace.records
    ]
    return rows, trace


COMMAND_FUNCS = {"eval": cmd_eval, "fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3}


def _output_path(out, command, suffix=".csv"):
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out:
        p = Path(out)
        return p if p.is_absolute() or not env_dir else Path(env_dir) / p
    if env_dir:
        return Path(env_dir) / f"{command}{suffix}"
    return None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smi",
        description="Sensing mutual information with random signals: "
                    "evaluation, figure sweeps and precoder optimisation.",
    )
    parser.add_argument("command", choices=["eval", "fig1", "fig2", "fig3", "optimize"])
    parser.add_argument("--config", help="INI config with [scenario], [targets], [run]")
    parser.add_argument("--profile", choices=["desk", "paper"], default="desk")
    parser.add_argument("--seed", type=int, help="override [run] seed")
    parser.add_argument("--out", help=f"output path (relative to ${OUTPUT_DIR_ENV} if set)")
    parser.add_argument("--units", choices=["nats", "bits"], help="override [run] log_base")
    parser.add_argument("--jobs", type=int, default=1, help="sweep points run concurrently")
    parser.add_argument("--timing", action="store_true",
                        help="fill wall_time_ms (output is then not reproducible)")
    parser.add_argument("--save-config", help="write the resolved config to this path")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config, args.profile, args.command)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.units is not None:
        cfg.run.log_base = args.units
    out = args.out or cfg.run.output
    if args.save_config:
        cfg.save(args.save_config)

    if args.command == "optimize":
        rows, trace = cmd_optimize(cfg)
        path = _output_path(out, "optimize_trace") or Path("optimize_trace.csv")
        write_csv(rows, TRACE_COLUMNS, path)
        write_precoder(trace.precoder, path.with_suffix(".precoder.txt"))
        log.info("optimize: %s after %d iterations", trace.termination, trace.n_iters)
        return EXIT_OK

    rows, columns = COMMAND_FUNCS[args.command](cfg, timing=args.timing, jobs=args.jobs)
    path = _output_path(out, args.command)
    text = write_csv(rows, columns, path)
    if path is None:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError,
            NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
