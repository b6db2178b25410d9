"""Command-line entry point: ``gridalloc generate|run|dgap|verify|sweep|replay``.

Exit codes: 0 ok, 1 validation error (or a failed verification), 2 cap or
limit error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .errors import CapacityError, InputError
from .learning import LearnerConfig, ScheduleParams, Variant, run_learner, validate_schedules
from .model import objective
from .multistage import segment_timeline

EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_IO = 0, 1, 2, 3


def _learner_args(p: argparse.ArgumentParser, variant: bool = True) -> None:
    if variant:
        p.add_argument("--variant", choices=[v.value for v in Variant], default="setvbrp")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--tmax", type=int, default=500)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.2)
    p.add_argument("--xi", type=float, default=0.1, help="temperature decay per iteration")
    p.add_argument("--eps-upper", type=float, default=15.4)
    p.add_argument("--eps-lower", type=float, default=1.0)
    p.add_argument("--omega-lower", type=float, default=0.06)
    p.add_argument("--phi", type=float, default=0.005, help="growth rate of the sampled fraction")
    p.add_argument("--seed", type=int, default=0, help="seed of the first run; run r uses seed + r")
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--no-traces", action="store_true", help="skip per-run trace files")
    p.add_argument("-o", "--out", default="results")


def _config(args, variant: str | None = None) -> LearnerConfig:
    sched = ScheduleParams(eps_upper=args.eps_upper, eps_lower=args.eps_lower, xi=args.xi, tau=args.tau,
                           omega_lower=args.omega_lower, phi_ratio=args.phi, t_max=args.tmax)
    problems = validate_schedules(sched)
    if problems:
        raise InputError("; ".join(problems))
    return LearnerConfig(variant=variant or args.variant, schedules=sched, theta=args.theta,
                         seed=args.seed, early_stop=not args.no_early_stop)


def _scenario(args):
    from .scenario_io import generate_scenario, load_scenario, preset_spec

    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return generate_scenario(preset_spec(args.preset, args.scenario_seed))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridalloc", description="Satellite-to-grid allocation by potential-game learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario")
    p.add_argument("--preset", choices=["regional", "global"], default="regional")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--load-growth", default="", help="comma-separated per-stage load factors, e.g. 1,1.2,1.4")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("run", help="repeated single-stage learning on the first stage")
    p.add_argument("--scenario", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--oracle", choices=["auto", "off"], default="auto")
    _learner_args(p)

    p = sub.add_parser("dgap", help="repeated multistage runs")
    p.add_argument("--scenario", required=True)
    p.add_argument("--warm-start", action="store_true")
    _learner_args(p)

    p = sub.add_parser("verify", help="oracle and property checks on every stage")
    p.add_argument("--scenario", required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=2_000_000, help="largest joint action space to scan")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="mean objective across values of one parameter")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario")
    src.add_argument("--preset", choices=["regional", "global"], default="regional")
    p.add_argument("--scenario-seed", type=int, default=0)
    p.add_argument("--param", default="tau")
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    _learner_args(p)

    p = sub.add_parser("replay", help="re-run a run.json manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("-o", "--out", required=True)
    return parser


def _print_summary(experiments) -> None:
    print(f"{'variant':<22}{'worst':>9}{'best':>9}{'mean':>10}{'time_s':>10}{'variance':>10}{'n_best':>8}")
    for e in experiments:
        s = e.stats
        print(f"{e.label:<22}{s.worst:>9.3f}{s.best:>9.3f}{s.mean:>10.3f}{s.time_s:>10.4f}"
              f"{s.variance:>10.3f}{s.n_best:>5d} ({s.n_best_mode})")


def cmd_generate(args) -> int:
    from dataclasses import replace

    from .scenario_io import generate_scenario, preset_spec, save_scenario

    spec = preset_spec(args.preset, args.seed)
    if args.load_growth:
        growth = tuple(float(v) for v in args.load_growth.split(","))
        spec = replace(spec, load_growth=growth, horizon=(0, spec.dt * len(growth)))
    scenario = generate_scenario(spec)
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {len(scenario.satellites)} satellites, {len(scenario.grids)} grids, "
          f"{len(scenario.windows)} windows")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiment import emit_results, run_experiment

    scenario = _scenario(args)
    exp = run_experiment(scenario, _config(args), args.runs, oracle=args.oracle, workers=args.workers)
    emit_results([exp], args.out, scenario, command="run", traces=not args.no_traces)
    _print_summary([exp])
    return EXIT_OK


def cmd_dgap(args) -> int:
    from .experiment import emit_results, run_dgap_experiment

    scenario = _scenario(args)
    exps = run_dgap_experiment(scenario, _config(args), args.runs, warm_start=args.warm_start)
    emit_results(exps, args.out, scenario, command="dgap", extra={"warm_start": args.warm_start},
                 traces=not args.no_traces)
    _print_summary(exps)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .experiment import emit_results, run_sweep, sweep_values

    scenario = _scenario(args)
    values = sweep_values(args.start, args.stop, args.step)
    exps = run_sweep(scenario, _config(args), args.param, values, args.runs, workers=args.workers)
    emit_results(exps, args.out, scenario, command="sweep", extra={"param": args.param},
                 traces=not args.no_traces)
    _print_summary(exps)
    return EXIT_OK


def cmd_replay(args) -> int:
    from .experiment import replay

    _print_summary(replay(args.manifest, args.out))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .oracle import (
        brute_force_optimum,
        brute_force_utility_optimum,
        check_exact_potential,
        is_nash_equilibrium,
        sandwich_bound_check,
    )

    scenario = _scenario(args)
    ok, skipped = True, 0
    eps = args.eps
    rng = np.random.default_rng(args.seed)
    for stage in segment_timeline(scenario):
        head = f"stage {stage.index} [{stage.start}, {stage.start + stage.length})"
        if stage.is_idle:
            print(f"{head}: idle")
            continue
        try:
            report = brute_force_optimum(stage, cap=args.cap, max_profiles=1)
            best = brute_force_utility_optimum(stage, eps, cap=args.cap)
        except CapacityError as exc:
            print(f"{head}: skipped ({exc})")
            skipped += 1
            continue
        nash = is_nash_equilibrium(stage, best, eps)
        gap = objective(stage, best) - report.optimum
        within = -1e-9 <= gap <= eps * math.log(stage.m) + 1e-9
        lo, h, hi = sandwich_bound_check(stage, best, eps)
        sandwich = lo - 1e-9 <= h <= hi + 1e-9
        pot = check_exact_potential(stage, eps, args.samples, rng)
        cfg = LearnerConfig(seed=args.seed, schedules=ScheduleParams(eps_lower=eps))
        learned, _ = run_learner(stage, cfg)
        learned_nash = is_nash_equilibrium(stage, learned, eps)
        checks = {"optimum_is_nash": nash, "gap_within_eps_log_m": within, "sandwich": sandwich,
                  "exact_potential": pot.max_rel <= 1e-9, "learner_reaches_nash": learned_nash}
        ok &= all(checks.values())
        flags = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
        print(f"{head}: optimum={report.optimum:g} joint={report.joint_size} {flags}")
    if not ok:
        return EXIT_INVALID
    return EXIT_CAP if skipped else EXIT_OK


_COMMANDS = {"generate": cmd_generate, "run": cmd_run, "dgap": cmd_dgap, "verify": cmd_verify,
             "sweep": cmd_sweep, "replay": cmd_replay}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
