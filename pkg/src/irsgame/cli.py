"""Command-line interface.

Exit codes: 0 success, 1 validation or domain error, 2 I/O error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import delay_stability_bound, detect_equilibrium, direction_field
from .channel import cascade_gains, link_geometry, los_path_gain
from .dynamics import DynamicsConfig, ReplicatorField, integrate
from .errors import DomainError, NumericalError, ValidationError
from .experiments import (builtin_experiments, get_experiment, load_experiment_spec,
                          run_experiment, write_experiment)
from .io import write_json, write_table, write_trajectory
from .scenario import config_hash, load_scenario
from .utility import evaluate_strategies, net_values

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3
OUTPUT_ENV = "IRSGAME_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation errors, keeping exit code 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _default_dir():
    return Path(os.environ.get(OUTPUT_ENV, "."))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _manifest(path, argv, started, outputs, scenario=None, seed=0, **extra):
    payload = {
        "command": ["irsgame", *argv],
        "tool_version": __version__,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }
    if scenario is not None:
        payload["scenario"] = str(scenario)
        payload["scenario_sha256"] = config_hash(scenario)
    payload.update(extra)
    return write_json(path, payload)


def cmd_validate(args, argv):
    s = load_scenario(args.scenario)
    econ = evaluate_strategies(s)
    print(f"G={s.num_strategies}")
    f = s.carrier_frequency
    print("strategy      K   J[W]      r_BU[m]  r_BI[m]  r_IU[m]  |h|         |G||h_IU|   "
          "sinr        net_value")
    for st, e in zip(s.strategies, econ):
        sp, panel = s.provider_of(st), s.panel_of(st)
        r0, _ = link_geometry(sp.bs_position, s.user_position)
        r1, _ = link_geometry(sp.bs_position, panel.position)
        r2, _ = link_geometry(panel.position, s.user_position)
        k1, k2 = cascade_gains(s, r1, r2)
        print(f"{str(st):12s} {st.active_elements:3d}  {sp.power_levels[st.power_index]:<9.4g} "
              f"{r0:8.2f} {r1:8.2f} {r2:8.2f}  {abs(los_path_gain(f, r0, s.absorption_coefficient)):.4e}"
              f"  {abs(k1 * k2):.4e}  {e.sinr:.4e}  {e.net_value:.6g}")
    return EXIT_OK


def _dynamics_from_args(args):
    return DynamicsConfig(
        kind=args.kind, learning_rate=args.mu, step=args.step, horizon=args.horizon,
        delay=args.delta, order=args.beta, seed=args.seed, initial_shares=args.initial,
        stop_at_convergence=not args.full_horizon, tol_conv=args.tol)


def cmd_run(args, argv):
    started = _now()
    cfg = _dynamics_from_args(args)
    s = load_scenario(args.scenario)
    a = net_values(evaluate_strategies(s, seed=args.seed))
    traj = integrate(cfg, ReplicatorField(a, s.population, cfg.learning_rate))
    out = Path(args.output) if args.output else _default_dir() / "trajectory.csv"
    write_trajectory(out, traj)
    rep = detect_equilibrium(traj, tol=cfg.tol_conv, sustain=cfg.sustain)
    man = out.with_name(out.stem + ".manifest.json")
    _manifest(man, argv, started, [out], scenario=args.scenario, seed=args.seed,
              converged=rep.converged, time_to_converge=rep.time_to_converge,
              renormalization_total=traj.metadata["renormalization_total"])
    status = "converged" if rep.converged else "not converged"
    t = "" if rep.time_to_converge is None else f" at t={rep.time_to_converge:g}"
    print(f"{status}{t}; wrote {out} and {man}")
    return EXIT_OK


def cmd_experiment(args, argv):
    if args.list:
        for name, spec in builtin_experiments().items():
            print(f"{name:22s} {spec.figure:8s} {spec.claim}")
        return EXIT_OK
    if args.name is None:
        raise ValidationError("experiment name or spec path required; available: "
                              + ", ".join(sorted(builtin_experiments())))
    started = _now()
    path = Path(args.name)
    spec = load_experiment_spec(path) if path.suffix in (".yaml", ".yml") else get_experiment(args.name)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    result = run_experiment(spec, jobs=args.jobs)
    outdir = Path(args.output_dir) if args.output_dir else _default_dir() / spec.name
    files = write_experiment(result, outdir)
    _manifest(outdir / f"{spec.name}.manifest.json", argv, started, files,
              scenario=spec.scenario_path(), seed=spec.seed, experiment=spec.name,
              figure=spec.figure, claim=spec.claim, claim_check=result.check_passed,
              claim_detail=result.check_message, failures=result.failures)
    for f in result.failures:
        print(f"failed cell {f['sweep_value']!r}/{f['config']}: {f['error']}", file=sys.stderr)
    if result.check_passed is not None:
        print(f"claim {'holds' if result.check_passed else 'FAILS'}: {result.check_message}")
    print(f"wrote {len(files)} table(s) to {outdir}")
    return EXIT_OK


def cmd_bound(args, argv):
    s = load_scenario(args.scenario)
    a = net_values(evaluate_strategies(s, seed=args.seed))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        d = delay_stability_bound(a, args.mu, s.population)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"kappa={args.mu * a.sum() / s.population:.10g}")
    print(f"delta_star={d:.10g}")
    return EXIT_OK


def cmd_field(args, argv):
    started = _now()
    s = load_scenario(args.scenario)
    a = net_values(evaluate_strategies(s, seed=args.seed))
    fld = ReplicatorField(a, s.population, args.mu)
    ax = (args.axes[0] - 1, args.axes[1] - 1)
    closure = args.closure - 1 if args.closure else None
    eq = a / a.sum() if np.all(a > 0) else np.full(a.size, 1.0 / a.size)
    if closure is None:
        closure = next(g for g in range(a.size) if g not in ax)
    fixed = {g: float(eq[g]) for g in range(a.size) if g not in ax and g != closure}
    df = direction_field(fld, ax, fixed, closure, args.grid_n, args.t_eval)
    out = Path(args.output) if args.output else _default_dir() / "direction_field.csv"
    header = (["point", f"p_{ax[0] + 1}", f"p_{ax[1] + 1}", f"dp_{ax[0] + 1}", f"dp_{ax[1] + 1}"]
              + [f"dp_all_{g + 1}" for g in range(a.size)])
    rows = [[i, *g, *v, *full] for i, (g, v, full)
            in enumerate(zip(df.grid, df.vectors, df.full_vectors))]
    write_table(out, header, rows)
    man = out.with_name(out.stem + ".manifest.json")
    _manifest(man, argv, started, [out], scenario=args.scenario, seed=args.seed,
              closure_rule=df.closure_rule, t_eval=df.t_eval)
    print(f"wrote {len(rows)} grid points to {out}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="irsgame", description="Network-selection game simulator for "
                "IRS-assisted THz networks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a scenario and print derived quantities")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="integrate one dynamics configuration")
    r.add_argument("scenario")
    r.add_argument("--kind", choices=("classical", "delayed", "fractional"), default="classical")
    r.add_argument("--beta", type=float, default=1.0, help="Caputo order in (0, 2)")
    r.add_argument("--mu", type=float, default=math.exp(-2), help="learning rate")
    r.add_argument("--delta", type=float, default=0.0, help="information delay")
    r.add_argument("--step", type=float, default=0.01)
    r.add_argument("--horizon", type=float, default=500.0)
    r.add_argument("--tol", type=float, default=1e-6, help="convergence tolerance on |dp/dt|")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--initial", choices=("uniform", "dirichlet"), default="uniform")
    r.add_argument("--full-horizon", action="store_true",
                   help="integrate to the horizon even after convergence")
    r.add_argument("--output", help=f"trajectory CSV (default ${OUTPUT_ENV}/trajectory.csv)")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="run a built-in or YAML-defined experiment")
    e.add_argument("name", nargs="?", help="built-in name or path to a spec file")
    e.add_argument("--list", action="store_true", help="list built-in experiments")
    e.add_argument("--output-dir")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bound", help="delay-stability bound delta*")
    b.add_argument("scenario")
    b.add_argument("--mu", type=float, default=math.exp(-2))
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bound)

    f = sub.add_parser("field", help="direction field over two strategies")
    f.add_argument("scenario")
    f.add_argument("--axes", type=int, nargs=2, default=(2, 3), metavar=("A", "B"),
                   help="1-based strategy indices")
    f.add_argument("--closure", type=int, help="1-based strategy absorbing the remainder")
    f.add_argument("--grid-n", type=int, default=11)
    f.add_argument("--t-eval", type=float, default=200.0)
    f.add_argument("--mu", type=float, default=math.exp(-2))
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--output")
    f.set_defaults(func=cmd_field)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        hint = " (try a smaller --step)" if "step" not in str(exc) else ""
        print(f"numerical failure: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
