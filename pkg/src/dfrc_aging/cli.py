"""``dfrc-aging`` command line: single-shot bounds, rates and allocations,
Monte Carlo experiments and plot rendering."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import allocation, comm
from .bounds import aged_crlb_approx, crlb_block1, predict_trajectory
from .checker import check_solution
from .config import load_config, watt_to_dbm
from .errors import ConfigError, DfrcError
from .experiments import (FIGURES, ResultTable, atomic_write, default_spec, load_spec,
                          run_to_file)
from .model import sample_scenario

EXIT_INFEASIBLE = 2


def _parse_overrides(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        out[key.strip()] = value.strip()
    return out


def _setup(args, extra_keys=()):
    overrides = _parse_overrides(args.override)
    extra = {k: overrides.pop(k) for k in extra_keys if k in overrides}
    cfg, params = load_config(args.config, overrides)
    if getattr(args, "paper_scale", False):
        from .config import paper_scale
        cfg = paper_scale(cfg)
    return cfg, params, extra


def _problem(args, cfg, params):
    scen = sample_scenario(cfg, args.seed, args.trial, params)
    return allocation.AllocationProblem(scen, cfg, params=params)


def _emit(records, fmt, out):
    if fmt == "json-lines":
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        text = buf.getvalue()
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def cmd_crlb(args) -> int:
    cfg, params, _ = _setup(args)
    problem = _problem(args, cfg, params)
    power, band = allocation.uniform_training(problem)
    records = []
    for k, target in enumerate(problem.targets):
        c1 = crlb_block1(target, power[k + 1], band[k + 1], cfg)
        traj = predict_trajectory(target, cfg.block_duration, args.blocks)
        for n in range(1, args.blocks + 1):
            aged = aged_crlb_approx(c1, traj, target.evolution_cov, n, cfg.block_duration)
            records.append({"target": k + 1, "block": n, "angle": aged.angle,
                            "distance": aged.distance, "velocity": aged.velocity})
    _emit(records, args.format, args.out)
    return 0


def cmd_rate(args) -> int:
    cfg, params, _ = _setup(args)
    problem = _problem(args, cfg, params)
    power, band = allocation.uniform_training(problem)
    p0b0 = power[0] * band[0]
    records = []
    for n in range(1, args.blocks + 1):
        gamma = comm.gamma_closed_form(problem.beta, problem.rho, p0b0, 1.0, n, args.scheme, cfg)
        rates = comm.rate(gamma, cfg.total_power / cfg.num_users, n, cfg)
        for q, r in enumerate(rates):
            records.append({"block": n, "user": q + 1, "gamma": float(gamma[q]), "rate": float(r)})
    _emit(records, args.format, args.out)
    return 0


def _summary(sol, report) -> str:
    lines = [f"scheme: {sol.scheme} ({sol.comm_scheme})"]
    if not sol.feasible:
        lines.append(f"infeasible: {sol.reason}")
        return "\n".join(lines)
    lines += [f"N: {sol.num_blocks}",
              f"objective: {sol.objective:.6g} bit/s/Hz",
              "training power (dBm): " + ", ".join(f"{watt_to_dbm(p):.2f}" if p > 0 else "-inf"
                                                   for p in sol.training_power),
              "training band: " + ", ".join(f"{b:g}" for b in sol.training_band),
              "slack: " + ", ".join(f"{k}={v:.3g}" for k, v in sorted(report.slack.items()))]
    if not report.ok:
        lines.append(f"violations: {report.violations}")
    return "\n".join(lines)


def cmd_allocate(args) -> int:
    cfg, params, extra = _setup(args, extra_keys=("N",))
    problem = _problem(args, cfg, params)
    intervals = None
    if "N" in extra:
        try:
            intervals = [int(extra["N"])]
        except ValueError as exc:
            raise ConfigError(f"N must be an integer, got {extra['N']!r}") from exc
    sol = allocation.solve(problem, args.scheme, args.kind, intervals=intervals)
    report = check_solution(problem, sol) if sol.feasible else None
    record = sol.to_record()
    if report is not None:
        record["slack"] = report.slack
    if args.out:
        atomic_write(args.out, json.dumps(record, sort_keys=True) + "\n")
    print(_summary(sol, report))
    if not sol.feasible:
        print(f"error: infeasible, binding constraint {sol.reason.constraint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return 0


def cmd_nmax(args) -> int:
    cfg, params, _ = _setup(args)
    problem = _problem(args, cfg, params)
    bound = allocation.n_max(problem, args.scheme)
    print(f"N_max: {bound}")
    if args.scan:
        limit = int(min(bound, problem.max_blocks))
        print(f"largest feasible N: {allocation.feasible_interval_scan(problem, args.scheme, limit)}")
    return 0


def cmd_experiment(args) -> int:
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed_given:
        changes["seed"] = args.seed
    if args.scheme:
        changes["comm_schemes"] = (args.scheme,)
    if args.paper_scale:
        changes["paper_scale"] = True
    if args.spec:
        spec = load_spec(args.spec, **changes)
    elif args.figure:
        spec = default_spec(args.figure, **changes)
    else:
        raise ConfigError("experiment needs --spec or --figure")
    overrides = _parse_overrides(args.override)
    cfg, params = load_config(args.config)
    if overrides:
        import dataclasses
        spec = dataclasses.replace(spec, overrides={**spec.overrides, **overrides})
    out = Path(args.out or f"{spec.figure}.csv")
    table = run_to_file(spec, out, cfg, params, resume=args.resume, fmt=args.format)
    print(f"wrote {out} ({len(table.rows)} rows)")
    if args.plot:
        from .plotting import write_plots
        for path in write_plots(table, spec.figure, out.with_suffix("")):
            print(f"wrote {path}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import write_plots
    table = ResultTable.from_csv(Path(args.input).read_text())
    if not table.rows:
        raise ConfigError(f"{args.input}: no rows")
    figure = args.figure or table.rows[0].experiment
    prefix = Path(args.out) if args.out else Path(args.input).with_suffix("")
    for path in write_plots(table, figure, prefix):
        print(f"wrote {path}")
    return 0


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML configuration file")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--seed", type=int, default=0, action=_SeedAction)
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    common.add_argument("--paper-scale", action="store_true",
                        help="use the large-array configuration")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--trial", type=int, default=0, help="scenario index under the seed")
    scenario.add_argument("--scheme", choices=comm.SCHEMES, default="mrt")

    parser = argparse.ArgumentParser(prog="dfrc-aging", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crlb", parents=[common, scenario], help="tracking bounds of a scenario")
    p.add_argument("--blocks", type=int, default=1)
    p.set_defaults(func=cmd_crlb)

    p = sub.add_parser("rate", parents=[common, scenario], help="closed-form user rates")
    p.add_argument("--blocks", type=int, default=1)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("allocate", parents=[common, scenario],
                       help="resource allocation (override N=... forces the interval)")
    p.add_argument("--kind", choices=allocation.SCHEMES_ALL, default="proposed")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("nmax", parents=[common, scenario], help="re-estimation horizon bound")
    p.add_argument("--scan", action="store_true", help="also scan for the largest feasible N")
    p.set_defaults(func=cmd_nmax)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo sweep")
    p.add_argument("--spec", help="TOML experiment spec")
    p.add_argument("--figure", choices=FIGURES)
    p.add_argument("--trials", type=int)
    p.add_argument("--scheme", choices=comm.SCHEMES)
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.add_argument("--resume", action="store_true", help="continue from a .partial file")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="render SVG plots from a results CSV")
    p.add_argument("input")
    p.add_argument("--figure", choices=FIGURES)
    p.add_argument("--out", help="output prefix")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "seed_given"):
        args.seed_given = False
    try:
        return args.func(args)
    except DfrcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted; partial results saved", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
