"""Command-line front door: generate, plan, retune, eval, validate.

Exit codes are a frozen contract: 0 success, 1 validation failure,
2 usage or IO problems, 3 infeasible, 4 result not proven optimal.
Set PLANNER_LOG=info (or debug) for iteration logging on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import model, planner, retuner, scenario_io, validate
from .errors import (DimensionMismatchError, GenerationError,
                     InfeasibleScenarioError, PlanningError,
                     RetuneInfeasibleError, ScenarioFormatError,
                     SolverStalledError)
from .formulation import AS_PRINTED, INCOMING, FormulationOptions
from .planner import PlanOptions
from .retuner import RetuneOptions
from .scenario_io import GeneratorParams
from .solver import NOT_PROVEN

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_PROVEN = 4


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _formulation_opts(args) -> FormulationOptions:
    return FormulationOptions(c5_dl_direction=args.c5_dl_direction)


def _print_cost(p: model.Plan) -> None:
    print("cost breakdown")
    print(f"  power     {p.cost_power:.6g}")
    print(f"  link      {p.cost_link:.6g}")
    print(f"  spectrum  {p.cost_spectrum:.6g}")
    print(f"  total     {p.cost_total:.6g}")


def _cmd_gen(args) -> int:
    overrides = {}
    if args.params:
        loaded = json.loads(_read(args.params).decode("utf-8"))
        if not isinstance(loaded, dict):
            raise ScenarioFormatError(f"{args.params}: expected an object "
                                      "of generator parameters")
        overrides.update(loaded)
    for key in ("area_side", "max_link_distance", "num_subchannels",
                "num_access_subchannels", "bandwidth", "sic_attenuation"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    try:
        params = GeneratorParams(num_nonroot=args.nonroot, num_root=args.root,
                                 seed=args.seed, **overrides)
    except TypeError as exc:
        raise ScenarioFormatError(f"bad generator parameters: {exc}") from exc
    s = scenario_io.generate_synthetic(params)
    _write(args.out, scenario_io.write_scenario(s))
    roots = len(s.root_indices)
    print(f"nodes: {s.num_nodes} ({roots} root), links: {s.num_links}, "
          f"subchannels: {s.num_subchannels}")
    if s.num_links == 0:
        print("warning: scenario has zero links; nothing can be planned",
              file=sys.stderr)
    return EXIT_OK


def _cmd_plan(args) -> int:
    s = scenario_io.parse_scenario(_read(args.scenario))
    opts = PlanOptions(segments=args.segments,
                       max_outer_iters=args.max_iters,
                       rel_cost_tol=args.tol,
                       formulation=_formulation_opts(args))
    result, trace = planner.plan(s, opts, trace_path=args.trace)
    report = validate.check_feasibility(
        s, result, c5_dl_direction=args.c5_dl_direction)
    if args.out:
        _write(args.out, scenario_io.write_plan(
            result, trace=trace.rows(), validation=report.to_dict()))
    _print_cost(result)
    print(f"iterations: {len(trace.records)}")
    print(f"feasible: {report.feasible}")
    if trace.final_status == NOT_PROVEN:
        print("warning: node budget exhausted; optimality not proven",
              file=sys.stderr)
        return EXIT_NOT_PROVEN
    if not report.feasible:
        return EXIT_INVALID
    return EXIT_OK


def _cmd_retune(args) -> int:
    s = scenario_io.parse_scenario(_read(args.scenario))
    current = scenario_io.parse_plan(_read(args.plan), scenario=s)
    opts = RetuneOptions(segments=args.segments,
                         max_outer_iters=args.max_iters,
                         formulation=_formulation_opts(args))
    before = current.powers.total
    result, trace = retuner.retune(s, current, opts, trace_path=args.trace)
    report = validate.check_feasibility(
        s, result, c5_dl_direction=args.c5_dl_direction)
    if args.out:
        _write(args.out, scenario_io.write_plan(
            result, trace=trace.rows(), validation=report.to_dict()))
    after = result.powers.total
    print(f"total power: {before:.6g} W -> {after:.6g} W "
          f"(delta {after - before:+.6g} W)")
    print(f"iterations: {len(trace.records)}")
    print(f"feasible: {report.feasible}")
    return EXIT_OK if report.feasible else EXIT_INVALID


def _cmd_eval(args) -> int:
    s = scenario_io.parse_scenario(_read(args.scenario))
    p = scenario_io.parse_plan(_read(args.plan), scenario=s)
    print(f"{'link':>4} {'route':>9} {'sub':>3} {'power_w':>12} "
          f"{'sinr':>12} {'capacity_bps':>13}")
    for l, link in enumerate(s.links):
        route = f"{link.from_node}->{link.to_node}"
        for f in range(s.num_subchannels):
            snr = model.sinr(s, p.powers, l, f)
            cap = model.link_capacity(s, p.powers, l, f)
            print(f"{l:>4} {route:>9} {f:>3} {p.powers.watts[l, f]:>12.6g} "
                  f"{snr:>12.6g} {cap:>13.6g}")
    print()
    print(f"{'link':>4} {'flow_ul_bps':>12} {'flow_dl_bps':>12} "
          f"{'wired_bps':>12} {'air_bps':>12}")
    for l, link in enumerate(s.links):
        air = float(p.exact_capacities[l, :].sum())
        print(f"{l:>4} {p.flow_ul[l]:>12.6g} {p.flow_dl[l]:>12.6g} "
              f"{link.wired_capacity:>12.6g} {air:>12.6g}")
    print()
    _print_cost(p)
    return EXIT_OK


def _cmd_validate(args) -> int:
    s = scenario_io.parse_scenario(_read(args.scenario), validate=False)
    violations = model.validate_scenario(s)
    if violations:
        print(f"scenario: {len(violations)} violation(s)")
        for v in violations:
            print(f"  {v}")
        return EXIT_INVALID
    print("scenario: valid")
    if args.plan is None:
        return EXIT_OK
    p = scenario_io.parse_plan(_read(args.plan), scenario=s)
    report = validate.check_feasibility(
        s, p, c5_dl_direction=args.c5_dl_direction)
    print(report)
    return EXIT_OK if report.feasible else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdbackhaul",
        description="Minimum-cost wireless backhaul planning tools")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic scenario")
    gen.add_argument("--nonroot", type=int, required=True)
    gen.add_argument("--root", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--params", help="JSON file of generator parameter overrides")
    gen.add_argument("--area-side", dest="area_side", type=float)
    gen.add_argument("--max-link-distance", dest="max_link_distance", type=float)
    gen.add_argument("--subchannels", dest="num_subchannels", type=int)
    gen.add_argument("--access-subchannels", dest="num_access_subchannels", type=int)
    gen.add_argument("--bandwidth", dest="bandwidth", type=float)
    gen.add_argument("--sic", dest="sic_attenuation", type=float)
    gen.set_defaults(func=_cmd_gen)

    def common(p):
        p.add_argument("--c5-dl-direction", choices=[AS_PRINTED, INCOMING],
                       default=AS_PRINTED)

    planp = sub.add_parser("plan", help="plan a minimum-cost configuration")
    planp.add_argument("scenario")
    planp.add_argument("--segments", type=int, default=16)
    planp.add_argument("--max-iters", type=int, default=20)
    planp.add_argument("--tol", type=float, default=1e-4)
    planp.add_argument("--trace", help="write per-iteration CSV here")
    planp.add_argument("--out", help="write the plan document here")
    common(planp)
    planp.set_defaults(func=_cmd_plan)

    ret = sub.add_parser("retune", help="re-tune powers on a fixed topology")
    ret.add_argument("scenario")
    ret.add_argument("plan")
    ret.add_argument("--segments", type=int, default=32)
    ret.add_argument("--max-iters", type=int, default=50)
    ret.add_argument("--trace")
    ret.add_argument("--out")
    common(ret)
    ret.set_defaults(func=_cmd_retune)

    ev = sub.add_parser("eval", help="evaluate a plan against a scenario")
    ev.add_argument("scenario")
    ev.add_argument("plan")
    ev.set_defaults(func=_cmd_eval)

    val = sub.add_parser("validate", help="validate a scenario or a plan")
    val.add_argument("scenario")
    val.add_argument("plan", nargs="?")
    common(val)
    val.set_defaults(func=_cmd_validate)
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("PLANNER_LOG", "").strip().lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO,
              "warning": logging.WARNING, "error": logging.ERROR}
    if level_name in levels:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        log = logging.getLogger("fdbackhaul")
        log.addHandler(handler)
        log.setLevel(levels[level_name])


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleScenarioError, RetuneInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverStalledError as exc:
        print(f"not proven: {exc}", file=sys.stderr)
        return EXIT_NOT_PROVEN
    except (ScenarioFormatError, DimensionMismatchError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlanningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
