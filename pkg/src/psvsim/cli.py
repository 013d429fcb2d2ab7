"""Command-line gateway: ``run``, ``solve``, ``validate`` and ``serve``.

Exit codes follow sysexits conventions where they exist: 0 success/feasible,
2 overload-relaxed dispatch, 3 infeasible dispatch, 64 validation failure.
``PSV_LOG`` sets verbosity (``debug``/``info``/``warning``/``error``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .dispatch import InfeasibleProblemError, Schedule, build_opf, solve_opf
from .scenario import (Scenario, ScenarioError, bundled_scenario_names,
                       load_bundled, load_scenario, terminal_state,
                       validate_scenario)
from .simcore import RunResult, run_scenario
from .storage import irradiance_at, pv_power

EXIT_OK = 0
EXIT_OVERLOAD = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64

log = logging.getLogger("psvsim")

_MODE_EXIT = {"feasible": EXIT_OK, "overload-relaxed": EXIT_OVERLOAD,
              "infeasible": EXIT_INFEASIBLE}


def _configure_logging() -> None:
    level = os.environ.get("PSV_LOG", "warning").strip().lower()
    numeric = {"debug": logging.DEBUG, "info": logging.INFO,
               "warning": logging.WARNING, "error": logging.ERROR,
               }.get(level, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=numeric,
                        format="%(levelname)s %(name)s: %(message)s")


def _load(ref: str) -> Scenario:
    """A scenario argument is a file path, or the name of a bundled case."""
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in bundled_scenario_names():
        return load_bundled(ref)
    raise ScenarioError(
        [f"{ref}: no such file, and not a bundled scenario "
         f"(bundled: {', '.join(bundled_scenario_names())})"])


def _print_errors(exc: ScenarioError) -> None:
    for line in exc.errors:
        print(f"error: {line}", file=sys.stderr)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def _schedule_cells(rec: dict[str, Any]) -> list[str]:
    cells = [f"{rec['t']:7.3f}", f"{rec['mode']:<16}"]
    for gid in sorted(rec["gen_kw"]):
        p = rec["gen_kw"][gid]
        w = rec["omega_ref"][gid]
        cells.append(f"{p:7.0f}@{w:4.0f}" if p > 0 else f"{'--':>7} {'':4}")
    total = sum(rec["gen_kw"].values())
    cells.append(f"{rec['ess_kw']:+8.1f}")
    cells.append(f"{rec['shed_kw']:6.0f}")
    cells.append(f"{total:8.1f}")
    cells.append(f"{rec['objective_kg_h']:8.1f}")
    return cells


def _print_run_summary(result: RunResult, *, compare_fixed: bool) -> None:
    sched_recs = result.trace.of("schedule")
    if not sched_recs:
        print("no schedules were produced")
        return
    gen_ids = sorted(sched_recs[0]["gen_kw"])
    head = [f"{'t[s]':>7}", f"{'mode':<16}"]
    head += [f"{gid + ' kW@rpm':>12}" for gid in gen_ids]
    head += [f"{'ESS kW':>8}", f"{'shed':>6}", f"{'total':>8}",
             f"{'kg/h':>8}"]
    if compare_fixed:
        head += [f"{'SFOC':>7}", f"{'@1800':>7}", f"{'save%':>6}"]
    print("  ".join(head))
    for rec in sched_recs:
        cells = _schedule_cells(rec)
        if compare_fixed:
            opt, shadow = rec["sfoc_opt"], rec["sfoc_shadow"]
            save = (100.0 * (shadow - opt) / shadow) if shadow > 0 else 0.0
            cells += [f"{opt:7.1f}", f"{shadow:7.1f}", f"{save:6.1f}"]
        print("  ".join(cells))

    events = result.trace.of("event")
    if events:
        print()
        for ev in events:
            print(f"  event t={ev['t']:.3f}s  {ev['kind']}  "
                  f"{json.dumps(ev['payload'], sort_keys=True)}")

    a = result.audit
    print()
    print(f"energy audit: generation {a.generation_kwh:.4f} kWh, "
          f"pv {a.pv_kwh:.4f}, load {a.load_kwh:.4f}, "
          f"network loss {a.network_loss_kwh:.4f}, "
          f"rotational loss {a.rotational_loss_kwh:.4f}, "
          f"storage delta {a.storage_delta_kwh:+.4f}, "
          f"kinetic delta {a.kinetic_delta_kwh:+.4f}")
    print(f"energy audit: residual {a.residual_pct:+.4f}% "
          f"({'closed' if a.ok() else 'OPEN'})")


def _print_schedule(sched: Schedule, advisories: Sequence[str]) -> None:
    gen_ids = sorted(sched.gen_kw)
    head = [f"{'mode':<16}"]
    head += [f"{gid + ' kW@rpm':>12}" for gid in gen_ids]
    head += [f"{'ESS kW':>8}", f"{'shed':>6}", f"{'total':>8}", f"{'kg/h':>8}"]
    print("  ".join(head))
    cells = [f"{sched.mode:<16}"]
    for gid in gen_ids:
        p = sched.gen_kw[gid]
        w = sched.omega_ref[gid]
        cells.append(f"{p:7.0f}@{w:4.0f}" if p > 0 else f"{'--':>7} {'':4}")
    cells.append(f"{sched.ess_kw:+8.1f}")
    cells.append(f"{sched.shed_kw:6.0f}")
    cells.append(f"{sched.total_generation_kw:8.1f}")
    cells.append(f"{sched.objective:8.1f}")
    print("  ".join(cells))
    for v in sched.violations:
        print(f"violation: {v.constraint} -- {v.detail}")
    for text in advisories:
        print(f"advisory: {text}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scn = _load(args.scenario)
    except ScenarioError as exc:
        _print_errors(exc)
        return EXIT_USAGE

    sim = scn.sim
    if args.duration is not None:
        sim = replace(sim, duration=args.duration)
    if args.partitions is not None:
        sim = replace(sim, partitions=args.partitions)
    if args.schedule_period is not None:
        sim = replace(sim, schedule_period=args.schedule_period)
    if args.decimation is not None:
        sim = replace(sim, decimation=args.decimation)
    scn = replace(scn, sim=sim)

    if sim.duration == 0:
        # validation-only pass: the plant builds and the first dispatch runs
        result = run_scenario(scn, workers=args.workers)
        print(f"{scn.name}: scenario OK (validation only, no trace written)")
        sched = result.trace.of("schedule")
        if sched:
            print(f"first dispatch: {sched[0]['mode']}, "
                  f"{sum(sched[0]['gen_kw'].values()):.1f} kW generation")
        return EXIT_OK

    log.info("running %s for %.3f s (dt %.4f s, partitions %d)",
             scn.name, sim.duration, sim.dt, sim.partitions)
    result = run_scenario(scn, workers=args.workers)
    trace_path = Path(args.trace) if args.trace \
        else Path(f"{scn.name}.trace.jsonl")
    result.trace.write(trace_path)
    log.info("trace written to %s (digest %s)", trace_path, result.digest)
    _print_run_summary(result, compare_fixed=args.compare_fixed_speed)
    print(f"\ntrace: {trace_path}  sha256 {result.digest}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        scn = _load(args.case)
    except ScenarioError as exc:
        _print_errors(exc)
        return EXIT_USAGE

    plant = terminal_state(scn)
    t_term = max((ev.at for ev in scn.events), default=0.0)
    pv = 0.0
    if plant.ess is not None:
        pv = pv_power(plant.ess.pv, irradiance_at(scn.irradiance, t_term))
    try:
        problem = build_opf(
            plant.network, plant.fleet, plant.ess, plant.loads, plant.mission,
            pv_kw=pv, reserve_kw=scn.reserve_kw,
            grid_allows_fast=scn.grid_allows_fast, sfoc_map=scn.sfoc_map)
        sched = solve_opf(problem, step_kw=args.step_kw)
    except InfeasibleProblemError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_schedule(sched, plant.shed_advisories)
    return _MODE_EXIT[sched.mode]


def cmd_validate(args: argparse.Namespace) -> int:
    failed = False
    for ref in args.scenario:
        path = Path(ref)
        if not path.exists() and ref in bundled_scenario_names():
            print(f"{ref}: OK (bundled)")
            continue
        if not path.exists():
            print(f"{ref}: error: no such file", file=sys.stderr)
            failed = True
            continue
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            print(f"{ref}:{exc.lineno}:{exc.colno}: error: {exc.msg}",
                  file=sys.stderr)
            failed = True
            continue
        warnings, errors = validate_scenario(raw)
        for w in warnings:
            print(f"{ref}: warning: {w}")
        for e in errors:
            print(f"{ref}: error: {e}", file=sys.stderr)
        if errors:
            failed = True
        else:
            print(f"{ref}: OK")
    return EXIT_USAGE if failed else EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        scn = _load(args.scenario)
    except ScenarioError as exc:
        _print_errors(exc)
        return EXIT_USAGE
    from . import server
    server.serve(scn, host=args.host, port=args.port, pace=args.pace,
                 partitions=args.partitions, workers=args.workers)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage mistakes exit 64, keeping 2 reserved for overload-relaxed."""

    def error(self, message: str) -> Any:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="psvsim",
        description="Transient simulator and fuel-optimal scheduler for DC "
                    "platform-supply-vessel power systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run", help="simulate a scenario and write its trace")
    p_run.add_argument("scenario", help="scenario file or bundled name")
    p_run.add_argument("--trace", help="trace output path "
                                       "(default <name>.trace.jsonl)")
    p_run.add_argument("--duration", type=float, default=None,
                       help="override simulated seconds; 0 = validate only")
    p_run.add_argument("--partitions", type=int, default=None,
                       help="network partition count")
    p_run.add_argument("--workers", type=int, default=1,
                       help="partition solver threads")
    p_run.add_argument("--schedule-period", type=float, default=None,
                       help="override dispatch cadence [s]")
    p_run.add_argument("--decimation", type=int, default=None,
                       help="keep every n-th step record")
    p_run.add_argument("--compare-fixed-speed", action="store_true",
                       help="add 1800 rpm shadow SFOC columns")
    p_run.set_defaults(func=cmd_run)

    p_solve = sub.add_parser(
        "solve", help="one-shot dispatch of a case's terminal plant state")
    p_solve.add_argument("case", help="case file or bundled name")
    p_solve.add_argument("--step-kw", type=float, default=1.0,
                         help="scan resolution [kW]")
    p_solve.set_defaults(func=cmd_solve)

    p_val = sub.add_parser("validate", help="check scenario files")
    p_val.add_argument("scenario", nargs="+",
                       help="scenario files or bundled names")
    p_val.set_defaults(func=cmd_validate)

    p_serve = sub.add_parser(
        "serve", help="host the live telemetry/command gateway")
    p_serve.add_argument("scenario", help="scenario file or bundled name")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--pace", type=float, default=None,
                         help="wall-clock seconds per simulated second "
                              "(overrides the scenario; 0 = free-run)")
    p_serve.add_argument("--partitions", type=int, default=None)
    p_serve.add_argument("--workers", type=int, default=1)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:       # late validation failures
        _print_errors(exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
