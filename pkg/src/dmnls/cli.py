"""Command-line entry point.

Exit codes: 0 all verdicts pass, 1 any fail, 2 usage or configuration error,
3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import io
from .config import ConfigError, RunConfig, SimulationSpec, config_from_dict, parse_config
from .diagnostics import diagnostics_record
from .dispersion_map import DispersionMap, InadmissibleMapError
from .experiments import ExperimentError, ExperimentSpec, ResultReport, build_datum, build_grid, run
from .ground_state import GroundStateError, cached_ground_state, gn_constant, pohozaev_residuals, save_profile_csv
from .spectral_engine import SplitStepConfig, evolve

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3

EXPERIMENT_COMMANDS = ("strichartz", "blowup", "scattering", "partition", "soliton")

REFERENCE_MAP = DispersionMap([(0.5, 2.0), (0.5, -1.0)])
FOCUSING_MAP = DispersionMap([(0.5, 1.0), (0.5, -1.0)])
DEFAULT_SPECS = {
    "strichartz": lambda: ExperimentSpec("strichartz", REFERENCE_MAP, params={"q": 8.0, "r": 4.0}),
    "scattering": lambda: ExperimentSpec("scattering", REFERENCE_MAP),
    "partition": lambda: ExperimentSpec("partition", REFERENCE_MAP),
    "blowup": lambda: ExperimentSpec("blowup", FOCUSING_MAP),
    "soliton": lambda: ExperimentSpec("soliton", FOCUSING_MAP),
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration (or a bare dispersion map)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    common.add_argument("--json", action="store_true", help="print the JSON report on standard output")
    common.add_argument("--profile-cache", type=Path, help="ground-state profile CSV to reuse")

    parser = argparse.ArgumentParser(prog="dmnls", description="Dispersion-managed NLS experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("simulate", parents=[common], help="evolve one datum and write snapshots")
    gs = sub.add_parser("groundstate", parents=[common], help="solve for the ground state profile")
    gs.add_argument("--gamma-plus", type=float, default=1.0)
    gs.add_argument("--tol", type=float, default=1e-8)
    for name in EXPERIMENT_COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return parser


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load_config(args) -> RunConfig | None:
    if args.config is None:
        return None
    path = args.config
    if path.exists():
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON in {path}: {exc}"]) from None
        # a bare map file stands in for the default experiment on that map
        if isinstance(obj, dict) and ("segments" in obj or "t_plus" in obj) and "kind" not in obj:
            try:
                gmap = DispersionMap.from_json(obj)
            except ValueError as exc:
                raise ConfigError([f"map: {exc}"]) from None
            spec = DEFAULT_SPECS[args.command]().to_json() if args.command in DEFAULT_SPECS else {}
            if not spec:
                raise ConfigError([f"a bare map cannot configure {args.command}"])
            spec["map"] = gmap.to_json()
            return config_from_dict(spec)
    return parse_config(path)


def _verdict_code(verdicts: list[str]) -> int:
    if any(v == "fail" for v in verdicts):
        return EXIT_FAIL
    if any(v == "inconclusive" for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _write_artifacts(out: Path, report: ResultReport) -> None:
    spec, art = report.spec, report.artifacts
    io.write_report_json(out / "report.json", report)
    io.export_plot_data(out, spec.map)
    if spec.kind == "partition" and "covers" in art:
        io.write_cover_csv(out / "covers.csv", art["covers"])
    elif spec.kind == "strichartz" and "ratios" in art:
        io.write_series_csv(out / "ratios.csv", ["datum", "ratio"], enumerate(art["ratios"]), "ratios")
    elif spec.kind == "scattering" and "cauchy" in art:
        io.write_series_csv(out / "cauchy.csv", ["t", "difference"],
                            zip(art["checkpoints"][1:], art["cauchy"]), "cauchy")
        io.write_snapshot(out / "u_plus.bin", float(art["checkpoints"][-1]), art["u_plus"])
    elif spec.kind == "soliton" and "times" in art:
        io.write_series_csv(out / "profile_error.csv", ["t", "error"], zip(art["times"], art["errors"]),
                            "soliton")
    elif spec.kind == "blowup" and "result" in art:
        gamma_plus = spec.map.segments[0][1]
        gamma_minus = -spec.map.segments[1][1] if len(spec.map.segments) > 1 else gamma_plus
        snaps = art["snapshots"]
        stride = max(1, len(snaps) // 200)
        records = [diagnostics_record(t, f, gamma_plus, gamma_minus, spec.map(t)) for t, f in snaps[::stride]]
        io.write_diagnostics_csv(out / "diagnostics.csv", records)
        tr = art["track"]
        io.write_series_csv(out / "trapping.csv", ["t", "norm_ratio", "augmented_integrand"],
                            zip(tr.times, tr.ratio, tr.integrand), "trapping")
        io.write_snapshot(out / "final.bin", art["result"].t_final, art["result"].field)


def _run_experiments(args, cfg: RunConfig | None) -> tuple[int, list[dict]]:
    if cfg is None:
        specs = [DEFAULT_SPECS[args.command]()]
        out = args.out or Path("out")
    else:
        specs = [s for s in cfg.experiments if s.kind == args.command]
        if not specs:
            raise UsageError(f"config has no {args.command} experiment")
        out = args.out or Path(cfg.out)
    cache = args.profile_cache or (cfg.profile_cache if cfg else None)
    verdicts, payloads = [], []
    for i, spec in enumerate(specs):
        if args.seed is not None:
            spec.seed = args.seed
        if cache is not None and "profile_cache" in spec.params and spec.params["profile_cache"] is None:
            spec.params["profile_cache"] = str(cache)
        target = out if len(specs) == 1 else out / f"{spec.kind}_{i}"
        target.mkdir(parents=True, exist_ok=True)
        _say(args, f"running {spec.kind} ...")
        report = run(spec)
        _write_artifacts(target, report)
        for m in report.measurements:
            flag = "" if m.passed is None else (" ok" if m.passed else " FAIL")
            _say(args, f"  {m.name} = {m.value!r} (tol {m.tolerance!r}){flag}")
        _say(args, f"{spec.kind}: {report.verdict} in {report.runtime_seconds:.2f} s -> {target}")
        verdicts.append(report.verdict)
        payloads.append(report.to_json())
    return _verdict_code(verdicts), payloads


def _groundstate(args) -> tuple[int, list[dict]]:
    out = args.out or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    prof = cached_ground_state(args.profile_cache, args.gamma_plus, tol=args.tol)
    save_profile_csv(prof, out / "ground_state.csv")
    first, second = pohozaev_residuals(prof)
    ok = max(abs(first), abs(second)) <= 1e-6
    payload = {
        "kind": "groundstate",
        "verdict": "pass" if ok else "fail",
        "gamma_plus": args.gamma_plus,
        "peak": prof.peak,
        "mass": prof.mass,
        "grad_sq": prof.grad_sq,
        "quartic": prof.quartic,
        "gn_constant": gn_constant(prof),
        "pohozaev_residuals": [first, second],
        "tolerance": 1e-6,
    }
    io.write_report_json(out / "pohozaev.json", payload)
    _say(args, f"groundstate: peak {prof.peak:.12g}, mass {prof.mass:.12g}, residuals {first:.2e} {second:.2e}")
    return (EXIT_PASS if ok else EXIT_FAIL), [payload]


def _simulate(args, cfg: RunConfig | None) -> tuple[int, list[dict]]:
    if cfg is None or cfg.simulation is None:
        raise UsageError("simulate needs --config with a 'simulation' block")
    sim: SimulationSpec = cfg.simulation
    out = args.out or Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(sim.grid)
    profile = None
    if sim.datum.get("family") == "ground_state":
        profile = cached_ground_state(args.profile_cache or cfg.profile_cache, sim.map.segments[0][1])
    u0 = build_datum(sim.datum, grid, profile)
    conf = SplitStepConfig(dt_max=sim.dt_max, snapshot_stride=sim.snapshot_every, power=sim.power,
                           phase_cfl=sim.phase_cfl, zoom_points=sim.zoom_points)
    gamma_plus = max(v for _, v in sim.map.segments)
    negatives = [-v for _, v in sim.map.segments if v < 0]
    gamma_minus = max(negatives) if negatives else gamma_plus
    records, count = [], [0]

    def observe(t, f):
        records.append(diagnostics_record(t, f, gamma_plus, gamma_minus, sim.map(t)))
        io.write_snapshot(out / f"snapshot_{count[0]:05d}.bin", t, f)
        count[0] += 1

    res = evolve(u0, sim.t0, sim.t1, sim.map, conf, observer=observe)
    io.export_plot_data(out, sim.map, records=records)
    verdict = "blowup_detected" if res.blowup else ("pass" if res.status == "completed" else "fail")
    payload = {"kind": "simulate", "verdict": verdict, "t_final": res.t_final, "steps": res.steps,
               "t_star": res.t_star, "reason": res.reason, "snapshots": count[0], "seed": cfg.seed}
    io.write_report_json(out / "report.json", payload)
    _say(args, f"simulate: {verdict} at t = {res.t_final:.6g} after {res.steps} steps")
    return (EXIT_PASS if verdict != "fail" else EXIT_FAIL), [payload]


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "groundstate":
            code, payloads = _groundstate(args)
        else:
            cfg = _load_config(args)
            if args.command == "simulate":
                code, payloads = _simulate(args, cfg)
            else:
                code, payloads = _run_experiments(args, cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ExperimentError, InadmissibleMapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GroundStateError as exc:
        print(f"ground state failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        doc = payloads[0] if len(payloads) == 1 else payloads
        print(json.dumps(doc, indent=2, default=lambda o: o.item() if hasattr(o, "item") else str(o)))
    return code


if __name__ == "__main__":
    sys.exit(main())
