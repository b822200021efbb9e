"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 budget refusal, 4 input-data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import formats
from .config import ConfigError, RunConfig, parse_value
from .enumeration import EnumerationCursor, cardinality, enumerate_words
from .iga import GAConfig
from .lattice import build_aperture
from .pattern import (
    ExcitationSet,
    PowerMask,
    ScanCone,
    build_reference,
    cosine_element,
    isotropic,
    scan_map,
    steering_phases,
)
from .synthesis import THREADS_ENV, Problem, default_threads, estimate_edm_seconds, run_cdm_problem, run_edm
from .tiling import InvalidTilingError, decode

log = logging.getLogger("hextile")

EXIT_USAGE, EXIT_BUDGET, EXIT_DATA = 2, 3, 4


class BudgetExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Config plumbing

# flag dest -> config key
_FLAG_KEYS = {
    "rings": "aperture.rings",
    "cell_side": "aperture.cell_side",
    "grid": "grid",
    "floor_db": "mask.floor_db",
    "mask_shape": "mask.shape",
    "mask_extent": "mask.extent",
    "mask_center": "mask.center",
    "reference": "reference.kind",
    "reference_file": "reference.path",
    "taper_exponent": "reference.exponent",
    "taper_radius": "reference.radius",
    "steer": "reference.steer",
    "element": "element.kind",
    "element_q": "element.q",
    "seed": "seed",
    "output": "output",
    "population": "ga.population",
    "iterations": "ga.iterations",
    "crossover": "ga.crossover",
    "mutation": "ga.mutation",
    "stall_window": "ga.stall_window",
    "stall_threshold": "ga.stall_threshold",
    "budget": "edm.budget_seconds",
    "theta0": "scan.theta0",
    "phi0": "scan.phi0",
    "theta_gamma": "scan.theta_gamma",
    "phi_gamma": "scan.phi_gamma",
}


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    overrides = {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = list(value) if isinstance(value, (list, tuple)) else value
    for item in args.set or []:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = parse_value(text)
    return cfg.override(overrides) if overrides else cfg


def problem_from_config(cfg: RunConfig) -> Problem:
    try:
        return _problem(cfg)
    except ValueError as exc:
        if isinstance(exc, (ConfigError, formats.DataError)):
            raise
        raise ConfigError(str(exc)) from None


def _problem(cfg: RunConfig) -> Problem:
    ap = build_aperture(cfg["aperture"]["rings"], cfg["aperture"]["cell_side"])
    r = cfg["reference"]
    ref = build_reference(ap, r["kind"], r["exponent"], r["radius"], r["path"])
    theta, phi = r["steer"]
    if theta or phi:
        extra = np.degrees(steering_phases(ap, theta, phi))
        ref = ExcitationSet(ref.amplitude, ref.phase_deg + extra)
    m = cfg["mask"]
    mask = PowerMask(tuple(m["center"]), tuple(m["extent"]), m["floor_db"], m["shape"])
    e = cfg["element"]
    element = isotropic if e["kind"] == "isotropic" else cosine_element(e["q"])
    return Problem(ap, ref, mask, cfg["grid"], element)


def ga_config(cfg: RunConfig, seed: int) -> GAConfig:
    g = cfg["ga"]
    try:
        return _ga_config(g, seed)
    except ValueError as exc:
        raise ConfigError(f"ga: {exc}") from None


def _ga_config(g: dict, seed: int) -> GAConfig:
    return GAConfig(
        population=g["population"],
        iterations=g["iterations"],
        crossover=g["crossover"],
        mutation=g["mutation"],
        stall_window=g["stall_window"],
        stall_threshold=g["stall_threshold"],
        seed=seed,
        diversity=g["diversity"],
        retries=g["retries"],
    )


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_info(out: Path, cfg: RunConfig, started: datetime, **extra) -> None:
    # wall-clock data lives apart from the results so those stay byte-stable
    info = {
        "config_hash": cfg.hash(),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        **extra,
    }
    formats.write_json(out / "run_info.json", info)
    (out / "config.yaml").write_text(cfg.dump())


def _report(out: Path, stem: str, problem: Problem, record, figures: bool) -> None:
    """Solution files, pattern, cuts, metrics and (optionally) figures."""
    ap = problem.aperture
    formats.write_solution(out / stem, ap, record)
    pattern = problem.model.pattern(problem.tiled(record.tiling).weights)
    formats.write_pattern(out / f"{stem}_pattern.csv", pattern)
    formats.write_cuts(out / f"{stem}_cuts.csv", pattern, near=problem.mask.center)
    formats.write_metrics(out / f"{stem}_metrics.json", record.metrics, record.chi)
    if figures:
        from . import plotting

        plotting.plot_tiling(ap, record.tiling, out / f"{stem}_tiling.png",
                             amplitudes=record.coefficients.amplitude, title=f"{stem}  chi={record.chi:.3e}")
        plotting.plot_pattern(pattern, out / f"{stem}_pattern.png", title=stem)
        plotting.plot_cuts(formats.principal_cuts(pattern, near=problem.mask.center), out / f"{stem}_cuts.png",
                           mask_floor_db=problem.mask.floor_db, title=stem)


# --------------------------------------------------------------------------
# Subcommands


def cmd_count(args) -> int:
    sides = args.sides
    if len(sides) == 1:
        sides = sides * 3
    if len(sides) != 3:
        args.parser.error("count takes one side length or three")
    if any(s < 1 for s in sides):
        args.parser.error("side lengths must be positive integers")
    print(cardinality(*sides))
    return 0


def cmd_enumerate(args) -> int:
    if args.rings < 1:
        args.parser.error("--rings must be positive")
    ap = build_aperture(args.rings, 1.0)
    if args.resume:
        cursor = EnumerationCursor.load(ap, args.resume)
        if not cursor.advance():
            return 0
    else:
        cursor = EnumerationCursor(ap)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        n = 0
        for word in enumerate_words(ap, cursor):
            out.write(f"{cursor.t},{' '.join(map(str, word))}\n")
            n += 1
            if args.limit and n >= args.limit:
                break
    finally:
        if out is not sys.stdout:
            out.close()
    if args.checkpoint:
        cursor.save(args.checkpoint)
    return 0


def cmd_edm(args) -> int:
    cfg = load_config(args)
    started = datetime.now(timezone.utc)
    problem = problem_from_config(cfg)
    ap = problem.aperture
    T = cardinality(ap.rings, ap.rings, ap.rings)
    budget = cfg["edm"]["budget_seconds"]
    if not args.resume:
        tau = estimate_edm_seconds(problem, batch_size=cfg["edm"]["batch_size"])
        print(f"estimated time for {T} tilings: {tau:.1f} s (budget {budget:.0f} s)", file=sys.stderr)
        if tau > budget and not args.force:
            raise BudgetExceeded(f"estimated {tau:.0f} s exceeds the {budget:.0f} s budget; use --force to run anyway")
    out = _outdir(cfg)
    threads = args.threads or default_threads()

    def progress(done, total):
        print(f"\r{done}/{total}", end="", file=sys.stderr, flush=True)

    result = run_edm(
        problem,
        batch_size=cfg["edm"]["batch_size"],
        threads=threads,
        checkpoint_dir=out / "edm_checkpoint" if args.checkpoint or args.resume else None,
        resume=args.resume,
        progress=progress if args.progress else None,
    )
    if args.progress:
        print(file=sys.stderr)
    prov = {"method": "EDM", "seed": cfg["seed"], "config_hash": cfg.hash()}
    t_best, w_best = result.best[0]
    best = problem.solution(decode(ap, w_best), {**prov, "t": t_best})
    t_worst, w_worst = result.worst
    worst = problem.solution(decode(ap, w_worst), {**prov, "t": t_worst})
    _report(out, "edm_best", problem, best, not args.no_figures)
    _report(out, "edm_worst", problem, worst, not args.no_figures)
    curve = result.sorted_curve()
    formats.write_curve(out / "edm_curve.csv", curve)
    with open(out / "edm_cooptima.csv", "w") as fh:
        fh.write("t,word\n")
        for t, w in result.best:
            fh.write(f"{t},{' '.join(map(str, w))}\n")
    summary = {
        "tilings": T,
        "evaluations": result.evaluations,
        "best_chi": result.best_chi,
        "best_t": t_best,
        "co_optima": result.n_best,
        "co_optima_listed": len(result.best),
        "worst_chi": result.worst_chi,
        "worst_t": t_worst,
        "config_hash": cfg.hash(),
    }
    formats.write_json(out / "edm_summary.json", summary)
    if not args.no_figures:
        from . import plotting

        plotting.plot_cost_curve(curve, out / "edm_curve.png")
    _run_info(out, cfg, started, elapsed_seconds=result.elapsed, threads=threads)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_cdm(args) -> int:
    cfg = load_config(args)
    started = datetime.now(timezone.utc)
    problem = problem_from_config(cfg)
    out = _outdir(cfg)
    threads = args.threads or default_threads()
    runs = []
    for r in range(args.repeat):
        seed = cfg["seed"] + r
        gc = ga_config(cfg, seed)
        T = cardinality(problem.aperture.rings, problem.aperture.rings, problem.aperture.rings)
        if gc.population > T:
            raise ConfigError(f"ga.population {gc.population} exceeds the {T} tilings of this aperture")
        res = run_cdm_problem(problem, gc, threads=threads)
        runs.append((seed, res))
        name = "cdm_trace.csv" if args.repeat == 1 else f"cdm_trace_seed{seed}.csv"
        formats.write_trace(out / name, res.trace)
    seed, best_run = min(runs, key=lambda sr: (sr[1].best.chi, sr[0]))
    record = problem.solution(
        decode(problem.aperture, best_run.best.word),
        {"method": "CDM", "seed": seed, "config_hash": cfg.hash(), "termination": best_run.trace.reason},
    )
    _report(out, "cdm_best", problem, record, not args.no_figures)
    with open(out / "cdm_runs.csv", "w") as fh:
        fh.write("seed,best_chi,iterations,evaluations,termination\n")
        for s, res in runs:
            fh.write(f"{s},{res.best.chi!r},{res.trace.iterations},{res.trace.evaluations[-1]},{res.trace.reason}\n")
    finals = np.array([res.best.chi for _, res in runs])
    summary = {
        "runs": len(runs),
        "best_seed": seed,
        "best_chi": float(finals.min()),
        "median_chi": float(np.median(finals)),
        "worst_chi": float(finals.max()),
        "config_hash": cfg.hash(),
    }
    formats.write_json(out / "cdm_summary.json", summary)
    if not args.no_figures:
        from . import plotting

        plotting.plot_traces([res.trace for _, res in runs], out / "cdm_traces.png",
                             labels=[f"seed {s}" for s, _ in runs])
    _run_info(out, cfg, started, threads=threads,
              wall_seconds=[res.trace.wall_time for _, res in runs])
    print(json.dumps(summary, indent=2))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    started = datetime.now(timezone.utc)
    problem = problem_from_config(cfg)
    tiling = formats.read_tiling(args.tiling, problem.aperture)
    out = _outdir(cfg)
    record = problem.solution(tiling, {"method": "eval", "seed": cfg["seed"], "config_hash": cfg.hash()})
    _report(out, "eval", problem, record, not args.no_figures)
    _run_info(out, cfg, started, tiling_file=str(args.tiling))
    print(json.dumps(record.metrics.as_dict(record.chi), indent=2))
    return 0


def cmd_scan(args) -> int:
    cfg = load_config(args)
    started = datetime.now(timezone.utc)
    problem = problem_from_config(cfg)
    ap = problem.aperture
    tiling = formats.read_tiling(args.tiling, ap)
    s = cfg["scan"]
    cone = ScanCone(s["theta0"], s["phi0"], tuple(s["theta_gamma"]), tuple(s["phi_gamma"]))
    m = problem.mask
    result = scan_map(ap, tiling, problem.reference.amplitude, cone, m, problem.grid, problem.model.element)
    out = _outdir(cfg)
    formats.write_scan(out / "scan.csv", result)
    if not args.no_figures:
        from . import plotting

        plotting.plot_scan(result, out / "scan.png")
    _run_info(out, cfg, started, tiling_file=str(args.tiling))
    print(f"{len(result.theta_gamma) * len(result.phi_gamma)} scan points; "
          f"worst SLL {np.max(result.sll_db):.2f} dB, min D {np.min(result.d_dbi):.2f} dBi")
    return 0


# --------------------------------------------------------------------------
# Parser


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (dotted path)")
    g = p.add_argument_group("aperture and pattern")
    g.add_argument("--rings", type=int)
    g.add_argument("--cell-side", type=float, help="triangle side in wavelengths")
    g.add_argument("--grid", type=int, help="grid points per axis in (u, v)")
    g.add_argument("--floor-db", type=float, help="mask level outside the mainlobe region")
    g.add_argument("--mask-shape", choices=("rectangle", "ellipse"))
    g.add_argument("--mask-extent", type=float, nargs=2, metavar=("DU", "DV"))
    g.add_argument("--mask-center", type=float, nargs=2, metavar=("U0", "V0"))
    g.add_argument("--reference", choices=("uniform", "cosine-taper", "file"))
    g.add_argument("--reference-file", type=str)
    g.add_argument("--taper-exponent", type=float)
    g.add_argument("--taper-radius", type=float)
    g.add_argument("--steer", type=float, nargs=2, metavar=("THETA", "PHI"), help="reference beam direction [deg]")
    g.add_argument("--element", choices=("isotropic", "cosine"))
    g.add_argument("--element-q", type=float)
    g = p.add_argument_group("run")
    g.add_argument("--seed", type=int)
    g.add_argument("--output", "-o", type=str, help="output directory")
    g.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or all cores)")
    g.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hextile", description="Diamond-tiled hexagonal array synthesis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="exact number of diamond tilings of a hexagon")
    p.add_argument("sides", type=int, nargs="+", help="side length (regular) or three side lengths")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("enumerate", help="list tiling words in lexicographic order")
    p.add_argument("--rings", type=int, required=True)
    p.add_argument("--limit", type=int, help="stop after this many words")
    p.add_argument("--output", "-o", type=str, help="write t,word rows here instead of stdout")
    p.add_argument("--checkpoint", type=str, help="save the cursor here when done")
    p.add_argument("--resume", type=str, help="continue after the word stored in this checkpoint")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("edm", help="exhaustive search over all tilings")
    _add_run_options(p)
    p.add_argument("--budget", type=float, help="refuse when the time estimate exceeds this many seconds")
    p.add_argument("--force", action="store_true", help="run even above the budget")
    p.add_argument("--checkpoint", action="store_true", help="write resumable checkpoints to OUTPUT/edm_checkpoint")
    p.add_argument("--resume", action="store_true", help="resume from OUTPUT/edm_checkpoint")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_edm)

    p = sub.add_parser("cdm", help="genetic search over tiling words")
    _add_run_options(p)
    g = p.add_argument_group("genetic search")
    g.add_argument("--population", type=int)
    g.add_argument("--iterations", type=int)
    g.add_argument("--crossover", type=float)
    g.add_argument("--mutation", type=float)
    g.add_argument("--stall-window", type=int)
    g.add_argument("--stall-threshold", type=float)
    g.add_argument("--repeat", type=int, default=1, help="number of seeds, starting at --seed")
    p.set_defaults(func=cmd_cdm)

    p = sub.add_parser("eval", help="evaluate a tiling file")
    p.add_argument("tiling", type=Path)
    _add_run_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="SLL and directivity over a scan cone")
    p.add_argument("tiling", type=Path)
    _add_run_options(p)
    g = p.add_argument_group("scan cone")
    g.add_argument("--theta0", type=float)
    g.add_argument("--phi0", type=float)
    g.add_argument("--theta-gamma", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    g.add_argument("--phi-gamma", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    p.set_defaults(func=cmd_scan)

    for name, sp in sub.choices.items():
        sp.set_defaults(parser=sp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "repeat", 1) < 1:
        args.parser.error("--repeat must be at least 1")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        args.parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, formats.DataError, InvalidTilingError, OSError) as exc:
        triangles = getattr(exc, "triangles", ())
        extra = f" (triangles {list(triangles)})" if triangles else ""
        print(f"error: {exc}{extra}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
