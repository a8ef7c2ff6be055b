"""Command line entry point: ``safecov validate|run|compare``.

Exit codes: 0 all safety assertions hold, 2 config rejected, 3 run stopped
on a geometric degeneracy or infeasible filter, 4 safety violated in cbf mode.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config
from .simulation import RunResult, make_density, run_scenario, tessellate
from .report import (
    DEFAULT_SNAPSHOT_TIMES,
    atomic_write,
    emit_snapshot,
    emit_trace,
    nearest_record,
    write_manifest,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_UNSAFE = 0, 2, 3, 4
SAFETY_REL_TOL = 5e-3

log = logging.getLogger("safecov")


def safety_check(result: RunResult) -> tuple[bool, str]:
    """Built-in assertion for cbf runs: centre distances never fall below ``2 r_safe (1 - 5e-3)``."""
    cfg = result.config
    if cfg.mode != "cbf" or cfg.n < 2:
        return True, "not applicable"
    limit = 2.0 * cfg.r_safe * (1.0 - SAFETY_REL_TOL)
    md = result.min_distance()
    if md < limit:
        return False, f"min pairwise distance {md:.6g} m < {limit:.6g} m"
    th = np.abs(result.series("theta_hat")).max()
    if th > 0.5:
        return False, f"|theta_hat| reached {th:.6g} > 0.5"
    return True, f"min pairwise distance {md:.6g} m >= {limit:.6g} m"


def exit_code(result: RunResult) -> int:
    if result.status != "ok":
        return EXIT_RUNTIME
    return EXIT_OK if safety_check(result)[0] else EXIT_UNSAFE


def run_metrics(result: RunResult) -> dict:
    cfg = result.config
    recs = result.records
    u = np.array([np.abs(r.u).max() for r in recs]) if recs else np.array([np.nan])
    first = result.first_violation_time()
    return {
        "mode": cfg.mode,
        "status": result.status,
        "steps": len(recs),
        "min_distance": result.min_distance() if cfg.n > 1 else float("nan"),
        "first_violation_t": float("nan") if first is None else first,
        "final_H": recs[-1].H_cost if recs else float("nan"),
        "min_h": float(np.nanmin(result.series("h"))) if cfg.n > 1 and recs else float("nan"),
        "peak_input": float(np.nanmax(u)),
        "off_domain_fraction": result.outside_events / max(1, cfg.n * len(recs)),
        "speed_bound_exceeded": result.speed_bound_exceeded,
        "neighbor_switches": result.neighbor_switches,
    }


def write_outputs(result: RunResult, out: Path, snapshots=DEFAULT_SNAPSHOT_TIMES) -> dict:
    cfg = result.config
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace": str(emit_trace(result.records, out / "trace.csv"))}
    domain = cfg.domain_polygon()
    density = make_density(cfg)
    snaps = []
    for t in snapshots:
        if t > cfg.T + 1e-12:
            continue
        rec = nearest_record(result.records, t)
        cells = tessellate(domain, rec.positions, allow_outside=True)
        label = f"{t:g}"
        snaps.append(str(emit_snapshot(rec, domain, cells, out / f"snapshot_t{label}.svg", label, cfg.r_safe, density)))
    paths["snapshots"] = snaps
    from .figures import paths_figure

    paths["paths_figure"] = str(paths_figure(result, domain, out / "paths.png"))
    return paths


def execute(cfg: ScenarioConfig, out: Path, snapshots=DEFAULT_SNAPSHOT_TIMES) -> tuple[RunResult, dict]:
    t0 = time.perf_counter()
    result = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    paths = write_outputs(result, out, snapshots) if result.records else {}
    ok, why = safety_check(result)
    manifest = {
        "scenario": cfg.name,
        "checksum": cfg.checksum(),
        "mode": cfg.mode,
        "outputs": paths,
        "safety_assertion": {"passed": bool(ok and result.status == "ok"), "detail": why},
        "status": result.status,
        "abort": str(result.abort) if result.abort else None,
        "metrics": run_metrics(result),
        "wall_clock_s": round(elapsed, 3),
    }
    write_manifest(out / "manifest.json", manifest)
    return result, manifest


SUMMARY_FIELDS = (
    "mode",
    "status",
    "steps",
    "min_distance",
    "first_violation_t",
    "final_H",
    "min_h",
    "peak_input",
    "off_domain_fraction",
    "speed_bound_exceeded",
    "neighbor_switches",
)


def summary_csv(rows: list[dict]) -> str:
    def fmt(v):
        return f"{v:.9g}" if isinstance(v, float) else str(v)

    lines = [", ".join(SUMMARY_FIELDS)]
    lines += [", ".join(fmt(r[k]) for k in SUMMARY_FIELDS) for r in rows]
    return "\n".join(lines) + "\n"


def compare_modes(cfg: ScenarioConfig, out: Path, snapshots=DEFAULT_SNAPSHOT_TIMES) -> tuple[dict, int, dict]:
    """Run nominal and cbf modes from the same initial state and write a joint report.

    Returns the summary rows by mode, the exit code and the run results.
    """
    results, rows = {}, []
    code = EXIT_OK
    for mode in ("nominal", "cbf"):
        res, _ = execute(cfg.replace(mode=mode), out / mode, snapshots)
        results[mode] = res
        rows.append(run_metrics(res))
        code = max(code, exit_code(res)) if mode == "cbf" else max(code, EXIT_RUNTIME if res.status != "ok" else 0)
    atomic_write(out / "summary.csv", summary_csv(rows))
    from .figures import density_figure, min_distance_figure

    if cfg.n > 1:
        min_distance_figure(results, cfg.r_safe, out / "min_distance.png")
    density_figure(make_density(cfg), cfg.domain_polygon(), out / "density.png")
    return {r["mode"]: r for r in rows}, code, results


def _parse_times(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad snapshot list {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="safecov", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file and print its checksum")
    p.add_argument("config")

    p = sub.add_parser("run", help="simulate one mode and write trace, snapshots and manifest")
    p.add_argument("config")
    p.add_argument("--mode", choices=("nominal", "cbf"))
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--dt", type=float)
    p.add_argument("--snapshots", type=_parse_times, default=DEFAULT_SNAPSHOT_TIMES)

    p = sub.add_parser("compare", help="run both modes and write a comparison report")
    p.add_argument("config")
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--dt", type=float)
    p.add_argument("--snapshots", type=_parse_times, default=DEFAULT_SNAPSHOT_TIMES)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if getattr(args, "dt", None) is not None:
            cfg = cfg.replace(dt=args.dt)
        if getattr(args, "mode", None) is not None:
            cfg = cfg.replace(mode=args.mode)
    except ConfigError as exc:
        print(f"config rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{cfg.name}: ok  n={cfg.n} mode={cfg.mode} steps={cfg.steps} checksum={cfg.checksum()}")
        return EXIT_OK

    if args.command == "run":
        result, manifest = execute(cfg, args.out / cfg.name / cfg.mode, args.snapshots)
        m = manifest["metrics"]
        print(f"{cfg.name} [{cfg.mode}] status={result.status} min_distance={m['min_distance']:.6g} "
              f"final_H={m['final_H']:.6g} safety={manifest['safety_assertion']['detail']}")
        if result.abort:
            print(f"stopped: {result.abort}", file=sys.stderr)
        return exit_code(result)

    rows, code, _ = compare_modes(cfg, args.out / cfg.name, args.snapshots)
    print(summary_csv(list(rows.values())), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
