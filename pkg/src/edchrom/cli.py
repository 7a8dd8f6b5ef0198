"""Command-line entry point: run a scenario and write CSV snapshots.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .errors import DomainError, SolverError
from .integrators import RunConfig, SchemeKind, StepStats, explicit_stability_bound, imex_stability_bound, run
from .scenario import Scenario, ScenarioError, load_preset, parse_scenario, scenario_from_dict, scenario_to_dict

log = logging.getLogger("edchrom")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


def fmt(x: float) -> str:
    """Decimal rendering with 17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def time_label(t: float) -> str:
    return format(float(t), "g")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edchrom", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="YAML scenario file")
    src.add_argument("--preset", help="name of a shipped preset")
    p.add_argument("--m", type=int, help="number of cells")
    p.add_argument("--dt-over-dz", type=float, help="time step over cell width")
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind])
    p.add_argument("--t-final", type=float, help="final time (later snapshots are dropped)")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--check-stability", action="store_true",
                   help="print the explicit and IMEX time-step bounds and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def apply_overrides(scn: Scenario, args) -> Scenario:
    doc = scenario_to_dict(scn)
    if args.m is not None:
        doc["grid"]["m"] = args.m
    if args.dt_over_dz is not None:
        doc["time"]["dt_over_dz"] = args.dt_over_dz
    if args.scheme is not None:
        doc["scheme"]["kind"] = args.scheme
    if args.t_final is not None:
        doc["time"]["t_final"] = args.t_final
        kept = [s for s in doc["time"]["snapshots"] if s < args.t_final]
        doc["time"]["snapshots"] = kept + [args.t_final]
    return scenario_from_dict(doc)


def write_snapshot_csv(path: Path, z: np.ndarray, c: np.ndarray, w: np.ndarray):
    n = c.shape[0]
    header = ["z"] + [f"c_{i + 1}" for i in range(n)] + [f"w_{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for j in range(z.size):
            out.writerow([fmt(z[j])] + [fmt(v) for v in c[:, j]] + [fmt(v) for v in w[:, j]])


def write_diagnostics_csv(path: Path, records):
    n = records[0].total_mass.size
    header = ["time"] + [f"mass_{i + 1}" for i in range(n)] + ["oscillation_index", "front_position"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for r in records:
            out.writerow([fmt(r.time)] + [fmt(m) for m in r.total_mass]
                         + [fmt(r.oscillation_index), fmt(r.front_position)])


def write_operating_line_csv(path: Path, cfg: RunConfig, displacer: int):
    c_d = float(cfg.injection.max_concentration()[displacer])
    flags = diagnostics.operating_line_check(cfg.iso, displacer, c_d)
    s = cfg.iso.a[displacer] / (1.0 + cfg.iso.b[displacer] * c_d)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["component", "slope", "plateau_flag", "predicted_plateau_c"])
        for i in range(cfg.iso.n_components):
            if i == displacer:
                continue
            height = (cfg.iso.a[i] / s - 1.0) / cfg.iso.b[i] if flags[i] else 0.0
            out.writerow([i + 1, fmt(s), str(bool(flags[i])).lower(), fmt(height)])
    return s, flags


def run_scenario(scn: Scenario, out_dir: Path) -> list[Path]:
    cfg = scn.config
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = StepStats.empty(cfg.iso.n_components)
    snaps = run(cfg, stats)
    written = []
    z = cfg.grid.centers
    for s in snaps:
        path = out_dir / f"{cfg.name}_t{time_label(s.time)}.csv"
        write_snapshot_csv(path, z, s.state.c, s.state.w)
        written.append(path)
    path = out_dir / f"{cfg.name}_diagnostics.csv"
    write_diagnostics_csv(path, [s.record for s in snaps])
    written.append(path)
    if scn.displacer is not None:
        path = out_dir / f"{cfg.name}_operating_line.csv"
        slope, flags = write_operating_line_csv(path, cfg, scn.displacer)
        written.append(path)
        shown = {i + 1: bool(f) for i, f in enumerate(flags) if i != scn.displacer}
        print(f"operating line slope {slope:.6g}; plateau flags {shown}")
    if stats.newton_iterations:
        log.info("Newton iterations per stage: max %d, mean %.2f",
                 max(stats.newton_iterations), float(np.mean(stats.newton_iterations)))
    for s in snaps:
        r = s.record
        print(f"t={time_label(r.time)} mass={' '.join(fmt(m) for m in r.total_mass)} "
              f"oscillation={r.oscillation_index:.3g} front={r.front_position:.6g}")
    return written


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        scn = parse_scenario(args.scenario) if args.scenario else load_preset(args.preset)
        scn = apply_overrides(scn, args)
    except (ScenarioError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    cfg = scn.config
    if args.check_stability:
        print(f"explicit bound dt/dz <= {explicit_stability_bound(cfg.physics, cfg.grid):.4f}")
        print(f"IMEX bound dt/dz <= {imex_stability_bound(cfg.physics):.4f}")
        return EXIT_OK

    try:
        for path in run_scenario(scn, args.out_dir):
            log.info("wrote %s", path)
    except (SolverError, DomainError) as exc:
        where = f" at t={exc.time:.6g}" if getattr(exc, "time", None) is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
