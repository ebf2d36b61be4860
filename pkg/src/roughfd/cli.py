"""Command-line front end.

Commands: ``advect``, ``wave``, ``study``, ``coefficient`` and ``check``.
Exit status is 0 on success, 1 on solver or validation errors (and on
failed checks), 2 on configuration or missing-file errors.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from roughfd import __version__, advection, wave
from roughfd.coefficients import Coefficient, coarsen
from roughfd.config import PROFILES, load_config
from roughfd.convergence import build_coefficient, build_initial_data, refinement_study
from roughfd.exceptions import ConfigError, RoughFDError
from roughfd.grid import GridFunction, make_grid, read_columns, write_columns

__all__ = ["main", "run", "check"]

MANIFEST = "manifest.json"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _write_manifest(out, payload):
    with open(Path(out) / MANIFEST, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _problem(cfg):
    """Coefficient and initial data at ``run.num_cells``, built on the reference grid."""
    study = cfg.study
    ref_grid = make_grid(study.domain_length, study.reference_resolution)
    coef = build_coefficient(study.coefficient, ref_grid, study.seed)
    data = build_initial_data(study.initial_data, ref_grid, study.seed)
    factor = study.reference_resolution // cfg.num_cells
    return coef.coarsen(factor), tuple(coarsen(d, factor) for d in data)


def _base_manifest(command, cfg, coef):
    return {
        "tool": "roughfd",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.study.seed,
        "equation": cfg.study.equation,
        "domain_length": cfg.study.domain_length,
        "num_cells": cfg.num_cells,
        "coefficient_file": "coefficient.csv",
        "coefficient_lower_bound": coef.lower_bound,
        "coefficient_upper_bound": coef.upper_bound,
    }


def _snapshot_entries(out, trajectory, columns):
    final = trajectory.final
    states = [s for s in trajectory.snapshots if s.step != final.step] + [final]
    entries = []
    for i, state in enumerate(states):
        name = "solution.csv" if state is final else f"snapshot_{i:04d}.csv"
        write_columns(Path(out) / name, state.grid, columns(state))
        entries.append({"file": name, "time": state.time, "step": state.step})
    return entries


def _write_diagnostics(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_advect(cfg, out):
    coef, (w0,) = _problem(cfg)
    coef.to_csv(Path(out) / "coefficient.csv")
    rows = []

    def record(before, after):
        # residuals in units of their tolerance: <= 1 means the inequality holds
        r1 = advection.entropy_residual(before, after, 0.0, 1).values.max()
        r2 = advection.entropy_residual(before, after, 0.0, 2).values.max()
        rows.append((after.step, after.time, advection.conservation_sum(after),
                     float(np.max(np.abs(after.w.values))),
                     r1 / advection.entropy_tolerance(before, 0.0, 1),
                     r2 / advection.entropy_tolerance(before, 0.0, 2)))

    tr = advection.solve_advection(w0, coef, cfg.study.final_time, cfg.study.cfl,
                                   snapshot_times=cfg.snapshot_times, callback=record)
    snaps = _snapshot_entries(out, tr, lambda s: {"w": s.w.values, "u": s.u.values})
    _write_diagnostics(Path(out) / "diagnostics.csv",
                       ["step", "time", "conservation_sum", "max_abs_w",
                        "entropy_residual_p1", "entropy_residual_p2"], rows)
    c0 = advection.conservation_sum(tr.snapshots[0])
    m0 = float(np.max(np.abs(w0.values)))
    manifest = _base_manifest("advect", cfg, coef)
    manifest.update({
        "dt": tr.nominal_dt, "last_dt": tr.last_dt, "num_steps": tr.num_steps,
        "final_time": cfg.study.final_time, "snapshots": snaps,
        "conservation_sum": c0,
        "diagnostics_file": "diagnostics.csv",
        "invariants": {
            "max_principle": all(r[3] <= m0 for r in rows),
            "entropy": all(r[4] <= 1 and r[5] <= 1 for r in rows),
            "conservation_drift": max((abs(r[2] - c0) for r in rows), default=0.0),
        },
    })
    _write_manifest(out, manifest)
    print(f"advect: {tr.num_steps} steps of dt={tr.nominal_dt:.6g} on "
          f"{cfg.num_cells} cells; wrote {len(snaps)} files to {out}")
    return EXIT_OK


def cmd_wave(cfg, out):
    coef, (u0, v0) = _problem(cfg)
    coef.to_csv(Path(out) / "coefficient.csv")
    rows = []

    def record(before, after):
        r = wave.wave_entropy_residual(before, after).values.max()
        rows.append((after.step, after.time, wave.weighted_energy(after),
                     r / wave.wave_entropy_tolerance(before)))

    tr = wave.solve_wave(u0, v0, coef, cfg.study.final_time, cfg.study.cfl,
                         snapshot_times=cfg.snapshot_times, callback=record)
    snaps = _snapshot_entries(
        out, tr, lambda s: {"u": s.u.values, "v": s.v.values, "p": s.p.values})
    _write_diagnostics(Path(out) / "diagnostics.csv",
                       ["step", "time", "energy", "entropy_residual"], rows)
    energies = [wave.weighted_energy(tr.snapshots[0])] + [r[2] for r in rows]
    manifest = _base_manifest("wave", cfg, coef)
    manifest.update({
        "dt": tr.nominal_dt, "last_dt": tr.last_dt, "num_steps": tr.num_steps,
        "final_time": cfg.study.final_time, "snapshots": snaps,
        "diagnostics_file": "diagnostics.csv",
        "invariants": {
            "energy_nonincreasing": all(b <= a * (1 + 1e-12)
                                        for a, b in zip(energies, energies[1:])),
            "entropy": all(r[3] <= 1 for r in rows),
        },
    })
    _write_manifest(out, manifest)
    print(f"wave: {tr.num_steps} steps of dt={tr.nominal_dt:.6g} on "
          f"{cfg.num_cells} cells; wrote {len(snaps)} files to {out}")
    return EXIT_OK


def cmd_coefficient(cfg, out):
    coef, _ = _problem(cfg)
    coef.to_csv(Path(out) / "coefficient.csv")
    manifest = _base_manifest("coefficient", cfg, coef)
    _write_manifest(out, manifest)
    print(f"coefficient: {cfg.num_cells} cells in "
          f"[{coef.lower_bound:.6g}, {coef.upper_bound:.6g}]")
    return EXIT_OK


def cmd_study(cfg, out, n_jobs=1):
    report = refinement_study(cfg.study, n_jobs=n_jobs)
    report.to_csv(Path(out) / "rate_report.csv")
    files = ["rate_report.csv"] + [p.name for p in report.write_loglog(out)]
    manifest = {
        "tool": "roughfd", "version": __version__, "command": "study",
        "config": cfg.to_dict(), "seed": cfg.study.seed, "files": files,
        "self_convergence": report.self_convergence,
        "invariants": {str(n): c for n, c in report.invariants.items()},
    }
    _write_manifest(out, manifest)
    for var, per_norm in report.observed_rates.items():
        for m, rate in per_norm.items():
            exp = report.expected_rates.get((var, m))
            tail = "" if exp is None else f"  (expected {exp:.4f})"
            print(f"rate {var} L{m}: {rate:.4f}{tail}")
    print(f"theoretical rate: {report.theoretical_rate:.4f}")
    ok = all(all(c.values()) for c in report.invariants.values())
    return EXIT_OK if ok else EXIT_FAIL


# -- check -------------------------------------------------------------------

def _load_snapshot(directory, entry, grid):
    header, table = read_columns(Path(directory) / entry["file"])
    if table["x"].shape[0] != grid.num_cells:
        raise ConfigError(f"{entry['file']} has {table['x'].shape[0]} rows, "
                          f"expected {grid.num_cells}", key="snapshots")
    return {k: GridFunction(grid, table[k]) for k in header[1:]}


def _first_bad(mask):
    return int(np.flatnonzero(mask)[0])


def _check_advection(manifest, directory, coef, grid, report):
    dt = manifest["dt"]
    entries = manifest["snapshots"]
    snaps = [_load_snapshot(directory, e, grid) for e in entries]
    w0max = float(np.max(np.abs(snaps[0]["w"].values)))
    c0 = manifest["conservation_sum"]
    lo = float(np.min(snaps[0]["w"].values))
    hi = float(np.max(snaps[0]["w"].values))
    for e, snap in zip(entries, snaps):
        w = snap["w"].values
        over = np.abs(w) > w0max * (1 + 1e-12) + 1e-300
        if over.any():
            report(f"max principle fails in {e['file']} at cell {_first_bad(over)}")
        c = advection.conservation_sum(advection.AdvectionState(snap["w"], coef, 0.0, dt))
        if abs(c - c0) > 1e-10 * max(abs(c0), 1.0):
            report(f"conservation fails in {e['file']}: {c!r} != {c0!r}")
    for (e0, s0), (e1, s1) in zip(zip(entries, snaps), zip(entries[1:], snaps[1:])):
        state = advection.AdvectionState(s0["w"], coef, e0["time"], dt, e0["step"])
        for n in range(e0["step"], e1["step"]):
            step_dt = dt
            if n == manifest["num_steps"] - 1:
                step_dt = manifest["last_dt"]
            prev = advection.AdvectionState(state.w, coef, state.time, step_dt, n)
            nxt = advection.upwind_step(prev)
            after = nxt
            if n + 1 == e1["step"]:
                after = advection.AdvectionState(s1["w"], coef, nxt.time, dt, n + 1)
            for k, p in [(k, p) for k in (0.0, lo, hi) for p in (1, 2)]:
                r = advection.entropy_residual(prev, after, k, p).values
                bad = r > 10 * advection.entropy_tolerance(prev, k, p)
                if bad.any():
                    report(f"entropy inequality (p={p}, k={k:.6g}) fails at step "
                           f"{n + 1} ({e1['file']}) at cell {_first_bad(bad)}")
                    break
            state = after
        mismatch = np.abs(nxt.w.values - s1["w"].values) > 1e-12 * (1 + w0max)
        if mismatch.any():
            report(f"{e1['file']} does not match the re-stepped solution at cell "
                   f"{_first_bad(mismatch)}")


def _check_wave(manifest, directory, coef, grid, report):
    dt = manifest["dt"]
    entries = manifest["snapshots"]
    snaps = [_load_snapshot(directory, e, grid) for e in entries]
    scale = 1.0 + max(float(np.max(np.abs(s[k].values))) for s in snaps for k in ("u", "v"))
    states = [wave.WaveState(s["u"], s["v"], coef, e["time"], dt, e["step"], s["p"])
              for e, s in zip(entries, snaps)]
    for e0, e1, s0, s1 in zip(entries, entries[1:], states, states[1:]):
        if wave.weighted_energy(s1) > wave.weighted_energy(s0) * (1 + 1e-12):
            report(f"energy increases from {e0['file']} to {e1['file']}")
        state = s0
        for n in range(e0["step"], e1["step"]):
            step_dt = manifest["last_dt"] if n == manifest["num_steps"] - 1 else dt
            prev = wave.WaveState(state.u, state.v, coef, state.time, step_dt, n, state.p)
            nxt = wave.wave_step(prev)
            after = nxt
            if n + 1 == e1["step"]:
                after = wave.WaveState(s1.u, s1.v, coef, nxt.time, dt, n + 1, s1.p)
            r = wave.wave_entropy_residual(prev, after).values
            bad = r > 10 * wave.wave_entropy_tolerance(prev)
            if bad.any():
                report(f"entropy inequality fails at step {n + 1} ({e1['file']}) "
                       f"at cell {_first_bad(bad)}")
            if step_dt == dt:
                lhs, rhs = wave.qer_identity_check(prev, after)
                if abs(lhs - rhs) > 1e-10 * max(abs(rhs), 1e-300):
                    report(f"time/space difference identity fails at step {n + 1} "
                           f"({e1['file']}): {lhs!r} vs {rhs!r}")
            state = after
        for name in ("u", "v", "p"):
            diff = np.abs(getattr(nxt, name).values - getattr(s1, name).values)
            mismatch = diff > 1e-12 * scale
            if mismatch.any():
                report(f"{e1['file']} column {name} does not match the re-stepped "
                       f"solution at cell {_first_bad(mismatch)}")


def check(manifest_path):
    """Re-run the invariant checks on the artifacts of an ``advect`` or ``wave`` run.

    Returns the exit status; failures are printed with cell indices.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read manifest {path}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: malformed manifest {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if manifest.get("command") not in ("advect", "wave"):
        print(f"error: {path} is not the manifest of an advect or wave run",
              file=sys.stderr)
        return EXIT_CONFIG
    directory = path.parent
    failures = []

    def report(message):
        failures.append(message)
        print(f"FAIL {message}")

    try:
        grid = make_grid(manifest["domain_length"], manifest["num_cells"])
        _, table = read_columns(directory / manifest["coefficient_file"])
        coef = Coefficient(GridFunction(grid, table["a"]),
                           manifest["coefficient_lower_bound"],
                           manifest["coefficient_upper_bound"])
        if manifest["command"] == "advect":
            _check_advection(manifest, directory, coef, grid, report)
        else:
            _check_wave(manifest, directory, coef, grid, report)
    except (OSError, KeyError) as exc:
        print(f"error: missing artifact or manifest field: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RoughFDError as exc:
        print(f"FAIL {exc}")
        return EXIT_FAIL
    if failures:
        return EXIT_FAIL
    print(f"check: all invariants hold for {len(manifest['snapshots'])} snapshots")
    return EXIT_OK


# -- entry points ------------------------------------------------------------

_COMMANDS = {
    "advect": cmd_advect,
    "wave": cmd_wave,
    "coefficient": cmd_coefficient,
}
_EQUATION_OF = {"advect": "advection", "wave": "wave"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="roughfd", description="Finite difference solvers with rough coefficients.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("advect", "run the upwind advection solver"),
                       ("wave", "run the acoustic wave solver"),
                       ("study", "run a mesh-refinement study"),
                       ("coefficient", "write a generated coefficient field")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", default=".", metavar="DIR")
        p.add_argument("--seed", type=int, default=None, metavar="N")
        p.add_argument("--profile", choices=PROFILES, default="full")
        if name == "study":
            p.add_argument("--jobs", type=int, default=1, metavar="N",
                           help="solve resolutions concurrently")
    p = sub.add_parser("check", help="re-check invariants of a stored run")
    p.add_argument("manifest", metavar="MANIFEST",
                   help="manifest.json of a run, or its directory")
    return parser


def run(args):
    """Dispatch parsed arguments; returns the exit status."""
    if args.command == "check":
        return check(args.manifest)
    try:
        cfg = load_config(args.config, profile=args.profile, seed=args.seed)
        expected = _EQUATION_OF.get(args.command)
        if expected and cfg.study.equation != expected:
            raise ConfigError(f"command {args.command} needs study.equation = {expected}",
                              key="study.equation")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "study":
            return cmd_study(cfg, out, n_jobs=args.jobs)
        return _COMMANDS[args.command](cfg, out)
    except RoughFDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
