"""kpidyn command line: eig, solve, plan, simulate, scan, invariants, profit.

Exit codes: 0 success, 1 domain error (machine-readable JSON on stderr),
2 usage error.  Every file-producing run leaves a <out>.manifest.json
next to its primary output with the tool version, the fully resolved
configuration, input digests and the output list -- enough to replay
the run bit-identically on the same platform.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import InvalidFormat, KpidynError
from .invariants import build_report
from .io import (build_manifest, load_model, load_perturbation,
                 read_trajectory_csv, write_manifest, write_series_csv,
                 write_trajectory_csv)
from .model import QuadraticWell
from .oscillators import forcing_peak, parametric_growth_rate, simulate_perturbed
from .planner import PlanState, plan_horizon
from .transforms import eigenlosses, modal_basis
from .variational import SolverSettings, compute_profit, solve_bvp_direct, solve_bvp_shooting

OUT_DIR_ENV = "KPIDYN_OUT_DIR"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        inputs, outputs = args.handler(args)
    except KpidynError as exc:
        _emit_error(exc)
        return 1
    except BrokenPipeError:
        # downstream reader (head, less) went away; not our error
        return 0
    except OSError as exc:
        _emit_error(exc)
        return 1
    if outputs:
        manifest = build_manifest(
            version=__version__, subcommand=args.command,
            config=_config_dict(args), input_paths=inputs, output_paths=outputs,
            duration_seconds=time.perf_counter() - started)
        write_manifest(manifest, str(outputs[0]) + ".manifest.json")
    return 0


def _emit_error(exc: Exception) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(doc), file=sys.stderr)


def _config_dict(args) -> dict:
    cfg = {}
    for key, val in vars(args).items():
        if key == "handler":
            continue
        cfg[key] = val if not isinstance(val, (list, tuple)) else list(val)
    return cfg


def _resolve_out(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


# -- subcommand handlers -----------------------------------------------------

def _cmd_eig(args):
    spec = load_model(args.model)
    dec = eigenlosses(spec.loss)
    result = {"eigenlosses": dec.eigenvalues.tolist(),
              "loss_rotation": dec.rotation.tolist()}
    if isinstance(spec.gain, QuadraticWell):
        basis = modal_basis(spec.loss, spec.gain)
        result["frequencies"] = basis.frequencies.tolist()
        result["modal_rotation"] = basis.modal_rotation.tolist()
        result["whitening"] = basis.whitening.tolist()
        result["center"] = basis.center.tolist()
    if args.json:
        print(json.dumps(result, indent=2))
    else:
        _print_eig_text(result)
    outputs = []
    if args.out:
        out = _resolve_out(args.out)
        with open(out, "w") as fh:
            json.dump(result, fh, indent=2)
            fh.write("\n")
        outputs.append(out)
    return [args.model], outputs


def _print_eig_text(result: dict) -> None:
    def vec(v):
        return "  ".join(format(x, ".12g") for x in v)

    print("eigenlosses:", vec(result["eigenlosses"]))
    if "frequencies" in result:
        print("frequencies:", vec(result["frequencies"]))
    print("loss rotation:")
    for row in result["loss_rotation"]:
        print("   ", vec(row))
    if "modal_rotation" in result:
        print("modal rotation:")
        for row in result["modal_rotation"]:
            print("   ", vec(row))


def _cmd_solve(args):
    spec = load_model(args.model)
    if spec.boundary is None:
        raise KpidynError(f"{args.model}: solve needs a 'boundary' section")
    settings = SolverSettings(dt=args.dt, shooting_tol=args.tol,
                              direct_grad_tol=args.tol or 1e-8)
    if args.method == "shooting":
        traj = solve_bvp_shooting(spec.loss, spec.gain, spec.boundary, settings)
    else:
        n_steps = args.steps or max(2, int(round(spec.boundary.span / args.dt)))
        traj = solve_bvp_direct(spec.loss, spec.gain, spec.boundary, n_steps, settings)
    out = _resolve_out(args.out)
    write_trajectory_csv(out, traj, spec.loss, spec.gain)
    return [args.model], [out]


def _cmd_plan(args):
    spec = load_model(args.model)
    prev = _load_kpi_json(args.prev)
    curr = _load_kpi_json(args.curr)
    state = PlanState(x_prev=prev, x_curr=curr, dt=args.dt)
    traj = plan_horizon(spec.loss, spec.gain, state, args.steps)
    out = _resolve_out(args.out)
    write_trajectory_csv(out, traj, spec.loss, spec.gain)
    return [args.model, args.prev, args.curr], [out]


def _load_kpi_json(path) -> np.ndarray:
    """Accept a bare JSON array or an object with a 'values' field."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidFormat(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict):
        doc = doc.get("values")
    try:
        return np.asarray(doc, dtype=float)
    except (TypeError, ValueError):
        raise InvalidFormat(f"{path}: expected a JSON array of numbers") from None


def _cmd_simulate(args):
    spec = load_model(args.model)
    if not isinstance(spec.gain, QuadraticWell):
        raise KpidynError("simulate needs a quadratic_well gain to define modes")
    basis = modal_basis(spec.loss, spec.gain)
    pert = load_perturbation(args.perturb)
    if args.y0 is not None:
        y0 = np.asarray(_csv_floats(args.y0))
    elif spec.boundary is not None:
        y0 = basis.to_modal(spec.boundary.x1)
    else:
        raise KpidynError("no --y0 given and the model has no boundary to start from")
    v0 = np.asarray(_csv_floats(args.v0)) if args.v0 is not None else np.zeros(spec.n)
    run = simulate_perturbed(basis.frequencies, pert, y0, v0, (0.0, args.t), args.dt)
    out = _resolve_out(args.out)
    traj = run.trajectory
    cols = {"t": traj.times}
    for i in range(traj.n):
        cols[f"y_{i+1}"] = traj.states[:, i]
    for i in range(traj.n):
        cols[f"v_{i+1}"] = traj.velocities[:, i]
    cols["E"] = run.energy
    write_series_csv(out, cols)
    return [args.model, args.perturb], [out]


def _forcing_task(task):
    freqs, amp, f, duration, dt = task
    return forcing_peak(freqs, amp, f, duration, dt)


def _parametric_task(task):
    omega, a, phase, duration, dt = task
    return parametric_growth_rate(omega, a, phase, duration, dt).exponent


def _cmd_scan(args):
    spec = load_model(args.model)
    if not isinstance(spec.gain, QuadraticWell):
        raise KpidynError("scan needs a quadratic_well gain to define modes")
    basis = modal_basis(spec.loss, spec.gain)
    grid = np.asarray(_csv_floats(args.grid))
    if grid.size < 1:
        raise KpidynError("--grid must list at least one value")

    if args.kind == "forcing":
        duration = args.duration or 40.0 * np.pi / float(basis.frequencies.min())
        tasks = [(basis.frequencies, args.amplitude, f, duration, args.dt) for f in grid]
        values = _run_tasks(_forcing_task, tasks, args.jobs)
        cols = {"frequency": grid, "peak_response": np.asarray(values)}
    else:
        omega = args.omega or float(basis.frequencies.max())
        duration = args.duration or 30.0 * 2.0 * np.pi / omega
        tasks = [(omega, a, args.phase, duration, args.dt) for a in grid]
        values = _run_tasks(_parametric_task, tasks, args.jobs)
        cols = {"pump_amplitude": grid, "growth_exponent": np.asarray(values)}

    out = _resolve_out(args.out)
    write_series_csv(out, cols)
    return [args.model], [out]


def _run_tasks(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _cmd_invariants(args):
    spec = load_model(args.model)
    traj = read_trajectory_csv(args.traj)
    basis = modal_basis(spec.loss, spec.gain) if isinstance(spec.gain, QuadraticWell) else None
    report = build_report(spec.loss, spec.gain, traj, basis=basis, rel_tol=args.tol)
    doc = {
        "drift": report.drift,
        "alarms": [{"time": a.time, "invariant": a.invariant, "deviation": a.deviation}
                   for a in report.alarms],
        "power_series": report.power_series.tolist(),
        "residual_series": report.residual_series.tolist(),
    }
    if report.modal_series is not None:
        doc["modal"] = {
            "frequencies": basis.frequencies.tolist(),
            "amplitudes": report.modal_series.amplitudes.tolist(),
            "phases": report.modal_series.phases.tolist(),
        }
    text = json.dumps(doc, indent=2)
    print(text)
    outputs = []
    if args.out:
        out = _resolve_out(args.out)
        with open(out, "w") as fh:
            fh.write(text + "\n")
        outputs.append(out)
    return [args.model, args.traj], outputs


def _cmd_profit(args):
    spec = load_model(args.model)
    traj = read_trajectory_csv(args.traj)
    profit = compute_profit(spec.loss, spec.gain, traj)
    print(format(profit, ".17g"))
    return [args.model, args.traj], []


# -- parser ------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpidyn",
                                     description="KPI-trajectory toolkit")
    parser.add_argument("--version", action="version", version=f"kpidyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eig", help="eigenlosses, frequencies and rotations")
    p.add_argument("--model", required=True)
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.add_argument("--out", default=None, help="also write the JSON result here")
    p.set_defaults(handler=_cmd_eig)

    p = sub.add_parser("solve", help="solve the two-point boundary problem")
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("shooting", "direct"), default="shooting")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=None,
                   help="direct method: number of grid intervals")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("plan", help="iterate the operational-planning recurrence")
    p.add_argument("--model", required=True)
    p.add_argument("--prev", required=True, help="JSON file with the previous KPI vector")
    p.add_argument("--curr", required=True, help="JSON file with the current KPI vector")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("simulate", help="run the perturbed modal oscillators")
    p.add_argument("--model", required=True)
    p.add_argument("--perturb", required=True)
    p.add_argument("--t", type=float, required=True, help="simulation span")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--y0", default=None, help="comma-separated modal start state")
    p.add_argument("--v0", default=None, help="comma-separated modal start velocity")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("scan", help="response scans over a frequency/amplitude grid")
    p.add_argument("--kind", choices=("forcing", "parametric"), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True,
                   help="comma-separated drive frequencies (forcing) or pump amplitudes")
    p.add_argument("--amplitude", type=float, default=0.1, help="forcing amplitude")
    p.add_argument("--phase", type=float, default=np.pi, help="parametric pump phase")
    p.add_argument("--omega", type=float, default=None,
                   help="parametric: mode frequency (default: largest modal frequency)")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for the grid")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_scan)

    p = sub.add_parser("invariants", help="invariant report for a stored trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_invariants)

    p = sub.add_parser("profit", help="profit integral of a stored trajectory")
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)
    p.set_defaults(handler=_cmd_profit)

    return parser


if __name__ == "__main__":
    sys.exit(main())
