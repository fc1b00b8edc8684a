"""Command line entry point: ``iphs-opt {simulate,solve,sweep,certify}``.

Exit codes: 0 on success, 1 on numerical failure (non-convergence,
infeasibility, violated balance or failed pass flags), 2 on configuration
errors. Every command writes a ``summary.json`` with sorted keys and no
timings (timings go to ``timings.json``), so repeated runs with the same
config and seed produce identical summaries.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_config
from .core import distance_to_equilibria
from .errors import ConfigurationError, DimensionError, IphsError
from .ocp import reachability_probe, solve, transcribe
from .plotting import write_plot_data, write_svg
from .sim import balance_report, integrate, write_trajectory_csv, write_trajectory_json
from .turnpike import certificate_violations, horizon_sweep, lemma_certificate

log = logging.getLogger("iphs_opt")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars/arrays to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_clean(data), sort_keys=True, indent=2) + "\n")
    return path


def _formats(cfg: ScenarioConfig, args) -> set:
    return set(args.format) if args.format else set(cfg.output.formats)


def _save_trajectory(traj, out: Path, stem: str, formats: set):
    if "csv" in formats:
        write_trajectory_csv(traj, out / f"{stem}.csv")
    if "json" in formats:
        write_trajectory_json(traj, out / f"{stem}.json")


# subcommands ----------------------------------------------------------------------

def cmd_simulate(cfg: ScenarioConfig, out: Path, args) -> tuple:
    sim = cfg.require("simulate")
    model = cfg.build_model()
    u = cfg.control_signal()
    traj = integrate(model, np.array(sim.x0, dtype=float), u, sim.t_f, cfg.integrator_options())
    rep = balance_report(model, traj)
    H = model.H.eval(traj.x)
    S = model.S(traj.x)
    H0, S0 = float(H[0]), float(S[0])
    ok = rep.within(cfg.numerics.balance_tol, H0, S0)
    summary = {
        "command": "simulate",
        "model": model.name,
        "balance": rep.as_dict(),
        "balance_tol": cfg.numerics.balance_tol,
        "within_tolerance": ok,
        "H_drift": float(np.max(np.abs(H - H0))),
        "S_nondecreasing_violation": float(max(0.0, -np.min(np.diff(S)))) if len(S) > 1 else 0.0,
        "final_state": traj.x[-1],
        "final_distance": float(distance_to_equilibria(model, traj.x[-1])),
    }
    formats = _formats(cfg, args)
    _save_trajectory(traj, out, "trajectory", formats)
    write_plot_data(model, traj, out)
    if "svg" in formats:
        write_svg(model, {"simulation": traj}, out / "simulation.svg")
    return summary, ok


def cmd_solve(cfg: ScenarioConfig, out: Path, args) -> tuple:
    spec = cfg.ocp_spec()
    N = cfg.numerics.N
    if N is None:
        N = max(cfg.numerics.min_intervals, int(round(cfg.numerics.intervals_per_time * spec.t_f)))
    sol = solve(transcribe(spec, N), "cold", cfg.solver_options())
    summary = {"command": "solve", "model": spec.model.name, "solution": sol.summary()}
    if not sol.converged:
        probe = reachability_probe(spec, cfg.integrator_options())
        summary["reachability_probe"] = {k: v for k, v in probe.items()}
        summary["terminal_target"] = spec.terminal.x
    formats = _formats(cfg, args)
    _save_trajectory(sol.trajectory, out, "trajectory", formats)
    write_plot_data(spec.model, sol.trajectory, out)
    if "svg" in formats:
        write_svg(spec.model, {f"t_f={spec.t_f:g}": sol.trajectory}, out / "solution.svg")
    return summary, sol.converged


def cmd_sweep(cfg: ScenarioConfig, out: Path, args) -> tuple:
    spec = cfg.ocp_spec()
    n = cfg.numerics
    tp = cfg.turnpike
    report = horizon_sweep(
        spec, cfg.horizons(), tp.eps, cfg.solver_options(),
        intervals_per_time=n.intervals_per_time, min_intervals=n.min_intervals, refine=n.refine,
        warm_start=n.warm_start, velocity_tol=tp.velocity_tol, stabilization_tol=tp.stabilization_tol,
    )
    formats = _formats(cfg, args)
    labelled = {}
    for t_f, (traj, fine) in report.trajectories.items():
        stem = f"tf{t_f:g}"
        _save_trajectory(traj, out, f"trajectory_{stem}", formats)
        write_plot_data(spec.model, fine, out, stem)
        labelled[f"t_f={t_f:g}"] = fine
    if "svg" in formats and labelled:
        write_svg(spec.model, labelled, out / "sweep.svg")
    summary = {"command": "sweep", "model": spec.model.name, "turnpike": report.to_dict(),
               "failed_flags": sorted(k for k, v in report.flags.items() if not v)}
    return summary, report.passed


def cmd_certify(cfg: ScenarioConfig, out: Path, args) -> tuple:
    model = cfg.build_model()
    K = cfg.certify_box()
    cert = lemma_certificate(model, K, cfg.certify.n_samples, seed=args.seed)
    viol = certificate_violations(model, cert, seed=args.seed)
    summary = {"command": "certify", "model": model.name, "seed": args.seed,
               "certificate": cert.to_dict(), "check": viol}
    ok = cert.valid and sum(viol.values()) == 0
    return summary, ok


COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iphs-opt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="scenario TOML file")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides [output].directory)")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--format", action="append", choices=["csv", "json", "svg"],
                       help="output format, repeatable (overrides [output].formats)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = args.out if args.out is not None else Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        summary, ok = COMMANDS[args.command](cfg, out, args)
    except (ConfigurationError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IphsError, FloatingPointError) as exc:
        summary = {"command": args.command, "status": "error", "error": f"{type(exc).__name__}: {exc}"}
        ok = False
    summary["ok"] = bool(ok)
    write_json(out / "summary.json", summary)
    write_json(out / "timings.json", {"command": args.command, "seconds": time.perf_counter() - start})
    status = "ok" if ok else "FAILED"
    print(f"{args.command}: {status} (summary in {out / 'summary.json'})")
    if summary.get("failed_flags"):
        print(f"failed flags: {', '.join(summary['failed_flags'])}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
