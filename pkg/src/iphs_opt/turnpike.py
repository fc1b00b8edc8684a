"""Turnpike diagnostics: distance to the equilibria, horizon sweeps, norm-equivalence certificates."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.stats import qmc

from .core import Box, IphsModel, _production, distance_to_equilibria
from .errors import ConfigurationError, IphsError
from .nlp import SolverOptions
from .ocp import OcpSolution, OcpSpec, solve, transcribe
from .sim import Trajectory, refine_trajectory

log = logging.getLogger(__name__)

DEFAULT_EPS = (0.05, 0.1, 0.2)


def distance_series(model: IphsModel, traj: Trajectory) -> np.ndarray:
    return distance_to_equilibria(model, traj.x)


def integral_dist_sq(model: IphsModel, traj: Trajectory) -> float:
    """Composite Simpson quadrature of ``dist(x(t), T)^2``."""
    d = distance_series(model, traj)
    return float(max(0.0, simpson(d ** 2, x=traj.t)))


def measure_above(model: IphsModel, traj: Trajectory, eps: float) -> float:
    """Time spent at distance greater than ``eps``.

    Intervals whose two nodes are on different sides of ``eps`` contribute the
    fraction beyond the linearly interpolated crossing.
    """
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    return _measure(distance_series(model, traj), traj.t, eps)


def _measure(d, t, eps):
    d0, d1 = d[:-1], d[1:]
    dt = np.diff(t)
    above0, above1 = d0 > eps, d1 > eps
    total = np.sum(dt[above0 & above1])
    cross = above0 ^ above1
    frac = (np.maximum(d0, d1)[cross] - eps) / np.abs(d1 - d0)[cross]
    return float(total + np.sum(dt[cross] * frac))


def mid_window(t: np.ndarray, fraction: float = 0.5):
    """Boolean mask of nodes in the central ``fraction`` of the horizon."""
    t0, tf = t[0], t[-1]
    margin = 0.5 * (1 - fraction) * (tf - t0)
    return (t >= t0 + margin) & (t <= tf - margin)


def velocity_stats(traj: Trajectory, fraction: float = 0.5):
    """Mean and standard deviation of the finite-difference state velocity per state."""
    mask = mid_window(traj.t, fraction)
    inside = mask[:-1] & mask[1:]
    vel = np.diff(traj.x, axis=0) / np.diff(traj.t)[:, None]
    vel = vel[inside]
    return vel.mean(axis=0), vel.std(axis=0)


@dataclass
class HorizonRow:
    t_f: float
    status: str
    N: int
    objective: float
    quadrature_objective: float
    identity_objective: float
    terminal_error: float
    integral_dist_sq: float
    produced_entropy: float
    measure_above: dict
    chebyshev_ok: bool
    mid_max_abs_u: float
    velocity_mean: list
    velocity_std: list
    max_state_norm: float
    error: Optional[str] = None


@dataclass
class TurnpikeReport:
    rows: list
    eps: list
    C_K: float
    stabilization: float
    flags: dict
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "eps": list(self.eps),
            "C_K": self.C_K,
            "stabilization": self.stabilization,
            "flags": dict(self.flags),
            "passed": self.passed,
        }


def _row(spec: OcpSpec, sol: OcpSolution, eps_list, refine: int) -> tuple:
    model = spec.model
    traj = sol.trajectory
    fine = refine_trajectory(model, traj, refine)
    d = distance_series(model, fine)
    ids = float(simpson(d ** 2, x=fine.t))
    measures = {str(e): _measure(d, fine.t, e) for e in eps_list}
    cheb = all(measures[str(e)] <= ids / e ** 2 + 1e-6 for e in eps_list)
    mask = mid_window(traj.t)
    mid_u = traj.u[mask[:-1] & mask[1:]]
    v_mean, v_std = velocity_stats(traj)
    R = _production(model, fine.x)
    produced = float(np.sum(np.diff(fine.t) / 2 * (R[:-1] + R[1:])))
    row = HorizonRow(
        t_f=spec.t_f,
        status=sol.status,
        N=sol.N,
        objective=sol.objective,
        quadrature_objective=sol.quadrature_objective,
        identity_objective=sol.identity_objective,
        terminal_error=sol.terminal_error,
        integral_dist_sq=ids,
        produced_entropy=produced,
        measure_above=measures,
        chebyshev_ok=bool(cheb),
        mid_max_abs_u=float(np.max(np.abs(mid_u))) if len(mid_u) else 0.0,
        velocity_mean=[float(v) for v in v_mean],
        velocity_std=[float(v) for v in v_std],
        max_state_norm=float(np.max(np.linalg.norm(traj.x, axis=1))),
    )
    return row, fine


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("IPHS_OPT_THREADS", "1")))
    except ValueError:
        return 1


def horizon_sweep(spec_template: OcpSpec, horizons: Sequence[float], eps_list=DEFAULT_EPS,
                  opts: SolverOptions = SolverOptions(), intervals_per_time: float = 20.0,
                  min_intervals: int = 100, refine: int = 4, warm_start: bool = True,
                  velocity_tol: float = 0.1, stabilization_tol: float = 0.2) -> TurnpikeReport:
    """Solve the OCP for each horizon and collect turnpike metrics.

    Horizons are solved in increasing order; with ``warm_start`` each solve
    starts from the previous solution, otherwise solves run in parallel
    (capped by ``IPHS_OPT_THREADS``). Failed horizons are recorded and the
    sweep continues.

    ``C_K`` is the largest integral of the squared distance over the sweep.
    ``stabilization`` is the relative deviation ``|I_a - I_b| / max(I_a, I_b)``
    between the integrals of the two longest converged horizons, and the
    ``integral_stabilization`` flag requires it to be at most
    ``stabilization_tol``. A decaying integral is still consistent with a
    uniform bound but fails this flag.
    """
    horizons = sorted(float(h) for h in horizons)
    if not horizons:
        raise ConfigurationError("empty horizon list")
    eps_list = [float(e) for e in eps_list]

    def run(t_f, init):
        spec = spec_template.with_horizon(t_f)
        N = max(min_intervals, int(round(intervals_per_time * t_f)))
        return spec, solve(transcribe(spec, N), init, opts)

    results = []
    if warm_start:
        init = "cold"
        for t_f in horizons:
            try:
                spec, sol = run(t_f, init)
                if sol.converged:
                    init = sol.trajectory
                results.append((t_f, spec, sol, None))
            except IphsError as exc:
                log.warning("horizon %g failed: %s", t_f, exc)
                results.append((t_f, None, None, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            futures = [pool.submit(run, t_f, "cold") for t_f in horizons]
            for t_f, fut in zip(horizons, futures):
                try:
                    spec, sol = fut.result()
                    results.append((t_f, spec, sol, None))
                except IphsError as exc:
                    results.append((t_f, None, None, str(exc)))

    rows, trajs = [], {}
    for t_f, spec, sol, err in results:
        if sol is None:
            rows.append(HorizonRow(t_f, "error", 0, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, {}, False,
                                   np.nan, [], [], np.nan, error=err))
            continue
        row, fine = _row(spec, sol, eps_list, refine)
        rows.append(row)
        trajs[t_f] = (sol.trajectory, fine)

    ok = [r for r in rows if r.status == "converged"]
    integrals = [r.integral_dist_sq for r in ok]
    C_K = float(max(integrals)) if integrals else float("nan")
    top_vals = integrals[-2:]
    stabilization = 0.0
    if len(top_vals) == 2 and max(top_vals) > 0:
        stabilization = float(abs(top_vals[1] - top_vals[0]) / max(top_vals))
    mid_u = [r.mid_max_abs_u for r in ok]

    def velocity_ok(r):
        return all(s <= velocity_tol * abs(mu) or s <= 1e-12 for mu, s in zip(r.velocity_mean, r.velocity_std))

    flags = {
        "all_converged": len(ok) == len(rows),
        "chebyshev": all(r.chebyshev_ok for r in ok),
        # slack: controls are only resolved to the solver's optimality tolerance
        "control_turnpike": all(b <= a + opts.opt_tol for a, b in zip(mid_u, mid_u[1:])),
        "velocity_turnpike": all(velocity_ok(r) for r in ok),
        "integral_stabilization": bool(stabilization <= stabilization_tol),
    }
    return TurnpikeReport(rows, eps_list, C_K, stabilization, flags, trajs)


@dataclass
class LemmaCertificate:
    K_lo: list
    K_hi: list
    n_samples: int
    n_skipped: int
    n_invalid: int
    c_lower: float
    c_upper: float
    lip_lower: float
    lip_upper: float
    n_pairs: int

    @property
    def valid(self) -> bool:
        return (self.n_invalid == 0 and 0 < self.c_lower <= self.c_upper < np.inf
                and 0 < self.lip_lower <= self.lip_upper < np.inf)

    def brackets(self, ratio: float) -> bool:
        return self.c_lower <= ratio <= self.c_upper

    def to_dict(self):
        d = asdict(self)
        d["valid"] = self.valid
        return d


def sample_box(box: Box, n_samples: int, seed: int = 0, pairs: bool = False) -> np.ndarray:
    """Scrambled Halton points in ``box``; prefixes are nested for a fixed seed.

    With ``pairs=True`` returns shape ``(n_samples, 2, n)``.
    """
    n = len(box.lo)
    dim = 2 * n if pairs else n
    unit = qmc.Halton(d=dim, scramble=True, seed=seed).random(n_samples)
    span = box.hi - box.lo
    if pairs:
        return box.lo + unit.reshape(n_samples, 2, n) * span
    return box.lo + unit * span


def lemma_certificate(model: IphsModel, K: Box, n_samples: int = 10_000, seed: int = 0) -> LemmaCertificate:
    """Empirical constants for ``c dist^2 <= R(x) <= C dist^2`` on ``K``.

    Samples on the equilibrium set (zero distance) are skipped and counted.
    The same sample pairs certify the bi-Lipschitz bound
    ``c1 |x1 - x2| <= |H_x(x1) - H_x(x2)| <= C1 |x1 - x2|``.
    """
    if n_samples < 1:
        raise ConfigurationError("need at least one sample")
    if np.any(K.lo < model.domain.lo) or np.any(K.hi > model.domain.hi):
        raise ConfigurationError("K must lie inside the model domain")
    P = sample_box(K, n_samples, seed, pairs=True)
    x, y = P[:, 0], P[:, 1]
    d = distance_to_equilibria(model, x)
    R = _production(model, x)
    on_set = d == 0.0
    ratio = R[~on_set] / d[~on_set] ** 2
    finite = np.isfinite(ratio)
    n_invalid = int(np.sum(~finite))
    ratio = ratio[finite]

    dx = np.linalg.norm(x - y, axis=1)
    dg = np.linalg.norm(model.H.grad(x) - model.H.grad(y), axis=1)
    keep = dx > 0
    lip = dg[keep] / dx[keep]
    return LemmaCertificate(
        K_lo=[float(v) for v in K.lo],
        K_hi=[float(v) for v in K.hi],
        n_samples=n_samples,
        n_skipped=int(np.sum(on_set)),
        n_invalid=n_invalid,
        c_lower=float(ratio.min()) if len(ratio) else float("nan"),
        c_upper=float(ratio.max()) if len(ratio) else float("nan"),
        lip_lower=float(lip.min()) if len(lip) else float("nan"),
        lip_upper=float(lip.max()) if len(lip) else float("nan"),
        n_pairs=int(np.sum(keep)),
    )


def certificate_violations(model: IphsModel, cert: LemmaCertificate, seed: int = 0) -> dict:
    """Recount sampled points violating the certified inequalities (should be zero)."""
    K = Box(np.array(cert.K_lo), np.array(cert.K_hi))
    P = sample_box(K, cert.n_samples, seed, pairs=True)
    x, y = P[:, 0], P[:, 1]
    d = distance_to_equilibria(model, x)
    R = _production(model, x)
    off = d > 0
    ratio = R[off] / d[off] ** 2
    dx = np.linalg.norm(x - y, axis=1)
    dg = np.linalg.norm(model.H.grad(x) - model.H.grad(y), axis=1)
    lip = dg[dx > 0] / dx[dx > 0]
    low, high = np.sum(ratio < cert.c_lower), np.sum(ratio > cert.c_upper)
    lip_low, lip_high = np.sum(lip < cert.lip_lower), np.sum(lip > cert.lip_upper)
    return {"lower": int(low), "upper": int(high), "lip_lower": int(lip_low), "lip_upper": int(lip_high)}
