"""Time integration of IPHS trajectories and energy/entropy balance checks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    CostWeights,
    IphsModel,
    _port_power,
    _production,
    _rhs,
    _stage_cost,
    check_state,
)
from .errors import ConfigurationError, IntegrationAbort, StiffnessError


@dataclass(frozen=True)
class ControlSignal:
    """Input signal ``u(t)`` or feedback ``u(t, x)``.

    ``kind`` is ``"zero"``, ``"piecewise"`` (zero-order hold of ``values[k]`` on
    ``[grid[k], grid[k+1])``) or ``"callable"``. Piecewise signals hold their
    end values outside the grid.
    """

    kind: str
    m: int
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    fn: Optional[Callable] = None
    knots: tuple = ()

    @classmethod
    def zero(cls, m: int = 1):
        return cls("zero", m)

    @classmethod
    def piecewise(cls, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or len(grid) != len(values) + 1 or np.any(np.diff(grid) <= 0):
            raise ConfigurationError("piecewise control needs a strictly increasing grid with len(values)+1 points")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("control values must be finite")
        return cls("piecewise", values.shape[1], grid, values)

    @classmethod
    def from_callable(cls, fn, m: int = 1, knots=()):
        """Wrap ``fn(t, x) -> (m,)``; ``knots`` are times where it may jump."""
        return cls("callable", m, fn=fn, knots=tuple(float(k) for k in knots))

    @classmethod
    def constant(cls, value, t_f: float):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls.piecewise([0.0, t_f], value[None, :])

    def __call__(self, t, x=None) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.m)
        if self.kind == "piecewise":
            k = np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, len(self.values) - 1)
            return self.values[k]
        return np.atleast_1d(np.asarray(self.fn(t, x), dtype=float))

    def breakpoints(self, t0: float, t1: float) -> np.ndarray:
        """Times strictly inside ``(t0, t1)`` where the signal may jump."""
        if self.kind == "piecewise":
            pts = self.grid
        elif self.kind == "callable":
            pts = np.asarray(self.knots, dtype=float)
        else:
            return np.empty(0)
        return np.unique(pts[(pts > t0) & (pts < t1)])

    def shifted(self, offset: float) -> "ControlSignal":
        if self.kind == "piecewise":
            return replace(self, grid=self.grid + offset)
        if self.kind == "callable":
            fn = self.fn
            return replace(self, fn=lambda t, x: fn(t - offset, x), knots=tuple(k + offset for k in self.knots))
        return self

    def max_abs(self) -> float:
        if self.kind == "piecewise":
            return float(np.max(np.abs(self.values)))
        if self.kind == "zero":
            return 0.0
        raise ConfigurationError("max_abs is not defined for callable controls")


@dataclass
class Trajectory:
    """Time grid, states at the nodes and controls.

    ``hold == "zoh"``: ``u[k]`` acts on ``[t[k], t[k+1]]`` (shape ``(N, m)``).
    ``hold == "node"``: ``u[k]`` is the value at ``t[k]`` (shape ``(N+1, m)``).
    ``meta["quadrature"]`` selects composite Simpson over node pairs (grids
    produced by :func:`integrate`) or the trapezoidal rule.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    hold: str = "zoh"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim == 1:
            self.u = self.u[:, None]
        if self.t.ndim != 1 or len(self.t) < 2 or np.any(np.diff(self.t) <= 0):
            raise ConfigurationError("trajectory time grid must be strictly increasing with >= 2 nodes")
        if self.x.shape[0] != len(self.t) or not np.all(np.isfinite(self.x)):
            raise ConfigurationError("states must be finite, one per node")
        expected = len(self.t) - 1 if self.hold == "zoh" else len(self.t)
        if self.hold not in ("zoh", "node") or self.u.shape[0] != expected:
            raise ConfigurationError(f"control samples do not match hold={self.hold!r}")

    @property
    def t_f(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    def control_signal(self) -> ControlSignal:
        if self.hold != "zoh":
            raise ConfigurationError("only zero-order-hold trajectories define a piecewise control")
        return ControlSignal.piecewise(self.t - self.t[0], self.u)

    def node_controls(self) -> np.ndarray:
        """Controls at the nodes (for ``zoh`` the right-continuous value)."""
        if self.hold == "node":
            return self.u
        return np.vstack([self.u, self.u[-1:]])


@dataclass(frozen=True)
class IntegratorOptions:
    method: str = "adaptive"  # "adaptive" (DOP853) or "rk4"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt: float = 1e-2
    max_step: float = np.inf
    samples_per_step: int = 8  # adaptive only; even, for Simpson panels

    def __post_init__(self):
        if self.method not in ("adaptive", "rk4"):
            raise ConfigurationError(f"unknown integrator {self.method!r}")
        if self.samples_per_step < 2 or self.samples_per_step % 2:
            raise ConfigurationError("samples_per_step must be an even number >= 2")
        if self.dt <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ConfigurationError("integrator tolerances and step must be positive")


def _segments(u: ControlSignal, t_f: float):
    edges = np.concatenate([[0.0], u.breakpoints(0.0, t_f), [t_f]])
    return list(zip(edges[:-1], edges[1:]))


def _rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(model: IphsModel, x0, u: ControlSignal, t_f: float, opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Simulate ``xdot = rhs(x, u(t))`` on ``[0, t_f]``.

    The output grid subdivides every integrator step into an even number of
    equal pieces (dense output for the adaptive method, the midpoint for
    RK4), so running integrals can be evaluated with composite Simpson on
    the stored samples.

    Raises :class:`IntegrationAbort` when an accepted step leaves the model
    domain and :class:`StiffnessError` on step-size underflow.
    """
    x0 = check_state(model, x0)
    if not t_f > 0:
        raise ConfigurationError("t_f must be positive")
    if u.m != model.m:
        raise ConfigurationError(f"control has {u.m} channels, model expects {model.m}")

    ts, xs = [np.array([0.0])], [x0[None, :]]
    x_start = x0
    for a, b in _segments(u, t_f):
        mid = 0.5 * (a + b)
        if u.kind == "callable":
            fun = lambda t, x: _rhs(model, x, u(t, x))
        else:
            u_seg = u(mid)
            fun = lambda t, x, _u=u_seg: _rhs(model, x, _u)

        if opts.method == "adaptive":
            sol = solve_ivp(fun, (a, b), x_start, method="DOP853", rtol=opts.rtol, atol=opts.atol,
                            dense_output=True, max_step=opts.max_step)
            if sol.status != 0:
                raise StiffnessError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
            nodes = sol.t
            sub = opts.samples_per_step
            frac = np.arange(1, sub + 1) / sub
            seg_t = (nodes[:-1, None] + np.diff(nodes)[:, None] * frac).ravel()
            seg_x = sol.sol(seg_t).T
            # keep the accepted step values exactly
            seg_t[sub - 1::sub] = nodes[1:]
            seg_x[sub - 1::sub] = sol.y.T[1:]
            x_end = sol.y[:, -1]
        else:
            steps = max(1, int(np.ceil((b - a) / opts.dt - 1e-9)))
            h = (b - a) / steps
            nodes = a + h * np.arange(steps + 1)
            mids = nodes[:-1] + h / 2
            x_nodes = np.empty((steps + 1, model.n))
            x_mids = np.empty((steps, model.n))
            x_nodes[0] = x_start
            for k in range(steps):
                x_mids[k] = _rk4_step(fun, nodes[k], x_nodes[k], h / 2)
                x_nodes[k + 1] = _rk4_step(fun, nodes[k], x_nodes[k], h)
            seg_t = np.empty(2 * steps)
            seg_x = np.empty((2 * steps, model.n))
            seg_t[0::2], seg_t[1::2] = mids, nodes[1:]
            seg_x[0::2], seg_x[1::2] = x_mids, x_nodes[1:]
            x_end = x_nodes[-1]

        ok = np.all(np.isfinite(seg_x), axis=1) & model.domain.contains(seg_x)
        if not np.all(ok):
            bad = int(np.argmin(ok))
            t_last = seg_t[bad - 1] if bad > 0 else ts[-1][-1]
            x_last = seg_x[bad - 1] if bad > 0 else xs[-1][-1]
            raise IntegrationAbort(f"state left the domain near t={seg_t[bad]:.6g}", t_last, x_last)
        ts.append(seg_t)
        xs.append(seg_x)
        x_start = x_end

    t = np.concatenate(ts)
    x = np.vstack(xs)
    if u.kind == "callable":
        uu, hold = np.array([u(ti, xi) for ti, xi in zip(t, x)]), "node"
    else:
        mids = 0.5 * (t[:-1] + t[1:])
        uu = np.zeros((len(mids), model.m)) if u.kind == "zero" else u(mids)
        hold = "zoh"
    meta = {
        "model": model.name,
        "integrator": "DOP853" if opts.method == "adaptive" else "rk4",
        "rtol": opts.rtol,
        "atol": opts.atol,
        "dt": opts.dt if opts.method == "rk4" else None,
        "quadrature": "simpson",
    }
    return Trajectory(t, x, uu.reshape(len(uu), model.m), hold, meta)


# quadrature ------------------------------------------------------------------

def _node_values(traj: Trajectory, fn):
    """Evaluate ``fn(x, u)`` at the nodes, returning left/right interval values.

    For ``zoh`` both ends of interval ``k`` use ``u[k]``.
    """
    if traj.hold == "zoh":
        left = fn(traj.x[:-1], traj.u)
        right = fn(traj.x[1:], traj.u)
    else:
        vals = fn(traj.x, traj.u)
        left, right = vals[:-1], vals[1:]
    return left, right


def integrate_running(traj: Trajectory, fn) -> float:
    """Integral of ``fn(x, u)`` along the trajectory.

    Simpson over node pairs for integrator grids, trapezoidal otherwise.
    """
    left, right = _node_values(traj, fn)
    dt = np.diff(traj.t)
    if traj.meta.get("quadrature") == "simpson" and len(dt) % 2 == 0:
        h = dt[0::2] + dt[1::2]
        # each panel lies inside one integrator step, so the midpoint is exact
        return float(np.sum(h / 6 * (left[0::2] + 4 * right[0::2] + right[1::2])))
    return float(np.sum(dt / 2 * (left + right)))


def cumulative_running(traj: Trajectory, fn) -> np.ndarray:
    """Trapezoidal cumulative integral of ``fn`` at the nodes."""
    left, right = _node_values(traj, fn)
    return np.concatenate([[0.0], np.cumsum(np.diff(traj.t) / 2 * (left + right))])


@dataclass(frozen=True)
class BalanceReport:
    energy_residual: float
    entropy_residual: float
    produced_entropy: float
    supplied_energy: float
    supplied_entropy: float
    delta_H: float
    delta_S: float

    def within(self, rel_tol: float, H0: float = 0.0, S0: float = 0.0) -> bool:
        return (self.energy_residual <= rel_tol * (1 + abs(H0) + abs(self.supplied_energy))
                and self.entropy_residual <= rel_tol * (1 + abs(S0) + abs(self.produced_entropy) + abs(self.supplied_entropy)))

    def as_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def balance_report(model: IphsModel, traj: Trajectory) -> BalanceReport:
    """Residuals of ``dH/dt = y_H.u`` and ``dS/dt = R + y_S.u`` over the trajectory.

    For affine models the supply includes the offset ``W``.
    """
    produced = integrate_running(traj, lambda x, u: _production(model, x))
    e_supply = integrate_running(traj, lambda x, u: _port_power(model, x, u)[0])
    s_supply = integrate_running(traj, lambda x, u: _port_power(model, x, u)[1])
    dH = float(model.H.eval(traj.x[-1]) - model.H.eval(traj.x[0]))
    dS = float(model.S(traj.x[-1]) - model.S(traj.x[0]))
    return BalanceReport(
        energy_residual=abs(dH - e_supply),
        entropy_residual=abs(dS - produced - s_supply),
        produced_entropy=produced,
        supplied_energy=e_supply,
        supplied_entropy=s_supply,
        delta_H=dH,
        delta_S=dS,
    )


@dataclass(frozen=True)
class CostEvaluation:
    quadrature: float
    identity: float
    discrepancy: float
    produced_entropy: float


def cost_of_trajectory(model: IphsModel, traj: Trajectory, weights: CostWeights) -> CostEvaluation:
    """Cost by quadrature of the stage cost and by the balance identity.

    The identity form ``a1 dH + a2 T0 (-dS + int R)`` follows from the balance
    laws; it only applies to plain (non-affine) models.
    """
    quad = integrate_running(traj, lambda x, u: _stage_cost(model, x, u, weights))
    produced = integrate_running(traj, lambda x, u: _production(model, x))
    dH = float(model.H.eval(traj.x[-1]) - model.H.eval(traj.x[0]))
    dS = float(model.S(traj.x[-1]) - model.S(traj.x[0]))
    ident = weights.alpha1 * dH + weights.alpha2 * weights.T0 * (produced - dS)
    return CostEvaluation(quad, ident, abs(quad - ident), produced)


def refine_trajectory(model: IphsModel, traj: Trajectory, factor: int = 4) -> Trajectory:
    """Insert ``factor - 1`` nodes per interval by re-simulating each interval.

    Each interval restarts from its own node with its held control (classical
    RK4 substeps), so the refinement never drifts away from the given nodes.
    """
    if traj.hold != "zoh":
        raise ConfigurationError("refinement needs a zero-order-hold trajectory")
    if factor < 1:
        raise ConfigurationError("refinement factor must be >= 1")
    if factor == 1:
        return traj
    N = len(traj.t) - 1
    h = np.diff(traj.t) / factor
    x = traj.x[:-1].copy()
    sub = [x]
    f = lambda _, z: _rhs(model, z, traj.u)
    for _ in range(factor - 1):
        x = x + (h[:, None] / 6) * _rk4_increment(f, x, h)
        sub.append(x)
    xs = np.stack(sub, axis=1).reshape(N * factor, model.n)
    ts = (traj.t[:-1, None] + h[:, None] * np.arange(factor)).ravel()
    t = np.append(ts, traj.t[-1])
    x_all = np.vstack([xs, traj.x[-1:]])
    u = np.repeat(traj.u, factor, axis=0)
    meta = dict(traj.meta, refined=factor, quadrature="trapezoid")
    return Trajectory(t, x_all, u, "zoh", meta)


def _rk4_increment(f, x, h):
    hh = h[:, None]
    k1 = f(None, x)
    k2 = f(None, x + hh / 2 * k1)
    k3 = f(None, x + hh / 2 * k2)
    k4 = f(None, x + hh * k3)
    return k1 + 2 * k2 + 2 * k3 + k4


# export ----------------------------------------------------------------------

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    """Columns ``t, x1..xn, u1..um``; zoh controls are repeated on the last row.

    The first line is a ``#`` comment holding ``hold`` and ``meta`` as JSON.
    """
    path = Path(path)
    u = traj.node_controls()
    with path.open("w", newline="") as fh:
        fh.write("# " + json.dumps({"hold": traj.hold, "meta": traj.meta}, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(traj.n)] + [f"u{j + 1}" for j in range(traj.m)])
        for k in range(len(traj.t)):
            w.writerow([_fmt(traj.t[k])] + [_fmt(v) for v in traj.x[k]] + [_fmt(v) for v in u[k]])
    return path


def read_trajectory_csv(path, hold: Optional[str] = None, meta: Optional[dict] = None) -> Trajectory:
    """Read a file written by :func:`write_trajectory_csv`.

    ``hold`` and ``meta`` default to the values stored in the comment line
    (``"zoh"`` and ``{}`` for files without one).
    """
    with Path(path).open() as fh:
        lines = fh.read().splitlines()
    stored = {}
    if lines and lines[0].startswith("#"):
        stored = json.loads(lines[0][1:])
        lines = lines[1:]
    hold = hold or stored.get("hold", "zoh")
    meta = stored.get("meta", {}) if meta is None else meta
    rows = list(csv.reader(lines))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for h in header if h.startswith("x"))
    t, x, u = data[:, 0], data[:, 1:1 + n], data[:, 1 + n:]
    if hold == "zoh":
        u = u[:-1]
    return Trajectory(t, x, u, hold, dict(meta or {}))


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "t": [float(v) for v in traj.t],
        "x": traj.x.tolist(),
        "u": traj.u.tolist(),
        "hold": traj.hold,
        "meta": traj.meta,
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(np.array(d["t"]), np.array(d["x"]), np.array(d["u"]), d["hold"], dict(d.get("meta", {})))


def write_trajectory_json(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(trajectory_to_dict(traj), sort_keys=True))
    return path


def read_trajectory_json(path) -> Trajectory:
    return trajectory_from_dict(json.loads(Path(path).read_text()))
