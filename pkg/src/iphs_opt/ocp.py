"""Minimal energy/entropy/exergy state transitions by direct transcription.

The optimal control problem

    min  int_0^tf [a1 y_H - a2 T0 y_S]^T u dt
    s.t. IPHS dynamics, x(0) = x0, x(tf) in Psi, u(t) in U

is discretised by trapezoidal collocation with zero-order-hold controls and
solved with the augmented Lagrangian method in :mod:`iphs_opt.nlp`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import null_space

from .core import (
    Box,
    CostWeights,
    IphsModel,
    _outputs,
    _production,
    _rhs,
    _stage_cost,
    check_state,
    distance_to_equilibria,
    drift_jacobian,
    input_jacobian,
    input_matrix,
    is_equilibrium,
    outputs_jacobian,
    production_gradient,
)
from .errors import ConfigurationError, InfeasibleConstructionError, IntegrationAbort
from .nlp import SolverOptions, solve_nlp
from .sim import ControlSignal, IntegratorOptions, Trajectory, cost_of_trajectory, integrate


@dataclass(frozen=True)
class TerminalPoint:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    def project(self, x):
        return self.x

    def miss(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.x))


@dataclass(frozen=True)
class TerminalSet:
    """Closed terminal set given by a projection; enforced by a quadratic penalty."""

    project: Callable[[np.ndarray], np.ndarray]
    penalty: float = 1e6

    def miss(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))


@dataclass(frozen=True)
class OcpSpec:
    model: IphsModel
    x0: np.ndarray
    terminal: Union[TerminalPoint, TerminalSet]
    t_f: float
    control_box: Box
    weights: CostWeights

    def __post_init__(self):
        object.__setattr__(self, "x0", check_state(self.model, self.x0))
        if not self.t_f > 0:
            raise ConfigurationError("horizon must be positive")
        box = self.control_box
        if box.lo.shape != (self.model.m,):
            raise ConfigurationError("control box must have one interval per input channel")
        if not (np.all(box.lo <= 0) and np.all(box.hi >= 0)):
            raise ConfigurationError("control box must contain the origin")
        if not (np.all(np.isfinite(box.lo)) and np.all(np.isfinite(box.hi))):
            raise ConfigurationError("control box must be compact")
        if isinstance(self.terminal, TerminalPoint):
            check_state(self.model, self.terminal.x)

    def with_horizon(self, t_f: float) -> "OcpSpec":
        return OcpSpec(self.model, self.x0, self.terminal, t_f, self.control_box, self.weights)

    @property
    def path_independent(self) -> bool:
        """With ``a2 = 0`` and a fixed end point the cost is ``a1 (H(xf) - H(x0))``."""
        return self.weights.alpha2 == 0.0 and isinstance(self.terminal, TerminalPoint)


def default_intervals(t_f: float) -> int:
    return max(100, int(round(20 * t_f)))


class TranscriptionProblem:
    """Trapezoidal collocation NLP.

    Decision vector ``z = [x_0, ..., x_N, u_0, ..., u_{N-1}]``. Equality
    constraints: ``N n`` defects

        x_{k+1} - x_k - h/2 (f(x_k, u_k) + f(x_{k+1}, u_k)) = 0

    followed by ``n`` terminal equalities for a point target. ``x_0`` is fixed
    through its bounds; controls are boxed by ``U`` and states by the model
    domain.

    For models without an affine drift the cost is written in balance form,

        alpha1 (H(x_{k+1}) - H(x_k)) + alpha2 T0 (h/2 (R(x_k) + R(x_{k+1})) - S(x_{k+1}) + S(x_k)),

    which telescopes to the exact path identity. Integrating the stage cost
    directly leaves an O(h^2) mismatch with the energy balance that the
    optimizer exploits because the cost is linear in ``u``. Affine models
    integrate the stage cost by the trapezoid rule.
    """

    def __init__(self, spec: OcpSpec, N: int, feasibility_only: Optional[bool] = None):
        if N < 2:
            raise ConfigurationError("need at least two intervals")
        self.spec = spec
        self.model = model = spec.model
        self.N = N
        self.n, self.m = n, m = model.n, model.m
        self.h = spec.t_f / N
        self.nx = (N + 1) * n
        self.nz = self.nx + N * m
        self.feasibility_only = spec.path_independent if feasibility_only is None else feasibility_only
        self.point_terminal = isinstance(spec.terminal, TerminalPoint)
        self.balance_form = model.is_definition1 and not self.feasibility_only

        xi = np.arange(self.nx).reshape(N + 1, n)
        ui = self.nx + np.arange(N * m).reshape(N, m)
        self.element_index = np.hstack([xi[:-1], ui, xi[1:]])
        self.band_order = np.concatenate([np.concatenate([xi[k], ui[k]]) for k in range(N)] + [xi[N]])
        self.terminal_index = xi[N]

        lo = np.concatenate([np.tile(model.domain.lo, N + 1), np.tile(spec.control_box.lo, N)])
        hi = np.concatenate([np.tile(model.domain.hi, N + 1), np.tile(spec.control_box.hi, N)])
        lo[:n] = hi[:n] = spec.x0
        self.lower, self.upper = lo, hi

    # sizes ---------------------------------------------------------------
    @property
    def n_defects(self) -> int:
        return self.N * self.n

    @property
    def n_terminal(self) -> int:
        return self.n if self.point_terminal else 0

    @property
    def n_constraints(self) -> int:
        return self.n_defects + self.n_terminal

    @property
    def n_bounds(self) -> int:
        """Number of control bound pairs."""
        return self.N * self.m

    # layout ----------------------------------------------------------------
    def unpack(self, z):
        return z[: self.nx].reshape(self.N + 1, self.n), z[self.nx:].reshape(self.N, self.m)

    def pack(self, X, U):
        return np.concatenate([np.asarray(X, dtype=float).ravel(), np.asarray(U, dtype=float).ravel()])

    def _split(self, v):
        n, m = self.n, self.m
        return v[:, :n], v[:, n:n + m], v[:, n + m:]

    # element terms -------------------------------------------------------------
    def _stage(self, x, u):
        if self.feasibility_only:
            return 0.5 * np.sum(u * u, axis=-1)
        return _stage_cost(self.model, x, u, self.spec.weights)

    def _stage_grads(self, x, u):
        """Gradients of the stage cost with respect to ``x`` and ``u``."""
        if self.feasibility_only:
            return np.zeros_like(x), u
        w = self.spec.weights
        y_H, y_S = _outputs(self.model, x)
        dyH, dyS = outputs_jacobian(self.model, x)
        lu = w.alpha1 * y_H - w.alpha2 * w.T0 * y_S
        lx = np.einsum("kmn,km->kn", w.alpha1 * dyH - w.alpha2 * w.T0 * dyS, u)
        return lx, lu

    def _balance_terms(self, x0, x1):
        w = self.spec.weights
        c = w.alpha2 * w.T0
        model = self.model
        return (c * self.h / 2 * (_production(model, x0) + _production(model, x1))
                + w.alpha1 * (model.H.eval(x1) - model.H.eval(x0))
                - c * (model.S(x1) - model.S(x0)))

    def _balance_grads(self, x0, x1):
        w = self.spec.weights
        c = w.alpha2 * w.T0
        model = self.model
        cl = c * model.S.l
        g0 = c * self.h / 2 * production_gradient(model, x0) - w.alpha1 * model.H.grad(x0) + cl
        g1 = c * self.h / 2 * production_gradient(model, x1) + w.alpha1 * model.H.grad(x1) - cl
        return g0, g1

    def element_values(self, v):
        x0, u, x1 = self._split(v)
        h = self.h
        if self.balance_form:
            obj = self._balance_terms(x0, x1)
        else:
            obj = h / 2 * (self._stage(x0, u) + self._stage(x1, u))
        d = x1 - x0 - h / 2 * (_rhs(self.model, x0, u) + _rhs(self.model, x1, u))
        return obj, d

    def element_jacobians(self, v):
        """Objective gradient ``(N, 2n+m)`` and defect Jacobian ``(N, n, 2n+m)``."""
        n, m, h = self.n, self.m, self.h
        model = self.model
        x0, u, x1 = self._split(v)
        A0 = drift_jacobian(model, x0) + input_jacobian(model, x0, u)
        A1 = drift_jacobian(model, x1) + input_jacobian(model, x1, u)
        B0 = input_matrix(model, x0)
        B1 = input_matrix(model, x1)
        eye = np.eye(n)
        E = np.empty((len(v), n, 2 * n + m))
        E[:, :, :n] = -eye - h / 2 * A0
        E[:, :, n:n + m] = -h / 2 * (B0 + B1)
        E[:, :, n + m:] = eye - h / 2 * A1
        if self.balance_form:
            g0, g1 = self._balance_grads(x0, x1)
            go = np.concatenate([g0, np.zeros((len(v), m)), g1], axis=1)
        else:
            lx0, lu0 = self._stage_grads(x0, u)
            lx1, lu1 = self._stage_grads(x1, u)
            go = np.concatenate([h / 2 * lx0, h / 2 * (lu0 + lu1), h / 2 * lx1], axis=1)
        return go, E

    def element_grad_weighted(self, v, W):
        go, E = self.element_jacobians(v)
        return go + np.einsum("ki,kij->kj", W, E)

    # terminal terms ------------------------------------------------------------
    def terminal_terms(self, z):
        """(objective, gradient, equality residuals, residual Jacobian rows)."""
        xN = z[self.terminal_index]
        grad = np.zeros(self.nz)
        if self.point_terminal:
            return 0.0, grad, xN - self.spec.terminal.x, np.eye(self.n)
        term = self.spec.terminal
        r = xN - term.project(xN)
        grad[self.terminal_index] = term.penalty * r
        return 0.5 * term.penalty * float(r @ r), grad, np.empty(0), np.empty((0, self.n))

    def terminal_hessian(self, rho, z):
        if self.point_terminal:
            return rho * np.eye(self.n)
        # Gauss-Newton: P Jr^T Jr with Jr = I - dproj/dx by central differences
        term = self.spec.terminal
        xN = z[self.terminal_index]
        Jr = np.eye(self.n)
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = 1e-6 * max(1.0, abs(xN[j]))
            Jr[:, j] -= (term.project(xN + e) - term.project(xN - e)) / (2 * e[j])
        return term.penalty * Jr.T @ Jr

    # assembled functions ---------------------------------------------------------
    def objective(self, z) -> float:
        obj, _ = self.element_values(z[self.element_index])
        return float(obj.sum() + self.terminal_terms(z)[0])

    def objective_grad(self, z):
        go, _ = self.element_jacobians(z[self.element_index])
        g = np.zeros(self.nz)
        np.add.at(g, self.element_index, go)
        return g + self.terminal_terms(z)[1]

    def constraints(self, z):
        _, d = self.element_values(z[self.element_index])
        return np.concatenate([d.ravel(), self.terminal_terms(z)[2]])

    def constraint_jacobian(self, z):
        """Dense constraint Jacobian (for checks on small problems)."""
        _, E = self.element_jacobians(z[self.element_index])
        Jc = np.zeros((self.n_constraints, self.nz))
        for k in range(self.N):
            Jc[np.ix_(k * self.n + np.arange(self.n), self.element_index[k])] += E[k]
        if self.point_terminal:
            Jc[np.ix_(self.n_defects + np.arange(self.n), self.terminal_index)] = np.eye(self.n)
        return Jc

    # initial guesses ---------------------------------------------------------------
    def grid(self):
        return np.linspace(0.0, self.spec.t_f, self.N + 1)

    def cold_start(self):
        """States interpolated linearly from ``x0`` to the target, zero controls."""
        target = self.spec.terminal.project(self.spec.x0)
        s = np.linspace(0.0, 1.0, self.N + 1)[:, None]
        X = (1 - s) * self.spec.x0 + s * target
        X = np.clip(X, self.model.domain.lo, self.model.domain.hi)
        return self.pack(X, np.zeros((self.N, self.m)))

    def warm_start(self, traj: Trajectory):
        """Resample a previous solution on this grid in normalised time."""
        tau_old = (traj.t - traj.t[0]) / traj.t_f
        tau = np.linspace(0.0, 1.0, self.N + 1)
        X = np.column_stack([np.interp(tau, tau_old, traj.x[:, i]) for i in range(self.n)])
        X[0] = self.spec.x0
        mid = 0.5 * (tau[:-1] + tau[1:])
        k = np.clip(np.searchsorted(tau_old, mid, side="right") - 1, 0, len(traj.u) - 1)
        U = traj.u[k]
        U = np.clip(U, self.spec.control_box.lo, self.spec.control_box.hi)
        return self.pack(X, U)

    def trajectory(self, z, meta=None) -> Trajectory:
        X, U = self.unpack(z)
        info = {"model": self.model.name, "scheme": "trapezoidal-collocation", "N": self.N, "quadrature": "trapezoid"}
        info.update(meta or {})
        return Trajectory(self.grid(), X.copy(), U.copy(), "zoh", info)


def transcribe(spec: OcpSpec, N: Optional[int] = None) -> TranscriptionProblem:
    return TranscriptionProblem(spec, default_intervals(spec.t_f) if N is None else N)


@dataclass
class OcpSolution:
    trajectory: Trajectory
    objective: float
    quadrature_objective: float
    identity_objective: float
    kkt_residual: float
    constraint_violation: float
    terminal_error: float
    iterations: int
    inner_iterations: int
    status: str
    N: int
    notes: list = field(default_factory=list)
    multipliers: Optional[np.ndarray] = None
    elapsed: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        """JSON-ready summary without timings."""
        return {
            "status": self.status,
            "objective": float(self.objective),
            "quadrature_objective": float(self.quadrature_objective),
            "identity_objective": float(self.identity_objective),
            "kkt_residual": float(self.kkt_residual),
            "constraint_violation": float(self.constraint_violation),
            "terminal_error": float(self.terminal_error),
            "iterations": int(self.iterations),
            "inner_iterations": int(self.inner_iterations),
            "N": int(self.N),
            "t_f": float(self.trajectory.t_f),
            "notes": list(self.notes),
        }


def identity_cost(model: IphsModel, traj: Trajectory, weights: CostWeights) -> float:
    """``a1 dH + a2 T0 (-dS + int R)`` with ``int R`` by the trapezoidal rule on the nodes."""
    R = _production(model, traj.x)
    produced = float(np.sum(np.diff(traj.t) / 2 * (R[:-1] + R[1:])))
    dH = float(model.H.eval(traj.x[-1]) - model.H.eval(traj.x[0]))
    dS = float(model.S(traj.x[-1]) - model.S(traj.x[0]))
    return weights.alpha1 * dH + weights.alpha2 * weights.T0 * (produced - dS)


def solve(problem: TranscriptionProblem, init: Union[str, Trajectory] = "cold",
          opts: SolverOptions = SolverOptions()) -> OcpSolution:
    """Solve the transcribed problem.

    ``init`` is ``"cold"`` or a previous :class:`Trajectory` (warm start,
    resampled in normalised time). For path-independent costs only
    feasibility is sought, with minimum control effort as tie-break, and the
    reported objective is the exact identity value ``a1 (H(xf) - H(x0))``.
    """
    start = time.perf_counter()
    if isinstance(init, str) and init != "cold":
        raise ConfigurationError(f"unknown initialisation {init!r}")
    z0 = problem.cold_start() if isinstance(init, str) else problem.warm_start(init)
    res = solve_nlp(problem, z0, opts)
    spec, model = problem.spec, problem.model
    traj = problem.trajectory(res.z, {"status": res.status})
    weights = spec.weights
    quad = float(np.sum(problem.h / 2 * (_stage_cost(model, traj.x[:-1], traj.u, weights)
                                          + _stage_cost(model, traj.x[1:], traj.u, weights))))
    ident = identity_cost(model, traj, weights)
    notes = []
    objective = quad
    if problem.balance_form:
        objective = float(np.sum(problem._balance_terms(traj.x[:-1], traj.x[1:])))
    if problem.feasibility_only:
        notes.append("cost path-independent")
        objective = weights.alpha1 * float(model.H.eval(spec.terminal.x) - model.H.eval(spec.x0))
    if not model.is_definition1:
        notes.append("affine input model: identity form does not apply")
    return OcpSolution(
        trajectory=traj,
        objective=objective,
        quadrature_objective=quad,
        identity_objective=ident,
        kkt_residual=res.kkt_residual,
        constraint_violation=res.constraint_violation,
        terminal_error=spec.terminal.miss(traj.x[-1]),
        iterations=res.outer_iterations,
        inner_iterations=res.inner_iterations,
        status=res.status,
        N=problem.N,
        notes=notes,
        multipliers=res.multipliers,
        elapsed=time.perf_counter() - start,
    )


def solve_ocp(spec: OcpSpec, N: Optional[int] = None, init="cold", opts: SolverOptions = SolverOptions()) -> OcpSolution:
    return solve(transcribe(spec, N), init, opts)


# feasibility tools --------------------------------------------------------------

def reachability_probe(spec: OcpSpec, opts: IntegratorOptions = IntegratorOptions()) -> dict:
    """Terminal states under the extreme constant controls of the box.

    For monotone systems (like the heat exchanger with entropy-flow input)
    these bound the states reachable at ``t_f``.
    """
    out = {}
    for name, value in (("upper", spec.control_box.hi), ("lower", spec.control_box.lo)):
        traj = integrate(spec.model, spec.x0, ControlSignal.constant(value, spec.t_f), spec.t_f, opts)
        out[name] = traj.x[-1]
    return out


def shoot_to_target(model: IphsModel, x0, u: ControlSignal, t_f: float, target, control_box: Optional[Box] = None,
                    opts: IntegratorOptions = IntegratorOptions(rtol=1e-12, atol=1e-12),
                    tol: float = 1e-10, max_iter: int = 20) -> ControlSignal:
    """Correct a piecewise-constant control so the simulated end state hits ``target``.

    Minimum-norm Gauss-Newton on the amplitudes of ``2n`` indicator pulses
    covering the middle half of the horizon; the Jacobian is obtained by
    finite differences of the simulated end state.
    """
    if u.kind != "piecewise":
        raise ConfigurationError("shooting refinement needs a piecewise-constant control")
    target = np.asarray(target, dtype=float)
    p = 2 * model.n
    pulse = np.linspace(0.25 * t_f, 0.75 * t_f, p + 1)
    grid = np.unique(np.concatenate([u.grid, pulse]))
    mids = 0.5 * (grid[:-1] + grid[1:])
    base = np.array([u(t) for t in mids])
    which = np.searchsorted(pulse, mids, side="right") - 1
    basis = np.zeros((len(mids), p))
    for j in range(p):
        basis[which == j, j] = 1.0

    def signal(a):
        vals = base + basis @ a[:, None] * np.ones((1, model.m))
        if control_box is not None:
            vals = np.clip(vals, control_box.lo, control_box.hi)
        return ControlSignal.piecewise(grid, vals)

    def endpoint(a):
        return integrate(model, x0, signal(a), t_f, opts).x[-1]

    a = np.zeros(p)
    r = endpoint(a) - target
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol:
            return signal(a)
        Jac = np.empty((model.n, p))
        for j in range(p):
            da = np.zeros(p)
            da[j] = 1e-6
            Jac[:, j] = (endpoint(a + da) - target - r) / 1e-6
        step = np.linalg.lstsq(Jac, r, rcond=None)[0]
        # backtrack on domain exits and on increases of the miss
        for _ in range(30):
            try:
                r_new = endpoint(a - step) - target
            except IntegrationAbort:
                step = 0.5 * step
                continue
            if np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            step = 0.5 * step
        else:
            break
        a, r = a - step, r_new
    if np.linalg.norm(r) > tol:
        raise InfeasibleConstructionError("shooting refinement did not reach the target", {"terminal_miss": float(np.linalg.norm(r))})
    return signal(a)


def _pieces(u: ControlSignal, t0: float, t1: float, m: int):
    """Breakpoints and values of ``u`` restricted to ``[t0, t1]``."""
    if u.kind == "zero":
        return [t0, t1], [np.zeros(m)]
    pts = np.concatenate([[t0], u.breakpoints(t0, t1), [t1]])
    return list(pts), [u(0.5 * (a + b)) for a, b in zip(pts[:-1], pts[1:])]


def three_phase_control(spec: OcpSpec, t1: float, t2: float, u1: ControlSignal, u2: ControlSignal,
                        tol: float = 1e-6, opts: IntegratorOptions = IntegratorOptions()) -> ControlSignal:
    """Steer to the equilibria with ``u1``, rest with zero input, then reach Psi with ``u2``.

    ``u1`` acts on ``[0, t1]``; ``u2`` is given on ``[0, t2]`` and shifted to
    ``[t_f - t2, t_f]``. Both phases are verified by simulation; a miss
    larger than ``tol`` raises :class:`InfeasibleConstructionError`.
    """
    model, t_f = spec.model, spec.t_f
    if t1 < 0 or t2 < 0 or t1 + t2 > t_f + 1e-12:
        raise ConfigurationError("phase durations must satisfy 0 <= t1, t2 and t1 + t2 <= t_f")
    misses = {}
    x_bar = spec.x0
    if t1 > 0:
        x_bar = integrate(model, spec.x0, u1, t1, opts).x[-1]
    misses["equilibrium_distance"] = float(distance_to_equilibria(model, x_bar))
    x_end = x_bar
    if t2 > 0:
        x_end = integrate(model, x_bar, u2, t2, opts).x[-1]
    misses["terminal_miss"] = float(spec.terminal.miss(x_end))
    bad = {k: v for k, v in misses.items() if v > tol}
    if bad:
        raise InfeasibleConstructionError("three-phase construction failed", misses)

    if u1.kind == "callable" or u2.kind == "callable":
        a_start = t_f - t2
        shifted = u2.shifted(a_start)

        def fn(t, x):
            if t <= t1:
                return u1(t, x)
            if t < a_start:
                return np.zeros(model.m)
            return shifted(t, x)

        knots = [t1, a_start] + list(u1.breakpoints(0, t1)) + list(shifted.breakpoints(a_start, t_f))
        return ControlSignal.from_callable(fn, model.m, knots=[k for k in knots if 0 < k < t_f])

    grid, values = [0.0], []
    if t1 > 0:
        g1, v1 = _pieces(u1, 0.0, t1, model.m)
        grid += g1[1:]
        values += v1
    if t_f - t2 - t1 > 0:
        grid.append(t_f - t2)
        values.append(np.zeros(model.m))
    if t2 > 0:
        g2, v2 = _pieces(u2, 0.0, t2, model.m)
        grid += [g + t_f - t2 for g in g2[1:]]
        values += v2
    for v in values:
        if np.any(v < spec.control_box.lo - 1e-12) or np.any(v > spec.control_box.hi + 1e-12):
            raise InfeasibleConstructionError("control leaves the admissible box", {"max_abs": float(np.max(np.abs(v)))})
    return ControlSignal.piecewise(grid, np.array(values))


def control_cost(spec: OcpSpec, u: ControlSignal, opts: IntegratorOptions = IntegratorOptions()):
    """Simulate ``u`` over ``spec.t_f`` and evaluate its cost."""
    traj = integrate(spec.model, spec.x0, u, spec.t_f, opts)
    return cost_of_trajectory(spec.model, traj, spec.weights), traj


# steady states ---------------------------------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    x: np.ndarray
    u: np.ndarray
    kernel: np.ndarray  # basis of {u : g(x) u = 0}; columns
    cost: float


def optimal_steady_states(model: IphsModel, control_box: Box, weights: CostWeights, states,
                          tol: float = 1e-10) -> list:
    """Certified optimal steady states among the sampled ``states``.

    A sample qualifies when it is an equilibrium (``|{S,H}| <= tol``); its
    admissible controls are ``u`` in the box with ``g(x) u = 0``, represented
    by the steady control ``0`` and a kernel basis of ``g(x)``.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    out = []
    eq = is_equilibrium(model, states, tol)
    for x, ok in zip(states, eq):
        if not ok:
            continue
        u = np.zeros(model.m)
        residual = np.linalg.norm(_rhs(model, x, u))
        if residual > tol:
            continue
        G = input_matrix(model, x)
        kernel = null_space(G, rcond=tol) if np.any(G) else np.eye(model.m)
        cost = float(_stage_cost(model, x, u, weights))
        out.append(SteadyState(x.copy(), u, kernel, cost))
    return out
