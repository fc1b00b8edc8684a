"""Augmented Lagrangian solver for box-constrained, equality-constrained NLPs.

The solver works on problems whose objective and equality constraints are sums
of per-interval element terms coupling consecutive variable blocks (the
structure produced by direct collocation). The Hessian of the augmented
Lagrangian is then banded in the interleaved ordering ``x_0, u_0, x_1, ...``,
which lets the inner projected Newton method factor it in linear time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded
from scipy.optimize import minimize

from .errors import ConfigurationError, ModelEvaluationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_outer: int = 60
    max_inner: int = 100
    rho0: float = 10.0
    rho_max: float = 1e10
    rho_growth: float = 10.0
    inner: str = "newton"  # or "lbfgs"
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.inner not in ("newton", "lbfgs"):
            raise ConfigurationError(f"unknown inner solver {self.inner!r}")


@dataclass
class SolverResult:
    z: np.ndarray
    multipliers: np.ndarray
    status: str
    constraint_violation: float
    kkt_residual: float
    outer_iterations: int
    inner_iterations: int
    rho: float
    history: list = field(default_factory=list)


class AugmentedLagrangian:
    """Value, gradient and banded Hessian of ``f + lam.c + rho/2 |c|^2``."""

    def __init__(self, problem):
        self.p = problem
        self.idx = problem.element_index
        self.ne = self.idx.shape[1]
        self.bw = self.ne - 1
        order = problem.band_order
        self.order = order
        self.pos = np.empty_like(order)
        self.pos[order] = np.arange(len(order))
        self.epos = self.pos[self.idx]

    def evaluate(self, z, lam, rho):
        p = self.p
        v = z[self.idx]
        obj_e, d = p.element_values(v)
        t_obj, t_grad, t_c, t_rows = p.terminal_terms(z)
        c = np.concatenate([d.ravel(), t_c])
        if not (np.all(np.isfinite(obj_e)) and np.all(np.isfinite(c))):
            raise ModelEvaluationError("model evaluation returned non-finite values")
        val = float(obj_e.sum() + t_obj + lam @ c + 0.5 * rho * (c @ c))
        return val, c, v, obj_e, d

    def gradient(self, z, lam, rho, c, v):
        p = self.p
        nd = p.n_defects
        w = lam + rho * c
        W = w[:nd].reshape(-1, p.n)
        go, E = p.element_jacobians(v)
        ge = go + np.einsum("ki,kij->kj", W, E)
        g = np.zeros(p.nz)
        np.add.at(g, self.idx, ge)
        _, t_grad, t_c, t_rows = p.terminal_terms(z)
        g += t_grad
        if len(t_c):
            g[p.terminal_index] += t_rows.T @ w[nd:]
        return g, W, E

    def value_and_grad(self, z, lam, rho):
        val, c, v, _, _ = self.evaluate(z, lam, rho)
        g, _, _ = self.gradient(z, lam, rho, c, v)
        return val, g

    def hessian_band(self, z, v, W, E, rho, step):
        """Upper banded Hessian in interleaved ordering.

        Second-order terms of objective and constraints come from central
        differences of the element gradients with frozen weights; the
        Gauss-Newton part ``rho E^T E`` is exact.
        """
        p = self.p
        ne, bw = self.ne, self.bw
        N = v.shape[0]
        He = np.empty((N, ne, ne))
        for j in range(ne):
            hj = step * np.maximum(1.0, np.abs(v[:, j]))
            vp, vm = v.copy(), v.copy()
            vp[:, j] += hj
            vm[:, j] -= hj
            gp = p.element_grad_weighted(vp, W)
            gm = p.element_grad_weighted(vm, W)
            He[:, :, j] = (gp - gm) / (2 * hj[:, None])
        He = 0.5 * (He + He.transpose(0, 2, 1)) + rho * np.einsum("kij,kil->kjl", E, E)
        ab = np.zeros((bw + 1, p.nz))
        for a in range(ne):
            for b in range(a, ne):
                ab[bw + a - b, self.epos[:, b]] += He[:, a, b]
        T = p.terminal_hessian(rho, z)
        if T is not None:
            tp = self.pos[p.terminal_index]
            for a in range(len(tp)):
                for b in range(a, len(tp)):
                    ab[bw + tp[a] - tp[b], tp[b]] += T[a, b]
        return ab


def _projected_newton(al: AugmentedLagrangian, z, lam, rho, lo, hi, tol, max_iter, step):
    """Bertsekas-style projected Newton method on the box ``[lo, hi]``."""
    bw = al.bw
    nz = len(z)
    order = al.order
    fixed = lo == hi
    it = 0
    pg = np.inf
    for it in range(1, max_iter + 1):
        val, c, v, _, _ = al.evaluate(z, lam, rho)
        g, W, E = al.gradient(z, lam, rho, c, v)
        pg = np.max(np.abs(z - np.clip(z - g, lo, hi)))
        if pg <= tol:
            return z, it - 1, pg
        eps = min(1e-3, pg)
        active = fixed | ((z <= lo + eps) & (g > 0)) | ((z >= hi - eps) & (g < 0))
        ab = al.hessian_band(z, v, W, E, rho, step)
        act_b = active[order]
        for r in range(bw + 1):
            off = bw - r
            cols = np.arange(off, nz)
            mask = act_b[cols - off] | act_b[cols]
            ab[r, off:][mask] = 0.0
        diag = ab[bw].copy()
        ab[bw, act_b] = 1.0
        free_b = ~act_b
        shift = 0.0
        scale = max(1.0, np.max(np.abs(diag)))
        while True:
            trial = ab.copy()
            trial[bw, free_b] += shift
            try:
                cb = cholesky_banded(trial)
                break
            except LinAlgError:
                shift = 1e-8 * scale if shift == 0.0 else 10.0 * shift
        rhs = -g[order]
        rhs[act_b] = 0.0
        d = np.empty(nz)
        d[order] = cho_solve_banded((cb, False), rhs)
        d[active] = -g[active]
        d[fixed] = 0.0

        alpha = 1.0
        while True:
            z_new = np.clip(z + alpha * d, lo, hi)
            try:
                new_val = al.evaluate(z_new, lam, rho)[0]
            except ModelEvaluationError:
                new_val = np.inf
            if new_val <= val + 1e-4 * (g @ (z_new - z)):
                break
            alpha *= 0.5
            if alpha < 1e-12:
                return z, it, pg
        z = z_new
    val, c, v, _, _ = al.evaluate(z, lam, rho)
    g, _, _ = al.gradient(z, lam, rho, c, v)
    pg = np.max(np.abs(z - np.clip(z - g, lo, hi)))
    return z, it, pg


def _lbfgs(al, z, lam, rho, lo, hi, tol, max_iter):
    fixed = lo == hi
    res = minimize(
        lambda y: al.value_and_grad(y, lam, rho),
        z,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(lo, hi)),
        options=dict(maxiter=max_iter * 200, gtol=tol, ftol=0.0, maxcor=20),
    )
    z = res.x
    z[fixed] = lo[fixed]
    _, g = al.value_and_grad(z, lam, rho)
    pg = np.max(np.abs(z - np.clip(z - g, lo, hi)))
    return z, res.nit, pg


def solve_nlp(problem, z0, opts: SolverOptions = SolverOptions()) -> SolverResult:
    """Minimise ``f(z)`` subject to ``c(z) = 0`` and ``lo <= z <= hi``.

    Outer loop: first-order multiplier updates, penalty increased whenever
    the violation fails to drop by a factor four. Converged when the
    violation is below ``feas_tol`` and the projected gradient of the
    Lagrangian is below ``opt_tol``.
    """
    al = AugmentedLagrangian(problem)
    lo, hi = problem.lower, problem.upper
    z = np.clip(np.asarray(z0, dtype=float), lo, hi)
    lam = np.zeros(problem.n_constraints)
    rho = opts.rho0
    prev = np.inf
    inner_total = 0
    history = []
    status = "max_iter"
    viol = pg = np.inf
    stalled = 0
    for outer in range(1, opts.max_outer + 1):
        inner_tol = 0.1 * opts.opt_tol
        if opts.inner == "newton":
            z, nit, _ = _projected_newton(al, z, lam, rho, lo, hi, inner_tol, opts.max_inner, opts.fd_step)
        else:
            z, nit, _ = _lbfgs(al, z, lam, rho, lo, hi, inner_tol, opts.max_inner)
        inner_total += nit
        _, c, v, _, _ = al.evaluate(z, lam, rho)
        viol = float(np.max(np.abs(c))) if len(c) else 0.0
        lam = lam + rho * c
        # with updated multipliers the AL gradient is the Lagrangian gradient
        _, c2, v2, _, _ = al.evaluate(z, lam, 0.0)
        g, _, _ = al.gradient(z, lam, 0.0, c2, v2)
        pg = float(np.max(np.abs(z - np.clip(z - g, lo, hi))))
        history.append({"outer": outer, "inner": nit, "violation": viol, "kkt": pg, "rho": rho})
        log.debug("outer %d: inner=%d viol=%.3e kkt=%.3e rho=%.1e", outer, nit, viol, pg, rho)
        if viol <= opts.feas_tol and pg <= opts.opt_tol:
            status = "converged"
            break
        if viol > opts.feas_tol and viol > 0.25 * prev:
            if rho >= opts.rho_max:
                stalled = stalled + 1 if viol > 0.9 * prev else 0
                if stalled >= 3:
                    status = "infeasible"
                    break
            rho = min(rho * opts.rho_growth, opts.rho_max)
        prev = viol
    return SolverResult(z, lam, status, viol, pg, outer, inner_total, rho, history)
