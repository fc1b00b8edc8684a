"""Irreversible port-Hamiltonian systems: structure and pointwise quantities.

A model is the quintuple ``(J, gamma, H, S = l^T x, g)``. Its dynamics are

    xdot = gamma(x, H_x) * {S, H}_J(x) * J H_x(x) + g(x, H_x) u

with the bracket ``{S, H}_J(x) = l^T J H_x(x)``. All functions in this module
accept a single state of shape ``(n,)`` or a batch of shape ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DimensionError, InvalidStateError, ProjectionError

Array = np.ndarray


@dataclass(frozen=True)
class StructureMatrix:
    """Skew-symmetric structure matrix ``J``."""

    entries: Array

    def __post_init__(self):
        J = np.array(self.entries, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise DimensionError(f"structure matrix must be square, got shape {J.shape}")
        if not np.array_equal(J.T, -J):
            raise ConfigurationError("structure matrix must be exactly skew-symmetric")
        J.setflags(write=False)
        object.__setattr__(self, "entries", J)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Hamiltonian:
    """Energy function with gradient (co-energy) and Hessian, all batched."""

    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]


@dataclass(frozen=True)
class LinearEntropy:
    l: Array

    def __post_init__(self):
        l = np.array(self.l, dtype=float)
        if l.ndim != 1 or not np.any(l != 0):
            raise ConfigurationError("entropy weights must be a nonzero vector")
        l.setflags(write=False)
        object.__setattr__(self, "l", l)

    def __call__(self, x):
        return np.asarray(x) @ self.l


@dataclass(frozen=True)
class Box:
    lo: Array
    hi: Array

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float)
        hi = np.array(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ConfigurationError("box needs matching bounds with lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x) -> Array:
        x = np.asarray(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)


@dataclass(frozen=True)
class Derivatives:
    """Optional analytic derivatives a model may register.

    ``drift_jac(x) -> (..., n, n)``; ``input_jac(x, u) -> (..., n, n)`` is the
    Jacobian of ``g(x) u`` with respect to ``x``; ``outputs_jac(x)`` returns the
    pair ``(dy_H/dx, dy_S/dx)`` each of shape ``(..., m, n)``;
    ``production_grad(x) -> (..., n)`` is the gradient of ``R``.
    """

    drift_jac: Optional[Callable] = None
    input_jac: Optional[Callable] = None
    outputs_jac: Optional[Callable] = None
    production_grad: Optional[Callable] = None


@dataclass(frozen=True)
class IphsModel:
    """An irreversible port-Hamiltonian system.

    ``gamma(x, Hx)`` must return strictly positive values with shape ``x.shape[:-1]``
    and ``g(x, Hx)`` an array of shape ``(..., n, m)``. ``closed_form_distance``,
    when given, replaces the generic projection in :func:`distance_to_equilibria`.
    """

    n: int
    m: int
    J: StructureMatrix
    H: Hamiltonian
    S: LinearEntropy
    gamma: Callable[[Array, Array], Array]
    g: Callable[[Array, Array], Array]
    domain: Box
    name: str = "iphs"
    derivatives: Derivatives = field(default_factory=Derivatives)
    closed_form_distance: Optional[Callable[[Array], Array]] = None

    def __post_init__(self):
        if self.J.n != self.n or self.S.l.shape != (self.n,):
            raise DimensionError("J, l and n are inconsistent")
        if self.domain.lo.shape != (self.n,):
            raise DimensionError("domain box must have n components")
        if self.m < 1:
            raise DimensionError("input dimension must be positive")

    @property
    def Jl(self) -> Array:
        return self.J.entries @ self.S.l

    @property
    def is_definition1(self) -> bool:
        return True

    def offset(self, x, Hx):
        """Control-independent input term; zero for plain IPHS models."""
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class AffineIphsModel(IphsModel):
    """IPHS with an additional affine input term ``W(x, H_x)``.

    The dynamics become ``drift + W + g u``. Simulation and optimal control
    accept these models; the turnpike results are only claimed for plain models.
    """

    W: Callable[[Array, Array], Array] = None
    offset_jac: Optional[Callable[[Array], Array]] = None

    @property
    def is_definition1(self) -> bool:
        return False

    def offset(self, x, Hx):
        return np.broadcast_to(self.W(x, Hx), np.shape(x)).astype(float)


def check_state(model: IphsModel, x) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.n,):
        raise DimensionError(f"expected state(s) with last dimension {model.n}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("state contains non-finite entries")
    if not np.all(model.domain.contains(x)):
        raise InvalidStateError(f"state outside domain [{model.domain.lo}, {model.domain.hi}]")
    return x


def _check_control(model, u, batch_shape):
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (model.m,):
        raise DimensionError(f"expected control(s) with last dimension {model.m}, got {u.shape}")
    return u


# Unchecked kernels, used by the solver where the iterate is kept inside the box.

def _bracket(model, x, Hx=None):
    if Hx is None:
        Hx = model.H.grad(x)
    return Hx @ (model.J.entries.T @ model.S.l)


def _drift(model, x, Hx=None):
    if Hx is None:
        Hx = model.H.grad(x)
    scale = model.gamma(x, Hx) * _bracket(model, x, Hx)
    return (Hx @ model.J.entries.T) * np.asarray(scale)[..., None]


def _rhs(model, x, u):
    Hx = model.H.grad(x)
    gu = np.einsum("...ij,...j->...i", model.g(x, Hx), u)
    return _drift(model, x, Hx) + model.offset(x, Hx) + gu


def _production(model, x):
    Hx = model.H.grad(x)
    return model.gamma(x, Hx) * _bracket(model, x, Hx) ** 2


def _outputs(model, x):
    Hx = model.H.grad(x)
    G = model.g(x, Hx)
    y_H = np.einsum("...ij,...i->...j", G, Hx)
    y_S = np.einsum("...ij,i->...j", G, model.S.l)
    return y_H, y_S


def _port_power(model, x, u):
    """Energy and entropy supply rates ``H_x.(W + g u)`` and ``l.(W + g u)``."""
    Hx = model.H.grad(x)
    supply = model.offset(x, Hx) + np.einsum("...ij,...j->...i", model.g(x, Hx), u)
    return np.sum(Hx * supply, axis=-1), supply @ model.S.l


# Public, domain-checked operations.

def poisson_bracket(model: IphsModel, x) -> Array:
    """``{S,H}_J(x) = l^T J H_x(x)``, the driving force of the irreversible process."""
    return _bracket(model, check_state(model, x))


def entropy_production(model: IphsModel, x) -> Array:
    """Internal entropy production ``R(x) = gamma * {S,H}_J^2 >= 0``."""
    return _production(model, check_state(model, x))


def drift(model: IphsModel, x) -> Array:
    return _drift(model, check_state(model, x))


def rhs(model: IphsModel, x, u) -> Array:
    x = check_state(model, x)
    u = _check_control(model, u, x.shape[:-1])
    out = _rhs(model, x, u)
    if not np.all(np.isfinite(out)):
        raise InvalidStateError("right-hand side is not finite")
    return out


def outputs(model: IphsModel, x):
    """Energy- and entropy-conjugated outputs ``(y_H, y_S)``."""
    return _outputs(model, check_state(model, x))


@dataclass(frozen=True)
class CostWeights:
    """Convex combination of energy and T0-scaled entropy supply."""

    alpha1: float
    alpha2: float
    T0: float = 1.0

    def __post_init__(self):
        a1, a2 = float(self.alpha1), float(self.alpha2)
        if not (0.0 <= a1 <= 1.0 and 0.0 <= a2 <= 1.0) or abs(a1 + a2 - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must be in [0,1] and sum to 1, got ({a1}, {a2})")
        if not float(self.T0) > 0:
            raise ConfigurationError(f"reference temperature must be positive, got {self.T0}")

    @classmethod
    def energy(cls, T0=1.0):
        return cls(1.0, 0.0, T0)

    @classmethod
    def entropy(cls, T0=1.0):
        return cls(0.0, 1.0, T0)

    @classmethod
    def exergy(cls, T0=1.0):
        return cls(0.5, 0.5, T0)


def _stage_cost(model, x, u, weights):
    y_H, y_S = _outputs(model, x)
    return np.sum((weights.alpha1 * y_H - weights.alpha2 * weights.T0 * y_S) * u, axis=-1)


def stage_cost(model: IphsModel, x, u, weights: CostWeights) -> Array:
    x = check_state(model, x)
    u = _check_control(model, u, x.shape[:-1])
    return _stage_cost(model, x, u, weights)


def is_equilibrium(model: IphsModel, x, tol: float = 0.0) -> Array:
    if tol < 0:
        raise ConfigurationError("tolerance must be nonnegative")
    return np.abs(poisson_bracket(model, x)) <= tol


def _project_point(model, x, max_iter=50, tol=1e-10):
    """Least-distance point of the equilibrium set nearest to ``x``.

    Gauss-Newton on the KKT system of ``min |x - w|^2 s.t. c(w) = 0`` with
    ``c(w) = l^T J H_x(w)``: each step projects ``x`` onto the linearisation
    of the constraint at the current iterate.
    """
    a = model.J.entries.T @ model.S.l
    w = x.copy()
    scale = 1.0 + np.linalg.norm(x)
    for _ in range(max_iter):
        c = model.H.grad(w) @ a
        grad_c = model.H.hess(w) @ a
        gg = grad_c @ grad_c
        if gg == 0.0:
            raise ProjectionError("constraint gradient vanished", abs(c))
        w_new = x - grad_c * ((c + grad_c @ (x - w)) / gg)
        step = np.linalg.norm(w_new - w)
        w = w_new
        c = model.H.grad(w) @ a
        grad_c = model.H.hess(w) @ a
        r = x - w
        # stationarity: x - w parallel to grad c
        stat = np.linalg.norm(r - grad_c * (r @ grad_c) / (grad_c @ grad_c))
        if abs(c) <= tol * (1.0 + np.linalg.norm(grad_c) * scale) and stat <= tol * scale and step <= 1e-8 * scale:
            return w
    raise ProjectionError("projection onto equilibrium set did not converge", max(abs(c), stat))


def project_to_equilibria(model: IphsModel, x, max_iter: int = 50, tol: float = 1e-10) -> Array:
    x = check_state(model, x)
    if not np.any(model.Jl != 0):
        return x.copy()
    flat = x.reshape(-1, model.n)
    out = np.array([_project_point(model, xi, max_iter, tol) for xi in flat])
    return out.reshape(x.shape)


def distance_to_equilibria(model: IphsModel, x, generic: bool = False) -> Array:
    """Euclidean distance to the set where the bracket vanishes.

    Uses the model's closed form when one is registered, otherwise (or with
    ``generic=True``) an iterative least-distance projection. Models with
    ``J l = 0`` have every state in equilibrium.
    """
    x = check_state(model, x)
    if not np.any(model.Jl != 0):
        return np.zeros(x.shape[:-1])
    if model.closed_form_distance is not None and not generic:
        return np.asarray(model.closed_form_distance(x), dtype=float)
    return np.linalg.norm(x - project_to_equilibria(model, x), axis=-1)


# Jacobians: analytic when registered, forward differences otherwise.

def _fd_jac(fun, x, step=1e-7):
    """Forward-difference Jacobian of a batched map ``(..., n) -> (..., k)``."""
    x = np.asarray(x, dtype=float)
    f0 = fun(x)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        hj = step * np.maximum(1.0, np.abs(x[..., j]))
        xp = x.copy()
        xp[..., j] += hj
        cols.append((fun(xp) - f0) / hj[..., None])
    return np.stack(cols, axis=-1)


def drift_jacobian(model: IphsModel, x) -> Array:
    """Jacobian of ``drift + W`` with respect to the state."""
    if model.derivatives.drift_jac is not None:
        jac = model.derivatives.drift_jac(x)
        if isinstance(model, AffineIphsModel):
            if model.offset_jac is None:
                jac = jac + _fd_jac(lambda z: model.offset(z, model.H.grad(z)), x)
            else:
                jac = jac + model.offset_jac(x)
        return jac
    return _fd_jac(lambda z: _drift(model, z) + model.offset(z, model.H.grad(z)), x)


def input_matrix(model: IphsModel, x) -> Array:
    return model.g(x, model.H.grad(x))


def input_jacobian(model: IphsModel, x, u) -> Array:
    """Jacobian of ``g(x) u`` with respect to ``x`` for fixed ``u``."""
    if model.derivatives.input_jac is not None:
        return model.derivatives.input_jac(x, u)
    return _fd_jac(lambda z: np.einsum("...ij,...j->...i", input_matrix(model, z), u), x)


def production_gradient(model: IphsModel, x) -> Array:
    """Gradient of ``R``; central differences when no closed form is registered."""
    if model.derivatives.production_grad is not None:
        return model.derivatives.production_grad(x)
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(model.n):
        hj = 1e-6 * np.maximum(1.0, np.abs(x[..., j]))
        xp, xm = x.copy(), x.copy()
        xp[..., j] += hj
        xm[..., j] -= hj
        cols.append((_production(model, xp) - _production(model, xm)) / (2 * hj))
    return np.stack(cols, axis=-1)


def outputs_jacobian(model: IphsModel, x):
    if model.derivatives.outputs_jac is not None:
        return model.derivatives.outputs_jac(x)
    dyH = _fd_jac(lambda z: _outputs(model, z)[0], x)
    dyS = _fd_jac(lambda z: _outputs(model, z)[1], x)
    return dyH, dyS
