"""Concrete models: the two-compartment heat exchanger and a quadratic test system."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    AffineIphsModel,
    Box,
    Derivatives,
    Hamiltonian,
    IphsModel,
    LinearEntropy,
    StructureMatrix,
)
from .errors import ConfigurationError, InvalidStateError

J_CANONICAL = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class HeatExchangerParams:
    """Heat exchanger constants.

    ``lam`` is the wall conduction coefficient, ``lam_e`` the coefficient of the
    external wall to the thermostat, ``c1, c2`` heat capacities. The defaults are
    the normalised values ``T_ref = c_i = 1``, ``S_ref = 0``.
    """

    lam: float = 1.0
    lam_e: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    T_ref: float = 1.0
    S_ref: float = 0.0
    domain_lo: tuple = (-5.0, -5.0)
    domain_hi: tuple = (5.0, 5.0)

    def __post_init__(self):
        for name in ("lam", "lam_e", "c1", "c2", "T_ref"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.S_ref):
            raise ConfigurationError("S_ref must be finite")

    @property
    def c(self):
        return np.array([self.c1, self.c2])


class ControlVariant(enum.Enum):
    ENTROPY_FLOW = "entropy_flow"
    THERMOSTAT = "thermostat"


def temperature(params: HeatExchangerParams, i: int, s):
    """Temperature of compartment ``i`` (1 or 2) at entropy ``s``."""
    if i not in (1, 2):
        raise ConfigurationError(f"compartment index must be 1 or 2, got {i}")
    c = params.c1 if i == 1 else params.c2
    return params.T_ref * np.exp((np.asarray(s, dtype=float) - params.S_ref) / c)


def compartment_energy(params: HeatExchangerParams, i: int, s):
    """Primitive of the temperature in entropy, integration constant zero."""
    c = params.c1 if i == 1 else params.c2
    return c * temperature(params, i, s)


def entropy_at_temperature(params: HeatExchangerParams, i: int, T):
    """Inverse of :func:`temperature`."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise InvalidStateError("temperatures must be positive")
    c = params.c1 if i == 1 else params.c2
    return params.S_ref + c * np.log(T / params.T_ref)


def thermostat_to_entropy_control(T_e, T1, lam_e: float = 1.0):
    """Entropy flow into compartment one produced by a thermostat at ``T_e``."""
    T1 = np.asarray(T1, dtype=float)
    if np.any(T1 <= 0):
        raise InvalidStateError("compartment temperature must be positive")
    return lam_e * (np.asarray(T_e, dtype=float) - T1) / T1


def heat_exchanger_model(
    params: HeatExchangerParams = HeatExchangerParams(),
    variant: ControlVariant = ControlVariant.ENTROPY_FLOW,
) -> IphsModel:
    """Two-compartment heat exchanger with state ``x = (S1, S2)``.

    ``ENTROPY_FLOW``: the input is the entropy flow into compartment one,
    ``g = (1, 0)^T``. ``THERMOSTAT``: the input is the thermostat temperature
    ``T_e``; the model is affine with ``W = (-lam_e, 0)`` and
    ``g = lam_e (1/T1, 0)^T``.
    """
    variant = ControlVariant(variant)
    p = params
    c = p.c
    lam, lam_e = p.lam, p.lam_e

    def temps(x):
        return p.T_ref * np.exp((np.asarray(x, dtype=float) - p.S_ref) / c)

    H = Hamiltonian(
        eval=lambda x: np.sum(c * temps(x), axis=-1),
        grad=temps,
        hess=lambda x: np.einsum("...i,ij->...ij", temps(x) / c, np.eye(2)),
    )

    def gamma(x, Hx):
        return lam / (Hx[..., 0] * Hx[..., 1])

    def drift_jac(x):
        T = temps(x)
        T1, T2 = T[..., 0], T[..., 1]
        out = np.empty(T.shape[:-1] + (2, 2))
        out[..., 0, 0] = -lam * T2 / (T1 * c[0])
        out[..., 0, 1] = lam * T2 / (T1 * c[1])
        out[..., 1, 0] = lam * T1 / (T2 * c[0])
        out[..., 1, 1] = -lam * T1 / (T2 * c[1])
        return out

    def production_grad(x):
        # R = lam (T1/T2 + T2/T1 - 2) and dT_i/dS_i = T_i / c_i
        T = temps(x)
        q = T[..., 0] / T[..., 1] - T[..., 1] / T[..., 0]
        return lam * q[..., None] * np.array([1.0 / c[0], -1.0 / c[1]])

    # T1 = T2  <=>  S1/c1 - S2/c2 = S_ref (1/c1 - 1/c2): a straight line
    normal = np.array([1.0 / c[0], -1.0 / c[1]])
    level = p.S_ref * (1.0 / c[0] - 1.0 / c[1])

    def distance(x):
        return np.abs(np.asarray(x) @ normal - level) / np.linalg.norm(normal)

    common = dict(
        n=2,
        m=1,
        J=StructureMatrix(J_CANONICAL),
        H=H,
        S=LinearEntropy(np.array([1.0, 1.0])),
        gamma=gamma,
        domain=Box(np.array(p.domain_lo, dtype=float), np.array(p.domain_hi, dtype=float)),
        closed_form_distance=distance,
    )

    if variant is ControlVariant.ENTROPY_FLOW:
        G = np.array([[1.0], [0.0]])

        def g(x, Hx):
            return np.broadcast_to(G, np.shape(x)[:-1] + (2, 1))

        def input_jac(x, u):
            return np.zeros(np.shape(x) + (2,))

        def outputs_jac(x):
            T = temps(x)
            dyH = np.zeros(T.shape[:-1] + (1, 2))
            dyH[..., 0, 0] = T[..., 0] / c[0]
            return dyH, np.zeros_like(dyH)

        return IphsModel(
            g=g,
            name="heat_exchanger/entropy_flow",
            derivatives=Derivatives(drift_jac, input_jac, outputs_jac, production_grad),
            **common,
        )

    def g(x, Hx):
        out = np.zeros(np.shape(x)[:-1] + (2, 1))
        out[..., 0, 0] = lam_e / Hx[..., 0]
        return out

    def W(x, Hx):
        return np.array([-lam_e, 0.0])

    def input_jac(x, u):
        T1 = temps(x)[..., 0]
        out = np.zeros(np.shape(x) + (2,))
        out[..., 0, 0] = -lam_e * np.asarray(u)[..., 0] / (T1 * c[0])
        return out

    def outputs_jac(x):
        T1 = temps(x)[..., 0]
        dyS = np.zeros(T1.shape + (1, 2))
        dyS[..., 0, 0] = -lam_e / (T1 * c[0])
        return np.zeros_like(dyS), dyS

    return AffineIphsModel(
        g=g,
        W=W,
        offset_jac=lambda x: np.zeros(np.shape(x) + (2,)),
        name="heat_exchanger/thermostat",
        derivatives=Derivatives(drift_jac, input_jac, outputs_jac, production_grad),
        **common,
    )


def quadratic_model(gamma_value: float = 1.0, box: float = 10.0) -> IphsModel:
    """Isotropic test system: ``H = |x|^2 / 2``, ``l = (1, 1)``, constant ``gamma``.

    Here ``{S,H}_J = x1 - x2`` and ``R / dist^2 = 2 gamma`` everywhere off the
    equilibrium line. No closed-form distance is registered, so the generic
    projection path is exercised.
    """
    if gamma_value <= 0:
        raise ConfigurationError("gamma must be positive")
    H = Hamiltonian(
        eval=lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1),
        grad=lambda x: np.array(x, dtype=float),
        hess=lambda x: np.broadcast_to(np.eye(2), np.shape(x) + (2,)).copy(),
    )
    return IphsModel(
        n=2,
        m=1,
        J=StructureMatrix(J_CANONICAL),
        H=H,
        S=LinearEntropy(np.array([1.0, 1.0])),
        gamma=lambda x, Hx: np.full(np.shape(x)[:-1], gamma_value),
        g=lambda x, Hx: np.broadcast_to(np.array([[1.0], [0.0]]), np.shape(x)[:-1] + (2, 1)),
        domain=Box(np.full(2, -box), np.full(2, box)),
        name="quadratic",
        derivatives=Derivatives(
            production_grad=lambda x: 2 * gamma_value * (x[..., 0] - x[..., 1])[..., None] * np.array([1.0, -1.0])
        ),
    )
