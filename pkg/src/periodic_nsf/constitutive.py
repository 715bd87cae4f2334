"""Thermodynamic and transport constitutive functions.

Pressure, internal energy and entropy follow the radiative gas model

    p = rho**gamma + rho*theta + (a/3) theta**4
    e = rho**(gamma-1)/(gamma-1) + c_v theta + a theta**4 / rho
    s = ln(theta**c_v / rho) + (4a/3) theta**3 / rho

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np


class DomainError(ValueError):
    """Raised when a state variable is outside the physical domain."""


class ParameterError(ValueError):
    """Raised for invalid model or numerical parameters."""


class DVariant(str, enum.Enum):
    TEMP_DEPENDENT = "TEMP_DEPENDENT"
    TEMP_INDEPENDENT = "TEMP_INDEPENDENT"


# gamma thresholds of the two existence regimes
GAMMA_MIN_DEPENDENT = Fraction(23, 15)
GAMMA_MIN_INDEPENDENT = Fraction(8, 5)


@dataclass(frozen=True)
class ConstitutiveParams:
    gamma: float = 1.7
    c_v: float = 1.0
    a_rad: float = 1.0
    mu0: float = 1.0
    eta0: float = 0.0
    kappa0: float = 1.0
    d0: float = 1.0
    d_variant: DVariant = DVariant.TEMP_DEPENDENT

    def __post_init__(self):
        object.__setattr__(self, "d_variant", DVariant(self.d_variant))
        if not self.gamma > 1:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        for name in ("c_v", "mu0", "kappa0", "d0"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("a_rad", "eta0"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    @property
    def in_regime(self) -> bool:
        """Whether gamma lies in the existence regime paired with ``d_variant``."""
        g = Fraction(self.gamma)
        if self.d_variant is DVariant.TEMP_DEPENDENT:
            return g > GAMMA_MIN_DEPENDENT
        return g > GAMMA_MIN_INDEPENDENT

    def to_flat(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, DVariant) else repr(float(v))
        return out

    @classmethod
    def from_flat(cls, entries: dict[str, str]) -> "ConstitutiveParams":
        known = {f.name for f in fields(cls)}
        unknown = set(entries) - known
        if unknown:
            raise ParameterError(f"unknown constitutive keys: {sorted(unknown)}")
        kw = {}
        for k, v in entries.items():
            kw[k] = DVariant(v) if k == "d_variant" else float(Fraction(v))
        return cls(**kw)


@dataclass(frozen=True)
class ThermoEval:
    p: np.ndarray
    e: np.ndarray | None
    s: np.ndarray | None


def spow(x, q):
    """Sign-preserving power ``sign(x)|x|**q``.

    Used where spectral truncation may push a density slightly below zero.
    """
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** q


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise DomainError("temperature must be positive")
    return theta


def pressure(rho, theta, params: ConstitutiveParams):
    return spow(rho, params.gamma) + rho * theta + params.a_rad / 3.0 * theta**4


def energy_density(rho, theta, params: ConstitutiveParams):
    """``rho * e(rho, theta)``, finite at vacuum."""
    g = params.gamma
    return spow(rho, g) / (g - 1) + params.c_v * rho * theta + params.a_rad * theta**4


def entropy_density(rho, theta, params: ConstitutiveParams):
    """``rho * s(rho, theta)``; requires rho > 0."""
    return rho * np.log(theta**params.c_v / rho) + 4.0 * params.a_rad / 3.0 * theta**3


def thermo_eval(rho, theta, params: ConstitutiveParams) -> ThermoEval:
    """Evaluate p, e, s. At rho = 0 only p is defined; e and s come back as None
    (scalar input) or NaN entries (array input)."""
    rho = np.asarray(rho, dtype=float)
    theta = _check_theta(theta)
    if np.any(rho < 0):
        raise DomainError("density must be non-negative")
    p = pressure(rho, theta, params)
    g, cv, a = params.gamma, params.c_v, params.a_rad
    vac = rho == 0
    if rho.ndim == 0 and vac:
        return ThermoEval(p=p, e=None, s=None)
    r = np.where(vac, 1.0, rho)
    e = r ** (g - 1) / (g - 1) + cv * theta + a * theta**4 / r
    s = np.log(theta**cv / r) + 4.0 * a / 3.0 * theta**3 / r
    if np.any(vac):
        e = np.where(vac, np.nan, e)
        s = np.where(vac, np.nan, s)
    return ThermoEval(p=p, e=e, s=s)


def gibbs_residual(rho, theta, params: ConstitutiveParams, h: float = 1e-4,
                   pressure_offset: float = 0.0, relative: bool = False):
    """Central-difference residuals of the Gibbs relation.

    Returns ``(r_theta, r_rho)`` with

        r_theta = theta ds/dtheta - de/dtheta
        r_rho   = theta ds/drho - de/drho - p d(1/rho)/drho

    Steps are relative, ``h*theta`` and ``h*rho``. With ``relative=True``
    each residual is divided by the sum of the magnitudes of its terms, which
    is the meaningful scale when e ~ theta^4 / rho is large.
    ``pressure_offset`` shifts p and exists to exercise the detector.
    """
    if not h > 0:
        raise ParameterError("finite-difference step must be positive")
    rho = np.asarray(rho, dtype=float)
    theta = _check_theta(theta)
    if np.any(rho <= 0):
        raise DomainError("density must be positive")

    def es(r, t):
        ev = thermo_eval(r, t, params)
        return ev.e, ev.s

    # relative steps keep the stencil inside the domain and the truncation
    # error uniform over scales
    ht = h * theta
    hr = h * rho
    e_tp, s_tp = es(rho, theta + ht)
    e_tm, s_tm = es(rho, theta - ht)
    e_rp, s_rp = es(rho + hr, theta)
    e_rm, s_rm = es(rho - hr, theta)
    de_dt = (e_tp - e_tm) / (2 * ht)
    ds_dt = (s_tp - s_tm) / (2 * ht)
    de_dr = (e_rp - e_rm) / (2 * hr)
    ds_dr = (s_rp - s_rm) / (2 * hr)
    p = pressure(rho, theta, params) + pressure_offset
    dinv = (1.0 / (rho + hr) - 1.0 / (rho - hr)) / (2 * hr)
    r_theta = theta * ds_dt - de_dt
    r_rho = theta * ds_dr - de_dr - p * dinv
    if relative:
        r_theta = r_theta / (np.abs(theta * ds_dt) + np.abs(de_dt))
        r_rho = r_rho / (np.abs(theta * ds_dr) + np.abs(de_dr) + np.abs(p * dinv))
    return r_theta, r_rho


def viscosity(theta, params: ConstitutiveParams):
    """Shear and bulk viscosity ``(mu, eta)``."""
    return params.mu0 * (1.0 + theta), params.eta0 * (1.0 + theta)


def conductivity(theta, params: ConstitutiveParams):
    return params.kappa0 * (1.0 + theta**3)


def boundary_coefficient(theta, params: ConstitutiveParams):
    if params.d_variant is DVariant.TEMP_DEPENDENT:
        return 1.5 * params.d0 * (1.0 + theta**3)
    return params.d0 * np.ones_like(np.asarray(theta, dtype=float))


def boundary_coefficient_dtheta(theta, params: ConstitutiveParams):
    if params.d_variant is DVariant.TEMP_DEPENDENT:
        return 4.5 * params.d0 * theta**2
    return np.zeros_like(np.asarray(theta, dtype=float))


def transport_eval(x, theta, params: ConstitutiveParams):
    """``(mu, eta, kappa, d)`` at temperature theta.

    ``x`` marks the location; the default model is spatially homogeneous so it
    only matters for broadcasting against ``theta``.
    """
    theta = _check_theta(theta)
    mu, eta = viscosity(theta, params)
    return mu, eta, conductivity(theta, params), boundary_coefficient(theta, params)


def stress(grad_u, mu, eta):
    """Newtonian stress for gradients shaped ``(..., 3, 3)``; ``grad_u[..., c, j] = d_j u_c``."""
    grad_u = np.asarray(grad_u, dtype=float)
    div = np.trace(grad_u, axis1=-2, axis2=-1)
    eye = np.eye(3)
    mu = np.asarray(mu)[..., None, None]
    eta = np.asarray(eta)[..., None, None]
    sym = grad_u + np.swapaxes(grad_u, -1, -2)
    return mu * (sym - 2.0 / 3.0 * div[..., None, None] * eye) + eta * div[..., None, None] * eye


def dissipation_eval(theta, grad_u, grad_theta, params: ConstitutiveParams,
                     kappa=None, heat_sign: float = 1.0):
    """Stress tensor and entropy production density.

    ``sigma = (S:grad u + kappa |grad theta|^2 / theta) / theta``. A custom
    ``kappa`` (array or callable of theta) replaces the default conductivity.
    ``heat_sign=-1`` flips the heat term and only serves detector self-tests.
    """
    theta = _check_theta(theta)
    mu, eta = viscosity(theta, params)
    S = stress(grad_u, mu, eta)
    if kappa is None:
        kap = conductivity(theta, params)
    elif callable(kappa):
        kap = kappa(theta)
    else:
        kap = kappa
    work = np.einsum("...ij,...ij->...", S, np.asarray(grad_u, dtype=float))
    g2 = np.sum(np.asarray(grad_theta, dtype=float) ** 2, axis=-1)
    sigma = (work + heat_sign * kap * g2 / theta) / theta
    return S, sigma
