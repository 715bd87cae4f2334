"""Sub-solvers of the fixed-point map and the damped Picard driver.

One application of the map takes a lagged velocity and log-temperature
(u~, ln theta~) and returns

    rho       from the regularized continuity equation driven by u~
    u         from the Galerkin momentum system (linear in u)
    Z, ln th  from the Kirchhoff-transformed energy equation, ln th = P[Phi^-1(Z)]

The homotopy parameter ``lam`` multiplies every coupling term exactly as in
the continuation family ``x = lam T(x)``; ``lam = 1`` is the scheme itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg

from .constitutive import (ConstitutiveParams, ParameterError, boundary_coefficient,
                           boundary_coefficient_dtheta, energy_density, pressure, spow, stress,
                           viscosity)
from .discretization import FieldKind, PeriodicField, SpaceTimeBasis
from .kirchhoff import KirchhoffSpec, phi_eval, phi_inverse

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A linear sub-problem could not be solved."""


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared in an iterate."""


@dataclass(frozen=True)
class ApproxParams:
    """Regularization parameters; ``None`` entries take their derived defaults
    (eps = delta^2, zeta = delta, Gamma = max(2 gamma, 4))."""
    N_t: int = 2
    N_x: int = 3
    tau: float = 1e-3
    zeta: Optional[float] = None
    eps: Optional[float] = None
    delta: float = 1e-2
    Gamma: Optional[float] = None
    B_exp: float = 6.0
    lam: float = 1.0

    def resolved(self, cparams: ConstitutiveParams) -> "ApproxParams":
        return replace(
            self,
            zeta=self.delta if self.zeta is None else self.zeta,
            eps=self.delta ** 2 if self.eps is None else self.eps,
            Gamma=max(2.0 * cparams.gamma, 4.0) if self.Gamma is None else self.Gamma,
        )

    def validate(self, cparams: ConstitutiveParams) -> "ApproxParams":
        r = self.resolved(cparams)
        problems = []
        if r.N_t < 1 or r.N_x < 1:
            problems.append("N_t and N_x must be at least 1")
        if r.tau < 0:
            problems.append("tau must be non-negative")
        for name in ("zeta", "eps", "delta"):
            if not getattr(r, name) > 0:
                problems.append(f"{name} must be positive")
        if r.Gamma < 2 * cparams.gamma:
            problems.append(f"Gamma={r.Gamma} below 2*gamma={2 * cparams.gamma}")
        if r.delta > 0 and r.eps > r.delta ** 2 * (1 + 1e-12):
            problems.append("eps must not exceed delta**2")
        if r.B_exp < 2:
            problems.append("B must be at least 2")
        if not 0 <= r.lam <= 1:
            problems.append("lambda must lie in [0, 1]")
        if problems:
            raise ParameterError("; ".join(problems))
        return r


@dataclass(frozen=True)
class Controls:
    omega: float = 0.5
    tol: float = 1e-8
    max_iter: int = 300
    lambda_steps: int = 5
    stabilize: bool = True
    rho_undershoot: float = 1e-6

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ParameterError("damping must lie in (0, 1]")
        if not self.tol > 0 or self.max_iter < 1 or self.lambda_steps < 1:
            raise ParameterError("tol, max_iter and lambda_steps must be positive")


class Scheme:
    """A fully specified discrete problem: basis, constitutive model, parameters."""

    def __init__(self, basis: SpaceTimeBasis, cparams: ConstitutiveParams,
                 aparams: ApproxParams):
        self.basis = basis
        self.cp = cparams
        self.ap = aparams.validate(cparams)
        if (self.ap.N_t, self.ap.N_x) != (basis.N_t, basis.N_x):
            raise ParameterError("basis size differs from the approximation parameters")
        self.kspec = KirchhoffSpec(delta=self.ap.delta, B=self.ap.B_exp, kappa0=cparams.kappa0)
        self.m = basis.domain.m
        b = basis
        self._heat_lhs = (self.ap.tau * np.kron(b.time_stiff + b.time_mass, b.scalar_mass)
                          + np.kron(b.time_mass, b.scalar_stiff))
        self._mass_rhs = b.project_scalar(F=np.full((b.M_t, b.Q), self.ap.eps * self.m))

    @classmethod
    def build(cls, domain, cparams: ConstitutiveParams, aparams: ApproxParams, **kw) -> "Scheme":
        return cls(SpaceTimeBasis(domain, aparams.N_t, aparams.N_x, **kw), cparams, aparams)

    def pressure_delta(self, rho, theta):
        """p(rho, theta) + delta (rho^Gamma + rho^2)."""
        return pressure(rho, theta, self.cp) + self.ap.delta * (spow(rho, self.ap.Gamma) + rho ** 2)


@dataclass
class ApproxState:
    rho: PeriodicField
    u: PeriodicField
    log_theta: PeriodicField
    Z: PeriodicField
    lam: float = 1.0
    converged: bool = False
    trace: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def theta_nodal(self):
        return np.exp(self.log_theta.nodal())


def trivial_state(scheme: Scheme) -> ApproxState:
    b = scheme.basis
    return ApproxState(rho=b.constant(scheme.m), u=b.zeros(FieldKind.VELOCITY),
                       log_theta=b.zeros(FieldKind.SCALAR), Z=b.zeros(FieldKind.SCALAR),
                       lam=0.0, converged=True)


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name}")


def _solve(Mat, rhs, what):
    try:
        lu = linalg.lu_factor(Mat, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"{what}: {exc}") from exc
    x = linalg.lu_solve(lu, rhs)
    res = np.linalg.norm(Mat @ x - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if res > 1e-10 and np.linalg.norm(rhs) > 0:
        logger.warning("%s: relative linear residual %.2e", what, res)
    return x


def _time_couple(basis: SpaceTimeBasis, blocks, test=None, trial=None):
    """sum_t w_t kron(test[t] (x) trial[t], blocks[t])."""
    test = basis.A if test is None else test
    trial = basis.A if trial is None else trial
    n = blocks[0].shape[0]
    out = np.zeros((basis.n_t * n, basis.n_t * blocks[0].shape[1]))
    for t in range(basis.M_t):
        out += basis.t_weights[t] * np.kron(np.outer(test[t], trial[t]), blocks[t])
    return out


# ----------------------------------------------------------------------------
# continuity

def continuity_matrix(u_tilde: PeriodicField, scheme: Scheme):
    b, eps = scheme.basis, scheme.ap.eps
    un = u_tilde.nodal()
    wx = b.x_weights
    conv = []
    for t in range(b.M_t):
        blk = np.zeros((b.n_s, b.n_s))
        for j in range(3):
            blk -= b.dC[j].T @ ((wx * un[t, :, j])[:, None] * b.C)
        conv.append(blk)
    return (np.kron(b.time_deriv, b.scalar_mass)
            + eps * np.kron(b.time_mass, b.scalar_stiff + b.scalar_mass)
            + _time_couple(b, conv))


def solve_continuity(u_tilde: PeriodicField, scheme: Scheme, source=None) -> PeriodicField:
    """Galerkin solution of d_t rho + div(rho u~) - eps Lap rho + eps rho = eps m.

    ``source`` (coefficients shaped like a scalar field) is added to the
    right-hand side; it exists for manufactured-solution tests.
    """
    b = scheme.basis
    rhs = scheme._mass_rhs.copy()
    if source is not None:
        rhs = rhs + source
    x = _solve(continuity_matrix(u_tilde, scheme), rhs.ravel(), "continuity")
    return PeriodicField(b, x.reshape(b.n_t, b.n_s), FieldKind.SCALAR)


# ----------------------------------------------------------------------------
# momentum

def viscous_blocks(theta_nodal, scheme: Scheme):
    """Per-time-node matrices of int S(theta, grad u) : grad w over (c, l)."""
    b = scheme.basis
    mu, eta = viscosity(theta_nodal, scheme.cp)
    lam_bulk = eta - 2.0 * mu / 3.0
    nv = b.n_v
    blocks = []
    for t in range(b.M_t):
        wm = b.x_weights * mu[t]
        wl = b.x_weights * lam_bulk[t]
        G = [[b.dS[j].T @ (wm[:, None] * b.dS[k]) for k in range(3)] for j in range(3)]
        H = [[b.dS[j].T @ (wl[:, None] * b.dS[k]) for k in range(3)] for j in range(3)]
        lap = G[0][0] + G[1][1] + G[2][2]
        K = np.zeros((3 * nv, 3 * nv))
        for c in range(3):
            for cp in range(3):
                blk = G[cp][c] + H[c][cp]
                if c == cp:
                    blk = blk + lap
                K[c * nv:(c + 1) * nv, cp * nv:(cp + 1) * nv] = blk
        blocks.append(K)
    return blocks


def momentum_rhs_fields(rho_n, grad_rho, u_n, grad_u, theta_n, scheme: Scheme):
    """Nodal (F, G, H) of the explicit momentum terms, before the factor lam."""
    b, ap = scheme.basis, scheme.ap
    P = scheme.pressure_delta(rho_n, theta_n)
    F = (-ap.eps * np.einsum("tqcj,tqj->tqc", grad_u, grad_rho)
         + 0.5 * ap.eps * (scheme.m - rho_n)[..., None] * u_n
         + rho_n[..., None] * b.force_nodal)
    G = rho_n[..., None, None] * u_n[..., :, None] * u_n[..., None, :] + P[..., None, None] * np.eye(3)
    H = rho_n[..., None] * u_n
    return F, G, H


def pressure_delta_drho(rho_n, theta_n, scheme: Scheme):
    g, G, dl = scheme.cp.gamma, scheme.ap.Gamma, scheme.ap.delta
    r = np.abs(rho_n)
    return g * r ** (g - 1) + theta_n + dl * (G * r ** (G - 1) + 2.0 * rho_n)


def density_pressure_coupling(rho: PeriodicField, u_tilde: PeriodicField, theta_n,
                              scheme: Scheme):
    """Matrix of u -> int P_delta'(rho) drho[u] div w, with drho[u] the linear
    response of the continuity equation at u~ to a velocity increment."""
    b = scheme.basis
    rho_n = rho.nodal()
    dP = pressure_delta_drho(rho_n, theta_n, scheme)
    nv, ns = b.n_v, b.n_s
    wx = b.x_weights
    # continuity: d/du of -int rho u . grad psi
    flux = []
    press = []
    for t in range(b.M_t):
        Bt = np.zeros((ns, 3 * nv))
        Pt = np.zeros((3 * nv, ns))
        wr = (wx * rho_n[t])[:, None]
        wp = (wx * dP[t])[:, None]
        for c in range(3):
            Bt[:, c * nv:(c + 1) * nv] = -b.dC[c].T @ (wr * b.S)
            Pt[c * nv:(c + 1) * nv, :] = b.dS[c].T @ (wp * b.C)
        flux.append(Bt)
        press.append(Pt)
    Bmat = _time_couple(b, flux)
    Pmat = _time_couple(b, press)
    J = -linalg.lu_solve(linalg.lu_factor(continuity_matrix(u_tilde, scheme)), Bmat)
    return Pmat @ J


def solve_momentum(rho: PeriodicField, u_tilde: PeriodicField, log_theta: PeriodicField,
                   scheme: Scheme, lam: float | None = None, source=None,
                   implicit_density: bool = False) -> PeriodicField:
    """Solve the linear Galerkin system for u with viscosity frozen at theta~.

    ``implicit_density`` adds the linearized density response of the pressure
    as an implicit term and subtracts the same operator applied to u~ on the
    right-hand side. Both vanish at a fixed point u = u~; without them the
    lagged map amplifies compressive modes by roughly 1/eps.
    """
    b, ap = scheme.basis, scheme.ap
    lam = ap.lam if lam is None else lam
    theta_n = np.exp(log_theta.nodal())
    lhs = (ap.zeta * np.kron(b.time_deriv, np.kron(np.eye(3), b.velocity_mass))
           + _time_couple(b, viscous_blocks(theta_n, scheme)))
    F, G, H = momentum_rhs_fields(rho.nodal(), b.gradient(rho), u_tilde.nodal(),
                                  b.gradient(u_tilde), theta_n, scheme)
    rhs = lam * b.project_velocity(F=F, G=G, H=H)
    if source is not None:
        rhs = rhs + source
    if implicit_density and lam > 0:
        coup = lam * density_pressure_coupling(rho, u_tilde, theta_n, scheme)
        lhs = lhs - coup
        rhs = rhs - (coup @ u_tilde.coeffs.ravel()).reshape(rhs.shape)
    x = _solve(lhs, rhs.ravel(), "momentum")
    return PeriodicField(b, x.reshape(b.n_t, 3, b.n_v), FieldKind.VELOCITY)


# ----------------------------------------------------------------------------
# temperature

@dataclass
class HeatSources:
    """Nodal pieces of the energy right-hand side (before the factor lam)."""
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Fb: np.ndarray


def heat_source_fields(rho_n, grad_rho, u_n, grad_u, theta_n, theta_b, scheme: Scheme) -> HeatSources:
    b, ap, cp = scheme.basis, scheme.ap, scheme.cp
    mu, eta = viscosity(theta_n, cp)
    S = stress(grad_u, mu, eta)
    div_u = np.trace(grad_u, axis1=-2, axis2=-1)
    rho_e = energy_density(rho_n, theta_n, cp)
    F = (np.einsum("tqij,tqij->tq", S, grad_u)
         - pressure(rho_n, theta_n, cp) * div_u
         + ap.eps * ap.delta * (ap.Gamma * spow(rho_n, ap.Gamma - 2) + 2.0) * np.sum(grad_rho ** 2, -1)
         + ap.delta / theta_n)
    G = rho_e[..., None] * u_n
    H = rho_e + ap.zeta * theta_n
    Fb = boundary_coefficient(theta_b, cp) * (b.Theta0_b[None, :] - theta_b)
    return HeatSources(F, G, H, Fb)


def solve_temperature(rho: PeriodicField, u_tilde: PeriodicField, log_theta: PeriodicField,
                      scheme: Scheme, Z_prev: PeriodicField | None = None,
                      lam: float | None = None, source=None, boundary_source=None):
    """Solve for the Kirchhoff variable Z and return ``(log_theta, Z, info)``.

    With ``Z_prev`` given, the boundary flux and the heat-capacity term are
    split into an implicit part acting on Z and the same part acting on
    Z_prev on the right-hand side. The two cancel at a fixed point, so the
    fixed points are those of the plain map; the split only damps the
    iteration. ``Z_prev=None`` gives the plain lagged map.

    ``source`` (scalar coefficients) and ``boundary_source`` (nodal on the
    face grid) are added to the right-hand side for manufactured solutions.
    """
    b, ap, cp = scheme.basis, scheme.ap, scheme.cp
    lam = ap.lam if lam is None else lam
    lt_n = log_theta.nodal()
    theta_n = np.exp(lt_n)
    theta_b = np.exp(b.boundary_values(log_theta))
    src = heat_source_fields(rho.nodal(), b.gradient(rho), u_tilde.nodal(), b.gradient(u_tilde),
                             theta_n, theta_b, scheme)
    rhs = lam * b.project_scalar(F=src.F, G=src.G, H=src.H, Fb=src.Fb)
    if source is not None:
        rhs = rhs + source
    if boundary_source is not None:
        rhs = rhs + b.project_scalar(Fb=boundary_source)
    lhs = scheme._heat_lhs.copy()
    info = {"compatibility_defect": 0.0}

    if Z_prev is not None and lam > 0:
        _, dphi_b = phi_eval(np.log(theta_b), scheme.kspec)
        _, dphi_n = phi_eval(lt_n, scheme.kspec)
        d_b = boundary_coefficient(theta_b, cp)
        dd_b = boundary_coefficient_dtheta(theta_b, cp)
        beta = np.maximum(0.0, (d_b + dd_b * (theta_b - b.Theta0_b[None, :])) * theta_b / dphi_b)
        rho_n = rho.nodal()
        cap = (rho_n * cp.c_v + 4.0 * cp.a_rad * theta_n ** 3 + ap.zeta) * theta_n / dphi_n
        bnd_blocks = [b.Cb.T @ ((b.b_weights * beta[t])[:, None] * b.Cb) for t in range(b.M_t)]
        cap_blocks = [b.C.T @ ((b.x_weights * cap[t])[:, None] * b.C) for t in range(b.M_t)]
        lhs += lam * (_time_couple(b, bnd_blocks) - _time_couple(b, cap_blocks, test=b.dA))
        Zp_n, Zp_b = Z_prev.nodal(), b.boundary_values(Z_prev)
        rhs = rhs + lam * b.project_scalar(H=-cap * Zp_n, Fb=beta * Zp_b)
    elif ap.tau == 0:
        # pure Neumann problem: the spatially constant modes are undetermined.
        # Pin them to zero and report the violated compatibility.
        rows = np.arange(b.n_t) * b.n_s
        info["compatibility_defect"] = float(np.linalg.norm(rhs.ravel()[rows]))
        lhs[rows, :] = 0.0
        lhs[rows, rows] = 1.0
        rhs = rhs.copy()
        rhs.ravel()[rows] = 0.0

    z = _solve(lhs, rhs.ravel(), "temperature")
    Z = PeriodicField(b, z.reshape(b.n_t, b.n_s), FieldKind.SCALAR)
    g = phi_inverse(Z.nodal(), scheme.kspec)
    new_log_theta = b.l2_project_scalar(g)
    return new_log_theta, Z, info


# ----------------------------------------------------------------------------
# residuals of the coupled scheme (matrix-free, by quadrature)

def galerkin_residuals(state: ApproxState, scheme: Scheme, lam: float | None = None) -> dict:
    """Relative residuals of the continuity, momentum and energy Galerkin
    equations at ``state`` with no lagging (u~ = u, theta~ = theta)."""
    b, ap = scheme.basis, scheme.ap
    lam = state.lam if lam is None else lam
    rho_n, grad_rho, drho = state.rho.nodal(), b.gradient(state.rho), b.evaluate(state.rho, True)
    u_n, grad_u, du = state.u.nodal(), b.gradient(state.u), b.evaluate(state.u, True)
    theta_n = state.theta_nodal()
    theta_b = np.exp(b.boundary_values(state.log_theta))

    # continuity
    lhs = b.project_scalar(F=drho + ap.eps * rho_n, G=-rho_n[..., None] * u_n + ap.eps * grad_rho)
    rhs = scheme._mass_rhs
    r_ce = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300)

    # momentum
    mu, eta = viscosity(theta_n, scheme.cp)
    S = stress(grad_u, mu, eta)
    lhs = b.project_velocity(F=ap.zeta * du, G=S)
    F, G, H = momentum_rhs_fields(rho_n, grad_rho, u_n, grad_u, theta_n, scheme)
    rhs = lam * b.project_velocity(F=F, G=G, H=H)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    r_me = np.linalg.norm(lhs - rhs) / scale

    # energy in Kirchhoff form
    Zn, dZ, gZ = state.Z.nodal(), b.evaluate(state.Z, True), b.gradient(state.Z)
    lhs = b.project_scalar(F=ap.tau * Zn, G=gZ, H=ap.tau * dZ)
    src = heat_source_fields(rho_n, grad_rho, u_n, grad_u, theta_n, theta_b, scheme)
    rhs = lam * b.project_scalar(F=src.F, G=src.G, H=src.H, Fb=src.Fb)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    r_en = np.linalg.norm(lhs - rhs) / scale

    # consistency of ln theta with Z
    g = phi_inverse(Zn, scheme.kspec)
    proj = b.l2_project_scalar(g)
    r_kt = np.linalg.norm(proj.coeffs - state.log_theta.coeffs) / max(
        1.0, np.linalg.norm(state.log_theta.coeffs))
    return {"continuity": float(r_ce), "momentum": float(r_me), "energy": float(r_en),
            "kirchhoff": float(r_kt)}


# ----------------------------------------------------------------------------
# fixed point

def apply_map(state: ApproxState, scheme: Scheme, lam: float, stabilize: bool = True):
    """One application of the solution map; returns the image state."""
    rho = solve_continuity(state.u, scheme)
    u = solve_momentum(rho, state.u, state.log_theta, scheme, lam=lam, implicit_density=stabilize)
    lt, Z, info = solve_temperature(rho, state.u, state.log_theta, scheme,
                                    Z_prev=state.Z if stabilize else None, lam=lam)
    for name, f in (("rho", rho), ("u", u), ("log_theta", lt), ("Z", Z)):
        _check_finite(name, f.coeffs)
    out = ApproxState(rho=rho, u=u, log_theta=lt, Z=Z, lam=lam)
    out.flags.update(info)
    return out


def _stack(state: ApproxState):
    return np.concatenate([state.u.coeffs.ravel(), state.log_theta.coeffs.ravel(),
                           state.Z.coeffs.ravel()])


def picard(initial: ApproxState, scheme: Scheme, controls: Controls, lam: float) -> ApproxState:
    """Damped Picard iteration at fixed lam."""
    x = initial
    trace = []
    for it in range(1, controls.max_iter + 1):
        Tx = apply_map(x, scheme, lam, controls.stabilize)
        xv, tv = _stack(x), _stack(Tx)
        update = float(np.linalg.norm(tv - xv) / max(1.0, np.linalg.norm(tv)))
        entry = {"lam": lam, "iteration": it, "update": update}
        if update <= controls.tol:
            # accept the image, with density consistent with its velocity
            Tx.rho = solve_continuity(Tx.u, scheme)
            res = galerkin_residuals(Tx, scheme, lam)
            entry.update(res)
            trace.append(entry)
            if max(res.values()) <= controls.tol:
                Tx.converged = True
                Tx.trace = initial.trace + trace
                return Tx
        else:
            trace.append(entry)
        w = controls.omega
        x = ApproxState(rho=Tx.rho, u=(1 - w) * x.u + w * Tx.u,
                        log_theta=(1 - w) * x.log_theta + w * Tx.log_theta,
                        Z=(1 - w) * x.Z + w * Tx.Z, lam=lam)
    logger.warning("Picard iteration did not converge at lam=%.3g (last update %.2e)", lam, update)
    Tx.rho = solve_continuity(Tx.u, scheme)
    Tx.converged = False
    Tx.trace = initial.trace + trace
    return Tx


def fixed_point(scheme: Scheme, controls: Controls = Controls(),
                initial: ApproxState | None = None, continuation: bool = True) -> ApproxState:
    """Solve ``x = lam T(x)`` for lam = ap.lam, by continuation from lam = 0
    (``continuation=True``) or by direct iteration from ``initial``."""
    state = trivial_state(scheme) if initial is None else initial
    target = scheme.ap.lam
    if continuation:
        lams = [target * k / controls.lambda_steps for k in range(1, controls.lambda_steps + 1)]
    else:
        lams = [target]
    for lam in lams:
        try:
            state = picard(state, scheme, controls, lam)
        except NonFiniteError as exc:
            logger.error("aborting: %s at lam=%.3g", exc, lam)
            state = ApproxState(state.rho, state.u, state.log_theta, state.Z, lam=lam,
                                converged=False, trace=state.trace,
                                flags={**state.flags, "aborted": str(exc)})
            return state
        if not state.converged:
            break
    min_rho = float(state.rho.nodal().min())
    state.flags["min_rho"] = min_rho
    state.flags["rho_valid"] = bool(min_rho >= -controls.rho_undershoot * scheme.m)
    state.flags["min_theta"] = float(state.theta_nodal().min())
    return state
