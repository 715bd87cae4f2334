"""Tensor trigonometric bases on the space-time cylinder S^1 x box.

Time modes are L^2(0, L)-orthonormal: the constant, then cos/sin pairs.
In space the velocity uses sine products (homogeneous Dirichlet data) and
scalars use cosine products (homogeneous Neumann data). The velocity
space-time basis is made orthonormal in the product int int grad w : grad w.

Nodal arrays are laid out as

    scalar   (M_t, Q)          velocity  (M_t, Q, 3)
    gradient (M_t, Q, 3)       velocity gradient (M_t, Q, 3, 3), [..., c, j] = d_j u_c

and coefficient tensors as ``(n_t, n_s)`` for scalars, ``(n_t, 3, n_v)`` for
velocities.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

MAX_UNKNOWNS = 8000


class ResourceError(RuntimeError):
    """Requested basis exceeds the configured size cap."""


class GridMismatchError(ValueError):
    """Nodal arrays do not live on the expected quadrature grid."""


class OutsideDomainError(ValueError):
    """Evaluation point lies outside the closed box."""


class FieldKind(str, enum.Enum):
    SCALAR = "SCALAR_NEUMANN"
    VELOCITY = "VELOCITY"


class Op(str, enum.Enum):
    EVAL = "EVAL"
    GRAD = "GRAD"
    DIV = "DIV"
    TIME_DERIV = "TIME_DERIV"
    BOUNDARY_TRACE = "BOUNDARY_TRACE"


@dataclass(frozen=True)
class DomainSpec:
    """Box geometry, period, mass and data.

    ``Theta0`` is a constant or a callable of boundary points ``(P, 3)``.
    ``force`` is None or a callable ``force(t, x)`` returning ``(..., 3)``
    for ``t`` of shape ``(M,)`` and ``x`` of shape ``(Q, 3)`` broadcast to
    ``(M, Q, 3)``.
    """
    period_L: float = 1.0
    box: tuple = (1.0, 1.0, 1.0)
    M0: float = 1.0
    Theta0: Union[float, Callable] = 1.0
    force: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "box", tuple(float(b) for b in self.box))
        if not self.period_L > 0:
            raise ValueError("period must be positive")
        if len(self.box) != 3 or min(self.box) <= 0:
            raise ValueError("box needs three positive edge lengths")
        if not self.M0 > 0:
            raise ValueError("total mass must be positive")
        if not callable(self.Theta0) and not self.Theta0 > 0:
            raise ValueError("boundary temperature must be positive")

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def m(self) -> float:
        return self.M0 / self.volume

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period_L


class ShearForcing:
    """Time-pulsed shear force ``A (0.5 + 0.5 cos(2 pi t / L)) (sin(pi x_2 / l_2), 0, 0)``.

    Its sup norm is ``A``. A class rather than a closure so that it pickles
    into sweep workers.
    """

    def __init__(self, amplitude: float, period_L: float = 1.0, box=(1.0, 1.0, 1.0)):
        self.amplitude = float(amplitude)
        self.period_L = float(period_L)
        self.ell2 = float(box[1])

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        pulse = 0.5 + 0.5 * np.cos(2.0 * np.pi * t / self.period_L)
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape[:-1]) + (3,))
        out[..., 0] = self.amplitude * pulse * np.sin(np.pi * x[..., 1] / self.ell2)
        return out

    def __repr__(self):
        return f"ShearForcing(amplitude={self.amplitude!r})"


# ----------------------------------------------------------------------------
# one-dimensional tables

def time_table(t, L: float, N_t: int):
    """Values and derivatives of the orthonormal time modes at ``t``."""
    t = np.asarray(t, dtype=float)
    w = 2.0 * np.pi / L
    n = 2 * N_t + 1
    val = np.empty(t.shape + (n,))
    der = np.empty_like(val)
    val[..., 0] = 1.0 / np.sqrt(L)
    der[..., 0] = 0.0
    amp = np.sqrt(2.0 / L)
    for k in range(1, N_t + 1):
        c, s = np.cos(k * w * t), np.sin(k * w * t)
        val[..., 2 * k - 1] = amp * c
        val[..., 2 * k] = amp * s
        der[..., 2 * k - 1] = -amp * k * w * s
        der[..., 2 * k] = amp * k * w * c
    return val, der


def sine_table(x, ell: float, N: int):
    x = np.asarray(x, dtype=float)
    k = np.arange(1, N + 1)
    arg = np.pi * np.multiply.outer(x, k) / ell
    amp = np.sqrt(2.0 / ell)
    return amp * np.sin(arg), amp * (np.pi * k / ell) * np.cos(arg)


def cosine_table(x, ell: float, N: int):
    x = np.asarray(x, dtype=float)
    k = np.arange(0, N + 1)
    arg = np.pi * np.multiply.outer(x, k) / ell
    amp = np.where(k == 0, np.sqrt(1.0 / ell), np.sqrt(2.0 / ell))
    return amp * np.cos(arg), -amp * (np.pi * k / ell) * np.sin(arg)


def _tensor3(tabs):
    """Tensor products of per-axis tables at paired points.

    ``tabs`` holds three ``(values, derivatives)`` pairs of shape ``(P, n)``.
    Returns values ``(P, n^3)`` and gradient ``(3, P, n^3)``; mode index is
    ``(k1 * n + k2) * n + k3``.
    """
    (v1, d1), (v2, d2), (v3, d3) = tabs
    P = v1.shape[0]

    def prod(a, b, c):
        return (a[:, :, None, None] * b[:, None, :, None] * c[:, None, None, :]).reshape(P, -1)

    val = prod(v1, v2, v3)
    grad = np.stack([prod(d1, v2, v3), prod(v1, d2, v3), prod(v1, v2, d3)])
    return val, grad


def gauss_legendre(n: int, ell: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * ell * (x + 1.0), 0.5 * ell * w


# ----------------------------------------------------------------------------

@dataclass
class PeriodicField:
    basis: "SpaceTimeBasis"
    coeffs: np.ndarray
    kind: FieldKind

    def __post_init__(self):
        self.kind = FieldKind(self.kind)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != self.basis.coeff_shape(self.kind):
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} does not match basis "
                f"{self.basis.coeff_shape(self.kind)}")

    @property
    def rank(self) -> int:
        return 1 if self.kind is FieldKind.SCALAR else 3

    def copy(self) -> "PeriodicField":
        return PeriodicField(self.basis, self.coeffs.copy(), self.kind)

    def __add__(self, other):
        return PeriodicField(self.basis, self.coeffs + other.coeffs, self.kind)

    def __sub__(self, other):
        return PeriodicField(self.basis, self.coeffs - other.coeffs, self.kind)

    def __mul__(self, s: float):
        return PeriodicField(self.basis, self.coeffs * s, self.kind)

    __rmul__ = __mul__

    def nodal(self):
        return self.basis.evaluate(self)

    # serialization: one JSON header line then raw little-endian float64
    def header(self) -> dict:
        b = self.basis
        return {"kind": self.kind.value, "N_t": b.N_t, "N_x": b.N_x, "n_quad": b.n_quad,
                "period_L": b.domain.period_L, "box": list(b.domain.box),
                "shape": list(self.coeffs.shape), "dtype": "<f8", "order": "C"}

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True).encode() + b"\n"
        return head + np.ascontiguousarray(self.coeffs, dtype="<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes, basis: "SpaceTimeBasis") -> "PeriodicField":
        nl = data.index(b"\n")
        head = json.loads(data[:nl])
        if (head["N_t"], head["N_x"], head["n_quad"]) != (basis.N_t, basis.N_x, basis.n_quad):
            raise GridMismatchError("stored field was built on a different basis")
        if not np.allclose(head["box"], basis.domain.box) or head["period_L"] != basis.domain.period_L:
            raise GridMismatchError("stored field was built on a different domain")
        arr = np.frombuffer(data[nl + 1:], dtype="<f8").reshape(head["shape"]).astype(float)
        return cls(basis, arr, FieldKind(head["kind"]))


class SpaceTimeBasis:
    """Bases, quadrature grid and the linear maps between coefficients and nodes.

    Spatial quadrature uses ``n_quad`` Gauss-Legendre points per axis
    (default ``3 N_x + 8``); time quadrature uses ``2 N_t + 1`` uniform nodes,
    which integrates trigonometric polynomials of degree up to ``2 N_t``
    exactly.
    """

    def __init__(self, domain: DomainSpec, N_t: int, N_x: int, n_quad: int | None = None,
                 max_unknowns: int = MAX_UNKNOWNS):
        if N_t < 1 or N_x < 1:
            raise ValueError("need at least one time and one space mode")
        self.domain = domain
        self.N_t, self.N_x = int(N_t), int(N_x)
        self.n_t = 2 * N_t + 1
        self.n_v = N_x ** 3
        self.n_s = (N_x + 1) ** 3
        if max(3 * self.n_t * self.n_v, self.n_t * self.n_s) > max_unknowns:
            raise ResourceError(
                f"N_t={N_t}, N_x={N_x} gives {3 * self.n_t * self.n_v} velocity unknowns, "
                f"cap is {max_unknowns}")
        self.n_quad = int(n_quad) if n_quad is not None else 3 * N_x + 8
        L = domain.period_L
        ells = domain.box

        # time grid
        self.M_t = 2 * N_t + 1
        self.t_nodes = np.arange(self.M_t) * (L / self.M_t)
        self.t_weights = np.full(self.M_t, L / self.M_t)
        self.A, self.dA = time_table(self.t_nodes, L, N_t)

        # spatial grid
        axes = [gauss_legendre(self.n_quad, ell) for ell in ells]
        X = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        Wg = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        self.x_nodes = np.stack([x.ravel() for x in X], axis=1)
        self.x_weights = (Wg[0] * Wg[1] * Wg[2]).ravel()
        self.Q = self.x_nodes.shape[0]

        self.C, self.dC = self._scalar_tables(self.x_nodes)
        S, dS = self._sine_tables(self.x_nodes)
        # orthonormalize sine products under int grad b . grad b'
        gram = np.einsum("jql,q,jqm->lm", dS, self.x_weights, dS)
        self._chol = linalg.cholesky(gram, lower=False)
        inv = linalg.solve_triangular(self._chol, np.eye(self.n_v), lower=False)
        self._vel_transform = inv
        self.S = S @ inv
        self.dS = np.einsum("jql,lm->jqm", dS, inv)

        # boundary quadrature on the six faces
        self.b_nodes, self.b_weights, self.b_normals = self._face_quadrature(axes)
        self.Cb, self.dCb = self._scalar_tables(self.b_nodes)

        Theta0 = domain.Theta0
        self.Theta0_b = (np.asarray(Theta0(self.b_nodes), dtype=float) if callable(Theta0)
                         else np.full(self.b_nodes.shape[0], float(Theta0)))
        if np.any(self.Theta0_b <= 0):
            raise ValueError("boundary temperature must be positive")
        self.force_nodal = self._force_nodal()

        # constant small matrices
        W = self.t_weights[:, None]
        self.time_mass = self.A.T @ (W * self.A)
        self.time_deriv = self.A.T @ (W * self.dA)      # [j, k] = int a_k' a_j
        self.time_stiff = self.dA.T @ (W * self.dA)
        wx = self.x_weights[:, None]
        self.scalar_mass = self.C.T @ (wx * self.C)
        self.scalar_stiff = sum(self.dC[j].T @ (wx * self.dC[j]) for j in range(3))
        self.velocity_mass = self.S.T @ (wx * self.S)
        self.velocity_gram = sum(self.dS[j].T @ (wx * self.dS[j]) for j in range(3))

    # -- tables ---------------------------------------------------------------
    def _scalar_tables(self, pts):
        tabs = [cosine_table(pts[:, i], self.domain.box[i], self.N_x) for i in range(3)]
        return _tensor3(tabs)

    def _sine_tables(self, pts):
        tabs = [sine_table(pts[:, i], self.domain.box[i], self.N_x) for i in range(3)]
        return _tensor3(tabs)

    def _face_quadrature(self, axes):
        nodes, weights, normals = [], [], []
        for ax in range(3):
            o1, o2 = [i for i in range(3) if i != ax]
            P1, P2 = np.meshgrid(axes[o1][0], axes[o2][0], indexing="ij")
            W1, W2 = np.meshgrid(axes[o1][1], axes[o2][1], indexing="ij")
            for side, pos in ((-1.0, 0.0), (1.0, self.domain.box[ax])):
                pts = np.zeros((P1.size, 3))
                pts[:, ax] = pos
                pts[:, o1] = P1.ravel()
                pts[:, o2] = P2.ravel()
                nrm = np.zeros((P1.size, 3))
                nrm[:, ax] = side
                nodes.append(pts)
                weights.append((W1 * W2).ravel())
                normals.append(nrm)
        return np.concatenate(nodes), np.concatenate(weights), np.concatenate(normals)

    def _force_nodal(self):
        f = self.domain.force
        if f is None:
            return np.zeros((self.M_t, self.Q, 3))
        val = np.asarray(f(self.t_nodes[:, None], self.x_nodes[None, :, :]), dtype=float)
        return np.broadcast_to(val, (self.M_t, self.Q, 3)).copy()

    # -- bookkeeping ----------------------------------------------------------
    @property
    def velocity_dim(self) -> int:
        return 3 * self.n_t * self.n_v

    @property
    def scalar_dim(self) -> int:
        return self.n_t * self.n_s

    def coeff_shape(self, kind: FieldKind):
        return (self.n_t, self.n_s) if FieldKind(kind) is FieldKind.SCALAR else (self.n_t, 3, self.n_v)

    def zeros(self, kind: FieldKind) -> PeriodicField:
        return PeriodicField(self, np.zeros(self.coeff_shape(kind)), kind)

    def constant(self, value: float) -> PeriodicField:
        c = np.zeros(self.coeff_shape(FieldKind.SCALAR))
        c[0, 0] = value * np.sqrt(self.domain.period_L * self.domain.volume)
        return PeriodicField(self, c, FieldKind.SCALAR)

    def check_nodal(self, arr, trailing=()):
        arr = np.asarray(arr)
        if arr.shape[:2] != (self.M_t, self.Q) or arr.shape[2:] != tuple(trailing):
            raise GridMismatchError(
                f"nodal array of shape {arr.shape} is not on the ({self.M_t}, {self.Q}) grid")
        return arr

    # -- synthesis ------------------------------------------------------------
    def evaluate(self, fld: PeriodicField, time_deriv: bool = False):
        At = self.dA if time_deriv else self.A
        if fld.kind is FieldKind.SCALAR:
            return At @ fld.coeffs @ self.C.T
        tmp = At @ fld.coeffs.reshape(self.n_t, -1)
        tmp = tmp.reshape(self.M_t, 3, self.n_v) @ self.S.T
        return np.transpose(tmp, (0, 2, 1))

    def gradient(self, fld: PeriodicField):
        if fld.kind is FieldKind.SCALAR:
            tc = self.A @ fld.coeffs
            return np.stack([tc @ self.dC[j].T for j in range(3)], axis=-1)
        tmp = (self.A @ fld.coeffs.reshape(self.n_t, -1)).reshape(self.M_t, 3, self.n_v)
        g = np.stack([tmp @ self.dS[j].T for j in range(3)], axis=-1)  # (M, 3, Q, 3)
        return np.transpose(g, (0, 2, 1, 3))

    def divergence(self, fld: PeriodicField):
        if fld.kind is not FieldKind.VELOCITY:
            raise ValueError("divergence needs a velocity field")
        tmp = (self.A @ fld.coeffs.reshape(self.n_t, -1)).reshape(self.M_t, 3, self.n_v)
        return sum(tmp[:, j, :] @ self.dS[j].T for j in range(3))

    def boundary_values(self, fld: PeriodicField):
        """Trace of a scalar field on the face nodes, ``(M_t, Qb)``."""
        if fld.kind is FieldKind.VELOCITY:
            return np.zeros((self.M_t, self.b_nodes.shape[0], 3))
        return self.A @ fld.coeffs @ self.Cb.T

    # -- analysis -------------------------------------------------------------
    def integrate(self, values):
        """Space-time integral of a nodal scalar array ``(M_t, Q)``."""
        values = self.check_nodal(values)
        return float(self.t_weights @ values @ self.x_weights)

    def integrate_boundary(self, values):
        values = np.asarray(values)
        if values.shape != (self.M_t, self.b_nodes.shape[0]):
            raise GridMismatchError("boundary array not on the face grid")
        return float(self.t_weights @ values @ self.b_weights)

    def spatial_integral(self, values):
        """int_Omega at each time node, ``(M_t,)``."""
        values = self.check_nodal(values)
        return values @ self.x_weights

    def project_scalar(self, F=None, G=None, H=None, Fb=None):
        """Coefficients of int int (F psi + G . grad psi + H d_t psi) + int int_dOmega Fb psi."""
        out = np.zeros((self.n_t, self.n_s))
        wt = self.t_weights[:, None]
        wx = self.x_weights[None, :]
        if F is not None:
            out += self.A.T @ (wt * self.check_nodal(F) * wx) @ self.C
        if H is not None:
            out += self.dA.T @ (wt * self.check_nodal(H) * wx) @ self.C
        if G is not None:
            G = self.check_nodal(G, (3,))
            for j in range(3):
                out += self.A.T @ (wt * G[..., j] * wx) @ self.dC[j]
        if Fb is not None:
            out += self.A.T @ (wt * Fb * self.b_weights[None, :]) @ self.Cb
        return out

    def project_velocity(self, F=None, G=None, H=None):
        """Coefficients of int int (F . w + G : grad w + H . d_t w)."""
        out = np.zeros((self.n_t, 3, self.n_v))
        wt = self.t_weights[:, None]
        wx = self.x_weights[None, :]
        for c in range(3):
            if F is not None:
                out[:, c, :] += self.A.T @ (wt * self.check_nodal(F, (3,))[..., c] * wx) @ self.S
            if H is not None:
                out[:, c, :] += self.dA.T @ (wt * self.check_nodal(H, (3,))[..., c] * wx) @ self.S
            if G is not None:
                G = self.check_nodal(G, (3, 3))
                for j in range(3):
                    out[:, c, :] += self.A.T @ (wt * G[..., c, j] * wx) @ self.dS[j]
        return out

    def l2_project_scalar(self, values) -> PeriodicField:
        """L^2 projection of nodal values onto the scalar space (orthonormal basis)."""
        rhs = self.project_scalar(F=values)
        c = linalg.solve(self.time_mass, rhs, assume_a="pos")
        c = linalg.solve(self.scalar_mass, c.T, assume_a="pos").T
        return PeriodicField(self, c, FieldKind.SCALAR)

    def l2_project_velocity(self, values) -> PeriodicField:
        rhs = self.project_velocity(F=values)
        c = linalg.solve(self.time_mass, rhs.reshape(self.n_t, -1), assume_a="pos")
        c = c.reshape(self.n_t, 3, self.n_v)
        c = np.einsum("lm,kcm->kcl", linalg.inv(self.velocity_mass), c)
        return PeriodicField(self, c, FieldKind.VELOCITY)

    def gram_matrix(self) -> np.ndarray:
        """int int grad w^i : grad w^j over the full velocity space-time basis."""
        return np.kron(self.time_mass, np.kron(np.eye(3), self.velocity_gram))

    # -- evaluation at arbitrary points --------------------------------------
    def _check_points(self, x, on_boundary=False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        box = np.asarray(self.domain.box)
        tol = 1e-12 * box.max()
        if np.any(x < -tol) or np.any(x > box + tol):
            raise OutsideDomainError("point outside the closed box")
        if on_boundary:
            d = np.minimum(np.abs(x), np.abs(box - x)).min(axis=1)
            if np.any(d > tol):
                raise OutsideDomainError("boundary trace requested at an interior point")
        return x

    def evaluate_at(self, fld: PeriodicField, what: Op, t, x):
        """Evaluate at paired points ``t[p], x[p]``."""
        what = Op(what)
        x = self._check_points(x, on_boundary=what is Op.BOUNDARY_TRACE)
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        a, da = time_table(t, self.domain.period_L, self.N_t)
        tc = (da if what is Op.TIME_DERIV else a)
        if fld.kind is FieldKind.SCALAR:
            val, grad = self._scalar_tables(x)
            coef_t = tc @ fld.coeffs   # (P, n_s)
            if what in (Op.EVAL, Op.TIME_DERIV, Op.BOUNDARY_TRACE):
                return np.sum(coef_t * val, axis=1)
            if what is Op.GRAD:
                return np.stack([np.sum(coef_t * grad[j], axis=1) for j in range(3)], axis=1)
            raise ValueError("divergence of a scalar field is undefined")
        val, grad = self._sine_tables(x)
        val = val @ self._vel_transform
        grad = np.einsum("jpl,lm->jpm", grad, self._vel_transform)
        coef_t = np.einsum("pk,kcl->pcl", tc, fld.coeffs)
        if what in (Op.EVAL, Op.TIME_DERIV, Op.BOUNDARY_TRACE):
            return np.einsum("pcl,pl->pc", coef_t, val)
        g = np.einsum("pcl,jpl->pcj", coef_t, grad)
        if what is Op.GRAD:
            return g
        return np.trace(g, axis1=1, axis2=2)


def build_bases(domain: DomainSpec, N_t: int, N_x: int, **kw) -> SpaceTimeBasis:
    return SpaceTimeBasis(domain, N_t, N_x, **kw)


def field_calculus(fld: PeriodicField, what: Op | str, points=None):
    """Apply EVAL, GRAD, DIV, TIME_DERIV or BOUNDARY_TRACE.

    ``points=None`` works on the quadrature grid (boundary traces on the face
    grid, returned together with the face weights); otherwise ``points`` is a
    pair ``(t, x)`` of paired evaluation points.
    """
    what = Op(what)
    b = fld.basis
    if points is not None:
        t, x = points
        return b.evaluate_at(fld, what, t, x)
    if what is Op.EVAL:
        return b.evaluate(fld)
    if what is Op.TIME_DERIV:
        return b.evaluate(fld, time_deriv=True)
    if what is Op.GRAD:
        return b.gradient(fld)
    if what is Op.DIV:
        return b.divergence(fld)
    return b.boundary_values(fld), b.b_weights


def space_time_integrals(basis: SpaceTimeBasis, *factors):
    """int int of the pointwise product of nodal scalar arrays (each
    broadcastable to ``(M_t, Q)``)."""
    if not factors:
        raise ValueError("nothing to integrate")
    prod = np.ones((basis.M_t, basis.Q))
    for f in factors:
        f = np.asarray(f, dtype=float)
        if f.ndim == 0:
            prod = prod * f
            continue
        try:
            f = np.broadcast_to(f, (basis.M_t, basis.Q))
        except ValueError:
            raise GridMismatchError(f"factor of shape {f.shape} does not broadcast to the grid") from None
        prod = prod * f
    return basis.integrate(prod)
