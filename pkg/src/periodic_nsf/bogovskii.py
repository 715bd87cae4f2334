"""Discrete right inverse of the divergence with zero boundary values.

At each quadrature time the minimum-norm least-squares problem

    min || div Phi - f ||_{L^2(Omega)}   over Phi in span(sine velocity modes)

is solved by SVD. The spatial velocity modes are orthonormal in the H^1_0
seminorm, so the minimum coefficient norm is also the minimum ||grad Phi||,
which picks the unique preimage orthogonal to divergence-free fields. The
nodal-in-time solutions are interpolated by the time modes (the time grid
has exactly as many nodes as modes), giving a velocity-type PeriodicField.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .discretization import FieldKind, PeriodicField, SpaceTimeBasis

logger = logging.getLogger(__name__)


class MeanConditionError(ValueError):
    """Right-hand side does not have zero spatial mean."""


@dataclass
class BogovskiiResult:
    field: PeriodicField
    div_residual: float          # ||div Phi - f|| in L^2(S^1 x Omega)
    div_residual_rel: float
    residual_per_time: np.ndarray
    rank: int
    rank_deficient: bool
    bound_constant: float        # max_t ||grad Phi(t)|| / ||f(t)||


def remove_mean(basis: SpaceTimeBasis, values):
    """Subtract the spatial mean at every time node."""
    values = basis.check_nodal(values)
    mean = basis.spatial_integral(values) / basis.domain.volume
    return values - mean[:, None]


def divergence_matrix(basis: SpaceTimeBasis):
    """Nodal divergence of the spatial velocity modes, ``(Q, 3 n_v)``."""
    return np.concatenate([basis.dS[c] for c in range(3)], axis=1)


def bogovskii_solve(basis: SpaceTimeBasis, f, tol_mean: float = 1e-12) -> BogovskiiResult:
    """Least-squares preimage of the nodal zero-mean scalar ``f`` ``(M_t, Q)``."""
    if isinstance(f, PeriodicField):
        f = f.nodal()
    f = basis.check_nodal(np.asarray(f, dtype=float))
    means = basis.spatial_integral(f) / basis.domain.volume
    scale = max(1.0, float(np.sqrt(np.max(basis.spatial_integral(f ** 2)))))
    if np.max(np.abs(means)) > tol_mean * scale:
        raise MeanConditionError(
            f"spatial mean {np.max(np.abs(means)):.3e} exceeds tolerance {tol_mean:.1e}")

    sw = np.sqrt(basis.x_weights)
    D = divergence_matrix(basis) * sw[:, None]
    U, sv, Vt = linalg.svd(D, full_matrices=False, lapack_driver="gesvd")
    cutoff = sv[0] * max(D.shape) * np.finfo(float).eps
    rank = int(np.sum(sv > cutoff))
    inv = np.where(sv > cutoff, 1.0 / np.where(sv > cutoff, sv, 1.0), 0.0)
    rank_deficient = rank < D.shape[1]
    if rank_deficient:
        logger.debug("divergence matrix rank %d < %d columns: minimum-norm solution", rank, D.shape[1])

    rhs = f * sw[None, :]                                   # (M_t, Q)
    coef_nodes = ((rhs @ U) * inv[None, :]) @ Vt            # (M_t, 3 n_v)
    resid = coef_nodes @ D.T - rhs
    res_t = np.sqrt(np.sum(resid ** 2, axis=1))
    f_t = np.sqrt(np.sum(rhs ** 2, axis=1))
    grad_t = np.linalg.norm(coef_nodes, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(f_t > 0, grad_t / np.where(f_t > 0, f_t, 1.0), 0.0)

    coeffs = linalg.solve(basis.A, coef_nodes)              # interpolate in time
    fld = PeriodicField(basis, coeffs.reshape(basis.n_t, 3, basis.n_v), FieldKind.VELOCITY)
    total = float(np.sqrt(basis.t_weights @ res_t ** 2))
    fnorm = float(np.sqrt(basis.t_weights @ f_t ** 2))
    return BogovskiiResult(field=fld, div_residual=total,
                           div_residual_rel=total / fnorm if fnorm > 0 else 0.0,
                           residual_per_time=res_t, rank=rank, rank_deficient=rank_deficient,
                           bound_constant=float(ratio.max()))
