"""Kirchhoff transform of the regularized heat flux in log-temperature.

    Phi(g) = int_0^g [kappa(e^z) e^z + delta e^{(B+1) z} + delta] dz

Phi is smooth, strictly increasing with Phi' >= delta, so it is a bijection
of the real line. The inverse is computed by bracketed Newton iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

logger = logging.getLogger(__name__)


class KirchhoffRangeError(OverflowError):
    """Phi(g) is not representable in double precision."""


@dataclass(frozen=True)
class KirchhoffSpec:
    delta: float = 1e-2
    B: float = 6.0
    kappa0: float = 1.0
    # alternative conductivity kappa(theta); None selects kappa0 * (1 + theta**3)
    kappa_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.B >= 2:
            raise ValueError("B must be at least 2")
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")

    @classmethod
    def from_params(cls, cparams, delta: float, B: float) -> "KirchhoffSpec":
        return cls(delta=delta, B=B, kappa0=cparams.kappa0)


def _derivative(g, spec: KirchhoffSpec):
    eg = np.exp(g)
    if spec.kappa_fn is None:
        heat = spec.kappa0 * (eg + np.exp(4.0 * g))
    else:
        heat = np.vectorize(spec.kappa_fn, otypes=[float])(eg) * eg
    return heat + spec.delta * np.exp((spec.B + 1.0) * g) + spec.delta


def _value_closed(g, spec: KirchhoffSpec):
    b1 = spec.B + 1.0
    return (spec.kappa0 * (np.expm1(g) + np.expm1(4.0 * g) / 4.0)
            + spec.delta * np.expm1(b1 * g) / b1 + spec.delta * g)


def _value_quad(g, spec: KirchhoffSpec):
    def one(x):
        if x == 0.0:
            return 0.0
        # the delta*g part is integrated exactly; quadrature handles the rest
        val, _ = integrate.quad(lambda z: float(_derivative(z, spec)) - spec.delta,
                                0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)
        return val + spec.delta * x
    return np.vectorize(one, otypes=[float])(g)


def phi_eval(g, spec: KirchhoffSpec):
    """Return ``(Phi(g), Phi'(g))``; array input is evaluated elementwise."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("phi_eval requires finite arguments")
    try:
        with np.errstate(over="raise"):
            d = _derivative(g, spec)
            v = _value_closed(g, spec) if spec.kappa_fn is None else _value_quad(g, spec)
    except FloatingPointError as exc:
        raise KirchhoffRangeError(f"Phi overflows for max g = {g.max():.6g}") from exc
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
        raise KirchhoffRangeError(f"Phi overflows for max g = {g.max():.6g}")
    return v, d


def phi_inverse(y, spec: KirchhoffSpec, max_iter: int = 200):
    """Solve ``Phi(g) = y`` elementwise.

    Brackets come from the linear lower bound Phi' >= delta and, for positive
    y, from the exponential terms. Newton steps that leave the bracket are
    replaced by bisection.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y).astype(float)
    if not np.all(np.isfinite(y)):
        raise ValueError("phi_inverse requires finite arguments")
    dl, b1 = spec.delta, spec.B + 1.0

    pos = y >= 0
    ya = np.abs(y)
    hi_pos = np.minimum(ya / dl, np.log1p(ya * b1 / dl) / b1)
    if spec.kappa_fn is None:
        hi_pos = np.minimum(hi_pos, np.log1p(4.0 * ya / spec.kappa0) / 4.0)
        # Phi(g) >= delta*g - (5/4 kappa0 + delta/(B+1)) for g <= 0
        c = 1.25 * spec.kappa0 + dl / b1
        hi_neg = np.minimum(0.0, (y + c) / dl)
    else:
        hi_neg = np.zeros_like(y)
    lo = np.where(pos, 0.0, y / dl)
    hi = np.where(pos, hi_pos, hi_neg)

    # start from the linear branch, which is close for negative y
    g = np.where(pos, 0.5 * (lo + hi), np.clip(hi_neg - 0.0, lo, hi))
    tol = 1e-10 * np.maximum(1.0, ya)
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(max_iter):
        act = ~done
        if not act.any():
            break
        ga = g[act]
        v, d = phi_eval(ga, spec)
        res = v - y[act]
        lo_a, hi_a = lo[act], hi[act]
        lo_a = np.where(res < 0, ga, lo_a)
        hi_a = np.where(res > 0, ga, hi_a)
        step = res / d
        gn = ga - step
        bad = ~((gn > lo_a) & (gn < hi_a)) & (res != 0)
        gn = np.where(bad, 0.5 * (lo_a + hi_a), gn)
        gn = np.where(res == 0, ga, gn)
        conv = (np.abs(res) <= tol[act]) & (np.abs(gn - ga) <= 1e-14 * (1.0 + np.abs(ga)))
        conv |= res == 0
        conv |= (hi_a - lo_a) <= 4 * np.finfo(float).eps * (1.0 + np.abs(ga))
        g[act] = gn
        lo[act], hi[act] = lo_a, hi_a
        done[act] = conv
    if not done.all():
        v, _ = phi_eval(g, spec)
        worst = np.max(np.abs(v - y) / np.maximum(1.0, ya))
        if worst > 1e-10:
            logger.warning("phi_inverse: residual %.3e after %d iterations", worst, max_iter)
    return g[0] if scalar else g
