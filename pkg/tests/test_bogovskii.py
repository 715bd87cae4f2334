import functools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_nsf.bogovskii import MeanConditionError, bogovskii_solve, remove_mean
from periodic_nsf.discretization import DomainSpec, FieldKind, PeriodicField, build_bases

BOX = (1.0, 2.0, 1.5)


@functools.lru_cache(maxsize=None)
def basis_of(N_x, N_t=1):
    return build_bases(DomainSpec(box=BOX), N_t, N_x)


def test_zero_rhs_gives_zero():
    b = basis_of(2)
    res = bogovskii_solve(b, np.zeros((b.M_t, b.Q)))
    assert np.all(res.field.coeffs == 0) and res.div_residual == 0.0


def test_preimage_of_basis_mode():
    b = basis_of(3)
    w = b.zeros(FieldKind.VELOCITY)
    w.coeffs[1, 0, 5] = 1.0
    f = b.divergence(w)
    res = bogovskii_solve(b, f)
    assert res.div_residual <= 1e-10
    assert not res.rank_deficient
    # w and the minimum-norm preimage differ by a divergence-free field
    diff = PeriodicField(b, w.coeffs - res.field.coeffs, FieldKind.VELOCITY)
    assert np.max(np.abs(b.divergence(diff))) <= 1e-10
    assert np.linalg.norm(res.field.coeffs) <= np.linalg.norm(w.coeffs) + 1e-12


def test_field_vanishes_on_boundary():
    b = basis_of(2)
    f = remove_mean(b, np.cos(np.pi * b.x_nodes[:, 0] / BOX[0])[None, :] * np.ones((b.M_t, 1)))
    res = bogovskii_solve(b, f)
    assert np.max(np.abs(b.boundary_values(res.field))) == 0.0


def test_refinement_reduces_residual():
    resid = []
    for N in (2, 4, 6):
        b = basis_of(N)
        g = np.cos(np.pi * b.x_nodes[:, 0] / BOX[0])[None, :] * np.ones((b.M_t, 1))
        resid.append(bogovskii_solve(b, remove_mean(b, g)).div_residual)
    assert resid[0] > resid[1] > resid[2]


def test_mean_condition_enforced():
    b = basis_of(2)
    with pytest.raises(MeanConditionError):
        bogovskii_solve(b, np.ones((b.M_t, b.Q)))


def test_bound_constant_reported():
    b = basis_of(2)
    f = remove_mean(b, b.x_nodes[:, 1][None, :] * np.ones((b.M_t, 1)))
    res = bogovskii_solve(b, f)
    assert np.isfinite(res.bound_constant) and res.bound_constant > 0


coeff_lists = st.lists(st.floats(-1, 1), min_size=4, max_size=4)


def _scalar_data(b, coeffs):
    x = b.x_nodes
    t = b.t_nodes[:, None]
    return (coeffs[0] * np.cos(np.pi * x[:, 0])[None] + coeffs[1] * x[:, 1][None] ** 2
            + coeffs[2] * np.sin(2 * np.pi * t) * np.cos(np.pi * x[:, 2] / 1.5)[None]
            + coeffs[3] * x[:, 0][None] * x[:, 2][None])


@given(coeff_lists, coeff_lists, st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(c1, c2, alpha, beta):
    b = basis_of(2)
    f = remove_mean(b, _scalar_data(b, c1))
    g = remove_mean(b, _scalar_data(b, c2))
    lhs = bogovskii_solve(b, alpha * f + beta * g).field.coeffs
    rhs = alpha * bogovskii_solve(b, f).field.coeffs + beta * bogovskii_solve(b, g).field.coeffs
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


@given(coeff_lists, st.floats(-5, 5))
def test_mean_annihilation(c, shift):
    b = basis_of(2)
    data = _scalar_data(b, c)
    a = bogovskii_solve(b, remove_mean(b, data)).field.coeffs
    s = bogovskii_solve(b, remove_mean(b, data + shift)).field.coeffs
    assert np.max(np.abs(a - s)) <= 1e-10 * max(1.0, np.max(np.abs(a)))
