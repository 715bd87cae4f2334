import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_nsf.discretization import (DomainSpec, FieldKind, GridMismatchError, Op,
                                         OutsideDomainError, PeriodicField, ResourceError,
                                         ShearForcing, SpaceTimeBasis, build_bases,
                                         field_calculus, space_time_integrals)

BOX = (1.0, 2.0, 1.5)


@pytest.fixture(scope="module")
def basis():
    return build_bases(DomainSpec(period_L=2.0, box=BOX), N_t=2, N_x=2)


@pytest.fixture(scope="module")
def unit_basis():
    return build_bases(DomainSpec(), N_t=2, N_x=3)


def test_dimension_bookkeeping():
    b = build_bases(DomainSpec(), 1, 1)
    assert b.velocity_dim == 3 * (2 * 1 + 1) * 1
    b2 = build_bases(DomainSpec(), 2, 3)
    assert b2.velocity_dim == 3 * 5 * 27 and b2.scalar_dim == 5 * 64


def test_velocity_gram_is_identity(basis):
    G = basis.gram_matrix()
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-10


def test_mass_matrices_are_identity(basis):
    # products of two basis functions integrate exactly
    assert np.max(np.abs(basis.time_mass - np.eye(basis.n_t))) <= 1e-12
    assert np.max(np.abs(basis.scalar_mass - np.eye(basis.n_s))) <= 1e-12


def test_constant_field_single_coefficient(basis):
    c = basis.constant(2.5)
    assert np.count_nonzero(np.abs(c.coeffs) > 1e-15) == 1
    assert np.allclose(c.nodal(), 2.5)
    assert np.max(np.abs(field_calculus(c, Op.GRAD))) <= 1e-13


def test_divergence_of_sine_mode(unit_basis):
    b = unit_basis
    x = b.x_nodes
    s = np.sin(np.pi * x[:, 1]) * np.sin(np.pi * x[:, 2])
    vals = np.zeros((b.M_t, b.Q, 3))
    vals[..., 0] = np.sin(np.pi * x[:, 0]) * s
    w = b.l2_project_velocity(vals)
    div = field_calculus(w, Op.DIV)
    assert np.max(np.abs(div - np.pi * np.cos(np.pi * x[:, 0]) * s)) <= 1e-10


def test_gradient_matches_analytic(unit_basis):
    b = unit_basis
    x = b.x_nodes
    t = b.t_nodes[:, None]
    vals = np.cos(2 * np.pi * t) * np.cos(np.pi * x[:, 0])[None] * np.cos(2 * np.pi * x[:, 2])[None]
    f = b.l2_project_scalar(vals)
    g = field_calculus(f, Op.GRAD)
    exact0 = -np.pi * np.cos(2 * np.pi * t) * np.sin(np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 2])
    exact2 = -2 * np.pi * np.cos(2 * np.pi * t) * np.cos(np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 2])
    assert np.max(np.abs(g[..., 0] - exact0)) <= 1e-10
    assert np.max(np.abs(g[..., 1])) <= 1e-10
    assert np.max(np.abs(g[..., 2] - exact2)) <= 1e-10


def test_time_derivative_of_cosine_mode(basis):
    L = basis.domain.period_L
    f = basis.zeros(FieldKind.SCALAR)
    f.coeffs[1, 0] = 1.0           # sqrt(2/L) cos(2 pi t / L) times the constant mode
    amp = np.sqrt(2.0 / L) * basis.C[0, 0]
    d = field_calculus(f, Op.TIME_DERIV)
    exact = -amp * (2 * np.pi / L) * np.sin(2 * np.pi * basis.t_nodes / L)
    assert np.max(np.abs(d - exact[:, None])) <= 1e-12


def test_space_time_integrals(basis):
    L = basis.domain.period_L
    vol = np.prod(BOX)
    assert space_time_integrals(basis, 1.0) == pytest.approx(L * vol, rel=1e-13)
    s2 = np.sin(2 * np.pi * basis.t_nodes / L)[:, None] ** 2
    c2 = np.cos(np.pi * basis.x_nodes[:, 0] / BOX[0])[None, :] ** 2
    assert space_time_integrals(basis, s2, c2) == pytest.approx(
        (L / 2) * (BOX[0] / 2) * BOX[1] * BOX[2], rel=1e-13)
    odd = np.sin(2 * np.pi * basis.t_nodes / L)[:, None] * np.ones((1, basis.Q))
    assert abs(space_time_integrals(basis, odd)) <= 1e-13


def test_grid_mismatch_rejected(basis):
    with pytest.raises(GridMismatchError):
        space_time_integrals(basis, np.ones((3, 3)))
    with pytest.raises(GridMismatchError):
        PeriodicField(basis, np.zeros((2, 2)), FieldKind.SCALAR)


def test_point_evaluation_consistent_with_nodes(basis):
    rng = np.random.default_rng(3)
    f = PeriodicField(basis, rng.normal(size=basis.coeff_shape(FieldKind.SCALAR)), FieldKind.SCALAR)
    u = PeriodicField(basis, rng.normal(size=basis.coeff_shape(FieldKind.VELOCITY)), FieldKind.VELOCITY)
    idx = [0, 17, basis.Q - 1]
    for ti in range(basis.M_t):
        t = np.full(len(idx), basis.t_nodes[ti])
        x = basis.x_nodes[idx]
        assert np.allclose(field_calculus(f, Op.EVAL, (t, x)), f.nodal()[ti, idx], atol=1e-12)
        assert np.allclose(field_calculus(u, Op.GRAD, (t, x)), basis.gradient(u)[ti, idx], atol=1e-11)
        assert np.allclose(field_calculus(u, Op.DIV, (t, x)), basis.divergence(u)[ti, idx], atol=1e-11)
        assert np.allclose(field_calculus(f, Op.TIME_DERIV, (t, x)),
                           basis.evaluate(f, True)[ti, idx], atol=1e-11)


def test_boundary_trace(basis):
    f = basis.constant(1.5)
    vals, w = field_calculus(f, Op.BOUNDARY_TRACE)
    assert np.allclose(vals, 1.5)
    area = 2 * (BOX[0] * BOX[1] + BOX[1] * BOX[2] + BOX[0] * BOX[2])
    assert w.sum() == pytest.approx(area, rel=1e-13)
    u = PeriodicField(basis, np.ones(basis.coeff_shape(FieldKind.VELOCITY)), FieldKind.VELOCITY)
    trace = field_calculus(u, Op.BOUNDARY_TRACE, (np.zeros(2), np.array([[0.0, 0.5, 0.5], [1.0, 1.0, 1.0]])))
    assert np.max(np.abs(trace)) <= 1e-13


def test_outside_points_rejected(basis):
    f = basis.constant(1.0)
    with pytest.raises(OutsideDomainError):
        field_calculus(f, Op.EVAL, (np.zeros(1), np.array([[2.0, 0.5, 0.5]])))
    with pytest.raises(OutsideDomainError):
        field_calculus(f, Op.BOUNDARY_TRACE, (np.zeros(1), np.array([[0.5, 0.5, 0.5]])))


def test_resource_cap():
    with pytest.raises(ResourceError):
        SpaceTimeBasis(DomainSpec(), N_t=4, N_x=8)


def test_serialization_roundtrip(basis):
    rng = np.random.default_rng(0)
    u = PeriodicField(basis, rng.normal(size=basis.coeff_shape(FieldKind.VELOCITY)), FieldKind.VELOCITY)
    data = u.to_bytes()
    back = PeriodicField.from_bytes(data, basis)
    assert back.kind is FieldKind.VELOCITY and np.array_equal(back.coeffs, u.coeffs)
    other = build_bases(DomainSpec(), 2, 3)
    with pytest.raises(GridMismatchError):
        PeriodicField.from_bytes(data, other)


def test_shear_forcing_sup_norm():
    b = build_bases(DomainSpec(force=ShearForcing(0.25)), 2, 2)
    assert np.max(np.abs(b.force_nodal)) <= 0.25
    assert np.max(np.abs(b.force_nodal)) == pytest.approx(0.25, rel=0.05)


@given(st.integers(0, 2 ** 32 - 1))
def test_integration_by_parts(seed):
    b = _ibp_basis()
    rng = np.random.default_rng(seed)
    w = PeriodicField(b, rng.normal(size=b.coeff_shape(FieldKind.VELOCITY)), FieldKind.VELOCITY)
    q = PeriodicField(b, rng.normal(size=b.coeff_shape(FieldKind.SCALAR)), FieldKind.SCALAR)
    lhs = b.integrate(b.divergence(w) * q.nodal())
    rhs = b.integrate(np.sum(w.nodal() * b.gradient(q), axis=-1))
    assert abs(lhs + rhs) <= 1e-9 * max(1.0, abs(lhs))


_CACHE = {}


def _ibp_basis():
    if "b" not in _CACHE:
        _CACHE["b"] = build_bases(DomainSpec(box=BOX), 1, 2)
    return _CACHE["b"]
