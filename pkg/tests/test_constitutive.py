import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_nsf.constitutive import (ConstitutiveParams, DomainError, DVariant, ParameterError,
                                       dissipation_eval, energy_density, gibbs_residual,
                                       pressure, thermo_eval, transport_eval)

RADIATIVE = ConstitutiveParams(gamma=5 / 3, c_v=1.0, a_rad=3.0)


def test_pressure_at_unit_state():
    assert thermo_eval(1.0, 1.0, RADIATIVE).p == pytest.approx(3.0, abs=1e-14)


def test_vacuum_keeps_only_radiation_pressure():
    ev = thermo_eval(0.0, 2.0, RADIATIVE)
    assert ev.p == pytest.approx(16.0, abs=1e-13)
    assert ev.e is None and ev.s is None


def test_vacuum_entries_are_nan_in_arrays():
    ev = thermo_eval(np.array([0.0, 1.0]), np.array([2.0, 1.0]), RADIATIVE)
    assert np.isnan(ev.e[0]) and np.isnan(ev.s[0])
    assert ev.e[1] == pytest.approx(5.5)


def test_energy_and_entropy_at_unit_state():
    ev = thermo_eval(1.0, 1.0, RADIATIVE)
    assert ev.s == pytest.approx(4.0, abs=1e-14)
    assert ev.e == pytest.approx(5.5, abs=1e-14)


def test_energy_matches_integrated_gibbs_relation():
    # e(rho, theta) - e(rho, 1) = int_1^theta theta' ds/dtheta' dtheta' along fixed rho
    from scipy.integrate import quad
    p, rho, theta = RADIATIVE, 1.3, 2.1

    def dsdt(t):
        h = 1e-6
        return t * (thermo_eval(rho, t + h, p).s - thermo_eval(rho, t - h, p).s) / (2 * h)

    integral, _ = quad(dsdt, 1.0, theta)
    diff = thermo_eval(rho, theta, p).e - thermo_eval(rho, 1.0, p).e
    assert integral == pytest.approx(diff, rel=1e-7)


def test_domain_errors():
    with pytest.raises(DomainError):
        thermo_eval(-1.0, 1.0, RADIATIVE)
    with pytest.raises(DomainError):
        thermo_eval(1.0, 0.0, RADIATIVE)


@pytest.mark.parametrize("rho,theta", [(1.0, 1.0), (2.0, 0.5)])
def test_gibbs_residual_small(rho, theta):
    rt, rr = gibbs_residual(rho, theta, ConstitutiveParams(), h=1e-4)
    assert abs(rt) <= 1e-6 and abs(rr) <= 1e-6


def test_gibbs_detector_sees_pressure_offset():
    _, rr = gibbs_residual(1.0, 1.0, ConstitutiveParams(), h=1e-4, pressure_offset=1.0)
    assert abs(rr) == pytest.approx(1.0, abs=1e-4)


def test_gibbs_rejects_bad_step():
    with pytest.raises(ParameterError):
        gibbs_residual(1.0, 1.0, ConstitutiveParams(), h=0.0)


def test_transport_at_unit_temperature():
    mu, eta, kappa, d = transport_eval(None, 1.0, ConstitutiveParams())
    assert (mu, kappa, d) == (2.0, 2.0, 3.0)
    assert eta == 0.0
    assert 1.0 * (1 + 1) < d < 2.0 * (1 + 1)


def test_transport_low_temperature_limit():
    mu, _, kappa, _ = transport_eval(None, 1e-12, ConstitutiveParams(mu0=0.7, kappa0=0.3))
    assert mu == pytest.approx(0.7) and kappa == pytest.approx(0.3)


def test_independent_boundary_coefficient():
    _, _, _, d = transport_eval(None, 5.0, ConstitutiveParams(d0=2.0, d_variant=DVariant.TEMP_INDEPENDENT))
    assert d == 2.0


def test_no_motion_no_dissipation():
    S, sigma = dissipation_eval(1.0, np.zeros((3, 3)), np.zeros(3), ConstitutiveParams())
    assert np.all(S == 0) and sigma == 0


def test_isotropic_dilation_is_annihilated():
    S, sigma = dissipation_eval(1.0, np.eye(3), np.zeros(3), ConstitutiveParams())
    assert np.allclose(S, 0, atol=1e-15) and sigma == pytest.approx(0, abs=1e-15)


def test_simple_shear_dissipation():
    # S = mu (e1 x e2 + e2 x e1) with mu = 2, so S : grad u = mu * 1 = 2
    g = np.zeros((3, 3))
    g[0, 1] = 1.0
    S, sigma = dissipation_eval(1.0, g, np.zeros(3), ConstitutiveParams())
    brute = sum(S[i, j] * g[i, j] for i in range(3) for j in range(3))
    sym = g + g.T
    assert brute == pytest.approx(2.0 * np.sum(sym * sym) / 2)
    assert brute == pytest.approx(2.0) and sigma == pytest.approx(2.0)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        ConstitutiveParams(gamma=1.0)
    with pytest.raises(ParameterError):
        ConstitutiveParams(mu0=0.0)


def test_regime_flag():
    assert ConstitutiveParams(gamma=1.7).in_regime
    assert not ConstitutiveParams(gamma=1.5).in_regime
    assert not ConstitutiveParams(gamma=1.58, d_variant=DVariant.TEMP_INDEPENDENT).in_regime


def test_flat_roundtrip():
    p = ConstitutiveParams(gamma=1.65, a_rad=0.5, d_variant=DVariant.TEMP_INDEPENDENT)
    assert ConstitutiveParams.from_flat(p.to_flat()) == p
    with pytest.raises(ParameterError):
        ConstitutiveParams.from_flat({"nonsense": "1"})


positive = st.floats(1e-3, 1e3)


@given(positive, positive, st.floats(1.05, 3.0))
def test_gibbs_property(rho, theta, gamma):
    rt, rr = gibbs_residual(rho, theta, ConstitutiveParams(gamma=gamma), h=1e-4, relative=True)
    assert abs(rt) <= 1e-6 and abs(rr) <= 1e-6


@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_entropy_production_nonnegative(grad_u, grad_theta, theta):
    _, sigma = dissipation_eval(theta, np.reshape(grad_u, (3, 3)), np.array(grad_theta),
                                ConstitutiveParams(eta0=0.5))
    assert sigma >= -1e-12 * (1 + abs(sigma))


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e2), st.floats(1e-3, 1e2))
def test_pressure_energy_monotone_in_temperature(rho, t1, t2):
    lo, hi = sorted((t1, t2))
    p = ConstitutiveParams()
    assert pressure(rho, lo, p) <= pressure(rho, hi, p)
    assert energy_density(rho, lo, p) <= energy_density(rho, hi, p)


@given(st.floats(1e-3, 1e3))
def test_transport_bounds(theta):
    p = ConstitutiveParams(d0=1.0)
    mu, _, kappa, d = transport_eval(None, theta, p)
    assert mu >= p.mu0 * (1 + theta) * (1 - 1e-15)
    assert kappa >= p.kappa0 * (1 + theta ** 3) * (1 - 1e-15)
    assert p.d0 * (1 + theta ** 3) < d < 2 * p.d0 * (1 + theta ** 3)
