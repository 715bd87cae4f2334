import functools

import numpy as np
import pytest

from periodic_nsf.admissibility import AdmissibilityError
from periodic_nsf.auditors import (apriori_report, balance_audit, energy_profile, mass_audit,
                                   pressure_estimate_test)
from periodic_nsf.constitutive import ConstitutiveParams, DVariant, thermo_eval
from periodic_nsf.discretization import DomainSpec
from periodic_nsf.solvers import ApproxParams, Scheme, trivial_state

BOX = (1.0, 2.0, 1.5)


@functools.lru_cache(maxsize=None)
def trivial_scheme(gamma=1.7):
    return Scheme.build(DomainSpec(box=BOX, M0=3.0), ConstitutiveParams(gamma=gamma),
                        ApproxParams(N_t=1, N_x=2))


def trivial(sc):
    st = trivial_state(sc)
    st.lam = 1.0
    return st


def test_mass_audit_trivial_and_perturbed():
    sc = trivial_scheme()
    st = trivial(sc)
    assert mass_audit(st, sc) <= 1e-14
    st.rho = st.rho + sc.basis.constant(0.01)
    assert mass_audit(st, sc) == pytest.approx(0.01 * np.prod(BOX), rel=1e-12)


def test_balance_audit_on_trivial_state():
    sc = trivial_scheme()
    st = trivial(sc)
    rep = balance_audit(st, sc)
    ap, m = sc.ap, sc.m
    vol_time = sc.basis.domain.period_L * np.prod(BOX)
    G = ap.Gamma
    assert rep.entropy_sign_min == 0.0
    t = rep.energy_terms
    assert t["boundary_flux"] == 0.0 and t["forcing_work"] == 0.0 and t["tau_phi"] == 0.0
    reg = ap.eps * ap.delta * vol_time * (G / (G - 1) * m ** G + 2 * m ** 2)
    assert t["eps_delta_pressure"] == pytest.approx(reg, rel=1e-12)
    assert t["eps_delta_mass"] == pytest.approx(-reg, rel=1e-12)
    # the only unbalanced term is the delta / theta heat source
    assert rep.energy_identity_err == pytest.approx(-ap.delta * vol_time, rel=1e-10)
    assert rep.reliable


def test_unconverged_state_flagged_unreliable():
    sc = trivial_scheme()
    st = trivial(sc)
    st.converged = False
    rep = balance_audit(st, sc)
    assert not rep.reliable
    assert {"record": "status", "reliable": False} in rep.to_records()


def test_converged_forced_state_audits(forced_problem):
    sc, st = forced_problem
    rep = balance_audit(st, sc)
    assert rep.mass_err <= 1e-9 * sc.basis.domain.M0
    assert rep.entropy_sign_min >= -1e-9 * rep.entropy_sign_scale
    assert rep.energy_identity_rel <= 1e-6
    assert rep.direction_ok and rep.dissipation_lhs <= rep.boundary_rhs
    assert rep.entropy_identity_rel <= 1e-6


def test_entropy_sign_detector(forced_problem):
    sc, st = forced_problem
    assert balance_audit(st, sc, heat_sign=-1.0).entropy_sign_min < 0


def test_apriori_trivial_state():
    sc = trivial_scheme()
    st = trivial(sc)
    norms, chain = apriori_report(st, sc)
    for key in ("u_L2W12", "u_L2L6", "grad_theta32_L2L2", "grad_log_theta_L2L2"):
        assert norms[key] == 0.0
    E = energy_profile(st, sc)
    ev = thermo_eval(sc.m, 1.0, sc.cp)
    assert np.allclose(E, np.prod(BOX) * sc.m * ev.e, rtol=1e-13)
    assert all(np.isfinite(e["ratio"]) for e in chain)


def test_l3l9_identity_and_boundary_norm(forced_problem):
    sc, st = forced_problem
    norms, chain = apriori_report(st, sc)
    assert norms["theta_L3L9"] ** 3 == pytest.approx(norms["theta_L3L9_via_theta32"] ** 3, rel=1e-8)
    assert np.isfinite(norms["theta_boundary_L13_3"])
    assert "theta_boundary_L4" in norms
    assert all(np.isfinite(v) for v in norms.values())
    ids = [e["estimate"] for e in chain]
    assert ids == ["dissipation", "forcing", "temperature_bulk", "velocity_l6", "total_energy",
                   "boundary_temperature", "pressure"]


def test_independent_variant_reports_l1_boundary_norm():
    sc = Scheme.build(DomainSpec(), ConstitutiveParams(gamma=1.7, d_variant=DVariant.TEMP_INDEPENDENT),
                      ApproxParams(N_t=1, N_x=2))
    norms, _ = apriori_report(trivial(sc), sc)
    assert "theta_boundary_L1" in norms and "theta_boundary_L4" not in norms


def test_regularized_energy_switch():
    sc = trivial_scheme()
    norms, _ = apriori_report(trivial(sc), sc, include_regularized_energy=False)
    assert "sup_E_delta" not in norms


def test_pressure_test_trivial_state_is_zero():
    sc = trivial_scheme()
    led = pressure_estimate_test(trivial(sc), sc)
    # b(rho) - {b(rho)} vanishes up to roundoff, which the pressure multiplies
    tol = 1e-13 * max(1.0, led.pressure_norm)
    assert all(abs(v) <= tol for v in led.terms.values())
    assert abs(led.identity_residual) <= tol


def test_pressure_identity_on_converged_state(forced_problem):
    sc, st = forced_problem
    led = pressure_estimate_test(st, sc)
    assert abs(led.identity_residual) <= max(1e-6 * led.scale, led.residual_bound)
    assert abs(led.exact_identity_residual) <= 1e-6 * led.scale
    assert led.lhs_density > 0


def test_pressure_test_refuses_empty_window():
    sc = trivial_scheme(gamma=1.5)
    with pytest.raises(AdmissibilityError):
        pressure_estimate_test(trivial(sc), sc)


def _perturbed(sc, amplitude):
    b = sc.basis
    st = trivial(sc)
    bump = np.cos(np.pi * b.x_nodes[:, 0])[None, :] * np.ones((b.M_t, 1))
    st.rho = st.rho + amplitude * b.l2_project_scalar(bump)
    return st


def test_pressure_term_scales_with_perturbation():
    sc = trivial_scheme()
    s = 1e-4
    one = pressure_estimate_test(_perturbed(sc, s), sc)
    two = pressure_estimate_test(_perturbed(sc, 2 * s), sc)
    # Phi is linear in the perturbation and so is the pressure fluctuation
    assert two.terms["pressure"] / one.terms["pressure"] == pytest.approx(4.0, rel=1e-2)
