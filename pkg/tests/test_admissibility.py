import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_nsf.admissibility import (GAMMA_FOOTNOTE, GAMMA_NO_RADIATION_MIN,
                                        GAMMA_RADIATION_MIN, Case, a_window, discriminant,
                                        estimate_chain_report, interpolation_exponents,
                                        quadratic_value, radiation_window_terms)


@pytest.mark.parametrize("gamma,expected", [(Fraction(5, 3), 105), (Fraction(23, 15), 25), (2, 445)])
def test_discriminant_values(gamma, expected):
    assert discriminant(gamma) == expected


def test_window_at_five_thirds():
    w = a_window(Fraction(5, 3))
    assert w.a_high == pytest.approx(16 / 15, abs=1e-15)
    assert w.binding_term == "interpolation"
    assert w.terms["quadratic"] == pytest.approx(1 + (-5 + math.sqrt(105)) / 50, abs=1e-14)
    assert w.terms["quadratic"] == pytest.approx(1.1049, abs=1e-4)
    assert w.a_chosen == pytest.approx(0.5 * (1 + 16 / 15))


def test_window_empty_at_threshold():
    w = a_window(GAMMA_RADIATION_MIN)
    assert w.empty and w.width == 0.0
    assert radiation_window_terms(GAMMA_RADIATION_MIN)["quadratic"] == pytest.approx(1.0, abs=1e-15)


def test_no_radiation_boundary_not_admissible():
    w = a_window(Fraction(8, 5), Case.NO_RADIATION)
    assert w.empty
    assert Fraction(w.a_low).limit_denominator(1000) == Fraction(25, 24)
    assert Fraction(25, 24) * Fraction(8, 5) == Fraction(5, 3)


def test_no_radiation_at_1_7():
    w = a_window(1.7, Case.NO_RADIATION)
    assert not w.empty and not w.out_of_scope
    assert w.a_chosen == pytest.approx(11 / 10.2, abs=1e-12)
    assert w.a_chosen * 1.7 == pytest.approx(1.8333, abs=1e-4)
    rep = estimate_chain_report(1.7, case=Case.NO_RADIATION)
    conv = next(e for e in rep.entries if e.inequality_id == "convective_exponent")
    assert conv.lhs_value == pytest.approx(0.6667, abs=1e-4) and conv.strict_ok
    assert rep.admissible


def test_no_radiation_out_of_scope_flag():
    assert a_window(2, Case.NO_RADIATION).out_of_scope


def test_interpolation_exponent_examples():
    g = 1.7
    a = (5 * g - 3) / (3 * g)
    assert interpolation_exponents(g, a).p_i == pytest.approx(g, abs=1e-12)
    ie = interpolation_exponents(Fraction(5, 3), Fraction(105, 100))
    assert ie.p_i == pytest.approx(1.625) and ie.valid
    lim = interpolation_exponents(Fraction(5, 3), 1)
    assert lim.p_i == 1.5 and lim.alpha == pytest.approx(5 / 6)


def test_quadratic_value_example():
    assert quadratic_value(Fraction(5, 3), Fraction(7, 4)) == Fraction(-13, 16)
    rep = estimate_chain_report(Fraction(5, 3), Fraction(105, 100))
    quad = next(e for e in rep.entries if e.inequality_id == "convective_quadratic")
    assert quad.lhs_value == pytest.approx(-0.8125) and quad.strict_ok


def test_thin_window_just_above_threshold():
    g = GAMMA_RADIATION_MIN + Fraction(1, 10 ** 9)
    w = a_window(g)
    assert not w.empty and w.width < 1e-8
    rep = estimate_chain_report(g)
    assert all(e.strict_ok for e in rep.entries)


def test_chain_report_records_and_table():
    rep = estimate_chain_report(1.7)
    recs = rep.to_records()
    assert recs[0]["record"] == "chain_summary" and len(recs) == len(rep.entries) + 1
    assert "admissible=True" in rep.table()
    assert rep.beta < 1


def test_string_and_fraction_inputs_agree():
    assert a_window("23/15").empty
    assert a_window("17/10").a_high == a_window(Fraction(17, 10)).a_high


def _quadratic_root_oracle(gamma):
    # numpy root-finder, independent of the discriminant formula
    roots = np.roots([15.0, 5.0 - 30.0 * gamma, 33.0 * gamma - 23.0])
    return max(r.real for r in roots) / gamma


@given(st.floats(1.55, 2.0))
def test_quadratic_term_matches_root_oracle(gamma):
    assert radiation_window_terms(gamma)["quadratic"] == pytest.approx(
        _quadratic_root_oracle(gamma), abs=1e-10)


@given(st.fractions(Fraction(3, 2), Fraction(2), max_denominator=10 ** 6))
def test_window_empty_exactly_below_threshold(gamma):
    if gamma <= 1:
        return
    assert a_window(gamma).empty == (gamma <= GAMMA_RADIATION_MIN)


@given(st.fractions(Fraction(3, 2), Fraction(2), max_denominator=10 ** 6))
def test_no_radiation_flag_flips_at_eight_fifths(gamma):
    assert a_window(gamma, Case.NO_RADIATION).empty == (gamma <= GAMMA_NO_RADIATION_MIN)


@given(st.floats(float(GAMMA_FOOTNOTE) + 1e-9, 2.0))
def test_interpolation_term_below_quadratic_above_39_25(gamma):
    t = radiation_window_terms(gamma)
    assert t["interpolation"] < t["quadratic"]
    assert a_window(gamma).binding_term == "interpolation"


@given(st.floats(1.54, 2.0), st.floats(0.01, 0.99))
def test_interpolation_valid_inside_window(gamma, frac):
    w = a_window(gamma)
    if w.empty:
        return
    a = 1 + frac * (w.a_high - 1)
    assert interpolation_exponents(gamma, a).valid


@given(st.floats(1.54, 2.0), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_chain_monotone_as_a_shrinks(gamma, f1, f2):
    w = a_window(gamma)
    if w.empty:
        return
    hi, lo = sorted((f1, f2), reverse=True)
    a_hi, a_lo = 1 + hi * (w.a_high - 1), 1 + lo * (w.a_high - 1)
    ok_hi = {e.inequality_id: e.strict_ok for e in estimate_chain_report(gamma, a_hi).entries}
    ok_lo = {e.inequality_id: e.strict_ok for e in estimate_chain_report(gamma, a_lo).entries}
    for key, ok in ok_hi.items():
        if ok:
            assert ok_lo[key], key
