"""Exponent arithmetic for the admissible adiabatic exponents and the
Bogovskii test exponent ``a``.

Everything that can be decided in rational arithmetic is decided with
``fractions.Fraction``: a float argument is converted to the rational it
represents exactly, so a strict inequality is never blurred by rounding.
The one irrational quantity, sqrt(D_A), enters only through sign criteria
that are squared out before comparing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Union

Number = Union[int, float, Fraction]

GAMMA_RADIATION_MIN = Fraction(23, 15)
GAMMA_NO_RADIATION_MIN = Fraction(8, 5)
GAMMA_FOOTNOTE = Fraction(39, 25)


class AdmissibilityError(ValueError):
    """The requested (gamma, case) has no admissible Bogovskii exponent."""


class Case(str, enum.Enum):
    RADIATION = "RADIATION"
    NO_RADIATION = "NO_RADIATION"


def _q(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError("exponent must be finite")
    return Fraction(x)


def discriminant(gamma: Number) -> Fraction:
    """D_A = 5 (180 gamma^2 - 456 gamma + 281), exact for rational gamma."""
    g = _q(gamma)
    if not g > 1:
        raise ValueError("gamma must exceed 1")
    return 5 * (180 * g * g - 456 * g + 281)


def quadratic_value(gamma: Number, A: Number) -> Fraction:
    """15 A^2 + A (5 - 30 gamma) + 33 gamma - 23 at A = a * gamma."""
    g, A = _q(gamma), _q(A)
    return 15 * A * A + A * (5 - 30 * g) + 33 * g - 23


def _lt_sqrt(x: Fraction, D: Fraction) -> bool:
    """Exact test of ``x < sqrt(D)`` for D >= 0."""
    return x < 0 or x * x < D


@dataclass(frozen=True)
class ExponentWindow:
    gamma: float
    case: Case
    a_low: float = 1.0
    a_high: float | None = None  # None encodes EMPTY
    binding_term: str | None = None
    a_chosen: float | None = None
    terms: dict = field(default_factory=dict)
    out_of_scope: bool = False

    @property
    def empty(self) -> bool:
        return self.a_high is None

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.a_high - self.a_low

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["case"] = self.case.value
        rec["empty"] = self.empty
        return rec


def radiation_window_terms(gamma: Number) -> dict[str, float]:
    """The three candidate upper bounds for ``a`` in the radiation case."""
    g = _q(gamma)
    D = discriminant(g)
    gf = float(g)
    return {
        "interpolation": float((5 * g - 3) / (3 * g)),
        "quadratic": 1.0 + (-5.0 + math.sqrt(float(D))) / (30.0 * gf),
        "renormalization": float((g + 1) / g),
    }


def interpolation_bound_below_quadratic(gamma: Number) -> bool:
    """Exact test of ``(5g-3)/(3g) < 1 + (sqrt(D_A) - 5)/(30 g)``.

    Multiplying out reduces it to ``20 g - 25 < sqrt(D_A)``; squaring leaves
    ``(25 g - 39)(g - 1) > 0``, true exactly for g > 39/25.
    """
    g = _q(gamma)
    return _lt_sqrt(20 * g - 25, discriminant(g))


def a_window(gamma: Number, case: Case | str = Case.RADIATION) -> ExponentWindow:
    case = Case(case)
    g = _q(gamma)
    if not g > 1:
        raise ValueError("gamma must exceed 1")
    if case is Case.NO_RADIATION:
        a = (5 * g - 3) / (3 * g)
        ok = a * g > Fraction(5, 3)
        return ExponentWindow(
            gamma=float(g), case=case, a_low=float(a), a_high=float(a) if ok else None,
            binding_term="fixed", a_chosen=float(a), terms={"fixed": float(a)},
            out_of_scope=g >= 2,
        )

    terms = radiation_window_terms(g)
    # nonempty iff every term exceeds 1: the interpolation term needs g > 3/2,
    # the quadratic term needs D_A > 25, i.e. 12 (15 g - 23)(g - 1) > 0
    nonempty = g > Fraction(3, 2) and discriminant(g) > 25
    if not nonempty:
        return ExponentWindow(gamma=float(g), case=case, terms=terms)
    first = "interpolation" if interpolation_bound_below_quadratic(g) else "quadratic"
    # (g+1)/g < (5g-3)/(3g) only for g > 3, so the last term rarely binds
    binding = "renormalization" if terms["renormalization"] < terms[first] else first
    a_high = terms[binding]
    return ExponentWindow(gamma=float(g), case=case, a_high=a_high, binding_term=binding,
                          a_chosen=0.5 * (1.0 + a_high), terms=terms)


@dataclass(frozen=True)
class InterpolationExponents:
    p_i: float
    alpha: float
    valid: bool


def interpolation_exponents(gamma: Number, a: Number) -> InterpolationExponents:
    """Lebesgue exponent ``p_i`` of the Bogovskii estimate and the weight
    ``alpha`` interpolating between L^1 and L^gamma; valid iff 1 < p_i < gamma."""
    g, a = _q(gamma), _q(a)
    p = Fraction(3, 2) * (1 + g * (a - 1))
    k = 3 * g * a - 3 * g
    alpha = g / (g - 1) * (k + 1) / (k + 3)
    return InterpolationExponents(float(p), float(alpha), bool(1 < p < g))


@dataclass(frozen=True)
class ChainEntry:
    inequality_id: str
    lhs_value: float
    rhs_value: float
    strict_ok: bool
    energy_exponent: bool = False


@dataclass(frozen=True)
class ChainReport:
    gamma: float
    a: float
    case: Case
    entries: list
    p_i: float
    alpha: float
    beta: float
    regime_flag: str = ""

    @property
    def admissible(self) -> bool:
        return all(e.strict_ok for e in self.entries) and self.beta < 1

    def to_records(self) -> list[dict]:
        head = {"record": "chain_summary", "gamma": self.gamma, "a": self.a,
                "case": self.case.value, "p_i": self.p_i, "alpha": self.alpha,
                "beta": self.beta, "admissible": self.admissible,
                "regime_flag": self.regime_flag}
        rows = [dict(record="chain_entry", **asdict(e)) for e in self.entries]
        return [head] + rows

    def table(self) -> str:
        lines = [f"gamma={self.gamma!r} case={self.case.value} a={self.a!r}",
                 f"{'inequality':<28}{'lhs':>16}{'rhs':>16}  ok"]
        for e in self.entries:
            lines.append(f"{e.inequality_id:<28}{e.lhs_value:>16.10g}{e.rhs_value:>16.10g}  "
                         f"{'yes' if e.strict_ok else 'NO'}")
        lines.append(f"p_i={self.p_i:.10g} alpha={self.alpha:.10g} beta={self.beta:.10g} "
                     f"admissible={self.admissible}")
        return "\n".join(lines)


def _entry(name, lhs: Fraction, rhs: Fraction, energy=False) -> ChainEntry:
    return ChainEntry(name, float(lhs), float(rhs), bool(lhs < rhs), energy)


def estimate_chain_report(gamma: Number, a: Number | None = None,
                          case: Case | str = Case.RADIATION) -> ChainReport:
    """Evaluate every strict inequality used by the estimate chain.

    ``a=None`` selects the window default (midpoint, or the fixed value in the
    no-radiation case). ``beta`` is the largest energy exponent among the
    entries flagged as such.
    """
    case = Case(case)
    g = _q(gamma)
    win = a_window(g, case)
    if a is None:
        a = (5 * g - 3) / (3 * g) if case is Case.NO_RADIATION else (
            Fraction(win.a_chosen) if not win.empty else Fraction(1))
    a = _q(a)
    A = a * g
    ie = interpolation_exponents(g, a)
    p_q = Fraction(3, 2) * (1 + g * (a - 1))
    one = Fraction(1)
    entries: list[ChainEntry] = []

    if case is Case.RADIATION:
        gm1 = g - 1
        entries += [
            _entry("kinetic_absorption", 1 / (5 * gm1) + 1 / (3 * gm1), one, True),
            _entry("radiation_absorption", Fraction(4, 3) * g / (5 * gm1), g),
            _entry("density_temperature", 8 * g / (45 * gm1), g),
            _entry("convective_quadratic", quadratic_value(g, A), Fraction(0)),
            _entry("interp_lower", one, p_q),
            _entry("interp_upper", p_q, g),
        ]
        k = 3 * g * a - 3 * g
        alpha = g / gm1 * (k + 1) / (k + 3)
        if 5 * A - 6 > 0:
            conv = alpha * (1 + g * (a - 1)) * (5 * A - 5) / (g * (5 * A - 6))
            entries.append(_entry("convective_exponent", conv, one, True))
        else:
            entries.append(ChainEntry("convective_exponent", math.inf, 1.0, False, True))
        entries += [
            _entry("temperature_radiation", Fraction(1, 4) + 1 / (5 * gm1), one, True),
            _entry("temperature_density", 1 / (9 * gm1) + 1 / (15 * gm1), one, True),
            _entry("forcing", Fraction(1, 2), one, True),
            _entry("a_above_one", one, a),
        ]
        regime = "" if g > GAMMA_RADIATION_MIN else "gamma<=23/15"
    else:
        entries += [
            _entry("young_absorption", 4 * A / (6 * (A - 1)) if A != 1 else Fraction(10**9), A),
            _entry("convective_exponent", 1 / g + (2 * g - 3) / (3 * g), one, True),
            _entry("time_derivative", 1 / g + a - 1, one, True),
            _entry("temperature", Fraction(3, 4), one, True),
            _entry("forcing", Fraction(1, 2), one, True),
            _entry("a_gamma_above_5_3", Fraction(5, 3), A),
        ]
        regime = "gamma>=2 outside appendix scope" if g >= 2 else (
            "" if g > GAMMA_NO_RADIATION_MIN else "gamma<=8/5")
    energy = [e.lhs_value for e in entries if e.energy_exponent]
    beta = max(energy) if energy else math.nan
    return ChainReport(gamma=float(g), a=float(a), case=case, entries=entries,
                       p_i=ie.p_i, alpha=ie.alpha, beta=beta, regime_flag=regime)
