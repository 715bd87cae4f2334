"""Scan the adiabatic exponent and show where the exponent window opens.

With radiation the window for ``a`` is empty up to gamma = 23/15 and opens
just above it. Without radiation the single admissible exponent works only
for gamma > 8/5. The scan prints both cases side by side.
"""

from fractions import Fraction

from periodic_nsf.admissibility import Case, a_window


def describe(window):
    if window.empty:
        return "EMPTY"
    return f"({window.a_low:.5f}, {window.a_high:.5f}) bound by {window.binding_term}"


def main():
    gammas = [Fraction(3, 2), Fraction(23, 15), Fraction(23, 15) + Fraction(1, 1000),
              Fraction(8, 5), Fraction(5, 3), Fraction(17, 10), Fraction(2)]
    print(f"{'gamma':>12}  {'radiation':<48} no radiation")
    for g in gammas:
        rad = a_window(g, Case.RADIATION)
        nor = a_window(g, Case.NO_RADIATION)
        fixed = "EMPTY" if nor.empty else f"a = {nor.a_chosen:.5f}"
        if nor.out_of_scope:
            fixed += " (outside the range of the existence result)"
        print(f"{float(g):12.6f}  {describe(rad):<48} {fixed}")


if __name__ == "__main__":
    main()
