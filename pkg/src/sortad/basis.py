"""Chebyshev and Legendre basis machinery for the polynomial transformations.

Each transformation term is a single basis element scaled by a drawn
coefficient and by the overflow-guarding divide factor 10^(degree - h).
Only basis elements whose monomial expansion has no constant part are
eligible, so that applying a term never injects a constant offset that
could swamp small feature values.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import TransformOverflowError

CHEBYSHEV = "chebyshev"
LEGENDRE = "legendre"
BASES = (CHEBYSHEV, LEGENDRE)


def eval_chebyshev(degree, x):
    """Evaluate T_degree(x) by the recurrence T_n = 2x*T_{n-1} - T_{n-2}."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    if degree == 0:
        out = np.ones_like(x)
    else:
        prev, cur = np.ones_like(x), 1.0 * x
        for _ in range(degree - 1):
            prev, cur = cur, 2.0 * x * cur - prev
        out = cur
    return float(out) if out.ndim == 0 else out


def eval_legendre(degree, x):
    """Evaluate P_degree(x) by the recurrence n*P_n = (2n-1)x*P_{n-1} - (n-1)P_{n-2}."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    if degree == 0:
        out = np.ones_like(x)
    else:
        prev, cur = np.ones_like(x), 1.0 * x
        for n in range(2, degree + 1):
            prev, cur = cur, ((2.0 * n - 1.0) * x * cur - (n - 1.0) * prev) / n
        out = cur
    return float(out) if out.ndim == 0 else out


def monomial_coefficients(basis, degree):
    """Exact monomial coefficients of a basis element, ascending powers.

    Runs the defining recurrence in rational arithmetic, so the constant
    term is exact and fit to decide Non-Constant eligibility.
    """
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    prev = [Fraction(1)]
    cur = [Fraction(0), Fraction(1)]
    if degree == 0:
        return prev
    for n in range(2, degree + 1):
        if basis == CHEBYSHEV:
            lead, trail, div = Fraction(2), Fraction(1), Fraction(1)
        else:
            lead, trail, div = Fraction(2 * n - 1), Fraction(n - 1), Fraction(n)
        shifted = [Fraction(0)] + [lead * c for c in cur]
        nxt = [
            (shifted[k] - (trail * prev[k] if k < len(prev) else 0)) / div
            for k in range(len(shifted))
        ]
        prev, cur = cur, nxt
    return cur


def nonconstant_degrees(basis, max_degree):
    """Degrees in [1, max_degree] whose basis element has zero constant term."""
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    return [
        d for d in range(1, max_degree + 1)
        if monomial_coefficients(basis, d)[0] == 0
    ]


@dataclass(frozen=True)
class PolyTerm:
    """One scaled basis element: coefficient * B_degree(x) / 10^divide_exponent."""

    basis: str
    degree: int
    coefficient: float
    divide_exponent: int


def make_term(basis, degree, coefficient, h=2):
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return PolyTerm(basis, int(degree), float(coefficient), int(degree) - int(h))


def apply_term(term, x):
    """Apply one term to a scalar or array of inputs."""
    with np.errstate(over="ignore", invalid="ignore"):
        if term.basis == CHEBYSHEV:
            base = eval_chebyshev(term.degree, x)
        else:
            base = eval_legendre(term.degree, x)
        out = term.coefficient * base * 10.0 ** (-term.divide_exponent)
    if not np.all(np.isfinite(out)):
        raise TransformOverflowError(
            f"term {term.basis} degree {term.degree} produced a non-finite value"
        )
    return out
