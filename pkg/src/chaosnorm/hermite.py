"""Probabilists' Hermite polynomials with exact integer coefficients.

``H_d(x) = d! * sum_l (-1)^l x^(d-2l) / (2^l l! (d-2l)!)``. Coefficients are
Python ints so nothing overflows; floats appear only in :func:`hermite_eval`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial


@dataclass(frozen=True)
class HermitePoly:
    degree: int
    monomial_coeffs: tuple[int, ...]  # index = power of x

    def __call__(self, x: float) -> float:
        # Horner on the monomial form; prefer hermite_eval for large degree.
        acc = 0.0
        for c in reversed(self.monomial_coeffs):
            acc = acc * x + c
        return acc

    def terms(self):
        """Yield ``(power, coeff)`` for the nonzero monomials."""
        for power, c in enumerate(self.monomial_coeffs):
            if c:
                yield power, c


@lru_cache(maxsize=None)
def hermite_coefficients(d: int) -> HermitePoly:
    if d < 0:
        raise ValueError(f"Hermite degree must be nonnegative, got {d}")
    coeffs = [0] * (d + 1)
    for l in range(d // 2 + 1):
        # d! / (2^l l! (d-2l)!) is always an integer
        coeffs[d - 2 * l] = (-1) ** l * factorial(d) // (2**l * factorial(l) * factorial(d - 2 * l))
    return HermitePoly(d, tuple(coeffs))


def hermite_eval(d: int, x):
    """Evaluate ``H_d(x)`` by the three-term recurrence.

    Works on floats and on numpy arrays alike.
    """
    if d < 0:
        raise ValueError(f"Hermite degree must be nonnegative, got {d}")
    h_prev = 1.0 + 0.0 * x
    if d == 0:
        return h_prev
    h = x + 0.0 * x
    for j in range(1, d):
        h_prev, h = h, x * h - j * h_prev
    return h


def alternating_power_sum(d: int) -> int:
    """``t(d) = sum_{l=0}^{d} (-1)^l C(d, l) l^d`` with the convention ``0^0 = 1``."""
    if d < 0:
        raise ValueError(f"d must be nonnegative, got {d}")
    # Python already evaluates 0 ** 0 == 1
    return sum((-1) ** l * comb(d, l) * l**d for l in range(d + 1))
