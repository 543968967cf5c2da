"""Gaussian moments of the form E[prod W_i^(2 a_i) / V_n] and Gamma-ratio helpers.

With ``s = sum a_i`` the closed form is

    E[prod W_i^(2a_i) / V_n]
        = (2 pi)^(-n/2) 2^(s + (n-1)/2) Gamma(s + (n-1)/2) / Gamma(s + n/2) prod Gamma(a_i + 1/2)

Every slot contributes ``Gamma(a + 1/2) / sqrt(2 pi) = (2a - 1)!! 2^(-a - 1/2)``, so the
powers of two and pi cancel against the prefactor and only the nonzero slots
remain: ``2^(-1/2) prod (2a_i - 1)!! Gamma(s + (n-1)/2) / Gamma(s + n/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# B_2j / (2j (2j - 1)) for the Stirling series of log Gamma
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)
_SHIFT_TO = 15.0


class DivergentMomentError(ValueError):
    """Raised for E[1/V_1], whose integrand has a non-integrable pole at the origin."""


def _stirling_tail(z: float) -> float:
    zinv = 1.0 / z
    zinv2 = zinv * zinv
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * zinv2 + c
    return acc * zinv


def log_gamma_ratio(x: float, y: float) -> float:
    """``log(Gamma(x) / Gamma(y))`` without forming either log Gamma separately.

    Arguments below the Stirling threshold are shifted up with the recurrence
    ``Gamma(z + 1) = z Gamma(z)``; the large-argument difference is taken with
    ``log1p`` so nearby arguments keep full relative accuracy.
    """
    if not (x > 0 and y > 0):
        raise ValueError(f"gamma_ratio needs positive arguments, got ({x}, {y})")
    if x == y:
        return 0.0
    correction = 1.0
    while min(x, y) < _SHIFT_TO:
        # Gamma(x)/Gamma(y) = Gamma(x+1)/Gamma(y+1) * y/x
        correction *= y / x
        x += 1.0
        y += 1.0
    diff = x - y
    main = (x - 0.5) * math.log1p(diff / y) + diff * (math.log(y) - 1.0)
    return main + (_stirling_tail(x) - _stirling_tail(y)) + math.log(correction)


def gamma_ratio(x: float, y: float) -> float:
    """``Gamma(x) / Gamma(y)`` for positive arguments."""
    return math.exp(log_gamma_ratio(x, y))


def double_factorial_odd(a: int) -> int:
    """``(2a - 1)!!`` with ``(-1)!! = 1``."""
    out = 1
    for j in range(1, 2 * a, 2):
        out *= j
    return out


@dataclass(frozen=True)
class EvenExponentVector:
    """Half-exponents ``a_i`` attached to slots of an ``n``-dimensional Gaussian vector.

    Only nonzero half-exponents are stored; missing slots carry ``a_i = 0``.
    """

    exponent_pairs: tuple[tuple[int, int], ...]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        slots = [s for s, _ in self.exponent_pairs]
        if len(set(slots)) != len(slots):
            raise ValueError(f"duplicate slots in {self.exponent_pairs}")
        for slot, a in self.exponent_pairs:
            if not 1 <= slot <= self.n:
                raise ValueError(f"slot {slot} outside 1..{self.n}")
            if a <= 0:
                raise ValueError(f"stored half-exponents must be positive, got {a} at slot {slot}")

    @classmethod
    def from_half_exponents(cls, halves: Sequence[int], n: int) -> "EvenExponentVector":
        """Build from a dense list, ``halves[i]`` belonging to slot ``i + 1``."""
        if len(halves) > n:
            raise ValueError(f"{len(halves)} half-exponents do not fit in dimension {n}")
        if any(a < 0 for a in halves):
            raise ValueError(f"half-exponents must be nonnegative: {halves}")
        return cls(tuple((i + 1, a) for i, a in enumerate(halves) if a), n)

    @property
    def half_exponents(self) -> tuple[int, ...]:
        return tuple(a for _, a in self.exponent_pairs)

    @property
    def total(self) -> int:
        return sum(self.half_exponents)


def gaussian_moment_over_vn(e: EvenExponentVector) -> float:
    s = e.total
    if e.n == 1 and s == 0:
        raise DivergentMomentError("divergent inverse moment: E[1/V_1] is infinite")
    log_value = log_gamma_ratio(s + (e.n - 1) / 2, s + e.n / 2) - 0.5 * math.log(2.0)
    for a in e.half_exponents:
        log_value += math.log(double_factorial_odd(a))
    return math.exp(log_value)


def odd_monomial_moment_is_zero(exponents: Iterable[int], n: int | None = None) -> float:
    """``E[prod W_i^(e_i) / V_n]``; exactly zero as soon as one exponent is odd."""
    exponents = tuple(exponents)
    if n is None:
        n = len(exponents)
    if any(x < 0 for x in exponents):
        raise ValueError(f"exponents must be nonnegative: {exponents}")
    if any(x % 2 for x in exponents):
        return 0.0
    return gaussian_moment_over_vn(EvenExponentVector.from_half_exponents([x // 2 for x in exponents], n))


def chi_mean(n: int) -> float:
    """``E[V_n] = sqrt(2) Gamma((n+1)/2) / Gamma(n/2)``."""
    if n <= 0:
        raise ValueError(f"chi_mean needs n >= 1, got {n}")
    return math.sqrt(2.0) * gamma_ratio((n + 1) / 2, n / 2)
