"""Large-n behaviour of the chaos coefficients.

Two readings of the decay law are kept side by side:

* ``decay_exponent`` -- ``1/2 + |A|`` with ``|A|`` the number of multiplicities >= 2,
  together with the two published variants of the limiting constant;
* ``leading_exponent`` / ``leading_constant`` -- what the exact Gamma-ratio sum
  actually does. Its ``k``-th finite difference of ``Gamma(j+(n-1)/2)/Gamma(j+n/2)``
  behaves like the ``k``-th derivative of ``(n/2 + j)^(-1/2)``, giving::

      a ~ (-1)^k (2k-1)!! 2^(-k) (2d_1+1)! prod (2d_j)! / prod d_j!  n^(-1/2-k)

The two exponents coincide only when every half-multiplicity is 0 or 1.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from .coefficients import coefficient
from .hermite import alternating_power_sum
from .patterns import MultiplicityPattern, is_vanishing

MISMATCH_TOLERANCE = 0.10
VARIANTS = ("statement", "proof")


def _require_nonvanishing(p: MultiplicityPattern) -> None:
    if is_vanishing(p):
        raise ValueError(f"pattern {p} is vanishing; it has no decay law")


def _odd_double_factorial(k: int) -> int:
    # (2k-1)!! with (-1)!! = 1
    out = 1
    for j in range(1, 2 * k, 2):
        out *= j
    return out


def decay_exponent(p: MultiplicityPattern) -> Fraction:
    """``1/2 + |A|``, ``|A|`` = number of parts >= 2 counted with multiplicity."""
    _require_nonvanishing(p)
    return Fraction(1, 2) + sum(1 for part in p.parts if part >= 2)


def leading_exponent(p: MultiplicityPattern) -> Fraction:
    """``1/2 + k`` for order ``2k + 1``: the decay rate of the exact coefficient."""
    _require_nonvanishing(p)
    return Fraction(1, 2) + p.k


def _hermite_weight(p: MultiplicityPattern) -> int:
    # (2d_1+1)! prod (2d_j)!
    return math.prod(factorial(part) for part in p.parts)


def leading_constant(p: MultiplicityPattern) -> Fraction:
    _require_nonvanishing(p)
    k = p.k
    d_fact = math.prod(factorial(d) for d in p.half_multiplicities())
    return Fraction((-1) ** k * _odd_double_factorial(k) * _hermite_weight(p), 2**k * d_fact)


def paper_constant(p: MultiplicityPattern, variant: str = "statement") -> float:
    """The published limiting constant, literally.

    ``statement`` carries ``1/k!`` in front, ``proof`` carries ``k!``; the rest is
    ``(2k-1)!! (2d_1+1)! prod (2d_j)! / (prod d_j!)^2  2^(-2k) (-1)^k prod t(d_j)``.
    """
    _require_nonvanishing(p)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    k = p.k
    d = p.half_multiplicities()
    t_prod = math.prod(alternating_power_sum(dj) for dj in d)
    d_fact = math.prod(factorial(dj) for dj in d)
    core = Fraction((-1) ** k * _odd_double_factorial(k) * _hermite_weight(p) * t_prod, d_fact**2 * 4**k)
    scale = Fraction(1, factorial(k)) if variant == "statement" else Fraction(factorial(k))
    return float(core * scale)


def _log_abs_coefficients(p: MultiplicityPattern, n_grid: Sequence[int]) -> tuple[np.ndarray, np.ndarray, float]:
    values = [coefficient(p, n) for n in n_grid]
    for n, a in zip(n_grid, values):
        if a == 0.0 or abs(a) < np.finfo(float).tiny:
            raise ArithmeticError(
                f"coefficient {p} underflows at n={n}; use a smaller order or smaller dimensions"
            )
    log_n = np.log(np.asarray(n_grid, dtype=float))
    log_a = np.log(np.abs(values))
    return log_n, log_a, math.copysign(1.0, values[int(np.argmax(n_grid))])


def free_slope(p: MultiplicityPattern, n_grid: Sequence[int]) -> float:
    """Least-squares slope of ``log|a|`` against ``log n``."""
    log_n, log_a, _ = _log_abs_coefficients(p, n_grid)
    slope, _ = np.polyfit(log_n, log_a, 1)
    return float(slope)


def fitted_constant(p: MultiplicityPattern, n_grid: Sequence[int], exponent: Fraction | float | None = None) -> tuple[float, float]:
    """Fit ``log|a| = log|C| - exponent * log n`` with the exponent held fixed.

    The exponent defaults to :func:`leading_exponent`. Returns ``(C, residual)``,
    the residual being the largest absolute log deviation over the grid.
    """
    _require_nonvanishing(p)
    n_grid = sorted(n_grid)
    if len(n_grid) < 4:
        raise ValueError("fitted_constant needs at least 4 dimensions")
    if n_grid[0] < 20 * p.order:
        raise ValueError(f"grid must start at n >= 20 * order = {20 * p.order}, got {n_grid[0]}")
    if exponent is None:
        exponent = leading_exponent(p)
    log_n, log_a, sign = _log_abs_coefficients(p, n_grid)
    scaled = log_a + float(exponent) * log_n
    intercept = float(np.mean(scaled))
    residual = float(np.max(np.abs(scaled - intercept)))
    return sign * math.exp(intercept), residual


def geometric_grid(start: int, stop: int) -> list[int]:
    out = [start]
    while out[-1] * 2 <= stop:
        out.append(out[-1] * 2)
    return out


@dataclass(frozen=True)
class AsymptoticReport:
    pattern: MultiplicityPattern
    exponent: Fraction
    leading_exponent: Fraction
    paper_constant_statement: float
    paper_constant_proof: float
    fitted_constant: float
    fit_residual: float
    n_grid: tuple[int, ...]

    @property
    def paper_constant_mismatch(self) -> bool:
        """True when neither published variant is within 10% of the fitted constant."""
        rel = [abs(self.fitted_constant - c) / abs(self.fitted_constant)
               for c in (self.paper_constant_statement, self.paper_constant_proof)]
        return min(rel) > MISMATCH_TOLERANCE

    @property
    def exponent_mismatch(self) -> bool:
        return self.exponent != self.leading_exponent


def asymptotic_report(p: MultiplicityPattern, n_grid: Sequence[int] | None = None) -> AsymptoticReport:
    if n_grid is None:
        n_grid = geometric_grid(max(100, 20 * p.order), 1600 if p.order <= 7 else 3200)
    const, residual = fitted_constant(p, n_grid)
    return AsymptoticReport(
        pattern=p,
        exponent=decay_exponent(p),
        leading_exponent=leading_exponent(p),
        paper_constant_statement=paper_constant(p, "statement"),
        paper_constant_proof=paper_constant(p, "proof"),
        fitted_constant=const,
        fit_residual=residual,
        n_grid=tuple(sorted(n_grid)),
    )


CSV_COLUMNS = ("pattern", "exponent", "const_statement", "const_proof", "const_fitted", "residual",
               "n_min", "n_max", "leading_exponent", "paper_constant_mismatch")


def _fraction_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def report_csv(reports: Sequence[AsymptoticReport]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in reports:
        row = [f'"{r.pattern}"', _fraction_text(r.exponent), repr(r.paper_constant_statement),
               repr(r.paper_constant_proof), repr(r.fitted_constant), repr(r.fit_residual),
               str(r.n_grid[0]), str(r.n_grid[-1]), _fraction_text(r.leading_exponent),
               "true" if r.paper_constant_mismatch else "false"]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
