"""Stein-Malliavin discrepancy of the self-normalized sum through its kernel quadratic form.

The bracket ``<DF, D(-L)^{-1}F>`` is expanded in chaoses of even order ``2m``. Its
kernel evaluated at an outer index tuple ``i`` of length ``2m`` is::

    h(i) = sum_k 1/(k! (2m-k)!) sum_r 1/r! 1/(2m-k+r+1)
                 sum_{u in [n]^(r+1)} a(u, i_1..i_k) a(u, i_{k+1}..i_2m)

and the discrepancy is ``sum_{m>=1} (2m)! sum_i h(i)^2``. Only ``k = r (mod 2)``
survives, since both coefficient orders must be odd.

Every sum over ``[n]^L`` is grouped exactly:

* outer tuples by the set partition of their positions (a restricted growth
  string); each class holds ``(n)_b`` tuples for ``b`` blocks and all its
  members share one kernel value;
* inner ``u`` tuples by how many entries land on each fixed label plus an
  integer partition for entries on fresh labels.

``h`` as written is not symmetric in ``i`` once ``m >= 2``. With ``symmetrize=True``
the kernel is averaged over position permutations first, which gives the
exact squared norm of the symmetric chaos kernel; the default keeps the
unsymmetrized form, which can only be larger.
"""

from __future__ import annotations

import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Iterator, Sequence

from .coefficients import CoefficientTable, table_build
from .patterns import MultiplicityPattern, falling_factorial, is_vanishing, partitions

MAX_SUPPORTED_M = 4

STEIN_CONSTANTS = {
    "kolmogorov": 1.0,
    "wasserstein": 1.0,
    "total_variation": 2.0,
    "fortet_mourier": 4.0,
}


class UnsupportedTruncationError(NotImplementedError):
    pass


@lru_cache(maxsize=None)
def restricted_growth_strings(length: int) -> tuple[tuple[int, ...], ...]:
    """All set partitions of ``range(length)`` as restricted growth strings."""
    if length == 0:
        return ((),)
    out = []

    def grow(prefix: list[int], top: int) -> None:
        if len(prefix) == length:
            out.append(tuple(prefix))
            return
        for label in range(top + 2):
            prefix.append(label)
            grow(prefix, max(top, label))
            prefix.pop()

    grow([0], 0)
    return tuple(out)


def _relabel(labels: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(x, len(seen)) for x in labels)


def _compositions_bounded(total: int, slots: int) -> Iterator[tuple[int, ...]]:
    """Tuples of ``slots`` nonnegative ints with sum ``<= total``."""
    if slots == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _compositions_bounded(total - first, slots - 1):
            yield (first,) + rest


def _multiplicity_factorials(parts: Sequence[int]) -> int:
    return math.prod(factorial(c) for c in Counter(parts).values())


class _InnerSums:
    """``U(first, second, r) = sum_u a(u + first) a(u + second)`` with grouping and memoization.

    ``first`` and ``second`` are given as per-label counts over the ``b`` fixed labels;
    the value only depends on the multiset of ``(first_j, second_j)`` pairs.
    """

    def __init__(self, table: CoefficientTable, n: int):
        self.table = table
        self.n = n
        self._memo: dict[tuple, float] = {}

    def _lookup(self, parts: list[int]) -> float:
        p = MultiplicityPattern.of(*(c for c in parts if c))
        if is_vanishing(p):
            return 0.0
        return self.table.get(self.n, p)

    def value(self, pairs: Sequence[tuple[int, int]], r: int) -> float:
        key = (tuple(sorted(pairs)), r)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        b = len(pairs)
        fresh_room = self.n - b
        size = r + 1
        terms = []
        for on_fixed in _compositions_bounded(size, b):
            rest = size - sum(on_fixed)
            fixed_ways = math.prod(factorial(c) for c in on_fixed)
            first = [f + c for (f, _), c in zip(pairs, on_fixed)]
            second = [s + c for (_, s), c in zip(pairs, on_fixed)]
            for lam in partitions(rest):
                if len(lam) > fresh_room:
                    continue
                a1 = self._lookup(first + list(lam))
                if a1 == 0.0:
                    continue
                a2 = self._lookup(second + list(lam))
                if a2 == 0.0:
                    continue
                count = (factorial(size) // (fixed_ways * math.prod(factorial(x) for x in lam))
                         * falling_factorial(fresh_room, len(lam)) // _multiplicity_factorials(lam))
                terms.append(count * a1 * a2)
        out = math.fsum(terms)
        self._memo[key] = out
        return out


def _kernel_value(inner: _InnerSums, labels: tuple[int, ...], r_max: int) -> float:
    big_m = len(labels)
    b = max(labels) + 1 if labels else 0
    terms = []
    for k in range(big_m + 1):
        cf = Counter(labels[:k])
        cs = Counter(labels[k:])
        pairs = [(cf[j], cs[j]) for j in range(b)]
        for r in range(k % 2, r_max + 1, 2):
            u = inner.value(pairs, r)
            if u:
                terms.append(u / (factorial(k) * factorial(big_m - k) * factorial(r) * (big_m - k + r + 1)))
    return math.fsum(terms)


def _shell(inner: _InnerSums, m: int, r_max: int, symmetrize: bool) -> float:
    big_m = 2 * m
    n = inner.n
    kernel: dict[tuple[int, ...], float] = {}
    for labels in restricted_growth_strings(big_m):
        kernel[labels] = _kernel_value(inner, labels, r_max)
    if symmetrize:
        perms = list(itertools.permutations(range(big_m)))
        kernel = {
            labels: math.fsum(kernel[_relabel([labels[s] for s in perm])] for perm in perms) / len(perms)
            for labels in kernel
        }
    terms = []
    for labels, h in kernel.items():
        b = max(labels) + 1
        weight = falling_factorial(n, b)
        if weight and h:
            terms.append(weight * h * h)
    return factorial(big_m) * math.fsum(terms)


@dataclass(frozen=True)
class KernelNormReport:
    n: int
    m_max: int
    r_max: int
    per_order: dict[int, float]
    total: float
    symmetrized: bool = False

    @property
    def k_max(self) -> int:
        """Highest coefficient order touched."""
        return 2 * self.m_max + self.r_max + 1

    @property
    def truncation_diagnostic(self) -> float:
        return self.per_order[self.m_max]


def _check_truncation(n: int, m_max: int, r_max: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    if m_max > MAX_SUPPORTED_M:
        raise UnsupportedTruncationError(f"m_max={m_max} exceeds the implemented enumeration (<= {MAX_SUPPORTED_M})")
    if r_max < 0:
        raise ValueError(f"r_max must be >= 0, got {r_max}")


def bracket_kernel_norms(table: CoefficientTable, n: int, m_max: int = 2, r_max: int = 4,
                         symmetrize: bool = False) -> KernelNormReport:
    _check_truncation(n, m_max, r_max)
    inner = _InnerSums(table, n)
    per_order = {m: _shell(inner, m, r_max, symmetrize) for m in range(1, m_max + 1)}
    return KernelNormReport(n, m_max, r_max, per_order, math.fsum(per_order.values()), symmetrize)


def required_table(n_list: Sequence[int], m_max: int = 2, r_max: int = 4, **cache_kwargs) -> CoefficientTable:
    """Coefficient table covering every order the kernel form touches."""
    k_top = (2 * m_max + r_max) // 2
    return table_build(list(n_list), k_top, **cache_kwargs)


def stein_discrepancy(table: CoefficientTable, n: int, m_max: int = 2, r_max: int = 4) -> float:
    return bracket_kernel_norms(table, n, m_max, r_max).total


def h0_check(table: CoefficientTable, n: int, r_max: int) -> float:
    """``sum_{r=0}^{r_max-1} 1/(r+1)! sum_{u in [n]^(r+1)} a_u^2``: the chaos norm up to order ``r_max``."""
    if r_max < 1:
        raise ValueError(f"r_max must be >= 1, got {r_max}")
    inner = _InnerSums(table, n)
    terms = []
    for r in range(0, r_max, 2):
        terms.append(inner.value((), r) / factorial(r + 1))
    return math.fsum(terms)


def toy_term(table: CoefficientTable, n: int) -> float:
    """``(1/3) sum_j (sum_u a_u a_{u,j,j})^2`` with off-diagonal order-3 coefficients dropped.

    Inner sum at fixed ``j``: ``u = j`` gives ``a_1 a_3``, the other ``n - 1`` values ``a_1 a_{2,1}``.
    """
    a1 = table.get(n, MultiplicityPattern.of(1))
    a3 = table.get(n, MultiplicityPattern.of(3))
    a21 = table.get(n, MultiplicityPattern.of(2, 1)) if n >= 2 else 0.0
    inner = a1 * a3 + (n - 1) * a1 * a21
    return n * inner * inner / 3.0


def berry_esseen_bound(discrepancy: float, distance: str) -> float:
    if discrepancy < 0:
        raise ValueError(f"discrepancy must be nonnegative, got {discrepancy}")
    try:
        c = STEIN_CONSTANTS[distance]
    except KeyError:
        raise ValueError(f"unknown distance {distance!r}; choose from {sorted(STEIN_CONSTANTS)}") from None
    return c * math.sqrt(discrepancy)


def gaussian_abs_moment(p: float) -> float:
    """``E|Z|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)``."""
    return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def classical_bound(n: int, p: float = 3.0) -> float:
    """Self-normalized Berry-Esseen bound ``25 E|Z|^p n^(1 - p/2)``, for ``2 < p <= 3``."""
    if not 2 < p <= 3:
        raise ValueError(f"p must lie in (2, 3], got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 25.0 * gaussian_abs_moment(p) * n ** (1 - p / 2)


@dataclass(frozen=True)
class BoundReport:
    n: int
    kernel: KernelNormReport
    classical_bound_p3: float
    empirical_kolmogorov: tuple[float, float] | None = None
    empirical_wasserstein: tuple[float, float] | None = None
    bounds: dict[str, float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bounds", {d: berry_esseen_bound(self.discrepancy, d) for d in STEIN_CONSTANTS})

    @property
    def discrepancy(self) -> float:
        return self.kernel.total

    @property
    def bound_kolmogorov(self) -> float:
        return self.bounds["kolmogorov"]

    @property
    def bound_wasserstein(self) -> float:
        return self.bounds["wasserstein"]

    @property
    def bound_total_variation(self) -> float:
        return self.bounds["total_variation"]

    @property
    def bound_fortet_mourier(self) -> float:
        return self.bounds["fortet_mourier"]

    @property
    def domination_armed(self) -> bool:
        """The truncated form is trusted only when its last shell is under 5% of the total."""
        return self.kernel.total > 0 and self.kernel.truncation_diagnostic < 0.05 * self.kernel.total


def bound_report(table: CoefficientTable, n: int, m_max: int = 2, r_max: int = 4,
                 empirical_kolmogorov: tuple[float, float] | None = None,
                 empirical_wasserstein: tuple[float, float] | None = None) -> BoundReport:
    kernel = bracket_kernel_norms(table, n, m_max, r_max)
    return BoundReport(n, kernel, classical_bound(n, 3.0), empirical_kolmogorov, empirical_wasserstein)


CSV_COLUMNS = ("n", "m_max", "r_max", "discrepancy", "shell_m1", "shell_m2", "last_shell_diag",
               "bound_K", "bound_W", "bound_TV", "bound_FM", "classical_p3")


def report_csv(reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in reports:
        k = r.kernel
        shells = [repr(k.per_order[m]) if m in k.per_order else "" for m in (1, 2)]
        row = [str(r.n), str(k.m_max), str(k.r_max), repr(r.discrepancy), *shells,
               repr(k.truncation_diagnostic), repr(r.bound_kolmogorov), repr(r.bound_wasserstein),
               repr(r.bound_total_variation), repr(r.bound_fortet_mourier), repr(r.classical_bound_p3)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
