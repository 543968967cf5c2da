"""Chaos-expansion coefficients of the self-normalized Gaussian sum.

``F_n = S_n / V_n = sum_k 1/(2k+1)! sum_i a_{i_1..i_{2k+1}} I_{2k+1}(phi_i1 x ... x phi_i_{2k+1})``

Two exact evaluation routes are provided and must agree:

* :func:`coefficient` -- the finite alternating Gamma-ratio sum. With the odd
  multiplicity written ``2 d_1 + 1``, the even ones ``2 d_j`` and ``k = sum d_j``::

      a = (2d_1+1)! prod (2d_j)! / prod d_j!  2^(-k-1/2)
          sum_l (-1)^|l| prod C(d_j, l_j) Gamma(k+1-|l|+(n-1)/2) / Gamma(k+1-|l|+n/2)

* :func:`coefficient_via_moments` -- expand the Hermite product into monomials
  and take each expectation with :func:`~chaosnorm.moments.gaussian_moment_over_vn`.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, factorial
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .hermite import hermite_coefficients
from .moments import chi_mean, gamma_ratio, odd_monomial_moment_is_zero
from .patterns import MultiplicityPattern, enumerate_patterns, is_vanishing, tuple_count

log = logging.getLogger(__name__)

CACHE_ENV = "CHAOSNORM_CACHE_DIR"
DEFAULT_CACHE_DIR = ".chaosnorm-cache"
CACHE_FORMAT = "chaosnorm-cache v1"
CACHE_POLICIES = ("readwrite", "readonly", "refresh", "off")


class CacheError(OSError):
    pass


class MissingCoefficientError(KeyError):
    def __init__(self, n: int, pattern: MultiplicityPattern):
        super().__init__(f"coefficient table has no entry for n={n}, pattern={pattern}")
        self.n = n
        self.pattern = pattern

    def __str__(self) -> str:
        return self.args[0]


def _check_dimension(p: MultiplicityPattern, n: int) -> None:
    if n < 2:
        raise ValueError(f"coefficients need n >= 2, got n={n}")
    if p.part_count > n:
        raise ValueError(f"pattern {p} has {p.part_count} parts but n={n}")


def _ratio_terms(k: int, n: int) -> tuple[list[int], int]:
    """Integer numerators ``N_s`` and common denominator ``D`` with ``N_s / D = R(k+1-s) / R(1)``.

    ``R(j) = Gamma(j + (n-1)/2) / Gamma(j + n/2)`` and ``R(j+1) / R(j) = (2j+n-1) / (2j+n)``,
    so every ratio is an exact rational multiple of ``R(1)``.
    """
    rising = [1]  # prod_{i<j} (2i + n - 1), j = 1..k+1
    for i in range(1, k + 1):
        rising.append(rising[-1] * (2 * i + n - 1))
    # tail[j] = prod_{i=j}^{k} (2i + n) brings R(j+1)/R(1) onto the denominator prod_{i=1}^{k} (2i+n)
    tail = [1] * (k + 2)
    for i in range(k, 0, -1):
        tail[i] = tail[i + 1] * (2 * i + n)
    nums = [rising[k - s] * tail[k + 1 - s] for s in range(k + 1)]
    return nums, tail[1]


@lru_cache(maxsize=4096)
def _alternating_sum(k: int, n: int) -> Fraction:
    """``sum_s (-1)^s C(k, s) R(k+1-s) / R(1)`` as an exact rational.

    The multi-index sum over ``l`` collapses by Vandermonde: the l-vectors with
    ``|l| = s`` carry total weight ``sum prod C(d_j, l_j) = C(k, s)``.
    """
    nums, den = _ratio_terms(k, n)
    return Fraction(sum((-1) ** s * comb(k, s) * nums[s] for s in range(k + 1)), den)


def cancellation_digits(k: int, n: int) -> float:
    """Decimal digits a floating-point evaluation of the alternating sum would lose."""
    nums, _ = _ratio_terms(k, n)
    magnitude = sum(comb(k, s) * nums[s] for s in range(k + 1))
    signed = abs(sum((-1) ** s * comb(k, s) * nums[s] for s in range(k + 1)))
    return math.log10(magnitude) - math.log10(signed)


def _prefactor(p: MultiplicityPattern) -> int:
    d = p.half_multiplicities()
    num = factorial(p.odd_parts[0])
    for part in p.parts:
        if part % 2 == 0:
            num *= factorial(part)
    den = 1
    for dj in d:
        den *= factorial(dj)
    return num // den


def coefficient(p: MultiplicityPattern, n: int) -> float:
    if is_vanishing(p):
        return 0.0
    _check_dimension(p, n)
    k = p.k
    exact = Fraction(_prefactor(p)) * _alternating_sum(k, n) / 2**k
    base = gamma_ratio((n + 1) / 2, n / 2 + 1)
    return float(exact) * base / math.sqrt(2.0)


def _slot_polynomial(degree: int, times_w: bool) -> list[tuple[int, int]]:
    shift = 1 if times_w else 0
    return [(power + shift, c) for power, c in hermite_coefficients(degree).terms()]


def coefficient_via_moments(p: MultiplicityPattern, n: int) -> float:
    """``E[(W_n / V_n) prod_r H_{d_r}(W_r)]`` expanded into Gaussian monomials over ``V_n``.

    ``W_n = sum_u W_u``; slots outside the pattern only contribute odd monomials,
    so the sum runs over the occupied slots.
    """
    _check_dimension(p, n)
    terms: list[float] = []
    for u in range(p.part_count):
        slot_polys = [_slot_polynomial(d, times_w=(r == u)) for r, d in enumerate(p.parts)]
        for combo in product(*slot_polys):
            weight = 1
            for _, c in combo:
                weight *= c
            powers = [power for power, _ in combo]
            moment = odd_monomial_moment_is_zero(powers, n)
            if moment:
                terms.append(weight * moment)
    return math.fsum(terms)


def k0_coefficient(n: int) -> float:
    """``a_i = sqrt(2)/n Gamma((n+1)/2) / Gamma(n/2)``, the first-chaos coefficient."""
    if n <= 0:
        raise ValueError(f"k0_coefficient needs n >= 1, got {n}")
    return chi_mean(n) / n


def chaos_norm_shell(n: int, k: int) -> float:
    """``1/(2k+1)! sum_{i in [n]^(2k+1)} a_i^2``, the squared norm of the ``(2k+1)``-th chaos.

    Evaluated exactly before the final rounding: individual coefficients outgrow
    binary64 long before the shells become negligible at small ``n``.
    """
    weight = sum(tuple_count(p, n) * _prefactor(p) ** 2 for p in enumerate_patterns(k, n))
    exact = _alternating_sum(k, n) ** 2 * weight / (4**k * factorial(2 * k + 1))
    base = gamma_ratio((n + 1) / 2, n / 2 + 1)
    return float(exact) * base * base / 2.0


def _table_shell(table: "CoefficientTable", n: int, k: int) -> float:
    order = 2 * k + 1
    return math.fsum(
        float(Fraction(tuple_count(p, n), factorial(order))) * table.get(n, p) ** 2
        for p in enumerate_patterns(k, n)
    )


def chaos_norm_partial(n: int, K: int, table: "CoefficientTable | None" = None) -> list[float]:
    """Partial sums ``sum_{k<=K} 1/(2k+1)! sum_i a_i^2`` for ``K = 0..K``; they increase to 1.

    With ``table`` the stored binary64 coefficients are squared and summed instead.
    """
    if n < 2:
        raise ValueError(f"chaos norm needs n >= 2, got {n}")
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    out, shells = [], []
    for k in range(K + 1):
        shells.append(_table_shell(table, n, k) if table is not None else chaos_norm_shell(n, k))
        out.append(math.fsum(shells))
    return out


def chaos_norm_until(n: int, target: float, max_seconds: float = 60.0, max_K: int = 2000) -> tuple[int, list[float]]:
    """Extend the partial sums until one reaches ``target`` or the time budget runs out.

    Returns ``(K, partial_sums)``; ``K`` is the last index computed.
    """
    start = time.perf_counter()
    shells: list[float] = []
    out: list[float] = []
    for k in range(max_K + 1):
        shells.append(chaos_norm_shell(n, k))
        out.append(math.fsum(shells))
        if out[-1] >= target or time.perf_counter() - start > max_seconds:
            break
    return len(out) - 1, out


@dataclass
class CoefficientTable:
    """Map ``(n, pattern) -> a``; vanishing patterns are implicit zeros."""

    entries: dict[tuple[int, MultiplicityPattern], float] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)

    def get(self, n: int, p: MultiplicityPattern) -> float:
        if is_vanishing(p):
            return 0.0
        try:
            return self.entries[(n, p)]
        except KeyError:
            raise MissingCoefficientError(n, p) from None

    def __contains__(self, key) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def dimensions(self) -> list[int]:
        return sorted({n for n, _ in self.entries})

    def rows(self, n: int) -> list[tuple[MultiplicityPattern, float]]:
        """Entries for one dimension in enumeration order (by order, then descending parts)."""
        rows = [(p, v) for (m, p), v in self.entries.items() if m == n]
        rows.sort(key=lambda row: (row[0].order, tuple(-x for x in row[0].parts)))
        return rows

    def max_order(self, n: int) -> int:
        return max((p.order for (m, p) in self.entries if m == n), default=0)


def cache_dir_from_env() -> Path:
    return Path(os.environ.get(CACHE_ENV, DEFAULT_CACHE_DIR))


def cache_path(cache_dir: Path, n: int) -> Path:
    return Path(cache_dir) / f"n{n}.txt"


def read_cache(path: Path, n: int) -> dict[MultiplicityPattern, float]:
    """Parse one cache file. Malformed lines are dropped (and recomputed by the caller)."""
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return {}
    except OSError as exc:
        raise CacheError(f"cannot read coefficient cache {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != f"{CACHE_FORMAT} n={n}":
        log.warning("ignoring coefficient cache %s: bad header", path)
        return {}
    out: dict[MultiplicityPattern, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            ptext, vtext = line.split(";")
            p = MultiplicityPattern.parse(ptext)
            value = float(vtext)
            if not math.isfinite(value) or is_vanishing(p) or p.part_count > n:
                raise ValueError("invalid entry")
        except ValueError:
            log.warning("corrupt line %d in %s will be recomputed: %r", lineno, path, line)
            continue
        out[p] = value
    return out


def write_cache(path: Path, n: int, values: Mapping[MultiplicityPattern, float]) -> None:
    """Atomically write a cache file (temp file in the same directory, then rename)."""
    lines = [f"{CACHE_FORMAT} n={n}"]
    lines += sorted(f"{p};{v!r}" for p, v in values.items())
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise CacheError(f"cannot write coefficient cache {path}: {exc}") from exc


def table_build(
    n_list: Iterable[int],
    K: int,
    cache_policy: str = "readwrite",
    cache_dir: Path | str | None = None,
) -> CoefficientTable:
    """Coefficients of every non-vanishing pattern of order ``<= 2K + 1`` for each ``n``.

    ``cache_policy``: ``readwrite`` reuses and extends the on-disk cache, ``readonly``
    never writes, ``refresh`` recomputes and overwrites, ``off`` ignores the disk.
    """
    if cache_policy not in CACHE_POLICIES:
        raise ValueError(f"unknown cache policy {cache_policy!r}; expected one of {CACHE_POLICIES}")
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    n_list = sorted(set(n_list))
    if not n_list or n_list[0] < 2:
        raise ValueError(f"dimensions must be >= 2, got {n_list}")
    cache_dir = Path(cache_dir) if cache_dir is not None else cache_dir_from_env()

    table = CoefficientTable(metadata={"format": CACHE_FORMAT, "K": K, "n_list": n_list,
                                       "cache_policy": cache_policy, "cache_dir": str(cache_dir)})
    hits = misses = 0
    for n in n_list:
        path = cache_path(cache_dir, n)
        stored = read_cache(path, n) if cache_policy in ("readwrite", "readonly") else {}
        wanted = [p for k in range(K + 1) for p in enumerate_patterns(k, n)]
        fresh = {}
        for p in wanted:
            if p in stored:
                hits += 1
                table.entries[(n, p)] = stored[p]
            else:
                misses += 1
                fresh[p] = table.entries[(n, p)] = coefficient(p, n)
        if fresh and cache_policy in ("readwrite", "refresh"):
            write_cache(path, n, {**stored, **fresh})
    table.metadata.update(cache_hits=hits, cache_misses=misses)
    return table
