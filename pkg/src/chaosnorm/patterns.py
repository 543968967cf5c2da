"""Multiplicity patterns of coefficient multi-indices.

A coefficient ``a_{i_1 ... i_L}`` only depends on how often each distinct value
occurs among the indices, because the Gaussian slots are exchangeable. The
sorted list of those occurrence counts is a :class:`MultiplicityPattern`.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import factorial, prod
from typing import Iterable, Iterator, Sequence

_PATTERN_TEXT = re.compile(r"[1-9][0-9]*(,[1-9][0-9]*)*")


@dataclass(frozen=True, order=True)
class MultiplicityPattern:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("a pattern needs at least one part")
        if any(p < 1 for p in parts):
            raise ValueError(f"pattern parts must be >= 1: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"pattern parts must be non-increasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: int) -> "MultiplicityPattern":
        """Build from parts in any order."""
        return cls(tuple(sorted(parts, reverse=True)))

    @classmethod
    def parse(cls, text: str) -> "MultiplicityPattern":
        if not _PATTERN_TEXT.fullmatch(text):
            raise ValueError(f"malformed pattern text {text!r}")
        return cls.of(*(int(t) for t in text.split(",")))

    @property
    def order(self) -> int:
        return sum(self.parts)

    @property
    def part_count(self) -> int:
        return len(self.parts)

    @property
    def odd_parts(self) -> tuple[int, ...]:
        return tuple(p for p in self.parts if p % 2)

    @property
    def k(self) -> int:
        """Chaos index ``k`` with ``order = 2k + 1`` (only meaningful for odd order)."""
        return (self.order - 1) // 2

    def half_multiplicities(self) -> tuple[int, ...]:
        """``(d_1, d_2, ...)`` with the odd part written ``2 d_1 + 1`` first, then ``2 d_j``."""
        if is_vanishing(self):
            raise ValueError(f"pattern {self} is vanishing")
        (odd,) = self.odd_parts
        return ((odd - 1) // 2,) + tuple(p // 2 for p in self.parts if p % 2 == 0)

    def __str__(self) -> str:
        return ",".join(str(p) for p in self.parts)


def canonicalize(index_tuple: Sequence[int], n: int | None = None) -> MultiplicityPattern:
    if len(index_tuple) == 0:
        raise ValueError("cannot canonicalize an empty index tuple")
    if n is not None:
        bad = [i for i in index_tuple if not 1 <= i <= n]
        if bad:
            raise ValueError(f"indices {bad} outside 1..{n}")
    return MultiplicityPattern.of(*Counter(index_tuple).values())


def is_vanishing(p: MultiplicityPattern) -> bool:
    """Even total order, or anything other than exactly one odd multiplicity."""
    return p.order % 2 == 0 or len(p.odd_parts) != 1


def partitions(total: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """Integer partitions of ``total`` as non-increasing tuples, largest first part first."""
    if max_part is None:
        max_part = total
    if total == 0:
        yield ()
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in partitions(total - first, first):
            yield (first,) + rest


def _one_odd_partitions(total: int, max_part: int, max_count: int, odd_left: int) -> Iterator[tuple[int, ...]]:
    # partitions of ``total`` into at most ``max_count`` parts <= max_part, with exactly
    # ``odd_left`` odd parts still to place
    if total == 0:
        if odd_left == 0:
            yield ()
        return
    if max_count == 0:
        return
    for first in range(min(total, max_part), 0, -1):
        odd = first % 2
        if odd > odd_left:
            continue
        for rest in _one_odd_partitions(total - first, first, max_count - 1, odd_left - odd):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _enumerate(k: int, n: int) -> tuple[MultiplicityPattern, ...]:
    order = 2 * k + 1
    return tuple(MultiplicityPattern(parts) for parts in _one_odd_partitions(order, order, n, 1))


def enumerate_patterns(k: int, n: int) -> tuple[MultiplicityPattern, ...]:
    """Non-vanishing patterns of order ``2k + 1`` with at most ``n`` parts.

    Ordered by descending lexicographic order of ``parts``, e.g. ``(5), (4,1), (3,2), (2,2,1)``.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _enumerate(k, n)


def falling_factorial(n: int, r: int) -> int:
    if r > n:
        return 0
    return prod(range(n - r + 1, n + 1))


def multiset_arrangements(counts: Iterable[int]) -> int:
    """Multinomial ``(sum c)! / prod c!``."""
    counts = tuple(counts)
    out = factorial(sum(counts))
    for c in counts:
        out //= factorial(c)
    return out


def tuple_count(p: MultiplicityPattern, n: int) -> int:
    """Number of tuples in ``{1..n}^order`` whose canonical pattern is ``p`` (0 if too many parts)."""
    if p.part_count > n:
        return 0
    equal_sizes = prod(factorial(c) for c in Counter(p.parts).values())
    return multiset_arrangements(p.parts) * falling_factorial(n, p.part_count) // equal_sizes
