import itertools
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from chaosnorm.patterns import (MultiplicityPattern, canonicalize, enumerate_patterns, falling_factorial,
                                is_vanishing, multiset_arrangements, partitions, tuple_count)

MP = MultiplicityPattern.of


def test_canonicalize_examples():
    assert canonicalize((1, 1, 2)) == MP(2, 1)
    assert canonicalize((3, 3, 3)) == MP(3)
    assert canonicalize((1, 2, 3)) == MP(1, 1, 1)


def test_canonicalize_rejects():
    with pytest.raises(ValueError):
        canonicalize(())
    with pytest.raises(ValueError):
        canonicalize((0, 1), n=3)
    with pytest.raises(ValueError):
        canonicalize((1, 5), n=4)


@given(st.lists(st.integers(1, 6), min_size=1, max_size=8), st.randoms())
def test_canonicalize_permutation_and_relabel_invariant(idx, rnd):
    shuffled = list(idx)
    rnd.shuffle(shuffled)
    relabel = {v: v + 10 for v in set(idx)}
    assert canonicalize(idx) == canonicalize(shuffled) == canonicalize([relabel[v] for v in idx])


@given(st.lists(st.integers(1, 6), min_size=1, max_size=8))
def test_canonical_pattern_structure(idx):
    p = canonicalize(idx)
    assert p.order == len(idx)
    assert p.part_count == len(set(idx))
    assert list(p.parts) == sorted(p.parts, reverse=True)


def test_pattern_validation_and_text():
    with pytest.raises(ValueError):
        MultiplicityPattern((1, 2))
    with pytest.raises(ValueError):
        MultiplicityPattern(())
    with pytest.raises(ValueError):
        MultiplicityPattern((2, 0))
    assert str(MP(2, 3)) == "3,2"
    assert MultiplicityPattern.parse("2,3") == MP(3, 2)
    for bad in ("", "3,,2", "0,1", "a", "3, 2"):
        with pytest.raises(ValueError):
            MultiplicityPattern.parse(bad)


def test_vanishing_rules():
    assert is_vanishing(MP(2))
    assert is_vanishing(MP(1, 1, 1))
    assert is_vanishing(MP(3, 1, 1))
    assert not is_vanishing(MP(2, 1))
    assert not is_vanishing(MP(3, 2, 2))


def test_half_multiplicities():
    assert MP(3, 2).half_multiplicities() == (1, 1)
    assert MP(4, 1).half_multiplicities() == (0, 2)
    assert MP(2, 2, 1).half_multiplicities() == (0, 1, 1)
    with pytest.raises(ValueError):
        MP(1, 1).half_multiplicities()


def test_enumerate_examples():
    assert enumerate_patterns(0, 5) == (MP(1),)
    assert enumerate_patterns(1, 5) == (MP(3), MP(2, 1))
    assert enumerate_patterns(2, 5) == (MP(5), MP(4, 1), MP(3, 2), MP(2, 2, 1))
    assert enumerate_patterns(2, 2) == (MP(5), MP(4, 1), MP(3, 2))
    with pytest.raises(ValueError):
        enumerate_patterns(-1, 3)
    with pytest.raises(ValueError):
        enumerate_patterns(1, 0)


@pytest.mark.parametrize("k", range(0, 7))
@pytest.mark.parametrize("n", [1, 2, 3, 5, 20])
def test_enumerate_equals_filtered_partitions(k, n):
    order = 2 * k + 1
    expected = [MultiplicityPattern(p) for p in partitions(order) if len(p) <= n]
    expected = [p for p in expected if not is_vanishing(p)]
    assert list(enumerate_patterns(k, n)) == expected


@pytest.mark.parametrize("L", range(1, 6))
@pytest.mark.parametrize("n", range(1, 7))
def test_tuple_counts_against_brute_force(L, n):
    seen = Counter(canonicalize(t) for t in itertools.product(range(1, n + 1), repeat=L))
    for parts in partitions(L):
        p = MultiplicityPattern(parts)
        assert tuple_count(p, n) == seen.get(p, 0)
    assert sum(tuple_count(MultiplicityPattern(q), n) for q in partitions(L)) == n**L


def test_small_helpers():
    assert falling_factorial(5, 2) == 20
    assert falling_factorial(3, 4) == 0
    assert falling_factorial(4, 0) == 1
    assert multiset_arrangements([2, 1]) == 3
