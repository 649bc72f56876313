import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lsconf.combinatorics import (MembershipError, MultisetSpec, RankRangeError, count_permutations,
                                  iter_permutations, next_permutation, rank, unrank)


def brute(spec):
    """All distinct arrangements, sorted lexicographically."""
    return sorted(set(itertools.permutations(spec.sorted_sequence())))


PM = MultisetSpec(((1, 1), (0, 1), (-1, 1)))


def test_spec_canonical_order():
    a = MultisetSpec(((1, 2), (-1, 1), (0, 2)))
    b = MultisetSpec(((0, 2), (1, 2), (-1, 1)))
    assert a == b
    assert a.entries == ((-1, 1), (0, 2), (1, 2))
    assert a.n == 5


@pytest.mark.parametrize("entries", [((1, 0),), ((1, 1), (1, 2)), ()])
def test_spec_rejects_bad_entries(entries):
    with pytest.raises(ValueError):
        MultisetSpec(entries)


@pytest.mark.parametrize("entries, n, expected", [
    (((1, 1), (-1, 1), (0, 382)), 384, 147072),
    (((1, 2), (-1, 1), (0, 381)), 384, 28090752),
    (((1, 1), (0, 1)), 2, 2),
])
def test_count_table_values(entries, n, expected):
    spec = MultisetSpec(entries)
    assert spec.n == n
    assert count_permutations(spec) == expected


def test_count_matches_enumeration_small():
    spec = MultisetSpec(((1, 2), (-1, 1), (0, 2)))
    assert len(brute(spec)) == 30
    assert count_permutations(spec) == 30


def test_unrank_examples():
    assert unrank(PM, 0) == (-1, 0, 1)
    assert unrank(PM, 5) == (1, 0, -1)
    assert unrank(MultisetSpec(((1, 1), (0, 1))), 1) == (1, 0)
    assert brute(PM)[0] == (-1, 0, 1) and brute(PM)[5] == (1, 0, -1)


def test_rank_examples():
    assert rank(PM, (-1, 0, 1)) == 0
    assert rank(PM, (1, 0, -1)) == 5
    assert rank(MultisetSpec(((1, 1), (0, 1))), (0, 1)) == 0


def test_next_permutation_examples():
    assert next_permutation(PM, (-1, 0, 1)) == (-1, 1, 0)
    assert next_permutation(PM, (1, 0, -1)) is None
    assert next_permutation(MultisetSpec(((1, 1), (0, 1))), (0, 1)) == (1, 0)


def test_range_and_membership_errors():
    with pytest.raises(RankRangeError, match="6 permutations"):
        unrank(PM, 6)
    with pytest.raises(RankRangeError):
        unrank(PM, -1)
    with pytest.raises(MembershipError):
        rank(PM, (1, 1, 0))
    with pytest.raises(MembershipError):
        next_permutation(PM, (1, 0))


def test_half_integer_values():
    spec = MultisetSpec(((Fraction(-3, 2), 1), (Fraction(-1, 2), 1), (Fraction(1, 2), 1), (Fraction(3, 2), 1)))
    assert unrank(spec, 0) == (Fraction(-3, 2), Fraction(-1, 2), Fraction(1, 2), Fraction(3, 2))
    assert rank(spec, (1.5, 0.5, -0.5, -1.5)) == 23


SPECS = [
    ((0, 1), (1, 1)),
    ((-1, 1), (0, 1), (1, 1)),
    ((-1, 1), (0, 2), (1, 2)),
    ((-1, 2), (0, 2), (1, 2)),
    ((-1, 1), (0, 4), (1, 1)),
    ((-1, 1), (0, 5), (1, 2)),
    ((-1, 2), (0, 4), (1, 2)),
    ((-2, 1), (-1, 1), (0, 3), (1, 1), (2, 1)),
    ((0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1)),
    ((-1, 3), (0, 3), (1, 3)),
    ((1, 7),),
]


@pytest.mark.parametrize("entries", SPECS)
def test_full_enumeration_equals_bruteforce(entries):
    spec = MultisetSpec(entries)
    expected = brute(spec)
    assert count_permutations(spec) == len(expected)
    assert [unrank(spec, i) for i in range(len(expected))] == expected
    assert list(iter_permutations(spec)) == expected
    chain, v = [], unrank(spec, 0)
    while v is not None:
        chain.append(v)
        v = next_permutation(spec, v)
    assert chain == expected


def test_iter_permutations_window():
    spec = MultisetSpec(((-1, 2), (0, 2), (1, 2)))
    assert list(iter_permutations(spec, 17, 40)) == brute(spec)[17:40]
    assert list(iter_permutations(spec, 85, 1000)) == brute(spec)[85:]


@st.composite
def specs(draw):
    k = draw(st.integers(1, 4))
    values = draw(st.lists(st.integers(-3, 3), min_size=k, max_size=k, unique=True))
    mults = draw(st.lists(st.integers(1, 4), min_size=k, max_size=k))
    if sum(mults) > 12:
        mults = [1] * k
    return MultisetSpec(tuple(zip(values, mults)))


@settings(max_examples=60, deadline=None)
@given(specs(), st.randoms(use_true_random=False))
def test_roundtrip_and_monotone(spec, rnd):
    total = count_permutations(spec)
    for _ in range(50):
        i = rnd.randrange(total)
        v = unrank(spec, i)
        assert rank(spec, v) == i
        assert sorted(v) == list(spec.sorted_sequence())
        if i + 1 < total:
            w = unrank(spec, i + 1)
            assert v < w
            assert next_permutation(spec, v) == w
        else:
            assert next_permutation(spec, v) is None


def test_huge_roundtrip():
    spec = MultisetSpec(tuple((k, 1) for k in range(384)))
    rng = random.Random(7)
    total = count_permutations(spec)
    for _ in range(3):
        i = rng.randrange(total)
        assert rank(spec, unrank(spec, i)) == i
    assert unrank(spec, total - 1) == tuple(range(383, -1, -1))
