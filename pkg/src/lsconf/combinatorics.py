"""Counting, ordering and rank/unrank of unique permutations of a multiset.

All orderings are ascending lexicographic with numeric comparison per
coordinate. Counts and indices are plain Python ints, so systems with
~10^827 members are handled exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from numbers import Rational
from typing import Iterable, Iterator, Sequence


class MembershipError(ValueError):
    """Raised when a sequence is not a permutation of the multiset."""


class RankRangeError(IndexError):
    pass


def _exact(value) -> int | Fraction:
    if isinstance(value, bool):
        raise TypeError("bool is not a coordinate value")
    if isinstance(value, int):
        return value
    if isinstance(value, Rational):
        f = Fraction(value)
        return f.numerator if f.denominator == 1 else f
    if isinstance(value, float):
        f = Fraction(value)
        return f.numerator if f.denominator == 1 else f
    raise TypeError(f"coordinate values must be exact scalars, got {type(value).__name__}")


@dataclass(frozen=True)
class MultisetSpec:
    """A multiset given as ``(value, multiplicity)`` pairs in ascending value order."""

    entries: tuple[tuple[int | Fraction, int], ...]

    def __post_init__(self):
        merged: dict = {}
        for value, mult in self.entries:
            if not isinstance(mult, int) or isinstance(mult, bool) or mult < 1:
                raise ValueError(f"multiplicity must be a positive integer, got {mult!r}")
            v = _exact(value)
            if v in merged:
                raise ValueError(f"duplicate value {v} in multiset entries")
            merged[v] = mult
        if not merged:
            raise ValueError("multiset must not be empty")
        object.__setattr__(self, "entries", tuple(sorted(merged.items())))

    @classmethod
    def from_counts(cls, counts: dict) -> "MultisetSpec":
        return cls(tuple((v, m) for v, m in counts.items() if m > 0))

    @classmethod
    def from_sequence(cls, seq: Iterable) -> "MultisetSpec":
        counts: dict = {}
        for x in seq:
            v = _exact(x)
            counts[v] = counts.get(v, 0) + 1
        return cls.from_counts(counts)

    @property
    def n(self) -> int:
        return sum(m for _, m in self.entries)

    @property
    def values(self) -> tuple:
        return tuple(v for v, _ in self.entries)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.entries)

    def sorted_sequence(self) -> tuple:
        """The minimum member: all values in ascending order."""
        out = []
        for v, m in self.entries:
            out.extend([v] * m)
        return tuple(out)

    def __len__(self) -> int:
        return self.n


def count_permutations(spec: MultisetSpec) -> int:
    """Number of distinct arrangements, ``n! / prod(m_i!)``, computed exactly."""
    total = factorial(spec.n)
    for m in spec.multiplicities:
        total //= factorial(m)
    return total


def _check_member(spec: MultisetSpec, vector: Sequence) -> tuple:
    try:
        vec = tuple(_exact(x) for x in vector)
    except TypeError as exc:
        raise MembershipError(str(exc)) from None
    if len(vec) != spec.n or tuple(sorted(vec)) != spec.sorted_sequence():
        raise MembershipError(f"{vec!r} is not a permutation of multiset {spec.entries!r}")
    return vec


def unrank(spec: MultisetSpec, index: int) -> tuple:
    """Return the permutation at position ``index`` of the lexicographic order."""
    total = count_permutations(spec)
    if not 0 <= index < total:
        raise RankRangeError(f"index {index} out of range for {total} permutations")
    values = list(spec.values)
    counts = list(spec.multiplicities)
    remaining = spec.n
    out = []
    # `total` tracks the number of arrangements of the remaining multiset
    while remaining:
        for k, v in enumerate(values):
            c = counts[k]
            if not c:
                continue
            block = total * c // remaining
            if index < block:
                out.append(v)
                counts[k] -= 1
                total = block
                break
            index -= block
        remaining -= 1
    return tuple(out)


def rank(spec: MultisetSpec, vector: Sequence) -> int:
    """Inverse of :func:`unrank`."""
    vec = _check_member(spec, vector)
    values = list(spec.values)
    pos = {v: k for k, v in enumerate(values)}
    counts = list(spec.multiplicities)
    total = count_permutations(spec)
    remaining = spec.n
    r = 0
    for x in vec:
        kx = pos[x]
        for k in range(kx):
            if counts[k]:
                r += total * counts[k] // remaining
        total = total * counts[kx] // remaining
        counts[kx] -= 1
        remaining -= 1
    return r


def next_permutation(spec: MultisetSpec, vector: Sequence) -> tuple | None:
    """Lexicographic successor of ``vector``, or None if it is the maximum."""
    a = list(_check_member(spec, vector))
    i = len(a) - 2
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return None
    j = len(a) - 1
    while a[j] <= a[i]:
        j -= 1
    a[i], a[j] = a[j], a[i]
    a[i + 1:] = reversed(a[i + 1:])
    return tuple(a)


def iter_permutations(spec: MultisetSpec, start: int = 0, stop: int | None = None) -> Iterator[tuple]:
    """Yield members with indices in ``[start, stop)`` in lexicographic order."""
    total = count_permutations(spec)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return
    a = list(unrank(spec, start))
    n = len(a)
    for _ in range(stop - start):
        yield tuple(a)
        # inline successor; membership already holds
        i = n - 2
        while i >= 0 and a[i] >= a[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        a[i + 1:] = reversed(a[i + 1:])
