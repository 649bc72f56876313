"""Permutation-generated vector systems: A_n, V^21, V^22, permutohedron and friends.

A system is the set of unique permutations of one base vector. Labels name the
non-zero part of the base vector: ``"21"`` is two ``+1`` and one ``-1``, with
zeros filling the rest of the ``n`` coordinates. ``"P"`` is the centered
permutohedron, permutations of ``(n-1, ..., 1, 0) - (n-1)/2``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels
from .combinatorics import MultisetSpec, count_permutations, iter_permutations, unrank

DEFAULT_BRUTEFORCE_CAP = 20_000
MCS_UPPER = 0.9
MCS_LOWER = 0.5

ZERO_RULE = ("there must be at least as many zeros as the multiplicity of any "
             "unique non-zero element (the largest number in D)")


class ConstructionError(ValueError):
    pass


class SystemTooLargeError(ValueError):
    pass


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class DLabel:
    """Non-zero part of a base vector.

    ``positive_part[i]`` is the multiplicity of ``+(i+1)``; ``negative_part[i]``
    the multiplicity of ``-(i+1)``. ``permutohedron`` overrides both.
    """

    positive_part: tuple[int, ...] = ()
    negative_part: tuple[int, ...] = ()
    display_name: str = ""
    permutohedron: bool = False

    def __post_init__(self):
        for m in self.positive_part + self.negative_part:
            if m < 0:
                raise ValueError("multiplicities must be non-negative")
        if not self.permutohedron and not any(self.positive_part + self.negative_part):
            raise ValueError("label needs at least one non-zero entry")
        if not self.display_name:
            object.__setattr__(self, "display_name", self._default_name())

    def _default_name(self) -> str:
        if self.permutohedron:
            return "P"
        if len(self.positive_part) <= 1 and len(self.negative_part) <= 1:
            p = self.positive_part[0] if self.positive_part else 0
            q = self.negative_part[0] if self.negative_part else 0
            if p < 10 and q < 10:
                return f"{p}{q}"
        return ",".join(self._explicit_terms())

    def _explicit_terms(self):
        for i, m in enumerate(self.positive_part):
            if m:
                yield f"+{i + 1}:{m}"
        for i, m in enumerate(self.negative_part):
            if m:
                yield f"-{i + 1}:{m}"

    @property
    def nonzero_total(self) -> int:
        return sum(self.positive_part) + sum(self.negative_part)

    @property
    def max_multiplicity(self) -> int:
        return max(self.positive_part + self.negative_part, default=1)

    def multiset(self, n: int) -> MultisetSpec:
        """The multiset of base-vector coordinates in ``n`` dimensions."""
        if self.permutohedron:
            shift = Fraction(n - 1, 2)
            return MultisetSpec(tuple((k - shift, 1) for k in range(n)))
        zeros = n - self.nonzero_total
        if zeros < 0:
            raise ConstructionError(f"label {self.display_name} needs at least "
                                    f"{self.nonzero_total} coordinates, got n={n}")
        counts = {}
        for i, m in enumerate(self.positive_part):
            if m:
                counts[i + 1] = m
        for i, m in enumerate(self.negative_part):
            if m:
                counts[-(i + 1)] = m
        if zeros:
            counts[0] = zeros
        return MultisetSpec.from_counts(counts)


A_LABEL = DLabel((1,), (1,), "11")
V21_LABEL = DLabel((2,), (1,), "21")
V22_LABEL = DLabel((2,), (2,), "22")
P_LABEL = DLabel(permutohedron=True)

_TERM = re.compile(r"^([+-])(\d+):(\d+)$")


def parse_label(text: str) -> DLabel:
    """Parse ``"11"``, ``"21"``, ``"P"`` or the explicit form ``"+1:2,-1:1,+2:1"``."""
    s = str(text).strip()
    if s.upper() == "P":
        return P_LABEL
    if re.fullmatch(r"\d\d", s):
        p, q = int(s[0]), int(s[1])
        return DLabel((p,) if p else (), (q,) if q else (), s)
    pos: dict[int, int] = {}
    neg: dict[int, int] = {}
    for term in s.split(","):
        m = _TERM.match(term.strip())
        if not m:
            raise ValueError(f"cannot parse label {text!r}; use e.g. '21', 'P' or '+1:2,-1:1'")
        sign, val, mult = m.group(1), int(m.group(2)), int(m.group(3))
        if val == 0:
            raise ValueError("zeros are implied; do not list them in a label")
        (pos if sign == "+" else neg)[val] = mult
    def pack(d):
        return tuple(d.get(i, 0) for i in range(1, max(d, default=0) + 1))
    return DLabel(pack(pos), pack(neg))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = ""

    def __bool__(self):
        return self.ok


def validate_label(label: DLabel, n: int) -> ValidationReport:
    """Check the zero-count construction rule for ``label`` in ``n`` dimensions."""
    if n < 1:
        return ValidationReport(False, f"dimension must be positive, got n={n}")
    if label.permutohedron:
        if n < 2:
            return ValidationReport(False, "permutohedron needs n >= 2")
        return ValidationReport(True)
    zeros = n - label.nonzero_total
    if zeros < 0:
        return ValidationReport(False, f"label {label.display_name} has {label.nonzero_total} "
                                       f"non-zero entries, more than n={n}")
    if zeros < label.max_multiplicity:
        return ValidationReport(False, f"label {label.display_name} at n={n}: zeros={zeros} < "
                                       f"multiplicity {label.max_multiplicity}; rule: {ZERO_RULE}")
    return ValidationReport(True)


def _smallest_valid_n(label: DLabel) -> int:
    if label.permutohedron:
        return 2
    return label.nonzero_total + label.max_multiplicity


def n_min(label: DLabel, n_classes: int) -> int:
    """Smallest valid dimension whose system holds at least ``n_classes`` vectors."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    n = _smallest_valid_n(label)
    while count_permutations(label.multiset(n)) < n_classes:
        n += 1
    return n


def mcs_analytic(label: DLabel, n: int) -> float | None:
    """Closed-form closest-pair |cos| for known labels, None when unavailable."""
    if not validate_label(label, n):
        return None
    if label.permutohedron:
        if n < 3:
            return None  # only an antipodal pair
        return 1.0 - 12.0 / (n * (n * n - 1))
    known = {"11": 0.5, "21": 2.0 / 3.0, "22": 0.75}
    return known.get(label.display_name)


def mcs_approx(label: DLabel, n: int) -> float | None:
    """The ``1 - 1/n`` estimate quoted for the permutohedron; None for other labels."""
    return 1.0 - 1.0 / n if label.permutohedron else None


def separation_verdict(mcs: float | None) -> str:
    """Whether ``mcs`` lies in the trainable range ``[0.5, 0.9)``."""
    if mcs is None or math.isnan(mcs):
        return "undefined"
    return "inside" if MCS_LOWER <= mcs < MCS_UPPER else "outside"


def p_crossing_dimension(threshold: float = MCS_UPPER) -> int:
    """First n at which the permutohedron's closest-pair |cos| reaches ``threshold``."""
    n = 3
    while mcs_analytic(P_LABEL, n) < threshold:
        n += 1
    return n


def _norm_sq(spec: MultisetSpec) -> Fraction:
    return sum((Fraction(v) ** 2 * m for v, m in spec.entries), Fraction(0))


@dataclass(frozen=True)
class VectorSystem:
    label: DLabel
    n: int
    spec: MultisetSpec = field(repr=False)
    n_vects: int
    base_vector: tuple
    vector_norm: float
    mcs: float | None
    centered: bool
    projected_dim: int | None = None

    @property
    def system_id(self) -> str:
        return f"V{self.n}^{self.label.display_name}"

    @property
    def zero_sum(self) -> bool:
        return sum(self.base_vector) == 0

    def vectors(self, start: int = 0, stop: int | None = None, normalize: bool = True,
                project: bool = False) -> np.ndarray:
        """Members ``start..stop-1`` as a float array, one row per member."""
        rows = np.array([[float(c) for c in v] for v in iter_permutations(self.spec, start, stop)],
                        dtype=np.float64).reshape(-1, self.n)
        return _finish(self, rows, normalize, project)

    def vectors_at(self, indices, normalize: bool = True, project: bool = False) -> np.ndarray:
        rows = np.array([[float(c) for c in unrank(self.spec, int(i))] for i in indices],
                        dtype=np.float64).reshape(-1, self.n)
        return _finish(self, rows, normalize, project)


def _finish(system: VectorSystem, rows: np.ndarray, normalize: bool, project: bool) -> np.ndarray:
    if project:
        rows = project_hyperplane(rows)
    if normalize:
        rows = rows / system.vector_norm
    return rows


def build_system(label: DLabel | str, n: int, allow_invalid: bool = False) -> VectorSystem:
    """Construct the descriptor of ``V_n^label``.

    Raises ConstructionError when the zero-count rule fails, unless
    ``allow_invalid`` is set (A_1 at n=2 is still a legitimate root system).
    """
    if isinstance(label, str):
        label = parse_label(label)
    report = validate_label(label, n)
    if not report and not (allow_invalid and label.nonzero_total <= n and n >= 1):
        raise ConstructionError(report.message)
    spec = label.multiset(n)
    base = spec.sorted_sequence()
    return VectorSystem(
        label=label,
        n=n,
        spec=spec,
        n_vects=count_permutations(spec),
        base_vector=base,
        vector_norm=math.sqrt(_norm_sq(spec)),
        mcs=mcs_analytic(label, n),
        centered=label.permutohedron,
        projected_dim=n - 1 if sum(base) == 0 else None,
    )


@dataclass(frozen=True)
class TargetVector:
    system_id: str
    index: int
    coords: np.ndarray = field(repr=False)
    normalized: bool = True


def vector_at(system: VectorSystem, index: int, normalize: bool = True,
              project: bool = False) -> TargetVector:
    """Member ``index`` (lexicographic order of exact coordinates) as floats."""
    coords = np.array([float(c) for c in unrank(system.spec, index)], dtype=np.float64)
    coords = _finish(system, coords[None, :], normalize, project)[0]
    return TargetVector(system.system_id, index, coords, normalize)


@lru_cache(maxsize=64)
def helmert_basis(m: int) -> np.ndarray:
    """Orthonormal basis (``m`` rows, ``m+1`` columns) of the zero-sum hyperplane.

    Row ``k`` (1-based) is ``(1, ..., 1, -k, 0, ..., 0) / sqrt(k (k + 1))``.
    """
    b = np.zeros((m, m + 1))
    for k in range(1, m + 1):
        b[k - 1, :k] = 1.0
        b[k - 1, k] = -k
        b[k - 1] /= math.sqrt(k * (k + 1))
    b.setflags(write=False)
    return b


def project_hyperplane(vectors, tol: float = 1e-9) -> np.ndarray:
    """Map zero-sum vectors in ``m+1`` coordinates isometrically to ``m`` coordinates."""
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] < 2:
        raise ProjectionError("need at least two coordinates to project")
    sums = x.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > tol)
    if bad.size:
        i = int(bad[0])
        raise ProjectionError(f"vector {i} has coordinate sum {sums[i]!r}, expected 0")
    y = x @ helmert_basis(x.shape[1] - 1).T
    return y[0] if single else y


def _check_cap(system: VectorSystem, cap: int):
    if system.n_vects > cap:
        raise SystemTooLargeError(f"{system.system_id} has {system.n_vects} members > cap {cap}; "
                                  f"use mcs_analytic instead")


def mcs_bruteforce(system: VectorSystem, cap: int = DEFAULT_BRUTEFORCE_CAP) -> float | None:
    """Max |cos| over distinct non-antipodal pairs, by exhaustive scan.

    Returns None ("undefined") when every pair is antipodal or there is only
    one member.
    """
    _check_cap(system, cap)
    hi, _ = _kernels.pair_stats(system.vectors())
    return None if math.isnan(hi) else hi


def mcs_literal(system: VectorSystem, cap: int = DEFAULT_BRUTEFORCE_CAP) -> float | None:
    """``min |cos|`` over all distinct pairs, i.e. the minimum taken literally.

    This is 0 for any system with an orthogonal pair; reported for comparison.
    """
    _check_cap(system, cap)
    if system.n_vects < 2:
        return None
    _, lo = _kernels.pair_stats(system.vectors())
    # only antipodal pairs remain
    return 1.0 if math.isnan(lo) else lo


SUPPORTED_LABELS = {"11": A_LABEL, "21": V21_LABEL, "22": V22_LABEL, "P": P_LABEL}


def closed_form_count(label: DLabel, n: int) -> int | None:
    """Table counts written as polynomials in n (or n!) for the named systems."""
    name = label.display_name
    if label.permutohedron:
        return math.factorial(n)
    a = n * (n - 1)
    if name == "11":
        return a
    b = a * (n - 2) // 2
    if name == "21":
        return b
    if name == "22":
        return b * (n - 3) // 2
    return None
