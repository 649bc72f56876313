"""Class -> target-vector tables, their CSV persistence and nearest-target lookup.

File grammar (format version 1)::

    # lsconf-assignment 1
    # label=<display name or explicit label>
    # n=<int>
    # n_classes=<int>
    # normalized=<0|1>
    # projected=<0|1>
    # strategy=<sequential|shuffled>
    # seed=<int>
    # generator=pcg64-raw/fisher-yates
    # checksum=fnv1a64:<16 hex digits>
    class_id,member_index,c_0,...,c_<d-1>
    0,<int>,<%.16e>,...
    ...

The checksum is 64-bit FNV-1a over the UTF-8 row lines (everything after the
column header), each terminated by ``\\n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .vector_systems import VectorSystem, build_system, parse_label

FORMAT_VERSION = 1
GENERATOR_NAME = "pcg64-raw/fisher-yates"
FULL_SHUFFLE_LIMIT = 10**7

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class CapacityError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


class TableParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class IntegrityError(ValueError):
    pass


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class _RawStream:
    """Unbiased bounded integers from numpy's PCG64 raw 64-bit outputs."""

    def __init__(self, seed: int):
        self._bg = np.random.PCG64(seed)

    def below(self, bound: int) -> int:
        if bound <= 1:
            return 0
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = int(self._bg.random_raw())
            if r < limit:
                return r % bound


def shuffled_indices(n_vects: int, n_classes: int, seed: int) -> list[int]:
    """Member indices for ``n_classes`` classes under the seeded shuffle.

    Systems with at most ``FULL_SHUFFLE_LIMIT`` members are shuffled over
    their full index range (the first ``n_classes`` entries of a forward
    Fisher-Yates pass); larger systems shuffle only ``0..n_classes-1``.
    Memory is O(n_classes) either way.
    """
    population = n_vects if n_vects <= FULL_SHUFFLE_LIMIT else n_classes
    rng = _RawStream(seed)
    swapped: dict[int, int] = {}
    out = []
    for i in range(n_classes):
        j = i + rng.below(population - i)
        vi = swapped.get(i, i)
        vj = swapped.get(j, j)
        swapped[j] = vi
        out.append(vj)
    return out


@dataclass(frozen=True)
class AssignmentTable:
    system: VectorSystem = field(repr=False)
    n_classes: int
    strategy: str
    seed: int
    normalized: bool
    projected: bool
    indices: tuple[int, ...] = field(repr=False)
    coords: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def header(self) -> dict:
        return {
            "label": self.system.label.display_name,
            "n": self.system.n,
            "n_classes": self.n_classes,
            "normalized": int(self.normalized),
            "projected": int(self.projected),
            "strategy": self.strategy,
            "seed": self.seed,
            "generator": GENERATOR_NAME,
        }

    def row_lines(self) -> list[str]:
        lines = []
        for c, (idx, row) in enumerate(zip(self.indices, self.coords)):
            lines.append(f"{c},{idx}," + ",".join(f"{x:.16e}" for x in row))
        return lines

    def checksum(self) -> int:
        return fnv1a64("".join(line + "\n" for line in self.row_lines()).encode())

    def equals(self, other: "AssignmentTable", atol: float = 0.0) -> bool:
        return (self.header() == other.header() and self.indices == other.indices
                and np.allclose(self.coords, other.coords, rtol=0.0, atol=atol))


def assign(system: VectorSystem, n_classes: int, strategy: str = "sequential", seed: int = 0,
           normalize: bool = True, project: bool = False) -> AssignmentTable:
    """Map classes ``0..n_classes-1`` onto distinct members of ``system``."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if n_classes > system.n_vects:
        raise CapacityError(f"{n_classes} classes exceed the {system.n_vects} vectors "
                            f"of {system.system_id}")
    if strategy == "sequential":
        indices = list(range(n_classes))
        coords = system.vectors(0, n_classes, normalize=normalize, project=project)
    elif strategy == "shuffled":
        indices = shuffled_indices(system.n_vects, n_classes, seed)
        coords = system.vectors_at(indices, normalize=normalize, project=project)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    coords.setflags(write=False)
    return AssignmentTable(system, n_classes, strategy, int(seed) if strategy == "shuffled" else 0,
                           normalize, project, tuple(indices), coords)


def classify_batch(embeddings, table: AssignmentTable) -> np.ndarray:
    """Nearest-target class ids (max cosine; lowest id on ties) for each row."""
    e = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if e.shape[1] != table.dim:
        raise ValueError(f"embedding width {e.shape[1]} != system dimension {table.dim}")
    norms = np.linalg.norm(e, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise DegenerateInputError("zero or non-finite embedding cannot be classified")
    return _kernels.nearest(e, table.coords)


def classify(embedding, table: AssignmentTable) -> int:
    return int(classify_batch(np.asarray(embedding, dtype=np.float64)[None, :], table)[0])


def save_table(table: AssignmentTable, path) -> int:
    """Write ``table`` as CSV; returns the checksum."""
    rows = table.row_lines()
    checksum = fnv1a64("".join(line + "\n" for line in rows).encode())
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# lsconf-assignment {FORMAT_VERSION}\n")
        for k, v in table.header().items():
            f.write(f"# {k}={v}\n")
        f.write(f"# checksum=fnv1a64:{checksum:016x}\n")
        f.write("class_id,member_index," + ",".join(f"c_{i}" for i in range(table.dim)) + "\n")
        for line in rows:
            f.write(line + "\n")
    return checksum


_HEADER_KEYS = ("label", "n", "n_classes", "normalized", "projected", "strategy", "seed",
                "generator", "checksum")


def load_table(path, verify: bool = True) -> AssignmentTable:
    """Read a table written by :func:`save_table`.

    With ``verify`` the checksum is recomputed and the rows are compared with a
    fresh :func:`assign` from the header's system, strategy and seed.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("# lsconf-assignment "):
        raise TableParseError(1, "missing '# lsconf-assignment <version>' line")
    version = lines[0].split()[-1]
    if version != str(FORMAT_VERSION):
        raise TableParseError(1, f"unsupported format version {version}")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("#"):
        body = lines[pos][1:].strip()
        if "=" not in body:
            raise TableParseError(pos + 1, f"bad header line {lines[pos]!r}")
        k, v = body.split("=", 1)
        meta[k.strip()] = v.strip()
        pos += 1
    missing = [k for k in _HEADER_KEYS if k not in meta]
    if missing:
        raise TableParseError(pos, f"header missing keys {missing}")
    try:
        label = parse_label(meta["label"])
        n = int(meta["n"])
        n_classes = int(meta["n_classes"])
        normalized = meta["normalized"] == "1"
        projected = meta["projected"] == "1"
        seed = int(meta["seed"])
        strategy = meta["strategy"]
        expected_sum = int(meta["checksum"].split(":", 1)[1], 16)
    except (ValueError, IndexError) as exc:
        raise TableParseError(pos, f"bad header value: {exc}") from None
    if meta["generator"] != GENERATOR_NAME:
        raise TableParseError(pos, f"unknown generator {meta['generator']!r}")
    dim = n - 1 if projected else n
    if pos >= len(lines) or not lines[pos].startswith("class_id,member_index"):
        raise TableParseError(pos + 1, "missing column header")
    pos += 1
    rows = lines[pos:]
    if len(rows) != n_classes:
        raise TableParseError(pos + len(rows), f"expected {n_classes} rows, found {len(rows)}")
    indices = []
    coords = np.empty((n_classes, dim))
    for k, line in enumerate(rows):
        lineno = pos + k + 1
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise TableParseError(lineno, f"expected {dim + 2} fields, got {len(parts)}")
        try:
            cid = int(parts[0])
            indices.append(int(parts[1]))
            coords[k] = [float(x) for x in parts[2:]]
        except ValueError as exc:
            raise TableParseError(lineno, str(exc)) from None
        if cid != k:
            raise TableParseError(lineno, f"class id {cid} out of order, expected {k}")
    system = build_system(label, n, allow_invalid=True)
    coords.setflags(write=False)
    table = AssignmentTable(system, n_classes, strategy, seed, normalized, projected,
                            tuple(indices), coords)
    if verify:
        got = table.checksum()
        if got != expected_sum:
            raise IntegrityError(f"checksum mismatch: file says {expected_sum:016x}, rows give {got:016x}")
        fresh = assign(system, n_classes, strategy, seed, normalize=normalized, project=projected)
        if fresh.indices != table.indices or not np.allclose(fresh.coords, coords, rtol=0, atol=1e-15):
            raise IntegrityError("rows do not match the system/strategy/seed in the header")
    return table
