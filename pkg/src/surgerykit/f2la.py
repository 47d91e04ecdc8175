"""Exact linear algebra over GF(2).

Matrices are dense ``uint8`` arrays wrapped in :class:`BitMatrix`. Elimination
runs on Python integers used as row bitsets (bit ``j`` is column ``j``), which
is far faster than elementwise numpy work for the sizes used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BitVector = np.ndarray


def as_bitvector(bits: Iterable[int] | np.ndarray) -> BitVector:
    return (np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits) % 2).astype(np.uint8)


def int_to_bits(value: int, length: int) -> BitVector:
    nbytes = max(1, (length + 7) // 8)
    raw = np.frombuffer(value.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:length].copy()


def bits_to_int(bits: Sequence[int] | np.ndarray) -> int:
    arr = np.asarray(bits, dtype=np.uint8) & 1
    if arr.size == 0:
        return 0
    return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")


@dataclass(frozen=True, eq=False)
class BitMatrix:
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.uint8, copy=True) % 2
        if arr.ndim != 2:
            raise ValueError("BitMatrix needs a 2-D array")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __getitem__(self, idx: tuple[int, int]) -> int:
        r, c = idx
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"entry {idx} outside {self.shape}")
        return int(self.data[r, c])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BitMatrix) and self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self) -> int:
        return hash((self.shape, self.data.tobytes()))

    def __matmul__(self, other: "BitMatrix | np.ndarray") -> "BitMatrix | BitVector":
        if isinstance(other, BitMatrix):
            return BitMatrix((self.data.astype(np.int64) @ other.data.astype(np.int64)) % 2)
        vec = np.asarray(other, dtype=np.int64)
        return ((self.data.astype(np.int64) @ vec) % 2).astype(np.uint8)

    def transpose(self) -> "BitMatrix":
        return BitMatrix(self.data.T)

    @property
    def T(self) -> "BitMatrix":
        return self.transpose()

    def row_ints(self) -> list[int]:
        return [bits_to_int(row) for row in self.data]

    def nnz(self) -> int:
        return int(self.data.sum())

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int] | str], cols: int | None = None) -> "BitMatrix":
        parsed = [[int(ch) for ch in r] if isinstance(r, str) else list(r) for r in rows]
        if not parsed:
            return cls(np.zeros((0, cols or 0), dtype=np.uint8))
        return cls(np.array(parsed, dtype=np.uint8))

    @classmethod
    def from_row_ints(cls, rows: Sequence[int], cols: int) -> "BitMatrix":
        arr = np.zeros((len(rows), cols), dtype=np.uint8)
        for i, r in enumerate(rows):
            arr[i] = int_to_bits(r, cols)
        return cls(arr)


def transpose(m: BitMatrix) -> BitMatrix:
    return m.transpose()


# ---------------------------------------------------------------------------
# elimination core on integer bitsets


def _reduce_rows(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form.

    Pivots are chosen column by column from the lowest column index, and the
    pivot row is the lowest-index remaining row with that bit set.
    Returns (nonzero reduced rows in pivot order, pivot columns).
    """
    rows = list(rows)
    pivots: list[int] = []
    reduced: list[int] = []
    for col in range(ncols):
        bit = 1 << col
        pick = -1
        for i, r in enumerate(rows):
            if r & bit:
                pick = i
                break
        if pick < 0:
            continue
        prow = rows.pop(pick)
        rows = [r ^ prow if r & bit else r for r in rows]
        reduced = [r ^ prow if r & bit else r for r in reduced]
        reduced.append(prow)
        pivots.append(col)
        if not rows:
            break
    return reduced, pivots


def rank_of_ints(rows: Iterable[int]) -> int:
    """Rank of a set of bitset rows (pivot on lowest set bit, order independent)."""
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            low = r & -r
            if low in basis:
                r ^= basis[low]
            else:
                basis[low] = r
                break
    return len(basis)


class IncrementalSpan:
    """Online GF(2) span membership for bitset vectors."""

    def __init__(self) -> None:
        self._basis: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._basis)

    def reduce(self, v: int) -> int:
        while v:
            low = v & -v
            b = self._basis.get(low)
            if b is None:
                return v
            v ^= b
        return 0

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0

    def add(self, v: int) -> bool:
        r = self.reduce(v)
        if r == 0:
            return False
        self._basis[r & -r] = r
        return True


def rank(m: BitMatrix) -> int:
    return rank_of_ints(m.row_ints())


def rref(m: BitMatrix) -> tuple[BitMatrix, list[int]]:
    reduced, pivots = _reduce_rows(m.row_ints(), m.cols)
    return BitMatrix.from_row_ints(reduced, m.cols) if reduced else BitMatrix.zeros(0, m.cols), pivots


def kernel_basis_ints(rows: Sequence[int], ncols: int) -> list[int]:
    reduced, pivots = _reduce_rows(list(rows), ncols)
    pivot_set = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivot_set:
            continue
        v = 1 << free
        fbit = 1 << free
        for prow, pcol in zip(reduced, pivots):
            if prow & fbit:
                v |= 1 << pcol
        basis.append(v)
    return basis


def kernel_basis(m: BitMatrix) -> list[BitVector]:
    return [int_to_bits(v, m.cols) for v in kernel_basis_ints(m.row_ints(), m.cols)]


def solve_ints(rows: Sequence[int], ncols: int, b: int) -> int | None:
    """Solve M x = b where ``rows`` are the rows of M and bit i of b is entry i."""
    aug = [r | (((b >> i) & 1) << ncols) for i, r in enumerate(rows)]
    reduced, pivots = _reduce_rows(aug, ncols + 1)
    x = 0
    for prow, pcol in zip(reduced, pivots):
        if pcol == ncols:
            return None
        if (prow >> ncols) & 1:
            x |= 1 << pcol
    return x


def solve(m: BitMatrix, b: BitVector) -> BitVector | None:
    b = as_bitvector(b)
    if b.shape[0] != m.rows:
        raise ValueError(f"right-hand side has length {b.shape[0]}, matrix has {m.rows} rows")
    x = solve_ints(m.row_ints(), m.cols, bits_to_int(b))
    return None if x is None else int_to_bits(x, m.cols)


# ---------------------------------------------------------------------------
# sparse text format


def write_sparse(m: BitMatrix, path: str | Path) -> None:
    rs, cs = np.nonzero(m.data)
    lines = [f"{m.rows} {m.cols} {len(rs)}"] + [f"{r} {c}" for r, c in zip(rs, cs)]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_sparse(text: str) -> BitMatrix:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not lines:
        raise ValueError("empty sparse matrix file")
    lineno, header = lines[0]
    try:
        rows, cols, nnz = (int(tok) for tok in header.split())
    except ValueError as exc:
        raise ValueError(f"line {lineno}: expected 'rows cols nnz'") from exc
    arr = np.zeros((rows, cols), dtype=np.uint8)
    entries = lines[1:]
    if len(entries) != nnz:
        raise ValueError(f"header promises {nnz} nonzeros, found {len(entries)}")
    for lineno, ln in entries:
        try:
            r, c = (int(tok) for tok in ln.split())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: expected 'r c'") from exc
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"line {lineno}: entry ({r}, {c}) out of range")
        arr[r, c] = 1
    return BitMatrix(arr)


def read_sparse(path: str | Path) -> BitMatrix:
    return parse_sparse(Path(path).read_text())
