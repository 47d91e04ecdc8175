"""Pauli operators, stabilizer codes, logical bases and brute-force distance.

A :class:`PauliOperator` stores its X and Z parts as integer bitmasks (bit q is
qubit q) plus a sign. Y on qubit q means x_q = z_q = 1 and denotes the
Hermitian Y, so ``XZ = -iY``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import f2la

NO_LOGICAL = math.inf
"""Distance sentinel for codes with k = 0."""

_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_CODES = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1), "_": (0, 0)}


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class PauliOperator:
    n: int
    x: int
    z: int
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        limit = 1 << self.n
        if self.x >= limit or self.z >= limit or self.x < 0 or self.z < 0:
            raise ValueError("Pauli bits outside the qubit range")

    # construction ---------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(n, 0, 0)

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        s = text.strip()
        sign = 1
        if s and s[0] in "+-":
            sign = -1 if s[0] == "-" else 1
            s = s[1:]
        x = z = 0
        for q, ch in enumerate(s):
            try:
                bx, bz = _CODES[ch.upper()]
            except KeyError as exc:
                raise ValueError(f"invalid Pauli letter {ch!r} in {text!r}") from exc
            x |= bx << q
            z |= bz << q
        return cls(len(s), x, z, sign)

    @classmethod
    def from_bits(cls, x_bits: Sequence[int] | np.ndarray, z_bits: Sequence[int] | np.ndarray, sign: int = 1) -> "PauliOperator":
        if len(x_bits) != len(z_bits):
            raise ValueError("x and z parts differ in length")
        return cls(len(x_bits), f2la.bits_to_int(x_bits), f2la.bits_to_int(z_bits), sign)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliOperator":
        bx, bz = _CODES[letter]
        return cls(n, bx << qubit, bz << qubit)

    @classmethod
    def from_support(cls, n: int, qubits: Iterable[int], letter: str) -> "PauliOperator":
        bx, bz = _CODES[letter]
        mask = 0
        for q in qubits:
            mask |= 1 << q
        return cls(n, mask if bx else 0, mask if bz else 0)

    # views ----------------------------------------------------------------
    @property
    def x_bits(self) -> np.ndarray:
        return f2la.int_to_bits(self.x, self.n)

    @property
    def z_bits(self) -> np.ndarray:
        return f2la.int_to_bits(self.z, self.n)

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    def support(self) -> list[int]:
        m = self.x | self.z
        return [q for q in range(self.n) if (m >> q) & 1]

    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def letter(self, q: int) -> str:
        return _LETTERS[((self.x >> q) & 1, (self.z >> q) & 1)]

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def to_string(self, with_sign: bool = True) -> str:
        body = "".join(self.letter(q) for q in range(self.n))
        if not with_sign:
            return body
        return ("+" if self.sign > 0 else "-") + body

    def __str__(self) -> str:
        return self.to_string()

    def unsigned(self) -> "PauliOperator":
        return PauliOperator(self.n, self.x, self.z, 1)

    def negate(self) -> "PauliOperator":
        return PauliOperator(self.n, self.x, self.z, -self.sign)

    def with_sign(self, sign: int) -> "PauliOperator":
        return PauliOperator(self.n, self.x, self.z, sign)

    def symplectic(self) -> int:
        """Bitset of length 2n: x part in the low n bits, z part above."""
        return self.x | (self.z << self.n)

    @classmethod
    def from_symplectic(cls, n: int, v: int, sign: int = 1) -> "PauliOperator":
        mask = (1 << n) - 1
        return cls(n, v & mask, v >> n, sign)

    # algebra --------------------------------------------------------------
    def commutes(self, other: "PauliOperator") -> bool:
        return commutes(self, other)

    def multiply(self, other: "PauliOperator") -> tuple[int, "PauliOperator"]:
        """Return (e, R) with self*other = i^e * R and R Hermitian with sign folded in."""
        _check_n(self, other)
        x3, z3 = self.x ^ other.x, self.z ^ other.z
        e = (_popcount(self.x & self.z) + _popcount(other.x & other.z) + 2 * _popcount(self.z & other.x)
             - _popcount(x3 & z3)) % 4
        sign = self.sign * other.sign
        if e >= 2:
            sign = -sign
            e -= 2
        return e, PauliOperator(self.n, x3, z3, sign)

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        e, r = self.multiply(other)
        if e:
            raise ValueError("product of anticommuting Paulis is not Hermitian")
        return r

    def embed(self, n_total: int, offset: int = 0) -> "PauliOperator":
        return PauliOperator(n_total, self.x << offset, self.z << offset, self.sign)

    def restrict(self, qubits: Sequence[int]) -> "PauliOperator":
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << i
            z |= ((self.z >> q) & 1) << i
        return PauliOperator(len(qubits), x, z, self.sign)

    def to_matrix(self) -> np.ndarray:
        """Dense matrix, qubit 0 is the least significant index bit."""
        dim = 1 << self.n
        idx = np.arange(dim)
        out = np.zeros((dim, dim), dtype=complex)
        phase = _pauli_phase_vector(self.n, self.x, self.z) * self.sign
        out[idx ^ self.x, idx] = phase
        return out


def _pauli_phase_vector(n: int, x: int, z: int) -> np.ndarray:
    """Phase picked up by basis state |b> under the Pauli, as it lands on |b ^ x>."""
    idx = np.arange(1 << n)
    zc = np.zeros(1 << n, dtype=np.int64)
    zm = z
    q = 0
    while zm:
        if zm & 1:
            zc += (idx >> q) & 1
        zm >>= 1
        q += 1
    # (X^x Z^z) |b> = (-1)^{z.b} |b^x>; Hermitian Y carries i^{|x&z|}
    return (1j ** (_popcount(x & z) % 4)) * ((-1.0) ** zc)


def _check_n(p: PauliOperator, q: PauliOperator) -> None:
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")


def symplectic_product(p: PauliOperator, q: PauliOperator) -> int:
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) & 1


def commutes(p: PauliOperator, q: PauliOperator) -> bool:
    _check_n(p, q)
    return symplectic_product(p, q) == 0


def anticommute_set(s: PauliOperator, l: PauliOperator) -> set[int]:
    _check_n(s, l)
    mask = (s.x & l.z) ^ (s.z & l.x)
    return {q for q in range(s.n) if (mask >> q) & 1}


def product(ops: Iterable[PauliOperator], n: int | None = None) -> PauliOperator:
    """Ordered product of pairwise-commuting Paulis (phase tracked exactly)."""
    acc: PauliOperator | None = None if n is None else PauliOperator.identity(n)
    for p in ops:
        acc = p if acc is None else acc * p
    if acc is None:
        raise ValueError("empty product needs n")
    return acc


def commutation_matrix(a: Sequence[PauliOperator], b: Sequence[PauliOperator] | None = None) -> np.ndarray:
    """Matrix of symplectic products, computed with numpy."""
    b = a if b is None else b
    if not a or not b:
        return np.zeros((len(a), len(b)), dtype=np.uint8)
    # float matmul goes through BLAS; counts stay far below 2**53 so it is exact
    ax = np.array([p.x_bits for p in a], dtype=np.float64)
    az = np.array([p.z_bits for p in a], dtype=np.float64)
    bx = np.array([p.x_bits for p in b], dtype=np.float64)
    bz = np.array([p.z_bits for p in b], dtype=np.float64)
    return (np.rint(ax @ bz.T + az @ bx.T).astype(np.int64) % 2).astype(np.uint8)


@dataclass(frozen=True)
class LdpcProfile:
    omega: int
    delta: int


class CodeValidationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    n: int
    generators: tuple[PauliOperator, ...]
    name: str = ""
    _rank: int = field(default=-1, repr=False)

    def __post_init__(self) -> None:
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if g.n != self.n:
                raise CodeValidationError(f"generator {g} acts on {g.n} qubits, code has {self.n}")
        if gens:
            cm = commutation_matrix(gens)
            bad = np.argwhere(np.triu(cm, 1))
            if len(bad):
                i, j = (int(v) for v in bad[0])
                raise CodeValidationError(f"generators {i} and {j} anticommute")
        object.__setattr__(self, "_rank", f2la.rank_of_ints(g.symplectic() for g in gens))

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def k(self) -> int:
        return self.n - self._rank

    def check_matrix(self) -> f2la.BitMatrix:
        if not self.generators:
            return f2la.BitMatrix.zeros(0, 2 * self.n)
        return f2la.BitMatrix(np.array([np.concatenate([g.x_bits, g.z_bits]) for g in self.generators]))

    def is_css(self) -> bool:
        return all(g.x == 0 or g.z == 0 for g in self.generators)

    def in_stabilizer_group(self, p: PauliOperator) -> bool:
        """Membership up to sign."""
        span = f2la.IncrementalSpan()
        for g in self.generators:
            span.add(g.symplectic())
        return span.contains(p.symplectic())

    def is_logical(self, p: PauliOperator) -> bool:
        return all(commutes(p, g) for g in self.generators) and not self.in_stabilizer_group(p)

    def direct_sum(self, other: "StabilizerCode", name: str = "") -> "StabilizerCode":
        n = self.n + other.n
        gens = [g.embed(n, 0) for g in self.generators] + [g.embed(n, self.n) for g in other.generators]
        return StabilizerCode(n, tuple(gens), name or f"{self.name}+{other.name}")

    def to_text(self) -> str:
        return "\n".join([str(self.n)] + [g.to_string() for g in self.generators]) + "\n"


def make_code(generators: Iterable[str | PauliOperator], name: str = "") -> StabilizerCode:
    gens = [PauliOperator.from_string(g) if isinstance(g, str) else g for g in generators]
    if not gens:
        raise CodeValidationError("need at least one generator to infer n")
    return StabilizerCode(gens[0].n, tuple(gens), name)


def css_code(hx: f2la.BitMatrix, hz: f2la.BitMatrix, name: str = "") -> StabilizerCode:
    if hx.cols != hz.cols:
        raise CodeValidationError("HX and HZ have different column counts")
    n = hx.cols
    gens = [PauliOperator(n, f2la.bits_to_int(r), 0) for r in hx.data]
    gens += [PauliOperator(n, 0, f2la.bits_to_int(r)) for r in hz.data]
    return StabilizerCode(n, tuple(gens), name)


def parse_code(text: str, name: str = "") -> StabilizerCode:
    """Parse ``n`` followed by one signed Pauli string per line."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        ln = raw.split("#", 1)[0].strip()
        if ln:
            entries.append((lineno, ln))
    if not entries:
        raise CodeValidationError("empty code file")
    lineno, head = entries[0]
    try:
        n = int(head)
    except ValueError as exc:
        raise CodeValidationError(f"line {lineno}: expected qubit count, got {head!r}") from exc
    gens = []
    for lineno, ln in entries[1:]:
        try:
            p = PauliOperator.from_string(ln)
        except ValueError as exc:
            raise CodeValidationError(f"line {lineno}: {exc}") from exc
        if p.n != n:
            raise CodeValidationError(f"line {lineno}: generator has {p.n} qubits, expected {n}")
        gens.append(p)
    return StabilizerCode(n, tuple(gens), name)


def read_code(path: str | Path) -> StabilizerCode:
    return parse_code(Path(path).read_text(), Path(path).stem)


def read_css_code(hx_path: str | Path, hz_path: str | Path) -> StabilizerCode:
    return css_code(f2la.read_sparse(hx_path), f2la.read_sparse(hz_path), Path(hx_path).stem)


# ---------------------------------------------------------------------------
# fixtures


def steane_code() -> StabilizerCode:
    rows = ["1010101", "0110011", "0001111"]
    gens = [row.replace("1", "X").replace("0", "I") for row in rows]
    gens += [row.replace("1", "Z").replace("0", "I") for row in rows]
    return make_code(gens, "steane")


def code_422() -> StabilizerCode:
    return make_code(["XXXX", "ZZZZ"], "4_2_2")


def bell_code() -> StabilizerCode:
    return make_code(["XX", "ZZ"], "bell")


def repetition_code(n: int) -> StabilizerCode:
    gens = ["I" * i + "ZZ" + "I" * (n - i - 2) for i in range(n - 1)]
    return make_code(gens, f"rep{n}")


def toric_code(L: int) -> StabilizerCode:
    """Toric code on an L x L torus; qubit 2*(r*L+c) is horizontal, +1 vertical."""
    n = 2 * L * L

    def h(r: int, c: int) -> int:
        return 2 * ((r % L) * L + (c % L))

    def v(r: int, c: int) -> int:
        return 2 * ((r % L) * L + (c % L)) + 1

    gens = []
    for r in range(L):
        for c in range(L):
            star = [h(r, c), h(r, c - 1), v(r, c), v(r - 1, c)]
            gens.append(PauliOperator.from_support(n, star, "X"))
    for r in range(L):
        for c in range(L):
            plaq = [h(r, c), h(r + 1, c), v(r, c), v(r, c + 1)]
            gens.append(PauliOperator.from_support(n, plaq, "Z"))
    return StabilizerCode(n, tuple(gens), f"toric{L}")


def surface_code_3() -> StabilizerCode:
    """Rotated distance-3 surface code on a 3x3 grid of data qubits."""
    x_checks = [[0, 1, 3, 4], [4, 5, 7, 8], [1, 2], [6, 7]]
    z_checks = [[1, 2, 4, 5], [3, 4, 6, 7], [0, 3], [5, 8]]
    gens = [PauliOperator.from_support(9, s, "X") for s in x_checks]
    gens += [PauliOperator.from_support(9, s, "Z") for s in z_checks]
    return StabilizerCode(9, tuple(gens), "surface3")


FIXTURES = {
    "steane": steane_code,
    "4_2_2": code_422,
    "bell": bell_code,
    "surface3": surface_code_3,
    "toric2": lambda: toric_code(2),
}


# ---------------------------------------------------------------------------
# logical operators


def _normalizer_ints(code: StabilizerCode) -> list[int]:
    """Basis of symplectic vectors commuting with every generator."""
    n = code.n
    rows = [g.z | (g.x << n) for g in code.generators]  # swapped halves
    return f2la.kernel_basis_ints(rows, 2 * n)


def _sp(n: int, a: int, b: int) -> int:
    mask = (1 << n) - 1
    return (_popcount((a & mask) & (b >> n)) + _popcount((a >> n) & (b & mask))) & 1


def logical_basis(code: StabilizerCode) -> list[PauliOperator]:
    """Return [X1, Z1, X2, Z2, ...] with the standard symplectic pairing."""
    n = code.n
    span = f2la.IncrementalSpan()
    for g in code.generators:
        span.add(g.symplectic())
    reps: list[int] = []
    for v in _normalizer_ints(code):
        if span.add(v):
            reps.append(v)
    out: list[int] = []
    pool = reps
    while pool:
        a = pool.pop(0)
        partner = next((i for i, b in enumerate(pool) if _sp(n, a, b)), None)
        if partner is None:
            raise RuntimeError("normalizer quotient is degenerate; generator set inconsistent")
        b = pool.pop(partner)
        # keep the pure-X member first when one exists, so CSS codes give (X, Z) pairs
        if a >> n and not (b >> n) and (a & ((1 << n) - 1)) == 0:
            a, b = b, a
        nxt = []
        for c in pool:
            if _sp(n, c, b):
                c ^= a
            if _sp(n, c, a):
                c ^= b
            nxt.append(c)
        pool = nxt
        out.extend([a, b])
    return [PauliOperator.from_symplectic(n, v) for v in out]


def logical_group_elements(code: StabilizerCode) -> list[PauliOperator]:
    """All 4^k - 1 nontrivial cosets represented by products of basis logicals."""
    basis = logical_basis(code)
    out = []
    for mask in range(1, 1 << len(basis)):
        v = 0
        for i, b in enumerate(basis):
            if (mask >> i) & 1:
                v ^= b.symplectic()
        out.append(PauliOperator.from_symplectic(code.n, v))
    return out


def random_logical(code: StabilizerCode, rng: np.random.Generator) -> PauliOperator:
    """Random nontrivial logical times a random stabilizer, with a random sign."""
    basis = logical_basis(code)
    if not basis:
        raise ValueError("code has no logical qubits")
    while True:
        coeffs = rng.integers(0, 2, size=len(basis))
        if coeffs.any():
            break
    v = 0
    for c, b in zip(coeffs, basis):
        if c:
            v ^= b.symplectic()
    for g, c in zip(code.generators, rng.integers(0, 2, size=len(code.generators))):
        if c:
            v ^= g.symplectic()
    return PauliOperator.from_symplectic(code.n, v, int(rng.choice([1, -1])))


def ldpc_profile(code: StabilizerCode) -> LdpcProfile:
    if not code.generators:
        return LdpcProfile(0, 0)
    omega = max(g.weight() for g in code.generators)
    counts = [0] * code.n
    for g in code.generators:
        for q in g.support():
            counts[q] += 1
    return LdpcProfile(omega, max(counts) if counts else 0)


# ---------------------------------------------------------------------------
# distance


@dataclass(frozen=True)
class DistanceResult:
    value: float
    exact: bool
    witness: PauliOperator | None


def _search_tables(code: StabilizerCode) -> tuple[list[list[tuple[int, int]]], list[PauliOperator]]:
    basis = logical_basis(code)
    gens = code.generators
    tables: list[list[tuple[int, int]]] = []
    for q in range(code.n):
        row = []
        for letter in "XYZ":
            p = PauliOperator.single(code.n, q, letter)
            syn = 0
            for i, g in enumerate(gens):
                if symplectic_product(p, g):
                    syn |= 1 << i
            lg = 0
            for i, b in enumerate(basis):
                if symplectic_product(p, b):
                    lg |= 1 << i
            row.append((syn, lg))
        tables.append(row)
    return tables, basis


def min_logical_weight(code: StabilizerCode, max_weight: int) -> DistanceResult:
    """Smallest-weight nontrivial logical with weight <= max_weight.

    If none is found the result carries value max_weight + 1 and exact=False,
    i.e. it is a lower bound.
    """
    if code.k == 0:
        return DistanceResult(NO_LOGICAL, True, None)
    tables, _ = _search_tables(code)
    n = code.n
    letters = "XYZ"
    for w in range(1, min(max_weight, n) + 1):
        for qubits in itertools.combinations(range(n), w):
            rows = [tables[q] for q in qubits]
            for choice in itertools.product(range(3), repeat=w):
                syn = lg = 0
                for r, c in zip(rows, choice):
                    s, l = r[c]
                    syn ^= s
                    lg ^= l
                if syn == 0 and lg != 0:
                    x = z = 0
                    for q, c in zip(qubits, choice):
                        bx, bz = _CODES[letters[c]]
                        x |= bx << q
                        z |= bz << q
                    return DistanceResult(w, True, PauliOperator(n, x, z))
    if max_weight >= n:
        raise RuntimeError("no logical found up to full weight although k > 0")
    return DistanceResult(max_weight + 1, False, None)


def distance_bruteforce(code: StabilizerCode, max_n: int = 22) -> float:
    if code.n > max_n:
        raise ValueError(f"code has {code.n} qubits; brute-force distance refuses above {max_n}")
    return min_logical_weight(code, code.n).value
