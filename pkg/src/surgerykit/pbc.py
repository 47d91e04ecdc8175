"""Compile block-partitioned Clifford+T circuits into Pauli-measurement schedules.

Conventions: a rotation with axis P and angle θ (in units of π) is
exp(-iπθ P). T is Z rotated by 1/8, S by 1/4; a CNOT is
(Z_c X_t)_{-1/4} Z_c{1/4} X_t{1/4} up to a global phase. In-block Cliffords
are pushed to the end of the circuit and absorbed into the final
measurements; what remains is lowered into two-measurement gadgets.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .archkit import BlockMap
from .paulicode import PauliOperator

GATES_1Q = {"X", "Y", "Z", "H", "S", "SDG", "T", "TDG", "MZ"}
ALIASES = {"S†": "SDG", "SDAG": "SDG", "T†": "TDG", "TDAG": "TDG", "MEASUREZ": "MZ", "M": "MZ", "CX": "CNOT"}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    def __str__(self) -> str:
        return " ".join([self.name] + [str(q) for q in self.qubits])


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self) -> None:
        seen_measure = False
        for i, g in enumerate(self.gates):
            if g.name not in GATES_1Q and g.name != "CNOT":
                raise ValueError(f"gate {i}: unknown gate {g.name}")
            want = 2 if g.name == "CNOT" else 1
            if len(g.qubits) != want:
                raise ValueError(f"gate {i}: {g.name} takes {want} qubit(s)")
            if any(not 0 <= q < self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {i}: qubit index out of range")
            if g.name == "CNOT" and g.qubits[0] == g.qubits[1]:
                raise ValueError(f"gate {i}: CNOT control equals target")
            if g.name == "MZ":
                seen_measure = True
            elif seen_measure:
                raise ValueError(f"gate {i}: only Z measurements may follow a Z measurement")

    @property
    def body(self) -> tuple[Gate, ...]:
        return tuple(g for g in self.gates if g.name != "MZ")

    def measured_qubits(self) -> list[int]:
        return [g.qubits[0] for g in self.gates if g.name == "MZ"]

    def completed(self) -> "Circuit":
        """Circuit ending with Z measurements on every qubit, in index order."""
        measured = self.measured_qubits()
        if sorted(measured) == list(range(self.num_qubits)) and len(measured) == self.num_qubits:
            return self
        if len(set(measured)) != len(measured):
            raise ValueError("qubit measured twice")
        warnings.warn("circuit does not end with Z measurements on all qubits; completing it", stacklevel=2)
        missing = [Gate("MZ", (q,)) for q in range(self.num_qubits) if q not in set(measured)]
        return Circuit(self.num_qubits, self.gates + tuple(missing))

    def to_text(self) -> str:
        return f"qubits {self.num_qubits}\n" + "\n".join(str(g) for g in self.gates) + "\n"


def parse_circuit(text: str, num_qubits: int | None = None) -> Circuit:
    gates = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        name = toks[0].upper()
        if name == "QUBITS":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ValueError(f"line {lineno}: expected 'qubits K'")
            header = int(toks[1])
            continue
        name = ALIASES.get(name, name)
        try:
            qs = tuple(int(t) for t in toks[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: qubit indices must be integers") from exc
        if name not in GATES_1Q and name != "CNOT":
            raise ValueError(f"line {lineno}: unknown gate '{toks[0]}'")
        want = 2 if name == "CNOT" else 1
        if len(qs) != want:
            raise ValueError(f"line {lineno}: {name} takes {want} qubit(s)")
        gates.append(Gate(name, qs))
    k = num_qubits if num_qubits is not None else header
    if k is None:
        k = 1 + max((q for g in gates for q in g.qubits), default=-1)
    return Circuit(k, tuple(gates))


def read_circuit(path: str | Path, num_qubits: int | None = None) -> Circuit:
    return parse_circuit(Path(path).read_text(), num_qubits)


@dataclass(frozen=True)
class BlockPartition:
    """Qubit-to-block assignment; block b also owns ancilla id num_qubits + b."""

    block_of: tuple[int, ...]
    k: int  # logical qubits per block code; k-1 are computational

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("blocks need k >= 2 (one logical qubit is the ancilla)")
        if not self.block_of:
            return
        nb = max(self.block_of) + 1
        sizes = [0] * nb
        for b in self.block_of:
            if b < 0:
                raise ValueError("negative block id")
            sizes[b] += 1
        if any(s == 0 for s in sizes):
            raise ValueError("block ids must be contiguous from 0")
        if any(s > self.k - 1 for s in sizes):
            raise ValueError(f"a block holds more than k-1 = {self.k - 1} computational qubits")

    @property
    def num_qubits(self) -> int:
        return len(self.block_of)

    @property
    def num_blocks(self) -> int:
        return max(self.block_of) + 1 if self.block_of else 0

    def ancilla(self, block: int) -> int:
        return self.num_qubits + block

    def blocks_of(self, p: PauliOperator) -> frozenset[int]:
        return frozenset(self.block_of[q] for q in p.support())

    def members(self, block: int) -> list[int]:
        return [q for q, b in enumerate(self.block_of) if b == block]

    @classmethod
    def contiguous(cls, num_blocks: int, k: int) -> "BlockPartition":
        return cls(tuple(q // (k - 1) for q in range(num_blocks * (k - 1))), k)

    @classmethod
    def from_json(cls, text: str) -> "BlockPartition":
        doc = json.loads(text)
        if "block_of" in doc:
            return cls(tuple(doc["block_of"]), int(doc["k"]))
        blocks = doc["blocks"]
        n = sum(len(b) for b in blocks)
        block_of = [-1] * n
        for b, members in enumerate(blocks):
            for q in members:
                if not 0 <= q < n or block_of[q] != -1:
                    raise ValueError(f"qubit {q} is out of range or assigned twice")
                block_of[q] = b
        return cls(tuple(block_of), int(doc["k"]))

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "blocks": [self.members(b) for b in range(self.num_blocks)]})


# ---------------------------------------------------------------------------
# Pauli conjugation bookkeeping


def _scaled_product(a: PauliOperator, b: PauliOperator, power_of_i: int) -> PauliOperator:
    """i^power * a * b, which must be Hermitian."""
    e, r = a.multiply(b)
    total = (e + power_of_i) % 4
    if total % 2:
        raise ValueError("scaled product is not Hermitian")
    return r.negate() if total == 2 else r


def conjugate_by_rotation(q: PauliOperator, axis: PauliOperator, angle: Fraction) -> PauliOperator:
    """R† q R for R = exp(-iπ·angle·axis), angle in {±1/4, ±1/2}."""
    if q.commutes(axis):
        return q
    if abs(angle) == Fraction(1, 2):
        return q.negate()
    if abs(angle) != Fraction(1, 4):
        raise ValueError("only Clifford angles can be conjugated through")
    # R† q R = exp(2iπ·angle·axis) q = ±i axis q
    return _scaled_product(axis, q, 1 if angle > 0 else 3)


class PauliMap:
    """Clifford conjugation stored as images of X_q and Z_q."""

    def __init__(self, n: int, images_x: list[PauliOperator] | None = None,
                 images_z: list[PauliOperator] | None = None) -> None:
        self.n = n
        self.images_x = images_x if images_x is not None else [PauliOperator.single(n, q, "X") for q in range(n)]
        self.images_z = images_z if images_z is not None else [PauliOperator.single(n, q, "Z") for q in range(n)]

    def copy(self) -> "PauliMap":
        return PauliMap(self.n, list(self.images_x), list(self.images_z))

    def apply(self, p: PauliOperator) -> PauliOperator:
        # p = sign · i^{|x&z|} · prod_q X_q^x Z_q^z
        phase = bin(p.x & p.z).count("1")
        acc = PauliOperator.identity(self.n)
        for q in range(self.n):
            if (p.x >> q) & 1:
                e, acc = acc.multiply(self.images_x[q])
                phase += e
            if (p.z >> q) & 1:
                e, acc = acc.multiply(self.images_z[q])
                phase += e
        phase %= 4
        if phase % 2:
            raise AssertionError("Clifford image of a Hermitian Pauli is not Hermitian")
        sign = p.sign * (-1 if phase == 2 else 1)
        return acc if sign == 1 else acc.negate()

    def then_heisenberg(self, axis: PauliOperator, angle: Fraction) -> None:
        """f <- f ∘ conj_R, i.e. U <- R·U for the map P -> U† P U."""
        self.images_x = [self.apply(conjugate_by_rotation(PauliOperator.single(self.n, q, "X"), axis, angle))
                         for q in range(self.n)]
        self.images_z = [self.apply(conjugate_by_rotation(PauliOperator.single(self.n, q, "Z"), axis, angle))
                         for q in range(self.n)]

    def then_schrodinger(self, axis: PauliOperator, angle: Fraction) -> None:
        """g <- R g R†, i.e. V <- R·V for the map Q -> V Q V†."""
        self.images_x = [conjugate_by_rotation(img, axis, -angle) for img in self.images_x]
        self.images_z = [conjugate_by_rotation(img, axis, -angle) for img in self.images_z]

    def then_pauli(self, p: PauliOperator) -> None:
        self.images_x = [img if img.commutes(p) else img.negate() for img in self.images_x]
        self.images_z = [img if img.commutes(p) else img.negate() for img in self.images_z]


# ---------------------------------------------------------------------------
# rotations


@dataclass(frozen=True)
class PauliRotation:
    axis: PauliOperator
    angle: Fraction  # units of π
    kind: str  # "t", "cnot" (cross-block), "clifford" (in-block)
    gate: int  # index of the source gate
    layer: int = 0  # reduced-circuit layer, 0 for in-block Cliffords

    def blocks(self, partition: BlockPartition) -> frozenset[int]:
        return partition.blocks_of(self.axis)


def _clifford_rotations(name: str, qs: tuple[int, ...], n: int) -> list[tuple[PauliOperator, Fraction]]:
    q = qs[0]
    one = lambda letter, qq=q: PauliOperator.single(n, qq, letter)  # noqa: E731
    quarter, half = Fraction(1, 4), Fraction(1, 2)
    if name in ("X", "Y", "Z"):
        return [(one(name), half)]
    if name == "S":
        return [(one("Z"), quarter)]
    if name == "SDG":
        return [(one("Z"), -quarter)]
    if name == "H":
        return [(one("X"), quarter), (one("Z"), quarter), (one("X"), quarter)]
    if name == "CNOT":
        c, t = qs
        zx = PauliOperator(n, 1 << t, 1 << c)
        return [(zx, -quarter), (PauliOperator.single(n, c, "Z"), quarter), (PauliOperator.single(n, t, "X"), quarter)]
    raise ValueError(f"{name} is not a Clifford gate")


def reduced_layers(circuit: Circuit, partition: BlockPartition) -> list[int]:
    """ASAP layer (1-based) of each gate in the reduced circuit, 0 for removed gates."""
    last = [0] * circuit.num_qubits
    out = []
    for g in circuit.gates:
        keep = g.name in ("T", "TDG") or (g.name == "CNOT" and partition.block_of[g.qubits[0]] != partition.block_of[g.qubits[1]])
        if not keep:
            out.append(0)
            continue
        layer = 1 + max(last[q] for q in g.qubits)
        for q in g.qubits:
            last[q] = layer
        out.append(layer)
    return out


def reduced_depth(circuit: Circuit, partition: BlockPartition) -> int:
    return max(reduced_layers(circuit, partition), default=0)


@dataclass
class CompatibilityReport:
    compatible: bool
    diagnostics: list[str]


def check_compatibility(circuit: Circuit, partition: BlockPartition, block_map: BlockMap) -> CompatibilityReport:
    diags = []
    if partition.num_qubits != circuit.num_qubits:
        diags.append(f"partition covers {partition.num_qubits} qubits, circuit has {circuit.num_qubits}")
        return CompatibilityReport(False, diags)
    if partition.num_blocks > block_map.num_blocks:
        diags.append(f"partition uses {partition.num_blocks} blocks, block map has {block_map.num_blocks}")
    for i, g in enumerate(circuit.gates):
        if g.name != "CNOT":
            continue
        a, b = (partition.block_of[q] for q in g.qubits)
        if a != b and not block_map.adjacent(a, b):
            diags.append(f"gate {i} ({g}): blocks {a} and {b} share no bridge")
    return CompatibilityReport(not diags, diags)


def to_rotations(circuit: Circuit, partition: BlockPartition) -> list[PauliRotation]:
    """T and cross-block CNOT become rotations; in-block Cliffords become Clifford rotations."""
    n = circuit.num_qubits
    layers = reduced_layers(circuit, partition)
    out: list[PauliRotation] = []
    for i, g in enumerate(circuit.gates):
        if g.name == "MZ":
            continue
        if g.name in ("T", "TDG"):
            sign = 1 if g.name == "T" else -1
            out.append(PauliRotation(PauliOperator.single(n, g.qubits[0], "Z"), Fraction(sign, 8), "t", i, layers[i]))
            continue
        rots = _clifford_rotations(g.name, g.qubits, n)
        cross = g.name == "CNOT" and layers[i] > 0
        for j, (axis, angle) in enumerate(rots):
            if cross and j == 0:
                out.append(PauliRotation(axis, angle, "cnot", i, layers[i]))
            else:
                out.append(PauliRotation(axis, angle, "clifford", i, 0))
    return out


@dataclass
class AbsorbedProgram:
    num_qubits: int
    rotations: list[PauliRotation]  # non-Clifford part, axes conjugated through earlier Cliffords
    final_bases: list[PauliOperator]  # measurement replacing Z_q at the end
    prefix_index: list[int]  # number of Clifford rotations preceding each rotation


def commute_and_absorb(seq: Sequence[PauliRotation], num_qubits: int) -> AbsorbedProgram:
    f = PauliMap(num_qubits)
    out: list[PauliRotation] = []
    prefix: list[int] = []
    seen = 0
    for r in seq:
        if r.kind == "clifford":
            f.then_heisenberg(r.axis, r.angle)
            seen += 1
            continue
        out.append(PauliRotation(f.apply(r.axis), r.angle, r.kind, r.gate, r.layer))
        prefix.append(seen)
    finals = [f.apply(PauliOperator.single(num_qubits, q, "Z")) for q in range(num_qubits)]
    return AbsorbedProgram(num_qubits, out, finals, prefix)


def unconjugate(program: AbsorbedProgram, seq: Sequence[PauliRotation]) -> list[PauliOperator]:
    """Undo the Clifford pushing: recover each rotation's original axis."""
    cliffords = [r for r in seq if r.kind == "clifford"]
    g = PauliMap(program.num_qubits)
    done = 0
    out = []
    for r, pre in zip(program.rotations, program.prefix_index):
        while done < pre:
            c = cliffords[done]
            g.then_schrodinger(c.axis, c.angle)
            done += 1
        out.append(g.apply(r.axis))
    return out


# ---------------------------------------------------------------------------
# lowering


ANCILLA_CYCLE = ("Z", "Y", "X")  # consecutive triples (A, B, C) satisfy A·B = -i·C


def _ancilla_triple(uses: int) -> tuple[str, str, str]:
    j = (-uses) % 3
    return ANCILLA_CYCLE[j], ANCILLA_CYCLE[(j + 1) % 3], ANCILLA_CYCLE[(j + 2) % 3]


@dataclass(frozen=True)
class Measurement:
    kind: str  # rot4-joint, rot4-ancilla, rot8-joint, rot8-magic, final
    data: PauliOperator  # nominal Pauli on the computational qubits (identity if none)
    blocks: frozenset[int]
    ancilla_block: int | None = None
    ancilla_letter: str | None = None
    magic_letter: str | None = None
    consumes_magic: bool = False
    gadget: int = -1
    qubit: int = -1

    def label(self) -> str:
        parts = [self.data.to_string()] if self.data.weight() else []
        if self.ancilla_letter:
            parts.append(f"{self.ancilla_letter}[anc{self.ancilla_block}]")
        if self.magic_letter:
            parts.append(f"{self.magic_letter}[magic]")
        return "⊗".join(parts)

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind,
            "pauli": self.label(),
            "blocks": sorted(self.blocks),
            "magic": self.consumes_magic,
            "gadget": self.gadget,
            "qubit": self.qubit,
        }


@dataclass(frozen=True)
class Gadget:
    index: int
    rotation: PauliRotation
    blocks: frozenset[int]
    first: Measurement
    second: Measurement
    ancilla_triple: tuple[str, str, str] | None = None

    @property
    def is_magic(self) -> bool:
        return self.first.consumes_magic

    def correction_rule(self) -> str:
        if self.is_magic:
            return "Clifford P_{-s/4} if m1 != s; Pauli P if m2 = -1"
        return "Pauli P if m1·α·γ = s"


@dataclass
class LoweredProgram:
    num_qubits: int
    k: int
    gadgets: list[Gadget]
    finals: list[Measurement]

    @property
    def magic_count(self) -> int:
        return sum(1 for g in self.gadgets if g.is_magic)

    @property
    def measurement_count(self) -> int:
        return 2 * len(self.gadgets) + len(self.finals)


def lower_to_measurements(program: AbsorbedProgram, partition: BlockPartition) -> LoweredProgram:
    n = program.num_qubits
    uses = [0] * partition.num_blocks
    gadgets = []
    for i, r in enumerate(program.rotations):
        blocks = partition.blocks_of(r.axis)
        if abs(r.angle) == Fraction(1, 8):
            if len(blocks) != 1:
                raise ValueError(f"rotation {i}: π/8 rotation spans blocks {sorted(blocks)}")
            first = Measurement("rot8-joint", r.axis, blocks, magic_letter="Z", consumes_magic=True, gadget=i)
            second = Measurement("rot8-magic", PauliOperator.identity(n), frozenset(), magic_letter="X", gadget=i)
            gadgets.append(Gadget(i, r, blocks, first, second))
        elif abs(r.angle) == Fraction(1, 4):
            b0 = min(blocks)
            a, b, c = _ancilla_triple(uses[b0])
            uses[b0] += 1
            first = Measurement("rot4-joint", r.axis, blocks, ancilla_block=b0, ancilla_letter=b, gadget=i)
            second = Measurement("rot4-ancilla", PauliOperator.identity(n), frozenset({b0}), ancilla_block=b0,
                                 ancilla_letter=c, gadget=i)
            gadgets.append(Gadget(i, r, blocks, first, second, (a, b, c)))
        else:
            raise ValueError(f"rotation {i}: unsupported angle {r.angle}")
    finals = [Measurement("final", p, partition.blocks_of(p), qubit=q) for q, p in enumerate(program.final_bases)]
    return LoweredProgram(n, partition.k, gadgets, finals)


# ---------------------------------------------------------------------------
# serialization


@dataclass
class MeasurementSchedule:
    layers: list[list[Measurement]]
    k: int
    lam: int
    magic_count: int
    colors_per_layer: dict[int, int]
    max_degree_per_layer: dict[int, int]
    gadgets: list[Gadget]  # in execution order, ancilla bases retargeted along that order
    slot_depth: int  # depth of the slot-by-slot schedule before compaction

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def depth_bound(self) -> int:
        return 4 * self.k * self.lam + self.k

    def to_json(self) -> str:
        return json.dumps({
            "depth": self.depth,
            "lambda": self.lam,
            "k": self.k,
            "depth_bound": self.depth_bound,
            "slot_depth": self.slot_depth,
            "magic_count": self.magic_count,
            "colors_per_layer": {str(k): v for k, v in self.colors_per_layer.items()},
            "layers": [[m.to_dict() for m in layer] for layer in self.layers],
        }, indent=1)


def _color_layer(gadgets: Sequence[Gadget]) -> dict[int, int]:
    """Greedy color per gadget; anticommuting gadgets sharing a block keep their order."""
    color: dict[int, int] = {}
    for pos, g in enumerate(gadgets):
        used = set()
        floor = 0
        for h in gadgets[:pos]:
            if g.blocks & h.blocks:
                used.add(color[h.index])
                if not g.rotation.axis.commutes(h.rotation.axis):
                    floor = max(floor, color[h.index] + 1)
        c = floor
        while c in used:
            c += 1
        color[g.index] = c
    return color


def _scheduling_layers(gadgets: Sequence[Gadget]) -> list[int]:
    """Reduced-circuit layer, raised so that no rotation overtakes an earlier one it anticommutes with.

    Absorbed Cliffords can make rotations on different qubits of one block
    anticommute; their circuit order must then survive layer grouping.
    """
    out: list[int] = []
    for i, g in enumerate(gadgets):
        layer = g.rotation.layer
        for j in range(i):
            h = gadgets[j]
            if out[j] > layer and g.blocks & h.blocks and not g.rotation.axis.commutes(h.rotation.axis):
                layer = out[j]
        out.append(layer)
    return out


def _retarget_ancillas(order: Sequence[Gadget], num_blocks: int) -> list[Gadget]:
    """Reassign each block ancilla's (prepared, joint, measured) bases in execution order."""
    uses = [0] * max(1, num_blocks)
    out = []
    for g in order:
        if g.is_magic:
            out.append(g)
            continue
        b0 = g.first.ancilla_block
        a, b, c = _ancilla_triple(uses[b0])
        uses[b0] += 1
        out.append(replace(g, first=replace(g.first, ancilla_letter=b), second=replace(g.second, ancilla_letter=c),
                           ancilla_triple=(a, b, c)))
    return out


def serialize(lowered: LoweredProgram, partition: BlockPartition, block_map: BlockMap, lam: int | None = None) -> MeasurementSchedule:
    """Layer-by-layer greedy edge coloring, then as-soon-as-possible placement per block."""
    by_layer: dict[int, list[Gadget]] = {}
    for g, layer in zip(lowered.gadgets, _scheduling_layers(lowered.gadgets)):
        by_layer.setdefault(layer, []).append(g)
    if lam is None:
        lam = max((g.rotation.layer for g in lowered.gadgets), default=0)
    colors_used: dict[int, int] = {}
    maxdeg: dict[int, int] = {}
    order: list[Gadget] = []
    slot_depth = 0
    for layer in sorted(by_layer):
        gs = by_layer[layer]
        col = _color_layer(gs)
        colors_used[layer] = 1 + max(col.values())
        deg: dict[int, int] = {}
        for g in gs:
            if len(g.blocks) > 1:
                for b in g.blocks:
                    deg[b] = deg.get(b, 0) + 1
        maxdeg[layer] = max(deg.values(), default=0)
        slot_depth += 2 * colors_used[layer]
        order.extend(sorted(gs, key=lambda g: (col[g.index], g.index)))
    slot_depth += lowered.k - 1 if lowered.finals else 0
    order = _retarget_ancillas(order, partition.num_blocks)
    free = [0] * max(1, partition.num_blocks)
    timeline: dict[int, list[Measurement]] = {}
    start_of: dict[int, int] = {}
    for g in order:
        t0 = max((free[b] for b in g.blocks), default=0)
        timeline.setdefault(t0, []).append(g.first)
        timeline.setdefault(t0 + 1, []).append(g.second)
        start_of[g.index] = t0
        for b in g.blocks:
            free[b] = t0 + 1
        for b in g.second.blocks:
            free[b] = t0 + 2
    for m in lowered.finals:
        b = min(m.blocks) if m.blocks else 0
        t0 = free[b]
        timeline.setdefault(t0, []).append(m)
        free[b] = t0 + 1
    depth = 1 + max(timeline, default=-1)
    layers = [timeline.get(t, []) for t in range(depth)]
    sched = MeasurementSchedule(layers, lowered.k, lam, lowered.magic_count, colors_used, maxdeg,
                                sorted(order, key=lambda g: (start_of[g.index], g.index)),
                                slot_depth)
    problems = schedule_violations(sched, block_map)
    if problems:
        raise AssertionError("; ".join(problems))
    if sched.depth >= sched.depth_bound:
        raise AssertionError(f"depth {sched.depth} is not below 4kΛ + k = {sched.depth_bound}")
    return sched


def schedule_violations(schedule: MeasurementSchedule, block_map: BlockMap) -> list[str]:
    out = []
    for t, layer in enumerate(schedule.layers):
        seen: set[int] = set()
        for m in layer:
            if seen & m.blocks:
                out.append(f"timestep {t}: blocks {sorted(seen & m.blocks)} used twice")
            seen |= m.blocks
            bl = sorted(m.blocks)
            if len(bl) > 2:
                out.append(f"timestep {t}: measurement spans {len(bl)} blocks")
            if len(bl) == 2 and not block_map.adjacent(bl[0], bl[1]):
                out.append(f"timestep {t}: blocks {bl} are not bridged")
    return out


@dataclass
class CompiledCircuit:
    circuit: Circuit
    partition: BlockPartition
    rotations: list[PauliRotation]
    absorbed: AbsorbedProgram
    lowered: LoweredProgram
    schedule: MeasurementSchedule


def compile_circuit(circuit: Circuit, partition: BlockPartition, block_map: BlockMap) -> CompiledCircuit:
    circuit = circuit.completed()
    rep = check_compatibility(circuit, partition, block_map)
    if not rep.compatible:
        raise ValueError("incompatible circuit: " + "; ".join(rep.diagnostics))
    seq = to_rotations(circuit, partition)
    absorbed = commute_and_absorb(seq, circuit.num_qubits)
    lowered = lower_to_measurements(absorbed, partition)
    sched = serialize(lowered, partition, block_map, reduced_depth(circuit, partition))
    return CompiledCircuit(circuit, partition, seq, absorbed, lowered, sched)


# ---------------------------------------------------------------------------
# runtime with magic-state supply


@dataclass
class RuntimeEstimate:
    cycles: int
    measurement_cycles: int
    stall_cycles: int
    empty_requests: int
    small_cache_bound: float
    large_cache_bound: float

    def to_dict(self) -> dict[str, object]:
        return dict(self.__dict__)


def estimate_runtime(schedule: MeasurementSchedule, t_magic: float, cache_capacity: int | None = None,
                     prefilled: bool = True) -> RuntimeEstimate:
    """Simulate per-block magic caches against the schedule.

    Each block's cache refills continuously at one state per ``t_magic``
    cycles. A request on an empty cache stalls the whole machine for
    ``t_magic`` cycles, after which the fresh state is consumed.
    ``cache_capacity=None`` means unbounded.
    """
    nblocks = 1 + max((b for layer in schedule.layers for m in layer for b in m.blocks), default=0)
    cap = math.inf if cache_capacity is None else cache_capacity
    level = [cap if prefilled else 0] * nblocks
    next_ready: list[float | None] = [None if prefilled or t_magic <= 0 else float(t_magic)] * nblocks
    offset = 0.0
    stalls = 0
    for t, layer in enumerate(schedule.layers):
        now = t + offset
        for m in layer:
            if not m.consumes_magic:
                continue
            b = min(m.blocks)
            while next_ready[b] is not None and level[b] < cap and next_ready[b] <= now:
                level[b] += 1
                next_ready[b] = next_ready[b] + t_magic if level[b] < cap else None
            if level[b] > 0 or t_magic <= 0:
                if level[b] > 0:
                    level[b] -= 1
            else:
                stalls += 1
                offset += t_magic
                now = t + offset
            if next_ready[b] is None and t_magic > 0 and level[b] < cap:
                next_ready[b] = now + t_magic
    stall_cycles = int(round(stalls * t_magic))
    depth = schedule.depth
    return RuntimeEstimate(
        cycles=depth + stall_cycles,
        measurement_cycles=depth,
        stall_cycles=stall_cycles,
        empty_requests=stalls,
        small_cache_bound=depth * max(1.0, float(t_magic)),
        large_cache_bound=schedule.depth_bound + stalls * float(t_magic),
    )


# ---------------------------------------------------------------------------
# state-vector execution


def _pauli_action(psi: np.ndarray, p: PauliOperator, idx: np.ndarray) -> np.ndarray:
    """P|psi> with P = sign · i^{|x&z|} X^x Z^z."""
    zpar = np.bitwise_count(idx & p.z) & 1 if hasattr(np, "bitwise_count") else \
        np.array([bin(int(i) & p.z).count("1") & 1 for i in idx])
    phase = (1j ** (bin(p.x & p.z).count("1") % 4)) * p.sign
    out = np.empty_like(psi)
    out[idx ^ p.x] = phase * np.where(zpar, -1.0, 1.0) * psi
    return out


def _projected(psi: np.ndarray, p: PauliOperator, outcome: int, idx: np.ndarray) -> np.ndarray:
    return 0.5 * (psi + outcome * _pauli_action(psi, p, idx))


def _expectation(psi: np.ndarray, p: PauliOperator, idx: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, _pauli_action(psi, p, idx))))


def _reset_slot(psi: np.ndarray, q: int, idx: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Replace an unentangled qubit ``q`` by the single-qubit ``state``."""
    bit = 1 << q
    low = psi[(idx & bit) == 0]
    high = psi[(idx & bit) != 0]
    data = low if np.linalg.norm(low) >= np.linalg.norm(high) else high
    data = data / np.linalg.norm(data)
    out = np.empty_like(psi)
    out[(idx & bit) == 0] = data * state[0]
    out[(idx & bit) != 0] = data * state[1]
    return out


_EIGEN = {
    ("Z", 1): np.array([1, 0], dtype=complex),
    ("Z", -1): np.array([0, 1], dtype=complex),
    ("X", 1): np.array([1, 1], dtype=complex) / math.sqrt(2),
    ("X", -1): np.array([1, -1], dtype=complex) / math.sqrt(2),
    ("Y", 1): np.array([1, 1j], dtype=complex) / math.sqrt(2),
    ("Y", -1): np.array([1, -1j], dtype=complex) / math.sqrt(2),
}
T_STATE = np.array([1, np.exp(1j * math.pi / 4)], dtype=complex) / math.sqrt(2)


def direct_distribution(circuit: Circuit) -> np.ndarray:
    """Exact outcome distribution of the final Z measurements by gate-by-gate simulation."""
    circuit = circuit.completed()
    n = circuit.num_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    s2 = 1 / math.sqrt(2)
    mats = {
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        "H": np.array([[s2, s2], [s2, -s2]], dtype=complex),
        "S": np.array([[1, 0], [0, 1j]], dtype=complex),
        "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
        "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
        "TDG": np.array([[1, 0], [0, np.exp(-1j * math.pi / 4)]], dtype=complex),
    }
    # axis n-1-q of the tensor holds qubit q so that the flat index has bit q = qubit q
    for g in circuit.body:
        if g.name == "CNOT":
            c, t = (n - 1 - q for q in g.qubits)
            sl = [slice(None)] * n
            sl[c] = 1
            sub = psi[tuple(sl)]
            t_axis = t if t < c else t - 1
            psi[tuple(sl)] = np.flip(sub, axis=t_axis)
        else:
            ax = n - 1 - g.qubits[0]
            psi = np.moveaxis(np.tensordot(mats[g.name], psi, axes=([1], [ax])), 0, ax)
    return np.abs(psi.reshape(-1)) ** 2


def _final_distribution(psi: np.ndarray, bases: Sequence[PauliOperator], idx: np.ndarray) -> np.ndarray:
    """Joint distribution of commuting independent Paulis by Walsh-Hadamard of product expectations."""
    k = len(bases)
    ntot = bases[0].n if bases else 0
    prods = [PauliOperator.identity(ntot)] * (1 << k)
    ev = np.zeros(1 << k)
    ev[0] = 1.0
    for s in range(1, 1 << k):
        low = s & -s
        q = low.bit_length() - 1
        prods[s] = prods[s ^ low] * bases[q]
        ev[s] = _expectation(psi, prods[s], idx)
    # p(b) = 2^-k Σ_S (-1)^{|b∧S|} E_S
    h = ev.copy()
    step = 1
    while step < len(h):
        for i in range(0, len(h), 2 * step):
            a = h[i:i + step].copy()
            b = h[i + step:i + 2 * step].copy()
            h[i:i + step] = a + b
            h[i + step:i + 2 * step] = a - b
        step *= 2
    return h / (1 << k)


@dataclass
class _RunState:
    psi: np.ndarray
    frame: PauliMap
    ancilla: dict[int, tuple[str, int]]
    prob: float


class CompiledExecutor:
    """Gadget-atomic execution of a schedule on K data qubits plus one ancilla and one magic slot."""

    def __init__(self, compiled: CompiledCircuit) -> None:
        self.c = compiled
        self.K = compiled.circuit.num_qubits
        self.n = self.K + 2
        self.anc = self.K
        self.mag = self.K + 1
        self.idx = np.arange(1 << self.n, dtype=np.int64)
        self.gadgets = compiled.schedule.gadgets

    def initial(self) -> _RunState:
        psi = np.zeros(1 << self.n, dtype=complex)
        psi[0] = 1.0
        return _RunState(psi, PauliMap(self.K), {b: ("Z", 1) for b in range(self.c.partition.num_blocks)}, 1.0)

    def _embed(self, p: PauliOperator) -> PauliOperator:
        return p.embed(self.n)

    def _single(self, q: int, letter: str) -> PauliOperator:
        return PauliOperator.single(self.n, q, letter)

    def gadget_branches(self, st: _RunState, g: Gadget) -> list[tuple[float, _RunState]]:
        """All outcome branches (with probability) of one gadget, corrections applied."""
        axis = st.frame.apply(g.rotation.axis)
        s = 1 if g.rotation.angle > 0 else -1
        out = []
        if g.is_magic:
            psi0 = _reset_slot(st.psi, self.mag, self.idx, T_STATE)
            joint = PauliOperator(self.n, axis.x, axis.z | (1 << self.mag), axis.sign)
            for m1 in (1, -1):
                p1 = _projected(psi0, joint, m1, self.idx)
                w1 = float(np.vdot(p1, p1).real)
                if w1 < 1e-14:
                    continue
                for m2 in (1, -1):
                    p2 = _projected(p1, self._single(self.mag, "X"), m2, self.idx)
                    w2 = float(np.vdot(p2, p2).real)
                    if w2 < 1e-14:
                        continue
                    frame = st.frame.copy()
                    # obtained exp(-iπ m1/8 P)·P^{[m2=-1]}; remaining Clifford error folded into the frame
                    if m1 != s:
                        frame.then_schrodinger(axis, Fraction(-s, 4))
                    if m2 == -1:
                        frame.then_pauli(axis)
                    out.append((w2, _RunState(p2 / math.sqrt(w2), frame, st.ancilla, st.prob * w2)))
            return out
        b0 = g.first.ancilla_block
        a_letter, b_letter, c_letter = g.ancilla_triple
        prev_letter, alpha = st.ancilla[b0]
        if prev_letter != a_letter:
            raise AssertionError("ancilla basis bookkeeping is out of sync")
        psi0 = _reset_slot(st.psi, self.anc, self.idx, _EIGEN[(a_letter, alpha)])
        q_anc = self._single(self.anc, b_letter)
        joint = PauliOperator(self.n, axis.x | q_anc.x, axis.z | q_anc.z, axis.sign)
        for m1 in (1, -1):
            p1 = _projected(psi0, joint, m1, self.idx)
            w1 = float(np.vdot(p1, p1).real)
            if w1 < 1e-14:
                continue
            for gamma in (1, -1):
                p2 = _projected(p1, self._single(self.anc, c_letter), gamma, self.idx)
                w2 = float(np.vdot(p2, p2).real)
                if w2 < 1e-14:
                    continue
                frame = st.frame.copy()
                if m1 * alpha * gamma == s:
                    frame.then_pauli(axis)
                anc = dict(st.ancilla)
                anc[b0] = (c_letter, gamma)
                out.append((w2, _RunState(p2 / math.sqrt(w2), frame, anc, st.prob * w2)))
        return out

    def final_distribution(self, st: _RunState) -> np.ndarray:
        bases = [self._embed(st.frame.apply(m.data)) for m in self.c.lowered.finals]
        return _final_distribution(st.psi, bases, self.idx)

    def branch_count_bound(self) -> int:
        return 4 ** len(self.gadgets)

    def exhaustive(self) -> np.ndarray:
        total = np.zeros(1 << self.K)

        def rec(i: int, st: _RunState) -> None:
            if i == len(self.gadgets):
                total[:] += st.prob * self.final_distribution(st)
                return
            for _, nxt in self.gadget_branches(st, self.gadgets[i]):
                rec(i + 1, nxt)

        rec(0, self.initial())
        return total

    def trajectory(self, rng: np.random.Generator) -> _RunState:
        st = self.initial()
        for g in self.gadgets:
            branches = self.gadget_branches(st, g)
            w = np.array([b[0] for b in branches])
            pick = rng.choice(len(branches), p=w / w.sum())
            st = branches[pick][1]
        return st


@dataclass
class VerificationReport:
    passed: bool
    mode: str  # exhaustive or sampled
    max_abs_error: float
    p_value: float | None
    trajectories: int
    samples: int
    branch_bound: int

    def to_dict(self) -> dict[str, object]:
        return dict(self.__dict__)


def verify_compilation(compiled: CompiledCircuit, max_qubits: int = 12, tolerance: float = 1e-9,
                       exhaustive_limit: int = 1 << 12, trajectories: int = 200, samples: int = 100_000,
                       alpha: float = 1e-3, seed: int | None = 0) -> VerificationReport:
    """Compare the compiled measurement program with direct state-vector execution.

    Small programs are enumerated over every gadget branch. Larger ones run
    sampled trajectories; each trajectory's conditional output distribution
    must match the oracle to ``tolerance`` and the pooled final samples are
    chi-square tested.
    """
    from scipy.stats import chisquare

    ex = CompiledExecutor(compiled)
    if ex.n > max_qubits:
        raise ValueError(f"verification needs {ex.n} qubits, cap is {max_qubits}")
    ref = direct_distribution(compiled.circuit)
    bound = ex.branch_count_bound()
    if bound <= exhaustive_limit:
        got = ex.exhaustive()
        err = float(np.max(np.abs(got - ref)))
        return VerificationReport(err <= tolerance, "exhaustive", err, None, 0, 0, bound)
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(ref))
    per = max(1, samples // trajectories)
    err = 0.0
    for _ in range(trajectories):
        st = ex.trajectory(rng)
        dist = ex.final_distribution(st)
        err = max(err, float(np.max(np.abs(dist - ref))))
        p = np.clip(dist, 0, None)
        counts += rng.multinomial(per, p / p.sum())
    total = counts.sum()
    expected = ref * total
    keep = expected > 0
    if np.any(counts[~keep] > 0):
        return VerificationReport(False, "sampled", err, 0.0, trajectories, int(total), bound)
    obs, exp = counts[keep], expected[keep]
    # pool sparse bins so that every expected count is at least 5
    order = np.argsort(exp)
    pooled_o, pooled_e = [], []
    acc_o = acc_e = 0.0
    for i in order:
        acc_o += obs[i]
        acc_e += exp[i]
        if acc_e >= 5:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if pooled_e:
            pooled_o[-1] += acc_o
            pooled_e[-1] += acc_e
        else:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
    if len(pooled_e) < 2:
        pval = 1.0
    else:
        pooled_e_arr = np.array(pooled_e) * (sum(pooled_o) / sum(pooled_e))
        pval = float(chisquare(pooled_o, pooled_e_arr).pvalue)
    return VerificationReport(err <= tolerance and pval > alpha, "sampled", err, pval, trajectories, int(total), bound)


# ---------------------------------------------------------------------------
# random circuits


def random_compatible_circuit(partition: BlockPartition, block_map: BlockMap, num_gates: int,
                              rng: np.random.Generator, t_fraction: float = 0.3,
                              cross_fraction: float = 0.25) -> Circuit:
    n = partition.num_qubits
    gates = []
    cross_pairs = [(a, b) for a in range(n) for b in range(n)
                   if a != b and partition.block_of[a] != partition.block_of[b]
                   and block_map.adjacent(partition.block_of[a], partition.block_of[b])]
    in_pairs = [(a, b) for a in range(n) for b in range(n) if a != b and partition.block_of[a] == partition.block_of[b]]
    singles = ["H", "S", "SDG", "X", "Y", "Z"]
    while len(gates) < num_gates:
        r = rng.random()
        if r < t_fraction:
            gates.append(Gate(str(rng.choice(["T", "TDG"], p=[0.8, 0.2])), (int(rng.integers(n)),)))
        elif r < t_fraction + cross_fraction and cross_pairs:
            a, b = cross_pairs[rng.integers(len(cross_pairs))]
            gates.append(Gate("CNOT", (a, b)))
        elif r < t_fraction + cross_fraction + 0.1 and in_pairs:
            a, b = in_pairs[rng.integers(len(in_pairs))]
            gates.append(Gate("CNOT", (a, b)))
        else:
            gates.append(Gate(str(rng.choice(singles)), (int(rng.integers(n)),)))
    gates += [Gate("MZ", (q,)) for q in range(n)]
    return Circuit(n, tuple(gates))
