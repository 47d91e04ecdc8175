"""Stabilizer simulation of the measurement protocol and fault search.

The tableau keeps, next to every stabilizer row, a bitmask of the measurement
events its sign depends on. Deterministic measurements therefore expose their
detector (the set of earlier events they must agree with) for free, which is
what the fault search is built on.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import f2la
from .paulicode import PauliOperator, StabilizerCode, logical_basis
from .surgery import MergedCode


def _sp_vec(p: PauliOperator) -> int:
    """Row used so that (row · v) mod 2 is the symplectic product with v."""
    return p.z | (p.x << p.n)


# ---------------------------------------------------------------------------
# tableau


@dataclass(frozen=True)
class MeasureResult:
    outcome: int
    deterministic: bool
    depends_on: int  # event mask the outcome is a function of (deterministic case)


class Tableau:
    def __init__(self, n: int, stabs: list[PauliOperator], destabs: list[PauliOperator],
                 deps: list[int] | None = None) -> None:
        self.n = n
        self.stabs = stabs
        self.destabs = destabs
        self.deps = deps if deps is not None else [0] * n

    @classmethod
    def zero_state(cls, n: int) -> "Tableau":
        return cls(n, [PauliOperator.single(n, q, "Z") for q in range(n)],
                   [PauliOperator.single(n, q, "X") for q in range(n)])

    @classmethod
    def from_stabilizers(cls, ops: Sequence[PauliOperator], n: int | None = None) -> "Tableau":
        """State stabilized by ``ops`` (independent and commuting; the rest is |0>-filled)."""
        if n is None:
            if not ops:
                raise ValueError("qubit count needed for an empty stabilizer list")
            n = ops[0].n
        t = cls.zero_state(n)
        rows: list[int] = []
        for j, op in enumerate(ops):
            if op.n != n:
                raise ValueError("stabilizers act on different qubit counts")
            res = t.measure(op, forced=1)
            rows.append(_sp_vec(op))
            if res.outcome != 1:
                fix = f2la.solve_ints(rows, 2 * n, 1 << j)
                if fix is None:
                    raise ValueError(f"stabilizer {j} is dependent on the earlier ones with the opposite sign")
                t.apply_pauli(PauliOperator.from_symplectic(n, fix))
        return t

    def copy(self) -> "Tableau":
        return Tableau(self.n, list(self.stabs), list(self.destabs), list(self.deps))

    def clear_dependencies(self) -> None:
        self.deps = [0] * self.n

    def extend_plus(self, m: int) -> "Tableau":
        """Append ``m`` qubits prepared in |+>."""
        n2 = self.n + m
        stabs = [s.embed(n2) for s in self.stabs] + [PauliOperator.single(n2, self.n + j, "X") for j in range(m)]
        destabs = [d.embed(n2) for d in self.destabs] + [PauliOperator.single(n2, self.n + j, "Z") for j in range(m)]
        return Tableau(n2, stabs, destabs, list(self.deps) + [0] * m)

    def apply_pauli(self, p: PauliOperator, condition: int = 0, fire: bool = True) -> None:
        """Apply ``p``; with a condition mask the dependency masks are updated too."""
        for i, s in enumerate(self.stabs):
            if not s.commutes(p):
                if fire:
                    self.stabs[i] = s.negate()
                self.deps[i] ^= condition

    def _group_product(self, p: PauliOperator) -> tuple[PauliOperator, int]:
        acc = PauliOperator.identity(self.n)
        dep = 0
        for i, d in enumerate(self.destabs):
            if not d.commutes(p):
                acc = acc * self.stabs[i]
                dep ^= self.deps[i]
        return acc, dep

    def measure(self, p: PauliOperator, forced: int | None = None, rng: np.random.Generator | None = None,
                event: int | None = None) -> MeasureResult:
        if p.n != self.n:
            raise ValueError(f"operator on {p.n} qubits, tableau has {self.n}")
        pivot = next((i for i, s in enumerate(self.stabs) if not s.commutes(p)), None)
        if pivot is None:
            acc, dep = self._group_product(p)
            if acc.x != p.x or acc.z != p.z:
                raise AssertionError("commuting operator is not in the stabilizer group")
            return MeasureResult(acc.sign * p.sign, True, dep)
        if forced is None:
            forced = 1 if rng is None else int(rng.choice([1, -1]))
        if forced not in (1, -1):
            raise ValueError("forced outcome must be +1 or -1")
        sp = self.stabs[pivot]
        dp = self.deps[pivot]
        for i in range(self.n):
            if i != pivot and not self.stabs[i].commutes(p):
                self.stabs[i] = self.stabs[i] * sp
                self.deps[i] ^= dp
            if i != pivot and not self.destabs[i].commutes(p):
                self.destabs[i] = self.destabs[i] * sp
        self.destabs[pivot] = sp
        self.stabs[pivot] = p.with_sign(p.sign * forced)
        self.deps[pivot] = 0 if event is None else 1 << event
        return MeasureResult(forced, False, 0)

    def expectation(self, p: PauliOperator) -> int:
        """+1 or -1 if ``p`` is (up to sign) a stabilizer, 0 otherwise."""
        if any(not s.commutes(p) for s in self.stabs):
            return 0
        acc, _ = self._group_product(p)
        return acc.sign * p.sign

    def validate(self) -> None:
        for i in range(self.n):
            for j in range(self.n):
                if i != j:
                    if not self.stabs[i].commutes(self.stabs[j]) or not self.destabs[i].commutes(self.destabs[j]):
                        raise AssertionError("tableau rows fail to commute")
                    if not self.stabs[i].commutes(self.destabs[j]):
                        raise AssertionError("stabilizer anticommutes with a foreign destabilizer")
            if self.stabs[i].commutes(self.destabs[i]):
                raise AssertionError(f"row {i}: stabilizer commutes with its destabilizer")

    def group(self) -> tuple[tuple[int, int, int], ...]:
        return canonical_group(self.stabs)

    def restricted_group(self, qubits: Sequence[int]) -> tuple[tuple[int, int, int], ...]:
        """Canonical generators of the stabilizer subgroup supported inside ``qubits``."""
        return restricted_group(self.stabs, qubits)


def measure_pauli(t: Tableau, p: PauliOperator, forced: int | None = None,
                  rng: np.random.Generator | None = None) -> tuple[int, bool, Tableau]:
    out = t.copy()
    res = out.measure(p, forced, rng)
    return res.outcome, res.deterministic, out


def _rref_paulis(ops: Sequence[PauliOperator], order: Sequence[int]) -> list[PauliOperator]:
    rows = list(ops)
    out: list[PauliOperator] = []
    for col in order:
        idx = next((i for i, r in enumerate(rows) if (r.symplectic() >> col) & 1), None)
        if idx is None:
            continue
        piv = rows.pop(idx)
        rows = [r * piv if (r.symplectic() >> col) & 1 else r for r in rows]
        out = [r * piv if (r.symplectic() >> col) & 1 else r for r in out]
        out.append(piv)
    if any(r.x or r.z for r in rows):
        raise AssertionError("elimination left a nonzero row")
    return out


def canonical_group(ops: Sequence[PauliOperator]) -> tuple[tuple[int, int, int], ...]:
    """Reduced echelon generators (x, z, sign); equal tuples mean equal signed groups."""
    if not ops:
        return ()
    n = ops[0].n
    red = _rref_paulis(ops, range(2 * n))
    return tuple(sorted((r.x, r.z, r.sign) for r in red))


def restricted_group(ops: Sequence[PauliOperator], qubits: Sequence[int]) -> tuple[tuple[int, int, int], ...]:
    if not ops:
        return ()
    n = ops[0].n
    inside = sorted(set(qubits))
    outside = [q for q in range(n) if q not in set(inside)]
    order = [q for q in outside] + [q + n for q in outside] + [q for q in inside] + [q + n for q in inside]
    red = _rref_paulis(ops, order)
    out_mask = sum(1 << q for q in outside)
    kept = [r.restrict(inside) for r in red if not ((r.x | r.z) & out_mask)]
    return canonical_group(kept) if kept else ()


# ---------------------------------------------------------------------------
# code states


def code_state(code: StabilizerCode, logicals: Sequence[PauliOperator] = ()) -> Tableau:
    """Code state additionally stabilized by the given commuting logicals."""
    return Tableau.from_stabilizers(list(code.generators) + list(logicals), code.n)


def random_code_state(code: StabilizerCode, rng: np.random.Generator) -> tuple[Tableau, list[PauliOperator]]:
    """Code state fixed by k random commuting logicals with random signs."""
    basis = logical_basis(code)
    span = f2la.IncrementalSpan()
    for g in code.generators:
        span.add(g.symplectic())
    chosen: list[PauliOperator] = []
    while len(chosen) < code.k:
        v = 0
        for b, c in zip(basis, rng.integers(0, 2, size=len(basis))):
            if c:
                v ^= b.symplectic()
        cand = PauliOperator.from_symplectic(code.n, v, int(rng.choice([1, -1])))
        if not v or not all(cand.commutes(c) for c in chosen) or span.contains(v):
            continue
        span.add(v)
        chosen.append(cand)
    return code_state(code, chosen), chosen


def is_code_state(t: Tableau, code: StabilizerCode, qubits: Sequence[int] | None = None) -> bool:
    qubits = list(range(code.n)) if qubits is None else list(qubits)
    for g in code.generators:
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((g.x >> i) & 1) << q
            z |= ((g.z >> i) & 1) << q
        if t.expectation(PauliOperator(t.n, x, z, g.sign)) != 1:
            return False
    return True


# ---------------------------------------------------------------------------
# measurement protocol


@dataclass
class ProtocolTrace:
    epsilon: tuple[int, ...]
    sigma: int
    cycle_outcomes: tuple[int, ...]
    deformed_outcomes: tuple[int, ...]
    omega: tuple[int, ...]
    corrections: tuple[int, ...]
    anchor: int

    def log_lines(self) -> list[str]:
        lines = [f"merge vertex {v} {e:+d}" for v, e in enumerate(self.epsilon)]
        lines += [f"merge cycle {c} {o:+d}" for c, o in enumerate(self.cycle_outcomes)]
        lines += [f"merge deformed {i} {o:+d}" for i, o in enumerate(self.deformed_outcomes)]
        lines.append(f"merge sigma {self.sigma:+d}")
        lines += [f"split edge {e} {o:+d}" for e, o in enumerate(self.omega)]
        lines += [f"correct qubit {q}" for q in self.corrections]
        return lines


def tree_paths(merged: MergedCode) -> tuple[int, dict[int, list[int]]]:
    """Anchor vertex (lowest index) and BFS-tree edge paths from it to every port vertex."""
    g = merged.graph
    anchor = 0
    parent: dict[int, tuple[int, int]] = {anchor: (-1, -1)}
    queue = deque([anchor])
    while queue:
        u = queue.popleft()
        for e in g.incident[u]:
            w = g.other(e, u)
            if w not in parent:
                parent[w] = (u, e)
                queue.append(w)
    paths = {}
    for q, v in merged.port.items():
        if v not in parent:
            raise ValueError("measurement graph is disconnected")
        path = []
        while v != anchor:
            u, e = parent[v]
            path.append(e)
            v = u
        paths[q] = path[::-1]
    return anchor, paths


def _letter_on(l: PauliOperator, q: int, n: int) -> PauliOperator:
    return PauliOperator(n, l.x & (1 << q), l.z & (1 << q))




def _protocol_steps(merged: MergedCode) -> list[tuple[str, int, PauliOperator]]:
    steps = [("vertex", v, a) for v, a in enumerate(merged.vertex_checks)]
    steps += [("cycle", c, b) for c, b in enumerate(merged.cycle_checks)]
    steps += [("deformed", i, s) for i, s in enumerate(merged.deformed_checks)]
    ntot = merged.n_total
    steps += [("split", e, PauliOperator.single(ntot, merged.edge_qubit(e), "X")) for e in range(merged.n_edges)]
    return steps


def _finish(merged: MergedCode, t: Tableau, record: dict[str, list[int]]) -> ProtocolTrace:
    anchor, paths = tree_paths(merged)
    corrections = []
    for q in sorted(paths):
        par = 1
        for e in paths[q]:
            par *= record["split"][e]
        if par == -1:
            t.apply_pauli(_letter_on(merged.logical, q, merged.n_total))
            corrections.append(q)
    eps = tuple(record["vertex"])
    sigma = int(np.prod(eps)) if eps else 1
    return ProtocolTrace(eps, sigma, tuple(record["cycle"]), tuple(record["deformed"]), tuple(record["split"]),
                         tuple(corrections), anchor)


def run_protocol(code: StabilizerCode, merged: MergedCode, initial: Tableau,
                 forced: Sequence[int] | None = None, rng: np.random.Generator | None = None,
                 check_initial: bool = True) -> tuple[ProtocolTrace, Tableau]:
    """Initialize edges in |+>, merge, split by X measurements, correct.

    ``forced`` supplies outcomes for the random measurements in order; any
    shortfall is filled from ``rng`` (or +1 without one).
    """
    if initial.n != code.n:
        raise ValueError("initial state must live on the code qubits only")
    if check_initial and not is_code_state(initial, code):
        raise ValueError("initial state is not a code state")
    t = initial.extend_plus(merged.n_edges)
    queue = list(forced or [])
    record: dict[str, list[int]] = {"vertex": [], "cycle": [], "deformed": [], "split": []}
    for kind, _, op in _protocol_steps(merged):
        nxt = queue.pop(0) if queue else None
        res = t.measure(op, forced=nxt, rng=rng)
        if res.deterministic and nxt is not None:
            queue.insert(0, nxt)
        record[kind].append(res.outcome)
    trace = _finish(merged, t, record)
    return trace, t


def count_random_draws(merged: MergedCode, initial: Tableau) -> int:
    t = initial.extend_plus(merged.n_edges)
    draws = 0
    for _, _, op in _protocol_steps(merged):
        if not t.measure(op, forced=1).deterministic:
            draws += 1
    return draws


@dataclass(frozen=True)
class Branch:
    probability: float
    sigma: int
    code_group: tuple[tuple[int, int, int], ...]
    trace: ProtocolTrace | None = None


def enumerate_protocol_branches(code: StabilizerCode, merged: MergedCode, initial: Tableau) -> list[Branch]:
    """Every randomness branch of the protocol by depth-first search over the tableau."""
    steps = _protocol_steps(merged)
    out: list[Branch] = []
    code_qubits = list(range(code.n))

    def rec(i: int, t: Tableau, record: dict[str, list[int]], prob: float) -> None:
        if i == len(steps):
            trace = _finish(merged, t, record)
            out.append(Branch(prob, trace.sigma, t.restricted_group(code_qubits), trace))
            return
        kind, _, op = steps[i]
        probe = t.copy()
        res = probe.measure(op, forced=1)
        if res.deterministic:
            record[kind].append(res.outcome)
            rec(i + 1, t, record, prob)
            record[kind].pop()
            return
        for val in (1, -1):
            branch = probe if val == 1 else t.copy()
            if val == -1:
                branch.measure(op, forced=-1)
            record[kind].append(val)
            rec(i + 1, branch, record, prob / 2)
            record[kind].pop()

    rec(0, initial.extend_plus(merged.n_edges), {"vertex": [], "cycle": [], "deformed": [], "split": []}, 1.0)
    return out


def direct_measurement_branches(initial: Tableau, l: PauliOperator) -> list[Branch]:
    out = []
    probe = initial.copy()
    res = probe.measure(l, forced=1)
    if res.deterministic:
        return [Branch(1.0, res.outcome, probe.group())]
    for val in (1, -1):
        t = initial.copy()
        t.measure(l, forced=val)
        out.append(Branch(0.5, val, t.group()))
    return out


@dataclass
class OracleReport:
    branches: int
    distribution_protocol: dict[int, float]
    distribution_direct: dict[int, float]
    mismatched_groups: int

    @property
    def equivalent(self) -> bool:
        keys = set(self.distribution_protocol) | set(self.distribution_direct)
        same = all(abs(self.distribution_protocol.get(s, 0.0) - self.distribution_direct.get(s, 0.0)) < 1e-12
                   for s in keys)
        return same and self.mismatched_groups == 0


def oracle_check(code: StabilizerCode, merged: MergedCode, initial: Tableau) -> OracleReport:
    """Protocol versus direct projective measurement of the logical, over all branches."""
    prot = enumerate_protocol_branches(code, merged, initial)
    direct = {b.sigma: b for b in direct_measurement_branches(initial, merged.logical)}
    dist_p: dict[int, float] = {}
    bad = 0
    for b in prot:
        dist_p[b.sigma] = dist_p.get(b.sigma, 0.0) + b.probability
        ref = direct.get(b.sigma)
        if ref is None or ref.code_group != b.code_group:
            bad += 1
    dist_d = {s: b.probability for s, b in direct.items()}
    return OracleReport(len(prot), dist_p, dist_d, bad)


def sampled_oracle_check(code: StabilizerCode, merged: MergedCode, initial: Tableau, samples: int,
                         rng: np.random.Generator) -> OracleReport:
    """Random protocol runs, each compared with the direct measurement branch of the same outcome."""
    direct = {b.sigma: b for b in direct_measurement_branches(initial, merged.logical)}
    code_qubits = list(range(code.n))
    dist_p: dict[int, float] = {}
    bad = 0
    for _ in range(samples):
        trace, t = run_protocol(code, merged, initial.copy(), rng=rng, check_initial=False)
        dist_p[trace.sigma] = dist_p.get(trace.sigma, 0.0) + 1.0 / samples
        ref = direct.get(trace.sigma)
        if ref is None or ref.code_group != t.restricted_group(code_qubits):
            bad += 1
    dist_d = {s: b.probability for s, b in direct.items()}
    return OracleReport(samples, dist_p, dist_d, bad)


# ---------------------------------------------------------------------------
# phenomenological fault model


@dataclass(frozen=True)
class Event:
    index: int
    stage: str  # pre, merge, split, post, final
    round: int
    label: str
    op: PauliOperator
    time: int
    noisy: bool = True


@dataclass(frozen=True)
class FaultLocation:
    kind: str  # "pauli" or "flip"
    time: int
    qubit: int = -1
    letter: str = ""
    event: int = -1

    def describe(self, events: Sequence[Event]) -> str:
        if self.kind == "flip":
            ev = events[self.event]
            return f"flip {ev.stage}[{ev.round}] {ev.label}"
        return f"{self.letter}{self.qubit} before step {self.time}"


@dataclass
class SpaceTimeModel:
    merged: MergedCode
    rounds: tuple[int, int, int]
    events: list[Event]
    detectors: list[int]  # event masks
    sigma_events: int
    steps: list[tuple[str, int, list[int]]]  # (stage, round, event ids) per time step
    error_qubits: list[list[int]]  # per time step, qubits that may fault before it
    split_paths: dict[int, int]  # edge -> code symplectic toggle applied when its outcome flips
    locations: list[FaultLocation] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.merged.n_code


def _correction_toggles(merged: MergedCode) -> dict[int, int]:
    _, paths = tree_paths(merged)
    n = merged.n_code
    tog: dict[int, int] = {e: 0 for e in range(merged.n_edges)}
    for q, path in paths.items():
        v = _letter_on(merged.logical, q, n).symplectic()
        for e in path:
            tog[e] ^= v
    return tog


def build_spacetime_model(merged: MergedCode, rounds: tuple[int, int, int] | int | None = None) -> SpaceTimeModel:
    """Schedule, detectors and fault locations for pre/merge/post rounds plus an ideal final round."""
    code = merged.base
    if rounds is None:
        rounds = 3
    if isinstance(rounds, int):
        rounds = (rounds, rounds, rounds)
    r_pre, r_merge, r_post = rounds
    if r_merge < 1:
        raise ValueError("at least one merged round is needed")
    n, ntot = code.n, merged.n_total
    events: list[Event] = []
    steps: list[tuple[str, int, list[int]]] = []
    err_q: list[list[int]] = []
    code_q = list(range(n))
    edge_q = list(range(n, ntot))

    def add_round(stage: str, r: int, ops: list[tuple[str, PauliOperator]], qubits: list[int], noisy: bool = True) -> None:
        ids = []
        for label, op in ops:
            ids.append(len(events))
            events.append(Event(len(events), stage, r, label, op, len(steps), noisy))
        steps.append((stage, r, ids))
        err_q.append(qubits)

    code_ops = [(f"S{i}", s.embed(ntot)) for i, s in enumerate(code.generators)]
    merged_ops = ([(f"A{v}", a) for v, a in enumerate(merged.vertex_checks)]
                  + [(f"B{c}", b) for c, b in enumerate(merged.cycle_checks)]
                  + [(f"D{i}", s) for i, s in enumerate(merged.deformed_checks)])
    for r in range(r_pre):
        add_round("pre", r, code_ops, code_q)
    for r in range(r_merge):
        add_round("merge", r, merged_ops, code_q + edge_q)
    add_round("split", 0, [(f"X{e}", PauliOperator.single(ntot, n + e, "X")) for e in range(merged.n_edges)], edge_q)
    for r in range(r_post):
        add_round("post", r, code_ops, code_q)
    add_round("final", 0, code_ops, code_q, noisy=False)

    # symbolic run: detectors are the dependency masks of deterministic outcomes
    rng = np.random.default_rng(0)
    basis = logical_basis(code)
    partner = next(b for b in basis if not b.commutes(merged.logical))
    t = Tableau.from_stabilizers(list(code.generators) + [partner], n)
    t.clear_dependencies()
    t = t.extend_plus(merged.n_edges)
    toggles = _correction_toggles(merged)
    detectors: list[int] = []
    split_ids: list[int] = []
    for stage, r, ids in steps:
        for i in ids:
            res = t.measure(events[i].op, rng=rng, event=i)
            if res.deterministic:
                detectors.append(res.depends_on ^ (1 << i))
        if stage == "split":
            split_ids = ids
            _, paths = tree_paths(merged)
            for q, path in paths.items():
                cond = 0
                for e in path:
                    cond ^= 1 << split_ids[e]
                t.apply_pauli(_letter_on(merged.logical, q, ntot), condition=cond, fire=False)
    sigma_events = 0
    first_merge = next(ids for stage, r, ids in steps if stage == "merge")
    for i in first_merge[:len(merged.vertex_checks)]:
        sigma_events |= 1 << i
    model = SpaceTimeModel(merged, (r_pre, r_merge, r_post), events, detectors, sigma_events, steps, err_q,
                           {e: toggles[e] for e in range(merged.n_edges)})
    locs = []
    for ti, qs in enumerate(err_q):
        for q in qs:
            for letter in "XYZ":
                locs.append(FaultLocation("pauli", ti, q, letter))
    for ev in events:
        if ev.noisy:
            locs.append(FaultLocation("flip", ev.time, event=ev.index))
    model.locations = locs
    return model


@dataclass(frozen=True)
class FaultEffect:
    detectors: int
    sigma: int
    frame: int  # symplectic vector on code qubits


def fault_effect(model: SpaceTimeModel, loc: FaultLocation) -> FaultEffect:
    """Linear effect of one fault: flipped detectors, σ flip and residual code frame.

    A flipped split outcome toggles the correction, which is tracked as an
    extra Pauli on the code qubits from the next step on.
    """
    merged = model.merged
    n, ntot = merged.n_code, merged.n_total
    toggles = {e: PauliOperator.from_symplectic(n, v).embed(ntot) for e, v in model.split_paths.items()}
    cur = PauliOperator.identity(ntot)
    flipped = 0
    if loc.kind == "flip":
        ev = model.events[loc.event]
        flipped = 1 << loc.event
        if ev.stage == "split":
            cur = toggles[int(ev.label[1:])]
        start = ev.time + 1
    else:
        cur = PauliOperator.single(ntot, loc.qubit, loc.letter)
        start = loc.time
    for ti in range(start, len(model.steps)):
        stage, _, ids = model.steps[ti]
        tog = PauliOperator.identity(ntot)
        for i in ids:
            if not model.events[i].op.commutes(cur):
                flipped ^= 1 << i
                if stage == "split":
                    tog = PauliOperator(ntot, tog.x ^ toggles[int(model.events[i].label[1:])].x,
                                        tog.z ^ toggles[int(model.events[i].label[1:])].z)
        cur = PauliOperator(ntot, cur.x ^ tog.x, cur.z ^ tog.z)
    mask = (1 << n) - 1
    frame = PauliOperator(n, cur.x & mask, cur.z & mask).symplectic()
    det = 0
    for j, dmask in enumerate(model.detectors):
        if (dmask & flipped).bit_count() & 1:
            det |= 1 << j
    sigma = (model.sigma_events & flipped).bit_count() & 1
    return FaultEffect(det, sigma, frame)


def _harmless_span(model: SpaceTimeModel) -> f2la.IncrementalSpan:
    span = f2la.IncrementalSpan()
    for g in model.merged.base.generators:
        span.add(g.symplectic())
    span.add(model.merged.logical.symplectic())
    return span


@dataclass
class FaultSearchResult:
    searched_weight: int
    violation: tuple[FaultLocation, ...] | None
    verdict: str
    complete: bool
    num_locations: int
    combinations: int
    description: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "searched_weight": self.searched_weight,
            "verdict": self.verdict,
            "complete": self.complete,
            "num_locations": self.num_locations,
            "combinations": self.combinations,
            "violation": [loc.__dict__ for loc in self.violation] if self.violation else None,
            "description": self.description,
        }, indent=1)


def fault_search(code: StabilizerCode, merged: MergedCode, rounds: tuple[int, int, int] | int | None = None,
                 max_weight: int = 1, max_combinations: int = 20_000_000,
                 model: SpaceTimeModel | None = None) -> FaultSearchResult:
    """Exhaustive search for an undetected fault set that flips σ or the output logical state."""
    if code is not merged.base and code.generators != merged.base.generators:
        raise ValueError("merged code was built on a different base code")
    model = model or build_spacetime_model(merged, rounds)
    locs = model.locations
    effects = [fault_effect(model, loc) for loc in locs]
    harmless = _harmless_span(model)
    by_det: dict[int, list[int]] = {}
    for i, ef in enumerate(effects):
        by_det.setdefault(ef.detectors, []).append(i)
    combos = 0

    def bad(sig: int, frame: int) -> bool:
        return bool(sig) or not harmless.contains(frame)

    reached = 0
    for w in range(1, max_weight + 1):
        for head in itertools.combinations(range(len(locs)), w - 1):
            det = sig = frame = 0
            for i in head:
                det ^= effects[i].detectors
                sig ^= effects[i].sigma
                frame ^= effects[i].frame
            combos += 1
            last_min = head[-1] + 1 if head else 0
            for j in by_det.get(det, ()):
                if j < last_min:
                    continue
                combos += 1
                if bad(sig ^ effects[j].sigma, frame ^ effects[j].frame):
                    found = head + (j,)
                    return FaultSearchResult(w, tuple(locs[i] for i in found), f"violation at weight {w}", True,
                                             len(locs), combos, [locs[i].describe(model.events) for i in found])
            if combos > max_combinations:
                return FaultSearchResult(reached, None,
                                         f"no violation up to weight {reached} (budget exhausted during weight {w})",
                                         False, len(locs), combos)
        reached = w
    return FaultSearchResult(reached, None, f"no violation up to weight {reached}", True, len(locs), combos)


@dataclass
class ReplayResult:
    fired_detectors: list[int]
    sigma_flipped: bool
    final_state_changed: bool
    sigma_random: bool = False  # σ varies with measurement randomness on an eigenstate of the logical

    @property
    def undetected_logical(self) -> bool:
        return not self.fired_detectors and (self.sigma_flipped or self.final_state_changed or self.sigma_random)


def _run_schedule(model: SpaceTimeModel, initial: Tableau, faults: Sequence[FaultLocation],
                  draws: list[int] | None) -> tuple[list[int], Tableau, list[int]]:
    merged = model.merged
    ntot = merged.n_total
    t = initial.extend_plus(merged.n_edges)
    paulis: dict[int, list[FaultLocation]] = {}
    flips = set()
    for f in faults:
        if f.kind == "pauli":
            paulis.setdefault(f.time, []).append(f)
        else:
            flips.add(f.event)
    outcomes = [0] * len(model.events)
    used: list[int] = []
    queue = list(draws or [])
    _, paths = tree_paths(merged)
    for ti, (stage, _, ids) in enumerate(model.steps):
        for f in paulis.get(ti, ()):
            t.apply_pauli(PauliOperator.single(ntot, f.qubit, f.letter))
        for i in ids:
            forced = queue.pop(0) if queue else None
            res = t.measure(model.events[i].op, forced=forced)
            if res.deterministic:
                if forced is not None:
                    queue.insert(0, forced)
            else:
                used.append(res.outcome)
            outcomes[i] = res.outcome * (-1 if i in flips else 1)
        if stage == "split":
            for q, path in paths.items():
                par = 1
                for e in path:
                    par *= outcomes[ids[e]]
                if par == -1:
                    t.apply_pauli(_letter_on(merged.logical, q, ntot))
    return outcomes, t, used


def logical_eigenstate(code: StabilizerCode, l: PauliOperator, rng: np.random.Generator | None = None) -> Tableau:
    """Code state stabilized by ``l`` and k-1 further commuting logicals."""
    basis = logical_basis(code)
    span = f2la.IncrementalSpan()
    for g in code.generators:
        span.add(g.symplectic())
    chosen = [l]
    span.add(l.symplectic())
    pool = list(basis)
    if rng is not None:
        pool = [pool[i] for i in rng.permutation(len(pool))]
    for b in itertools.chain(pool, (PauliOperator.from_symplectic(code.n, a.symplectic() ^ c.symplectic())
                                    for a, c in itertools.combinations(basis, 2))):
        if len(chosen) == code.k:
            break
        if all(b.commutes(c) for c in chosen) and span.add(b.symplectic()):
            chosen.append(b)
    if len(chosen) != code.k:
        raise AssertionError("could not complete a commuting logical set")
    return code_state(code, chosen)


def replay_faults(model: SpaceTimeModel, faults: Sequence[FaultLocation], initial: Tableau | None = None) -> ReplayResult:
    """Rerun the schedule on a tableau with the faults injected and compare with a clean run.

    The initial state must stabilize the measured logical so that σ is
    deterministic; by default such a state is built.
    """
    if initial is None:
        initial = logical_eigenstate(model.merged.base, model.merged.logical)
    elif initial.expectation(model.merged.logical) == 0:
        raise ValueError("replay needs an eigenstate of the measured logical")
    clean, t_clean, draws = _run_schedule(model, initial, (), None)
    noisy, t_noisy, _ = _run_schedule(model, initial, faults, draws)

    def parity(outs: list[int], mask: int) -> int:
        val = 1
        for i in range(len(outs)):
            if (mask >> i) & 1:
                val *= outs[i]
        return val

    fired = [j for j, m in enumerate(model.detectors) if parity(clean, m) != parity(noisy, m)]
    sig = parity(clean, model.sigma_events) != parity(noisy, model.sigma_events)
    n = model.n
    changed = t_clean.restricted_group(range(n)) != t_noisy.restricted_group(range(n))
    # on an eigenstate of the logical σ must not depend on any random draw
    expected = parity(clean, model.sigma_events)
    random_sigma = False
    for i in range(len(draws)):
        alt = list(draws)
        alt[i] = -alt[i]
        outs, _, _ = _run_schedule(model, initial, (), alt)
        if parity(outs, model.sigma_events) != expected:
            random_sigma = True
            break
    return ReplayResult(fired, sig, changed, random_sigma)


def corrupt_remove_vertex_check(merged: MergedCode, vertex: int) -> MergedCode:
    """Merged code with one vertex check deleted (for negative tests)."""
    checks = tuple(a for v, a in enumerate(merged.vertex_checks) if v != vertex)
    return MergedCode(merged.base, merged.logical, merged.graph, merged.port, merged.basis, checks,
                      merged.cycle_checks, merged.deformed_checks, merged.matchings)
