"""Merged measurement codes and measurement-graph construction.

Qubit layout of a merged code: code qubits ``0..n-1`` followed by one qubit per
graph edge (edge ``e`` is qubit ``n + e``). Check order: vertex checks, cycle
checks, then the deformed code checks.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import f2la
from .graphkit import (
    BasisPartition,
    BudgetExhausted,
    CycleBasis,
    ExpansionCertificate,
    MultiGraph,
    Thickened,
    build_expander,
    cellulate,
    decongest,
    fundamental_cycle_basis,
    greedy_partition,
    relative_expansion,
    thicken,
)
from .paulicode import (
    PauliOperator,
    StabilizerCode,
    anticommute_set,
    commutation_matrix,
    commutes,
    ldpc_profile,
)
from .seeding import split_seed


class MatchingError(ValueError):
    def __init__(self, check: int, message: str) -> None:
        super().__init__(message)
        self.check = check


class PortError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PortedGraph:
    graph: MultiGraph
    port: Mapping[int, int]
    basis: CycleBasis
    matching_hints: Mapping[int, frozenset[int]] = field(default_factory=dict)
    info: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        images = list(self.port.values())
        if len(set(images)) != len(images):
            raise PortError("port function is not injective")
        for q, v in self.port.items():
            if not 0 <= v < self.graph.num_vertices:
                raise PortError(f"qubit {q} ported to missing vertex {v}")

    def port_image(self) -> list[int]:
        return sorted(self.port.values())


# ---------------------------------------------------------------------------
# path matchings


def _spanning_forest(g: MultiGraph, allowed: Sequence[int]) -> tuple[list[int], list[int], list[int]]:
    """BFS forest on the allowed edges; returns (parent edge, visit order, component id)."""
    inc: dict[int, list[int]] = {}
    for e in sorted(allowed):
        u, v = g.edges[e]
        inc.setdefault(u, []).append(e)
        inc.setdefault(v, []).append(e)
    parent = [-2] * g.num_vertices
    comp = [-1] * g.num_vertices
    order: list[int] = []
    cid = 0
    for r in range(g.num_vertices):
        if parent[r] != -2:
            continue
        parent[r] = -1
        comp[r] = cid
        queue = deque([r])
        while queue:
            u = queue.popleft()
            order.append(u)
            for e in inc.get(u, []):
                w = g.other(e, u)
                if parent[w] == -2:
                    parent[w] = e
                    comp[w] = cid
                    queue.append(w)
        cid += 1
    return parent, order, comp


def path_matching(g: MultiGraph | PortedGraph, targets: Iterable[int], within: Iterable[int] | None = None) -> frozenset[int] | None:
    """Edge set with odd degree exactly on ``targets``, or None if none exists.

    A T-join is read off a spanning forest of the allowed edges and then
    shortened greedily by adding fundamental cycles whenever that removes edges.
    """
    if isinstance(g, PortedGraph):
        g = g.graph
    targets = set(targets)
    if not targets:
        return frozenset()
    if len(targets) % 2:
        return None
    allowed = sorted(set(range(g.num_edges)) if within is None else set(within))
    parent, order, comp = _spanning_forest(g, allowed)
    counts: dict[int, int] = {}
    for v in targets:
        counts[comp[v]] = counts.get(comp[v], 0) + 1
    if any(c % 2 for c in counts.values()):
        return None
    odd = {v: (v in targets) for v in range(g.num_vertices)}
    join = 0
    for v in reversed(order):
        if parent[v] >= 0 and odd[v]:
            join ^= 1 << parent[v]
            odd[g.other(parent[v], v)] ^= True
    # greedy shortening by fundamental cycles of the allowed subgraph
    tree = {p for p in parent if p >= 0}
    depth = [0] * g.num_vertices
    for v in order:
        if parent[v] >= 0:
            depth[v] = depth[g.other(parent[v], v)] + 1
    cycles = []
    for e in allowed:
        if e in tree:
            continue
        u, v = g.edges[e]
        m = 1 << e
        while u != v:
            if depth[u] < depth[v]:
                u, v = v, u
            m ^= 1 << parent[u]
            u = g.other(parent[u], u)
        cycles.append(m)
    improved = True
    while improved:
        improved = False
        for c in cycles:
            if (join ^ c).bit_count() < join.bit_count():
                join ^= c
                improved = True
    return frozenset(e for e in range(g.num_edges) if (join >> e) & 1)


def is_path_matching(g: MultiGraph, edges: Iterable[int], targets: Iterable[int]) -> bool:
    parity = [0] * g.num_vertices
    for e in edges:
        u, v = g.edges[e]
        parity[u] ^= 1
        parity[v] ^= 1
    t = set(targets)
    return all(bool(parity[v]) == (v in t) for v in range(g.num_vertices))


# ---------------------------------------------------------------------------
# merged code


@dataclass(frozen=True, eq=False)
class MergedCode:
    base: StabilizerCode
    logical: PauliOperator
    graph: MultiGraph
    port: Mapping[int, int]
    basis: CycleBasis
    vertex_checks: tuple[PauliOperator, ...]
    cycle_checks: tuple[PauliOperator, ...]
    deformed_checks: tuple[PauliOperator, ...]
    matchings: Mapping[int, frozenset[int]]

    @property
    def n_code(self) -> int:
        return self.base.n

    @property
    def n_edges(self) -> int:
        return self.graph.num_edges

    @property
    def n_total(self) -> int:
        return self.base.n + self.graph.num_edges

    def edge_qubit(self, e: int) -> int:
        return self.base.n + e

    def checks(self) -> list[PauliOperator]:
        return list(self.vertex_checks) + list(self.cycle_checks) + list(self.deformed_checks)

    def provenance(self) -> list[dict[str, object]]:
        out: list[dict[str, object]] = []
        inv_port = {v: q for q, v in self.port.items()}
        for v in range(len(self.vertex_checks)):
            out.append({"kind": "vertex", "vertex": v, "port_qubit": inv_port.get(v)})
        for i, c in enumerate(self.basis.cycles):
            out.append({"kind": "cycle", "cycle": i, "edges": sorted(c)})
        for i in range(len(self.deformed_checks)):
            out.append({"kind": "deformed", "check": i, "matching": sorted(self.matchings.get(i, ()))})
        return out

    def as_code(self, name: str = "") -> StabilizerCode:
        return StabilizerCode(self.n_total, tuple(self.checks()), name or f"{self.base.name}-merged")

    def vertex_product(self) -> PauliOperator:
        acc = PauliOperator.identity(self.n_total)
        for a in self.vertex_checks:
            acc = acc * a
        return acc

    def to_json(self) -> str:
        return json.dumps({
            "n_code": self.n_code,
            "n_edges": self.n_edges,
            "logical": self.logical.to_string(),
            "checks": [c.to_string() for c in self.checks()],
            "provenance": self.provenance(),
        }, indent=1)


def _vertex_checks(code: StabilizerCode, l: PauliOperator, g: MultiGraph, port: Mapping[int, int]) -> list[PauliOperator]:
    n = code.n
    ntot = n + g.num_edges
    at_vertex = {v: q for q, v in port.items()}
    anchor = port[min(port)] if port else -1
    checks = []
    for v in range(g.num_vertices):
        z = 0
        for e in g.incident[v]:
            z ^= 1 << (n + e)
        x = 0
        sign = 1
        q = at_vertex.get(v)
        if q is not None:
            x |= ((l.x >> q) & 1) << q
            z |= ((l.z >> q) & 1) << q
            if v == anchor:
                sign = l.sign
        checks.append(PauliOperator(ntot, x, z, sign))
    return checks


def build_merged_code(code: StabilizerCode, l: PauliOperator, pg: PortedGraph,
                      within: Mapping[int, Iterable[int]] | None = None) -> MergedCode:
    """Merged code for measuring ``l`` through the ported graph ``pg``.

    ``within`` optionally restricts the matching for check i to an edge set;
    ``pg.matching_hints`` are used verbatim when they are valid.
    """
    if l.n != code.n:
        raise ValueError("operator and code act on different qubit counts")
    for i, s in enumerate(code.generators):
        if not commutes(s, l):
            raise ValueError(f"operator anticommutes with check {i}")
    support = set(l.support())
    if set(pg.port) != support:
        raise PortError(f"port domain {sorted(pg.port)} differs from operator support {sorted(support)}")
    g = pg.graph
    n = code.n
    ntot = n + g.num_edges
    vertex_checks = _vertex_checks(code, l, g, pg.port)
    cycle_checks = []
    for c in pg.basis.cycles:
        x = 0
        for e in c:
            x ^= 1 << (n + e)
        cycle_checks.append(PauliOperator(ntot, x, 0))
    deformed = []
    matchings: dict[int, frozenset[int]] = {}
    for i, s in enumerate(code.generators):
        k = anticommute_set(s, l)
        lifted = s.embed(ntot)
        if not k:
            deformed.append(lifted)
            continue
        targets = {pg.port[q] for q in k}
        mu = pg.matching_hints.get(i)
        allowed = None if within is None or i not in within else set(within[i])
        if mu is None or not is_path_matching(g, mu, targets) or (allowed is not None and not set(mu) <= allowed):
            mu = path_matching(g, targets, allowed)
        if mu is None:
            raise MatchingError(i, f"no path matching for check {i} on vertices {sorted(targets)}")
        matchings[i] = frozenset(mu)
        x = 0
        for e in mu:
            x ^= 1 << (n + e)
        deformed.append(PauliOperator(ntot, lifted.x ^ x, lifted.z, lifted.sign))
    return MergedCode(code, l, g, dict(pg.port), pg.basis, tuple(vertex_checks), tuple(cycle_checks),
                      tuple(deformed), matchings)


@dataclass(frozen=True)
class MergedInvariants:
    all_commute: bool
    product_matches: bool
    logical_count: int
    expected_logical_count: int
    matchings_valid: bool

    @property
    def ok(self) -> bool:
        return (self.all_commute and self.product_matches and self.matchings_valid
                and self.logical_count == self.expected_logical_count)


def verify_merged_code(mc: MergedCode) -> MergedInvariants:
    checks = mc.checks()
    cm = commutation_matrix(checks)
    all_commute = not cm.any()
    prod = mc.vertex_product()
    target = mc.logical.embed(mc.n_total)
    product_matches = prod.x == target.x and prod.z == target.z and prod.sign == target.sign
    rank = f2la.rank_of_ints(c.symplectic() for c in checks)
    k_merged = mc.n_total - rank
    expected = mc.base.k - 1 if (mc.graph.is_connected() and mc.base.is_logical(mc.logical)) else mc.base.k
    matchings_valid = True
    for i, s in enumerate(mc.base.generators):
        k = anticommute_set(s, mc.logical)
        mu = mc.matchings.get(i, frozenset())
        if not is_path_matching(mc.graph, mu, {mc.port[q] for q in k}):
            matchings_valid = False
    return MergedInvariants(all_commute, product_matches, k_merged, expected, matchings_valid)


# ---------------------------------------------------------------------------
# desiderata


@dataclass(frozen=True)
class Bounds:
    max_degree: int = 16
    max_congestion: int = 4
    max_cycle_length: int = 8
    max_matching_size: int | None = None  # None: code's max check weight
    max_edge_load: int = 4
    max_edge_set_size: int | None = None  # extractor E_i size; None: unchecked
    max_edge_set_load: int | None = None

    def to_dict(self) -> dict[str, object]:
        return dict(self.__dict__)


def measurement_graph_bounds(code: StabilizerCode, expander_degree: int) -> Bounds:
    """Caps implied by the explicit measurement-graph construction.

    Degree: 2(Δ+δ+1). Congestion: a vertical edge above vertex v lies in one
    square per base edge at v, so max(3, Δ+δ). Lengths: squares and triangles.
    """
    p = ldpc_profile(code)
    return Bounds(
        max_degree=2 * (p.delta + expander_degree + 1),
        max_congestion=max(3, p.delta + expander_degree),
        max_cycle_length=4,
        max_matching_size=None,
        max_edge_load=4,
    )


@dataclass
class DesiderataReport:
    connected: bool
    max_degree: int
    basis_congestion: int
    basis_max_length: int
    matching_max_size: int
    matching_max_edge_load: int
    relative_beta: ExpansionCertificate
    port_ok: bool
    bounds: Bounds
    matching_cap: int
    edge_set_max_size: int = 0
    edge_set_max_load: int = 0
    matchings_exist: bool = True
    diagnostics: list[str] = field(default_factory=list)

    @property
    def flags(self) -> dict[str, bool]:
        b = self.bounds
        out = {
            "connected": self.connected,
            "port": self.port_ok,
            "degree": self.max_degree <= b.max_degree,
            "congestion": self.basis_congestion <= b.max_congestion,
            "cycle_length": self.basis_max_length <= b.max_cycle_length,
            "matching_size": self.matching_max_size <= self.matching_cap,
            "edge_load": self.matching_max_edge_load <= b.max_edge_load,
            "matchings_exist": self.matchings_exist,
            "expansion": self.relative_beta.value >= 1,
        }
        if b.max_edge_set_size is not None:
            out["edge_set_size"] = self.edge_set_max_size <= b.max_edge_set_size
        if b.max_edge_set_load is not None:
            out["edge_set_load"] = self.edge_set_max_load <= b.max_edge_set_load
        return out

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict[str, object]:
        beta = self.relative_beta.value
        return {
            "connected": self.connected,
            "max_degree": self.max_degree,
            "basis_congestion": self.basis_congestion,
            "basis_max_length": self.basis_max_length,
            "matching_max_size": self.matching_max_size,
            "matching_max_edge_load": self.matching_max_edge_load,
            "edge_set_max_size": self.edge_set_max_size,
            "edge_set_max_load": self.edge_set_max_load,
            "relative_beta": str(beta) if isinstance(beta, Fraction) else beta,
            "relative_beta_kind": self.relative_beta.kind,
            "port_ok": self.port_ok,
            "bounds": self.bounds.to_dict(),
            "flags": self.flags,
            "passed": self.passed,
            "diagnostics": list(self.diagnostics),
        }


def check_desiderata(pg: PortedGraph, code: StabilizerCode, l: PauliOperator, d: int,
                     bounds: Bounds | None = None, exact_cap: int = 22,
                     within: Mapping[int, Iterable[int]] | None = None) -> DesiderataReport:
    """Evaluate every graph desideratum; ``within`` confines check i's matching as in build_merged_code."""
    bounds = bounds or Bounds()
    g = pg.graph
    diags: list[str] = []
    support = set(l.support())
    port_ok = set(pg.port) == support
    if not port_ok:
        diags.append(f"port domain {sorted(pg.port)} does not match support {sorted(support)}")
    loads = [0] * g.num_edges
    sizes = [0]
    exist = True
    for i, s in enumerate(code.generators):
        k = anticommute_set(s, l)
        if not k:
            continue
        if not k <= set(pg.port):
            exist = False
            diags.append(f"check {i}: anticommuting qubits {sorted(k - set(pg.port))} are not ported")
            continue
        targets = {pg.port[q] for q in k}
        allowed = None if within is None or i not in within else set(within[i])
        mu = pg.matching_hints.get(i)
        if mu is None or not is_path_matching(g, mu, targets) or (allowed is not None and not set(mu) <= allowed):
            mu = path_matching(g, targets, allowed)
        if mu is None:
            exist = False
            diags.append(f"check {i}: no path matching")
            continue
        sizes.append(len(mu))
        for e in mu:
            loads[e] += 1
    omega = ldpc_profile(code).omega
    cap = bounds.max_matching_size if bounds.max_matching_size is not None else omega
    connected = g.is_connected()
    if not connected:
        diags.append(f"graph has {len(g.components)} components")
    image = [pg.port[q] for q in sorted(pg.port)]
    cert = relative_expansion(g, image, d, exact_cap=exact_cap, cap_ratio=Fraction(2)) if connected \
        else ExpansionCertificate(Fraction(0), "disconnected")
    if cert.value < 1:
        diags.append(f"relative expansion {cert.value} ({cert.kind}) below 1")
    return DesiderataReport(
        connected=connected,
        max_degree=g.max_degree(),
        basis_congestion=pg.basis.rho,
        basis_max_length=pg.basis.max_length,
        matching_max_size=max(sizes),
        matching_max_edge_load=max(loads, default=0),
        relative_beta=cert,
        port_ok=port_ok,
        bounds=bounds,
        matching_cap=cap,
        matchings_exist=exist,
        diagnostics=diags,
    )


# ---------------------------------------------------------------------------
# measurement-graph construction


@dataclass(frozen=True, eq=False)
class LayeredConstruction:
    """Shared output of the thicken-and-cellulate pipeline."""

    base: MultiGraph
    base_basis: CycleBasis
    partition: BasisPartition
    levels: int
    thickened: Thickened
    graph: MultiGraph
    basis: CycleBasis
    level_of_cycle: tuple[int, ...]
    expander_degree: int
    expander_certificate: ExpansionCertificate


def thicken_and_cellulate(base: MultiGraph, beta: Fraction, seed: int | None, expander_degree: int,
                          expander_cert: ExpansionCertificate, decongest_restarts: int = 16) -> LayeredConstruction:
    """Decongest ``base``, thicken by max(t, ceil(1/beta)) and cellulate part i on level i."""
    if base.num_vertices >= 2 and base.num_edges >= base.num_vertices:
        try:
            base_basis = decongest(base, seed, decongest_restarts)
        except BudgetExhausted:
            # tiny multigraphs can sit above the asymptotic bound; any basis will do here
            base_basis = fundamental_cycle_basis(base)
    else:
        base_basis = CycleBasis((), base.num_edges)
    part = greedy_partition(base_basis)
    levels = max(part.t, math.ceil(1 / Fraction(beta)), 1)
    th = thicken(base, levels)
    level_of = [0] * len(base_basis.cycles)
    for r, members in enumerate(part.parts):
        for i in members:
            level_of[i] = r
    g = th.graph
    cycles = []
    for r in range(th.levels - 1):
        for e, (u, v) in enumerate(base.edges):
            cycles.append(frozenset({th.hedge(e, r), th.hedge(e, r + 1), th.vedge(u, r), th.vedge(v, r)}))
    for i, c in enumerate(base_basis.cycles):
        lifted = frozenset(th.hedge(e, level_of[i]) for e in c)
        g, _, tris = cellulate(g, lifted)
        cycles.extend(tris)
    basis = CycleBasis(tuple(cycles), g.num_edges)
    basis.validate(g)
    return LayeredConstruction(base, base_basis, part, levels, th, g, basis, tuple(level_of),
                               expander_degree, expander_cert)


def build_measurement_graph(code: StabilizerCode, l: PauliOperator, beta: Fraction | int = 1,
                            seed: int | None = 0, expander_degree: int = 4) -> PortedGraph:
    for i, s in enumerate(code.generators):
        if not commutes(s, l):
            raise ValueError(f"operator anticommutes with check {i}")
    support = l.support()
    if not support:
        raise ValueError("operator has empty support")
    f = {q: i for i, q in enumerate(support)}
    nv = len(support)
    s_exp, s_dec = split_seed(seed, 2)
    edges: dict[tuple[int, int], int] = {}
    hint_pairs: dict[int, list[tuple[int, int]]] = {}
    for i, s in enumerate(code.generators):
        k = sorted(f[q] for q in anticommute_set(s, l))
        pairs = [(k[j], k[j + 1]) for j in range(0, len(k), 2)]
        hint_pairs[i] = pairs
        for p in pairs:
            edges.setdefault(p, len(edges))
    exp = build_expander(nv, Fraction(beta), expander_degree, s_exp)
    for u, v in exp.graph.edges:
        edges.setdefault((min(u, v), max(u, v)), len(edges))
    base = MultiGraph(nv, tuple(sorted(edges, key=edges.get)))
    lc = thicken_and_cellulate(base, Fraction(beta), s_dec, expander_degree, exp.certificate)
    th = lc.thickened
    hints = {i: frozenset(th.hedge(edges[p], 0) for p in pairs) for i, pairs in hint_pairs.items() if pairs}
    port = {q: th.vertex(f[q], 0) for q in support}
    p = ldpc_profile(code)
    bound = lc.levels * (p.delta + exp.graph.max_degree() + 1) * nv
    if lc.graph.num_edges > bound:
        raise AssertionError(f"edge count {lc.graph.num_edges} exceeds construction bound {bound}")
    info = {
        "levels": lc.levels,
        "t": lc.partition.t,
        "base_vertices": nv,
        "base_edges": base.num_edges,
        "base_rho": lc.base_basis.rho,
        "expander_degree": exp.graph.max_degree(),
        "expander_certificate": exp.certificate.kind,
        "edge_bound": bound,
    }
    return PortedGraph(lc.graph, port, lc.basis, hints, info)
