"""Extractors: measurement graphs ported on every code qubit.

An extractor is built once per code block. Any logical operator is then
measured by activating a subset of the fixed coupling edges between the code
and the extractor. Bridges join two extractors into one system.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graphkit import (
    BudgetExhausted,
    CycleBasis,
    ExpansionCertificate,
    MultiGraph,
    build_expander,
    relative_cheeger_exact,
    relative_cheeger_mincut,
    relative_expansion,
)
from .paulicode import (
    PauliOperator,
    StabilizerCode,
    anticommute_set,
    distance_bruteforce,
    ldpc_profile,
)
from .seeding import split_seed
from .surgery import (
    Bounds,
    DesiderataReport,
    MatchingError,
    MergedCode,
    PortedGraph,
    build_merged_code,
    is_path_matching,
    path_matching,
    thicken_and_cellulate,
)


class CapabilityError(ValueError):
    """The requested operator is outside what this extractor system can measure."""


@dataclass(frozen=True, eq=False)
class ExtractorGraph:
    code: StabilizerCode
    graph: MultiGraph
    port: Mapping[int, int]
    basis: CycleBasis
    check_edge_sets: tuple[frozenset[int], ...]
    info: Mapping[str, object] = field(default_factory=dict)
    distance: int | None = None

    def port_image(self) -> list[int]:
        return [self.port[q] for q in sorted(self.port)]

    def restricted(self, l: PauliOperator) -> PortedGraph:
        missing = [q for q in l.support() if q not in self.port]
        if missing:
            raise CapabilityError(f"qubits {missing} are not ported to this extractor")
        return PortedGraph(self.graph, {q: self.port[q] for q in l.support()}, self.basis)

    def port_subgraph_edges(self) -> list[int]:
        image = set(self.port.values())
        return [e for e, (u, v) in enumerate(self.graph.edges) if u in image and v in image]


def extractor_bounds(code: StabilizerCode, expander_degree: int, levels: int) -> Bounds:
    """Caps implied by the explicit extractor construction.

    Degree 4Δ + 2(δ+1); congestion max(3, 2Δ+δ) because a vertical edge lies in
    one square per base edge at its vertex; squares and triangles have length
    at most 4; E_i holds the ω edges of C(S_i) on every level.
    """
    p = ldpc_profile(code)
    return Bounds(
        max_degree=4 * p.delta + 2 * (expander_degree + 1),
        max_congestion=max(3, 2 * p.delta + expander_degree),
        max_cycle_length=4,
        max_matching_size=p.omega,
        max_edge_load=1,
        max_edge_set_size=p.omega * levels,
        max_edge_set_load=1,
    )


def _stabilizer_cycle(qubits: Sequence[int]) -> list[tuple[int, int]]:
    w = len(qubits)
    if w < 2:
        return []
    if w == 2:
        return [(qubits[0], qubits[1]), (qubits[0], qubits[1])]
    return [(qubits[j], qubits[(j + 1) % w]) for j in range(w)]


def _build(code: StabilizerCode, qubits: Sequence[int], beta: Fraction, seed: int | None,
           expander_degree: int, kind: str) -> ExtractorGraph:
    qubits = sorted(qubits)
    f = {q: i for i, q in enumerate(qubits)}
    nv = len(qubits)
    s_exp, s_dec = split_seed(seed, 2)
    edges: list[tuple[int, int]] = []
    cycle_edges: list[list[int]] = []
    for s in code.generators:
        local = [f[q] for q in s.support() if q in f]
        ids = []
        for u, v in _stabilizer_cycle(local):
            ids.append(len(edges))
            edges.append((u, v))
        cycle_edges.append(ids)
    exp = build_expander(nv, beta, expander_degree, s_exp)
    edges.extend(exp.graph.edges)
    base = MultiGraph(nv, tuple(edges))
    lc = thicken_and_cellulate(base, beta, s_dec, exp.graph.max_degree(), exp.certificate)
    th = lc.thickened
    edge_sets = tuple(frozenset(th.hedge(e, r) for e in ids for r in range(lc.levels)) for ids in cycle_edges)
    p = ldpc_profile(code)
    delta_exp = exp.graph.max_degree()
    bound = lc.levels * (2 * p.delta + delta_exp + 1) * nv
    if lc.graph.num_edges > bound:
        raise AssertionError(f"extractor has {lc.graph.num_edges} edges, construction bound is {bound}")
    info = {
        "kind": kind,
        "levels": lc.levels,
        "t": lc.partition.t,
        "base_vertices": nv,
        "base_edges": base.num_edges,
        "base_rho": lc.base_basis.rho,
        "expander_degree": delta_exp,
        "expander_certificate": exp.certificate.kind,
        "edge_bound": bound,
        "ported_qubits": list(qubits),
    }
    port = {q: th.vertex(f[q], 0) for q in qubits}
    dist = None
    if code.n <= 22 and code.k > 0:
        dist = int(distance_bruteforce(code))
    return ExtractorGraph(code, lc.graph, port, lc.basis, edge_sets, info, dist)


def build_extractor(code: StabilizerCode, beta: Fraction | int = 1, seed: int | None = 0,
                    expander_degree: int = 4) -> ExtractorGraph:
    if code.n == 0 or not code.generators:
        raise ValueError("extractor needs a nonempty code")
    return _build(code, range(code.n), Fraction(beta), seed, expander_degree, "full")


def build_partial_extractor(code: StabilizerCode, t_set: Iterable[int], beta: Fraction | int = 1,
                            seed: int | None = 0, expander_degree: int = 4) -> ExtractorGraph:
    t_set = sorted(set(t_set))
    if not t_set:
        raise ValueError("partial extractor needs a nonempty qubit set")
    if not all(0 <= q < code.n for q in t_set):
        raise ValueError("qubit set escapes the code")
    return _build(code, t_set, Fraction(beta), seed, expander_degree, "partial")


# ---------------------------------------------------------------------------
# desiderata


def check_extractor_desiderata(x: ExtractorGraph, code: StabilizerCode | None = None, d: int | None = None,
                               bounds: Bounds | None = None, exact_cap: int = 22,
                               max_port_mincut: int = 16) -> DesiderataReport:
    code = code or x.code
    if d is None:
        d = x.distance if x.distance is not None else 1
    if bounds is None:
        bounds = extractor_bounds(code, int(x.info.get("expander_degree", 4)), int(x.info.get("levels", 1)))
    g = x.graph
    diags: list[str] = []
    ported = set(x.port)
    port_ok = len(set(x.port.values())) == len(x.port)
    if x.info.get("kind") == "full" and ported != set(range(code.n)):
        port_ok = False
        diags.append("full extractor must port every code qubit")
    loads = [0] * g.num_edges
    for es in x.check_edge_sets:
        for e in es:
            loads[e] += 1
    max_size = 0
    exist = True
    for i, s in enumerate(code.generators):
        verts = [x.port[q] for q in s.support() if q in ported]
        es = x.check_edge_sets[i] if i < len(x.check_edge_sets) else frozenset()
        for r in range(2, len(verts) + 1, 2):
            for subset in itertools.combinations(verts, r):
                mu = path_matching(g, subset, es)
                if mu is None:
                    exist = False
                    diags.append(f"check {i}: no matching inside E_{i} for vertices {list(subset)}")
                    break
                max_size = max(max_size, len(mu))
            if not exist:
                break
    connected = g.is_connected()
    if not connected:
        diags.append(f"graph has {len(g.components)} components")
    if connected:
        cert = relative_expansion(g, x.port_image(), d, exact_cap=exact_cap, max_port_mincut=max_port_mincut,
                                  cap_ratio=Fraction(1))
    else:
        cert = ExpansionCertificate(Fraction(0), "disconnected")
    if cert.value < 1:
        diags.append(f"relative expansion {cert.value} ({cert.kind}) below 1")
    return DesiderataReport(
        connected=connected,
        max_degree=g.max_degree(),
        basis_congestion=x.basis.rho,
        basis_max_length=x.basis.max_length,
        matching_max_size=max_size,
        matching_max_edge_load=1 if max_size else 0,
        relative_beta=cert,
        port_ok=port_ok,
        bounds=bounds,
        matching_cap=bounds.max_matching_size if bounds.max_matching_size is not None else ldpc_profile(code).omega,
        edge_set_max_size=max((len(es) for es in x.check_edge_sets), default=0),
        edge_set_max_load=max(loads, default=0),
        matchings_exist=exist,
        diagnostics=diags,
    )


# ---------------------------------------------------------------------------
# EAC block inventory


Node = tuple[str, int]


@dataclass(frozen=True, eq=False)
class EacBlock:
    code: StabilizerCode
    xgraph: ExtractorGraph
    data_qubits: tuple[Node, ...]
    check_qubits: tuple[Node, ...]
    adjacency: frozenset[tuple[Node, Node]]
    coupling: frozenset[tuple[Node, Node]]

    @property
    def num_qubits(self) -> int:
        return len(self.data_qubits) + len(self.check_qubits)

    def degrees(self, include_coupling: bool = True) -> dict[Node, int]:
        deg: dict[Node, int] = {q: 0 for q in self.data_qubits + self.check_qubits}
        edges = list(self.adjacency) + (list(self.coupling) if include_coupling else [])
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def manifest(self) -> dict[str, object]:
        return {
            "code": self.code.name,
            "n": self.code.n,
            "data_qubits": len(self.data_qubits),
            "check_qubits": len(self.check_qubits),
            "fixed_edges": sorted([list(a) + list(b) for a, b in self.adjacency]),
            "coupling_edges": sorted([list(a) + list(b) for a, b in self.coupling]),
        }


def build_eac_tanner(code: StabilizerCode, x: ExtractorGraph) -> EacBlock:
    """Tanner inventory: data Q ∪ Q_X[e], checks H[S] ∪ H_X[v] ∪ H_X[C]."""
    g = x.graph
    data = tuple([("Q", q) for q in range(code.n)] + [("E", e) for e in range(g.num_edges)])
    checks = tuple([("S", i) for i in range(len(code.generators))] + [("V", v) for v in range(g.num_vertices)]
                   + [("C", c) for c in range(len(x.basis.cycles))])
    adj: set[tuple[Node, Node]] = set()
    for i, s in enumerate(code.generators):
        for q in s.support():
            adj.add((("S", i), ("Q", q)))
    for v in range(g.num_vertices):
        for e in g.incident[v]:
            adj.add((("V", v), ("E", e)))
    for c, cyc in enumerate(x.basis.cycles):
        for e in cyc:
            adj.add((("C", c), ("E", e)))
    coupling: set[tuple[Node, Node]] = set()
    for q, v in x.port.items():
        coupling.add((("V", v), ("Q", q)))
    for i, es in enumerate(x.check_edge_sets):
        for e in es:
            coupling.add((("S", i), ("E", e)))
    return EacBlock(code, x, data, checks, frozenset(adj), frozenset(coupling))


def instantiate_measurement(block: EacBlock, l: PauliOperator) -> tuple[MergedCode, frozenset[tuple[Node, Node]]]:
    code = block.code
    if not code.is_logical(l):
        raise ValueError("operator is not a logical of the block code")
    x = block.xgraph
    pg = x.restricted(l)
    within = {i: es for i, es in enumerate(x.check_edge_sets)}
    try:
        mc = build_merged_code(code, l, pg, within=within)
    except MatchingError as exc:
        raise CapabilityError(f"check {exc.check}: matching infeasible inside its edge set") from exc
    activated: set[tuple[Node, Node]] = {(("V", x.port[q]), ("Q", q)) for q in l.support()}
    for i, mu in mc.matchings.items():
        for e in mu:
            activated.add((("S", i), ("E", e)))
    if not activated <= block.coupling:
        raise AssertionError("activated edges escape the coupling inventory")
    return mc, frozenset(activated)


def skeleton(mc: MergedCode) -> tuple:
    """Extractor-internal part of a merged code: everything but the couplings."""
    n = mc.n_code
    code_mask = (1 << n) - 1
    vertex = tuple((a.x >> n, a.z >> n) for a in mc.vertex_checks)
    cycles = tuple((c.x, c.z) for c in mc.cycle_checks)
    deformed = tuple((s.x & code_mask, s.z & code_mask, s.sign) for s in mc.deformed_checks)
    return (mc.graph.edges, cycles, vertex, deformed)


def coupling_part(mc: MergedCode) -> tuple:
    n = mc.n_code
    code_mask = (1 << n) - 1
    vertex = tuple((a.x & code_mask, a.z & code_mask, a.sign) for a in mc.vertex_checks)
    deformed = tuple((s.x >> n, s.z >> n) for s in mc.deformed_checks)
    return (vertex, deformed)


# ---------------------------------------------------------------------------
# bridges


@dataclass(frozen=True)
class BridgeCycle:
    rungs: tuple[int, int]
    path1: tuple[int, ...]  # edge ids in the first graph
    path2: tuple[int, ...]  # edge ids in the second graph


@dataclass(frozen=True)
class Bridge:
    endpoints: tuple[tuple[int, int], ...]  # (vertex in first graph, vertex in second graph)
    cycles: tuple[BridgeCycle, ...]
    rho_before: int
    gamma_before: int
    rho_after: int
    length_after: int
    attempts: int

    @property
    def size(self) -> int:
        return len(self.endpoints)

    def qubit_cost(self) -> tuple[int, int]:
        """(data, check) qubits added: one per bridge edge, one per new cycle."""
        return len(self.endpoints), len(self.cycles)


@dataclass(frozen=True)
class SystemLink:
    first: int
    second: int
    bridge: Bridge


def compose_system(parts: Sequence[ExtractorGraph], links: Sequence[SystemLink], shared_code: bool = False,
                   name: str = "") -> ExtractorGraph:
    """Disjoint union of extractors plus bridge edges and bridge cycles.

    With ``shared_code`` all parts are partial extractors of one code and the
    qubit and check indices are shared; otherwise codes are stacked.
    """
    v_off, e_off, q_off = [], [], []
    nv = ne = nq = 0
    for x in parts:
        v_off.append(nv)
        e_off.append(ne)
        q_off.append(0 if shared_code else nq)
        nv += x.graph.num_vertices
        ne += x.graph.num_edges
        nq += x.code.n
    edges = []
    for x, vo in zip(parts, v_off):
        edges.extend((u + vo, v + vo) for u, v in x.graph.edges)
    cycles = []
    for x, eo in zip(parts, e_off):
        cycles.extend(frozenset(e + eo for e in c) for c in x.basis.cycles)
    for link in links:
        a, b = link.first, link.second
        base_id = len(edges)
        for u, w in link.bridge.endpoints:
            edges.append((u + v_off[a], w + v_off[b]))
        for bc in link.bridge.cycles:
            j, j1 = bc.rungs
            cyc = {base_id + j, base_id + j1}
            cyc.update(e + e_off[a] for e in bc.path1)
            cyc.update(e + e_off[b] for e in bc.path2)
            cycles.append(frozenset(cyc))
    graph = MultiGraph(nv, tuple(edges))
    if shared_code:
        code = parts[0].code
        port: dict[int, int] = {}
        for x, vo in zip(parts, v_off):
            for q, v in x.port.items():
                if q in port:
                    raise ValueError(f"qubit {q} is ported by two partial extractors")
                port[q] = v + vo
        m = len(code.generators)
        sets = [set() for _ in range(m)]
        for x, eo in zip(parts, e_off):
            for i, es in enumerate(x.check_edge_sets):
                sets[i].update(e + eo for e in es)
        check_sets = tuple(frozenset(s) for s in sets)
    else:
        code = parts[0].code
        for x in parts[1:]:
            code = code.direct_sum(x.code)
        port = {}
        for x, vo, qo in zip(parts, v_off, q_off):
            for q, v in x.port.items():
                port[q + qo] = v + vo
        check_sets = tuple(frozenset(e + eo for e in es) for x, eo in zip(parts, e_off) for es in x.check_edge_sets)
    dists = [x.distance for x in parts]
    dist = min(dists) if all(d is not None for d in dists) and not shared_code else None
    levels = max(int(x.info.get("levels", 1)) for x in parts)
    info = {
        "kind": "joined-partial" if shared_code else "joined",
        "parts": len(parts),
        "links": [(l.first, l.second, l.bridge.size) for l in links],
        "levels": levels,
        "expander_degree": max(int(x.info.get("expander_degree", 0)) for x in parts),
        "vertex_offsets": v_off,
        "edge_offsets": e_off,
        "name": name,
    }
    basis = CycleBasis(tuple(cycles), graph.num_edges)
    return ExtractorGraph(code, graph, port, basis, check_sets, info, dist)


def _bfs_path(g: MultiGraph, allowed: set[int] | None, s: int, t: int) -> list[int] | None:
    prev: dict[int, tuple[int, int]] = {s: (-1, -1)}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == t:
            break
        for e in g.incident[u]:
            if allowed is not None and e not in allowed:
                continue
            w = g.other(e, u)
            if w not in prev:
                prev[w] = (u, e)
                queue.append(w)
    if t not in prev:
        return None
    path = []
    v = t
    while v != s:
        u, e = prev[v]
        path.append(e)
        v = u
    return path[::-1]


def _endpoint_sequence(x: ExtractorGraph, d: int, rng: np.random.Generator) -> list[int]:
    """d port vertices, consecutive ones close in the port-induced subgraph.

    A randomized depth-first walk tries to find a simple path through d port
    vertices; failing that, the breadth-first order from a random start is used.
    """
    g = x.graph
    allowed = set(x.port_subgraph_edges())
    image = sorted(set(x.port.values()))
    adj: dict[int, list[int]] = {v: [] for v in image}
    for e in allowed:
        u, v = g.edges[e]
        adj[u].append(v)
        adj[v].append(u)
    start = int(rng.choice(image))
    # greedy randomized simple path with limited backtracking
    best: list[int] = []
    for _ in range(8):
        path = [start]
        seen = {start}
        while len(path) < d:
            options = [w for w in adj[path[-1]] if w not in seen]
            if not options:
                break
            w = int(rng.choice(options))
            path.append(w)
            seen.add(w)
        if len(path) > len(best):
            best = path
        if len(best) >= d:
            return best[:d]
        start = int(rng.choice(image))
    order = [start]
    seen = {start}
    queue = deque([start])
    while queue and len(order) < d:
        u = queue.popleft()
        nb = list(adj[u])
        rng.shuffle(nb)
        for w in nb:
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    for v in image:  # disconnected port subgraph: fill from the rest
        if len(order) >= d:
            break
        if v not in seen:
            order.append(v)
            seen.add(v)
    return order[:d]


def _connecting_path(x: ExtractorGraph, a: int, b: int) -> list[int]:
    allowed = set(x.port_subgraph_edges())
    path = _bfs_path(x.graph, allowed, a, b)
    if path is None:
        # helper route through the full extractor when the port subgraph splits
        path = _bfs_path(x.graph, None, a, b)
    if path is None:
        raise ValueError("extractor graph is disconnected")
    return path


def choose_bridge(x1: ExtractorGraph, x2: ExtractorGraph, d: int, rng: np.random.Generator) -> tuple[tuple[tuple[int, int], ...], tuple[BridgeCycle, ...]]:
    s1 = _endpoint_sequence(x1, d, rng)
    s2 = _endpoint_sequence(x2, d, rng)
    endpoints = tuple(zip(s1, s2))
    cycles = []
    for j in range(d - 1):
        p1 = _connecting_path(x1, s1[j], s1[j + 1])
        p2 = _connecting_path(x2, s2[j], s2[j + 1])
        cycles.append(BridgeCycle((j, j + 1), tuple(p1), tuple(p2)))
    return endpoints, tuple(cycles)


def joined_expansion(joined: ExtractorGraph, t: int, max_ports: int = 10) -> ExpansionCertificate | None:
    """β_t of the joined system on its full port set, exact when small enough."""
    ports = joined.port_image()
    if joined.graph.num_vertices <= 22:
        return ExpansionCertificate(relative_cheeger_exact(joined.graph, ports, t), "exact")
    if len(ports) <= max_ports:
        return relative_cheeger_mincut(joined.graph, ports, t)
    return None


def bridge_extractors(x1: ExtractorGraph, x2: ExtractorGraph, d: int | None = None, seed: int | None = 0,
                      max_retries: int = 32, shared_code: bool = False,
                      expansion_max_ports: int = 10) -> tuple[ExtractorGraph, Bridge]:
    """Join two extractors with d vertex-disjoint port-to-port edges.

    The joined basis is checked against congestion ≤ ρ+2 and length ≤ max(γ, 8)
    with ρ, γ taken over both input bases; failing choices are re-drawn.
    """
    if d is None:
        ds = [x.distance for x in (x1, x2) if x.distance is not None]
        d = min(ds) if ds else 1
    if d < 1 or d > min(len(x1.port), len(x2.port)):
        raise ValueError(f"bridge size {d} must be between 1 and the smaller port count")
    rho = max(x1.basis.rho, x2.basis.rho)
    gamma = max(x1.basis.max_length, x2.basis.max_length)
    rng = np.random.default_rng(seed)
    violations = []
    for attempt in range(1, max_retries + 1):
        endpoints, cycles = choose_bridge(x1, x2, d, rng)
        trial = Bridge(endpoints, cycles, rho, gamma, 0, 0, attempt)
        joined = compose_system([x1, x2], [SystemLink(0, 1, trial)], shared_code=shared_code)
        new = joined.basis.cycles[len(x1.basis.cycles) + len(x2.basis.cycles):]
        rho_after = joined.basis.rho
        len_after = joined.basis.max_length
        simple = all(_is_simple_cycle(joined.graph, c) for c in new)
        if rho_after <= rho + 2 and len_after <= max(gamma, 8) and simple:
            bridge = Bridge(endpoints, cycles, rho, gamma, rho_after, len_after, attempt)
            joined.basis.validate(joined.graph)
            info = dict(joined.info)
            t = min(x1.distance or d, x2.distance or d, d)
            info["bridge_t"] = t
            cert = joined_expansion(joined, t, expansion_max_ports)
            if cert is not None:
                info["bridge_expansion"] = str(cert.value)
                info["bridge_expansion_kind"] = cert.kind
            joined = ExtractorGraph(joined.code, joined.graph, joined.port, joined.basis, joined.check_edge_sets,
                                    info, joined.distance)
            return joined, bridge
        violations.append({"attempt": attempt, "rho": rho_after, "max_length": len_after, "simple": simple})
    raise BudgetExhausted(f"bridge bounds (rho ≤ {rho + 2}, length ≤ {max(gamma, 8)}) not met: {violations}")


def _is_simple_cycle(g: MultiGraph, c: frozenset[int]) -> bool:
    from .graphkit import cycle_vertex_order

    return cycle_vertex_order(g, c) is not None


def eac_manifest(block: EacBlock, ops: Sequence[PauliOperator] = ()) -> str:
    doc = block.manifest()
    recipes = {}
    for l in ops:
        _, act = instantiate_measurement(block, l)
        recipes[l.to_string()] = sorted([list(a) + list(b) for a, b in act])
    doc["activation_recipes"] = recipes
    doc["extractor"] = {k: v for k, v in block.xgraph.info.items()}
    return json.dumps(doc, indent=1, default=str)
