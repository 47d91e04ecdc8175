"""Graphs, cycle bases, thickening, cellulation and edge expansion.

Edges carry stable integer ids (their position in ``MultiGraph.edges``). Cycles
are frozensets of edge ids. Levels of a thickened graph are 0-based.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import f2la

INF = math.inf


class GraphError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# multigraph


@dataclass(frozen=True, eq=False)
class MultiGraph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        for i, (u, v) in enumerate(edges):
            if u == v:
                raise GraphError(f"edge {i} is a self-loop at {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise GraphError(f"edge {i} = ({u}, {v}) has an endpoint out of range")
        object.__setattr__(self, "edges", edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            inc[v].append(i)
        return tuple(tuple(x) for x in inc)

    def degree(self, v: int) -> int:
        return len(self.incident[v])

    def degrees(self) -> list[int]:
        return [len(x) for x in self.incident]

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    def other(self, e: int, v: int) -> int:
        a, b = self.edges[e]
        return b if a == v else a

    def neighbors(self, v: int) -> list[int]:
        return [self.other(e, v) for e in self.incident[v]]

    def add_edges(self, new: Iterable[tuple[int, int]]) -> "MultiGraph":
        return MultiGraph(self.num_vertices, self.edges + tuple(new))

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        seen = [False] * self.num_vertices
        comps = []
        for s in range(self.num_vertices):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for e in self.incident[u]:
                    w = self.other(e, u)
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        queue.append(w)
            comps.append(tuple(sorted(comp)))
        return tuple(comps)

    def is_connected(self) -> bool:
        return len(self.components) <= 1

    def incidence_matrix(self) -> f2la.BitMatrix:
        arr = np.zeros((self.num_vertices, self.num_edges), dtype=np.uint8)
        for i, (u, v) in enumerate(self.edges):
            arr[u, i] ^= 1
            arr[v, i] ^= 1
        return f2la.BitMatrix(arr)

    def incidence_row_ints(self) -> list[int]:
        rows = [0] * self.num_vertices
        for i, (u, v) in enumerate(self.edges):
            rows[u] ^= 1 << i
            rows[v] ^= 1 << i
        return rows

    def subgraph_edges(self, edge_ids: Iterable[int]) -> "MultiGraph":
        return MultiGraph(self.num_vertices, tuple(self.edges[e] for e in edge_ids))

    def simple(self) -> tuple["MultiGraph", list[int]]:
        """Drop parallel edges, keeping the first copy; returns kept ids."""
        seen: set[tuple[int, int]] = set()
        kept = []
        for i, (u, v) in enumerate(self.edges):
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                kept.append(i)
        return MultiGraph(self.num_vertices, tuple(self.edges[i] for i in kept)), kept

    def laplacian(self) -> np.ndarray:
        lap = np.zeros((self.num_vertices, self.num_vertices))
        for u, v in self.edges:
            lap[u, u] += 1
            lap[v, v] += 1
            lap[u, v] -= 1
            lap[v, u] -= 1
        return lap

    def boundary_size(self, subset: Iterable[int]) -> int:
        s = set(subset)
        return sum(1 for u, v in self.edges if (u in s) != (v in s))

    # I/O ------------------------------------------------------------------
    def to_text(self) -> str:
        return "\n".join([str(self.num_vertices)] + [f"{u} {v}" for u, v in self.edges]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MultiGraph":
        lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
        lines = [(i, ln) for i, ln in lines if ln]
        if not lines:
            raise GraphError("empty graph file")
        try:
            nv = int(lines[0][1])
            edges = []
            for lineno, ln in lines[1:]:
                u, v = ln.split()
                edges.append((int(u), int(v)))
        except ValueError as exc:
            raise GraphError(f"line {lineno if len(lines) > 1 else lines[0][0]}: malformed graph entry") from exc
        return cls(nv, tuple(edges))

    def to_dot(self, vertex_attrs: Mapping[int, Mapping[str, object]] | None = None,
               edge_attrs: Mapping[int, Mapping[str, object]] | None = None, name: str = "G") -> str:
        def fmt(attrs: Mapping[str, object] | None) -> str:
            if not attrs:
                return ""
            return " [" + ", ".join(f'{k}="{v}"' for k, v in attrs.items()) + "]"

        out = [f"graph {name} {{"]
        for v in range(self.num_vertices):
            out.append(f"  {v}{fmt((vertex_attrs or {}).get(v))};")
        for i, (u, v) in enumerate(self.edges):
            attrs = dict((edge_attrs or {}).get(i, {}))
            attrs.setdefault("id", i)
            out.append(f"  {u} -- {v}{fmt(attrs)};")
        out.append("}")
        return "\n".join(out) + "\n"


def read_graph(path: str | Path) -> MultiGraph:
    return MultiGraph.from_text(Path(path).read_text())


def complete_graph(n: int) -> MultiGraph:
    return MultiGraph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))


def path_graph(n: int) -> MultiGraph:
    return MultiGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> MultiGraph:
    return MultiGraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def random_connected_graph(n: int, extra_edges: int, rng: np.random.Generator) -> MultiGraph:
    """Random spanning tree plus ``extra_edges`` distinct extra edges (simple graph)."""
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        edges.add((min(a, b), max(a, b)))
    max_extra = n * (n - 1) // 2 - len(edges)
    target = len(edges) + min(extra_edges, max_extra)
    while len(edges) < target:
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
    return MultiGraph(n, tuple(sorted(edges)))


# ---------------------------------------------------------------------------
# cycles


def _mask(edge_ids: Iterable[int]) -> int:
    m = 0
    for e in edge_ids:
        m ^= 1 << e
    return m


def _unmask(m: int) -> frozenset[int]:
    out = []
    i = 0
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return frozenset(out)


@dataclass(frozen=True)
class CycleBasis:
    cycles: tuple[frozenset[int], ...]
    num_edges: int
    ordering: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "cycles", tuple(frozenset(c) for c in self.cycles))
        if not self.ordering:
            object.__setattr__(self, "ordering", tuple(range(len(self.cycles))))

    def __len__(self) -> int:
        return len(self.cycles)

    def edge_loads(self) -> list[int]:
        loads = [0] * self.num_edges
        for c in self.cycles:
            for e in c:
                loads[e] += 1
        return loads

    @property
    def rho(self) -> int:
        return max(self.edge_loads(), default=0)

    @property
    def max_length(self) -> int:
        return max((len(c) for c in self.cycles), default=0)

    def validate(self, g: MultiGraph) -> None:
        """Raise unless this is a cycle basis of ``g``."""
        if self.num_edges != g.num_edges:
            raise GraphError("basis edge count does not match graph")
        for i, c in enumerate(self.cycles):
            if not is_cycle(g, c):
                raise GraphError(f"basis element {i} is not in the cycle space")
        expected = g.num_edges - g.num_vertices + len(g.components)
        if len(self.cycles) != expected:
            raise GraphError(f"basis has {len(self.cycles)} cycles, cycle space has dimension {expected}")
        if f2la.rank_of_ints(_mask(c) for c in self.cycles) != len(self.cycles):
            raise GraphError("basis cycles are linearly dependent")


def is_cycle(g: MultiGraph, edge_set: Iterable[int]) -> bool:
    """Even degree at every vertex (membership in the incidence kernel)."""
    parity = [0] * g.num_vertices
    for e in edge_set:
        u, v = g.edges[e]
        parity[u] ^= 1
        parity[v] ^= 1
    return not any(parity)


def cycle_vertex_order(g: MultiGraph, cycle: Iterable[int]) -> list[int] | None:
    """Vertices of a simple cycle in traversal order, or None if not simple."""
    edges = list(cycle)
    if len(edges) < 2:
        return None
    inc: dict[int, list[int]] = {}
    for e in edges:
        u, v = g.edges[e]
        inc.setdefault(u, []).append(e)
        inc.setdefault(v, []).append(e)
    if any(len(x) != 2 for x in inc.values()):
        return None
    start = min(inc)
    e0 = min(inc[start], key=lambda e: (g.other(e, start), e))
    order = [start]
    cur, prev_e = g.other(e0, start), e0
    while cur != start:
        order.append(cur)
        a, b = inc[cur]
        nxt = b if a == prev_e else a
        cur, prev_e = g.other(nxt, cur), nxt
    return order if len(order) == len(inc) else None


def _bfs_forest(g: MultiGraph, roots: Sequence[int] | None = None,
                rng: np.random.Generator | None = None) -> tuple[list[int], list[int]]:
    """Return (parent edge per vertex, depth). Parent edge -1 marks a root."""
    parent = [-2] * g.num_vertices
    depth = [0] * g.num_vertices
    order = list(roots) if roots is not None else []
    order += [v for v in range(g.num_vertices) if v not in set(order)]
    for r in order:
        if parent[r] != -2:
            continue
        parent[r] = -1
        queue = deque([r])
        while queue:
            u = queue.popleft()
            inc = list(g.incident[u])
            if rng is not None:
                rng.shuffle(inc)
            for e in inc:
                w = g.other(e, u)
                if parent[w] == -2:
                    parent[w] = e
                    depth[w] = depth[u] + 1
                    queue.append(w)
    return parent, depth


def _tree_cycle(g: MultiGraph, parent: list[int], depth: list[int], e: int) -> int:
    u, v = g.edges[e]
    m = 1 << e
    while depth[u] > depth[v]:
        m ^= 1 << parent[u]
        u = g.other(parent[u], u)
    while depth[v] > depth[u]:
        m ^= 1 << parent[v]
        v = g.other(parent[v], v)
    while u != v:
        m ^= 1 << parent[u]
        u = g.other(parent[u], u)
        m ^= 1 << parent[v]
        v = g.other(parent[v], v)
    return m


def _fundamental_masks(g: MultiGraph, parent: list[int], depth: list[int]) -> list[int]:
    tree = {p for p in parent if p >= 0}
    return [_tree_cycle(g, parent, depth, e) for e in range(g.num_edges) if e not in tree]


def fundamental_cycle_basis(g: MultiGraph) -> CycleBasis:
    parent, depth = _bfs_forest(g)
    basis = CycleBasis(tuple(_unmask(m) for m in _fundamental_masks(g, parent, depth)), g.num_edges)
    basis.validate(g)
    return basis


def overlap_lists(cycles: Sequence[frozenset[int]]) -> list[set[int]]:
    by_edge: dict[int, list[int]] = {}
    for i, c in enumerate(cycles):
        for e in c:
            by_edge.setdefault(e, []).append(i)
    nbrs: list[set[int]] = [set() for _ in cycles]
    for members in by_edge.values():
        for i in members:
            nbrs[i].update(members)
    for i in range(len(cycles)):
        nbrs[i].discard(i)
    return nbrs


def _degeneracy_order(cycles: Sequence[frozenset[int]]) -> list[int]:
    """Place, at each step, a remaining cycle with fewest overlaps among the remaining ones."""
    nbrs = overlap_lists(cycles)
    remaining = set(range(len(cycles)))
    deg = {i: len(nbrs[i]) for i in remaining}
    order = []
    while remaining:
        i = min(remaining, key=lambda j: (deg[j], j))
        order.append(i)
        remaining.discard(i)
        for j in nbrs[i]:
            if j in remaining:
                deg[j] -= 1
    return order


def later_overlap_max(cycles: Sequence[frozenset[int]]) -> int:
    """Max over positions of the number of later cycles sharing an edge."""
    nbrs = overlap_lists(cycles)
    return max((sum(1 for j in nbrs[i] if j > i) for i in range(len(cycles))), default=0)


def decongestion_bound(g: MultiGraph) -> float:
    return math.log2(g.num_vertices) * math.log(2 * g.num_edges)


def decongest(g: MultiGraph, seed: int | None = 0, max_restarts: int = 16) -> CycleBasis:
    """Short, low-congestion ordered cycle basis, checked against the congestion bound.

    Candidates are the fundamental cycles of breadth-first trees rooted at every
    vertex plus those of a random spanning tree; the basis is chosen greedily by
    (length, random key). The order is a degeneracy order of the overlap graph.
    Both the congestion bound and the later-overlap bound are checked before
    returning; failing seeds are retried.
    """
    if g.num_vertices < 2:
        raise GraphError("decongest needs at least two vertices")
    if not g.is_connected():
        raise GraphError("decongest needs a connected graph")
    dim = g.num_edges - g.num_vertices + 1
    if dim == 0:
        return CycleBasis((), g.num_edges)
    rng = np.random.default_rng(seed)
    base_candidates: set[int] = set()
    for r in range(g.num_vertices):
        parent, depth = _bfs_forest(g, roots=[r])
        base_candidates.update(_fundamental_masks(g, parent, depth))
    bound = decongestion_bound(g)
    failures = []
    for attempt in range(max_restarts):
        parent, depth = _bfs_forest(g, roots=[int(rng.integers(g.num_vertices))], rng=rng)
        cands = list(base_candidates | set(_fundamental_masks(g, parent, depth)))
        keys = rng.random(len(cands))
        order = sorted(range(len(cands)), key=lambda i: (cands[i].bit_count(), keys[i]))
        span = f2la.IncrementalSpan()
        chosen: list[int] = []
        for i in order:
            if span.add(cands[i]):
                chosen.append(cands[i])
                if len(chosen) == dim:
                    break
        cycles = [_unmask(m) for m in chosen]
        perm = _degeneracy_order(cycles)
        cycles = [cycles[i] for i in perm]
        basis = CycleBasis(tuple(cycles), g.num_edges)
        rho = basis.rho
        overlap_cap = math.log2(g.num_vertices) * rho
        if rho < bound and later_overlap_max(cycles) <= overlap_cap:
            basis.validate(g)
            return basis
        failures.append((attempt, rho, later_overlap_max(cycles)))
    raise BudgetExhausted(
        f"decongest: no basis with rho < {bound:.3f} after {max_restarts} restarts; (attempt, rho, overlap) = {failures}"
    )


@dataclass(frozen=True)
class BasisPartition:
    parts: tuple[tuple[int, ...], ...]

    @property
    def t(self) -> int:
        return len(self.parts)


def greedy_partition(basis: CycleBasis) -> BasisPartition:
    """Reverse-order greedy split into parts of pairwise edge-disjoint cycles."""
    remaining = list(range(len(basis.cycles)))
    parts = []
    while remaining:
        used: set[int] = set()
        part = []
        for j in reversed(remaining):
            c = basis.cycles[j]
            if used.isdisjoint(c):
                part.append(j)
                used |= c
        chosen = set(part)
        remaining = [j for j in remaining if j not in chosen]
        parts.append(tuple(sorted(part)))
    return BasisPartition(tuple(parts))


# ---------------------------------------------------------------------------
# thickening and cellulation


@dataclass(frozen=True, eq=False)
class Thickened:
    base: MultiGraph
    levels: int
    graph: MultiGraph

    def vertex(self, v: int, r: int) -> int:
        return r * self.base.num_vertices + v

    def vertex_origin(self, x: int) -> tuple[int, int]:
        r, v = divmod(x, self.base.num_vertices)
        return v, r

    def hedge(self, e: int, r: int) -> int:
        return r * self.base.num_edges + e

    def vedge(self, v: int, r: int) -> int:
        """Vertical edge between (v, r) and (v, r + 1)."""
        return self.levels * self.base.num_edges + r * self.base.num_vertices + v

    def edge_origin(self, e: int) -> tuple[str, int, int]:
        nh = self.levels * self.base.num_edges
        if e < nh:
            r, b = divmod(e, self.base.num_edges)
            return ("h", b, r)
        if e < nh + (self.levels - 1) * self.base.num_vertices:
            r, v = divmod(e - nh, self.base.num_vertices)
            return ("v", v, r)
        return ("extra", e, -1)


def thicken(g: MultiGraph, levels: int) -> Thickened:
    if levels < 1:
        raise GraphError("levels must be at least 1")
    nv = g.num_vertices
    edges = []
    for r in range(levels):
        edges.extend((u + r * nv, v + r * nv) for u, v in g.edges)
    for r in range(levels - 1):
        edges.extend((v + r * nv, v + (r + 1) * nv) for v in range(nv))
    return Thickened(g, levels, MultiGraph(nv * levels, tuple(edges)))


def vertical_squares(th: Thickened) -> list[frozenset[int]]:
    out = []
    for r in range(th.levels - 1):
        for e, (u, v) in enumerate(th.base.edges):
            out.append(frozenset({th.hedge(e, r), th.hedge(e, r + 1), th.vedge(u, r), th.vedge(v, r)}))
    return out


def thickened_cycle_basis(th: Thickened, base_basis: CycleBasis, level_assignment: Mapping[int, int] | Sequence[int]) -> CycleBasis:
    cycles = vertical_squares(th)
    for i, c in enumerate(base_basis.cycles):
        r = level_assignment[i]
        if not 0 <= r < th.levels:
            raise GraphError(f"cycle {i} assigned to level {r} outside 0..{th.levels - 1}")
        cycles.append(frozenset(th.hedge(e, r) for e in c))
    basis = CycleBasis(tuple(cycles), th.graph.num_edges)
    basis.validate(th.graph)
    return basis


def cellulate(g: MultiGraph, cycle: Iterable[int]) -> tuple[MultiGraph, list[int], list[frozenset[int]]]:
    """Split a simple cycle into triangles with zig-zag chords.

    Returns (graph with chords appended, new edge ids, triangles). Cycles of
    length 2 or 3 are returned unchanged as a single piece.
    """
    cycle = frozenset(cycle)
    order = cycle_vertex_order(g, cycle)
    if order is None:
        raise GraphError("cellulate needs a simple cycle")
    w = len(order)
    if w <= 3:
        return g, [], [cycle]
    edge_of: dict[tuple[int, int], int] = {}
    for e in cycle:
        u, v = g.edges[e]
        edge_of[(u, v)] = e
        edge_of[(v, u)] = e
    # positions 1..w as in the zig-zag description; pos[i] is the vertex at i
    pos = {i + 1: order[i] for i in range(w)}

    def orig(a: int, b: int) -> int:
        return edge_of[(pos[a], pos[b])]

    lo, hi = 1, w - 1
    new_edges: list[tuple[int, int]] = []
    chord_ids: dict[tuple[int, int], int] = {}

    def chord(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in chord_ids:
            chord_ids[key] = g.num_edges + len(new_edges)
            new_edges.append((pos[a], pos[b]))
        return chord_ids[key]

    triangles: list[frozenset[int]] = []
    # first triangle (w, 1, w-1)
    triangles.append(frozenset({orig(w, 1), orig(w - 1, w), chord(1, w - 1)}))
    a, b = lo, hi  # current chord (a, b)
    take_low = True
    while True:
        if take_low:
            c = a + 1
            if c == b:
                break
            # triangle (a, b, c): edges (a, c) original, (c, b) chord or original
            side = orig(c, b) if c + 1 == b else chord(c, b)
            triangles.append(frozenset({orig(a, c), chord(a, b), side}))
            a = c
        else:
            c = b - 1
            if c == a:
                break
            side = orig(a, c) if a + 1 == c else chord(a, c)
            triangles.append(frozenset({orig(c, b), chord(a, b), side}))
            b = c
        take_low = not take_low
    out = g.add_edges(new_edges)
    return out, list(range(g.num_edges, g.num_edges + len(new_edges))), triangles


# ---------------------------------------------------------------------------
# edge expansion


def _cut_and_count_tables(g: MultiGraph, weight_mask: int | None = None,
                          max_vertices: int = 22) -> tuple[np.ndarray, np.ndarray]:
    """Boundary size and weighted popcount for every vertex subset (bit v = vertex v)."""
    n = g.num_vertices
    if n > max_vertices:
        raise GraphError(f"exact enumeration refused: {n} vertices exceeds cap {max_vertices}")
    size = 1 << n
    cut = np.zeros(size, dtype=np.int32)
    cnt = np.zeros(size, dtype=np.int16)
    adj = [[0] * n for _ in range(n)]
    for u, v in g.edges:
        adj[u][v] += 1
        adj[v][u] += 1
    deg = g.degrees()
    for v in range(n):
        half = 1 << v
        # number of v's edges into U for every U over vertices < v
        into = np.zeros(half, dtype=np.int32)
        for u in range(v):
            if adj[v][u]:
                into += adj[v][u] * ((np.arange(half) >> u) & 1)
        cut[half:2 * half] = cut[:half] + deg[v] - 2 * into
        w = 1 if weight_mask is None or (weight_mask >> v) & 1 else 0
        cnt[half:2 * half] = cnt[:half] + w
    return cut, cnt


def cheeger_exact(g: MultiGraph, max_vertices: int = 22) -> Fraction | float:
    n = g.num_vertices
    if n < 2:
        return INF
    cut, cnt = _cut_and_count_tables(g, None, max_vertices)
    den = np.minimum(cnt, n - cnt)
    best: Fraction | None = None
    for d in range(1, n // 2 + 1):
        sel = den == d
        if sel.any():
            cand = Fraction(int(cut[sel].min()), d)
            best = cand if best is None or cand < best else best
    return best if best is not None else INF


def relative_cheeger_exact(g: MultiGraph, port: Iterable[int], t: int, max_vertices: int = 22) -> Fraction | float:
    port = sorted(set(port))
    pmask = 0
    for p in port:
        pmask |= 1 << p
    cut, cnt = _cut_and_count_tables(g, pmask, max_vertices)
    np_ = len(port)
    den = np.minimum(np.minimum(cnt, np_ - cnt), t)
    best: Fraction | None = None
    for d in range(1, min(t, np_ // 2) + 1):
        sel = den == d
        if sel.any():
            cand = Fraction(int(cut[sel].min()), d)
            best = cand if best is None or cand < best else best
    return best if best is not None else INF


def port_pattern_mincuts(g: MultiGraph, port: Sequence[int], max_vertices: int = 24) -> np.ndarray:
    """For each subset pattern A of ``port`` (bit i = port[i]) the minimum boundary
    of a vertex set U with U ∩ port = A, by full enumeration."""
    cut, _ = _cut_and_count_tables(g, None, max_vertices)
    port = list(port)
    n = g.num_vertices
    lo = min(port)
    if port == list(range(lo, lo + len(port))):
        w = len(port)
        view = cut.reshape(1 << (n - lo - w), 1 << w, 1 << lo)
        return view.min(axis=(0, 2))
    idx = np.arange(1 << n)
    pat = np.zeros(1 << n, dtype=np.int64)
    for i, p in enumerate(port):
        pat |= ((idx >> p) & 1) << i
    out = np.full(1 << len(port), np.iinfo(np.int32).max, dtype=np.int64)
    np.minimum.at(out, pat, cut)
    return out


def relative_cheeger_from_patterns(table: np.ndarray, sub: Sequence[int], num_ports: int, t: int) -> Fraction | float:
    """β_t for the port subset ``sub`` (indices into the table's port list)."""
    sub_mask = 0
    for i in sub:
        sub_mask |= 1 << i
    k = len(sub)
    # min over full patterns s with s & sub_mask == a
    pats = np.arange(1 << num_ports)
    proj = pats & sub_mask
    reduced = np.full(1 << num_ports, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(reduced, proj, table.astype(np.int64))
    best: Fraction | None = None
    for a in range(1 << num_ports):
        if a & ~sub_mask:
            continue
        size = a.bit_count()
        d = min(t, size, k - size)
        if d <= 0:
            continue
        cand = Fraction(int(reduced[a]), d)
        best = cand if best is None or cand < best else best
    return best if best is not None else INF


# max-flow route -------------------------------------------------------------


def _max_flow(n: int, cap: dict[int, dict[int, int]], source: int, sink: int, limit: int | None) -> int:
    flow = 0
    residual = {u: dict(nb) for u, nb in cap.items()}
    while limit is None or flow < limit:
        prev = {source: source}
        queue = deque([source])
        found = False
        while queue and not found:
            u = queue.popleft()
            for w, c in residual.get(u, {}).items():
                if c > 0 and w not in prev:
                    prev[w] = u
                    if w == sink:
                        found = True
                        break
                    queue.append(w)
        if not found:
            break
        # bottleneck
        push = None
        w = sink
        while w != source:
            u = prev[w]
            c = residual[u][w]
            push = c if push is None else min(push, c)
            w = u
        if limit is not None:
            push = min(push, limit - flow)
        w = sink
        while w != source:
            u = prev[w]
            residual[u][w] -= push
            residual.setdefault(w, {})
            residual[w][u] = residual[w].get(u, 0) + push
            w = u
        flow += push
    return flow


def min_cut_between(g: MultiGraph, a: Iterable[int], b: Iterable[int], limit: int | None = None) -> int:
    """Minimum number of edges separating vertex sets a and b (capped at ``limit``)."""
    n = g.num_vertices
    src, snk = n, n + 1
    big = g.num_edges + 1
    cap: dict[int, dict[int, int]] = {}
    for u, v in g.edges:
        cap.setdefault(u, {})
        cap.setdefault(v, {})
        cap[u][v] = cap[u].get(v, 0) + 1
        cap[v][u] = cap[v].get(u, 0) + 1
    cap[src] = {x: big for x in a}
    for x in b:
        cap.setdefault(x, {})[snk] = big
    return _max_flow(n + 2, cap, src, snk, limit)


@dataclass(frozen=True)
class ExpansionCertificate:
    value: Fraction | float
    kind: str  # "exact", "mincut", "mincut-capped", "spectral-lower-bound", "trivial"

    def at_least(self, target: Fraction | float) -> bool:
        return self.value >= target


def relative_cheeger_mincut(g: MultiGraph, port: Iterable[int], t: int,
                            cap_ratio: Fraction | None = None) -> ExpansionCertificate:
    """Exact β_t(G, P) as a minimum over port bipartitions of max-flow min cuts.

    With ``cap_ratio`` set, flows stop at ``cap_ratio * denominator`` so the
    result is min(β, cap_ratio) and is labelled as capped when it hits the cap.
    """
    port = sorted(set(port))
    k = len(port)
    if k < 2 or t < 1:
        return ExpansionCertificate(INF, "trivial")
    best: Fraction | None = None
    first, rest = port[0], port[1:]
    for mask in range(0, 1 << (k - 1)):
        a = [first] + [rest[i] for i in range(k - 1) if (mask >> i) & 1]
        if len(a) == k:
            continue
        b = [p for p in port if p not in set(a)]
        d = min(t, len(a), len(b))
        limit = None
        if cap_ratio is not None:
            limit = math.ceil(cap_ratio * d)
        if best is not None:
            bound = math.ceil(best * d)
            limit = bound if limit is None else min(limit, bound)
        f = min_cut_between(g, a, b, limit)
        cand = Fraction(f, d)
        if best is None or cand < best:
            best = cand
    assert best is not None
    if cap_ratio is not None and best >= cap_ratio:
        return ExpansionCertificate(Fraction(cap_ratio), "mincut-capped")
    return ExpansionCertificate(best, "mincut")


def spectral_cheeger_lower_bound(g: MultiGraph) -> float:
    """λ₂(L)/2, a lower bound on the edge Cheeger constant."""
    if g.num_vertices < 2:
        return INF
    vals = np.linalg.eigvalsh(g.laplacian())
    return float(vals[1]) / 2.0


def relative_expansion(g: MultiGraph, port: Iterable[int], t: int, exact_cap: int = 22,
                       max_port_mincut: int = 16, cap_ratio: Fraction | None = None) -> ExpansionCertificate:
    """β_t(G, P) by the cheapest exact route available, else a spectral lower bound."""
    port = sorted(set(port))
    if len(port) < 2 or t < 1:
        return ExpansionCertificate(INF, "trivial")
    if g.num_vertices <= exact_cap:
        return ExpansionCertificate(relative_cheeger_exact(g, port, t, exact_cap), "exact")
    if len(port) <= max_port_mincut:
        return relative_cheeger_mincut(g, port, t, cap_ratio)
    # relative expansion with port P and cap t is at least the plain Cheeger constant
    return ExpansionCertificate(spectral_cheeger_lower_bound(g), "spectral-lower-bound")


# ---------------------------------------------------------------------------
# expanders


@dataclass(frozen=True)
class Expander:
    graph: MultiGraph
    certificate: ExpansionCertificate
    attempts: int


def build_expander(n: int, target_beta: Fraction | float = 1, max_degree: int = 4,
                   seed: int | None = 0, max_restarts: int = 64, exact_cap: int = 22) -> Expander:
    """Sparse graph on n vertices with certified Cheeger constant ≥ target_beta.

    Unions of random Hamiltonian cycles of growing count are tried until the
    certificate holds. Exact enumeration certifies n ≤ exact_cap; larger n use
    the spectral bound.
    """
    if n < 1:
        raise GraphError("expander needs at least one vertex")
    if n == 1:
        return Expander(MultiGraph(1, ()), ExpansionCertificate(INF, "trivial"), 0)
    if n == 2:
        g = MultiGraph(2, ((0, 1),))
        return Expander(g, ExpansionCertificate(Fraction(1), "exact"), 0)
    rng = np.random.default_rng(seed)
    attempts = 0
    max_cycles = max(1, max_degree // 2)
    for cycles in range(1, max_cycles + 1):
        for _ in range(max_restarts):
            attempts += 1
            edges: set[tuple[int, int]] = set()
            for c in range(cycles):
                perm = list(range(n)) if c == 0 and attempts == 1 else [int(x) for x in rng.permutation(n)]
                for i in range(n):
                    a, b = perm[i], perm[(i + 1) % n]
                    edges.add((min(a, b), max(a, b)))
            g = MultiGraph(n, tuple(sorted(edges)))
            if g.max_degree() > max_degree:
                continue
            if n <= exact_cap:
                cert = ExpansionCertificate(cheeger_exact(g, exact_cap), "exact")
            else:
                cert = ExpansionCertificate(spectral_cheeger_lower_bound(g), "spectral-lower-bound")
            if cert.value >= target_beta:
                return Expander(g, cert, attempts)
            if n <= 5:
                break  # a single cycle is deterministic up to relabelling
    if n - 1 <= max_degree:
        g = complete_graph(n)
        cert = ExpansionCertificate(cheeger_exact(g, exact_cap), "exact") if n <= exact_cap else \
            ExpansionCertificate(spectral_cheeger_lower_bound(g), "spectral-lower-bound")
        if cert.value >= target_beta:
            return Expander(g, cert, attempts + 1)
    raise BudgetExhausted(f"no expander on {n} vertices with degree ≤ {max_degree} and β ≥ {target_beta} "
                          f"after {attempts} attempts")
