import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgerykit import f2la
from surgerykit.graphkit import (
    CycleBasis,
    GraphError,
    MultiGraph,
    build_expander,
    cellulate,
    cheeger_exact,
    complete_graph,
    cycle_graph,
    decongest,
    decongestion_bound,
    fundamental_cycle_basis,
    greedy_partition,
    is_cycle,
    path_graph,
    random_connected_graph,
    relative_cheeger_exact,
    relative_cheeger_mincut,
    spectral_cheeger_lower_bound,
    thicken,
    thickened_cycle_basis,
)


def to_nx(g):
    h = nx.MultiGraph()
    h.add_nodes_from(range(g.num_vertices))
    h.add_edges_from(g.edges)
    return h


def nx_relative_cheeger(g, port, t):
    """Brute force over vertex subsets with networkx cut sizes."""
    h = to_nx(g)
    port = set(port)
    best = math.inf
    for r in range(1, g.num_vertices):
        for u in itertools.combinations(range(g.num_vertices), r):
            inside = len(port & set(u))
            d = min(t, inside, len(port) - inside)
            if d:
                best = min(best, Fraction(nx.cut_size(h, u), d))
    return best


def graphs(max_v=6):
    return st.tuples(st.integers(2, max_v), st.integers(0, 5), st.integers(0, 2**32 - 1)).map(
        lambda t: random_connected_graph(t[0], t[1], np.random.default_rng(t[2]))
    )


def test_fundamental_basis_examples():
    tri = cycle_graph(3)
    b = fundamental_cycle_basis(tri)
    assert len(b) == 1 and b.max_length == 3 and b.rho == 1
    assert len(fundamental_cycle_basis(path_graph(5))) == 0
    digon = MultiGraph(2, ((0, 1), (0, 1)))
    b = fundamental_cycle_basis(digon)
    assert len(b) == 1 and b.max_length == 2


def test_decongest_examples():
    b = decongest(cycle_graph(3))
    assert b.rho == 1 < decongestion_bound(cycle_graph(3))
    k4 = complete_graph(4)
    b = decongest(k4)
    assert len(b) == 3 and b.rho <= 4 and b.rho < math.log2(4) * math.log(12)
    assert greedy_partition(b).t <= math.log2(4) * b.rho + 1
    assert len(decongest(path_graph(4))) == 0


def test_decongest_rejects_disconnected():
    with pytest.raises(GraphError):
        decongest(MultiGraph(4, ((0, 1), (2, 3))))


def test_greedy_partition_examples():
    disjoint = CycleBasis((frozenset({0, 1, 2}), frozenset({3, 4, 5})), 6)
    assert greedy_partition(disjoint).t == 1
    shared = CycleBasis((frozenset({0, 1, 2}), frozenset({2, 3, 4})), 5)
    assert greedy_partition(shared).t == 2


@settings(max_examples=60, deadline=None)
@given(graphs(10))
def test_decongest_is_a_basis_within_bounds(g):
    b = decongest(g)
    b.validate(g)
    # cycle space dimension agrees with networkx
    h = to_nx(g)
    assert len(b) == h.number_of_edges() - h.number_of_nodes() + nx.number_connected_components(h)
    if len(b):
        assert b.rho < decongestion_bound(g)
        parts = greedy_partition(b)
        assert parts.t <= math.log2(g.num_vertices) * b.rho + 1
        for part in parts.parts:
            for i, j in itertools.combinations(part, 2):
                assert not b.cycles[i] & b.cycles[j]
        assert sorted(i for p in parts.parts for i in p) == list(range(len(b)))


def test_thicken_counts():
    sq = thicken(MultiGraph(2, ((0, 1),)), 2)
    assert (sq.graph.num_vertices, sq.graph.num_edges) == (4, 4)
    tri = cycle_graph(3)
    assert thicken(tri, 1).graph.edges == tri.edges
    th = thicken(tri, 3)
    assert (th.graph.num_vertices, th.graph.num_edges) == (9, 3 * 3 + 3 * 2)


def test_thickened_basis():
    tri = cycle_graph(3)
    th = thicken(tri, 2)
    b = thickened_cycle_basis(th, fundamental_cycle_basis(tri), [1])
    assert len(b) == 4 == th.graph.num_edges - th.graph.num_vertices + 1
    p = path_graph(4)
    b = thickened_cycle_basis(thicken(p, 3), fundamental_cycle_basis(p), [])
    assert len(b) == p.num_edges * 2 and all(len(c) == 4 for c in b.cycles)


@pytest.mark.parametrize("w, chords", [(3, 0), (4, 1), (5, 2), (8, 5)])
def test_cellulate(w, chords):
    g = cycle_graph(w)
    out, new, tris = cellulate(g, range(w))
    assert len(new) == chords
    assert len(tris) == max(1, w - 2)
    assert all(len(t) == 3 for t in tris)
    acc = 0
    for t in tris:
        assert is_cycle(out, t)
        for e in t:
            acc ^= 1 << e
    assert acc == sum(1 << e for e in range(w))


def test_cheeger_examples():
    assert cheeger_exact(complete_graph(4)) == 2
    assert cheeger_exact(path_graph(4)) == Fraction(1, 2)
    assert cheeger_exact(path_graph(2)) == 1
    assert relative_cheeger_exact(complete_graph(4), [0, 1], 1) >= 2


@settings(max_examples=60, deadline=None)
@given(graphs(7), st.data())
def test_relative_cheeger_matches_networkx(g, data):
    port = data.draw(st.sets(st.integers(0, g.num_vertices - 1), min_size=2))
    t = data.draw(st.integers(1, g.num_vertices))
    exact = relative_cheeger_exact(g, port, t)
    assert exact == nx_relative_cheeger(g, port, t)
    assert relative_cheeger_mincut(g, port, t).value == exact


@settings(max_examples=40, deadline=None)
@given(graphs(7), st.data())
def test_restriction_monotone(g, data):
    big = data.draw(st.sets(st.integers(0, g.num_vertices - 1), min_size=2))
    small = data.draw(st.sets(st.sampled_from(sorted(big)), min_size=2))
    t_big = data.draw(st.integers(1, g.num_vertices))
    t_small = data.draw(st.integers(1, t_big))
    assert relative_cheeger_exact(g, small, t_small) >= relative_cheeger_exact(g, big, t_big)


@settings(max_examples=40, deadline=None)
@given(graphs(7))
def test_full_port_is_cheeger_and_spectral_bound_below(g):
    n = g.num_vertices
    assert relative_cheeger_exact(g, range(n), n) == cheeger_exact(g)
    assert spectral_cheeger_lower_bound(g) <= float(cheeger_exact(g)) + 1e-9


def test_expander_examples():
    e = build_expander(2)
    assert e.graph.num_edges == 1 and e.certificate.value == 1
    e = build_expander(8, 1, 4, seed=0)
    assert e.certificate.kind == "exact"
    assert cheeger_exact(e.graph) == e.certificate.value >= 1
    assert e.graph.max_degree() <= 4
    e = build_expander(100, 0.2, 6, seed=0)
    assert e.certificate.kind == "spectral-lower-bound"
    assert e.certificate.value >= 0.2
    lap = nx.laplacian_matrix(nx.Graph(to_nx(e.graph))).toarray()
    assert np.isclose(np.linalg.eigvalsh(lap)[1] / 2, e.certificate.value)


def test_incidence_kernel_dimension():
    g = complete_graph(5)
    ker = f2la.kernel_basis(g.incidence_matrix())
    assert len(ker) == len(fundamental_cycle_basis(g)) == 6


def test_text_roundtrip():
    g = random_connected_graph(6, 3, np.random.default_rng(3))
    assert MultiGraph.from_text(g.to_text()).edges == g.edges
