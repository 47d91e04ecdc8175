import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgerykit.graphkit import CycleBasis, MultiGraph, complete_graph, cycle_graph, path_graph, random_connected_graph
from surgerykit.paulicode import (
    FIXTURES,
    PauliOperator,
    code_422,
    commutation_matrix,
    distance_bruteforce,
    logical_basis,
    random_logical,
    steane_code,
)
from surgerykit.surgery import (
    MatchingError,
    PortError,
    PortedGraph,
    build_measurement_graph,
    build_merged_code,
    check_desiderata,
    is_path_matching,
    measurement_graph_bounds,
    path_matching,
    verify_merged_code,
)


def steane_z():
    return next(l for l in logical_basis(steane_code()) if l.x == 0)


def test_path_matching_examples():
    assert path_matching(path_graph(3), []) == frozenset()
    assert path_matching(path_graph(3), [0, 2]) == frozenset({0, 1})
    assert path_matching(cycle_graph(3), [0, 1, 2]) is None
    g = MultiGraph(4, ((0, 1), (2, 3)))
    assert path_matching(g, [0, 2]) is None
    assert path_matching(cycle_graph(4), [0, 1], within=[1, 2, 3]) == frozenset({1, 2, 3})


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.integers(0, 6), st.integers(0, 2**32 - 1), st.data())
def test_path_matching_is_valid(n, extra, seed, data):
    g = random_connected_graph(n, extra, np.random.default_rng(seed))
    targets = data.draw(st.sets(st.integers(0, n - 1)))
    mu = path_matching(g, targets)
    if len(targets) % 2:
        assert mu is None
    else:
        assert mu is not None and is_path_matching(g, mu, targets)
        # never longer than pairing targets along shortest paths in a tree
        assert len(mu) <= g.num_edges


def test_merged_code_422_single_edge():
    code = code_422()
    l = PauliOperator.from_string("ZIZI")
    pg = PortedGraph(MultiGraph(2, ((0, 1),)), {0: 0, 2: 1}, CycleBasis((), 1))
    mc = build_merged_code(code, l, pg)
    assert len(mc.vertex_checks) == 2 and not mc.cycle_checks
    assert mc.n_total == 5 and len(mc.checks()) == 2 + 0 + 2
    xxxx = [c for c in mc.deformed_checks if c.z == 0][0]
    assert xxxx.to_string(with_sign=False) == "XXXXX"
    inv = verify_merged_code(mc)
    assert inv.ok and inv.logical_count == 1
    assert not commutation_matrix(mc.checks()).any()
    assert mc.vertex_product() == l.embed(5)


def test_no_deformation_when_operator_commutes_locally():
    code = FIXTURES["surface3"]()
    l = next(x for x in logical_basis(code) if x.x == 0)
    # a Z logical overlaps Z checks only, and X checks pairwise
    supp = l.support()
    pg = PortedGraph(path_graph(len(supp)), {q: i for i, q in enumerate(supp)}, CycleBasis((), len(supp) - 1))
    zonly = [s for s in code.generators if s.x == 0]
    mc = build_merged_code(code, l, pg)
    for s, d in zip(code.generators, mc.deformed_checks):
        if s in zonly:
            assert d == s.embed(mc.n_total)


def test_merged_code_rejects_bad_input():
    code = code_422()
    l = PauliOperator.from_string("ZIZI")
    with pytest.raises(PortError):
        build_merged_code(code, l, PortedGraph(path_graph(2), {0: 0}, CycleBasis((), 1)))
    with pytest.raises(ValueError):
        build_merged_code(code, PauliOperator.from_string("ZIII"), PortedGraph(path_graph(2), {0: 0}, CycleBasis((), 1)))
    with pytest.raises(PortError):
        PortedGraph(path_graph(2), {0: 0, 2: 0}, CycleBasis((), 1))
    disconnected = PortedGraph(MultiGraph(2, ()), {0: 0, 2: 1}, CycleBasis((), 0))
    with pytest.raises(MatchingError) as err:
        build_merged_code(code, l, disconnected)
    assert err.value.check == 0


def test_steane_measurement_graph():
    code = steane_code()
    l = steane_z()
    pg = build_measurement_graph(code, l, 1, seed=0)
    rep = check_desiderata(pg, code, l, 3, measurement_graph_bounds(code, pg.info["expander_degree"]))
    assert rep.passed, rep.diagnostics
    assert rep.relative_beta.value >= 1 and rep.relative_beta.kind == "exact"
    assert rep.basis_congestion <= 2 * 1 + 2 and rep.basis_max_length <= 4
    assert pg.graph.num_edges <= pg.info["edge_bound"]
    mc = build_merged_code(code, l, pg)
    assert verify_merged_code(mc).ok
    assert mc.vertex_product() == l.embed(mc.n_total)


def test_merged_distance_not_below_base_422():
    code = code_422()
    for l in logical_basis(code):
        pg = build_measurement_graph(code, l, 1, seed=1)
        mc = build_merged_code(code, l, pg)
        assert verify_merged_code(mc).ok
        if mc.n_total <= 22:
            assert distance_bruteforce(mc.as_code()) >= distance_bruteforce(code)


def test_weight_two_operator_base_graph():
    code = code_422()
    pg = build_measurement_graph(code, PauliOperator.from_string("ZIZI"), 1, seed=0)
    assert pg.info["base_vertices"] == 2 and pg.info["levels"] >= 1
    assert pg.graph.num_edges <= pg.info["edge_bound"]


def test_stabilizer_operator_has_expander_only_base():
    code = code_422()
    s = PauliOperator.from_string("ZZZZ")
    pg = build_measurement_graph(code, s, 1, seed=0)
    # no anticommuting checks: base is the expander on 4 vertices
    assert pg.info["base_vertices"] == 4
    mc = build_merged_code(code, s, pg)
    inv = verify_merged_code(mc)
    assert inv.all_commute and inv.product_matches
    assert inv.logical_count == code.k


def test_desiderata_failures():
    code = steane_code()
    l = steane_z()
    wrong_port = PortedGraph(path_graph(2), {l.support()[0]: 0, l.support()[1]: 1}, CycleBasis((), 1))
    rep = check_desiderata(wrong_port, code, l, 3)
    assert not rep.flags["port"] and not rep.passed and rep.diagnostics
    supp = l.support()
    split = PortedGraph(MultiGraph(4, ((0, 1), (2, 3))), {q: i for i, q in enumerate(supp)}, CycleBasis((), 2))
    rep = check_desiderata(split, code, l, 3)
    assert not rep.flags["connected"]
    d = rep.to_dict()
    assert d["flags"] == rep.flags and d["passed"] is False


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["4_2_2", "steane", "toric2", "surface3"]), st.integers(0, 2**16))
def test_random_logical_merged_invariants(name, seed):
    code = FIXTURES[name]()
    l = random_logical(code, np.random.default_rng(seed))
    pg = build_measurement_graph(code, l, 1, seed=seed)
    mc = build_merged_code(code, l, pg)
    inv = verify_merged_code(mc)
    assert inv.ok, inv
    assert pg.graph.num_edges <= pg.info["edge_bound"]
