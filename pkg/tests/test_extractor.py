
import pytest

from surgerykit.extractor import (
    CapabilityError,
    ExtractorGraph,
    bridge_extractors,
    build_eac_tanner,
    build_extractor,
    build_partial_extractor,
    check_extractor_desiderata,
    extractor_bounds,
    compose_system,
    coupling_part,
    instantiate_measurement,
    skeleton,
)
from surgerykit.graphkit import CycleBasis, MultiGraph, cycle_graph, relative_cheeger_exact
from surgerykit.paulicode import (
    PauliOperator,
    code_422,
    logical_basis,
    logical_group_elements,
    make_code,
    repetition_code,
    steane_code,
)
from surgerykit.surgery import build_merged_code, check_desiderata, verify_merged_code


@pytest.fixture(scope="module")
def steane_x():
    return build_extractor(steane_code(), 1, seed=0)


@pytest.fixture(scope="module")
def x422():
    return build_extractor(code_422(), 1, seed=0)


def test_422_extractor_shape(x422):
    assert x422.info["kind"] == "full"
    assert sorted(x422.port) == [0, 1, 2, 3]
    # E_i is the check's 4-cycle copied onto every level
    assert all(len(es) == 4 * x422.info["levels"] for es in x422.check_edge_sets)
    rep = check_extractor_desiderata(x422, d=2)
    assert rep.passed, rep.diagnostics


def test_steane_extractor_desiderata(steane_x):
    rep = check_extractor_desiderata(steane_x, d=3)
    assert rep.passed, rep.diagnostics
    beta = relative_cheeger_exact(steane_x.graph, steane_x.port_image(), 3) if steane_x.graph.num_vertices <= 22 \
        else rep.relative_beta.value
    assert beta >= 1


def test_weight_two_check_gives_digon():
    x = build_extractor(repetition_code(2), 1, seed=0)
    image = set(x.port.values())
    bottom = [x.graph.edges[e] for e in x.check_edge_sets[0] if set(x.graph.edges[e]) <= image]
    assert len(bottom) == 2 and bottom[0] == bottom[1]
    assert len(x.check_edge_sets[0]) == 2 * x.info["levels"]


def test_deleting_edge_set_breaks_matchings(steane_x):
    sets = list(steane_x.check_edge_sets)
    sets[2] = frozenset()
    broken = ExtractorGraph(steane_x.code, steane_x.graph, steane_x.port, steane_x.basis, tuple(sets),
                            steane_x.info, steane_x.distance)
    rep = check_extractor_desiderata(broken, d=3)
    assert not rep.flags["matchings_exist"]
    assert any("check 2" in m for m in rep.diagnostics)


def test_restricted_port_satisfies_graph_desiderata(steane_x):
    code = steane_code()
    for l in logical_group_elements(code):
        pg = steane_x.restricted(l)
        bounds = extractor_bounds(code, steane_x.info["expander_degree"], steane_x.info["levels"])
        rep = check_desiderata(pg, code, l, 3, bounds, within=dict(enumerate(steane_x.check_edge_sets)))
        assert rep.passed, rep.flags


def test_eac_block_counts(x422):
    code = code_422()
    blk = build_eac_tanner(code, x422)
    g = x422.graph
    assert len(blk.data_qubits) == code.n + g.num_edges
    assert len(blk.check_qubits) == len(code.generators) + g.num_vertices + len(x422.basis.cycles)


def test_eac_block_vertex_degrees(steane_x):
    blk = build_eac_tanner(steane_code(), steane_x)
    deg = blk.degrees()
    image = set(steane_x.port.values())
    for v in range(steane_x.graph.num_vertices):
        assert deg[("V", v)] == steane_x.graph.degree(v) + (v in image)


def test_instantiate_steane_logical_z(steane_x):
    code = steane_code()
    blk = build_eac_tanner(code, steane_x)
    z = next(l for l in logical_basis(code) if l.x == 0)
    mc, active = instantiate_measurement(blk, z)
    assert verify_merged_code(mc).ok
    assert mc.vertex_product() == z.embed(mc.n_total)
    assert active <= blk.coupling
    with pytest.raises(ValueError):
        instantiate_measurement(blk, code.generators[0])


def test_uniformity_over_logical_group(x422):
    code = code_422()
    blk = build_eac_tanner(code, x422)
    results = [instantiate_measurement(blk, l) for l in logical_group_elements(code)]
    assert all(verify_merged_code(mc).ok for mc, _ in results)
    skeletons = {skeleton(mc) for mc, _ in results}
    assert len(skeletons) == 1
    assert len({coupling_part(mc) for mc, _ in results}) == len(results)
    assert len({act for _, act in results}) == len(results)


def _toy(code, graph, port, cycles):
    return ExtractorGraph(code, graph, port, CycleBasis(tuple(map(frozenset, cycles)), graph.num_edges),
                          tuple(frozenset(range(graph.num_edges)) for _ in code.generators),
                          {"kind": "full", "levels": 1}, 1)


def test_bridge_single_edges():
    code = repetition_code(2)
    x = _toy(code, MultiGraph(2, ((0, 1),)), {0: 0, 1: 1}, [])
    joined, br = bridge_extractors(x, x, d=1, seed=0)
    assert br.size == 1 and not br.cycles
    assert joined.graph.num_edges == 3
    assert br.qubit_cost() == (1, 0)


def test_bridge_four_cycles():
    code = make_code(["XXXX", "ZZZZ"])
    x = _toy(code, cycle_graph(4), {q: q for q in range(4)}, [range(4)])
    joined, br = bridge_extractors(x, x, d=2, seed=0)
    assert len(br.cycles) == 1
    new = joined.basis.cycles[-1]
    assert len(new) <= 8
    assert br.rho_after <= br.rho_before + 2
    joined.basis.validate(joined.graph)


def test_bridge_steane_pair(steane_x):
    joined, br = bridge_extractors(steane_x, steane_x, d=3, seed=0)
    assert br.size == 3 and len(br.cycles) == 2
    assert br.rho_after <= br.rho_before + 2
    assert br.length_after <= max(br.gamma_before, 8)
    rep = check_extractor_desiderata(joined, d=3, exact_cap=0, max_port_mincut=0)
    assert rep.flags["connected"] and rep.flags["matchings_exist"] and rep.flags["port"]
    assert joined.code.n == 14
    a = next(l for l in logical_basis(steane_code()) if l.z == 0)
    pair = PauliOperator(14, a.x | (a.x << 7), 0)
    mc = build_merged_code(joined.code, pair, joined.restricted(pair),
                           within=dict(enumerate(joined.check_edge_sets)))
    assert verify_merged_code(mc).ok


def test_bridge_rejects_oversized():
    code = repetition_code(2)
    x = _toy(code, MultiGraph(2, ((0, 1),)), {0: 0, 1: 1}, [])
    with pytest.raises(ValueError):
        bridge_extractors(x, x, d=3)


def test_partial_extractors_full_case_matches():
    code = code_422()
    full = build_extractor(code, 1, seed=3)
    part = build_partial_extractor(code, range(4), 1, seed=3)
    assert full.graph.edges == part.graph.edges and dict(full.port) == dict(part.port)


def test_joined_partial_extractors_measure_products_only():
    code = steane_code()
    t_set, r_set = [0, 1, 2], [3, 4, 5, 6]
    xt = build_partial_extractor(code, t_set, 1, seed=0)
    xr = build_partial_extractor(code, r_set, 1, seed=1)
    assert sorted(xt.port) == t_set and sorted(xr.port) == r_set
    joined, _ = bridge_extractors(xt, xr, d=3, seed=0, shared_code=True)
    within = dict(enumerate(joined.check_edge_sets))
    product = PauliOperator.from_string("ZZZZZZZ")  # ZZZ on T times the stabilizer ZZZZ on R
    mc = build_merged_code(code, product, joined.restricted(product), within=within)
    assert verify_merged_code(mc).ok
    straddle = PauliOperator.from_string("ZIIIIZZ")  # a logical whose deformations cross T and R
    assert code.is_logical(straddle)
    blk = build_eac_tanner(code, joined)
    with pytest.raises(CapabilityError):
        instantiate_measurement(blk, straddle)
    with pytest.raises(CapabilityError):
        xt.restricted(PauliOperator.from_string("IIIZZZZ"))
