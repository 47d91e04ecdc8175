import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgerykit.graphkit import CycleBasis, MultiGraph
from surgerykit.paulicode import PauliOperator, code_422, logical_basis, steane_code
from surgerykit.simkit import (
    Tableau,
    build_spacetime_model,
    code_state,
    corrupt_remove_vertex_check,
    direct_measurement_branches,
    enumerate_protocol_branches,
    fault_search,
    is_code_state,
    logical_eigenstate,
    measure_pauli,
    oracle_check,
    random_code_state,
    replay_faults,
    run_protocol,
    sampled_oracle_check,
)
from surgerykit.surgery import PortedGraph, build_measurement_graph, build_merged_code

ZIZI = PauliOperator.from_string("ZIZI")


def merged_422():
    pg = PortedGraph(MultiGraph(2, ((0, 1),)), {0: 0, 2: 1}, CycleBasis((), 1))
    return build_merged_code(code_422(), ZIZI, pg)


def dense_state(t: Tableau) -> np.ndarray:
    """Projector product onto the stabilizer state, then a normalized column."""
    dim = 2**t.n
    proj = np.eye(dim, dtype=complex)
    for s in t.stabs:
        proj = proj @ (np.eye(dim) + s.to_matrix()) / 2
    col = proj[:, np.argmax(np.linalg.norm(proj, axis=0))]
    return col / np.linalg.norm(col)


def test_measure_examples():
    t = Tableau.zero_state(1)
    out, det, t2 = measure_pauli(t, PauliOperator.from_string("Z"))
    assert (out, det) == (1, True)
    out, det, plus = measure_pauli(t, PauliOperator.from_string("X"), forced=1)
    assert not det and plus.expectation(PauliOperator.from_string("X")) == 1
    assert t.expectation(PauliOperator.from_string("Z")) == 1  # input untouched
    cs = code_state(code_422())
    for g in code_422().generators:
        assert measure_pauli(cs, g)[:2] == (1, True)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.lists(st.tuples(st.integers(0, 255), st.integers(0, 255), st.sampled_from([1, -1])),
                                   min_size=1, max_size=6))
def test_tableau_matches_dense_simulation(n, ops):
    mask = (1 << n) - 1
    t = Tableau.zero_state(n)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for x, z, forced in ops:
        p = PauliOperator(n, x & mask, z & mask)
        if p.weight() == 0:
            continue
        m = p.to_matrix()
        exp = np.vdot(psi, m @ psi).real
        res = t.measure(p, forced=forced)
        if res.deterministic:
            assert np.isclose(exp, res.outcome)
        else:
            assert np.isclose(exp, 0)
        psi = (psi + res.outcome * (m @ psi)) / 2
        psi /= np.linalg.norm(psi)
        t.validate()
        assert np.isclose(abs(np.vdot(dense_state(t), psi)), 1)


def test_from_stabilizers_signs():
    ops = [PauliOperator.from_string("XX"), PauliOperator.from_string("ZZ").negate()]
    t = Tableau.from_stabilizers(ops)
    assert t.expectation(ops[0]) == 1 and t.expectation(ops[1]) == 1
    assert t.expectation(PauliOperator.from_string("YY")) == 1
    with pytest.raises(ValueError):
        Tableau.from_stabilizers([ops[0], ops[0].negate()])


def test_protocol_on_eigenstates():
    mc = merged_422()
    code = code_422()
    rng = np.random.default_rng(0)
    for sign in (1, -1):
        init = code_state(code, [ZIZI.with_sign(sign), PauliOperator.from_string("ZZII")])
        for _ in range(10):
            trace, t = run_protocol(code, mc, init.copy(), rng=rng)
            assert trace.sigma == sign == int(np.prod(trace.epsilon))
            assert t.restricted_group(range(4)) == init.group()


def test_protocol_rejects_non_code_state():
    with pytest.raises(ValueError):
        run_protocol(code_422(), merged_422(), Tableau.zero_state(4))


def test_oracle_exhaustive_422():
    code = code_422()
    mc = merged_422()
    for init in (code_state(code, [PauliOperator.from_string("XXII"), PauliOperator.from_string("XIXI")]),
                 code_state(code, [PauliOperator.from_string("ZZII"), PauliOperator.from_string("XIXI")])):
        rep = oracle_check(code, mc, init)
        assert rep.equivalent, rep
        assert abs(sum(rep.distribution_protocol.values()) - 1) < 1e-12


def test_oracle_random_states_steane():
    code = steane_code()
    z = next(l for l in logical_basis(code) if l.x == 0)
    pg = build_measurement_graph(code, z, 1, seed=0)
    mc = build_merged_code(code, z, pg)
    rng = np.random.default_rng(1)
    init, _ = random_code_state(code, rng)
    rep = sampled_oracle_check(code, mc, init, 20, rng)
    assert rep.mismatched_groups == 0
    if mc.n_total <= 14:
        assert oracle_check(code, mc, init).equivalent


def test_direct_branches():
    init = code_state(code_422(), [PauliOperator.from_string("XXII"), PauliOperator.from_string("XIXI")])
    br = direct_measurement_branches(init, ZIZI)
    assert sorted(b.sigma for b in br) == [-1, 1] and all(b.probability == 0.5 for b in br)


def test_idempotence():
    code = code_422()
    mc = merged_422()
    rng = np.random.default_rng(5)
    for _ in range(10):
        init, _ = random_code_state(code, rng)
        tr1, t1 = run_protocol(code, mc, init, rng=rng)
        reduced = Tableau.from_stabilizers(
            [PauliOperator(4, x, z, s) for x, z, s in t1.restricted_group(range(4))], 4)
        assert is_code_state(reduced, code)
        tr2, _ = run_protocol(code, mc, reduced, rng=rng)
        assert tr2.sigma == tr1.sigma


def test_branch_probabilities_sum_to_one():
    code = code_422()
    br = enumerate_protocol_branches(code, merged_422(), code_state(code, [PauliOperator.from_string("XXII"),
                                                                             PauliOperator.from_string("XIXI")]))
    assert abs(sum(b.probability for b in br) - 1) < 1e-12


def test_trace_log():
    code = code_422()
    trace, _ = run_protocol(code, merged_422(), logical_eigenstate(code, ZIZI), forced=[1] * 20)
    lines = trace.log_lines()
    assert lines[0].startswith("merge vertex 0") and any(l.startswith("merge sigma") for l in lines)


def test_fault_search_weight_zero_and_enough_rounds():
    code = code_422()
    mc = merged_422()
    assert fault_search(code, mc, (1, 1, 1), max_weight=0).violation is None
    res = fault_search(code, mc, (1, 2, 1), max_weight=1)
    assert res.violation is None and res.complete and res.searched_weight == 1


def test_fault_search_finds_corruption_and_replays():
    code = code_422()
    bad = corrupt_remove_vertex_check(merged_422(), 0)
    model = build_spacetime_model(bad, (1, 2, 1))
    res = fault_search(code, bad, model=model, max_weight=1)
    assert res.violation is not None and res.searched_weight == 1
    rep = replay_faults(model, res.violation)
    assert rep.undetected_logical


def test_detectors_are_silent_without_faults():
    model = build_spacetime_model(merged_422(), (1, 1, 1))
    rep = replay_faults(model, ())
    assert not rep.fired_detectors and not rep.sigma_flipped and not rep.final_state_changed


def test_corrupted_code_leaves_sigma_unpinned():
    model = build_spacetime_model(corrupt_remove_vertex_check(merged_422(), 0), (1, 2, 1))
    rep = replay_faults(model, ())
    assert rep.sigma_random and not rep.fired_detectors


def test_steane_needs_d_merged_rounds():
    code = steane_code()
    z = next(l for l in logical_basis(code) if l.x == 0)
    mc = build_merged_code(code, z, build_measurement_graph(code, z, 1, seed=0))
    assert fault_search(code, mc, (1, 3, 1), max_weight=2).violation is None
    model = build_spacetime_model(mc, (1, 2, 1))
    res = fault_search(code, mc, model=model, max_weight=2)
    assert res.searched_weight == 2
    assert replay_faults(model, res.violation).undetected_logical
    assert not replay_faults(model, ()).sigma_random
