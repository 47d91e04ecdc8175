"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line that is printed in the terminal summary.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from surgerykit.archkit import BlockMap, assemble
from surgerykit.extractor import (
    bridge_extractors,
    build_eac_tanner,
    build_extractor,
    extractor_bounds,
    instantiate_measurement,
    skeleton,
    coupling_part,
)
from surgerykit.graphkit import (
    decongest,
    greedy_partition,
    min_cut_between,
    random_connected_graph,
    relative_cheeger_exact,
    relative_cheeger_mincut,
    thicken,
)
from surgerykit.paulicode import (
    FIXTURES,
    PauliOperator,
    code_422,
    distance_bruteforce,
    logical_basis,
    logical_group_elements,
    random_logical,
    steane_code,
)
from surgerykit.pbc import BlockPartition, compile_circuit, random_compatible_circuit, schedule_violations, verify_compilation
from surgerykit.seeding import split_seed
from surgerykit.simkit import (
    code_state,
    corrupt_remove_vertex_check,
    build_spacetime_model,
    fault_search,
    logical_eigenstate,
    oracle_check,
    random_code_state,
    replay_faults,
)
from surgerykit.surgery import (
    CycleBasis,
    PortedGraph,
    build_measurement_graph,
    build_merged_code,
    check_desiderata,
    measurement_graph_bounds,
    verify_merged_code,
)
from surgerykit.graphkit import MultiGraph

pytestmark = pytest.mark.filterwarnings("ignore:circuit does not end")


def record(n: int, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {status}  {detail}  ({elapsed:.1f}s of {budget:.0f}s)"
    print(ACCEPTANCE_LINES[n])
    assert ok, detail
    assert within, f"criterion {n} took {elapsed:.1f}s, budget {budget}s"


def single_edge_422():
    l = PauliOperator.from_string("ZIZI")
    pg = PortedGraph(MultiGraph(2, ((0, 1),)), {0: 0, 2: 1}, CycleBasis((), 1))
    return l, build_merged_code(code_422(), l, pg)


def test_criterion_01_merged_code_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    checked = distance_checked = 0
    failures = []
    for name in ("4_2_2", "steane"):
        code = FIXTURES[name]()
        base_d = distance_bruteforce(code)
        ops = logical_basis(code) + [random_logical(code, rng) for _ in range(5)]
        for i, l in enumerate(ops):
            pg = build_measurement_graph(code, l, 1, seed=i)
            mc = build_merged_code(code, l, pg)
            inv = verify_merged_code(mc)
            checked += 1
            if not (inv.all_commute and inv.product_matches and inv.matchings_valid):
                failures.append(f"{name} {l}: invariants {inv}")
            if inv.logical_count != code.k - 1:
                failures.append(f"{name} {l}: {inv.logical_count} logicals, expected {code.k - 1}")
            rep = check_desiderata(pg, code, l, int(base_d), measurement_graph_bounds(code, pg.info["expander_degree"]))
            if rep.passed and mc.n_total <= 22:
                distance_checked += 1
                if distance_bruteforce(mc.as_code()) < base_d:
                    failures.append(f"{name} {l}: merged distance below {base_d}")
    record(1, not failures, f"{checked} operators, {distance_checked} distance checks; {failures[:2]}",
           time.perf_counter() - start, 300)


def test_criterion_02_protocol_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    systems = [("4_2_2 single edge",) + (code_422(),) + single_edge_422()]
    for name, make in FIXTURES.items():
        code = make()
        for i, l in enumerate(logical_basis(code)):
            mc = build_merged_code(code, l, build_measurement_graph(code, l, 1, seed=i))
            systems.append((f"{name} {l}", code, l, mc))
    runs = branches = 0
    bad = []
    for label, code, l, mc in systems:
        if mc.n_total > 14:
            continue
        states = [logical_eigenstate(code, l), logical_eigenstate(code, l.negate())]
        states += [random_code_state(code, rng)[0] for _ in range(3)]
        for st in states:
            rep = oracle_check(code, mc, st)
            runs += 1
            branches += rep.branches
            if not rep.equivalent:
                bad.append(label)
    record(2, not bad and runs > 0, f"{runs} states, {branches} branches over {len(systems)} systems; mismatches {bad[:3]}",
           time.perf_counter() - start, 300)


def test_criterion_03_fault_search():
    start = time.perf_counter()
    code = code_422()
    detail = []
    ok = True
    for label, mc in (("single-edge", single_edge_422()[1]),
                      ("constructed", build_merged_code(code, PauliOperator.from_string("ZIZI"),
                                                        build_measurement_graph(code, PauliOperator.from_string("ZIZI"), 1, seed=0)))):
        res = fault_search(code, mc, (1, 1, 1), max_weight=1)
        if res.violation is not None:
            ok = False
            detail.append(f"{label} 1+1+1: weight-1 violation {res.description}")
        else:
            detail.append(f"{label} 1+1+1: clean")
        model = build_spacetime_model(corrupt_remove_vertex_check(mc, 0), (1, 1, 1))
        bad = fault_search(code, model.merged, model=model, max_weight=1)
        replayed = bad.violation is not None and replay_faults(model, bad.violation).undetected_logical
        ok &= replayed
        detail.append(f"{label} corrupted: {'violation replayed' if replayed else 'no violation'}")
    record(3, ok, "; ".join(detail), time.perf_counter() - start, 120)


def test_criterion_04_decongestion():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    bad = []
    for i in range(50):
        n = int(rng.integers(4, 65))
        g = random_connected_graph(n, int(rng.integers(1, 2 * n)), rng)
        try:
            basis = decongest(g, seed=i)
        except Exception as exc:  # noqa: BLE001
            bad.append(f"graph {i}: {exc}")
            continue
        basis.validate(g)
        rho_cap = math.log2(g.num_vertices) * math.log(2 * g.num_edges)
        t = greedy_partition(basis).t
        if not basis.rho < rho_cap or not t <= math.log2(g.num_vertices) * basis.rho + 1:
            bad.append(f"graph {i}: rho {basis.rho} cap {rho_cap:.2f}, t {t}")
    record(4, not bad, f"50 graphs; violations {bad[:2]}", time.perf_counter() - start, 120)


def test_criterion_05_thickening_expansion():
    """Base side by subset enumeration, thickened side by min cuts over every port split."""
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    checks = 0
    bad = []
    for inst in range(200):
        n = int(rng.integers(2, 7))
        g = random_connected_graph(n, int(rng.integers(0, n + 1)), rng)
        ports = [p for r in range(2, n + 1) for p in itertools.combinations(range(n), r)]
        base = {(p, t): relative_cheeger_exact(g, p, t) for p in ports for t in range(1, n + 1)}
        for levels in range(1, 5):
            th = thicken(g, levels)
            for r in range(levels):
                cut: dict[tuple, int] = {}
                for p in ports:
                    lifted = [th.vertex(v, r) for v in p]
                    for mask in range((1 << (len(p) - 1)) - 1):
                        a = tuple(lifted[0:1] + [lifted[j] for j in range(1, len(p)) if (mask >> (j - 1)) & 1])
                        b = tuple(x for x in lifted if x not in a)
                        if (a, b) not in cut:
                            cut[(a, b)] = min_cut_between(th.graph, a, b, limit=n)
                    for t in range(1, n + 1):
                        target = min(Fraction(1), levels * base[(p, t)])
                        for mask in range((1 << (len(p) - 1)) - 1):
                            a = tuple(lifted[0:1] + [lifted[j] for j in range(1, len(p)) if (mask >> (j - 1)) & 1])
                            b = tuple(x for x in lifted if x not in a)
                            d = min(t, len(a), len(b))
                            checks += 1
                            if Fraction(cut[(a, b)], d) < target:
                                bad.append((inst, levels, r, p, t))
                                break
    record(5, not bad, f"200 graphs, {checks} port splits checked; violations {bad[:2]}",
           time.perf_counter() - start, 600)


def test_criterion_06_extractor_universality():
    start = time.perf_counter()
    code = steane_code()
    x = build_extractor(code, 1, seed=0)
    blk = build_eac_tanner(code, x)
    bounds = extractor_bounds(code, x.info["expander_degree"], x.info["levels"])
    rng = np.random.default_rng(606)
    stabilizers = [g for g in code.generators]
    classes = [l for l in logical_group_elements(code)]
    ops = []
    for c in classes:
        for rep in range(8):
            l = c
            for s in stabilizers:
                if rep and rng.integers(2):
                    e, l = l.multiply(s)
                    l = l if e % 4 == 0 else l.negate()
            ops.append(l)
    skeletons = set()
    couplings = set()
    bad = []
    trivial_rejected = False
    try:
        instantiate_measurement(blk, stabilizers[0])
    except ValueError:
        trivial_rejected = True
    for l in ops:
        mc, _ = instantiate_measurement(blk, l)
        inv = verify_merged_code(mc)
        rep = check_desiderata(x.restricted(l), code, l, 3, bounds, within=dict(enumerate(x.check_edge_sets)))
        if not inv.ok or not rep.passed:
            bad.append(l.to_string())
        skeletons.add(skeleton(mc))
        couplings.add(coupling_part(mc))
    ok = not bad and len(skeletons) == 1 and trivial_rejected
    record(6, ok, f"{len(ops)} operators over {len(classes)} nontrivial classes; {len(skeletons)} skeleton(s), "
                  f"{len(couplings)} coupling patterns; failures {bad[:2]}", time.perf_counter() - start, 600)


def test_criterion_07_bridge_bounds():
    start = time.perf_counter()
    rng = np.random.default_rng(707)
    names = ["4_2_2", "steane", "toric2", "surface3"]
    bad = []
    exact = 0
    for i in range(30):
        n1, n2 = (names[j] for j in rng.integers(len(names), size=2))
        s1, s2, sb = (int(s) for s in rng.integers(2**31, size=3))
        x1 = build_extractor(FIXTURES[n1](), 1, seed=s1)
        x2 = build_extractor(FIXTURES[n2](), 1, seed=s2)
        d = min(x1.distance, x2.distance)
        joined, br = bridge_extractors(x1, x2, d=d, seed=sb, expansion_max_ports=0)
        rho = max(x1.basis.rho, x2.basis.rho)
        gamma = max(x1.basis.max_length, x2.basis.max_length)
        if joined.basis.rho > rho + 2 or joined.basis.max_length > max(gamma, 8):
            bad.append(f"{n1}x{n2}: rho {joined.basis.rho}/{rho}, length {joined.basis.max_length}/{gamma}")
        t = min(x1.distance, x2.distance, br.size)
        ports = joined.port_image()
        if len(ports) <= 14:
            exact += 1
            cert = relative_cheeger_mincut(joined.graph, ports, t, cap_ratio=Fraction(1))
            if cert.value < 1:
                bad.append(f"{n1}x{n2}: joined expansion {cert.value}")
    record(7, not bad and exact > 0, f"30 bridges, {exact} exact expansion checks; violations {bad[:2]}",
           time.perf_counter() - start, 300)


@pytest.fixture(scope="module")
def compiled_circuits():
    rng = np.random.default_rng(808)
    out = []
    start = time.perf_counter()
    for i in range(50):
        blocks = int(rng.integers(2, 5))
        k = 1 + int(rng.integers(1, 8 // blocks + 1))
        part = BlockPartition.contiguous(blocks, k)
        bm = BlockMap.cycle(blocks) if rng.integers(2) else BlockMap.line(blocks)
        circ = random_compatible_circuit(part, bm, int(rng.integers(10, 41)), rng)
        out.append((circ, part, bm, compile_circuit(circ, part, bm)))
    return out, time.perf_counter() - start


def test_criterion_08_compilation(compiled_circuits):
    circuits, compile_time = compiled_circuits
    start = time.perf_counter()
    bad = []
    modes = {}
    for i, (circ, part, bm, cc) in enumerate(circuits):
        assert part.num_qubits <= 8 and len(circ.body) <= 40 and 2 <= part.num_blocks <= 4
        rep = verify_compilation(cc, seed=i)
        modes[rep.mode] = modes.get(rep.mode, 0) + 1
        if not rep.passed:
            bad.append(f"circuit {i}: error {rep.max_abs_error:.2e}, p {rep.p_value}")
    record(8, not bad, f"50 circuits ({modes}); failures {bad[:2]}", compile_time + time.perf_counter() - start, 900)


def test_criterion_09_depth_accounting(compiled_circuits):
    circuits, _ = compiled_circuits
    start = time.perf_counter()
    bad = []
    max_ratio = 0.0
    for i, (circ, part, bm, cc) in enumerate(circuits):
        s = cc.schedule
        k = part.k
        if not s.depth < 4 * k * s.lam + k:
            bad.append(f"circuit {i}: depth {s.depth} vs {4 * k * s.lam + k}")
        if schedule_violations(s, bm):
            bad.append(f"circuit {i}: {schedule_violations(s, bm)[0]}")
        for layer, colors in s.colors_per_layer.items():
            if s.max_degree_per_layer[layer] <= k - 1 and colors > 2 * (k - 1):
                bad.append(f"circuit {i} layer {layer}: {colors} colors")
        max_ratio = max(max_ratio, s.depth / (4 * k * s.lam + k))
    record(9, not bad, f"50 schedules, max depth/bound {max_ratio:.2f}; violations {bad[:2]}",
           time.perf_counter() - start, 60)


def test_criterion_10_architecture_accounting():
    start = time.perf_counter()
    code = steane_code()
    blk = build_eac_tanner(code, build_extractor(code, 1, seed=0))
    d = 3
    bad = []
    totals = []
    for B in (2, 3, 4):
        for shape in ("line", "cycle"):
            bm = getattr(BlockMap, shape)(B)
            arch = assemble([blk] * B, bm, d, seed=B, expansion_max_ports=0)
            inventory = sum(len(b.data_qubits) + len(b.check_qubits) for b in arch.blocks)
            for br in arch.bridges.values():
                if len(br.endpoints) != d or len(br.cycles) != d - 1:
                    bad.append(f"{shape}{B}: bridge adds {len(br.endpoints)} data, {len(br.cycles)} checks")
                inventory += len(br.endpoints) + len(br.cycles)
            lam = blk.num_qubits / code.n
            alpha = len(bm.edges) / B
            formula = B * (lam * code.n + alpha * (2 * d - 1))
            totals.append(inventory)
            if not math.isclose(inventory, formula) or inventory != arch.params.total_qubits:
                bad.append(f"{shape}{B}: inventory {inventory}, formula {formula}")
    record(10, not bad, f"totals {totals}; mismatches {bad[:2]}", time.perf_counter() - start, 60)
