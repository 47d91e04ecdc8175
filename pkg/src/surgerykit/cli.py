"""Command-line entry point: ``surgerykit <command> ...``.

Exit codes: 0 success, 1 internal error or failed check, 2 rejected input,
3 refused because a size cap would be exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .seeding import split_seed

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputRejected(Exception):
    pass


class CapRefused(Exception):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    exact_cheeger_cap: int = 22
    distance_cap: int = 22
    sim_qubit_cap: int = 40
    oracle_qubit_cap: int = 14
    max_check_weight: int = 16
    max_qubit_degree: int = 16
    rounds: tuple[int, int, int] | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        for name in ("exact_cheeger_cap", "distance_cap", "sim_qubit_cap", "oracle_qubit_cap",
                     "max_check_weight", "max_qubit_degree"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        env = os.environ
        rounds = None
        if getattr(args, "rounds", None):
            parts = [int(x) for x in args.rounds.split(",")]
            rounds = tuple(parts) if len(parts) == 3 else (parts[0],) * 3
        return cls(
            seed=args.seed,
            exact_cheeger_cap=int(env.get("SURGERYKIT_EXACT_CAP", 22)),
            distance_cap=int(env.get("SURGERYKIT_DISTANCE_CAP", 22)),
            sim_qubit_cap=int(env.get("SURGERYKIT_SIM_QUBITS", 40)),
            oracle_qubit_cap=int(env.get("SURGERYKIT_ORACLE_QUBITS", 14)),
            max_check_weight=int(env.get("SURGERYKIT_MAX_CHECK_WEIGHT", 16)),
            max_qubit_degree=int(env.get("SURGERYKIT_MAX_QUBIT_DEGREE", 16)),
            rounds=rounds,
            out=args.out,
        )


def _load_code(spec: str, cfg: RunConfig):
    from .paulicode import FIXTURES, CodeValidationError, ldpc_profile, read_code

    try:
        code = FIXTURES[spec]() if spec in FIXTURES else read_code(spec)
    except FileNotFoundError as exc:
        raise InputRejected(f"no such code file or fixture: {spec}") from exc
    except (CodeValidationError, ValueError) as exc:
        raise InputRejected(str(exc)) from exc
    prof = ldpc_profile(code)
    if prof.omega > cfg.max_check_weight or prof.delta > cfg.max_qubit_degree:
        raise CapRefused(f"code exceeds LDPC caps: check weight {prof.omega}, qubit degree {prof.delta}")
    return code


def _load_logical(code, text: str | None, index: int):
    from .paulicode import PauliOperator, logical_basis

    if text is None:
        basis = logical_basis(code)
        if not 0 <= index < len(basis):
            raise InputRejected(f"logical index {index} out of range 0..{len(basis) - 1}")
        return basis[index]
    try:
        l = PauliOperator.from_string(text)
    except ValueError as exc:
        raise InputRejected(str(exc)) from exc
    if l.n != code.n or not code.is_logical(l):
        raise InputRejected(f"{text} is not a nontrivial logical of {code.name or 'the code'}")
    return l


def _emit(args: argparse.Namespace, cfg: RunConfig, result: dict, text: str, dot: str | None = None) -> None:
    doc = {
        "tool": "surgerykit",
        "version": __version__,
        "command": args.command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "result": result,
    }
    payload = json.dumps(doc, indent=1, sort_keys=True, default=str)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(payload + "\n")
        if dot is not None:
            (out / f"{args.command}.dot").write_text(dot)
    if args.format == "json":
        print(payload)
    elif args.format == "dot" and dot is not None:
        print(dot, end="")
    else:
        print(text)


def _graph_dot(graph, port: dict[int, int], name: str = "g") -> str:
    ported = set(port.values())
    lines = [f"graph {name} {{"]
    for v in range(graph.num_vertices):
        shape = "box" if v in ported else "circle"
        lines.append(f"  v{v} [shape={shape}];")
    lines += [f"  v{u} -- v{w};" for u, w in graph.edges]
    return "\n".join(lines + ["}"]) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_build_extractor(args, cfg) -> int:
    from .extractor import build_eac_tanner, build_extractor, check_extractor_desiderata

    code = _load_code(args.code, cfg)
    if code.k == 0:
        raise InputRejected("code encodes no logical qubits")
    x = build_extractor(code, beta=Fraction(args.beta), seed=split_seed(cfg.seed, 1)[0],
                        expander_degree=args.expander_degree)
    rep = check_extractor_desiderata(x, exact_cap=cfg.exact_cheeger_cap)
    block = build_eac_tanner(code, x)
    degs = block.degrees()
    result = {
        "code": code.name, "n": code.n, "k": code.k,
        "vertices": x.graph.num_vertices, "edges": x.graph.num_edges,
        "info": dict(x.info), "eac": block.manifest() | {"max_degree": max(degs.values())},
        "desiderata": rep.to_dict(),
    }
    text = (f"extractor for {code.name}: {x.graph.num_vertices} vertices, {x.graph.num_edges} edges, "
            f"{block.num_qubits} EAC qubits\ndesiderata: {'PASS' if rep.passed else 'FAIL'} "
            f"{json.dumps(rep.flags)}")
    _emit(args, cfg, result, text, _graph_dot(x.graph, dict(x.port), "extractor"))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_build_graph(args, cfg) -> int:
    from .paulicode import distance_bruteforce
    from .surgery import build_measurement_graph, check_desiderata, measurement_graph_bounds

    code = _load_code(args.code, cfg)
    l = _load_logical(code, args.logical, args.index)
    pg = build_measurement_graph(code, l, beta=Fraction(args.beta), seed=split_seed(cfg.seed, 1)[0],
                                 expander_degree=args.expander_degree)
    d = int(distance_bruteforce(code)) if code.n <= cfg.distance_cap else 1
    rep = check_desiderata(pg, code, l, d, measurement_graph_bounds(code, args.expander_degree),
                           exact_cap=cfg.exact_cheeger_cap)
    result = {"logical": l.to_string(), "vertices": pg.graph.num_vertices, "edges": pg.graph.num_edges,
              "desiderata": rep.to_dict()}
    text = (f"measurement graph for {l}: {pg.graph.num_vertices} vertices, {pg.graph.num_edges} edges; "
            f"desiderata {'PASS' if rep.passed else 'FAIL'}")
    _emit(args, cfg, result, text, _graph_dot(pg.graph, dict(pg.port), "measurement"))
    return EXIT_OK if rep.passed else EXIT_FAIL


def _merged(code, l, cfg, args):
    from .surgery import build_measurement_graph, build_merged_code

    pg = build_measurement_graph(code, l, seed=split_seed(cfg.seed, 1)[0], expander_degree=args.expander_degree)
    return build_merged_code(code, l, pg)


def cmd_merge(args, cfg) -> int:
    from .surgery import verify_merged_code

    code = _load_code(args.code, cfg)
    l = _load_logical(code, args.logical, args.index)
    mc = _merged(code, l, cfg, args)
    inv = verify_merged_code(mc)
    checks = [c.to_string() for c in mc.checks()]
    result = {"logical": l.to_string(), "n_total": mc.n_total, "checks": checks, "invariants": asdict(inv)}
    ok = inv.ok
    text = f"merged code: {mc.n_total} qubits, {len(checks)} checks, k = {inv.logical_count}; " + ("ok" if ok else "INVALID")
    _emit(args, cfg, result, text)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bridge(args, cfg) -> int:
    from .extractor import bridge_extractors, build_extractor, check_extractor_desiderata

    c1, c2 = _load_code(args.code, cfg), _load_code(args.other, cfg)
    s1, s2, s3 = split_seed(cfg.seed, 3)
    x1, x2 = build_extractor(c1, seed=s1), build_extractor(c2, seed=s2)
    joined, br = bridge_extractors(x1, x2, d=args.d, seed=s3, expansion_max_ports=args.expansion_ports)
    rep = check_extractor_desiderata(joined, exact_cap=cfg.exact_cheeger_cap) if args.check else None
    result = {"bridge": {"endpoints": br.endpoints, "rho_before": br.rho_before, "rho_after": br.rho_after,
                         "gamma_before": br.gamma_before, "length_after": br.length_after, "attempts": br.attempts},
              "joined_info": dict(joined.info), "desiderata": rep.to_dict() if rep else None}
    text = (f"bridge of size {br.size}: rho {br.rho_before} -> {br.rho_after}, max length {br.length_after}, "
            f"expansion {joined.info.get('bridge_expansion')}")
    if rep:
        text += f"; joined desiderata {'PASS' if rep.passed else 'FAIL'}"
    _emit(args, cfg, result, text, _graph_dot(joined.graph, dict(joined.port), "joined"))
    return EXIT_OK if rep is None or rep.passed else EXIT_FAIL


def _block_map(spec: str, blocks: int):
    from .archkit import BlockMap

    if spec == "line":
        return BlockMap.line(blocks)
    if spec == "cycle":
        return BlockMap.cycle(blocks)
    try:
        return BlockMap.from_json(Path(spec).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise InputRejected(f"cannot read block map {spec}: {exc}") from exc


def cmd_assemble(args, cfg) -> int:
    from .archkit import assemble
    from .extractor import build_eac_tanner, build_extractor

    code = _load_code(args.code, cfg)
    bm = _block_map(args.map, args.blocks)
    seeds = split_seed(cfg.seed, bm.num_blocks + 1)
    blocks = [build_eac_tanner(code, build_extractor(code, seed=seeds[i])) for i in range(bm.num_blocks)]
    arch = assemble(blocks, bm, args.d, seed=seeds[-1])
    p = arch.params
    result = json.loads(arch.manifest())
    text = (f"{p.B} blocks, {p.num_bridges} bridges, K = {p.K}, total qubits {p.total_qubits}"
            + (f" (closed form {p.formula_total:g})" if p.formula_total is not None else ""))
    _emit(args, cfg, result, text, bm.to_dot())
    return EXIT_OK


def _compile(args):
    from .archkit import BlockMap
    from .pbc import BlockPartition, check_compatibility, compile_circuit, read_circuit

    try:
        circuit = read_circuit(args.circuit)
        part = BlockPartition.from_json(Path(args.partition).read_text())
        bm = BlockMap.from_json(Path(args.blockmap).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise InputRejected(str(exc)) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        circuit = circuit.completed()
    rep = check_compatibility(circuit, part, bm)
    if not rep.compatible:
        raise InputRejected("incompatible circuit:\n  " + "\n  ".join(rep.diagnostics))
    return compile_circuit(circuit, part, bm)


def cmd_compile(args, cfg) -> int:
    from .pbc import estimate_runtime

    cc = _compile(args)
    s = cc.schedule
    small = estimate_runtime(s, args.t_magic, cache_capacity=1)
    large = estimate_runtime(s, args.t_magic, cache_capacity=None)
    result = {"depth": s.depth, "lambda": s.lam, "k": s.k, "depth_bound": s.depth_bound, "slot_depth": s.slot_depth,
              "magic_count": s.magic_count, "runtime_small_cache": small.to_dict(),
              "runtime_large_cache": large.to_dict(), "colors_per_layer": s.colors_per_layer}
    if args.command == "schedule":
        result["schedule"] = json.loads(s.to_json())
    text = (f"depth {s.depth} (bound 4kΛ+k = {s.depth_bound}), Λ = {s.lam}, magic states {s.magic_count}, "
            f"cycles with cache 1: {small.cycles}")
    if args.command == "schedule":
        text += "\n" + "\n".join(f"t={t}: " + ", ".join(m.label() for m in layer) for t, layer in enumerate(s.layers))
    _emit(args, cfg, result, text)
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    from .simkit import logical_eigenstate, run_protocol

    code = _load_code(args.code, cfg)
    l = _load_logical(code, args.logical, args.index)
    mc = _merged(code, l, cfg, args)
    if mc.n_total > cfg.sim_qubit_cap:
        raise CapRefused(f"merged system has {mc.n_total} qubits, cap is {cfg.sim_qubit_cap}")
    rng = np.random.default_rng(split_seed(cfg.seed, 2)[1])
    trace, _ = run_protocol(code, mc, logical_eigenstate(code, l), rng=rng)
    result = {"logical": l.to_string(), "sigma": trace.sigma, "log": trace.log_lines()}
    _emit(args, cfg, result, "\n".join(trace.log_lines()))
    return EXIT_OK


def cmd_fault_search(args, cfg) -> int:
    from .simkit import corrupt_remove_vertex_check, fault_search

    code = _load_code(args.code, cfg)
    l = _load_logical(code, args.logical, args.index)
    mc = _merged(code, l, cfg, args)
    if args.corrupt is not None:
        mc = corrupt_remove_vertex_check(mc, args.corrupt)
    res = fault_search(code, mc, rounds=cfg.rounds, max_weight=args.max_weight)
    result = json.loads(res.to_json())
    text = f"{res.verdict} (weight ≤ {res.searched_weight}, {res.num_locations} locations)"
    if res.violation:
        text += "\n  " + "\n  ".join(res.description)
    _emit(args, cfg, result, text)
    return EXIT_OK if res.violation is None else EXIT_FAIL


def _verify_fixture(name: str, cfg: RunConfig) -> dict:
    from .extractor import bridge_extractors, build_extractor
    from .paulicode import FIXTURES, logical_basis
    from .simkit import logical_eigenstate, oracle_check, sampled_oracle_check
    from .surgery import build_measurement_graph, build_merged_code

    if name == "steane-logical-z":
        code = FIXTURES["steane"]()
        l = logical_basis(code)[1]
        mc = build_merged_code(code, l, build_measurement_graph(code, l, seed=split_seed(cfg.seed, 1)[0]))
        if mc.n_total > cfg.oracle_qubit_cap:
            raise CapRefused(f"fixture needs {mc.n_total} qubits, oracle cap is {cfg.oracle_qubit_cap}")
        rep = oracle_check(code, mc, logical_eigenstate(code, logical_basis(code)[0]))
        return {"fixture": name, "mode": "exhaustive", "branches": rep.branches,
                "mismatched_groups": rep.mismatched_groups, "passed": rep.equivalent}
    if name == "4_2_2-bridge-pair":
        code = FIXTURES["4_2_2"]()
        s1, s2, s3, s4 = split_seed(cfg.seed, 4)
        joined, _ = bridge_extractors(build_extractor(code, seed=s1), build_extractor(code, seed=s2), seed=s3)
        if joined.code.n + joined.graph.num_edges > cfg.sim_qubit_cap * 4:
            raise CapRefused("bridged system exceeds the simulation cap")
        b = logical_basis(code)
        l = b[0].embed(8) * b[0].embed(8, 4)  # X̄1 on both blocks
        within = {i: es for i, es in enumerate(joined.check_edge_sets)}
        mc = build_merged_code(joined.code, l, joined.restricted(l), within=within)
        initial = logical_eigenstate(joined.code, l.with_sign(1))
        rep = sampled_oracle_check(joined.code, mc, initial, 64, np.random.default_rng(s4))
        return {"fixture": name, "mode": "sampled", "runs": rep.branches, "mismatched_groups": rep.mismatched_groups,
                "sigma_frequencies": rep.distribution_protocol, "passed": rep.mismatched_groups == 0}
    if name in FIXTURES:
        code = FIXTURES[name]()
        out = []
        for l in logical_basis(code):
            mc = build_merged_code(code, l, build_measurement_graph(code, l, seed=split_seed(cfg.seed, 1)[0]))
            if mc.n_total > cfg.oracle_qubit_cap:
                raise CapRefused(f"{name} needs {mc.n_total} qubits for {l}, oracle cap is {cfg.oracle_qubit_cap}")
            init = logical_eigenstate(code, next(m for m in logical_basis(code) if not m.commutes(l)))
            rep = oracle_check(code, mc, init)
            out.append({"logical": l.to_string(), "branches": rep.branches, "passed": rep.equivalent})
        return {"fixture": name, "mode": "exhaustive", "logicals": out, "passed": all(o["passed"] for o in out)}
    raise InputRejected(f"unknown fixture {name}")


def cmd_verify(args, cfg) -> int:
    if args.circuit:
        from .pbc import verify_compilation

        cc = _compile(args)
        if cc.circuit.num_qubits + 2 > cfg.sim_qubit_cap or cc.circuit.num_qubits + 2 > 16:
            raise CapRefused(f"compiled circuit needs {cc.circuit.num_qubits + 2} simulated qubits")
        rep = verify_compilation(cc, max_qubits=16, seed=split_seed(cfg.seed, 1)[0])
        result = {"circuit": args.circuit} | rep.to_dict()
        passed = rep.passed
    else:
        result = _verify_fixture(args.fixture, cfg)
        passed = result["passed"]
    _emit(args, cfg, result, f"{args.fixture or args.circuit}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_report(args, cfg) -> int:
    rows = []
    for path in args.artifacts:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InputRejected(f"{path}: {exc}") from exc
        res = doc.get("result", {})
        status = res.get("passed", res.get("desiderata", {}).get("passed") if isinstance(res.get("desiderata"), dict) else None)
        rows.append({"file": path, "command": doc.get("command"), "seed": doc.get("seed"),
                     "version": doc.get("version"), "passed": status})
    text = "\n".join(f"{r['file']}: {r['command']} seed={r['seed']} passed={r['passed']}" for r in rows)
    _emit(args, cfg, {"artifacts": rows}, text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="surgerykit", description="Extractor-based lattice surgery toolkit")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="directory for artifact files")
    common.add_argument("--format", choices=["json", "dot", "text"], default="text")
    sub = p.add_subparsers(dest="command", required=True)

    def code_cmd(name: str, fn, help_: str, logical: bool = True) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("code", help="code file or fixture name (steane, 4_2_2, bell, surface3, toric2)")
        if logical:
            sp.add_argument("--logical", help="Pauli string of the logical to measure")
            sp.add_argument("--index", type=int, default=0, help="logical basis index when --logical is absent")
        sp.add_argument("--expander-degree", type=int, default=4)
        sp.set_defaults(fn=fn)
        return sp

    sp = code_cmd("build-extractor", cmd_build_extractor, "build an extractor and EAC block", logical=False)
    sp.add_argument("--beta", default="1")
    sp = code_cmd("build-graph", cmd_build_graph, "build a measurement graph for one logical")
    sp.add_argument("--beta", default="1")
    code_cmd("merge", cmd_merge, "build and check a merged code")
    code_cmd("simulate", cmd_simulate, "run the measurement protocol once")
    sp = code_cmd("fault-search", cmd_fault_search, "exhaustive low-weight fault search")
    sp.add_argument("--rounds", help="rounds before,during,after the merge, e.g. 1,2,1")
    sp.add_argument("--max-weight", type=int, default=1)
    sp.add_argument("--corrupt", type=int, help="drop this vertex check before searching")

    sp = sub.add_parser("bridge", parents=[common], help="bridge the extractors of two codes")
    sp.add_argument("code")
    sp.add_argument("other")
    sp.add_argument("--d", type=int)
    sp.add_argument("--check", action="store_true", help="run the joined desiderata check")
    sp.add_argument("--expansion-ports", type=int, default=10)
    sp.set_defaults(fn=cmd_bridge)

    sp = sub.add_parser("assemble", parents=[common], help="assemble a uniform architecture")
    sp.add_argument("code")
    sp.add_argument("--blocks", type=int, default=2)
    sp.add_argument("--map", default="line", help="line, cycle, or a block-map JSON file")
    sp.add_argument("--d", type=int, default=2)
    sp.set_defaults(fn=cmd_assemble)

    for name in ("compile", "schedule"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} a Clifford+T circuit")
        sp.add_argument("circuit")
        sp.add_argument("--partition", required=True)
        sp.add_argument("--blockmap", required=True)
        sp.add_argument("--t-magic", type=float, default=1.0)
        sp.set_defaults(fn=cmd_compile)

    sp = sub.add_parser("verify", parents=[common], help="run an oracle on a fixture or compiled circuit")
    sp.add_argument("fixture", nargs="?", help="steane-logical-z, 4_2_2-bridge-pair, or a code fixture name")
    sp.add_argument("--circuit")
    sp.add_argument("--partition")
    sp.add_argument("--blockmap")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("report", parents=[common], help="summarize artifact files")
    sp.add_argument("artifacts", nargs="+")
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and not args.fixture and not args.circuit:
        parser.error("verify needs a fixture name or --circuit")
    try:
        cfg = RunConfig.from_args(args)
        return args.fn(args, cfg)
    except InputRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CAP
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
