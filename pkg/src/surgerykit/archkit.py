"""Block maps, bridged architectures, parameter accounting and parallel measurement plans."""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .paulicode import PauliOperator, StabilizerCode
from .seeding import split_seed


@dataclass(frozen=True)
class BlockMap:
    num_blocks: int
    edges: tuple[tuple[int, int], ...]
    degree_cap: int | None = None

    def __post_init__(self) -> None:
        norm = []
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"block map has a self-loop at {a}")
            if not (0 <= a < self.num_blocks and 0 <= b < self.num_blocks):
                raise ValueError(f"edge ({a}, {b}) leaves the block range")
            norm.append((min(a, b), max(a, b)))
        if len(set(norm)) != len(norm):
            raise ValueError("block map must be a simple graph")
        object.__setattr__(self, "edges", tuple(norm))
        if self.degree_cap is not None and self.max_degree() > self.degree_cap:
            raise ValueError(f"block degree {self.max_degree()} exceeds cap {self.degree_cap}")
        if self.num_blocks > 1 and not self.is_connected():
            warnings.warn("block map is disconnected; cross-component operators cannot be measured", stacklevel=2)

    def neighbors(self, b: int) -> list[int]:
        return sorted({y for x, y in self.edges if x == b} | {x for x, y in self.edges if y == b})

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in set(self.edges)

    def degree(self, b: int) -> int:
        return sum(1 for e in self.edges if b in e)

    def max_degree(self) -> int:
        return max((self.degree(b) for b in range(self.num_blocks)), default=0)

    def is_connected(self, within: Iterable[int] | None = None) -> bool:
        nodes = set(range(self.num_blocks)) if within is None else set(within)
        if not nodes:
            return True
        start = min(nodes)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in self.neighbors(u):
                if w in nodes and w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen == nodes

    def spanning_tree(self, within: Iterable[int]) -> list[tuple[int, int]]:
        """BFS tree of the induced subgraph, rooted at the lowest block id."""
        nodes = set(within)
        if not self.is_connected(nodes):
            raise ValueError(f"blocks {sorted(nodes)} do not induce a connected subgraph")
        root = min(nodes)
        seen = {root}
        queue = deque([root])
        tree = []
        while queue:
            u = queue.popleft()
            for w in self.neighbors(u):
                if w in nodes and w not in seen:
                    seen.add(w)
                    tree.append((min(u, w), max(u, w)))
                    queue.append(w)
        return tree

    def to_dot(self) -> str:
        lines = ["graph blockmap {"]
        lines += [f"  b{b};" for b in range(self.num_blocks)]
        lines += [f"  b{a} -- b{b};" for a, b in self.edges]
        return "\n".join(lines + ["}"]) + "\n"

    def to_json(self) -> str:
        return json.dumps({"blocks": self.num_blocks, "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "BlockMap":
        doc = json.loads(text)
        return cls(int(doc["blocks"]), tuple(tuple(e) for e in doc["edges"]), doc.get("degree_cap"))

    @classmethod
    def line(cls, n: int) -> "BlockMap":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def cycle(cls, n: int) -> "BlockMap":
        if n < 3:
            return cls.line(n)
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))


def adjacent_pairs(block_map: BlockMap) -> list[tuple[int, int]]:
    """Greedy maximal matching of the block map, scanning edges in sorted order."""
    used: set[int] = set()
    out = []
    for a, b in sorted(block_map.edges):
        if a not in used and b not in used:
            out.append((a, b))
            used.update((a, b))
    return out


@dataclass(frozen=True)
class ArchParams:
    B: int
    K: int
    total_qubits: int
    block_qubits: int
    bridge_data_qubits: int
    bridge_check_qubits: int
    num_bridges: int
    alpha: float  # bridges per block, R / B
    alpha_max: int  # largest per-block bridge count
    lam: float | None  # per-block qubits / n, uniform case only
    d: int
    formula_total: float | None  # B(λn + α(2d−1)) when uniform

    def to_dict(self) -> dict[str, object]:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class Architecture:
    blocks: tuple  # EacBlock per block id
    block_map: BlockMap
    bridges: dict[tuple[int, int], object]  # edge -> Bridge
    d: int
    seed: int | None = None
    params: ArchParams | None = field(default=None)

    def manifest(self, recipes: dict[str, list] | None = None) -> str:
        doc = {
            "blocks": [b.manifest() | {"id": i} for i, b in enumerate(self.blocks)],
            "block_map": json.loads(self.block_map.to_json()),
            "bridges": [
                {"edge": list(e), "endpoints": [list(p) for p in br.endpoints], "cycles": len(br.cycles),
                 "rho_after": br.rho_after, "length_after": br.length_after}
                for e, br in sorted(self.bridges.items())
            ],
            "params": self.params.to_dict() if self.params else None,
            "seed": self.seed,
            "activation_recipes": recipes or {},
        }
        return json.dumps(doc, indent=1, default=str)


def assemble(blocks: Sequence, block_map: BlockMap, d: int, seed: int | None = 0,
             expansion_max_ports: int = 10) -> Architecture:
    """One bridge per block-map edge, built between the two blocks' extractors."""
    from .extractor import bridge_extractors

    if len(blocks) != block_map.num_blocks:
        raise ValueError(f"{len(blocks)} blocks for a block map with {block_map.num_blocks} vertices")
    seeds = split_seed(seed, max(1, len(block_map.edges)))
    bridges = {}
    for (a, b), s in zip(block_map.edges, seeds):
        try:
            _, br = bridge_extractors(blocks[a].xgraph, blocks[b].xgraph, d=d, seed=s,
                                      expansion_max_ports=expansion_max_ports)
        except Exception as exc:
            raise RuntimeError(f"bridge on edge ({a}, {b}) failed: {exc}") from exc
        bridges[(a, b)] = br
    arch = Architecture(tuple(blocks), block_map, bridges, d, seed)
    object.__setattr__(arch, "params", parameters(arch))
    return arch


def parameters(arch: Architecture) -> ArchParams:
    B = len(arch.blocks)
    ks = [blk.code.k for blk in arch.blocks]
    block_q = sum(blk.num_qubits for blk in arch.blocks)
    data = check = 0
    for br in arch.bridges.values():
        dq, cq = br.qubit_cost()
        data += dq
        check += cq
    R = len(arch.bridges)
    per_block = [arch.block_map.degree(b) for b in range(B)]
    uniform = len({(blk.code.n, blk.num_qubits) for blk in arch.blocks}) == 1
    lam = formula = None
    if uniform and B:
        n = arch.blocks[0].code.n
        lam = arch.blocks[0].num_qubits / n
        alpha = R / B
        formula = B * (lam * n + alpha * (2 * arch.d - 1))
    return ArchParams(
        B=B,
        K=sum(k - 1 for k in ks),
        total_qubits=block_q + data + check,
        block_qubits=block_q,
        bridge_data_qubits=data,
        bridge_check_qubits=check,
        num_bridges=R,
        alpha=R / B if B else 0.0,
        alpha_max=max(per_block, default=0),
        lam=lam,
        d=arch.d,
        formula_total=formula,
    )


def qubit_offsets(arch: Architecture) -> list[int]:
    out, acc = [], 0
    for blk in arch.blocks:
        out.append(acc)
        acc += blk.code.n
    return out


def architecture_code(arch: Architecture) -> StabilizerCode:
    code = arch.blocks[0].code
    for blk in arch.blocks[1:]:
        code = code.direct_sum(blk.code)
    return code


@dataclass
class PartPlan:
    blocks: tuple[int, ...]
    tree: list[tuple[int, int]]
    operator: PauliOperator  # on the part's stacked code
    merged: object  # MergedCode
    joined: object  # ExtractorGraph


@dataclass
class ActivationPlan:
    parts: list[PartPlan]
    active: list[tuple[int, int]]
    inactive: list[tuple[int, int]]


def plan_parallel(arch: Architecture, parts: Sequence[Iterable[int]], ops: Sequence[PauliOperator]) -> ActivationPlan:
    """Measure one operator per connected part simultaneously.

    ``ops`` act on the stacked code of the whole architecture. Each part
    activates the bridges of a BFS spanning tree of its induced subgraph.
    """
    from .extractor import CapabilityError, SystemLink, compose_system
    from .surgery import MatchingError, build_merged_code

    if len(parts) != len(ops):
        raise ValueError("need one operator per part")
    part_sets = [tuple(sorted(set(p))) for p in parts]
    seen: set[int] = set()
    for p in part_sets:
        if seen & set(p):
            raise ValueError(f"parts overlap on blocks {sorted(seen & set(p))}")
        seen |= set(p)
    offsets = qubit_offsets(arch)
    plans = []
    active: list[tuple[int, int]] = []
    for blocks, op in zip(part_sets, ops):
        if not arch.block_map.is_connected(blocks):
            raise ValueError(f"part {list(blocks)} is not connected in the block map")
        allowed = {offsets[b] + q for b in blocks for q in range(arch.blocks[b].code.n)}
        stray = [q for q in op.support() if q not in allowed]
        if stray:
            raise ValueError(f"operator support {stray} escapes part {list(blocks)}")
        tree = arch.block_map.spanning_tree(blocks)
        local = {b: i for i, b in enumerate(blocks)}
        links = [SystemLink(local[a], local[b], arch.bridges[(a, b)]) for a, b in tree]
        joined = compose_system([arch.blocks[b].xgraph for b in blocks], links)
        cols = [offsets[b] + q for b in blocks for q in range(arch.blocks[b].code.n)]
        l = op.restrict(cols)
        if l.is_identity():
            raise ValueError(f"operator for part {list(blocks)} is trivial")
        within = {i: es for i, es in enumerate(joined.check_edge_sets)}
        try:
            mc = build_merged_code(joined.code, l, joined.restricted(l), within=within)
        except MatchingError as exc:
            raise CapabilityError(f"part {list(blocks)}: check {exc.check} has no matching") from exc
        plans.append(PartPlan(blocks, tree, l, mc, joined))
        active.extend(tree)
    inactive = [e for e in arch.block_map.edges if e not in set(active)]
    return ActivationPlan(plans, active, inactive)
