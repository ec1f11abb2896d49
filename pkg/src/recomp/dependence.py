"""Dynamic dependence graph and Recalculation Slice (RSlice) extraction.

An RSlice replaces one dynamic load by re-executing the producer
instructions of the loaded value.  It is an upside-down tree: the root is the
immediate producer of the stored-then-loaded value, nodes at level ``l`` are
producers of nodes at level ``l-1``, and every operand of every node ends in
either a child node or a leaf input.
"""

from __future__ import annotations

import bisect
import json
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .cache import CacheStats
from .energy import EpiTable, probabilistic_load_cost, rslice_cost
from .program import OPCODE_CLASS, PRODUCER_OPS, DynamicTrace, DynRecord, alu

CONSTANT = "constant"
REGISTER = "register-available"
MEMORY = "memory-cut"
PREDICTED = "predicted"

DEFAULT_WINDOW = 64
MAX_NODES = 4096


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str  # "data" or "memory"
    operand: Optional[int] = None


class DependenceGraph:
    """Data edges follow operand provenance; memory edges link a load to the
    store that wrote its word (``None`` when the word is external)."""

    def __init__(self, trace: DynamicTrace):
        self.trace = trace
        self.records = trace.records
        self.data_edges: list[Edge] = []
        self.memory_edges: dict[int, Optional[int]] = {}
        self._stores: dict[int, list[int]] = {}
        for r in self.records:
            for k, d in enumerate(r.deps):
                if d is not None:
                    self.data_edges.append(Edge(d, r.seq, "data", k))
            if r.is_load:
                self.memory_edges[r.seq] = r.mdep
            elif r.is_store:
                self._stores.setdefault(r.addr, []).append(r.seq)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def edges(self) -> list[Edge]:
        mem = [Edge(s, l, "memory") for l, s in self.memory_edges.items() if s is not None]
        return self.data_edges + mem

    def external_loads(self) -> list[int]:
        return [l for l, s in self.memory_edges.items() if s is None]

    def producers(self, seq: int) -> list[int]:
        r = self.records[seq]
        out = [d for d in r.deps if d is not None]
        if r.is_load and r.mdep is not None:
            out.append(r.mdep)
        return out

    def latest_store_before(self, addr: int, seq: int) -> Optional[int]:
        stores = self._stores.get(addr)
        if not stores:
            return None
        i = bisect.bisect_left(stores, seq)
        return stores[i - 1] if i else None


def build_graph(trace: DynamicTrace) -> DependenceGraph:
    return DependenceGraph(trace)


@dataclass(frozen=True)
class Leaf:
    node: int
    operand: int
    source: str
    seq: Optional[int]  # defining record, None for immediates/program inputs
    sid: Optional[int]
    value: int


@dataclass(frozen=True)
class SliceNode:
    index: int
    seq: int
    sid: int
    op: str
    level: int
    parent: Optional[int]
    operand: Optional[int]
    # per operand: ("node", child index) or ("leaf", leaf index)
    inputs: tuple[tuple[str, int], ...]

    @property
    def cls(self) -> str:
        return OPCODE_CLASS[self.op]


@dataclass(frozen=True)
class RSlice:
    target: int
    target_sid: int
    nodes: tuple[SliceNode, ...]
    leaves: tuple[Leaf, ...]

    @property
    def root(self) -> SliceNode:
        return self.nodes[0]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def height(self) -> int:
        return 1 + max(n.level for n in self.nodes)

    def shape(self, index: int = 0):
        """Hashable structural signature, independent of dynamic values."""
        n = self.nodes[index]
        parts = []
        for kind, i in n.inputs:
            if kind == "node":
                parts.append(self.shape(i))
            else:
                leaf = self.leaves[i]
                parts.append((leaf.source, leaf.sid))
        return (n.sid, tuple(parts))

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "target_sid": self.target_sid,
            "node_count": self.node_count,
            "height": self.height,
            "nodes": [
                {"index": n.index, "seq": n.seq, "sid": n.sid, "op": n.op, "class": n.cls,
                 "level": n.level, "parent": n.parent, "operand": n.operand}
                for n in self.nodes
            ],
            "leaves": [
                {"node": l.node, "operand": l.operand, "source": l.source, "seq": l.seq,
                 "sid": l.sid, "value": l.value}
                for l in self.leaves
            ],
        }


@dataclass(frozen=True)
class Infeasible:
    target: int
    reason: str  # external-producer | empty-slice | cycle-free-violation | over-budget

    def __bool__(self) -> bool:
        return False


def availability(def_seq: Optional[int], target_seq: int, window: int) -> str:
    """Where a leaf input comes from at the time the target is recalculated."""
    if def_seq is None:
        return CONSTANT
    if target_seq - def_seq <= window:
        return REGISTER
    return MEMORY


# nested intermediate form: ("node", seq, [children]) / ("leaf", source, seq, value)
def _flatten(target: int, target_sid: int, records, tree) -> RSlice:
    nodes: list[SliceNode] = []
    leaves: list[Leaf] = []
    queue = deque([(tree, 0, None, None)])
    pending: list[tuple[int, list]] = []
    while queue:
        item, level, parent, operand = queue.popleft()
        idx = len(nodes)
        rec = records[item[1]]
        nodes.append(SliceNode(idx, rec.seq, rec.sid, rec.op, level, parent, operand, ()))
        slots: list = []
        for k, child in enumerate(item[2]):
            if child[0] == "node":
                slots.append(("node", child))
                queue.append((child, level + 1, idx, k))
            else:
                src_seq = child[2]
                sid = records[src_seq].sid if src_seq is not None else None
                leaves.append(Leaf(idx, k, child[1], src_seq, sid, child[3]))
                slots.append(("leaf", len(leaves) - 1))
        pending.append((idx, slots))
    # children were enqueued in order, so their indices follow the BFS numbering
    child_idx = {}
    for n in nodes:
        if n.parent is not None:
            child_idx[(n.parent, n.operand)] = n.index
    final = []
    for (idx, slots), n in zip(pending, nodes):
        inputs = tuple(
            ("node", child_idx[(idx, k)]) if kind == "node" else ("leaf", val)
            for k, (kind, val) in enumerate(slots)
        )
        final.append(SliceNode(n.index, n.seq, n.sid, n.op, n.level, n.parent, n.operand, inputs))
    return RSlice(target, target_sid, tuple(final), tuple(leaves))


def _nested(r: RSlice, index: int = 0):
    n = r.nodes[index]
    kids = []
    for kind, i in n.inputs:
        if kind == "node":
            kids.append(_nested(r, i))
        else:
            l = r.leaves[i]
            kids.append(("leaf", l.source, l.seq, l.value))
    return ("node", n.seq, kids)


class _Extractor:
    def __init__(self, g: DependenceGraph, target: int, window: int, t: EpiTable,
                 stats: CacheStats, max_nodes: int):
        self.g = g
        self.records = g.records
        self.target = target
        self.window = window
        self.t = t
        self.stats = stats
        self.max_nodes = max_nodes
        self._plc: dict[int, float] = {}

    def plc(self, sid: int) -> float:
        if sid not in self._plc:
            self._plc[sid] = probabilistic_load_cost(sid, self.stats, self.t)
        return self._plc[sid]

    def _cut_ok(self, d: DynRecord) -> bool:
        # re-reading is exact only if the word was not overwritten since d
        return self.g.latest_store_before(d.addr, self.target) == d.mdep

    def _stored_dep(self, d: DynRecord) -> Optional[int]:
        return self.records[d.mdep].deps[1]

    def _shallow(self, x: Optional[int]) -> float:
        if x is None or self.target - x <= self.window:
            return 0.0
        d = self.records[x]
        if d.op in PRODUCER_OPS:
            return self.t.instr(d.cls)
        return self.plc(d.sid) if d.is_load else 0.0

    def estimate(self, x: Optional[int]) -> float:
        """One-level lookahead cost of recalculating the value defined at ``x``."""
        if x is None or self.target - x <= self.window:
            return 0.0
        d = self.records[x]
        if d.op in PRODUCER_OPS:
            return self.t.instr(d.cls) + sum(self._shallow(dd) for dd in d.deps)
        if d.is_load:
            return self.plc(d.sid)
        return 0.0

    def resolve(self, dep: Optional[int], consumer: int):
        """Classify one operand: ("node", seq) or ("leaf", source, seq)."""
        if dep is not None and dep >= consumer:
            raise _Abort("cycle-free-violation")
        src = availability(dep, self.target, self.window)
        if src != MEMORY:
            return ("leaf", src, dep)
        d = self.records[dep]
        if d.op in PRODUCER_OPS:
            return ("node", dep)
        if not d.is_load:
            raise _Abort("cycle-free-violation")
        expandable = d.mdep is not None
        if self._cut_ok(d):
            if expandable and self.estimate(self._stored_dep(d)) <= self.plc(d.sid):
                return self.resolve(self._stored_dep(d), d.mdep)
            return ("leaf", MEMORY, dep)
        if expandable:
            return self.resolve(self._stored_dep(d), d.mdep)
        raise _Abort("external-producer")

    def root(self) -> int:
        rec = self.records[self.target]
        if not rec.is_load:
            raise ValueError(f"record {self.target} is not a load")
        cur = rec
        while True:
            if cur.mdep is None:
                raise _Abort("external-producer")
            dep = self.records[cur.mdep].deps[1]
            if dep is None:
                raise _Abort("empty-slice")
            prod = self.records[dep]
            if prod.op in PRODUCER_OPS:
                return dep
            if not prod.is_load:
                raise _Abort("empty-slice")
            cur = prod

    def run(self, budget: Optional[float]):
        root_seq = self.root()
        count = 1
        cost = self.t.instr(OPCODE_CLASS[self.records[root_seq].op])
        tree = ("node", root_seq, [])
        queue = deque([tree])
        while queue:
            node = queue.popleft()
            rec = self.records[node[1]]
            for k, dep in enumerate(rec.deps):
                res = self.resolve(dep, rec.seq)
                if res[0] == "node":
                    child = ("node", res[1], [])
                    node[2].append(child)
                    queue.append(child)
                    count += 1
                    cost += self.t.instr(OPCODE_CLASS[self.records[res[1]].op])
                    if count > self.max_nodes:
                        raise _Abort("over-budget")
                    if budget is not None and cost >= budget:
                        raise _Abort("over-budget")
                else:
                    node[2].append(("leaf", res[1], res[2], rec.args[k]))
        return tree


class _Abort(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def extract_rslice(
    g: DependenceGraph,
    target: int,
    budget: Optional[float],
    window: int,
    t: EpiTable,
    stats: CacheStats,
    max_nodes: int = MAX_NODES,
) -> Union[RSlice, Infeasible]:
    """Greedy breadth-first RSlice for the load at dynamic index ``target``.

    Out-of-window producer instructions are always expanded.  An out-of-window
    load input is either re-read (memory cut, priced at its probabilistic
    cost) or recalculated through the store that wrote it, whichever the
    one-level estimate says is no more expensive.  With a ``budget`` the
    extraction gives up as soon as the node energy alone reaches it.
    """
    ex = _Extractor(g, target, window, t, stats, max_nodes)
    try:
        tree = ex.run(budget)
    except _Abort as e:
        return Infeasible(target, e.reason)
    return _flatten(target, g.records[target].sid, g.records, tree)


def evaluate_slice(r: RSlice, leaf_value: Callable[[Leaf], int] | None = None) -> int:
    """Interpret the tree bottom-up; returns the root value."""
    values: dict[int, int] = {}
    for n in reversed(r.nodes):
        args = []
        for kind, i in n.inputs:
            if kind == "node":
                args.append(values[i])
            else:
                leaf = r.leaves[i]
                args.append(leaf_value(leaf) if leaf_value else leaf.value)
        values[n.index] = alu(n.op, tuple(args))
    return values[0]


def leaf_costs(r: RSlice, stats: CacheStats, t: EpiTable) -> list[float]:
    out = []
    for leaf in r.leaves:
        if leaf.source == MEMORY:
            out.append(probabilistic_load_cost(leaf.sid, stats, t))
        elif leaf.source == PREDICTED:
            out.append(t.predict)
        else:
            out.append(0.0)
    return out


def slice_cost(r: RSlice, stats: CacheStats, t: EpiTable) -> float:
    return rslice_cost(r, t, leaf_costs(r, stats, t))


def prune(r: RSlice, predicted: Callable[[int, int], bool]) -> RSlice:
    """Supply selected inputs of non-root nodes by prediction.

    ``predicted(sid, k)`` says whether operand ``k`` of static instruction
    ``sid`` is predictable.  Only operands that are fed by a child subtree or
    by a memory cut are replaced; the subtree below them disappears.
    """
    records_by_seq = {n.seq: n for n in r.nodes}

    def walk(index: int, is_root: bool):
        n = r.nodes[index]
        kids = []
        for k, (kind, i) in enumerate(n.inputs):
            leaf = r.leaves[i] if kind == "leaf" else None
            costly = kind == "node" or leaf.source == MEMORY
            if not is_root and costly and predicted(n.sid, k):
                if kind == "node":
                    child = r.nodes[i]
                    value = evaluate_slice(_sub(r, i))
                    kids.append(("leaf", PREDICTED, child.seq, value))
                else:
                    kids.append(("leaf", PREDICTED, leaf.seq, leaf.value))
            elif kind == "node":
                kids.append(walk(i, False))
            else:
                kids.append(("leaf", leaf.source, leaf.seq, leaf.value))
        return ("node", n.seq, kids)

    tree = walk(0, True)
    records = _RecordView(r, records_by_seq)
    return _flatten(r.target, r.target_sid, records, tree)


def _sub(r: RSlice, index: int) -> RSlice:
    """Subtree rooted at node ``index`` as a standalone slice (for its value)."""
    nested = _nested(r, index)
    view = _RecordView(r, {n.seq: n for n in r.nodes})
    return _flatten(r.target, r.target_sid, view, nested)


class _RecordView:
    """Minimal record lookup for re-flattening a slice without the trace."""

    def __init__(self, r: RSlice, nodes: dict[int, SliceNode]):
        self._nodes = nodes
        self._leaf_sids = {l.seq: l.sid for l in r.leaves if l.seq is not None}

    def __getitem__(self, seq: int):
        n = self._nodes.get(seq)
        if n is not None:
            return _Rec(seq, n.sid, n.op)
        return _Rec(seq, self._leaf_sids.get(seq), None)


@dataclass(frozen=True)
class _Rec:
    seq: int
    sid: Optional[int]
    op: Optional[str]


def shape_counts(slices) -> Counter:
    return Counter(s.shape() for s in slices)


def write_slices(slices, path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_json() for s in slices], fh, indent=2, sort_keys=True)
        fh.write("\n")
