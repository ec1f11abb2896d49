"""Recomputation planners: recalculation, prediction, and both combined.

Every candidate static load gets a :class:`Decision` note recording the
numbers its gate compared, so a plan can be audited without re-running
anything.  Gates are strict: a replacement is accepted only when it costs
less than the load's probabilistic energy.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional

from .cache import CacheConfig, CacheStats, simulate
from .dependence import (
    PREDICTED,
    DependenceGraph,
    Infeasible,
    Leaf,
    RSlice,
    SliceNode,
    build_graph,
    extract_rslice,
    prune,
    slice_cost,
)
from .energy import EpiTable, probabilistic_load_cost
from .locality import LocalityStats, profile
from .program import DynamicTrace, Program, execute

RECALCULATION = "recalculation"
PREDICTION = "prediction"
COMBINED = "combined"
NONE = "none"
POLICIES = (RECALCULATION, PREDICTION, COMBINED)
DEFAULT_THETA = 0.9


class PlanMismatch(ValueError):
    pass


def program_digest(program: Program) -> str:
    h = hashlib.sha256()
    for ins in program.instructions:
        h.update(ins.text().encode() + b"\n")
    h.update(repr((program.inputs, program.outputs, program.memory_size, program.init)).encode())
    return h.hexdigest()[:16]


@dataclass
class Decision:
    site: int  # static load the decision belongs to
    sid: int  # instruction whose value is swapped/predicted
    kind: str  # "swap" | "predict"
    scope: str  # "load" | "root-output" | "input:<k>"
    accepted: bool
    budget: Optional[float] = None
    cost: Optional[float] = None
    locality: Optional[float] = None
    count: Optional[int] = None
    theta: Optional[float] = None
    node_count: Optional[int] = None
    reason: str = ""
    anomaly: bool = False


@dataclass
class Plan:
    policy: str
    theta: Optional[float] = None
    window: int = 64
    swaps: dict[int, RSlice] = field(default_factory=dict)
    instances: dict[int, tuple[int, ...]] = field(default_factory=dict)
    unpruned: dict[int, RSlice] = field(default_factory=dict)
    predictions: set[tuple[int, str]] = field(default_factory=set)
    notes: list[Decision] = field(default_factory=list)
    program_digest: Optional[str] = None

    @property
    def predicted_roots(self) -> set[int]:
        return {sid for sid, scope in self.predictions if scope == "root-output"}

    @property
    def predicted_inputs(self) -> set[tuple[int, int]]:
        return {(sid, int(scope.split(":")[1])) for sid, scope in self.predictions
                if scope.startswith("input:")}

    @property
    def anomalies(self) -> list[int]:
        return sorted({d.site for d in self.notes if d.anomaly})

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "theta": self.theta,
            "window": self.window,
            "program_digest": self.program_digest,
            "swaps": {
                str(sid): {
                    "slice": _slice_json(r),
                    "unpruned": _slice_json(self.unpruned[sid]) if sid in self.unpruned else None,
                    "instances": list(self.instances.get(sid, ())),
                }
                for sid, r in sorted(self.swaps.items())
            },
            "predictions": [[sid, scope] for sid, scope in sorted(self.predictions)],
            "notes": [asdict(d) for d in self.notes],
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "Plan":
        plan = cls(policy=d["policy"], theta=d.get("theta"), window=d.get("window", 64),
                   program_digest=d.get("program_digest"))
        for sid, entry in d.get("swaps", {}).items():
            plan.swaps[int(sid)] = _slice_from_json(entry["slice"])
            if entry.get("unpruned"):
                plan.unpruned[int(sid)] = _slice_from_json(entry["unpruned"])
            plan.instances[int(sid)] = tuple(entry.get("instances", ()))
        plan.predictions = {(int(sid), scope) for sid, scope in d.get("predictions", ())}
        plan.notes = [Decision(**n) for n in d.get("notes", ())]
        return plan

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _slice_json(r: RSlice) -> dict:
    d = r.to_json()
    for nd, n in zip(d["nodes"], r.nodes):
        nd["inputs"] = [list(x) for x in n.inputs]
    return d


def _slice_from_json(d: Mapping) -> RSlice:
    nodes = tuple(
        SliceNode(n["index"], n["seq"], n["sid"], n["op"], n["level"], n["parent"], n["operand"],
                  tuple((k, i) for k, i in n["inputs"]))
        for n in d["nodes"]
    )
    leaves = tuple(Leaf(l["node"], l["operand"], l["source"], l["seq"], l["sid"], l["value"])
                   for l in d["leaves"])
    return RSlice(d["target"], d["target_sid"], nodes, leaves)


def empty_plan(window: int = 64) -> Plan:
    return Plan(policy=NONE, window=window)


@dataclass
class Analysis:
    """Native run of a program and everything the planners consume."""

    program: Program
    inputs: dict
    trace: DynamicTrace
    graph: DependenceGraph
    cache: CacheStats
    labels: dict[int, int]
    locality: LocalityStats
    cfg: CacheConfig
    max_steps: int = 1_000_000

    def load_instances(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for r in self.trace.records:
            if r.is_load:
                out.setdefault(r.sid, []).append(r.seq)
        return out


def analyze(program: Program, inputs: Mapping[str, int] | None, cfg: CacheConfig,
            max_steps: int = 1_000_000) -> Analysis:
    trace = execute(program, inputs, max_steps)
    stats, labels = simulate(trace.records, cfg, program.memory_size)
    return Analysis(program, dict(inputs or {}), trace, build_graph(trace), stats, labels,
                    profile(trace), cfg, max_steps)


def _load_sids(stats: CacheStats) -> list[int]:
    return sorted(sid for sid, c in stats.load_counts.items() if sum(c) > 0)


def _instances(g: DependenceGraph, sid: int) -> list[int]:
    return [r.seq for r in g.records if r.is_load and r.sid == sid]


def site_slices(
    g: DependenceGraph,
    stats: CacheStats,
    t: EpiTable,
    window: int,
    sid: int,
    budget: Optional[float],
    pruner: Callable[[RSlice], RSlice] | None = None,
):
    """Extract every dynamic instance of static load ``sid``.

    Returns (representative, unpruned representative, matching instance seqs,
    infeasibility reasons).  The representative is the first instance of the
    most frequent slice shape.
    """
    slices: dict[int, RSlice] = {}
    raw: dict[int, RSlice] = {}
    reasons: Counter = Counter()
    for seq in _instances(g, sid):
        r = extract_rslice(g, seq, budget, window, t, stats)
        if isinstance(r, Infeasible):
            reasons[r.reason] += 1
            continue
        raw[seq] = r
        slices[seq] = pruner(r) if pruner else r
    if not slices:
        return None, None, (), reasons
    shapes = Counter(s.shape() for s in slices.values())
    best = max(shapes.values())
    first = next(seq for seq, s in slices.items() if shapes[s.shape()] == best)
    shape = slices[first].shape()
    matching = tuple(seq for seq, s in slices.items() if s.shape() == shape)
    return slices[first], raw[first], matching, reasons


def _reason(reasons: Counter) -> str:
    return reasons.most_common(1)[0][0] if reasons else "no-instances"


def plan_recalculation(g: DependenceGraph, stats: CacheStats, t: EpiTable, window: int = 64) -> Plan:
    plan = Plan(policy=RECALCULATION, window=window)
    for sid in _load_sids(stats):
        budget = probabilistic_load_cost(sid, stats, t)
        rep, _, matching, reasons = site_slices(g, stats, t, window, sid, budget)
        if rep is None:
            plan.notes.append(Decision(sid, sid, "swap", "load", False, budget,
                                       reason=_reason(reasons)))
            continue
        cost = slice_cost(rep, stats, t)
        ok = cost < budget
        plan.notes.append(Decision(sid, sid, "swap", "load", ok, budget, cost,
                                   node_count=rep.node_count,
                                   reason="cheaper than load" if ok else "not cheaper than load"))
        if ok:
            plan.swaps[sid] = rep
            plan.instances[sid] = matching
    return plan


def _root_gate(sid: int, loc: LocalityStats, budget: float, t: EpiTable, theta: float):
    lv = loc.loc_out(sid)
    n = loc.count.get(sid, 0)
    if n < 2:
        return False, "ineligible (single instance)"
    if lv < theta:
        return False, "locality below threshold"
    if not t.predict < budget:
        return False, "prediction not cheaper than load"
    return True, "locality at or above threshold"


def plan_prediction(locality: LocalityStats, stats: CacheStats, t: EpiTable,
                    theta: float = DEFAULT_THETA) -> Plan:
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    plan = Plan(policy=PREDICTION, theta=theta)
    for sid in _load_sids(stats):
        budget = probabilistic_load_cost(sid, stats, t)
        ok, why = _root_gate(sid, locality, budget, t, theta)
        plan.notes.append(Decision(sid, sid, "predict", "root-output", ok, budget, t.predict,
                                   locality.loc_out(sid), locality.count.get(sid, 0), theta,
                                   reason=why))
        if ok:
            plan.predictions.add((sid, "root-output"))
    return plan


def input_predictor(locality: LocalityStats, theta: float) -> Callable[[int, int], bool]:
    def predicted(sid: int, k: int) -> bool:
        return locality.eligible(sid) and locality.loc_in(sid, k) >= theta
    return predicted


def plan_combined(g: DependenceGraph, stats: CacheStats, locality: LocalityStats, t: EpiTable,
                  theta: float = DEFAULT_THETA, window: int = 64) -> Plan:
    """Prediction first: a load whose value recurs often enough is predicted
    even when its slice would be cheaper; otherwise its slice is pruned where
    node inputs recur and swapped if still under budget."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    plan = Plan(policy=COMBINED, theta=theta, window=window)
    predicted = input_predictor(locality, theta)

    def pruner(r: RSlice) -> RSlice:
        return prune(r, predicted)

    for sid in _load_sids(stats):
        budget = probabilistic_load_cost(sid, stats, t)
        ok, why = _root_gate(sid, locality, budget, t, theta)
        rep, raw, matching, reasons = site_slices(g, stats, t, window, sid, None, pruner)
        if ok:
            anomaly = False
            if raw is not None:
                recalc = slice_cost(raw, stats, t)
                anomaly = recalc < budget and recalc < t.predict
            plan.notes.append(Decision(sid, sid, "predict", "root-output", True, budget,
                                       t.predict, locality.loc_out(sid),
                                       locality.count.get(sid, 0), theta, reason=why,
                                       anomaly=anomaly))
            plan.predictions.add((sid, "root-output"))
            continue
        if rep is None:
            plan.notes.append(Decision(sid, sid, "swap", "load", False, budget,
                                       reason=_reason(reasons)))
            continue
        cost = slice_cost(rep, stats, t)
        accepted = cost < budget
        plan.notes.append(Decision(sid, sid, "swap", "load", accepted, budget, cost,
                                   node_count=rep.node_count,
                                   reason="cheaper than load" if accepted else "not cheaper than load"))
        if not accepted:
            continue
        plan.swaps[sid] = rep
        plan.unpruned[sid] = raw
        plan.instances[sid] = matching
        for leaf in rep.leaves:
            if leaf.source != PREDICTED:
                continue
            consumer = rep.nodes[leaf.node].sid
            scope = f"input:{leaf.operand}"
            if (consumer, scope) in plan.predictions:
                continue
            plan.predictions.add((consumer, scope))
            plan.notes.append(Decision(sid, consumer, "predict", scope, True, budget, t.predict,
                                       locality.loc_in(consumer, leaf.operand),
                                       locality.count.get(consumer, 0), theta,
                                       reason="input locality at or above threshold"))
    return plan


def make_plan(policy: str, a: Analysis, t: EpiTable, theta: float = DEFAULT_THETA,
              window: int = 64) -> Plan:
    if policy == NONE:
        plan = empty_plan(window)
    elif policy == RECALCULATION:
        plan = plan_recalculation(a.graph, a.cache, t, window)
    elif policy == PREDICTION:
        plan = plan_prediction(a.locality, a.cache, t, theta)
        plan.window = window
    elif policy == COMBINED:
        plan = plan_combined(a.graph, a.cache, a.locality, t, theta, window)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    plan.program_digest = program_digest(a.program)
    return plan


def audit(plan: Plan) -> list[str]:
    """Re-check every accepted decision from its recorded numbers alone."""
    bad = []
    for d in plan.notes:
        if not d.accepted:
            continue
        if d.kind == "swap":
            if d.cost is None or d.budget is None or not d.cost < d.budget:
                bad.append(f"swap of {d.sid}: cost {d.cost} not below budget {d.budget}")
        elif d.kind == "predict":
            if d.locality is None or d.theta is None or d.locality < d.theta:
                bad.append(f"prediction of {d.sid}/{d.scope}: locality {d.locality} < {d.theta}")
            if d.count is None or d.count < 2:
                bad.append(f"prediction of {d.sid}/{d.scope}: only {d.count} instances")
            if d.cost is None or d.budget is None or not d.cost < d.budget:
                bad.append(f"prediction of {d.sid}/{d.scope}: cost {d.cost} not below {d.budget}")
    return bad


def pruning_histograms(a: Analysis, t: EpiTable, thetas, window: int = 64) -> dict[str, dict[int, int]]:
    """Node-count histograms of every feasible site's representative slice,
    unpruned ("none") and pruned at each threshold."""
    raw = []
    for sid in _load_sids(a.cache):
        _, r, _, _ = site_slices(a.graph, a.cache, t, window, sid, None)
        if r is not None:
            raw.append(r)
    out = {"none": dict(sorted(Counter(r.node_count for r in raw).items()))}
    for th in thetas:
        predicted = input_predictor(a.locality, th)
        pruned = [prune(r, predicted) for r in raw]
        out[repr(float(th))] = dict(sorted(Counter(r.node_count for r in pruned).items()))
    return out
