"""Price native and transformed executions and report the gains.

The transformed run is a real re-execution: each swapped load instance gets
its value by interpreting its slice against the replay's own registers and
memory, and predicted values come from a perfect history buffer.  The cache
is re-simulated over the transformed access stream, so removed loads no
longer disturb it while memory-cut leaves do.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

from .cache import CacheConfig, CacheHierarchy
from .dependence import MEMORY, PREDICTED, REGISTER, RSlice, extract_rslice, evaluate_slice, prune
from .energy import EpiTable, LatencyTable, edp, gain_pct
from .program import DynamicTrace, Program, execute
from .transforms import (
    COMBINED,
    Analysis,
    Plan,
    PlanMismatch,
    analyze,
    input_predictor,
    program_digest,
)


@dataclass
class Meter:
    """Additive energy/cycle accumulator with a per-class breakdown."""

    t: EpiTable
    lt: LatencyTable
    energy: float = 0.0
    cycles: float = 0.0
    by_class: dict = field(default_factory=dict)

    def _add(self, key: str, e: float, c: float) -> None:
        self.energy += e
        self.cycles += c
        n, e0, c0 = self.by_class.get(key, (0, 0.0, 0.0))
        self.by_class[key] = (n + 1, e0 + e, c0 + c)

    def instr(self, cls: str) -> None:
        self._add(cls, self.t.instr(cls), self.lt.instr(cls))

    def memory(self, write: bool, level: int) -> None:
        e = self.t.store[level] if write else self.t.load[level]
        self._add("store" if write else "load", e, self.lt.memory[level])

    def predict(self) -> None:
        self._add("predict", self.t.predict, self.lt.predict)

    def writebacks(self, per_level: list[int]) -> None:
        # a dirty eviction from level i is a write service at level i+1; buffered, no stall
        for i, n in enumerate(per_level):
            for _ in range(n):
                self._add("writeback", self.t.store[i + 1], 0.0)

    @property
    def edp(self) -> float:
        return edp(self.energy, self.cycles)


@dataclass
class Totals:
    energy: float
    cycles: float

    @property
    def edp(self) -> float:
        return edp(self.energy, self.cycles)


@dataclass
class GainReport:
    policy: str
    theta: Optional[float]
    native: Totals
    transformed: Totals
    loads_removed: int = 0
    reexecuted: int = 0
    predictions: int = 0
    swapped_sites: int = 0
    predicted_sites: int = 0
    skipped_instances: int = 0
    memory_cut_accesses: int = 0
    anomaly_sites: tuple[int, ...] = ()
    node_counts_before: dict = field(default_factory=dict)
    node_counts_after: dict = field(default_factory=dict)
    semantics_preserved: bool = True
    class_totals: dict = field(default_factory=dict)
    native_class_totals: dict = field(default_factory=dict)

    @property
    def energy_gain(self) -> float:
        return gain_pct(self.native.energy, self.transformed.energy)

    @property
    def cycle_gain(self) -> float:
        return gain_pct(self.native.cycles, self.transformed.cycles)

    @property
    def edp_gain(self) -> float:
        return gain_pct(self.native.edp, self.transformed.edp)

    def row(self) -> dict:
        return {
            "policy": self.policy,
            "theta": "" if self.theta is None else repr(self.theta),
            "native_energy_pj": repr(self.native.energy),
            "native_cycles": repr(self.native.cycles),
            "native_edp": repr(self.native.edp),
            "energy_pj": repr(self.transformed.energy),
            "cycles": repr(self.transformed.cycles),
            "edp": repr(self.transformed.edp),
            "energy_gain_pct": repr(self.energy_gain),
            "cycle_gain_pct": repr(self.cycle_gain),
            "edp_gain_pct": repr(self.edp_gain),
            "loads_removed": self.loads_removed,
            "reexecuted": self.reexecuted,
            "predictions": self.predictions,
            "swapped_sites": self.swapped_sites,
            "predicted_sites": self.predicted_sites,
            "skipped_instances": self.skipped_instances,
            "memory_cut_accesses": self.memory_cut_accesses,
            "anomaly_sites": " ".join(str(s) for s in self.anomaly_sites),
            "semantics_preserved": int(self.semantics_preserved),
        }

    def to_json(self) -> dict:
        d = {
            "policy": self.policy,
            "theta": self.theta,
            "native": {**asdict(self.native), "edp": self.native.edp},
            "transformed": {**asdict(self.transformed), "edp": self.transformed.edp},
            "gains_pct": {"energy": self.energy_gain, "cycles": self.cycle_gain,
                          "edp": self.edp_gain},
        }
        for k in ("loads_removed", "reexecuted", "predictions", "swapped_sites",
                  "predicted_sites", "skipped_instances", "memory_cut_accesses",
                  "semantics_preserved"):
            d[k] = getattr(self, k)
        d["anomaly_sites"] = list(self.anomaly_sites)
        d["node_counts_before"] = {str(k): v for k, v in sorted(self.node_counts_before.items())}
        d["node_counts_after"] = {str(k): v for k, v in sorted(self.node_counts_after.items())}
        d["class_totals"] = {k: list(v) for k, v in sorted(self.class_totals.items())}
        return d


def price_native(trace: DynamicTrace, cfg: CacheConfig, t: EpiTable, lt: LatencyTable) -> Meter:
    meter = Meter(t, lt)
    sim = CacheHierarchy(cfg)
    for r in trace.records:
        if r.is_memory:
            meter.memory(r.is_store, sim.access(r.addr, r.is_store))
        else:
            meter.instr(r.cls)
    meter.writebacks(sim.writebacks)
    return meter


def _check_plan(plan: Plan, program: Program) -> None:
    if plan.program_digest and plan.program_digest != program_digest(program):
        raise PlanMismatch("plan was made for a different program")
    for sid in list(plan.swaps) + [s for s, _ in plan.predictions]:
        if not 0 <= sid < len(program):
            raise PlanMismatch(f"plan refers to unknown static instruction {sid}")
    for sid in list(plan.swaps) + list(plan.predicted_roots):
        if not program[sid].is_load:
            raise PlanMismatch(f"static instruction {sid} is not a load")


def instance_slices(plan: Plan, a: Analysis, t: EpiTable) -> tuple[dict[int, RSlice], int]:
    """Per-dynamic-instance slices for every swapped site, matched to the plan's shape."""
    out: dict[int, RSlice] = {}
    skipped = 0
    pruner = None
    if plan.policy == COMBINED:
        allowed = plan.predicted_inputs
        predicted = input_predictor(a.locality, plan.theta if plan.theta is not None else 1.0)
        pruner = lambda r: prune(r, lambda sid, k: (sid, k) in allowed and predicted(sid, k))
    instances = a.load_instances()
    for sid, rep in plan.swaps.items():
        shape = rep.shape()
        for seq in instances.get(sid, ()):
            r = extract_rslice(a.graph, seq, None, plan.window, t, a.cache)
            if isinstance(r, RSlice) and pruner:
                r = pruner(r)
            if isinstance(r, RSlice) and r.shape() == shape:
                out[seq] = r
            else:
                skipped += 1
    return out, skipped


def _histogram(slices) -> dict[int, int]:
    return dict(sorted(Counter(s.node_count for s in slices).items()))


def evaluate(
    plan: Plan,
    program: Program,
    inputs: Mapping[str, int] | None,
    cfg: CacheConfig,
    t: EpiTable,
    lt: LatencyTable,
    analysis: Analysis | None = None,
    max_steps: int = 1_000_000,
) -> GainReport:
    _check_plan(plan, program)
    t.check_depth(cfg.depth)
    a = analysis or analyze(program, inputs, cfg, max_steps)
    native = price_native(a.trace, cfg, t, lt)

    swapped, skipped = instance_slices(plan, a, t)
    roots = plan.predicted_roots
    native_trace = a.trace.records

    def override(seq, ins, addr, values, memory):
        r = swapped.get(seq)
        if r is not None:
            def leaf_value(leaf):
                if leaf.source == REGISTER:
                    return values[leaf.seq]
                if leaf.source == MEMORY:
                    return memory.get(native_trace[leaf.seq].addr, 0)
                return leaf.value
            return evaluate_slice(r, leaf_value)
        if ins.sid in roots:
            return native_trace[seq].value
        return None

    replay = execute(program, a.inputs, a.max_steps, load_override=override)
    meter = Meter(t, lt)
    sim = CacheHierarchy(cfg)
    removed = reexec = preds = cuts = 0
    for rec in replay.records:
        r = swapped.get(rec.seq)
        if r is not None and rec.is_load:
            removed += 1
            for leaf in r.leaves:
                if leaf.source == MEMORY:
                    cuts += 1
                    meter.memory(False, sim.access(native_trace[leaf.seq].addr))
                elif leaf.source == PREDICTED:
                    preds += 1
                    meter.predict()
            for n in r.nodes:
                meter.instr(n.cls)
            reexec += r.node_count
        elif rec.is_load and rec.sid in roots:
            removed += 1
            preds += 1
            meter.predict()
        elif rec.is_memory:
            meter.memory(rec.is_store, sim.access(rec.addr, rec.is_store))
        else:
            meter.instr(rec.cls)
    meter.writebacks(sim.writebacks)

    preserved = (
        replay.memory == a.trace.memory
        and replay.outputs == a.trace.outputs
        and len(replay.records) == len(a.trace.records)
    )
    before = plan.unpruned if plan.unpruned else plan.swaps
    return GainReport(
        policy=plan.policy,
        theta=plan.theta,
        native=Totals(native.energy, native.cycles),
        transformed=Totals(meter.energy, meter.cycles),
        loads_removed=removed,
        reexecuted=reexec,
        predictions=preds,
        swapped_sites=len(plan.swaps),
        predicted_sites=len(roots),
        skipped_instances=skipped,
        memory_cut_accesses=cuts,
        anomaly_sites=tuple(plan.anomalies),
        node_counts_before=_histogram(before.values()),
        node_counts_after=_histogram(plan.swaps.values()),
        semantics_preserved=preserved,
        class_totals=dict(meter.by_class),
        native_class_totals=dict(native.by_class),
    )


REPORT_FIELDS = [
    "config_hash", "workload", "policy", "theta", "native_energy_pj", "native_cycles",
    "native_edp", "energy_pj", "cycles", "edp", "energy_gain_pct", "cycle_gain_pct",
    "edp_gain_pct", "loads_removed", "reexecuted", "predictions", "swapped_sites",
    "predicted_sites", "skipped_instances", "memory_cut_accesses", "anomaly_sites",
    "semantics_preserved",
]


def write_reports_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_report_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
