"""Energy/latency pricing: per-class EPI, per-level memory service, EDP."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .cache import CacheStats

INSTR_CLASSES = ("alu-simple", "alu-mul", "alu-div", "control")


class TableError(ValueError):
    pass


def _freeze(m: Mapping[str, float]) -> dict[str, float]:
    return {k: float(v) for k, v in m.items()}


@dataclass(frozen=True)
class EpiTable:
    """Energy per instruction class and per memory level, picojoules.

    ``load`` and ``store`` are indexed by service level (L1, L2, ..., MEM).
    """

    classes: Mapping[str, float] = field(
        default_factory=lambda: {"alu-simple": 1.0, "alu-mul": 3.0, "alu-div": 12.0, "control": 1.0}
    )
    load: tuple[float, ...] = (10.0, 40.0, 200.0)
    store: tuple[float, ...] = (10.0, 40.0, 200.0)
    predict: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "classes", _freeze(self.classes))
        object.__setattr__(self, "load", tuple(float(x) for x in self.load))
        object.__setattr__(self, "store", tuple(float(x) for x in self.store))
        object.__setattr__(self, "predict", float(self.predict))
        missing = [c for c in INSTR_CLASSES if c not in self.classes]
        if missing:
            raise TableError(f"EPI table lacks classes: {', '.join(missing)}")
        values = list(self.classes.values()) + list(self.load) + list(self.store) + [self.predict]
        if any(v < 0 for v in values):
            raise TableError("EPI entries must be non-negative")
        for name, seq in (("load", self.load), ("store", self.store)):
            if any(a > b for a, b in zip(seq, seq[1:])):
                raise TableError(f"{name} EPI must be non-decreasing with memory depth")
        if len(self.load) != len(self.store):
            raise TableError("load and store EPI need one entry per level")

    def instr(self, cls: str) -> float:
        return self.classes[cls]

    def scaled(self, k: float) -> "EpiTable":
        return replace(
            self,
            classes={c: v * k for c, v in self.classes.items()},
            load=tuple(v * k for v in self.load),
            store=tuple(v * k for v in self.store),
            predict=self.predict * k,
        )

    def check_depth(self, depth: int) -> None:
        if len(self.load) != depth:
            raise TableError(f"EPI table has {len(self.load)} memory levels, cache has {depth}")


@dataclass(frozen=True)
class LatencyTable:
    """Cycles per instruction class, per memory level service and per prediction."""

    classes: Mapping[str, float] = field(
        default_factory=lambda: {"alu-simple": 1.0, "alu-mul": 3.0, "alu-div": 20.0, "control": 1.0}
    )
    memory: tuple[float, ...] = (3.0, 12.0, 100.0)
    predict: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "classes", _freeze(self.classes))
        object.__setattr__(self, "memory", tuple(float(x) for x in self.memory))
        object.__setattr__(self, "predict", float(self.predict))
        missing = [c for c in INSTR_CLASSES if c not in self.classes]
        if missing:
            raise TableError(f"latency table lacks classes: {', '.join(missing)}")
        if any(v < 0 for v in self.classes.values()) or self.predict < 0:
            raise TableError("latencies must be non-negative")
        if any(v < 1 for v in self.memory):
            raise TableError("memory service latencies must be at least one cycle")

    def instr(self, cls: str) -> float:
        return self.classes[cls]

    def scaled(self, k: float) -> "LatencyTable":
        return replace(
            self,
            classes={c: v * k for c, v in self.classes.items()},
            memory=tuple(v * k for v in self.memory),
            predict=self.predict * k,
        )


def weighted_cost(pr: Sequence, epi: Sequence[float]) -> float:
    return float(sum(p * e for p, e in zip(pr, epi)))


def probabilistic_load_cost(sid: int, stats: CacheStats, t: EpiTable) -> float:
    """Expected service energy of static load ``sid``; also its recomputation budget."""
    if sid not in stats.load_counts or stats.accesses(sid) == 0:
        raise KeyError(f"unknown static load {sid}")
    return weighted_cost(stats.pr(sid), t.load)


def rslice_cost(r, t: EpiTable, leaf_costs: Optional[Sequence[float]] = None) -> float:
    """Re-execution energy of every slice node plus the leaf input acquisition costs."""
    total = sum(t.instr(n.cls) for n in r.nodes)
    if leaf_costs is not None:
        total += sum(leaf_costs)
    return float(total)


def edp(total_energy: float, total_cycles: float) -> float:
    if total_energy < 0 or total_cycles < 0:
        raise ValueError("energy and cycles must be non-negative")
    return total_energy * total_cycles


def gain_pct(native: float, transformed: float) -> float:
    if native == 0:
        return 0.0
    return (1.0 - transformed / native) * 100.0


def write_class_totals(path, totals: Mapping[str, tuple[int, float, float]]) -> None:
    """CSV of (class, count, energy_pj, cycles)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "count", "energy_pj", "cycles"])
        for cls in sorted(totals):
            n, e, c = totals[cls]
            w.writerow([cls, n, repr(e), repr(c)])
