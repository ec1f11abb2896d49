"""Multi-level set-associative LRU write-back cache hierarchy.

Each level is independent (no inclusion enforced).  A demand miss fills
every level above the one that serviced it, write-allocate; dirty victims
are written back to the next level, allocating there if absent.  Service
levels are numbered from 0 (L1) to ``len(levels)`` (main memory).
"""

from __future__ import annotations

import csv
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .program import DynRecord


@dataclass(frozen=True)
class LevelConfig:
    capacity: int
    assoc: int

    def sets(self, line: int) -> int:
        return self.capacity // (self.assoc * line)


@dataclass(frozen=True)
class CacheConfig:
    levels: tuple[LevelConfig, ...] = (LevelConfig(32 * 1024, 8), LevelConfig(512 * 1024, 8))
    line: int = 64

    def __post_init__(self):
        if self.line <= 0 or self.line & (self.line - 1):
            raise ValueError(f"line size {self.line} is not a power of two")
        for i, lv in enumerate(self.levels, start=1):
            if lv.assoc <= 0 or lv.capacity <= 0:
                raise ValueError(f"L{i}: capacity and associativity must be positive")
            if lv.capacity % (lv.assoc * self.line):
                raise ValueError(
                    f"L{i}: capacity {lv.capacity} not divisible by assoc*line "
                    f"({lv.assoc}*{self.line})"
                )

    @property
    def names(self) -> list[str]:
        return [f"L{i}" for i in range(1, len(self.levels) + 1)] + ["MEM"]

    @property
    def depth(self) -> int:
        """Number of service levels, memory included."""
        return len(self.levels) + 1

    @classmethod
    def single(cls, capacity: int, assoc: int, line: int = 64) -> "CacheConfig":
        return cls((LevelConfig(capacity, assoc),), line)


@dataclass
class CacheStats:
    names: list[str]
    hits: list[int]
    misses: list[int]
    writebacks: list[int]
    load_counts: dict[int, list[int]] = field(default_factory=dict)
    store_counts: dict[int, list[int]] = field(default_factory=dict)

    def accesses(self, sid: int) -> int:
        return sum(self.load_counts[sid])

    def pr(self, sid: int) -> tuple[Fraction, ...]:
        """Per-level service probabilities of static load ``sid``."""
        counts = self.load_counts[sid]
        total = sum(counts)
        if total == 0:
            raise KeyError(sid)
        return tuple(Fraction(c, total) for c in counts)

    def global_pr(self) -> tuple[Fraction, ...]:
        totals = [0] * len(self.names)
        for counts in self.load_counts.values():
            for i, c in enumerate(counts):
                totals[i] += c
        n = sum(totals)
        if n == 0:
            return tuple(Fraction(0) for _ in totals)
        return tuple(Fraction(c, n) for c in totals)

    def level_rows(self) -> list[dict]:
        rows = []
        for i, name in enumerate(self.names):
            if i < len(self.hits):
                rows.append(
                    {"level": name, "hits": self.hits[i], "misses": self.misses[i],
                     "writebacks": self.writebacks[i]}
                )
            else:
                served = self.misses[-1] if self.misses else 0
                rows.append({"level": name, "hits": served, "misses": 0, "writebacks": 0})
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["level", "hits", "misses", "writebacks"],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(self.level_rows())

    def load_table(self) -> dict:
        table = {}
        for sid in sorted(self.load_counts):
            counts = self.load_counts[sid]
            total = sum(counts)
            table[str(sid)] = {
                "accesses": total,
                "serviced": dict(zip(self.names, counts)),
                "pr": {n: c / total for n, c in zip(self.names, counts)},
            }
        return table

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"levels": self.level_rows(), "loads": self.load_table()}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")


class CacheHierarchy:
    """Stateful simulator; ``access`` is the stepwise service-level query."""

    def __init__(self, cfg: CacheConfig):
        self.cfg = cfg
        self.nsets = [lv.sets(cfg.line) for lv in cfg.levels]
        self.sets: list[list[OrderedDict]] = [
            [OrderedDict() for _ in range(n)] for n in self.nsets
        ]
        n = len(cfg.levels)
        self.hits = [0] * n
        self.misses = [0] * n
        self.writebacks = [0] * n

    def _set(self, level: int, line: int) -> OrderedDict:
        return self.sets[level][line % self.nsets[level]]

    def _insert(self, level: int, line: int, dirty: bool) -> None:
        s = self._set(level, line)
        if len(s) >= self.cfg.levels[level].assoc:
            victim, vdirty = s.popitem(last=False)
            if vdirty:
                self.writebacks[level] += 1
                self._write_back(level + 1, victim)
        s[line] = dirty

    def _write_back(self, level: int, line: int) -> None:
        if level == len(self.cfg.levels):
            return
        s = self._set(level, line)
        if line in s:
            s[line] = True
        else:
            self._insert(level, line, True)

    def access(self, addr: int, write: bool = False) -> int:
        """Service one access; returns the level index that supplied the line."""
        line = addr // self.cfg.line
        service = len(self.cfg.levels)
        for i in range(len(self.cfg.levels)):
            s = self._set(i, line)
            if line in s:
                s.move_to_end(line)
                self.hits[i] += 1
                service = i
                break
            self.misses[i] += 1
        for i in reversed(range(service)):
            self._insert(i, line, False)
        if write:
            if self.cfg.levels:
                self._set(0, line)[line] = True
        return service

    @property
    def memory_writebacks(self) -> int:
        return self.writebacks[-1] if self.writebacks else 0


def service_level(sim: CacheHierarchy, addr: int, write: bool = False) -> int:
    return sim.access(addr, write)


def simulate(
    accesses: Iterable[DynRecord],
    cfg: CacheConfig,
    memory_size: Optional[int] = None,
) -> tuple[CacheStats, dict[int, int]]:
    """Run the memory records of a trace through a cold hierarchy.

    Returns the statistics and a map from record seq to service level.
    """
    sim = CacheHierarchy(cfg)
    labels: dict[int, int] = {}
    loads: dict[int, list[int]] = {}
    stores: dict[int, list[int]] = {}
    depth = cfg.depth
    for r in accesses:
        if not r.is_memory:
            continue
        if r.addr is None or r.addr < 0 or (memory_size is not None and r.addr >= memory_size):
            raise ValueError(f"record {r.seq}: address {r.addr} outside declared memory")
        lvl = sim.access(r.addr, r.is_store)
        labels[r.seq] = lvl
        table = stores if r.is_store else loads
        table.setdefault(r.sid, [0] * depth)[lvl] += 1
    stats = CacheStats(cfg.names, sim.hits, sim.misses, sim.writebacks, loads, stores)
    return stats, labels


def write_labels(trace_records: Sequence[DynRecord], labels: dict[int, int], cfg: CacheConfig,
                 path) -> None:
    """Export per-access service labels as JSON lines."""
    names = cfg.names
    with open(path, "w") as fh:
        for r in trace_records:
            if r.seq in labels:
                fh.write(json.dumps({"seq": r.seq, "sid": r.sid, "op": r.op, "addr": r.addr,
                                     "level": names[labels[r.seq]]},
                                    separators=(",", ":")) + "\n")
