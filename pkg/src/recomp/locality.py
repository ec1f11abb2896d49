"""Last-value locality of instruction outputs and inputs, and histograms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .program import DynamicTrace

ROOT = "root"
NON_ROOT = "non-root"
DEFAULT_EDGES = tuple(i / 10 for i in range(11))


class _Run:
    __slots__ = ("n", "last", "repeats")

    def __init__(self):
        self.n = 0
        self.last = None
        self.repeats = 0

    def push(self, v) -> None:
        if self.n and v == self.last:
            self.repeats += 1
        self.last = v
        self.n += 1

    @property
    def locality(self) -> float:
        return self.repeats / (self.n - 1) if self.n >= 2 else 0.0


@dataclass
class LocalityStats:
    count: dict[int, int] = field(default_factory=dict)
    out: dict[int, float] = field(default_factory=dict)
    inputs: dict[int, tuple[float, ...]] = field(default_factory=dict)
    # operand positions fed by a register (immediates always recur)
    reg_operands: dict[int, tuple[int, ...]] = field(default_factory=dict)
    roles: dict[int, set[str]] = field(default_factory=dict)

    def eligible(self, sid: int) -> bool:
        return self.count.get(sid, 0) >= 2

    def loc_out(self, sid: int) -> float:
        return self.out.get(sid, 0.0)

    def loc_in(self, sid: int, k: int) -> float:
        ins = self.inputs.get(sid, ())
        return ins[k] if k < len(ins) else 0.0

    def input_locality(self, sid: int) -> Optional[float]:
        """Locality of an instruction's register inputs taken together (their minimum)."""
        ks = self.reg_operands.get(sid, ())
        if not ks:
            return None
        return min(self.loc_in(sid, k) for k in ks)

    def tag(self, sid: int, role: str) -> None:
        self.roles.setdefault(sid, set()).add(role)

    def with_role(self, role: str) -> list[int]:
        return sorted(s for s, r in self.roles.items() if role in r)


def profile(trace: DynamicTrace) -> LocalityStats:
    """One forward pass over the trace; locality is adjacent-value recurrence."""
    outs: dict[int, _Run] = {}
    ins: dict[int, list[_Run]] = {}
    regs: dict[int, tuple[int, ...]] = {}
    counts: dict[int, int] = {}
    for r in trace.records:
        counts[r.sid] = counts.get(r.sid, 0) + 1
        if r.value is not None:
            outs.setdefault(r.sid, _Run()).push(r.value)
        runs = ins.get(r.sid)
        if runs is None:
            runs = ins[r.sid] = [_Run() for _ in r.args]
            regs[r.sid] = tuple(k for k, d in enumerate(r.deps) if d is not None)
        for run, v in zip(runs, r.args):
            run.push(v)
    stats = LocalityStats()
    for sid, runs in ins.items():
        stats.count[sid] = counts[sid]
        stats.inputs[sid] = tuple(run.locality for run in runs)
        stats.reg_operands[sid] = regs[sid]
        if sid in outs:
            stats.out[sid] = outs[sid].locality
    return stats


def tag_roles(stats: LocalityStats, slices: Iterable) -> LocalityStats:
    """Copy of ``stats`` with replaced loads marked as roots and every other
    slice instruction as non-root."""
    out = replace(stats, roles={sid: set(r) for sid, r in stats.roles.items()})
    for s in slices:
        out.tag(s.target_sid, ROOT)
        for n in s.nodes[1:]:
            out.tag(n.sid, NON_ROOT)
    return out


@dataclass(frozen=True)
class Histogram:
    role: str
    weighting: str
    bins: tuple[tuple[float, float], ...]
    shares: tuple[float, ...]  # percent

    @property
    def empty(self) -> bool:
        return not any(self.shares)


def make_bins(edges: Sequence[float] = DEFAULT_EDGES) -> tuple[tuple[float, float], ...]:
    edges = sorted(edges)
    if edges[0] > 0 or edges[-1] < 1:
        raise ValueError("bin edges must cover [0, 1]")
    bins = [(a, b) for a, b in zip(edges, edges[1:])]
    bins.append((edges[-1], edges[-1]))
    return tuple(bins)


def _bin_index(bins, x: float) -> int:
    last = bins[-1]
    if x >= last[0]:
        return len(bins) - 1
    for i, (lo, hi) in enumerate(bins[:-1]):
        if lo <= x < hi:
            return i
    return 0 if x < bins[0][0] else len(bins) - 2


def role_values(stats: LocalityStats, role: str) -> list[tuple[int, float, int]]:
    """(sid, locality, dynamic count) for every instruction carrying ``role``."""
    out = []
    for sid in stats.with_role(role):
        if role == ROOT:
            loc = stats.loc_out(sid)
        else:
            loc = stats.input_locality(sid)
            if loc is None:
                continue
        out.append((sid, loc, stats.count.get(sid, 0)))
    return out


def histogram(
    stats: LocalityStats,
    bins: Sequence[tuple[float, float]] | None = None,
    weighting: str = "static",
    role: str = ROOT,
) -> Histogram:
    if weighting not in ("static", "dynamic"):
        raise ValueError(f"unknown weighting {weighting!r}")
    bins = tuple(bins) if bins is not None else make_bins()
    weights = [0.0] * len(bins)
    for _, loc, n in role_values(stats, role):
        weights[_bin_index(bins, loc)] += 1.0 if weighting == "static" else float(n)
    total = sum(weights)
    shares = tuple(100.0 * w / total for w in weights) if total else tuple(0.0 for _ in weights)
    return Histogram(role, weighting, bins, shares)


def write_histograms(path, pairs: Iterable[tuple[Histogram, Histogram]], extra: dict | None = None) -> None:
    """CSV rows (bin_low, bin_high, share_static_pct, share_dynamic_pct, role)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "share_static_pct", "share_dynamic_pct", "role",
                    *extra.keys()])
        for hs, hd in pairs:
            for (lo, hi), a, b in zip(hs.bins, hs.shares, hd.shares):
                w.writerow([f"{lo * 100:g}", f"{hi * 100:g}", repr(a), repr(b), hs.role,
                            *extra.values()])
