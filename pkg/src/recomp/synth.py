"""Generators for the shipped microbenchmarks.

Each generator returns program text.  The files under ``workloads/`` are the
output of these functions with their default arguments; regenerate them with
``python -m recomp.synth DIR``.

Addresses are chosen against the default hierarchy (64 B lines, 64 L1 sets,
1024 L2 sets): lines 65536 bytes apart share both an L1 and an L2 set, lines
4096 bytes apart share only the L1 set.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

MEMORY = 4 * 1024 * 1024
L2_STRIDE = 65536
L1_STRIDE = 4096


class Builder:
    def __init__(self, title: str, memory: int = MEMORY):
        self.lines = [f"# {title}", f"memory {memory}"]
        self._n = 0

    def emit(self, *lines: str) -> "Builder":
        self.lines.extend(lines)
        return self

    def fresh(self, stem: str) -> str:
        self._n += 1
        return f"{stem}{self._n}"

    def filler(self, n: int) -> "Builder":
        """n independent single-cycle ALU instructions."""
        for _ in range(n):
            self.emit(f"{self.fresh('f')} = add zero, 1")
        return self

    def thrash_stores(self, addr: int, n: int, stride: int = L2_STRIDE, first: int = 1) -> "Builder":
        for k in range(first, first + n):
            self.emit(f"store [zero + {addr + k * stride}], zero")
        return self

    def thrash_loads(self, addr: int, n: int, stride: int = L2_STRIDE, first: int = 1) -> "Builder":
        # never-written words: clean lines, so evictions cost no writeback
        for k in range(first, first + n):
            self.emit(f"{self.fresh('t')} = load [zero + {addr + k * stride}]")
        return self

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def reload() -> str:
    b = Builder("compute a value, store it, thrash its cache set, reload it; then an L1-hot reload")
    b.emit("input seed = 3", "output cold, hot", "zero = const 0",
           "a = mul seed, 3", "b = add a, 7", "c = mul b, b", "store [zero + 64], c")
    b.thrash_stores(64, 20)
    b.emit("cold = load [zero + 64]   # serviced by memory",
           "h = div c, 7", "store [zero + 8], h",
           "hot = load [zero + 8]     # L1 hit", "halt")
    return b.text()


def loop() -> str:
    b = Builder("three-iteration counted loop; the counter lives in memory")
    b.emit("output j", "zero = const 0", "n = const 3", "store [zero], n",
           "loop:", "  i = load [zero]", "  j = sub i, 1", "  store [zero], j",
           "  branch j, loop", "halt")
    return b.text()


def figslice() -> str:
    b = Builder("two reloads: a root with two producers, and a three-deep producer chain")
    b.emit("input x = 6, y = 7", "output ra, rb", "zero = const 0",
           "p = mul x, y", "q = const 5", "a = mul x, 3", "b1 = add a, 1")
    b.filler(70)
    b.emit("r = add p, q", "store [zero + 64], r", "c = mul b1, 5", "store [zero + 128], c")
    b.thrash_stores(64, 20)
    b.thrash_stores(128, 20)
    b.emit("ra = load [zero + 64]", "rb = load [zero + 128]", "halt")
    return b.text()


def _locality_loop(b: Builder, iterations: int) -> Builder:
    b.emit(f"n = const {iterations}", "store [zero], n",
           "loop:", "  i = load [zero]", "  v = load [zero + 64]",
           "  w = add v, i", "  store [zero + 128], w")
    b.thrash_stores(64, 20)
    return b.emit("  j = sub i, 1", "  store [zero], j", "  branch j, loop", "halt")


def locality() -> str:
    b = Builder("a constant computed by a deep chain is reloaded every iteration")
    b.emit("input seed = 5", "output w", "zero = const 0",
           "a = const 7", "b1 = mul a, seed", "c = mul b1, b1", "d = div c, 3", "e = div d, 2",
           "store [zero + 64], e")
    b.filler(64)
    return _locality_loop(b, 12).text()


def oneslice() -> str:
    b = Builder("a constant computed by one add is reloaded every iteration")
    b.emit("input seed = 5", "output w", "zero = const 0", "e = add seed, 5",
           "store [zero + 64], e")
    b.filler(64)
    return _locality_loop(b, 12).text()


def greedy() -> str:
    """Five independent reload sites, each in its own cache set."""
    b = Builder("five reload sites at different service levels and slice costs")
    b.emit("input x = 9", "output s1, s3, s4, s5, s6", "zero = const 0")
    # S1: cold, one add
    b.emit("v1 = add x, 1", "store [zero + 64], v1")
    b.thrash_loads(64, 20)
    # S3 and S4: chains out of the window, values resident in L2 only
    b.emit("g1 = div x, 2", "g2 = div g1, 2", "g3 = div g2, 2", "v3 = add g3, 1",
           "store [zero + 192], v3",
           "k1 = div x, 3", "k2 = div k1, 2", "k3 = div k2, 2", "k4 = mul k3, 3",
           "v4 = mul k4, 5", "store [zero + 320], v4")
    b.thrash_loads(192, 10, L1_STRIDE)
    b.thrash_loads(320, 10, L1_STRIDE)
    b.filler(50)
    b.emit("s1 = load [zero + 64]     # memory, slice 1 pJ",
           "s3 = load [zero + 192]    # L2, slice 37 pJ",
           "s4 = load [zero + 320]    # L2, slice 45 pJ")
    # S5 and S6: L1-hot
    b.emit("v5 = div x, 4", "store [zero + 448], v5", "s5 = load [zero + 448]   # L1, slice 12 pJ",
           "v6 = add x, 2", "store [zero + 576], v6", "s6 = load [zero + 576]   # L1, slice 1 pJ",
           "halt")
    return b.text()


def prune() -> str:
    b = Builder("a reloaded value whose slice has an invariant subtree")
    b.emit("output v", "zero = const 0", "k = const 7", "n = const 10", "store [zero], n",
           "loop:", "  i = load [zero]", "  m = mul k, k", "  p = div m, 3", "  q = add i, p",
           "  r = mul q, 5", "  store [zero + 64], r")
    b.thrash_stores(64, 20)
    b.filler(50)
    b.emit("  v = load [zero + 64]")
    # evict again so the reload does not prefetch the next iteration's store
    b.thrash_stores(64, 20, first=21)
    b.emit("  j = sub i, 1", "  store [zero], j", "  branch j, loop", "halt")
    return b.text()


def graded(iterations: int = 20) -> str:
    """Six reload sites whose values recur at graded rates."""
    b = Builder("reloaded quotients i/d recur more often as d grows")
    divisors = (1, 2, 3, 5, 10)
    b.emit("output w", "zero = const 0", f"n = const {iterations}", "store [zero], n",
           "loop:", "  i = load [zero]")
    addrs = [64 + (30 + s) * L2_STRIDE for s in range(len(divisors) + 1)]
    for s, d in enumerate(divisors):
        b.emit(f"  q{d} = div i, {d}", f"  store [zero + {addrs[s]}], q{d}")
    b.emit("  c = mul n, 3", f"  store [zero + {addrs[-1]}], c")
    b.thrash_stores(64, 20)
    names = [f"l{d}" for d in divisors] + ["lc"]
    for name, addr in zip(names, addrs):
        b.emit(f"  {name} = load [zero + {addr}]")
    acc = names[0]
    for name in names[1:]:
        nxt = b.fresh("acc")
        b.emit(f"  {nxt} = add {acc}, {name}")
        acc = nxt
    b.thrash_stores(64, 20, first=21)
    b.emit(f"  store [zero + 128], {acc}", "  j = sub i, 1", "  store [zero], j",
           "  branch j, loop", "w = load [zero + 128]", "halt")
    return b.text()


def histogram_mix(seed: int = 0, constant_sites: int = 10, varying_sites: int = 14,
                  short: int = 2, long: int = 200) -> str:
    """Few rarely-executed constant reloads next to many hot varying ones."""
    rng = random.Random(seed)
    b = Builder(f"seeded mix of short-lived constant and long-lived varying reloads (seed {seed})")
    b.emit("output jb", "zero = const 0", f"na = const {short}", "store [zero], na", "loopa:",
           "  ia = load [zero]")
    for s in range(constant_sites):
        b.emit(f"  ca{s} = add zero, {rng.randrange(1, 1000)}",
               f"  store [zero + {64 + 8 * s}], ca{s}", f"  la{s} = load [zero + {64 + 8 * s}]")
    b.emit("  ja = sub ia, 1", "  store [zero], ja", "  branch ja, loopa",
           f"nb = const {long}", "store [zero + 8], nb", "loopb:", "  ib = load [zero + 8]")
    for s in range(varying_sites):
        b.emit(f"  cb{s} = mul ib, {rng.randrange(2, 1000)}",
               f"  store [zero + {256 + 8 * s}], cb{s}", f"  lb{s} = load [zero + {256 + 8 * s}]")
    b.emit("  jb = sub ib, 1", "  store [zero + 8], jb", "  branch jb, loopb", "halt")
    return b.text()


WORKLOADS = {
    "reload": reload,
    "loop": loop,
    "figslice": figslice,
    "locality": locality,
    "oneslice": oneslice,
    "greedy": greedy,
    "prune": prune,
    "graded": graded,
    "histmix": histogram_mix,
}


def write_all(directory) -> list[Path]:
    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, fn in WORKLOADS.items():
        p = d / f"{name}.tp"
        p.write_text(fn())
        out.append(p)
    return out


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "workloads")
    for p in write_all(target):
        print(p)
