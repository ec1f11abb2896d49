"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import random


class ListLRU:
    """Brute-force hierarchy: each set is a plain list, most recent last.

    Same policy as the library simulator (non-inclusive, write-allocate,
    write-back with allocate-on-writeback), written without OrderedDict and
    without sharing any code with it.
    """

    def __init__(self, levels, line):
        # levels: [(capacity, assoc)]
        self.line = line
        self.geo = [(cap // (assoc * line), assoc) for cap, assoc in levels]
        self.store = [dict() for _ in levels]  # set index -> list of [line, dirty]
        self.hits = [0] * len(levels)
        self.misses = [0] * len(levels)
        self.wbs = [0] * len(levels)

    def _lines(self, lvl, ln):
        nsets, _ = self.geo[lvl]
        return self.store[lvl].setdefault(ln % nsets, [])

    def _find(self, lvl, ln):
        for i, entry in enumerate(self._lines(lvl, ln)):
            if entry[0] == ln:
                return i
        return -1

    def _put(self, lvl, ln, dirty):
        lines = self._lines(lvl, ln)
        _, assoc = self.geo[lvl]
        if len(lines) == assoc:
            victim = lines.pop(0)
            if victim[1]:
                self.wbs[lvl] += 1
                self._absorb(lvl + 1, victim[0])
        lines.append([ln, dirty])

    def _absorb(self, lvl, ln):
        if lvl >= len(self.geo):
            return
        i = self._find(lvl, ln)
        if i >= 0:
            self._lines(lvl, ln)[i][1] = True  # no recency update on writeback
        else:
            self._put(lvl, ln, True)

    def access(self, addr, write=False):
        ln = addr // self.line
        level = len(self.geo)
        for lvl in range(len(self.geo)):
            i = self._find(lvl, ln)
            if i >= 0:
                lines = self._lines(lvl, ln)
                lines.append(lines.pop(i))
                self.hits[lvl] += 1
                level = lvl
                break
            self.misses[lvl] += 1
        for lvl in range(level - 1, -1, -1):
            self._put(lvl, ln, False)
        if write and self.geo:
            i = self._find(0, ln)
            self._lines(0, ln)[i][1] = True
        return level


def random_accesses(n, seed, span=1 << 16, word=8, write_frac=0.3):
    rng = random.Random(seed)
    hot = [rng.randrange(0, span // word) * word for _ in range(64)]
    out = []
    for _ in range(n):
        addr = rng.choice(hot) if rng.random() < 0.5 else rng.randrange(0, span // word) * word
        out.append((addr, rng.random() < write_frac))
    return out


def nested(r, index=0):
    """Canonical nested form of a slice: (sid, op, [child or leaf])."""
    n = r.nodes[index]
    kids = []
    for kind, i in n.inputs:
        if kind == "node":
            kids.append(nested(r, i))
        else:
            leaf = r.leaves[i]
            kids.append(("leaf", leaf.source, leaf.sid, leaf.value))
    return (n.sid, n.op, kids)


def _value(tree):
    from recomp.program import alu

    if tree[0] == "leaf":
        return tree[3]
    sid, op, kids = tree
    return alu(op, tuple(_value(k) for k in kids))


def prune_oracle(tree, predicted, is_root=True):
    """Depth-first pruning on the nested form: a costly operand of a non-root
    node whose input is predictable becomes a predicted terminal."""
    sid, op, kids = tree
    out = []
    for k, child in enumerate(kids):
        costly = child[0] != "leaf" or child[1] == "memory-cut"
        if not is_root and costly and predicted(sid, k):
            child_sid = child[2] if child[0] == "leaf" else child[0]
            out.append(("leaf", "predicted", child_sid, _value(child)))
        elif child[0] != "leaf":
            out.append(prune_oracle(child, predicted, False))
        else:
            out.append(child)
    return (sid, op, out)


def tree_cost(tree, t, leaf_cost):
    """Recursive energy walk: node EPI plus leaf acquisition costs."""
    from recomp.program import OPCODE_CLASS

    if tree[0] == "leaf":
        return leaf_cost(tree)
    sid, op, kids = tree
    return t.instr(OPCODE_CLASS[op]) + sum(tree_cost(k, t, leaf_cost) for k in kids)


def count_nodes(tree):
    if tree[0] == "leaf":
        return 0
    return 1 + sum(count_nodes(k) for k in tree[2])


def plc_from_labels(label_rows, sid, epi_load, names):
    """Σ Pr_Li × EPI_Li from exported per-access labels, in exact fractions."""
    from fractions import Fraction

    rows = [r for r in label_rows if r["sid"] == sid and r["op"] == "load"]
    total = len(rows)
    cost = Fraction(0)
    for i, name in enumerate(names):
        n = sum(1 for r in rows if r["level"] == name)
        cost += Fraction(n, total) * Fraction(epi_load[i])
    return float(cost)
