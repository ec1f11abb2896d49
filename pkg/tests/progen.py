"""Seeded random program text for property tests."""

from __future__ import annotations

import random

SLOTS = 8
STRIDE = 1024  # slots land in few sets of a small test cache


def random_program(seed: int, n: int = 40, loop: bool = True) -> str:
    rng = random.Random(seed)
    lines = ["memory 65536", "input x", "zero = const 0", "one = const 1"]
    regs = ["x", "zero", "one"]
    stored = set()
    k = 0

    def fresh():
        nonlocal k
        k += 1
        return f"r{k}"

    def operand(pool):
        if rng.random() < 0.25:
            return str(rng.randrange(-5, 50))
        return rng.choice(pool)

    def body(count, pool):
        for _ in range(count):
            roll = rng.random()
            if roll < 0.1:
                r = fresh()
                lines.append(f"{r} = const {rng.randrange(-100, 100)}")
                pool.append(r)
            elif roll < 0.55:
                op = rng.choice(("add", "sub", "mul", "and", "or", "xor", "shift", "div"))
                r = fresh()
                a = operand(pool)
                b = str(rng.choice((1, 2, 3, 7, -4))) if op == "div" else operand(pool)
                if op == "shift":
                    b = str(rng.randrange(-3, 4))
                lines.append(f"{r} = {op} {a}, {b}")
                pool.append(r)
            elif roll < 0.8:
                slot = rng.randrange(SLOTS)
                lines.append(f"store [zero + {slot * STRIDE}], {operand(pool)}")
                stored.add(slot)
            else:
                slot = rng.choice(sorted(stored)) if stored and rng.random() < 0.8 else rng.randrange(SLOTS)
                r = fresh()
                lines.append(f"{r} = load [zero + {slot * STRIDE}]")
                pool.append(r)

    body(n // 2, regs)
    if loop:
        trips = rng.randrange(2, 5)
        lines += [f"trips = const {trips}", f"store [zero + {SLOTS * STRIDE}], trips", "top:",
                  f"  i = load [zero + {SLOTS * STRIDE}]"]
        inner = regs + ["i"]
        body(n // 2, inner)
        lines += ["  j = sub i, 1", f"  store [zero + {SLOTS * STRIDE}], j", "  branch j, top"]
    lines.append("halt")
    return "\n".join(lines) + "\n"
