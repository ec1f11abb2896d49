"""Tiny single-assignment instruction set: parser and tracing interpreter.

Program text is line oriented::

    # comments start with '#'; ';' separates instructions on one line
    memory 1048576          # declared memory size in bytes
    input seed = 3          # named integer input (with optional default)
    output x                # register reported in the program outputs
    init 128 = 5            # initial memory word at byte address 128
    x = const 5
    y = mul x, 3
    store [x + 64], y
    z = load [x + 64]
loop:
    branch z, loop          # taken when z != 0; `branch label` is unconditional
    halt

Memory is a flat byte-addressed array of 64-bit words (8-byte aligned).
All arithmetic wraps at 64 bits, two's complement.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

WORD = 8
MASK = (1 << 64) - 1
DEFAULT_MEMORY = 1 << 16

ALU_OPS = ("add", "sub", "mul", "div", "and", "or", "xor", "shift")
OPCODES = ("const",) + ALU_OPS + ("load", "store", "branch", "halt")

OPCODE_CLASS = {
    "const": "alu-simple",
    "add": "alu-simple",
    "sub": "alu-simple",
    "and": "alu-simple",
    "or": "alu-simple",
    "xor": "alu-simple",
    "shift": "alu-simple",
    "mul": "alu-mul",
    "div": "alu-div",
    "load": "memory",
    "store": "memory",
    "branch": "control",
    "halt": "control",
}
PRODUCER_OPS = frozenset(("const",) + ALU_OPS)

_IDENT = r"[A-Za-z_][A-Za-z0-9_.]*"
_IDENT_RE = re.compile(rf"^{_IDENT}$")
_INT_RE = re.compile(r"^[+-]?(0[xX][0-9a-fA-F]+|\d+)$")
_LABEL_RE = re.compile(rf"^({_IDENT})\s*:\s*(.*)$")
_ASSIGN_RE = re.compile(rf"^({_IDENT})\s*=\s*(\w+)\s*(.*)$")
_ADDR_RE = re.compile(rf"^\[\s*({_IDENT}|[+-]?\w+)\s*(?:([+-])\s*(\w+)\s*)?\]$")
_INIT_RE = re.compile(r"^init\s+(\S+)\s*=\s*(\S+)$")


class ProgramError(Exception):
    """Syntax or validation error in program text."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ExecutionError(Exception):
    """Fatal runtime error (division by zero, bad address, ...)."""

    def __init__(self, message: str, seq: int, sid: int):
        self.message = message
        self.seq = seq
        self.sid = sid
        super().__init__(f"{message} (dynamic #{seq}, static #{sid})")


def wrap(x: int) -> int:
    x &= MASK
    return x - (1 << 64) if x >> 63 else x


def alu(op: str, args: tuple[int, ...]) -> int:
    """Evaluate a producer opcode on concrete operand values."""
    if op == "const":
        return wrap(args[0])
    a, b = args
    if op == "add":
        return wrap(a + b)
    if op == "sub":
        return wrap(a - b)
    if op == "mul":
        return wrap(a * b)
    if op == "div":
        if b == 0:
            raise ZeroDivisionError("division by zero")
        q = abs(a) // abs(b)
        return wrap(-q if (a < 0) != (b < 0) else q)
    if op == "and":
        return wrap(a & b)
    if op == "or":
        return wrap(a | b)
    if op == "xor":
        return wrap(a ^ b)
    if op == "shift":
        # positive amount shifts left, negative shifts right (arithmetic)
        return wrap(a << (b & 63)) if b >= 0 else wrap(a >> ((-b) & 63))
    raise ValueError(f"not a producer opcode: {op}")


@dataclass(frozen=True)
class Operand:
    kind: str  # "reg" or "imm"
    value: object  # register name or int

    @property
    def is_reg(self) -> bool:
        return self.kind == "reg"

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class StaticInstr:
    sid: int
    opcode: str
    dest: Optional[str]
    operands: tuple[Operand, ...]
    offset: int = 0
    target: Optional[int] = None
    line: int = 0

    @property
    def cls(self) -> str:
        return OPCODE_CLASS[self.opcode]

    @property
    def is_load(self) -> bool:
        return self.opcode == "load"

    @property
    def is_store(self) -> bool:
        return self.opcode == "store"

    def text(self) -> str:
        ops = ", ".join(str(o) for o in self.operands)
        if self.opcode in ("load", "store"):
            base = str(self.operands[0])
            addr = f"[{base} + {self.offset}]" if self.offset else f"[{base}]"
            if self.opcode == "load":
                return f"{self.dest} = load {addr}"
            return f"store {addr}, {self.operands[1]}"
        if self.opcode == "branch":
            return f"branch {ops + ', ' if ops else ''}@{self.target}"
        if self.dest is None:
            return self.opcode
        return f"{self.dest} = {self.opcode} {ops}"


@dataclass(frozen=True)
class Program:
    instructions: tuple[StaticInstr, ...]
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    memory_size: int = DEFAULT_MEMORY
    init: tuple[tuple[int, int], ...] = ()
    labels: Mapping[str, int] = field(default_factory=dict)
    defaults: Mapping[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, sid: int) -> StaticInstr:
        return self.instructions[sid]

    @property
    def loads(self) -> list[int]:
        return [i.sid for i in self.instructions if i.is_load]


def _parse_int(tok: str, line: int) -> int:
    if not _INT_RE.match(tok):
        raise ProgramError(f"expected integer, got {tok!r}", line)
    return int(tok, 0)


def _operand(tok: str, line: int) -> Operand:
    tok = tok.strip()
    if _INT_RE.match(tok):
        return Operand("imm", int(tok, 0))
    if _IDENT_RE.match(tok) and tok not in OPCODES:
        return Operand("reg", tok)
    raise ProgramError(f"bad operand {tok!r}", line)


def _address(tok: str, line: int) -> tuple[Operand, int]:
    m = _ADDR_RE.match(tok.strip())
    if not m:
        raise ProgramError(f"bad address expression {tok!r}", line)
    base = _operand(m.group(1), line)
    offset = 0
    if m.group(2):
        offset = _parse_int(m.group(3), line)
        if m.group(2) == "-":
            offset = -offset
    return base, offset


def _split_args(rest: str) -> list[str]:
    rest = rest.strip()
    if not rest:
        return []
    # keep bracketed address expressions intact
    out, depth, cur = [], 0, ""
    for ch in rest:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    out.append(cur.strip())
    return out


def _source_lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        for part in body.split(";"):
            part = part.strip()
            if part:
                yield lineno, part


def parse_program(text: str) -> Program:
    """Parse and validate program text."""
    pending: list[tuple[int, str, Optional[str], list[str]]] = []
    labels: dict[str, int] = {}
    inputs: list[str] = []
    defaults: dict[str, int] = {}
    outputs: list[tuple[str, int]] = []
    init: dict[int, int] = {}
    memory_size = DEFAULT_MEMORY

    for lineno, part in _source_lines(text):
        m = _LABEL_RE.match(part)
        if m and m.group(1) not in OPCODES:
            name = m.group(1)
            if name in labels:
                raise ProgramError(f"duplicate label {name!r}", lineno)
            labels[name] = len(pending)
            part = m.group(2).strip()
            if not part:
                continue
        words = part.split(None, 1)
        head = words[0]
        tail = words[1] if len(words) > 1 else ""
        if head == "memory":
            memory_size = _parse_int(tail.strip(), lineno)
            if memory_size <= 0 or memory_size % WORD:
                raise ProgramError("memory size must be a positive multiple of 8", lineno)
            continue
        if head == "input":
            for decl in _split_args(tail):
                name, _, default = (x.strip() for x in decl.partition("="))
                if not _IDENT_RE.match(name) or name in OPCODES:
                    raise ProgramError(f"bad input name {name!r}", lineno)
                inputs.append(name)
                if default:
                    defaults[name] = wrap(_parse_int(default, lineno))
            continue
        if head == "output":
            outputs.extend((name, lineno) for name in _split_args(tail))
            continue
        if head == "init":
            mi = _INIT_RE.match(part)
            if not mi:
                raise ProgramError("expected 'init ADDR = VALUE'", lineno)
            init[_parse_int(mi.group(1), lineno)] = wrap(_parse_int(mi.group(2), lineno))
            continue
        ma = _ASSIGN_RE.match(part)
        if ma:
            dest, opcode, rest = ma.group(1), ma.group(2), ma.group(3)
        else:
            dest, opcode, rest = None, head, tail
        if opcode not in OPCODES:
            raise ProgramError(f"unknown opcode {opcode!r}", lineno)
        pending.append((lineno, opcode, dest, _split_args(rest)))

    defined: set[str] = set()
    for name in inputs:
        if name in defined:
            raise ProgramError(f"double definition of register {name!r}")
        defined.add(name)

    instrs: list[StaticInstr] = []
    for sid, (lineno, opcode, dest, args) in enumerate(pending):
        operands: list[Operand] = []
        offset = 0
        target = None
        if opcode in PRODUCER_OPS or opcode == "load":
            if dest is None:
                raise ProgramError(f"{opcode} needs a destination register", lineno)
        elif dest is not None:
            raise ProgramError(f"{opcode} has no destination", lineno)

        if opcode == "const":
            if len(args) != 1:
                raise ProgramError("const takes one immediate", lineno)
            operands = [Operand("imm", wrap(_parse_int(args[0], lineno)))]
        elif opcode in ALU_OPS:
            if len(args) != 2:
                raise ProgramError(f"{opcode} takes two operands", lineno)
            operands = [_operand(a, lineno) for a in args]
        elif opcode == "load":
            if len(args) != 1:
                raise ProgramError("load takes one address operand", lineno)
            base, offset = _address(args[0], lineno)
            operands = [base]
        elif opcode == "store":
            if len(args) != 2:
                raise ProgramError("store takes an address and a data operand", lineno)
            base, offset = _address(args[0], lineno)
            operands = [base, _operand(args[1], lineno)]
        elif opcode == "branch":
            if len(args) not in (1, 2):
                raise ProgramError("branch takes [cond,] label", lineno)
            label = args[-1]
            if label not in labels:
                raise ProgramError(f"invalid branch target {label!r}", lineno)
            target = labels[label]
            if len(args) == 2:
                operands = [_operand(args[0], lineno)]
        elif opcode == "halt" and args:
            raise ProgramError("halt takes no operands", lineno)

        for o in operands:
            if o.is_reg and o.value not in defined:
                raise ProgramError(f"undefined register {o.value!r}", lineno)
        if dest is not None:
            if dest in defined:
                raise ProgramError(f"double definition of register {dest!r}", lineno)
            if dest in OPCODES:
                raise ProgramError(f"reserved register name {dest!r}", lineno)
            defined.add(dest)
        instrs.append(StaticInstr(sid, opcode, dest, tuple(operands), offset, target, lineno))

    for name, lineno in outputs:
        if name not in defined:
            raise ProgramError(f"undefined register {name!r}", lineno)
    for label, idx in labels.items():
        if idx > len(instrs):
            raise ProgramError(f"invalid branch target {label!r}")
    for addr in init:
        if addr % WORD or not 0 <= addr <= memory_size - WORD:
            raise ProgramError(f"init address {addr} outside memory or misaligned")

    return Program(
        instructions=tuple(instrs),
        inputs=tuple(inputs),
        outputs=tuple(n for n, _ in outputs),
        memory_size=memory_size,
        init=tuple(sorted(init.items())),
        labels=dict(labels),
        defaults=dict(defaults),
    )


@dataclass(frozen=True)
class DynRecord:
    """One executed instruction instance.

    ``deps`` holds, per operand position, the sequence number of the record that
    produced the operand value, or None for immediates and program inputs.
    ``mdep`` is the store that wrote the loaded word (loads only; None means
    the word was never stored, i.e. external).
    """

    seq: int
    sid: int
    op: str
    value: Optional[int]
    addr: Optional[int]
    deps: tuple[Optional[int], ...]
    args: tuple[int, ...]
    mdep: Optional[int] = None

    @property
    def cls(self) -> str:
        return OPCODE_CLASS[self.op]

    @property
    def is_load(self) -> bool:
        return self.op == "load"

    @property
    def is_store(self) -> bool:
        return self.op == "store"

    @property
    def is_memory(self) -> bool:
        return self.op in ("load", "store")

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "sid": self.sid,
            "op": self.op,
            "value": self.value,
            "addr": self.addr,
            "deps": list(self.deps),
            "args": list(self.args),
            "mdep": self.mdep,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "DynRecord":
        return cls(
            seq=d["seq"],
            sid=d["sid"],
            op=d["op"],
            value=d.get("value"),
            addr=d.get("addr"),
            deps=tuple(d.get("deps", ())),
            args=tuple(d.get("args", ())),
            mdep=d.get("mdep"),
        )


@dataclass(frozen=True)
class DynamicTrace:
    records: tuple[DynRecord, ...]
    truncated: bool = False
    memory: Mapping[int, int] = field(default_factory=dict)
    outputs: Mapping[str, Optional[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, seq: int) -> DynRecord:
        return self.records[seq]

    def __iter__(self):
        return iter(self.records)

    def memory_records(self) -> list[DynRecord]:
        return [r for r in self.records if r.is_memory]

    def by_sid(self) -> dict[int, list[DynRecord]]:
        out: dict[int, list[DynRecord]] = {}
        for r in self.records:
            out.setdefault(r.sid, []).append(r)
        return out


# (seq, instr, addr, values-by-seq, memory) -> replacement value or None
LoadOverride = Callable[[int, StaticInstr, int, list, dict], Optional[int]]


def execute(
    program: Program,
    inputs: Mapping[str, int] | None = None,
    max_steps: int = 1_000_000,
    load_override: LoadOverride | None = None,
) -> DynamicTrace:
    """Run ``program`` and record every dynamic instruction.

    Stops at ``halt``, at the end of the program, or after ``max_steps``
    records (the trace is then flagged as truncated).  ``load_override`` lets
    a caller supply the value of a load instance instead of reading memory;
    the load then leaves no memory provenance.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    inputs = {**program.defaults, **(inputs or {})}
    missing = [n for n in program.inputs if n not in inputs]
    if missing:
        raise ValueError(f"missing program inputs: {', '.join(missing)}")

    regs: dict[str, tuple[int, Optional[int]]] = {
        n: (wrap(int(inputs[n])), None) for n in program.inputs
    }
    memory: dict[int, int] = dict(program.init)
    last_store: dict[int, int] = {}
    values: list[Optional[int]] = []
    records: list[DynRecord] = []
    pc = 0
    truncated = False
    size = program.memory_size

    def read(o: Operand, seq: int, sid: int) -> tuple[int, Optional[int]]:
        if not o.is_reg:
            return o.value, None  # type: ignore[return-value]
        try:
            return regs[o.value]  # type: ignore[index]
        except KeyError:
            raise ExecutionError(f"register {o.value} read before definition", seq, sid) from None

    def check_addr(addr: int, seq: int, sid: int) -> None:
        if addr % WORD:
            raise ExecutionError(f"misaligned address {addr}", seq, sid)
        if not 0 <= addr <= size - WORD:
            raise ExecutionError(f"address {addr} out of bounds", seq, sid)

    while pc < len(program.instructions):
        seq = len(records)
        if seq >= max_steps:
            truncated = True
            break
        ins = program.instructions[pc]
        read_ops = [read(o, seq, ins.sid) for o in ins.operands]
        args = tuple(v for v, _ in read_ops)
        deps = tuple(d for _, d in read_ops)
        value = addr = mdep = None
        next_pc = pc + 1
        op = ins.opcode

        if op in PRODUCER_OPS:
            try:
                value = alu(op, args)
            except ZeroDivisionError:
                raise ExecutionError("division by zero", seq, ins.sid) from None
        elif op == "load":
            addr = wrap(args[0] + ins.offset)
            check_addr(addr, seq, ins.sid)
            override = load_override(seq, ins, addr, values, memory) if load_override else None
            if override is None:
                value = memory.get(addr, 0)
                mdep = last_store.get(addr)
            else:
                value = wrap(override)
        elif op == "store":
            addr = wrap(args[0] + ins.offset)
            check_addr(addr, seq, ins.sid)
            memory[addr] = args[1]
            last_store[addr] = seq
        elif op == "branch":
            if not args or args[0] != 0:
                next_pc = ins.target  # type: ignore[assignment]
        elif op == "halt":
            next_pc = len(program.instructions)

        records.append(DynRecord(seq, ins.sid, op, value, addr, deps, args, mdep))
        values.append(value)
        if ins.dest is not None:
            regs[ins.dest] = (value, seq)  # type: ignore[assignment]
        pc = next_pc

    outputs = {n: (regs[n][0] if n in regs else None) for n in program.outputs}
    image = {a: v for a, v in sorted(memory.items()) if v != 0}
    return DynamicTrace(tuple(records), truncated, image, outputs)


def write_trace(trace: DynamicTrace, path) -> None:
    with open(path, "w") as fh:
        for r in trace.records:
            fh.write(json.dumps(r.to_json(), separators=(",", ":")) + "\n")


def read_trace(path) -> DynamicTrace:
    with open(path) as fh:
        records = tuple(DynRecord.from_json(json.loads(line)) for line in fh if line.strip())
    for i, r in enumerate(records):
        if r.seq != i:
            raise ValueError(f"trace record {i} has seq {r.seq}")
    return DynamicTrace(records)
