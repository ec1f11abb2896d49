import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from progen import random_program
from recomp import workloads
from recomp.program import (
    OPCODE_CLASS,
    DynamicTrace,
    ExecutionError,
    ProgramError,
    alu,
    execute,
    parse_program,
    read_trace,
    wrap,
    write_trace,
)


def test_smallest_program():
    p = parse_program("r1 = const 5; halt")
    assert len(p) == 2
    assert [i.opcode for i in p.instructions] == ["const", "halt"]


def test_undefined_register():
    with pytest.raises(ProgramError, match="undefined register") as e:
        parse_program("r1 = const 1\nr2 = add r9, r1\nhalt")
    assert e.value.line == 2


def test_double_definition():
    with pytest.raises(ProgramError, match="double definition"):
        parse_program("r1 = const 1\nr1 = const 2")


def test_invalid_branch_target():
    with pytest.raises(ProgramError, match="invalid branch target"):
        parse_program("branch nowhere")


@pytest.mark.parametrize("text", ["r1 = frob 3", "r1 = const", "store [r1], 3", "r1 = load 5",
                                  "r1 = add 1", "halt 3", "x = const 1; x2 = load [x +]"])
def test_syntax_errors_carry_line(text):
    with pytest.raises(ProgramError) as e:
        parse_program(text)
    assert e.value.line == 1


def test_class_is_function_of_opcode():
    p = parse_program("a = const 1\nb = mul a, a\nc = div b, 2\nstore [a + 7], c\nd = load [a + 7]\nhalt")
    for ins in p.instructions:
        assert ins.cls == OPCODE_CLASS[ins.opcode]


def test_reload_has_store_provenance():
    p = workloads.load("reload")
    trace = execute(p)
    loads = [r for r in trace.records if r.is_load]
    assert [p[r.sid].dest for r in loads] == ["cold", "hot"]
    for r in loads:
        store = trace[r.mdep]
        assert store.is_store and store.addr == r.addr
        assert store.args[1] == r.value


def test_loop_records():
    p = workloads.load("loop")
    trace = execute(p)
    # 3 setup + 3 iterations of 4 + halt
    assert len(trace) == 16
    body = [r for r in trace.records if p[r.sid].dest == "j"]
    assert [r.value for r in body] == [2, 1, 0]
    # every iteration reads the counter stored by the previous one
    loads = [r for r in trace.records if r.is_load]
    stores = [r for r in trace.records if r.is_store]
    assert [l.mdep for l in loads] == [s.seq for s in stores[:3]]
    assert trace.outputs == {"j": 0}


def test_arithmetic_wraps():
    assert wrap(1 << 63) == -(1 << 63)
    assert alu("add", ((1 << 63) - 1, 1)) == -(1 << 63)
    assert alu("mul", (1 << 62, 4)) == 0
    assert alu("div", (-7, 2)) == -3
    assert alu("shift", (1, 3)) == 8
    assert alu("shift", (-16, -2)) == -4


def test_runtime_errors():
    with pytest.raises(ExecutionError, match="division by zero"):
        execute(parse_program("a = const 0\nb = div 4, a\nhalt"))
    with pytest.raises(ExecutionError, match="misaligned"):
        execute(parse_program("a = const 3\nb = load [a]\nhalt"))
    with pytest.raises(ExecutionError, match="out of bounds"):
        execute(parse_program("memory 64\na = const 64\nb = load [a]\nhalt"))


def test_inputs_and_limits():
    p = parse_program("input n\nm = add n, 1\noutput m\nhalt")
    with pytest.raises(ValueError, match="missing program inputs"):
        execute(p)
    assert execute(p, {"n": 4}).outputs == {"m": 5}
    with pytest.raises(ValueError):
        execute(p, {"n": 1}, max_steps=0)
    spin = parse_program("top:\nbranch top")
    trace = execute(spin, max_steps=50)
    assert trace.truncated and len(trace) == 50


def test_input_defaults():
    p = parse_program("input n = 4, k\nm = add n, k\noutput m\nhalt")
    assert execute(p, {"k": 1}).outputs == {"m": 5}
    assert execute(p, {"k": 1, "n": 0}).outputs == {"m": 1}


def test_trace_roundtrip(tmp_path):
    trace = execute(workloads.load("reload"))
    write_trace(trace, tmp_path / "t.jsonl")
    back = read_trace(tmp_path / "t.jsonl")
    assert back.records == trace.records


def test_load_override_replaces_value():
    p = parse_program("a = const 8\nstore [a], a\nb = load [a]\nc = add b, 1\noutput c\nhalt")
    trace = execute(p, load_override=lambda seq, ins, addr, values, mem: 41)
    assert trace.outputs == {"c": 42}
    assert trace[2].mdep is None


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(-50, 50))
def test_trace_invariants(seed, x):
    p = parse_program(random_program(seed))
    trace = execute(p, {"x": x})
    last = {}
    for r in trace.records:
        for d in r.deps:
            assert d is None or d < r.seq
        if r.is_load:
            assert r.mdep == last.get(r.addr)
        elif r.is_store:
            last[r.addr] = r.seq
        if r.op in ("add", "sub", "mul", "div", "and", "or", "xor", "shift", "const"):
            assert r.value == alu(r.op, r.args)
    assert isinstance(trace, DynamicTrace)
