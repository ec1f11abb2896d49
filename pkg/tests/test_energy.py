import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import shipped
from oracles import plc_from_labels
from recomp.cache import CacheStats, write_labels
from recomp.energy import (
    EpiTable,
    LatencyTable,
    TableError,
    edp,
    gain_pct,
    probabilistic_load_cost,
    rslice_cost,
    weighted_cost,
    write_class_totals,
)
from recomp.evaluate import evaluate
from recomp.transforms import empty_plan, make_plan


def stats_with(counts):
    return CacheStats(["L1", "L2", "MEM"], [0, 0], [0, 0], [0, 0], {7: list(counts)})


def test_weighted_example():
    assert weighted_cost((0.5, 0.25, 0.25), (10, 40, 200)) == 65.0
    assert probabilistic_load_cost(7, stats_with([2, 1, 1]), EpiTable()) == 65.0


def test_unknown_load():
    with pytest.raises(KeyError):
        probabilistic_load_cost(3, stats_with([1, 0, 0]), EpiTable())


class _N:
    def __init__(self, cls):
        self.cls = cls


class _S:
    def __init__(self, *classes):
        self.nodes = [_N(c) for c in classes]


def test_slice_cost_example():
    assert rslice_cost(_S("alu-mul", "alu-simple", "alu-simple"), EpiTable()) == 5.0
    assert rslice_cost(_S("alu-div"), EpiTable(), [10.0, 0.0]) == 22.0


def test_table_validation():
    with pytest.raises(TableError, match="non-negative"):
        EpiTable(predict=-1)
    with pytest.raises(TableError, match="non-decreasing"):
        EpiTable(load=(40, 10, 200))
    with pytest.raises(TableError, match="lacks"):
        EpiTable(classes={"alu-simple": 1})
    with pytest.raises(TableError):
        LatencyTable(memory=(0, 1, 2))
    with pytest.raises(TableError, match="levels"):
        EpiTable().check_depth(4)


def test_edp_and_gain():
    assert edp(10, 20) == 200
    with pytest.raises(ValueError):
        edp(-1, 2)
    assert gain_pct(100, 75) == 25.0
    assert gain_pct(100, 100) == 0.0
    assert gain_pct(0, 0) == 0.0


@given(st.lists(st.integers(0, 50), min_size=3, max_size=3).filter(any),
       st.floats(0.125, 8.0))
def test_budget_bounds_and_scaling(counts, k):
    t = EpiTable()
    s = stats_with(counts)
    b = probabilistic_load_cost(7, s, t)
    assert min(t.load) - 1e-9 <= b <= max(t.load) + 1e-9
    assert probabilistic_load_cost(7, s, t.scaled(k)) == pytest.approx(k * b, rel=1e-12)


def test_reload_budget_matches_exported_labels(tmp_path):
    a = shipped("reload")
    t = EpiTable()
    write_labels(a.trace.records, a.labels, a.cfg, tmp_path / "labels.jsonl")
    rows = [json.loads(x) for x in (tmp_path / "labels.jsonl").read_text().splitlines()]
    for sid in a.cache.load_counts:
        want = plc_from_labels(rows, sid, t.load, a.cfg.names)
        assert probabilistic_load_cost(sid, a.cache, t) == pytest.approx(want, rel=1e-12)


def test_edp_scaling(lt):
    a = shipped("reload")
    t = EpiTable()
    plan = make_plan("recalculation", a, t)
    base = evaluate(plan, a.program, None, a.cfg, t, lt, a)
    k = 3.0
    # energy-only scaling scales EDP by k; scaling both tables scales it by k squared
    e_only = evaluate(plan, a.program, None, a.cfg, t.scaled(k), lt, a)
    both = evaluate(plan, a.program, None, a.cfg, t.scaled(k), lt.scaled(k), a)
    assert e_only.native.edp == pytest.approx(k * base.native.edp, rel=1e-12)
    assert both.native.edp == pytest.approx(k * k * base.native.edp, rel=1e-12)
    assert both.edp_gain == pytest.approx(base.edp_gain, rel=1e-9)


def test_class_totals_csv(tmp_path, lt):
    a = shipped("loop")
    r = evaluate(empty_plan(), a.program, None, a.cfg, EpiTable(), lt, a)
    write_class_totals(tmp_path / "c.csv", r.class_totals)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "class,count,energy_pj,cycles"
    total = sum(float(x.split(",")[2]) for x in lines[1:])
    assert total == pytest.approx(r.native.energy)
