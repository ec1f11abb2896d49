import csv

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import shipped
from recomp.dependence import extract_rslice
from recomp.locality import (
    NON_ROOT,
    ROOT,
    LocalityStats,
    histogram,
    make_bins,
    profile,
    role_values,
    tag_roles,
    write_histograms,
)
from recomp.program import DynamicTrace, DynRecord
from recomp.transforms import site_slices


def trace_of(*streams):
    """One static instruction per value stream, interleaved round-robin."""
    recs = []
    longest = max(len(s) for s in streams)
    for i in range(longest):
        for sid, s in enumerate(streams):
            if i < len(s):
                recs.append(DynRecord(len(recs), sid, "add", s[i], None, (None, None), (s[i], 0)))
    return DynamicTrace(tuple(recs))


@pytest.mark.parametrize("values,want", [
    ((7, 7, 7, 7), 1.0),
    ((1, 2, 3, 4), 0.0),
    ((5, 5, 9, 5, 5), 0.5),
])
def test_last_value_locality(values, want):
    stats = profile(trace_of(values))
    assert stats.loc_out(0) == want
    assert stats.loc_in(0, 0) == want
    assert stats.loc_in(0, 1) == 1.0  # immediate operand never changes
    assert stats.eligible(0)


def test_single_instance_is_ineligible():
    stats = profile(trace_of((42,)))
    assert stats.loc_out(0) == 0.0 and not stats.eligible(0)


def test_single_bin():
    stats = LocalityStats(count={0: 5}, out={0: 1.0})
    stats.tag(0, ROOT)
    h = histogram(stats)
    assert h.shares[-1] == 100.0 and sum(h.shares) == 100.0


def test_static_vs_dynamic_weighting():
    stats = LocalityStats(count={0: 1000, 1: 1}, out={0: 1.0, 1: 1.0})
    stats.tag(0, ROOT)
    stats.tag(1, ROOT)
    hs = histogram(stats, weighting="static")
    hd = histogram(stats, weighting="dynamic")
    assert hs.shares[-1] == 100.0 and hd.shares[-1] == 100.0  # both in the closed 100% bin
    # within that bin each static contributes half by count, 1000:1 by instances
    per = role_values(stats, ROOT)
    static = [100 / len(per)] * len(per)
    dynamic = [100 * n / sum(m for _, _, m in per) for _, _, n in per]
    assert static == [50.0, 50.0]
    assert dynamic[0] == pytest.approx(99.9, abs=0.01) and dynamic[1] == pytest.approx(0.1, abs=0.01)


def test_histogram_shares_split():
    stats = LocalityStats(count={0: 1000, 1: 1}, out={0: 1.0, 1: 0.55})
    stats.tag(0, ROOT)
    stats.tag(1, ROOT)
    hs = histogram(stats, weighting="static")
    hd = histogram(stats, weighting="dynamic")
    assert hs.shares[-1] == 50.0 and hs.shares[5] == 50.0
    assert hd.shares[-1] == pytest.approx(100 * 1000 / 1001)
    assert hd.shares[5] == pytest.approx(100 / 1001)


def test_empty_role_gives_empty_histogram():
    h = histogram(LocalityStats(), role=NON_ROOT)
    assert h.empty and sum(h.shares) == 0


def test_bins():
    bins = make_bins()
    assert len(bins) == 11 and bins[-1] == (1.0, 1.0) and bins[0] == (0.0, 0.1)
    with pytest.raises(ValueError):
        make_bins([0.2, 1.0])
    with pytest.raises(ValueError):
        histogram(LocalityStats(), weighting="both")


def test_histmix_static_dynamic_divergence(t):
    a = shipped("histmix")
    slices = []
    for sid in a.cache.load_counts:
        _, raw, _, _ = site_slices(a.graph, a.cache, t, 64, sid, None)
        if raw is not None:
            slices.append(raw)
    stats = tag_roles(a.locality, slices)
    hs = histogram(stats, weighting="static")
    hd = histogram(stats, weighting="dynamic")
    assert hs.shares[-1] == pytest.approx(100 * 10 / 26)
    assert hd.shares[-1] < 1.0


def test_roles_from_slices(t):
    a = shipped("prune")
    v = next(i.sid for i in a.program.instructions if i.dest == "v")
    seq = [r.seq for r in a.trace.records if r.sid == v][-1]
    r = extract_rslice(a.graph, seq, None, 64, t, a.cache)
    stats = tag_roles(a.locality, [r])
    assert stats.with_role(ROOT) == [r.target_sid]
    assert a.locality.roles == {}
    assert set(stats.with_role(NON_ROOT)) == {n.sid for n in r.nodes[1:]}
    q = next(n.sid for n in r.nodes if n.op == "add")
    # the add's register inputs are the counter (varying) and the invariant quotient
    assert stats.loc_in(q, 1) == 1.0 and stats.loc_in(q, 0) == 0.0
    assert stats.input_locality(q) == 0.0


def test_write_histograms(tmp_path):
    stats = LocalityStats(count={0: 3, 1: 4}, out={0: 1.0, 1: 0.25})
    stats.tag(0, ROOT)
    stats.tag(1, ROOT)
    pair = (histogram(stats), histogram(stats, weighting="dynamic"))
    write_histograms(tmp_path / "h.csv", [pair], {"config_hash": "abc"})
    rows = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert list(rows[0]) == ["bin_low", "bin_high", "share_static_pct", "share_dynamic_pct",
                             "role", "config_hash"]
    assert sum(float(r["share_dynamic_pct"]) for r in rows) == pytest.approx(100)
    assert rows[-1]["bin_low"] == rows[-1]["bin_high"] == "100"


values = st.lists(st.integers(-3, 3), min_size=1, max_size=40)


@given(values)
def test_locality_range_and_repeat_monotone(vs):
    base = profile(trace_of(vs)).loc_out(0)
    assert 0.0 <= base <= 1.0
    assert profile(trace_of(vs + [vs[-1]])).loc_out(0) >= base


@given(values, st.integers(1, 100))
def test_locality_ignores_addresses(vs, shift):
    recs = tuple(DynRecord(i, 0, "load", v, 8 * i, (None,), (8 * i,), None) for i, v in enumerate(vs))
    moved = tuple(DynRecord(i, 0, "load", v, 8 * (i + shift), (None,), (8 * (i + shift),), None)
                  for i, v in enumerate(vs))
    assert profile(DynamicTrace(recs)).loc_out(0) == profile(DynamicTrace(moved)).loc_out(0)


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(1, 50)), min_size=1, max_size=20))
def test_shares_sum_to_100(sites):
    stats = LocalityStats()
    for sid, (loc, n) in enumerate(sites):
        stats.count[sid] = n
        stats.out[sid] = loc
        stats.tag(sid, ROOT)
    for w in ("static", "dynamic"):
        assert sum(histogram(stats, weighting=w).shares) == pytest.approx(100, abs=1e-9)
