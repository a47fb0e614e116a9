import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcis.core import HazardKind, KindMismatch, Payload, Position, Report, ReportKind
from dmcis.level_three import (
    Disposition,
    Dpc,
    HistoryRecord,
    Outcome,
    confidence,
    dpc_forward,
    dpc_process,
    merge_reports,
    peer_receive,
    peer_sync,
)


def rep(rid="r1", sensors=range(1, 6), modalities=("acoustic",), intensity=6.0, area="a", kind=ReportKind.PARTIALLY_PROCESSED):
    sensors = frozenset(sensors)
    return Report(rid, kind, area, 0.0, 1000,
                  payload=Payload(k=len(sensors), modalities=frozenset(modalities), intensity=intensity,
                                  hypothesis=HazardKind.FLOOD, sensors=sensors))


def dpc(**kw):
    base = dict(id=1, area="a", position=Position(0, 0))
    base.update(kw)
    return Dpc(**base)


def test_confidence_examples():
    hist = [HistoryRecord("a", HazardKind.FLOOD, 6.0)]
    full = rep(sensors=range(1, 11), modalities=("acoustic", "seismic"))
    assert confidence(full, dpc(history=hist), alive_in_area=10, modalities_deployed=2, tau=5) == 1.0
    assert confidence(rep(), dpc(), alive_in_area=10, modalities_deployed=1, tau=5) == pytest.approx(0.8)
    assert confidence(rep(), dpc(), alive_in_area=10, modalities_deployed=2, tau=5) == pytest.approx(0.4)


def test_history_match_rules():
    r = rep(intensity=6.0)
    near = dpc(history=[HistoryRecord("a", HazardKind.FLOOD, 8.0)])  # |6-8| = 25% of 8
    far = dpc(history=[HistoryRecord("a", HazardKind.FLOOD, 10.0)])
    false_alarm = dpc(history=[HistoryRecord("a", HazardKind.FLOOD, 6.0, outcome=Outcome.FALSE_ALARM)])
    other_area = dpc(history=[HistoryRecord("b", HazardKind.FLOOD, 6.0)])
    vals = [confidence(r, d, 20, 2, 5) for d in (near, far, false_alarm, other_area)]
    assert vals == [pytest.approx(0.5), pytest.approx(0.4), pytest.approx(0.4), pytest.approx(0.4)]


@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 4), st.integers(1, 4), st.integers(1, 20))
def test_confidence_monotone_and_bounded(k1, k2, m1, m2, tau):
    alive, deployed = 20, 4
    lo_k, hi_k = sorted((k1, k2))
    lo_m, hi_m = sorted((m1, m2))
    mods = ["acoustic", "seismic", "visual", "thermal"]
    d = dpc()
    a = confidence(rep(sensors=range(1, lo_k + 1), modalities=mods[:lo_m]), d, alive, deployed, tau)
    b = confidence(rep(sensors=range(1, hi_k + 1), modalities=mods[:hi_m]), d, alive, deployed, tau)
    assert 0.0 <= a <= b <= 1.0


def test_process_forward():
    d = dpc(confidence_threshold=0.7)
    r = rep(sensors=range(1, 10))
    assert dpc_process(d, r, 0.0, alive_in_area=10, modalities_deployed=1, tau=5) is Disposition.FORWARD
    assert r.kind is ReportKind.PROCESSED and r.confidence == 1.0


def test_process_flagged_without_retries():
    d = dpc(max_reprocess=0)
    r = rep()
    assert dpc_process(d, r, 0.0, 10, 2, 5) is Disposition.FORWARD_FLAGGED
    assert r.low_confidence and r.kind is ReportKind.PROCESSED and r.confidence == pytest.approx(0.4)


def test_reprocess_merge_then_forward():
    d = dpc(max_reprocess=2)
    held = rep("r1", sensors=range(1, 6), modalities=("acoustic",))
    assert dpc_process(d, held, 0.0, 10, 2, 5) is Disposition.REPROCESS
    assert d.held == {"r1": held} and d.retries == {"r1": 1}
    extra = rep("r2", sensors=range(4, 9), modalities=("seismic",), intensity=7.5)
    merge_reports(held, extra)
    assert held.payload.k == 8 and held.payload.modalities == {"acoustic", "seismic"} and held.payload.intensity == 7.5
    # 8/10 x 2/2 x 0.8 / (5/10) = 1.28 -> 1.0
    assert dpc_process(d, held, 30.0, 10, 2, 5) is Disposition.FORWARD
    assert d.held == {}


def test_reprocess_is_bounded():
    d = dpc(max_reprocess=2)
    r = rep()
    outcomes = [dpc_process(d, r, t, 10, 2, 5) for t in (0.0, 30.0, 60.0)]
    assert outcomes == [Disposition.REPROCESS, Disposition.REPROCESS, Disposition.FORWARD_FLAGGED]
    assert d.retries["r1"] == 2 and r.low_confidence


def test_manual_forwards_and_bad_kinds_rejected():
    d = dpc()
    m = rep(kind=ReportKind.MANUAL_RECORD)
    assert dpc_process(d, m, 0.0) is Disposition.FORWARD and m.kind is ReportKind.MANUAL_RECORD
    with pytest.raises(KindMismatch):
        dpc_process(d, rep(kind=ReportKind.RAW), 0.0)
    with pytest.raises(KindMismatch):
        dpc_process(d, rep(kind=ReportKind.PROCESSED), 0.0)


@given(st.sets(st.integers(1, 20), min_size=1), st.sets(st.integers(1, 20), min_size=1),
       st.sets(st.sampled_from(["acoustic", "seismic", "visual"]), min_size=1),
       st.sets(st.sampled_from(["acoustic", "seismic", "visual"]), min_size=1))
def test_merge_monotone(s1, s2, m1, m2):
    a, b = rep("a", sensors=s1, modalities=m1), rep("b", sensors=s2, modalities=m2)
    before = [confidence(x, dpc(), 20, 3, 5) for x in (a, b)]
    merge_reports(a, b)
    assert a.payload.sensors == s1 | s2 and a.payload.k == len(s1 | s2)
    assert confidence(a, dpc(), 20, 3, 5) >= max(before)


def test_peer_sync_fanout():
    d = dpc(peers=set())
    r = rep()
    dpc_process(d, r, 0.0, 10, 2, 5)
    assert peer_sync(d, r, 10.0) == []
    d2 = dpc(peers={3, 2})
    dpc_process(d2, r, 0.0, 10, 2, 5)
    msgs = peer_sync(d2, r, 10.0, latency=1.0)
    assert [(p, at) for p, at, _ in msgs] == [(2, 11.0), (3, 11.0)]
    assert msgs[0][2] is not r
    with pytest.raises(ValueError):
        peer_sync(dpc(), rep("zzz"), 0.0)


def test_peer_receive_union():
    peer = dpc(id=2)
    mine = rep("p1", sensors={1, 2, 3})
    dpc_process(peer, mine, 0.0, 10, 2, 5)
    held = peer_receive(peer, rep("s1", sensors={3, 4, 5, 6}))
    assert held is mine and held.payload.k == len({1, 2, 3} | {3, 4, 5, 6})
    assert peer_receive(peer, rep("s2", area="elsewhere")) is None


def test_forward():
    d = dpc()
    a, b = rep("a"), rep("b")
    for r in (a, b):
        r.promote(ReportKind.PROCESSED)
    assert dpc_forward(d, a, 5.0, latency=2.0) == 7.0
    dpc_forward(d, b, 5.0)
    assert [r.id for r in d.outbox] == ["a", "b"] and a.provenance[-1] == ("dpc:1", 5.0)
    with pytest.raises(KindMismatch):
        dpc_forward(d, rep("raw", kind=ReportKind.RAW), 5.0)


def test_parallel_dpcs_same_decisions():
    # non-interacting areas: one DPC or two DPCs give the same (area, kind, disposition) multiset
    reports = [rep(f"r{i}", sensors=range(1, 3 + i), area=f"area{i % 3}") for i in range(6)]

    def decide(assign):
        out = []
        dpcs = {1: dpc(id=1, max_reprocess=0), 2: dpc(id=2, max_reprocess=0)}
        for r, t in zip(reports, assign):
            c = r.copy()
            c.payload = r.payload
            out.append((c.origin_area, c.payload.hypothesis, dpc_process(dpcs[t], c, 0.0, 10, 1, 3)))
        return sorted(out)

    assert decide([1] * 6) == decide([1, 2] * 3)


def test_dpc_validation():
    with pytest.raises(ValueError):
        dpc(confidence_threshold=0.0)
    with pytest.raises(ValueError):
        dpc(max_reprocess=-1)
