import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcis.core import HazardEvent, HazardField, HazardKind, KindMismatch, Payload, Position, Report, ReportKind, Severity
from dmcis.level_one import (
    Detection,
    EmptyDeployment,
    SensorNode,
    Sdcc,
    form_clusters,
    reelect_head,
    sample,
    sdcc_aggregate,
    sdcc_insert_manual,
)


def sdcc(**kw):
    base = dict(id=1, area="a", position=Position(0, 0), tau=5, window=60.0, refractory=300.0)
    base.update(kw)
    return Sdcc(**base)


def det(sensor, at, value=2.0, modality="acoustic", pos=None):
    return Detection(sensor=sensor, at=at, value=value, modality=modality, position=pos or Position(sensor, 0))


def test_singleton_cluster():
    (c,) = form_clusters([SensorNode(1, Position(5, 0), 1)], [sdcc()], 8)
    assert c.head == 1 and c.members == [1]


def test_partition_by_distance():
    sensors = [SensorNode(i, Position(d, 0), 1) for i, d in [(1, 3.0), (2, 1.0), (3, 4.0), (4, 2.0)]]
    clusters = form_clusters(sensors, [sdcc()], 2)
    assert [sorted(c.members) for c in clusters] == [[2, 4], [1, 3]]
    assert [c.head for c in clusters] == [2, 1]
    assert all(s.cluster is not None for s in sensors)


def test_equidistant_head_is_smaller_id():
    sensors = [SensorNode(7, Position(0, 5), 1), SensorNode(3, Position(5, 0), 1)]
    (c,) = form_clusters(sensors, [sdcc()], 2)
    assert c.head == 3


def test_empty_deployment():
    with pytest.raises(EmptyDeployment):
        form_clusters([SensorNode(1, Position(0, 0), 1)], [sdcc(), sdcc(id=2)], 4)


@given(st.lists(st.tuples(st.integers(1, 3), st.floats(-500, 500), st.floats(-500, 500)), min_size=3, max_size=40),
       st.integers(1, 6))
def test_cluster_partition_invariants(raw, k):
    sdccs = [sdcc(id=i, position=Position(100 * i, 0)) for i in (1, 2, 3)]
    sensors = [SensorNode(n + 1, Position(x, y), home) for n, (home, x, y) in enumerate(raw)]
    used = {s.home_sdcc for s in sensors}
    clusters = form_clusters(sensors, [s for s in sdccs if s.id in used], k)
    seen = [m for c in clusters for m in c.members]
    assert sorted(seen) == [s.id for s in sensors]
    by_id = {s.id: s for s in sensors}
    for c in clusters:
        assert len(c.members) <= k and c.head in c.members
        assert len({by_id[m].home_sdcc for m in c.members}) == 1
        assert c.head == min(c.members, key=lambda m: (c.reach[m], m))


def test_reelect_non_head():
    sensors = [SensorNode(i, Position(i, 0), 1) for i in (1, 2, 3)]
    (c,) = form_clusters(sensors, [sdcc()], 3)
    c2 = reelect_head(c, 3)
    assert c2.head == 1 and len(c2.members) == 2


def test_reelect_head_failure_picks_nearest():
    sensors = [SensorNode(1, Position(1, 0), 1), SensorNode(2, Position(9, 0), 1), SensorNode(3, Position(0, 4), 1)]
    (c,) = form_clusters(sensors, [sdcc()], 3)
    assert c.head == 1
    assert reelect_head(c, 1).head == 3


def test_reelect_last_member_dissolves():
    (c,) = form_clusters([SensorNode(1, Position(1, 0), 1)], [sdcc()], 3)
    assert reelect_head(c, 1) is None
    with pytest.raises(ValueError):
        reelect_head(c, 99)


def field(peak=10.0, radius=100.0):
    return HazardField([HazardEvent("e", HazardKind.FLOOD, Position(0, 0), radius, 0.0, 100.0, peak)])


def test_sample_examples():
    s = SensorNode(1, Position(500, 0), 1, detect_threshold=1.0)
    assert sample(s, field(), 5.0) is None
    exact = SensorNode(2, Position(90, 0), 1, detect_threshold=0.5)
    d = sample(exact, field(), 5.0, hop_delay=0.25)
    assert d is not None and d.value == pytest.approx(1.0) and d.at == 5.5 and d.source == "e"
    strict = SensorNode(3, Position(90, 0), 1, detect_threshold=1.5)
    assert sample(strict, field(), 5.0) is None


def test_sample_boundary_is_inclusive():
    s = SensorNode(1, Position(50, 0), 1, detect_threshold=5.0)
    assert sample(s, field(), 1.0) is not None


def test_sample_dead_sensor():
    s = SensorNode(1, Position(0, 0), 1, alive=False)
    with pytest.raises(ValueError):
        sample(s, field(), 1.0)


def test_aggregate_counts_distinct_sensors():
    sd = sdcc(tau=5)
    sd.detection_buffer = [det(i, 100.0 + i, value=1.0 + i) for i in range(1, 7)]
    r = sdcc_aggregate(sd, 120.0)
    assert r.payload.k == 6 and r.kind is ReportKind.PARTIALLY_PROCESSED
    assert r.payload.intensity == 7.0
    assert r.payload.epicenter == Position(3.5, 0)
    assert r.provenance == [("sdcc:1", 120.0)]


def test_aggregate_duplicates_count_once():
    sd = sdcc(tau=5)
    sd.detection_buffer = [det(1, 100.0 + i) for i in range(10)]
    assert sdcc_aggregate(sd, 120.0) is None


def test_tau_equals_n_with_one_failure():
    n = 20
    sd = sdcc(tau=n)
    sd.detection_buffer = [det(i, 110.0) for i in range(1, n + 1)]
    assert sdcc_aggregate(sd, 120.0, alive=set(range(2, n + 1))) is None
    sd.detection_buffer = [det(i, 110.0) for i in range(1, n + 1)]
    assert sdcc_aggregate(sd, 120.0).payload.k == n


def test_window_is_half_open_and_future_detections_wait():
    sd = sdcc(tau=2, window=60.0)
    sd.detection_buffer = [det(1, 60.0), det(2, 61.0), det(3, 120.5)]
    assert sdcc_aggregate(sd, 120.0) is None  # sensor 1 at exactly now - W is out
    assert [d.sensor for d in sd.detection_buffer] == [2, 3]
    r = sdcc_aggregate(sd, 120.9)
    assert r.payload.k == 2


def test_refractory_suppresses_then_releases():
    sd = sdcc(tau=1, refractory=300.0)
    sd.detection_buffer = [det(1, 10.0)]
    assert sdcc_aggregate(sd, 60.0) is not None
    sd.detection_buffer = [det(1, 200.0)]
    assert sdcc_aggregate(sd, 240.0) is None
    sd.detection_buffer = [det(1, 350.0)]
    r = sdcc_aggregate(sd, 360.0)
    assert r is not None and r.id == "sdcc1-2"


def test_severity_from_hypothesis():
    sd = sdcc(tau=1, hypothesis=HazardKind.EARTHQUAKE)
    sd.detection_buffer = [det(1, 10.0, value=1.0)]
    assert sdcc_aggregate(sd, 60.0).severity is Severity.EMERGENCY


@given(st.lists(st.tuples(st.integers(1, 12), st.floats(0.0, 120.0)), max_size=60), st.integers(1, 12))
def test_aggregate_matches_brute_force(raw, tau):
    now = 120.0
    sd = sdcc(tau=tau, window=60.0)
    sd.detection_buffer = [det(s, at) for s, at in raw]
    expected = len({s for s, at in raw if now - 60.0 < at <= now})
    r = sdcc_aggregate(sd, now)
    if expected >= tau:
        assert r is not None and r.payload.k == expected
    else:
        assert r is None


@given(st.lists(st.tuples(st.integers(1, 12), st.floats(0.0, 600.0)), max_size=80), st.integers(1, 11))
def test_raising_tau_never_adds_reports(raw, tau):
    def count(t):
        sd = sdcc(tau=t, window=60.0, refractory=0.0)
        emitted = 0
        for n in range(1, 11):
            sd.detection_buffer = [det(s, at) for s, at in raw]
            emitted += sdcc_aggregate(sd, 60.0 * n) is not None
        return emitted

    assert count(tau + 1) <= count(tau)


def test_insert_manual():
    sd = sdcc()
    a = Report("m1", ReportKind.MANUAL_RECORD, "a", 0.0, 100, payload=Payload(note="census"))
    b = Report("m2", ReportKind.MANUAL_RECORD, "a", 1.0, 100)
    sdcc_insert_manual(sd, a)
    assert len(sd.outbox) == 1
    sdcc_insert_manual(sd, b)
    assert [r.id for r in sd.outbox] == ["m1", "m2"] and sd.manual_records == [a, b]
    with pytest.raises(KindMismatch):
        sdcc_insert_manual(sd, Report("x", ReportKind.RAW, "a", 0.0, 100))


def test_sensor_and_sdcc_validation():
    with pytest.raises(ValueError):
        SensorNode(1, Position(0, 0), 1, modality="sonar")
    with pytest.raises(ValueError):
        SensorNode(1, Position(0, 0), 1, detect_threshold=0)
    with pytest.raises(ValueError):
        sdcc(tau=0)
    assert sdcc().window_step == 60.0
    assert not math.isnan(sdcc().window)
