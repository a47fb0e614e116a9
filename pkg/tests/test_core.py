import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcis.core import (
    Buffer,
    DestinationFull,
    HazardEvent,
    HazardField,
    HazardKind,
    KindMismatch,
    Position,
    Report,
    ReportKind,
    Severity,
    distance,
    hazard_value,
    max_severity,
    severity_of,
)

coord = st.floats(min_value=-1e5, max_value=1e5, allow_nan=False)
points = st.builds(Position, coord, coord)


def event(**kw):
    base = dict(id="e", kind=HazardKind.FLOOD, epicenter=Position(0, 0), radius=100.0, onset=0.0,
                duration=50.0, peak_intensity=10.0)
    base.update(kw)
    return HazardEvent(**base)


@pytest.mark.parametrize("p,q,d", [((0, 0), (0, 0), 0.0), ((0, 0), (3, 4), 5.0), ((1, 2), (4, 6), 5.0)])
def test_distance_examples(p, q, d):
    assert distance(Position(*p), Position(*q)) == d


def test_position_rejects_non_finite():
    with pytest.raises(ValueError):
        Position(math.inf, 0)
    with pytest.raises(ValueError):
        Position(0, math.nan)


@given(points, points, points)
def test_distance_metric_axioms(p, q, r):
    assert distance(p, q) == distance(q, p)
    assert distance(p, p) == 0
    assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-6


def test_hazard_value_examples():
    assert hazard_value(HazardField(), Position(3, 4), 12.0) == 0.0
    f = HazardField([event()])
    assert hazard_value(f, Position(0, 0), 10.0) == 10.0
    assert hazard_value(f, Position(50, 0), 10.0) == 5.0


def test_hazard_window_is_half_open():
    f = HazardField([event(onset=10.0, duration=5.0)])
    assert hazard_value(f, Position(0, 0), 9.999) == 0.0
    assert hazard_value(f, Position(0, 0), 10.0) == 10.0
    assert hazard_value(f, Position(0, 0), 15.0) == 0.0


def test_hazard_overlap_adds_and_noise_clamps():
    f = HazardField([event(id="a"), event(id="b", epicenter=Position(100, 0))], background_noise_sigma=2.0)
    assert hazard_value(f, Position(50, 0), 1.0) == 10.0
    assert hazard_value(f, Position(50, 0), 1.0, rng_draw=1.5) == 13.0
    assert hazard_value(f, Position(500, 0), 1.0, rng_draw=-3.0) == 0.0


def test_hazard_value_rejects_negative_time():
    with pytest.raises(ValueError):
        hazard_value(HazardField(), Position(0, 0), -1.0)


@given(st.floats(0, 1000), st.floats(0, 2 * math.pi), st.floats(0, 200))
def test_hazard_deterministic_and_zero_outside(t, angle, r):
    f = HazardField([event(duration=500.0)])
    p = Position(r * math.cos(angle), r * math.sin(angle))
    v = hazard_value(f, p, t)
    assert v == hazard_value(f, p, t)
    if r >= 100 or t >= 500:
        assert v == 0.0


@given(st.floats(0, 2 * math.pi), st.floats(0, 150), st.floats(1e-4, 1.0))
def test_hazard_continuous_along_rays(angle, r, step):
    f = HazardField([event()])
    ux, uy = math.cos(angle), math.sin(angle)
    a = hazard_value(f, Position(r * ux, r * uy), 1.0)
    b = hazard_value(f, Position((r + step) * ux, (r + step) * uy), 1.0)
    # slope of the cone is peak / radius
    assert abs(a - b) <= 10.0 / 100.0 * step + 1e-9


def test_hazard_event_invariants():
    with pytest.raises(ValueError):
        event(radius=0)
    with pytest.raises(ValueError):
        event(duration=0)
    with pytest.raises(ValueError):
        event(kind=HazardKind.FALSE_SPIKE)
    event(kind=HazardKind.FALSE_SPIKE, ground_truth_warnable=False)
    with pytest.raises(ValueError):
        HazardField([event(), event()])


def test_severity_examples():
    cuts = {HazardKind.FLOOD: (1.0, 5.0)}
    assert severity_of(HazardKind.FLOOD, 0.1, cuts) is Severity.ROUTINE
    assert severity_of(HazardKind.FLOOD, 6.0, cuts) is Severity.EMERGENCY
    assert severity_of(HazardKind.FLOOD, 1.0, cuts) is Severity.URGENT
    assert severity_of(HazardKind.EARTHQUAKE, 0.5) is Severity.EMERGENCY
    assert severity_of(HazardKind.LANDSLIDE, 0.0) is Severity.EMERGENCY


@given(st.sampled_from(list(HazardKind)), st.floats(0, 50), st.floats(0, 50))
def test_severity_monotone(kind, a, b):
    lo, hi = sorted((a, b))
    assert severity_of(kind, lo).rank <= severity_of(kind, hi).rank


def test_max_severity():
    assert max_severity(Severity.URGENT, Severity.EMERGENCY) is Severity.EMERGENCY
    assert max_severity(Severity.URGENT, Severity.ROUTINE) is Severity.URGENT


def test_report_kind_moves_forward_only():
    r = Report("r", ReportKind.RAW, "a", 0.0, 10)
    r.promote(ReportKind.PARTIALLY_PROCESSED)
    r.promote(ReportKind.PROCESSED)
    with pytest.raises(KindMismatch):
        r.promote(ReportKind.RAW)
    m = Report("m", ReportKind.MANUAL_RECORD, "a", 0.0, 10)
    with pytest.raises(KindMismatch):
        m.promote(ReportKind.PROCESSED)


def test_report_provenance_time_ordered_and_size_positive():
    r = Report("r", ReportKind.RAW, "a", 0.0, 10)
    r.hop("sdcc:1", 1.0)
    r.hop("map:1", 1.0)
    with pytest.raises(ValueError):
        r.hop("dpc:1", 0.5)
    with pytest.raises(ValueError):
        Report("z", ReportKind.RAW, "a", 0.0, 0)


def test_report_copy_is_independent():
    r = Report("r", ReportKind.RAW, "a", 0.0, 10)
    r.hop("sdcc:1", 1.0)
    c = r.copy()
    c.hop("map:1", 2.0)
    assert len(r.provenance) == 1


def test_buffer_accounting():
    b = Buffer(25)
    r1, r2, r3 = (Report(f"r{i}", ReportKind.RAW, "a", 0.0, 10) for i in range(3))
    b.append(r1)
    b.append(r2)
    assert (b.used, b.free, b.peak) == (20, 5, 20)
    with pytest.raises(DestinationFull):
        b.append(r3)
    b.remove(r1)
    assert list(b) == [r2]
    assert (b.used, b.bytes_in, b.bytes_out) == (10, 20, 10)
