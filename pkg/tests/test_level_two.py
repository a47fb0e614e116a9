import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcis.core import Buffer, DestinationFull, Position, Report, ReportKind, distance
from dmcis.level_two import (
    Contact,
    ContactTable,
    MapNode,
    RadioProfile,
    Station,
    abort_transfer,
    check_contacts,
    map_position,
    needs_ferry,
    transfer_step,
    transfer_time,
    validate_fleet,
)

B = RadioProfile.of("b")


def mapnode(mid=1, route=((0, 0), (100, 0)), speed=10.0, radio=B, **kw):
    return MapNode(mid, [Position(*p) for p in route], speed, radio, **kw)


def test_radio_table():
    assert (B.nominal_rate, B.channels, B.range) == (11.0, 3, 250.0)
    g, a = RadioProfile.of("g"), RadioProfile.of("a")
    assert (g.nominal_rate, g.channels) == (54.0, 3)
    assert (a.nominal_rate, a.channels) == (54.0, 12)
    assert a.range < B.range and a.range < g.range
    assert B.effective_rate == 5.5
    with pytest.raises(ValueError):
        RadioProfile.of("b", efficiency=0.0)


def test_map_position_examples():
    m = mapnode()
    assert map_position(m, 0.0) == Position(0, 0)
    assert map_position(m, 5.0) == Position(50, 0)
    assert m.lap_length == 200.0
    assert map_position(m, m.lap_time) == Position(0, 0)
    assert map_position(m, 15.0) == Position(50, 0)  # on the way back


def test_map_position_offset_and_parked():
    m = mapnode(start_offset=150.0)
    assert map_position(m, 0.0) == Position(50, 0)
    parked = mapnode(route=((7, 7), (7, 7)))
    assert map_position(parked, 123.0) == Position(7, 7)
    with pytest.raises(ValueError):
        map_position(m, -1.0)


@given(st.floats(0, 1e5))
def test_map_stays_on_route(t):
    m = mapnode(route=((0, 0), (300, 0), (300, 400)), speed=7.0)
    p = map_position(m, t)
    on_leg = lambda a, b: abs(distance(a, p) + distance(p, b) - distance(a, b)) < 1e-6  # noqa: E731
    r = m.route
    assert on_leg(r[0], r[1]) or on_leg(r[1], r[2]) or on_leg(r[2], r[0])


def test_needs_ferry_examples():
    assert needs_ferry(Position(0, 0), Position(0, 0), 1000.0) is False
    assert needs_ferry(Position(0, 0), Position(5000, 0), 1000.0, same_center=True) is False
    assert needs_ferry(Position(0, 0), Position(900, 0), 1000.0) is False
    assert needs_ferry(Position(0, 0), Position(1000, 0), 1000.0) is True
    with pytest.raises(ValueError):
        needs_ferry(Position(0, 0), Position(1, 0), 0.0)


def station(actor="sdcc:1", pos=(0, 0), radio=B, order=(0, 1)):
    return Station(actor, Position(*pos), radio, order)


def test_contact_opens_inside_range():
    radio = RadioProfile.of("b", range=100.0)
    m = mapnode(route=((10, 0), (10, 0)), radio=radio)
    table = ContactTable()
    (what, c), = check_contacts([m], [station(radio=radio)], table, 0.0)
    assert what == "open" and c.rate == 5.5 and c.opened_at == 0.0


def test_contact_closes_when_out_of_range():
    m = mapnode(route=((0, 0), (1000, 0)), speed=100.0)
    table = ContactTable()
    st_ = [station()]
    assert [w for w, _ in check_contacts([m], st_, table, 0.0)] == ["open"]
    assert check_contacts([m], st_, table, 2.0) == []
    assert [w for w, _ in check_contacts([m], st_, table, 3.0)] == ["close"]
    assert table.count("sdcc:1") == 0


@pytest.mark.parametrize("std,n,cap", [("b", 4, 3), ("a", 13, 12)])
def test_channel_cap(std, n, cap):
    radio = RadioProfile.of(std)
    maps = [mapnode(mid=i, route=((5, 0), (5, 0)), radio=radio) for i in range(n, 0, -1)]
    table = ContactTable()
    opened = check_contacts(maps, [station(radio=radio)], table, 0.0)
    assert len(opened) == cap
    assert sorted(c.map_id for _, c in opened) == list(range(1, cap + 1))
    # a freed channel goes to the waiting MAP on the next tick
    table.close(table.open[(1, "sdcc:1")])
    (what, c), = check_contacts(maps, [station(radio=radio)], table, 1.0)
    assert what == "open" and c.map_id in (1, n)


def test_rate_is_min_of_both_ends():
    m = mapnode(route=((5, 0), (5, 0)), radio=RadioProfile.of("g"))
    (_, c), = check_contacts([m], [station(radio=B)], ContactTable(), 0.0)
    assert c.rate == 5.5


def report(rid, size):
    return Report(rid, ReportKind.PARTIALLY_PROCESSED, "a", 0.0, size)


def test_transfer_time_examples():
    assert transfer_time(1_000_000, 11.0) == pytest.approx(8 / 11)
    assert transfer_time(1_000_000, 54.0) == pytest.approx(0.148, abs=1e-3)
    assert transfer_time(1_000_000, 11.0) / transfer_time(1_000_000, 54.0) == pytest.approx(54 / 11)


def test_transfer_step_moves_whole_reports_fifo():
    c = Contact(1, "sdcc:1", 0.0, rate=11.0)
    src, dst = Buffer(), Buffer(10_000_000)
    src.append(report("r1", 1_000_000))
    src.append(report("r2", 1_000_000))
    moved = transfer_step(c, src, dst, 0.5)
    assert moved == pytest.approx(687_500) and len(dst) == 0 and c.active_transfer == "r1"
    moved = transfer_step(c, src, dst, 0.5)
    assert [r.id for r in dst] == ["r1"] and c.active_transfer == "r2"
    assert dst.bytes_in + c.progress == pytest.approx(1_375_000)


def test_transfer_step_exact_completion_time():
    c = Contact(1, "sdcc:1", 0.0, rate=11.0)
    src, dst = Buffer(), Buffer()
    src.append(report("r1", 1_000_000))
    transfer_step(c, src, dst, 8 / 11)
    assert len(dst) == 1 and len(src) == 0


def test_transfer_step_empty_and_full():
    c = Contact(1, "sdcc:1", 0.0, rate=11.0)
    assert transfer_step(c, Buffer(), Buffer(), 1.0) == 0
    src = Buffer()
    src.append(report("big", 5000))
    with pytest.raises(DestinationFull):
        transfer_step(c, src, Buffer(1000), 1.0)
    with pytest.raises(ValueError):
        transfer_step(c, src, Buffer(), 0.0)


def test_abort_restarts_from_zero():
    c = Contact(1, "sdcc:1", 0.0, rate=11.0)
    src, dst = Buffer(), Buffer()
    src.append(report("r1", 1_000_000))
    transfer_step(c, src, dst, 0.5)
    assert abort_transfer(c) == "r1"
    assert c.progress == 0.0 and len(src) == 1
    transfer_step(c, src, dst, 0.5)
    assert len(dst) == 0  # 0.5 s from scratch is not enough


@given(st.lists(st.integers(1, 3_000_000), max_size=8), st.lists(st.floats(0.01, 2.0), min_size=1, max_size=10))
def test_transfer_byte_conservation(sizes, steps):
    c = Contact(1, "sdcc:1", 0.0, rate=5.5)
    src, dst = Buffer(), Buffer()
    for i, s in enumerate(sizes):
        src.append(report(f"r{i}", s))
    total = sum(steps)
    sent = sum(transfer_step(c, src, dst, dt) for dt in steps)
    assert sent == pytest.approx(dst.used + c.progress, rel=1e-9, abs=1e-6)
    assert sent <= 5.5e6 * total / 8 + 1e-6
    assert src.used + dst.used == sum(sizes)
    assert [r.id for r in dst] == [f"r{i}" for i in range(len(dst))]


def test_validate_fleet_examples():
    assert validate_fleet({"x": (3, 2, 2)}, {"x": True}) == []
    (v,) = validate_fleet({"x": (1, 2, 1)}, {"x": True})
    assert v.code == "fleet" and "J < R" in v.message and "x" in v.message
    assert validate_fleet({"x": (0, 2, 2)}, {"x": False}) == []
    assert validate_fleet({"x": (3, 2, 1)}, {"x": True}) == []  # R != T is fine
    assert len(validate_fleet({"x": (0, 1, 1)}, {"x": True})) == 2
