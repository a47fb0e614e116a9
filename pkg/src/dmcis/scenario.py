"""Scenario documents: parsing with defaults, plus validation and world construction.

A scenario is one JSON object tagged ``"schema": "dmcis.scenario/1"``. Parsing
normalizes it (every default filled in, see ``DEFAULTS``) and keeps the
normalized document on :class:`Scenario`; ``dump_scenario`` writes it back so
``parse_scenario(dump_scenario(s)) == s``.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from dmcis.core import (
    DEFAULT_SEVERITY_CUTS,
    DmcisError,
    HazardEvent,
    HazardField,
    HazardKind,
    Position,
    Severity,
    Violation,
)
from dmcis.engine import Rng, derive_seed
from dmcis.level_four import Cdc, Dcc, validate_cdc_count
from dmcis.level_one import MODALITIES, SensorNode, Sdcc
from dmcis.level_three import Dpc, HistoryRecord, Outcome
from dmcis.level_two import RADIO_STANDARDS, MapNode, RadioProfile, needs_ferry, validate_fleet

SCHEMA = "dmcis.scenario/1"


class ParseError(DmcisError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where + [message]) if where else message}")
        self.field = field
        self.line = line


class MissingField(ParseError):
    def __init__(self, field: str):
        super().__init__("missing required field", field=field)
        self.name = field.rsplit(".", 1)[-1]


class UnknownKey(ParseError):
    def __init__(self, field: str):
        super().__init__("unknown key", field=field)


REQUIRED = object()

# One table for every default. docs/defaults.md mirrors it (checked by a test).
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "scenario": {
        "schema": REQUIRED,
        "name": "",
        "seed": 0,
        "duration": REQUIRED,
        "delta": REQUIRED,
        "region": None,
        "areas": REQUIRED,
        "params": {},
        "sensors": REQUIRED,
        "sdccs": REQUIRED,
        "maps": {},
        "dpcs": REQUIRED,
        "cdcs": REQUIRED,
        "dcc": REQUIRED,
        "pairs": REQUIRED,
        "colocated": [],
        "hazards": {},
        "failures": [],
        "manual_records": [],
    },
    "params": {
        "contact_tick": 1.0,
        "hop_delay": 0.01,
        "k_per_cluster": 8,
        "inter_dpc_latency": 1.0,
        "dpc_to_cdc_latency": 2.0,
        "cdc_to_dcc_latency": 1.0,
        "emergency_latency": 0.5,
        "dominance_factor": 4.0,
        "severity_cuts": {},
    },
    "region": {"xmin": REQUIRED, "ymin": REQUIRED, "xmax": REQUIRED, "ymax": REQUIRED},
    "area": {"id": REQUIRED, "radio": "b", "radio_range": None, "efficiency": 0.5},
    "sensor": {
        "id": REQUIRED,
        "x": REQUIRED,
        "y": REQUIRED,
        "sdcc": REQUIRED,
        "modality": "acoustic",
        "threshold": 1.0,
        "period": 10.0,
        "phase": 0.0,
    },
    "sdcc": {
        "id": REQUIRED,
        "area": REQUIRED,
        "x": REQUIRED,
        "y": REQUIRED,
        "tau": REQUIRED,
        "window": 60.0,
        "window_step": None,
        "refractory": 300.0,
        "report_size_bytes": 1_000_000,
        "hypothesis": "flood",
    },
    "maps": {"count": 0, "template": None, "items": []},
    "map_template": {
        "area": REQUIRED,
        "route": REQUIRED,
        "speed": 10.0,
        "capacity": 50_000_000,
        "phase": 0.0,
        "phase_jitter": 0.0,
        "waypoint_jitter": 0.0,
    },
    "map": {
        "id": REQUIRED,
        "area": REQUIRED,
        "route": REQUIRED,
        "speed": 10.0,
        "capacity": 50_000_000,
        "start_offset": 0.0,
    },
    "dpc": {
        "id": REQUIRED,
        "area": REQUIRED,
        "x": REQUIRED,
        "y": REQUIRED,
        "confidence_threshold": 0.7,
        "max_reprocess": 2,
        "reprocess_wait": 30.0,
        "processing_time": 0.5,
        "peers": [],
        "cdc": None,
        "history": [],
    },
    "history": {
        "area": REQUIRED,
        "kind": REQUIRED,
        "intensity": REQUIRED,
        "year_tag": 0,
        "outcome": "disaster_confirmed",
    },
    "cdc": {"id": REQUIRED, "similarity_threshold": 0.6, "reference_db": []},
    "dcc": {
        "id": 1,
        "subscribers": {},
        "sms_rate": 100.0,
        "sms_base_latency": 1.0,
        "channels": ["sms"],
    },
    "hazards": {"noise_sigma": 0.0, "events": []},
    "hazard": {
        "id": REQUIRED,
        "kind": REQUIRED,
        "x": REQUIRED,
        "y": REQUIRED,
        "radius": REQUIRED,
        "onset": REQUIRED,
        "duration": REQUIRED,
        "peak": REQUIRED,
        "severity": None,
        "warnable": None,
    },
    "failure": {"sensor": REQUIRED, "t": REQUIRED},
    "manual_record": {"sdcc": REQUIRED, "t": REQUIRED, "size_bytes": 2000, "note": ""},
}

_NUM = (int, float)


def _fill(obj: Any, section: str, path: str) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", field=path)
    table = DEFAULTS[section]
    for key in obj:
        if key not in table:
            raise UnknownKey(f"{path}.{key}" if path else key)
    out = {}
    for key, default in table.items():
        if key in obj:
            out[key] = obj[key]
        elif default is REQUIRED:
            raise MissingField(f"{path}.{key}" if path else key)
        else:
            out[key] = copy.deepcopy(default)
    return out


def _num(value: Any, path: str, *, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, _NUM):
        raise ParseError(f"expected a number, got {value!r}", field=path)
    if positive and not value > 0:
        raise ParseError("must be > 0", field=path)
    if nonneg and value < 0:
        raise ParseError("must be >= 0", field=path)
    return value


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {value!r}", field=path)
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError("expected a list", field=path)
    return value


def _unique(items: List[Dict[str, Any]], path: str, what: str) -> None:
    seen = set()
    for i, item in enumerate(items):
        if item["id"] in seen:
            raise ParseError(f"duplicate {what} id {item['id']!r}", field=f"{path}[{i}].id")
        seen.add(item["id"])


def _route(value: Any, path: str) -> List[List[float]]:
    pts = _list(value, path)
    if len(pts) < 2:
        raise ParseError("route needs at least 2 waypoints", field=path)
    out = []
    for i, p in enumerate(pts):
        if not (isinstance(p, list) and len(p) == 2):
            raise ParseError("waypoint must be [x, y]", field=f"{path}[{i}]")
        out.append([_num(p[0], f"{path}[{i}]"), _num(p[1], f"{path}[{i}]")])
    return out


def _history(items: Any, path: str) -> List[Dict[str, Any]]:
    out = []
    for i, rec in enumerate(_list(items, path)):
        p = f"{path}[{i}]"
        rec = _fill(rec, "history", p)
        _enum(HazardKind, rec["kind"], f"{p}.kind")
        _enum(Outcome, rec["outcome"], f"{p}.outcome")
        _num(rec["intensity"], f"{p}.intensity", nonneg=True)
        _int(rec["year_tag"], f"{p}.year_tag")
        out.append(rec)
    return out


def _enum(cls, value: Any, path: str):
    try:
        return cls(value)
    except ValueError:
        raise ParseError(f"invalid value {value!r}", field=path) from None


@dataclass
class Scenario:
    """A parsed, default-complete scenario document."""

    doc: Dict[str, Any]

    def __getattr__(self, name: str) -> Any:
        doc = self.__dict__.get("doc")
        if doc is not None and name in doc:
            return doc[name]
        raise AttributeError(name)

    @property
    def params(self) -> Dict[str, Any]:
        return self.doc["params"]

    def area(self, area_id: str) -> Dict[str, Any]:
        for a in self.doc["areas"]:
            if a["id"] == area_id:
                return a
        raise KeyError(area_id)

    def radio(self, area_id: str) -> RadioProfile:
        a = self.area(area_id)
        return RadioProfile.of(a["radio"], a["radio_range"], a["efficiency"])

    def severity_cuts(self) -> Dict[HazardKind, Optional[Tuple[float, float]]]:
        cuts = {}
        for kind, value in self.params["severity_cuts"].items():
            cuts[HazardKind(kind)] = None if value is None else (float(value[0]), float(value[1]))
        return cuts

    # entity construction ------------------------------------------------

    def hazard_field(self) -> HazardField:
        cuts = self.severity_cuts()
        events = []
        for h in self.doc["hazards"]["events"]:
            kind = HazardKind(h["kind"])
            severity = h["severity"]
            if severity is None:
                from dmcis.core import severity_of

                severity = severity_of(kind, h["peak"], cuts).value
            warnable = h["warnable"]
            if warnable is None:
                warnable = kind is not HazardKind.FALSE_SPIKE
            events.append(
                HazardEvent(
                    id=str(h["id"]),
                    kind=kind,
                    epicenter=Position(h["x"], h["y"]),
                    radius=h["radius"],
                    onset=h["onset"],
                    duration=h["duration"],
                    peak_intensity=h["peak"],
                    severity=Severity(severity),
                    ground_truth_warnable=warnable,
                )
            )
        return HazardField(events, self.doc["hazards"]["noise_sigma"])

    def build_sensors(self) -> List[SensorNode]:
        return [
            SensorNode(
                id=s["id"],
                position=Position(s["x"], s["y"]),
                home_sdcc=s["sdcc"],
                modality=s["modality"],
                detect_threshold=s["threshold"],
                sample_period=s["period"],
                phase=s["phase"],
            )
            for s in self.doc["sensors"]
        ]

    def build_sdccs(self) -> List[Sdcc]:
        return [
            Sdcc(
                id=s["id"],
                area=s["area"],
                position=Position(s["x"], s["y"]),
                tau=s["tau"],
                window=s["window"],
                window_step=s["window_step"],
                refractory=s["refractory"],
                report_size_bytes=s["report_size_bytes"],
                hypothesis=HazardKind(s["hypothesis"]),
            )
            for s in self.doc["sdccs"]
        ]

    def map_specs(self, seed: Optional[int] = None) -> List[Dict[str, Any]]:
        """Explicit MAPs followed by the ones generated from the fleet template.

        Generated MAPs are evenly spaced around the template lap; a seeded
        phase shift (``phase_jitter``, fraction of a lap) and per-MAP
        waypoint perturbation (``waypoint_jitter``, meters) come from the
        ``fleet`` random stream.
        """
        maps = self.doc["maps"]
        specs = [dict(m) for m in maps["items"]]
        count = maps["count"]
        tpl = maps["template"]
        if count and tpl:
            rng = Rng(derive_seed(self.doc["seed"] if seed is None else seed, "fleet"))
            shift = tpl["phase"] + tpl["phase_jitter"] * rng.uniform()
            next_id = max((m["id"] for m in specs), default=0) + 1
            for i in range(count):
                route = [list(p) for p in tpl["route"]]
                wj = tpl["waypoint_jitter"]
                if wj:
                    route = [[x + wj * (2 * rng.uniform() - 1), y + wj * (2 * rng.uniform() - 1)] for x, y in route]
                probe = MapNode(0, [Position(*p) for p in route], tpl["speed"], self.radio(tpl["area"]))
                frac = (i / count + shift) % 1.0
                specs.append(
                    {
                        "id": next_id + i,
                        "area": tpl["area"],
                        "route": route,
                        "speed": tpl["speed"],
                        "capacity": tpl["capacity"],
                        "start_offset": frac * probe.lap_length,
                    }
                )
        return specs

    def build_maps(self, seed: Optional[int] = None) -> List[MapNode]:
        return [
            MapNode(
                id=m["id"],
                route=[Position(*p) for p in m["route"]],
                speed=m["speed"],
                radio=self.radio(m["area"]),
                capacity=m["capacity"],
                area=m["area"],
                start_offset=m["start_offset"],
            )
            for m in self.map_specs(seed)
        ]

    def build_dpcs(self) -> List[Dpc]:
        first_cdc = min(c["id"] for c in self.doc["cdcs"])
        out = []
        for d in self.doc["dpcs"]:
            out.append(
                Dpc(
                    id=d["id"],
                    area=d["area"],
                    position=Position(d["x"], d["y"]),
                    confidence_threshold=d["confidence_threshold"],
                    max_reprocess=d["max_reprocess"],
                    reprocess_wait=d["reprocess_wait"],
                    processing_time=d["processing_time"],
                    history=[_history_record(h) for h in d["history"]],
                    peers=set(d["peers"]),
                    cdc=f"cdc:{d['cdc'] if d['cdc'] is not None else first_cdc}",
                )
            )
        return out

    def build_cdcs(self) -> List[Cdc]:
        return [
            Cdc(
                id=c["id"],
                reference_db=[_history_record(h) for h in c["reference_db"]],
                similarity_threshold=c["similarity_threshold"],
            )
            for c in self.doc["cdcs"]
        ]

    def build_dcc(self) -> Dcc:
        d = self.doc["dcc"]
        return Dcc(
            id=d["id"],
            subscribers_per_area=dict(d["subscribers"]),
            sms_rate=d["sms_rate"],
            sms_base_latency=d["sms_base_latency"],
            channels=set(d["channels"]),
        )

    def ferry_pairs(self) -> Dict[Tuple[int, int], bool]:
        """``needs_ferry`` for every assigned (SDCC, DPC) pair."""
        sd = {s["id"]: s for s in self.doc["sdccs"]}
        dp = {d["id"]: d for d in self.doc["dpcs"]}
        colocated = {tuple(p) for p in self.doc["colocated"]}
        out = {}
        for r, t in self.doc["pairs"]:
            out[(r, t)] = needs_ferry(
                Position(sd[r]["x"], sd[r]["y"]),
                Position(dp[t]["x"], dp[t]["y"]),
                self.doc["delta"],
                same_center=(r, t) in colocated,
            )
        return out


def _history_record(h: Dict[str, Any]) -> HistoryRecord:
    return HistoryRecord(
        area=h["area"],
        kind=HazardKind(h["kind"]),
        intensity=h["intensity"],
        year_tag=h["year_tag"],
        outcome=Outcome(h["outcome"]),
    )


def _normalize(raw: Any) -> Dict[str, Any]:
    doc = _fill(raw, "scenario", "")
    if doc["schema"] != SCHEMA:
        raise ParseError(f"unsupported schema {doc['schema']!r}, expected {SCHEMA!r}", field="schema")
    if not isinstance(doc["name"], str):
        raise ParseError("expected a string", field="name")
    seed = _int(doc["seed"], "seed")
    if not 0 <= seed < 2**64:
        raise ParseError("seed must be a 64-bit unsigned integer", field="seed")
    _num(doc["duration"], "duration", positive=True)
    _num(doc["delta"], "delta", positive=True)

    if doc["region"] is not None:
        doc["region"] = _fill(doc["region"], "region", "region")
        for k, v in doc["region"].items():
            _num(v, f"region.{k}")

    params = doc["params"] = _fill(doc["params"], "params", "params")
    for key in ("contact_tick",):
        _num(params[key], f"params.{key}", positive=True)
    for key in ("hop_delay", "inter_dpc_latency", "dpc_to_cdc_latency", "cdc_to_dcc_latency", "emergency_latency"):
        _num(params[key], f"params.{key}", nonneg=True)
    if _int(params["k_per_cluster"], "params.k_per_cluster") < 1:
        raise ParseError("must be >= 1", field="params.k_per_cluster")
    _num(params["dominance_factor"], "params.dominance_factor", positive=True)
    if not isinstance(params["severity_cuts"], dict):
        raise ParseError("expected an object", field="params.severity_cuts")
    for kind, cut in params["severity_cuts"].items():
        _enum(HazardKind, kind, f"params.severity_cuts.{kind}")
        if cut is not None:
            if not (isinstance(cut, list) and len(cut) == 2):
                raise ParseError("cut must be [urgent, emergency] or null", field=f"params.severity_cuts.{kind}")
            a, b = (_num(c, f"params.severity_cuts.{kind}", nonneg=True) for c in cut)
            if a > b:
                raise ParseError("urgent cut must not exceed emergency cut", field=f"params.severity_cuts.{kind}")

    areas = doc["areas"] = [_fill(a, "area", f"areas[{i}]") for i, a in enumerate(_list(doc["areas"], "areas"))]
    if not areas:
        raise ParseError("at least one area is required", field="areas")
    _unique(areas, "areas", "area")
    for i, a in enumerate(areas):
        if not isinstance(a["id"], str):
            raise ParseError("area id must be a string", field=f"areas[{i}].id")
        if a["radio"] not in RADIO_STANDARDS:
            raise ParseError(f"unknown radio standard {a['radio']!r}", field=f"areas[{i}].radio")
        if a["radio_range"] is not None:
            _num(a["radio_range"], f"areas[{i}].radio_range", positive=True)
        eff = _num(a["efficiency"], f"areas[{i}].efficiency")
        if not 0 < eff <= 1:
            raise ParseError("must be in (0, 1]", field=f"areas[{i}].efficiency")
    area_ids = {a["id"] for a in areas}

    def area_ref(value, path):
        if value not in area_ids:
            raise ParseError(f"unknown area {value!r}", field=path)

    sdccs = doc["sdccs"] = [_fill(s, "sdcc", f"sdccs[{i}]") for i, s in enumerate(_list(doc["sdccs"], "sdccs"))]
    _unique(sdccs, "sdccs", "sdcc")
    for i, s in enumerate(sdccs):
        p = f"sdccs[{i}]"
        _int(s["id"], f"{p}.id")
        area_ref(s["area"], f"{p}.area")
        _num(s["x"], f"{p}.x")
        _num(s["y"], f"{p}.y")
        if _int(s["tau"], f"{p}.tau") < 1:
            raise ParseError("tau must be >= 1", field=f"{p}.tau")
        _num(s["window"], f"{p}.window", positive=True)
        if s["window_step"] is not None:
            _num(s["window_step"], f"{p}.window_step", positive=True)
        _num(s["refractory"], f"{p}.refractory", nonneg=True)
        if _int(s["report_size_bytes"], f"{p}.report_size_bytes") <= 0:
            raise ParseError("must be > 0", field=f"{p}.report_size_bytes")
        _enum(HazardKind, s["hypothesis"], f"{p}.hypothesis")
    sdcc_ids = {s["id"] for s in sdccs}

    sensors = doc["sensors"] = [
        _fill(s, "sensor", f"sensors[{i}]") for i, s in enumerate(_list(doc["sensors"], "sensors"))
    ]
    _unique(sensors, "sensors", "sensor")
    for i, s in enumerate(sensors):
        p = f"sensors[{i}]"
        if _int(s["id"], f"{p}.id") < 1:
            raise ParseError("sensor ids start at 1", field=f"{p}.id")
        _num(s["x"], f"{p}.x")
        _num(s["y"], f"{p}.y")
        if s["sdcc"] not in sdcc_ids:
            raise ParseError(f"unknown sdcc {s['sdcc']!r}", field=f"{p}.sdcc")
        if s["modality"] not in MODALITIES:
            raise ParseError(f"unknown modality {s['modality']!r}", field=f"{p}.modality")
        _num(s["threshold"], f"{p}.threshold", positive=True)
        _num(s["period"], f"{p}.period", positive=True)
        _num(s["phase"], f"{p}.phase", nonneg=True)
    sensor_ids = {s["id"] for s in sensors}

    maps = doc["maps"] = _fill(doc["maps"], "maps", "maps")
    if _int(maps["count"], "maps.count") < 0:
        raise ParseError("must be >= 0", field="maps.count")
    if maps["template"] is not None:
        tpl = maps["template"] = _fill(maps["template"], "map_template", "maps.template")
        area_ref(tpl["area"], "maps.template.area")
        tpl["route"] = _route(tpl["route"], "maps.template.route")
        _num(tpl["speed"], "maps.template.speed", positive=True)
        _num(tpl["capacity"], "maps.template.capacity", positive=True)
        for key in ("phase", "phase_jitter", "waypoint_jitter"):
            _num(tpl[key], f"maps.template.{key}", nonneg=True)
    elif maps["count"]:
        raise MissingField("maps.template")
    items = maps["items"] = [_fill(m, "map", f"maps.items[{i}]") for i, m in enumerate(_list(maps["items"], "maps.items"))]
    _unique(items, "maps.items", "map")
    for i, m in enumerate(items):
        p = f"maps.items[{i}]"
        _int(m["id"], f"{p}.id")
        area_ref(m["area"], f"{p}.area")
        m["route"] = _route(m["route"], f"{p}.route")
        _num(m["speed"], f"{p}.speed", positive=True)
        _num(m["capacity"], f"{p}.capacity", positive=True)
        _num(m["start_offset"], f"{p}.start_offset", nonneg=True)

    cdcs = doc["cdcs"] = [_fill(c, "cdc", f"cdcs[{i}]") for i, c in enumerate(_list(doc["cdcs"], "cdcs"))]
    _unique(cdcs, "cdcs", "cdc")
    for i, c in enumerate(cdcs):
        p = f"cdcs[{i}]"
        _int(c["id"], f"{p}.id")
        sim = _num(c["similarity_threshold"], f"{p}.similarity_threshold")
        if not 0 < sim <= 1:
            raise ParseError("must be in (0, 1]", field=f"{p}.similarity_threshold")
        c["reference_db"] = _history(c["reference_db"], f"{p}.reference_db")
    cdc_ids = {c["id"] for c in cdcs}

    dpcs = doc["dpcs"] = [_fill(d, "dpc", f"dpcs[{i}]") for i, d in enumerate(_list(doc["dpcs"], "dpcs"))]
    _unique(dpcs, "dpcs", "dpc")
    dpc_ids = {d["id"] for d in dpcs}
    for i, d in enumerate(dpcs):
        p = f"dpcs[{i}]"
        _int(d["id"], f"{p}.id")
        area_ref(d["area"], f"{p}.area")
        _num(d["x"], f"{p}.x")
        _num(d["y"], f"{p}.y")
        ct = _num(d["confidence_threshold"], f"{p}.confidence_threshold")
        if not 0 < ct <= 1:
            raise ParseError("must be in (0, 1]", field=f"{p}.confidence_threshold")
        if _int(d["max_reprocess"], f"{p}.max_reprocess") < 0:
            raise ParseError("must be >= 0", field=f"{p}.max_reprocess")
        _num(d["reprocess_wait"], f"{p}.reprocess_wait", positive=True)
        _num(d["processing_time"], f"{p}.processing_time", nonneg=True)
        for j, peer in enumerate(_list(d["peers"], f"{p}.peers")):
            if peer not in dpc_ids or peer == d["id"]:
                raise ParseError(f"invalid peer {peer!r}", field=f"{p}.peers[{j}]")
        if d["cdc"] is not None and d["cdc"] not in cdc_ids:
            raise ParseError(f"unknown cdc {d['cdc']!r}", field=f"{p}.cdc")
        d["history"] = _history(d["history"], f"{p}.history")

    dcc = doc["dcc"] = _fill(doc["dcc"], "dcc", "dcc")
    _int(dcc["id"], "dcc.id")
    if not isinstance(dcc["subscribers"], dict):
        raise ParseError("expected an object", field="dcc.subscribers")
    for area, m in dcc["subscribers"].items():
        area_ref(area, f"dcc.subscribers.{area}")
        if _int(m, f"dcc.subscribers.{area}") < 0:
            raise ParseError("must be >= 0", field=f"dcc.subscribers.{area}")
    _num(dcc["sms_rate"], "dcc.sms_rate", positive=True)
    _num(dcc["sms_base_latency"], "dcc.sms_base_latency", nonneg=True)
    for j, ch in enumerate(_list(dcc["channels"], "dcc.channels")):
        if ch not in ("sms", "internet_messaging"):
            raise ParseError(f"unknown channel {ch!r}", field=f"dcc.channels[{j}]")

    for key in ("pairs", "colocated"):
        for i, pair in enumerate(_list(doc[key], key)):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ParseError("expected [sdcc_id, dpc_id]", field=f"{key}[{i}]")
            if pair[0] not in sdcc_ids:
                raise ParseError(f"unknown sdcc {pair[0]!r}", field=f"{key}[{i}]")
            if pair[1] not in dpc_ids:
                raise ParseError(f"unknown dpc {pair[1]!r}", field=f"{key}[{i}]")
        if len({tuple(p) for p in doc[key]}) != len(doc[key]):
            raise ParseError("duplicate pair", field=key)

    hz = doc["hazards"] = _fill(doc["hazards"], "hazards", "hazards")
    _num(hz["noise_sigma"], "hazards.noise_sigma", nonneg=True)
    events = hz["events"] = [
        _fill(h, "hazard", f"hazards.events[{i}]") for i, h in enumerate(_list(hz["events"], "hazards.events"))
    ]
    _unique(events, "hazards.events", "hazard")
    for i, h in enumerate(events):
        p = f"hazards.events[{i}]"
        kind = _enum(HazardKind, h["kind"], f"{p}.kind")
        _num(h["x"], f"{p}.x")
        _num(h["y"], f"{p}.y")
        _num(h["radius"], f"{p}.radius", positive=True)
        _num(h["onset"], f"{p}.onset", nonneg=True)
        _num(h["duration"], f"{p}.duration", positive=True)
        _num(h["peak"], f"{p}.peak", nonneg=True)
        if h["severity"] is not None:
            _enum(Severity, h["severity"], f"{p}.severity")
        if h["warnable"] is not None and not isinstance(h["warnable"], bool):
            raise ParseError("expected a boolean", field=f"{p}.warnable")
        if kind is HazardKind.FALSE_SPIKE and h["warnable"]:
            raise ParseError("false_spike events cannot be warnable", field=f"{p}.warnable")

    doc["failures"] = [_fill(f, "failure", f"failures[{i}]") for i, f in enumerate(_list(doc["failures"], "failures"))]
    for i, f in enumerate(doc["failures"]):
        if f["sensor"] not in sensor_ids:
            raise ParseError(f"unknown sensor {f['sensor']!r}", field=f"failures[{i}].sensor")
        _num(f["t"], f"failures[{i}].t", nonneg=True)

    doc["manual_records"] = [
        _fill(m, "manual_record", f"manual_records[{i}]")
        for i, m in enumerate(_list(doc["manual_records"], "manual_records"))
    ]
    for i, m in enumerate(doc["manual_records"]):
        p = f"manual_records[{i}]"
        if m["sdcc"] not in sdcc_ids:
            raise ParseError(f"unknown sdcc {m['sdcc']!r}", field=f"{p}.sdcc")
        _num(m["t"], f"{p}.t", nonneg=True)
        if _int(m["size_bytes"], f"{p}.size_bytes") <= 0:
            raise ParseError("must be > 0", field=f"{p}.size_bytes")
    return doc


def parse_scenario(text: str | bytes | Dict[str, Any]) -> Scenario:
    """Parse a scenario document (JSON text or an already-decoded object)."""
    if isinstance(text, (str, bytes)):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    else:
        raw = copy.deepcopy(text)
    doc = _normalize(raw)
    scenario = Scenario(doc)
    # generated MAP ids must not clash with explicit ones
    ids = [m["id"] for m in scenario.map_specs()]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate map id", field="maps")
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.doc, indent=2, sort_keys=False) + "\n"


# dotted paths into the document, e.g. "maps.count" or "sdccs[0].tau"
_PATH_TOKEN = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def _path_tokens(path: str) -> List[Any]:
    tokens: List[Any] = []
    pos = 0
    for m in _PATH_TOKEN.finditer(path):
        gap = path[pos:m.start()]
        if gap not in ("", "."):
            raise KeyError(path)
        tokens.append(m.group(1) if m.group(1) is not None else int(m.group(2)))
        pos = m.end()
    if not tokens or pos != len(path):
        raise KeyError(path)
    return tokens


def resolve_path(doc: Dict[str, Any], path: str) -> Any:
    node: Any = doc
    for tok in _path_tokens(path):
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise KeyError(path) from None
    return node


def with_value(s: Scenario, path: str, value: Any) -> Scenario:
    """Copy of ``s`` with the value at ``path`` replaced, re-parsed."""
    resolve_path(s.doc, path)
    doc = copy.deepcopy(s.doc)
    tokens = _path_tokens(path)
    node: Any = doc
    for tok in tokens[:-1]:
        node = node[tok]
    node[tokens[-1]] = value
    return parse_scenario(doc)


def validate_scenario(s: Scenario) -> List[Violation]:
    """All violated load-time conditions; an empty list means runnable."""
    doc = s.doc
    out: List[Violation] = []

    per_sdcc: Dict[int, int] = {sd["id"]: 0 for sd in doc["sdccs"]}
    for sensor in doc["sensors"]:
        per_sdcc[sensor["sdcc"]] += 1
    for sd in doc["sdccs"]:
        n = per_sdcc[sd["id"]]
        if n == 0:
            out.append(Violation("structure", f"sdcc {sd['id']}: no sensors deployed", sd["area"]))
        elif sd["tau"] > n:
            out.append(
                Violation("tau", f"sdcc {sd['id']}: tau={sd['tau']} exceeds deployed sensors N={n} (tau <= N)", sd["area"])
            )

    ferry = s.ferry_pairs()
    sdcc_area = {sd["id"]: sd["area"] for sd in doc["sdccs"]}
    dpc_area = {d["id"]: d["area"] for d in doc["dpcs"]}
    needs: Dict[str, bool] = {}
    for (r, t), f in ferry.items():
        for area in (sdcc_area[r], dpc_area[t]):
            needs[area] = needs.get(area, False) or f
    counts: Dict[str, List[int]] = {a["id"]: [0, 0, 0] for a in doc["areas"]}
    for m in s.map_specs():
        counts[m["area"]][0] += 1
    for sd in doc["sdccs"]:
        counts[sd["area"]][1] += 1
    for d in doc["dpcs"]:
        counts[d["area"]][2] += 1
    active = {a: tuple(c) for a, c in counts.items() if c[1] or c[2]}
    # areas whose pairs are all in direct range have nothing to ferry
    out.extend(validate_fleet(active, {a: needs.get(a, False) for a in active}))

    out.extend(validate_cdc_count(len(doc["dpcs"]), len(doc["cdcs"]), doc["params"]["dominance_factor"]))

    paired = {r for r, _ in doc["pairs"]}
    for sd in doc["sdccs"]:
        if sd["id"] not in paired:
            out.append(Violation("pairs", f"sdcc {sd['id']}: not assigned to any DPC", sd["area"]))
    for area in sorted({sd["area"] for sd in doc["sdccs"]}):
        if area not in doc["dcc"]["subscribers"]:
            out.append(Violation("structure", f"area {area}: no subscriber entry at the DCC", area))

    region = doc["region"]
    if region is not None:
        def inside(x, y):
            return region["xmin"] <= x <= region["xmax"] and region["ymin"] <= y <= region["ymax"]

        for cls in ("sensors", "sdccs", "dpcs"):
            for e in doc[cls]:
                if not inside(e["x"], e["y"]):
                    out.append(Violation("region", f"{cls[:-1]} {e['id']} at ({e['x']}, {e['y']}) outside region"))
        for m in s.map_specs():
            for x, y in m["route"]:
                if not inside(x, y):
                    out.append(Violation("region", f"map {m['id']} waypoint ({x}, {y}) outside region"))
                    break
    return out
