"""Scenario generators: the reference layouts used by the tests and the CLI.

Every generator returns a raw document (a plain dict) ready for
``parse_scenario``; nothing here runs a simulation.
"""

from __future__ import annotations

import copy
from typing import Any, Dict, List, Optional

from dmcis.engine import Rng, derive_seed
from dmcis.scenario import SCHEMA

Doc = Dict[str, Any]


def _base(name: str, duration: float, delta: float, seed: int = 0) -> Doc:
    return {
        "schema": SCHEMA,
        "name": name,
        "seed": seed,
        "duration": duration,
        "delta": delta,
        "areas": [],
        "sensors": [],
        "sdccs": [],
        "dpcs": [],
        "cdcs": [{"id": 1}],
        "dcc": {"subscribers": {}},
        "pairs": [],
    }


def _reserve_dpcs(doc: Doc, n: int, area: str, x0: float, y0: float, spacing: float = 2000.0) -> None:
    """Append ``n`` unpaired DPCs in their own area, far from everything else."""
    if area not in {a["id"] for a in doc["areas"]}:
        doc["areas"].append({"id": area})
    start = max((d["id"] for d in doc["dpcs"]), default=0) + 1
    for i in range(n):
        doc["dpcs"].append({"id": start + i, "area": area, "x": x0 + i * spacing, "y": y0})


def riverbank(
    tau: int = 10,
    flood_radius: float = 500.0,
    failures: Optional[List[Dict[str, float]]] = None,
    noise_sigma: float = 0.0,
    patrol: bool = False,
    seed: int = 0,
) -> Doc:
    """Twenty water-level sensors along a river with a ship-wake spike and a flood.

    Sensors sit at x = 0, 50, ..., 950 on y = 0. The spike (t 200-320)
    reaches the 4 sensors nearest x = 125; the flood (t 1000-2800) centred at
    x = 475 reaches 18 sensors with the default radius and all 20 from 528 m.
    The SDCC's DPC is inside delta, so reports use the direct link.
    ``patrol`` adds one MAP circling the site that never has to carry anything.
    """
    doc = _base("riverbank", 3600.0, 1000.0, seed)
    doc["region"] = {"xmin": -500.0, "ymin": -500.0, "xmax": 9000.0, "ymax": 2500.0}
    doc["areas"] = [{"id": "river", "radio": "b"}]
    doc["sensors"] = [
        {"id": i + 1, "x": 50.0 * i, "y": 0.0, "sdcc": 1, "modality": "visual", "threshold": 1.0}
        for i in range(20)
    ]
    doc["sdccs"] = [{"id": 1, "area": "river", "x": 475.0, "y": 100.0, "tau": tau, "hypothesis": "flood"}]
    doc["dpcs"] = [{"id": 1, "area": "river", "x": 475.0, "y": 600.0}]
    _reserve_dpcs(doc, 4, "upland", 1000.0, 2000.0)
    doc["pairs"] = [[1, 1]]
    doc["cdcs"] = [
        {"id": 1, "reference_db": [{"area": "river", "kind": "flood", "intensity": 9.0, "year_tag": 2019}]}
    ]
    doc["dcc"] = {"subscribers": {"river": 5000}}
    doc["hazards"] = {
        "noise_sigma": noise_sigma,
        "events": [
            {"id": "wake", "kind": "false_spike", "x": 125.0, "y": 0.0, "radius": 100.0,
             "onset": 200.0, "duration": 120.0, "peak": 8.0},
            {"id": "flood", "kind": "flood", "x": 475.0, "y": 0.0, "radius": flood_radius,
             "onset": 1000.0, "duration": 1800.0, "peak": 10.0},
        ],
    }
    if failures:
        doc["failures"] = [dict(f) for f in failures]
    if patrol:
        doc["maps"] = {"items": [
            {"id": 1, "area": "river", "route": [[0.0, 200.0], [950.0, 200.0], [475.0, 700.0]], "speed": 10.0}
        ]}
    return doc


def benchmark_ferry(count: int = 2, seed: int = 0, phase_jitter: float = 1.0) -> Doc:
    """One coastal SDCC ferried to a DPC 4 km away by ``count`` shuttling MAPs.

    A flood hits the sensor field every 600 s. MAPs run out and back on the
    SDCC-DPC line, evenly spaced, with a seeded common phase shift.
    """
    doc = _base("benchmark-ferry", 7200.0, 1000.0, seed)
    doc["areas"] = [{"id": "delta", "radio": "g"}]
    sensors = []
    for i in range(16):
        sensors.append({"id": i + 1, "x": -150.0 + 100.0 * (i % 4), "y": -150.0 + 100.0 * (i // 4), "sdcc": 1})
    doc["sensors"] = sensors
    doc["sdccs"] = [{"id": 1, "area": "delta", "x": 0.0, "y": 0.0, "tau": 8}]
    doc["dpcs"] = [{"id": 1, "area": "delta", "x": 4000.0, "y": 0.0}]
    _reserve_dpcs(doc, 4, "inland", 0.0, 6000.0)
    doc["pairs"] = [[1, 1]]
    doc["maps"] = {
        "count": count,
        "template": {"area": "delta", "route": [[0.0, 0.0], [4000.0, 0.0]], "speed": 20.0,
                     "phase_jitter": phase_jitter},
    }
    doc["cdcs"] = [{"id": 1, "reference_db": [{"area": "delta", "kind": "flood", "intensity": 8.0}]}]
    doc["dcc"] = {"subscribers": {"delta": 20000}}
    doc["hazards"] = {"events": [
        {"id": f"surge{n + 1}", "kind": "flood", "x": 0.0, "y": 0.0, "radius": 600.0,
         "onset": 100.0 + 600.0 * n, "duration": 200.0, "peak": 9.0}
        for n in range(11)
    ]}
    return doc


def rate_probe(radio: str = "b", contact_tick: float = 1.0, size_bytes: int = 1_000_000) -> Doc:
    """A MAP parked next to one SDCC; every report crosses a single contact."""
    doc = _base(f"rate-{radio}", 1500.0, 1000.0)
    doc["areas"] = [{"id": "site", "radio": radio}]
    doc["params"] = {"contact_tick": contact_tick}
    doc["sensors"] = [{"id": i + 1, "x": 20.0 * i, "y": 30.0, "sdcc": 1} for i in range(6)]
    doc["sdccs"] = [{"id": 1, "area": "site", "x": 0.0, "y": 0.0, "tau": 3, "report_size_bytes": size_bytes}]
    doc["dpcs"] = [{"id": 1, "area": "site", "x": 5000.0, "y": 0.0}]
    _reserve_dpcs(doc, 4, "reserve", 0.0, 8000.0)
    doc["pairs"] = [[1, 1]]
    doc["maps"] = {"items": [{"id": 1, "area": "site", "route": [[10.0, 0.0], [10.0, 0.0]], "speed": 1.0}]}
    doc["dcc"] = {"subscribers": {"site": 100}}
    doc["hazards"] = {"events": [
        {"id": "f1", "kind": "flood", "x": 50.0, "y": 30.0, "radius": 400.0, "onset": 30.0,
         "duration": 1200.0, "peak": 6.0},
    ]}
    return doc


def channel_cap(sdcc_maps: int = 4, dpc_maps: int = 13) -> Doc:
    """MAPs parked at an 802.11b SDCC and at an 802.11a DPC to load channels."""
    doc = _base("channel-cap", 600.0, 1000.0)
    doc["areas"] = [{"id": "north", "radio": "b"}, {"id": "south", "radio": "a"}]
    doc["sensors"] = [{"id": i + 1, "x": 20.0 * i, "y": 40.0, "sdcc": 1} for i in range(5)]
    doc["sdccs"] = [{"id": 1, "area": "north", "x": 0.0, "y": 0.0, "tau": 2}]
    doc["dpcs"] = [{"id": 1, "area": "south", "x": 10000.0, "y": 0.0}] + [
        {"id": 2 + i, "area": "south", "x": 12000.0 + 2000.0 * i, "y": 0.0} for i in range(4)
    ]
    doc["pairs"] = [[1, 1]]
    items = []
    for i in range(sdcc_maps):
        p = [5.0 * (i + 1), 0.0]
        items.append({"id": i + 1, "area": "north", "route": [p, p]})
    for i in range(dpc_maps):
        p = [10000.0 + 5.0 * (i + 1), 0.0]
        items.append({"id": sdcc_maps + i + 1, "area": "south", "route": [p, p]})
    doc["maps"] = {"items": items}
    doc["dcc"] = {"subscribers": {"north": 100}}
    doc["hazards"] = {"events": [
        {"id": "f1", "kind": "flood", "x": 40.0, "y": 40.0, "radius": 300.0, "onset": 10.0,
         "duration": 500.0, "peak": 6.0},
    ]}
    return doc


def quake(latency_scale: float = 1.0, ferried: bool = True) -> Doc:
    """An earthquake (always emergency) whose reports trigger the bypass.

    ``latency_scale`` multiplies the DPC->CDC, CDC->DCC and SMS base latencies.
    """
    doc = _base("quake", 1200.0, 1000.0)
    doc["areas"] = [{"id": "valley", "radio": "g"}]
    doc["params"] = {
        "dpc_to_cdc_latency": 2.0 * latency_scale,
        "cdc_to_dcc_latency": 1.0 * latency_scale,
    }
    doc["sensors"] = [
        {"id": i + 1, "x": 60.0 * (i % 5), "y": 60.0 * (i // 5), "sdcc": 1, "modality": "seismic"}
        for i in range(10)
    ]
    doc["sdccs"] = [{"id": 1, "area": "valley", "x": 120.0, "y": 30.0, "tau": 4, "hypothesis": "earthquake"}]
    if ferried:
        doc["dpcs"] = [{"id": 1, "area": "valley", "x": 2500.0, "y": 30.0}]
        doc["maps"] = {"count": 2, "template": {"area": "valley", "route": [[120.0, 30.0], [2500.0, 30.0]],
                                                 "speed": 15.0}}
    else:
        doc["dpcs"] = [{"id": 1, "area": "valley", "x": 400.0, "y": 30.0}]
    _reserve_dpcs(doc, 4, "reserve", 0.0, 5000.0)
    doc["pairs"] = [[1, 1]]
    doc["cdcs"] = [{"id": 1, "reference_db": [{"area": "valley", "kind": "earthquake", "intensity": 7.0}]}]
    doc["dcc"] = {"subscribers": {"valley": 3000}, "sms_base_latency": 1.0 * latency_scale}
    doc["hazards"] = {"events": [
        {"id": "q1", "kind": "earthquake", "x": 120.0, "y": 60.0, "radius": 800.0, "onset": 100.0,
         "duration": 400.0, "peak": 7.5},
    ]}
    return doc


def validation_base() -> Doc:
    """A valid two-SDCC ferry layout; the starting point for the invalid variants."""
    doc = _base("validation-base", 600.0, 1000.0)
    doc["areas"] = [{"id": "coast"}]
    doc["sensors"] = [{"id": i + 1, "x": 30.0 * i, "y": 0.0, "sdcc": 1 + i // 5} for i in range(10)]
    doc["sdccs"] = [
        {"id": 1, "area": "coast", "x": 60.0, "y": 50.0, "tau": 3},
        {"id": 2, "area": "coast", "x": 210.0, "y": 50.0, "tau": 3},
    ]
    doc["dpcs"] = [{"id": 1, "area": "coast", "x": 3000.0, "y": 50.0}]
    _reserve_dpcs(doc, 4, "inland", 0.0, 6000.0)
    doc["pairs"] = [[1, 1], [2, 1]]
    doc["maps"] = {"count": 2, "template": {"area": "coast", "route": [[60.0, 50.0], [210.0, 50.0], [3000.0, 50.0]]}}
    doc["dcc"] = {"subscribers": {"coast": 1000}}
    return doc


def invalid_tau() -> Doc:
    doc = validation_base()
    doc["sdccs"][0]["tau"] = 6  # 5 sensors deployed
    return doc


def invalid_fleet() -> Doc:
    doc = validation_base()
    doc["maps"]["count"] = 1  # two SDCCs to ferry
    return doc


def invalid_cdc_ratio() -> Doc:
    doc = validation_base()
    doc["dpcs"] = doc["dpcs"][:4]  # 4 DPCs against 1 CDC at factor 4
    return doc


_KINDS = ("flood", "tsunami", "earthquake", "cyclone", "landslide", "false_spike")


def random_scenario(seed: int) -> Doc:
    """A small randomized world for conservation checks.

    Tight MAP capacities, mixed report sizes, failures, manual records and a
    mix of direct and ferried SDCCs are all drawn from ``seed``.
    """
    rng = Rng(derive_seed(seed, "random-scenario"))

    def uni(a, b):
        return a + (b - a) * rng.uniform()

    def pick(n):
        return int(rng.uniform() * n)

    doc = _base(f"random-{seed}", round(uni(900.0, 1500.0)), 1000.0, seed)
    doc["areas"] = [{"id": "a1", "radio": "bga"[pick(3)]}, {"id": "a2", "radio": "bga"[pick(3)]}]
    doc["params"] = {"contact_tick": (0.5, 1.0, 2.0)[pick(3)], "k_per_cluster": 2 + pick(6)}
    n_sdcc = 1 + pick(3)
    sensors, sdccs = [], []
    sid = 1
    for r in range(1, n_sdcc + 1):
        area = "a1" if r % 2 else "a2"
        cx, cy = 3000.0 * (r - 1), 0.0
        n = 4 + pick(10)
        for _ in range(n):
            sensors.append({"id": sid, "x": round(cx + uni(-200, 200), 3), "y": round(cy + uni(-200, 200), 3),
                            "sdcc": r, "modality": ("acoustic", "seismic", "visual")[pick(3)],
                            "period": (5.0, 10.0)[pick(2)], "phase": float(pick(3))})
            sid += 1
        sdccs.append({"id": r, "area": area, "x": cx, "y": cy, "tau": 1 + pick(min(n, 5)),
                      "window": (30.0, 60.0)[pick(2)], "refractory": (60.0, 120.0)[pick(2)],
                      "report_size_bytes": int(uni(2e5, 3e6)),
                      "hypothesis": ("flood", "earthquake", "tsunami")[pick(3)]})
    doc["sensors"], doc["sdccs"] = sensors, sdccs

    dpcs, pairs = [], []
    for r in range(1, n_sdcc + 1):
        sd = sdccs[r - 1]
        direct = rng.uniform() < 0.3
        off = 400.0 if direct else 2500.0
        dpcs.append({"id": r, "area": sd["area"], "x": sd["x"], "y": sd["y"] + off,
                     "confidence_threshold": round(uni(0.5, 1.0), 3), "max_reprocess": pick(3),
                     "reprocess_wait": 20.0})
        pairs.append([r, r])
    n_dpc = len(dpcs)
    for i in range(5):
        dpcs.append({"id": n_dpc + i + 1, "area": "a1", "x": 50000.0 + 3000.0 * i, "y": 50000.0})
    for d in dpcs[:n_dpc]:
        d["peers"] = [p["id"] for p in dpcs[:n_dpc] if p["id"] != d["id"]]
    doc["dpcs"], doc["pairs"] = dpcs, pairs

    items = []
    for r in range(1, n_sdcc + 1):
        sd, dp = sdccs[r - 1], dpcs[r - 1]
        for _ in range(1 + pick(2)):
            items.append({"id": len(items) + 1, "area": sd["area"],
                          "route": [[sd["x"], sd["y"]], [dp["x"], dp["y"]]],
                          "speed": round(uni(10.0, 30.0), 3), "capacity": int(uni(1e6, 6e6)),
                          "start_offset": round(uni(0, 2000.0), 3)})
    doc["maps"] = {"items": items}
    doc["cdcs"] = [{"id": 1, "reference_db": [
        {"area": a, "kind": k, "intensity": round(uni(3.0, 12.0), 3)} for a in ("a1", "a2") for k in _KINDS[:5]
    ]}]
    doc["dcc"] = {"subscribers": {"a1": 1000 + pick(9000), "a2": 1000 + pick(9000)},
                  "channels": ["sms", "internet_messaging"] if pick(2) else ["sms"]}

    events = []
    for e in range(2 + pick(4)):
        sd = sdccs[pick(n_sdcc)]
        kind = _KINDS[pick(len(_KINDS))]
        events.append({"id": f"h{e + 1}", "kind": kind, "x": sd["x"] + uni(-100, 100), "y": sd["y"] + uni(-100, 100),
                       "radius": uni(150.0, 500.0), "onset": round(uni(0.0, doc["duration"] * 0.7), 3),
                       "duration": round(uni(60.0, 400.0), 3), "peak": round(uni(2.0, 12.0), 3)})
    doc["hazards"] = {"noise_sigma": (0.0, 0.3, 1.0)[pick(3)], "events": events}
    doc["failures"] = [{"sensor": 1 + pick(len(sensors)), "t": round(uni(0, doc["duration"]), 3)}
                       for _ in range(pick(4))]
    doc["manual_records"] = [{"sdcc": 1 + pick(n_sdcc), "t": round(uni(0, doc["duration"]), 3),
                              "size_bytes": int(uni(1e3, 5e5)), "note": "field log"} for _ in range(pick(3))]
    return doc


GENERATORS = {
    "riverbank": riverbank,
    "benchmark-ferry": benchmark_ferry,
    "rate-probe": rate_probe,
    "channel-cap": channel_cap,
    "quake": quake,
    "validation-base": validation_base,
    "invalid-tau": invalid_tau,
    "invalid-fleet": invalid_fleet,
    "invalid-cdc-ratio": invalid_cdc_ratio,
    "random": random_scenario,
}


def generate(name: str, **kwargs) -> Doc:
    if name not in GENERATORS:
        raise KeyError(f"unknown generator {name!r}; choose from {', '.join(sorted(GENERATORS))}")
    return copy.deepcopy(GENERATORS[name](**kwargs))
