"""The simulation: wires the four levels onto the event scheduler."""

from __future__ import annotations

import logging
from array import array
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Dict, List, Optional, Set, Tuple

from dmcis import kernels
from dmcis.core import Payload, Report, ReportKind, Severity, distance
from dmcis.engine import Rng, ScheduledEvent, Scheduler, derive_seed
from dmcis.level_four import Decision, WarningDecision, bypass, cdc_decide, dissemination_schedule
from dmcis.level_one import Cluster, Detection, form_clusters, reelect_head, sdcc_aggregate, sdcc_insert_manual
from dmcis.level_three import Disposition, dpc_forward, dpc_process, find_held, merge_reports, peer_receive, peer_sync
from dmcis.level_two import (
    Contact,
    ContactTable,
    Station,
    abort_transfer,
    check_contacts,
    map_position,
    transfer_time,
)
from dmcis.scenario import Scenario
from dmcis.trace import TraceWriter

log = logging.getLogger(__name__)

DROP_TOO_LARGE = "destination_full"


@dataclass
class DirectLink:
    sdcc: int
    dpc: int
    rate: float  # effective Mbps
    active: Optional[str] = None
    token: int = 0


@dataclass
class RunSummary:
    emitted: int
    delivered: int
    buffered: int
    dropped: int
    fired: int
    pending: int
    scheduled: int


class Simulation:
    """One run of a scenario. Strictly sequential; build a new instance per run."""

    def __init__(
        self,
        scenario: Scenario,
        seed: Optional[int] = None,
        trace_sink: Optional[IO[str]] = None,
        keep_trace: bool = True,
    ):
        self.scenario = scenario
        self.seed = scenario.doc["seed"] if seed is None else seed
        p = scenario.params
        self.p = p
        self.field = scenario.hazard_field()
        self.cuts = scenario.severity_cuts()
        self.sched = Scheduler()
        self.trace = TraceWriter(trace_sink, keep=keep_trace)

        sensors = scenario.build_sensors()
        sdccs = scenario.build_sdccs()
        self.sensors = {s.id: s for s in sensors}
        self.sdccs = {s.id: s for s in sdccs}
        self.clusters: Dict[str, Cluster] = {
            c.id: c for c in form_clusters(sensors, sdccs, p["k_per_cluster"], p["hop_delay"])
        }
        self.maps = {m.id: m for m in scenario.build_maps(self.seed)}
        self.map_list = [self.maps[i] for i in sorted(self.maps)]
        self.dpcs = {d.id: d for d in scenario.build_dpcs()}
        self.cdcs = {f"cdc:{c.id}": c for c in scenario.build_cdcs()}
        self.dcc = scenario.build_dcc()
        self.rngs = {sid: Rng(derive_seed(self.seed, f"sensor:{sid}")) for sid in sorted(self.sensors)}

        self.stations: List[Station] = []
        for s in sorted(sdccs, key=lambda s: s.id):
            self.stations.append(Station(s.actor, s.position, scenario.radio(s.area), (0, s.id)))
        for d in sorted(self.dpcs.values(), key=lambda d: d.id):
            self.stations.append(Station(d.actor, d.position, scenario.radio(d.area), (1, d.id)))
        self.station_by_actor = {s.actor: s for s in self.stations}
        self.contacts = ContactTable()

        # routing: an SDCC with any direct-range DPC never uses MAPs
        self.direct: Dict[int, DirectLink] = {}
        self.ferry_dests: Dict[int, Set[int]] = defaultdict(set)
        direct_candidates: Dict[int, List[int]] = defaultdict(list)
        for (r, t), ferry in sorted(scenario.ferry_pairs().items()):
            if ferry:
                self.ferry_dests[r].add(t)
            else:
                direct_candidates[r].append(t)
        for r, ts in direct_candidates.items():
            rate = scenario.radio(self.sdccs[r].area).effective_rate
            self.direct[r] = DirectLink(r, min(ts), rate)
        self.max_map_capacity = max((m.capacity for m in self.map_list), default=0)

        self.reports: Dict[str, Report] = {}
        self.emitted: List[str] = []
        self.delivered: Set[str] = set()
        self.dropped: Set[str] = set()
        self.inflight: Set[str] = set()
        self.called: Set[str] = set()
        self.manual_count: Dict[int, int] = defaultdict(int)
        self._pending_decisions: Dict[int, WarningDecision] = {}
        self._decision_seq = 0

        area_sensors: Dict[str, List[int]] = defaultdict(list)
        for s in sensors:
            area_sensors[self.sdccs[s.home_sdcc].area].append(s.id)
        self.area_sensors = area_sensors
        self.area_modalities = {
            a: len({self.sensors[i].modality for i in ids}) for a, ids in area_sensors.items()
        }

        h = self.sched.handlers
        h["sensor_sample"] = self._on_sample
        h["sdcc_window_close"] = self._on_window_close
        h["contact_check_tick"] = self._on_contact_tick
        h["transfer_complete"] = self._on_transfer_complete
        h["dpc_process_complete"] = self._on_dpc_process
        h["dpc_reprocess_deadline"] = self._on_dpc_deadline
        h["peer_summary"] = self._on_peer_summary
        h["cdc_decision"] = self._on_cdc_decision
        h["dcc_receive"] = self._on_dcc_receive
        h["dcc_dissemination_complete"] = self._on_dissemination_complete
        h["emergency_call"] = self._on_emergency_call
        h["sensor_failure"] = self._on_sensor_failure
        h["manual_insert"] = self._on_manual_insert
        self._bootstrap()

    # setup -------------------------------------------------------------

    def _bootstrap(self) -> None:
        doc = self.scenario.doc
        for f in sorted(doc["failures"], key=lambda f: (f["t"], f["sensor"])):
            self.sched.at(f["t"], "sensor_failure", sensor=f["sensor"])
        for i, m in enumerate(doc["manual_records"]):
            self.sched.at(m["t"], "manual_insert", index=i)

        groups: Dict[Tuple[int, float, float], List[int]] = defaultdict(list)
        for sid in sorted(self.sensors):
            s = self.sensors[sid]
            groups[(s.home_sdcc, s.sample_period, s.phase)].append(sid)
        for key in sorted(groups):
            _, period, phase = key
            self.sched.at(phase, "sensor_sample", group=groups[key], period=period, phase=phase, n=0)

        for sid in sorted(self.sdccs):
            step = self.sdccs[sid].window_step
            self.sched.at(step, "sdcc_window_close", sdcc=sid, n=1)

        if self.map_list:
            self.sched.at(0.0, "contact_check_tick", n=0)

    # helpers -------------------------------------------------------------

    def _alive(self, sid: int) -> bool:
        return self.sensors[sid].alive

    def _bypass(self, origin: str, report: Report, now: float) -> None:
        if report.severity is not Severity.EMERGENCY or report.id in self.called:
            return
        self.called.add(report.id)
        at = bypass(origin, report, now, self.p["emergency_latency"])
        self.sched.at(at, "emergency_call", origin=origin, report=report.id, raised=now)

    # level one -------------------------------------------------------------

    def _on_sample(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        prm = ev.params
        ids = [sid for sid in prm["group"] if self.sensors[sid].alive]
        sigma = self.field.background_noise_sigma
        active = self.field.active(now)
        if ids and (active or sigma > 0):
            sensors = [self.sensors[sid] for sid in ids]
            values, dominant = kernels.field_intensities(
                array("d", [s.position.x for s in sensors]),
                array("d", [s.position.y for s in sensors]),
                array("d", [e.epicenter.x for e in active]),
                array("d", [e.epicenter.y for e in active]),
                array("d", [e.radius for e in active]),
                array("d", [e.peak_intensity for e in active]),
            )
            hop = self.p["hop_delay"]
            for i, s in enumerate(sensors):
                v = values[i]
                if sigma > 0:
                    v += sigma * self.rngs[s.id].normal()
                if v < 0.0:
                    v = 0.0
                if v < s.detect_threshold:
                    continue
                source = active[dominant[i]].id if dominant[i] >= 0 else None
                det = Detection(
                    sensor=s.id,
                    at=now + 2.0 * hop,
                    value=v,
                    modality=s.modality,
                    sampled_at=now,
                    source=source,
                    position=s.position,
                )
                self.sdccs[s.home_sdcc].detection_buffer.append(det)
                self.trace(now, "detection", f"sensor:{s.id}", None, sdcc=s.home_sdcc, value=v, source=source,
                           arrives=det.at)
        n = prm["n"] + 1
        nxt = prm["phase"] + n * prm["period"]
        self.sched.at(nxt, "sensor_sample", group=prm["group"], period=prm["period"], phase=prm["phase"], n=n)

    def _on_window_close(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        sdcc = self.sdccs[ev.params["sdcc"]]
        report = sdcc_aggregate(sdcc, now, self._alive, self.cuts)
        if report is not None:
            self._emit(sdcc.id, report, now, tau=sdcc.tau)
        n = ev.params["n"] + 1
        self.sched.at(n * sdcc.window_step, "sdcc_window_close", sdcc=sdcc.id, n=n)

    def _emit(self, sdcc_id: int, report: Report, now: float, queued: bool = False, **extra) -> None:
        sdcc = self.sdccs[sdcc_id]
        self.reports[report.id] = report
        self.emitted.append(report.id)
        direct = sdcc_id in self.direct
        pl = report.payload
        self.trace(
            now, "report_emitted", sdcc.actor, report.id,
            kind=report.kind.value, area=report.origin_area, k=pl.k, severity=report.severity.value,
            size_bytes=report.size_bytes, sources=sorted(pl.sources), intensity=pl.intensity,
            hypothesis=pl.hypothesis.value if pl.hypothesis else None,
            route="direct" if direct else "ferry", **extra,
        )
        if not direct and report.size_bytes > self.max_map_capacity and self.map_list:
            if queued:
                sdcc.outbox.remove(report)
            self.dropped.add(report.id)
            self.trace(now, "report_dropped", sdcc.actor, report.id, reason=DROP_TOO_LARGE,
                       size_bytes=report.size_bytes, capacity=self.max_map_capacity)
            return
        if not queued:
            sdcc.outbox.append(report)
        if direct:
            self._pump_direct(sdcc_id, now)
        else:
            for c in self.contacts.by_station(sdcc.actor):
                self._pump(c, now)

    def _on_manual_insert(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        spec = self.scenario.doc["manual_records"][ev.params["index"]]
        sdcc = self.sdccs[spec["sdcc"]]
        self.manual_count[sdcc.id] += 1
        record = Report(
            id=f"sdcc{sdcc.id}-m{self.manual_count[sdcc.id]}",
            kind=ReportKind.MANUAL_RECORD,
            origin_area=sdcc.area,
            created_at=now,
            size_bytes=spec["size_bytes"],
            payload=Payload(note=spec["note"]),
            origin=sdcc.actor,
        )
        record.hop(sdcc.actor, now)
        sdcc_insert_manual(sdcc, record)
        self._emit(sdcc.id, record, now, queued=True)

    def _on_sensor_failure(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        sensor = self.sensors[ev.params["sensor"]]
        if not sensor.alive:
            return
        sensor.alive = False
        detail = {"cluster": sensor.cluster}
        cluster = self.clusters.get(sensor.cluster) if sensor.cluster else None
        if cluster is not None:
            updated = reelect_head(cluster, sensor.id)
            if updated is None:
                del self.clusters[cluster.id]
                detail["dissolved"] = True
            else:
                self.clusters[cluster.id] = updated
                detail["head"] = updated.head
        self.trace(now, "sensor_failure", f"sensor:{sensor.id}", None, **detail)

    # level two -------------------------------------------------------------

    def _on_contact_tick(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        positions = [map_position(m, now) for m in self.map_list]
        pos_by_id = {m.id: positions[i] for i, m in enumerate(self.map_list)}
        transitions = check_contacts(self.map_list, self.stations, self.contacts, now, positions)
        for what, c in transitions:
            st = self.station_by_actor[c.station]
            rng = min(self.maps[c.map_id].radio.range, st.radio.range)
            d = distance(pos_by_id[c.map_id], st.position)
            if what == "close":
                aborted = self._abort(c)
                self.trace(now, "contact_close", f"map:{c.map_id}", aborted, station=c.station, distance=d,
                           range=rng, reason="out_of_range")
            else:
                self.trace(now, "contact_open", f"map:{c.map_id}", None, station=c.station, distance=d,
                           range=rng, rate=c.rate)
        for c in sorted(self.contacts.open.values(), key=lambda c: (c.map_id, self.station_by_actor[c.station].order)):
            self._pump(c, now)
        n = ev.params["n"] + 1
        self.sched.at(n * self.p["contact_tick"], "contact_check_tick", n=n)

    def _abort(self, c: Contact) -> Optional[str]:
        rid = c.active_transfer
        if rid is None:
            return None
        abort_transfer(c)
        self.inflight.discard(rid)
        if c.station.startswith("sdcc:"):
            self.maps[c.map_id].buffer.reserved -= self.reports[rid].size_bytes
        return rid

    def _pump(self, c: Contact, now: float) -> None:
        """Start the next transfer on an idle contact, if anything is eligible."""
        if c.active_transfer is not None:
            return
        m = self.maps[c.map_id]
        kind, _, num = c.station.partition(":")
        report = None
        if kind == "sdcc":
            sid = int(num)
            if sid in self.direct:
                return
            for r in self.sdccs[sid].outbox:
                if r.id in self.inflight or r.size_bytes > m.buffer.capacity:
                    continue
                if r.size_bytes <= m.buffer.free:
                    report = r
                break
            if report is None:
                return
            m.buffer.reserved += report.size_bytes
        else:
            did = int(num)
            for r in m.buffer:
                if r.id not in self.inflight and did in self._destinations(r):
                    report = r
                    break
            if report is None:
                return
        c.active_transfer = report.id
        c.started_at = now
        c.progress = 0.0
        c.token += 1
        self.inflight.add(report.id)
        self.sched.at(now + transfer_time(report.size_bytes, c.rate), "transfer_complete",
                      map=c.map_id, station=c.station, report=report.id, token=c.token)

    def _destinations(self, r: Report) -> Set[int]:
        origin = int(r.origin.partition(":")[2])
        return self.ferry_dests.get(origin, set())

    def _pump_direct(self, sdcc_id: int, now: float) -> None:
        link = self.direct[sdcc_id]
        if link.active is not None:
            return
        outbox = self.sdccs[sdcc_id].outbox
        if not len(outbox):
            return
        report = outbox.reports[0]
        link.active = report.id
        link.token += 1
        self.inflight.add(report.id)
        self.sched.at(now + transfer_time(report.size_bytes, link.rate), "transfer_complete",
                      direct=sdcc_id, report=report.id, token=link.token, started=now)

    def _on_transfer_complete(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        prm = ev.params
        report = self.reports[prm["report"]]
        if "direct" in prm:
            link = self.direct[prm["direct"]]
            if link.token != prm["token"] or link.active != report.id:
                return
            sdcc = self.sdccs[link.sdcc]
            sdcc.outbox.remove(report)
            link.active = None
            self.inflight.discard(report.id)
            dpc = self.dpcs[link.dpc]
            self.trace(now, "transfer_complete", sdcc.actor, report.id, to=dpc.actor, bytes=report.size_bytes,
                       started=prm["started"], duration=now - prm["started"], rate=link.rate, link="direct")
            self._deliver(dpc.id, report, now)
            self._pump_direct(link.sdcc, now)
            return

        c = self.contacts.open.get((prm["map"], prm["station"]))
        if c is None or c.token != prm["token"] or c.active_transfer != report.id:
            return
        m = self.maps[c.map_id]
        st = self.station_by_actor[c.station]
        rng = min(m.radio.range, st.radio.range)
        d = distance(map_position(m, now), st.position)
        if d > rng:
            # left range between ticks: the contact ends here and the report restarts later
            aborted = self._abort(c)
            self.contacts.close(c)
            self.trace(now, "contact_close", m.actor, aborted, station=c.station, distance=d, range=rng,
                       reason="out_of_range")
            return
        started = c.started_at
        c.active_transfer = None
        self.inflight.discard(report.id)
        if c.station.startswith("sdcc:"):
            sdcc = self.sdccs[int(c.station.partition(":")[2])]
            sdcc.outbox.remove(report)
            m.buffer.reserved -= report.size_bytes
            m.buffer.append(report)
            report.hop(m.actor, now)
            self.trace(now, "transfer_complete", sdcc.actor, report.id, to=m.actor, bytes=report.size_bytes,
                       started=started, duration=now - started, rate=c.rate, link="contact")
            self._bypass(m.actor, report, now)
            self._pump(c, now)
        else:
            dpc = self.dpcs[int(c.station.partition(":")[2])]
            m.buffer.remove(report)
            self.trace(now, "transfer_complete", m.actor, report.id, to=dpc.actor, bytes=report.size_bytes,
                       started=started, duration=now - started, rate=c.rate, link="contact")
            self._deliver(dpc.id, report, now)
            # freed MAP space may unblock pickups
            for other in self.contacts.by_map(m.id):
                self._pump(other, now)

    # level three -------------------------------------------------------------

    def _deliver(self, dpc_id: int, report: Report, now: float) -> None:
        dpc = self.dpcs[dpc_id]
        self.delivered.add(report.id)
        report.hop(dpc.actor, now)
        self._bypass(dpc.actor, report, now)
        if report.kind is ReportKind.MANUAL_RECORD:
            self._forward(dpc.id, report, now)
            return
        held = find_held(dpc, report.origin_area, report.payload.hypothesis)
        if held is not None:
            merge_reports(held, report)
            self.trace(now, "dpc_disposition", dpc.actor, report.id, disposition="merged", into=held.id,
                       k=held.payload.k)
            return
        dpc.inbox.append(report)
        self.sched.at(now + dpc.processing_time, "dpc_process_complete", dpc=dpc.id, report=report.id)

    def _origin_tau(self, report: Report) -> int:
        return self.sdccs[int(report.origin.partition(":")[2])].tau

    def _gate(self, dpc_id: int, report: Report, now: float) -> None:
        dpc = self.dpcs[dpc_id]
        area = report.origin_area
        alive = sum(1 for sid in self.area_sensors[area] if self.sensors[sid].alive)
        attempt = dpc.retries.get(report.id, 0)
        disposition = dpc_process(
            dpc, report, now,
            alive_in_area=max(alive, 1),
            modalities_deployed=self.area_modalities[area],
            tau=self._origin_tau(report),
        )
        self.trace(now, "dpc_disposition", dpc.actor, report.id, disposition=disposition.value,
                   confidence=report.confidence, threshold=dpc.confidence_threshold, attempt=attempt,
                   k=report.payload.k, low_confidence=report.low_confidence)
        if disposition is Disposition.REPROCESS:
            self.sched.at(now + dpc.reprocess_wait, "dpc_reprocess_deadline", dpc=dpc.id, report=report.id)
            for peer, at, summary in peer_sync(dpc, report, now, self.p["inter_dpc_latency"]):
                self.sched.at(at, "peer_summary", dpc=peer, summary=summary, sender=dpc.id)
        else:
            self._forward(dpc.id, report, now)

    def _on_dpc_process(self, ev: ScheduledEvent) -> None:
        dpc = self.dpcs[ev.params["dpc"]]
        report = self.reports[ev.params["report"]]
        dpc.inbox.remove(report)
        self._gate(dpc.id, report, ev.fire_at)

    def _on_dpc_deadline(self, ev: ScheduledEvent) -> None:
        dpc = self.dpcs[ev.params["dpc"]]
        report = dpc.held.get(ev.params["report"])
        if report is not None:
            self._gate(dpc.id, report, ev.fire_at)

    def _on_peer_summary(self, ev: ScheduledEvent) -> None:
        dpc = self.dpcs[ev.params["dpc"]]
        summary = ev.params["summary"]
        held = peer_receive(dpc, summary)
        if held is not None:
            self.trace(ev.fire_at, "dpc_disposition", dpc.actor, held.id, disposition="peer_merged",
                       sender=f"dpc:{ev.params['sender']}", summary=summary.id, k=held.payload.k)

    def _forward(self, dpc_id: int, report: Report, now: float) -> None:
        dpc = self.dpcs[dpc_id]
        latency = self.p["dpc_to_cdc_latency"]
        if report.kind is ReportKind.MANUAL_RECORD:
            report.hop(dpc.actor, now)
            at = now + latency
        else:
            at = dpc_forward(dpc, report, now, latency)
        self.sched.at(at, "cdc_decision", cdc=dpc.cdc, report=report.id)

    # level four -------------------------------------------------------------

    def _on_cdc_decision(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        cdc = self.cdcs[ev.params["cdc"]]
        report = self.reports[ev.params["report"]]
        if report.kind is ReportKind.MANUAL_RECORD:
            report.hop(cdc.actor, now)
            cdc.records.append(report)
            self.trace(now, "cdc_decision", cdc.actor, report.id, decision=Decision.ARCHIVE_ONLY.value,
                       kind=report.kind.value, similarity=None)
            return
        decision = cdc_decide(cdc, report, now)
        self.trace(now, "cdc_decision", cdc.actor, report.id, decision=decision.decision.value,
                   similarity=decision.similarity, threshold=cdc.similarity_threshold,
                   emergency=decision.emergency, low_confidence=report.low_confidence,
                   confidence=report.confidence, kind=report.kind.value)
        if decision.decision is Decision.WARN:
            self._decision_seq += 1
            self._pending_decisions[self._decision_seq] = decision
            self.sched.at(now + self.p["cdc_to_dcc_latency"], "dcc_receive", decision=self._decision_seq)

    def _on_dcc_receive(self, ev: ScheduledEvent) -> None:
        now = ev.fire_at
        decision = self._pending_decisions.pop(ev.params["decision"])
        report = self.reports[decision.report_id]
        schedule = dissemination_schedule(self.dcc, decision, now)
        self.trace(now, "warning_issued", self.dcc.actor, report.id, area=decision.area, kind=decision.kind,
                   similarity=decision.similarity, emergency=decision.emergency,
                   sources=sorted(report.payload.sources),
                   subscribers=self.dcc.subscribers_per_area[decision.area])
        for channel in sorted(schedule):
            self.sched.at(schedule[channel], "dcc_dissemination_complete", report=report.id, channel=channel,
                          area=decision.area, issued=now)

    def _on_dissemination_complete(self, ev: ScheduledEvent) -> None:
        prm = ev.params
        self.trace(ev.fire_at, "dissemination_complete", self.dcc.actor, prm["report"], channel=prm["channel"],
                   area=prm["area"], issued=prm["issued"])

    def _on_emergency_call(self, ev: ScheduledEvent) -> None:
        prm = ev.params
        report = self.reports[prm["report"]]
        self.trace(ev.fire_at, "emergency_call", prm["origin"], report.id, raised=prm["raised"],
                   severity=report.severity.value, sources=sorted(report.payload.sources),
                   area=report.origin_area)

    # driver -------------------------------------------------------------

    def run(self, until: Optional[float] = None) -> RunSummary:
        horizon = self.scenario.doc["duration"] if until is None else until
        self.sched.run_until(horizon)
        return self.summary()

    def buffered_ids(self) -> List[str]:
        out = []
        for sid in sorted(self.sdccs):
            out.extend(r.id for r in self.sdccs[sid].outbox)
        for m in self.map_list:
            out.extend(r.id for r in m.buffer)
        return out

    def summary(self) -> RunSummary:
        return RunSummary(
            emitted=len(self.emitted),
            delivered=len(self.delivered),
            buffered=len(self.buffered_ids()),
            dropped=len(self.dropped),
            fired=self.sched.fired,
            pending=self.sched.pending,
            scheduled=self.sched.scheduled,
        )


def run_scenario(scenario: Scenario, seed: Optional[int] = None, until: Optional[float] = None,
                 trace_sink: Optional[IO[str]] = None, keep_trace: bool = True) -> Simulation:
    sim = Simulation(scenario, seed=seed, trace_sink=trace_sink, keep_trace=keep_trace)
    sim.run(until)
    return sim
