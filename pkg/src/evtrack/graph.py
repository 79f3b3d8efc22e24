"""The tracking network as a deterministic discrete-event simulation.

One input vertex distributes events round-robin over h ROI-filter vertices;
filters forward in-ROI events to all n particle vertices; particles exchange
(state, weight) packets n-to-n after each update, wait on the barrier,
resample identically from shared information, and the leader (particle 0)
pushes ROI updates back to the filters and the mean state to the output.

Latency accounting: state-weight deliveries serialize at the receiver at
``t_particle_hop`` each (the self-entry is local and free), so a barrier
costs (n - 1) * t_particle_hop on top of the sender's compute time.  Event
and ROI packets take ``t_event_hop`` per hop.

Two executions of the same schedule are provided: a per-packet reference
engine that materializes every delivery, and a fast engine that exploits
the lockstep structure (all particles see identical packet timings) to
batch the per-particle work.  Both produce bit-identical tracks and stats.
A sequential "cpu" baseline runs the same mathematics without packets.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .events import DEFAULT_GEOMETRY, Event, SensorGeometry, events_to_arrays
from .filter import (
    FilterParams,
    Particle,
    ParticleState,
    RoiSpec,
    apply_motion_model,
    compute_roi,
    draw_motion_noise,
    incremental_likelihood,
    likelihood_batch,
    mean_state,
    normalize_weights,
    systematic_resample,
    systematic_resample_indices,
)


class ProtocolError(RuntimeError):
    """Violation of the exchange protocol (e.g. duplicate sender in a round)."""


class VertexKind(IntEnum):
    # Values double as deterministic tie-break ranks in the event queue;
    # externally injected events use rank 0.
    INPUT = 1
    FILTER = 2
    PARTICLE = 3
    OUTPUT = 4


@dataclass(frozen=True, slots=True)
class VertexId:
    kind: VertexKind
    index: int


@dataclass(frozen=True, slots=True)
class EventPacket:
    event: Event
    src: VertexId
    dst: VertexId
    send_time: float
    deliver_time: float


@dataclass(frozen=True, slots=True)
class StateWeightPacket:
    sender: int
    state: ParticleState
    weight: float
    seq: int
    src: VertexId
    dst: VertexId
    send_time: float
    deliver_time: float


@dataclass(frozen=True, slots=True)
class RoiUpdatePacket:
    roi: RoiSpec
    seq: int
    src: VertexId
    dst: VertexId
    send_time: float
    deliver_time: float


@dataclass(frozen=True, slots=True)
class OutputPacket:
    """Mean-state track row; ``t_us`` is the update's trigger time."""

    state: ParticleState
    t_us: float
    seq: int
    src: VertexId | None = None
    dst: VertexId | None = None
    send_time: float | None = None
    deliver_time: float | None = None


@dataclass(frozen=True, slots=True)
class Topology:
    """Connectivity of the vertex graph; leader is particle 0."""

    h: int
    n: int

    @property
    def input_filter_edges(self) -> int:
        return self.h

    @property
    def filter_particle_edges(self) -> int:
        return self.h * self.n

    @property
    def particle_particle_edges(self) -> int:
        return self.n * self.n  # self-edges are zero-latency local knowledge

    @property
    def leader_edges(self) -> int:
        return self.h + 1  # ROI updates to each filter, plus the output

    def iter_edges(self) -> Iterable[tuple[VertexId, VertexId]]:
        inp = VertexId(VertexKind.INPUT, 0)
        out = VertexId(VertexKind.OUTPUT, 0)
        for f in range(self.h):
            yield inp, VertexId(VertexKind.FILTER, f)
        for f in range(self.h):
            for p in range(self.n):
                yield VertexId(VertexKind.FILTER, f), VertexId(VertexKind.PARTICLE, p)
        for a in range(self.n):
            for b in range(self.n):
                yield VertexId(VertexKind.PARTICLE, a), VertexId(VertexKind.PARTICLE, b)
        leader = VertexId(VertexKind.PARTICLE, 0)
        for f in range(self.h):
            yield leader, VertexId(VertexKind.FILTER, f)
        yield leader, out


def build_topology(h: int, n: int) -> Topology:
    if h < 1 or n < 1:
        raise ValueError(f"need h >= 1 and n >= 1, got h={h}, n={n}")
    return Topology(h, n)


def distribute_event(seq: int, h: int) -> int:
    """Round-robin assignment of the seq-th arriving event to a filter."""
    return seq % h


def whole_frame_roi(geometry: SensorGeometry) -> RoiSpec:
    """Initial ROI covering every pixel of the frame."""
    return RoiSpec(
        geometry.width / 2.0,
        geometry.height / 2.0,
        math.hypot(geometry.width / 2.0, geometry.height / 2.0) + 1.0,
    )


def roi_filter_step(roi: RoiSpec, e: Event) -> bool:
    """True iff the event should be forwarded to the particles."""
    return roi.contains(e.x, e.y)


@dataclass(frozen=True, slots=True)
class LatencyModel:
    t_particle_hop: float = 4.6  # µs per state-weight packet ingested
    t_event_hop: float = 1.0  # µs per event/ROI packet hop
    t_score_per_event: float = 0.2  # µs of compute per event scored
    t_cpu_overhead: float = 1.0  # µs per particle per update, cpu baseline only

    def __post_init__(self) -> None:
        if min(self.t_particle_hop, self.t_event_hop, self.t_score_per_event, self.t_cpu_overhead) < 0:
            raise ValueError("latency constants must be >= 0")


@dataclass(frozen=True, slots=True)
class InitialPrior:
    """Uniform over the frame, or Gaussian around a given state."""

    kind: str = "uniform"  # "uniform" | "state"
    cx: float = 0.0
    cy: float = 0.0
    r: float = 20.0
    spread_xy: float = 10.0
    spread_r: float = 5.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "state"):
            raise ValueError(f"unknown prior kind {self.kind!r}")


@dataclass(frozen=True, slots=True)
class SimConfig:
    n: int = 100
    h: int = 8
    params: FilterParams = field(default_factory=FilterParams)
    latency: LatencyModel = field(default_factory=LatencyModel)
    geometry: SensorGeometry = DEFAULT_GEOMETRY
    seed: int = 0
    init: InitialPrior = field(default_factory=InitialPrior)
    mode: str = "graph"  # "graph" | "cpu"
    roi_gain: float = 2.0
    roi_margin: float = 10.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.h < 1:
            raise ValueError(f"need n >= 1 and h >= 1, got n={self.n}, h={self.h}")
        if self.mode not in ("graph", "cpu"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.roi_gain < 0 or self.roi_margin < 0:
            raise ValueError("roi_gain and roi_margin must be >= 0")


@dataclass
class SimStats:
    updates_total: int = 0
    events_in: int = 0
    events_dropped_roi: int = 0
    packets_state: int = 0
    mean_update_period_us: float = 0.0
    p99_update_period_us: float = 0.0
    modeled_update_rate_hz: float = 0.0
    barrier_wait_us_mean: float = 0.0
    # internal counters, not part of the serialized block
    events_forwarded: int = 0
    event_deliveries: int = 0
    packets_roi: int = 0
    packets_output: int = 0
    packets_stale: int = 0

    TEXT_KEYS = (
        "updates_total",
        "events_in",
        "events_dropped_roi",
        "packets_state",
        "mean_update_period_us",
        "p99_update_period_us",
        "modeled_update_rate_hz",
        "barrier_wait_us_mean",
    )

    def to_text(self) -> str:
        lines = []
        for key in self.TEXT_KEYS:
            value = getattr(self, key)
            if isinstance(value, float):
                lines.append(f"{key}={value:.6f}")
            else:
                lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def finalize_periods(self, timestamps: Sequence[float], barrier_waits: Sequence[float]) -> None:
        if len(timestamps) >= 2:
            periods = np.diff(np.asarray(timestamps, dtype=np.float64))
            self.mean_update_period_us = float(np.mean(periods))
            self.p99_update_period_us = float(np.percentile(periods, 99))
            span = timestamps[-1] - timestamps[0]
            if span > 0:
                self.modeled_update_rate_hz = (len(timestamps) - 1) / span * 1e6
        if barrier_waits:
            self.barrier_wait_us_mean = float(np.mean(np.asarray(barrier_waits)))


def parse_stats_text(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        out[key] = float(value)
    return out


# ---------------------------------------------------------------------------
# Seed-derived randomness.  Domain constants keep the streams disjoint.
# ---------------------------------------------------------------------------

_MOTION_DOMAIN = 1
_RESAMPLE_DOMAIN = 2
_PRIOR_DOMAIN = 3


def motion_rng(seed: int, particle_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, _MOTION_DOMAIN, particle_index])


def u0_for_update(seed: int, update_seq: int, n: int) -> float:
    """Resampling offset in [0, 1/n), identical at every particle."""
    return np.random.default_rng([seed, _RESAMPLE_DOMAIN, update_seq]).random() / n


def initial_states(config: SimConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-particle initial (x, y, r) arrays drawn from the configured prior."""
    rng = np.random.default_rng([config.seed, _PRIOR_DOMAIN])
    n, geo, params = config.n, config.geometry, config.params
    if config.init.kind == "uniform":
        xs = rng.uniform(0.0, geo.width, n)
        ys = rng.uniform(0.0, geo.height, n)
        rs = rng.uniform(params.r_min, params.r_max, n)
    else:
        xs = np.clip(config.init.cx + rng.standard_normal(n) * config.init.spread_xy, 0.0, geo.width - 1.0)
        ys = np.clip(config.init.cy + rng.standard_normal(n) * config.init.spread_xy, 0.0, geo.height - 1.0)
        rs = np.clip(config.init.r + rng.standard_normal(n) * config.init.spread_r, params.r_min, params.r_max)
    return xs, ys, rs


def _remote_rank(sender: int, receiver: int) -> int:
    """Ingest slot of a remote state packet at the receiver (1-based)."""
    return sender + 1 if sender < receiver else sender


# ---------------------------------------------------------------------------
# Reference engine: every packet is materialized and delivered in
# (deliver_time, src kind, src index, push order) order.
# ---------------------------------------------------------------------------


class FilterVertex:
    """Holds the latest ROI and forwards in-ROI events to all particles."""

    def __init__(self, index: int, n: int, latency: LatencyModel, geometry: SensorGeometry):
        self.id = VertexId(VertexKind.FILTER, index)
        self.n = n
        self.latency = latency
        self.roi = whole_frame_roi(geometry)
        self.roi_seq = -1

    def on_event(self, pkt: EventPacket, now: float) -> list[EventPacket]:
        if not roi_filter_step(self.roi, pkt.event):
            return []
        deliver = now + self.latency.t_event_hop
        return [
            EventPacket(pkt.event, self.id, VertexId(VertexKind.PARTICLE, p), now, deliver)
            for p in range(self.n)
        ]

    def on_roi(self, pkt: RoiUpdatePacket) -> None:
        if pkt.seq > self.roi_seq:
            self.roi = pkt.roi
            self.roi_seq = pkt.seq


class ParticleVertex:
    """One particle's full update cycle: buffer, trigger, broadcast, barrier.

    Events append to a bounded ring buffer; after ``q_trigger`` new events a
    state update runs and the (state, weight) broadcast goes out, with the
    compute cost added to the send time.  The barrier releases once entries
    from all n senders for the current round are present; every particle
    then resamples the identical population locally.  The leader emits the
    ROI update and the mean-state output row.
    """

    def __init__(
        self,
        index: int,
        config: SimConfig,
        initial_state: ParticleState,
    ):
        self.id = VertexId(VertexKind.PARTICLE, index)
        self.index = index
        self.cfg = config
        self.params = config.params
        self.latency = config.latency
        self.n = config.n
        self.state = initial_state
        self.weight = 1.0 / config.n
        self.rng = motion_rng(config.seed, index)
        self.ring: deque[Event] = deque(maxlen=config.params.w_max)
        self.pending = 0
        self.waiting = False
        self.seq = 0  # next update sequence number
        self.commit_seq = 0  # next barrier round to release
        self.trigger_time = 0.0
        self.send_time = 0.0
        self.entries: dict[int, dict[int, tuple[ParticleState, float]]] = {}
        self.stale_packets = 0
        self.barrier_waits: list[float] = []

    @property
    def is_leader(self) -> bool:
        return self.index == 0

    def on_event(self, ev: Event, now: float) -> list:
        self.ring.append(ev)
        self.pending += 1
        if not self.waiting and self.pending >= self.params.q_trigger:
            return self._trigger(now)
        return []

    def _trigger(self, now: float) -> list:
        window = list(reversed(self.ring))
        self.state = apply_motion_model(self.state, self.params, self.rng, self.cfg.geometry)
        self.weight = incremental_likelihood(window, self.state, self.params).value

        seq = self.seq
        self.seq += 1
        self.pending = 0
        self.waiting = True
        self.trigger_time = now
        self.send_time = now + self.latency.t_score_per_event * len(window)
        packets = []
        for dst in range(self.n):
            if dst == self.index:
                deliver = self.send_time  # self-edge: zero-latency local knowledge
            else:
                deliver = self.send_time + _remote_rank(self.index, dst) * self.latency.t_particle_hop
            packets.append(
                StateWeightPacket(
                    self.index,
                    self.state,
                    self.weight,
                    seq,
                    self.id,
                    VertexId(VertexKind.PARTICLE, dst),
                    self.send_time,
                    deliver,
                )
            )
        return packets

    def on_state(self, pkt: StateWeightPacket, now: float) -> list:
        if pkt.seq < self.commit_seq:
            self.stale_packets += 1
            return []
        table = self.entries.setdefault(pkt.seq, {})
        if pkt.sender in table:
            raise ProtocolError(
                f"duplicate sender {pkt.sender} for update {pkt.seq} at particle {self.index}"
            )
        table[pkt.sender] = (pkt.state, pkt.weight)
        if pkt.seq == self.commit_seq and len(table) == self.n:
            return self._release(pkt.seq, now)
        return []

    def _release(self, seq: int, now: float) -> list:
        table = self.entries.pop(seq)
        population = [Particle(table[s][0], table[s][1]) for s in range(self.n)]
        normalized = normalize_weights(population, self.params.eps_w)
        u0 = u0_for_update(self.cfg.seed, seq, self.n)
        resampled = systematic_resample(normalized, u0)
        mean = mean_state(normalized)  # estimate before resampling quantization
        self.state = resampled[self.index].state
        self.weight = resampled[self.index].weight
        self.waiting = False
        self.commit_seq = seq + 1
        self.barrier_waits.append(now - self.send_time)

        out: list = []
        if self.is_leader:
            roi = compute_roi(mean, self.cfg.roi_gain, self.cfg.roi_margin)
            deliver = now + self.latency.t_event_hop
            for f in range(self.cfg.h):
                out.append(
                    RoiUpdatePacket(roi, seq, self.id, VertexId(VertexKind.FILTER, f), now, deliver)
                )
            out.append(
                OutputPacket(
                    mean,
                    self.trigger_time,
                    seq,
                    self.id,
                    VertexId(VertexKind.OUTPUT, 0),
                    now,
                    deliver,
                )
            )
        if self.pending >= self.params.q_trigger:
            out.extend(self._trigger(now))
        return out


def _validate_events(events: Sequence[Event]) -> np.ndarray:
    t, x, y, p = events_to_arrays(events)
    if t.size and np.any(np.diff(t) < 0):
        idx = int(np.argmax(np.diff(t) < 0)) + 1
        raise ValueError(f"events not time-ordered at record {idx}")
    return t


class _ReferenceEngine:
    def __init__(self, config: SimConfig):
        self.cfg = config
        xs, ys, rs = initial_states(config)
        self.filters = [
            FilterVertex(f, config.n, config.latency, config.geometry) for f in range(config.h)
        ]
        self.particles = [
            ParticleVertex(i, config, ParticleState(float(xs[i]), float(ys[i]), float(rs[i])))
            for i in range(config.n)
        ]
        self.track: list[OutputPacket] = []
        self.stats = SimStats()
        self.heap: list = []
        self.counter = itertools.count()
        self.last_time = -math.inf

    def _push(self, pkt) -> None:
        heapq.heappush(
            self.heap, (pkt.deliver_time, pkt.src.kind.value, pkt.src.index, next(self.counter), pkt)
        )

    def run(self, events: Sequence[Event]) -> tuple[list[OutputPacket], SimStats]:
        _validate_events(events)
        cfg = self.cfg
        input_id = VertexId(VertexKind.INPUT, 0)
        ev_idx = 0
        while ev_idx < len(events) or self.heap:
            take_event = False
            if ev_idx < len(events):
                if not self.heap:
                    take_event = True
                else:
                    # external injections (rank 0) precede same-time deliveries
                    take_event = (float(events[ev_idx].t), 0) <= self.heap[0][:2]
            if take_event:
                e = events[ev_idx]
                now = float(e.t)
                self._check_clock(now)
                f = distribute_event(ev_idx, cfg.h)
                self.stats.events_in += 1
                self._push(
                    EventPacket(
                        e,
                        input_id,
                        VertexId(VertexKind.FILTER, f),
                        now,
                        now + cfg.latency.t_event_hop,
                    )
                )
                ev_idx += 1
                continue
            _, _, _, _, pkt = heapq.heappop(self.heap)
            now = pkt.deliver_time
            self._check_clock(now)
            self._deliver(pkt, now)
        self._finalize()
        return self.track, self.stats

    def _check_clock(self, now: float) -> None:
        if now < self.last_time:
            raise AssertionError(f"simulated clock regressed: {now} < {self.last_time}")
        self.last_time = now

    def _deliver(self, pkt, now: float) -> None:
        if isinstance(pkt, EventPacket):
            if pkt.dst.kind is VertexKind.FILTER:
                forwards = self.filters[pkt.dst.index].on_event(pkt, now)
                if forwards:
                    self.stats.events_forwarded += 1
                    for p in forwards:
                        self._push(p)
                else:
                    self.stats.events_dropped_roi += 1
            else:
                self.stats.event_deliveries += 1
                for p in self.particles[pkt.dst.index].on_event(pkt.event, now):
                    self._push(p)
        elif isinstance(pkt, StateWeightPacket):
            self.stats.packets_state += 1
            for p in self.particles[pkt.dst.index].on_state(pkt, now):
                self._push(p)
        elif isinstance(pkt, RoiUpdatePacket):
            self.stats.packets_roi += 1
            self.filters[pkt.dst.index].on_roi(pkt)
        elif isinstance(pkt, OutputPacket):
            self.stats.packets_output += 1
            self.track.append(pkt)
        else:  # pragma: no cover
            raise TypeError(f"unknown packet {pkt!r}")

    def _finalize(self) -> None:
        self.stats.updates_total = len(self.track)
        self.stats.packets_stale = sum(p.stale_packets for p in self.particles)
        leader = self.particles[0]
        self.stats.finalize_periods([o.t_us for o in self.track], leader.barrier_waits)


# ---------------------------------------------------------------------------
# Fast engine: identical schedule, batched execution.  Because every filter
# holds the same ROI and every particle ingests the same events at the same
# times, the per-particle bookkeeping collapses to shared state plus per-
# particle (x, y, r, w) arrays; the n-to-n exchange of one update collapses
# to a single barrier entry at the common completion time.
# ---------------------------------------------------------------------------

_RANK_FILTER = VertexKind.FILTER.value
_RANK_PARTICLE = VertexKind.PARTICLE.value


class _FastEngine:
    def __init__(self, config: SimConfig):
        self.cfg = config
        self.params = config.params
        self.latency = config.latency
        self.xs, self.ys, self.rs = initial_states(config)
        self.ws = np.full(config.n, 1.0 / config.n)
        self.rngs = [motion_rng(config.seed, i) for i in range(config.n)]
        w_max = config.params.w_max
        self.buf_x = np.empty(w_max)
        self.buf_y = np.empty(w_max)
        self.buf_pos = 0
        self.buf_count = 0
        self.roi = whole_frame_roi(config.geometry)
        self.pending = 0
        self.waiting = False
        self.seq = 0
        self.trigger_time = 0.0
        self.send_time = 0.0
        self.track: list[OutputPacket] = []
        self.stats = SimStats()
        self.heap: list = []
        self.counter = itertools.count()
        self.barrier_waits: list[float] = []

    def _push(self, time: float, rank: int, src_index: int, kind: str, payload) -> None:
        heapq.heappush(self.heap, (time, rank, src_index, next(self.counter), kind, payload))

    def run(self, events: Sequence[Event]) -> tuple[list[OutputPacket], SimStats]:
        _validate_events(events)
        cfg = self.cfg
        hop = self.latency.t_event_hop
        ev_idx = 0
        n_events = len(events)
        while ev_idx < n_events or self.heap:
            take_event = False
            if ev_idx < n_events:
                if not self.heap:
                    take_event = True
                else:
                    take_event = (float(events[ev_idx].t), 0) <= self.heap[0][:2]
            if take_event:
                e = events[ev_idx]
                self.stats.events_in += 1
                # input vertex: round-robin to a filter (all hold the same ROI)
                self._push(float(e.t) + hop, 1, distribute_event(ev_idx, cfg.h), "filter", e)
                ev_idx += 1
                continue
            now, _, src_index, _, kind, payload = heapq.heappop(self.heap)
            if kind == "filter":
                self._on_filter(payload, now, src_index)
            elif kind == "particles":
                self._on_particles(payload, now)
            elif kind == "barrier":
                self._on_barrier(payload, now)
            elif kind == "roi":
                self.roi = payload
                self.stats.packets_roi += cfg.h
            else:  # "output"
                self.stats.packets_output += 1
                self.track.append(payload)
        self._finalize()
        return self.track, self.stats

    def _on_filter(self, e: Event, now: float, filter_index: int) -> None:
        if roi_filter_step(self.roi, e):
            self.stats.events_forwarded += 1
            self._push(now + self.latency.t_event_hop, _RANK_FILTER, filter_index, "particles", e)
        else:
            self.stats.events_dropped_roi += 1

    def _on_particles(self, e: Event, now: float) -> None:
        self.stats.event_deliveries += self.cfg.n
        w_max = self.params.w_max
        self.buf_x[self.buf_pos] = e.x
        self.buf_y[self.buf_pos] = e.y
        self.buf_pos = (self.buf_pos + 1) % w_max
        self.buf_count = min(self.buf_count + 1, w_max)
        self.pending += 1
        if not self.waiting and self.pending >= self.params.q_trigger:
            self._trigger(now)

    def _window(self) -> tuple[np.ndarray, np.ndarray]:
        idx = (self.buf_pos - 1 - np.arange(self.buf_count)) % self.params.w_max
        return self.buf_x[idx], self.buf_y[idx]

    def _trigger(self, now: float) -> None:
        cfg = self.cfg
        ex, ey = self._window()
        geo = cfg.geometry
        noise = np.array([draw_motion_noise(rng, self.params) for rng in self.rngs])
        self.xs = np.minimum(np.maximum(self.xs + noise[:, 0], 0.0), geo.width - 1.0)
        self.ys = np.minimum(np.maximum(self.ys + noise[:, 1], 0.0), geo.height - 1.0)
        self.rs = np.minimum(np.maximum(self.rs + noise[:, 2], self.params.r_min), self.params.r_max)
        values, _ = likelihood_batch(ex, ey, self.xs, self.ys, self.rs, self.params)
        self.ws = values

        self.trigger_time = now
        self.send_time = now + self.latency.t_score_per_event * ex.size
        self.pending = 0
        self.waiting = True
        completion = self.send_time + (cfg.n - 1) * self.latency.t_particle_hop
        # the release is driven by the last-ranked sender's delivery
        self._push(completion, _RANK_PARTICLE, cfg.n - 1, "barrier", self.seq)
        self.seq += 1

    def _on_barrier(self, seq: int, now: float) -> None:
        cfg = self.cfg
        n = cfg.n
        self.stats.packets_state += n * n
        total = float(np.sum(self.ws))
        if total < n * self.params.eps_w:
            wsn = np.full(n, 1.0 / n)
        else:
            wsn = self.ws / total
        mean = ParticleState(
            float(np.dot(wsn, self.xs)), float(np.dot(wsn, self.ys)), float(np.dot(wsn, self.rs))
        )
        u0 = u0_for_update(cfg.seed, seq, n)
        idx = systematic_resample_indices(wsn, u0, n)
        self.xs = self.xs[idx]
        self.ys = self.ys[idx]
        self.rs = self.rs[idx]
        self.ws = np.full(n, 1.0 / n)
        self.waiting = False
        self.barrier_waits.append(now - self.send_time)

        deliver = now + self.latency.t_event_hop
        roi = compute_roi(mean, cfg.roi_gain, cfg.roi_margin)
        self._push(deliver, _RANK_PARTICLE, 0, "roi", roi)
        out = OutputPacket(
            mean,
            self.trigger_time,
            seq,
            VertexId(VertexKind.PARTICLE, 0),
            VertexId(VertexKind.OUTPUT, 0),
            now,
            deliver,
        )
        self._push(deliver, _RANK_PARTICLE, 0, "output", out)
        if self.pending >= self.params.q_trigger:
            self._trigger(now)

    def _finalize(self) -> None:
        self.stats.updates_total = len(self.track)
        self.stats.finalize_periods([o.t_us for o in self.track], self.barrier_waits)


def run_simulation(
    config: SimConfig, events: Sequence[Event], engine: str = "fast"
) -> tuple[list[OutputPacket], SimStats]:
    """Run the vertex-graph simulation; deterministic in (config, events)."""
    if engine == "fast":
        return _FastEngine(config).run(events)
    if engine == "reference":
        return _ReferenceEngine(config).run(events)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# Sequential CPU baseline: same mathematics, no packets.  Per update the
# modeled cost is n * (t_score_per_event * window + t_cpu_overhead); the
# processor is busy until then, so backlog updates and the new ROI take
# effect at the completion time, mirroring the graph-mode barrier.
# ---------------------------------------------------------------------------


class _CpuEngine:
    def __init__(self, config: SimConfig):
        self.cfg = config
        self.params = config.params
        self.latency = config.latency
        self.xs, self.ys, self.rs = initial_states(config)
        self.ws = np.full(config.n, 1.0 / config.n)
        self.rngs = [motion_rng(config.seed, i) for i in range(config.n)]
        w_max = config.params.w_max
        self.buf_x = np.empty(w_max)
        self.buf_y = np.empty(w_max)
        self.buf_pos = 0
        self.buf_count = 0
        self.roi = whole_frame_roi(config.geometry)
        self.pending_roi: tuple[float, RoiSpec] | None = None
        self.pending = 0
        self.busy_until = -math.inf
        self.seq = 0
        self.track: list[OutputPacket] = []
        self.stats = SimStats()

    def run(self, events: Sequence[Event]) -> tuple[list[OutputPacket], SimStats]:
        _validate_events(events)
        q = self.params.q_trigger
        for e in events:
            t = float(e.t)
            if self.busy_until <= t and self.pending >= q:
                self._commit_roi(self.busy_until)
                self._update(self.busy_until)
            self._commit_roi(t)
            self.stats.events_in += 1
            if roi_filter_step(self.roi, e):
                self.stats.events_forwarded += 1
                self._ingest(e)
                if self.pending >= q and self.busy_until <= t:
                    self._update(t)
            else:
                self.stats.events_dropped_roi += 1
        if self.pending >= q:
            self._update(self.busy_until)
        self._finalize()
        return self.track, self.stats

    def _ingest(self, e: Event) -> None:
        w_max = self.params.w_max
        self.buf_x[self.buf_pos] = e.x
        self.buf_y[self.buf_pos] = e.y
        self.buf_pos = (self.buf_pos + 1) % w_max
        self.buf_count = min(self.buf_count + 1, w_max)
        self.pending += 1

    def _commit_roi(self, now: float) -> None:
        if self.pending_roi is not None and self.pending_roi[0] <= now:
            self.roi = self.pending_roi[1]
            self.pending_roi = None

    def _update(self, now: float) -> None:
        cfg = self.cfg
        n = cfg.n
        idx = (self.buf_pos - 1 - np.arange(self.buf_count)) % self.params.w_max
        ex, ey = self.buf_x[idx], self.buf_y[idx]
        geo = cfg.geometry
        noise = np.array([draw_motion_noise(rng, self.params) for rng in self.rngs])
        self.xs = np.minimum(np.maximum(self.xs + noise[:, 0], 0.0), geo.width - 1.0)
        self.ys = np.minimum(np.maximum(self.ys + noise[:, 1], 0.0), geo.height - 1.0)
        self.rs = np.minimum(np.maximum(self.rs + noise[:, 2], self.params.r_min), self.params.r_max)
        values, _ = likelihood_batch(ex, ey, self.xs, self.ys, self.rs, self.params)
        total = float(np.sum(values))
        if total < n * self.params.eps_w:
            wsn = np.full(n, 1.0 / n)
        else:
            wsn = values / total
        mean = ParticleState(
            float(np.dot(wsn, self.xs)), float(np.dot(wsn, self.ys)), float(np.dot(wsn, self.rs))
        )
        u0 = u0_for_update(cfg.seed, self.seq, n)
        sel = systematic_resample_indices(wsn, u0, n)
        self.xs = self.xs[sel]
        self.ys = self.ys[sel]
        self.rs = self.rs[sel]
        self.ws = np.full(n, 1.0 / n)
        self.track.append(OutputPacket(mean, now, self.seq))
        cost = n * (self.latency.t_score_per_event * ex.size + self.latency.t_cpu_overhead)
        self.busy_until = now + cost
        self.pending_roi = (self.busy_until, compute_roi(mean, cfg.roi_gain, cfg.roi_margin))
        self.pending = 0
        self.seq += 1

    def _finalize(self) -> None:
        self.stats.updates_total = len(self.track)
        self.stats.finalize_periods([o.t_us for o in self.track], [])


def run_cpu_baseline(config: SimConfig, events: Sequence[Event]) -> tuple[list[OutputPacket], SimStats]:
    """Sequential baseline whose modeled update latency grows linearly in n."""
    return _CpuEngine(config).run(events)


def run(config: SimConfig, events: Sequence[Event], engine: str = "fast"):
    """Dispatch on config.mode."""
    if config.mode == "cpu":
        return run_cpu_baseline(config, events)
    return run_simulation(config, events, engine=engine)
