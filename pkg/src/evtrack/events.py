"""Event data model and stream I/O.

An event is one sensor spike: microsecond timestamp, pixel coordinates and
polarity.  Streams are time-ordered sequences of events, stored either as
CSV (``t_us,x,y,p`` per line, no header) or as fixed 16-byte binary records
(little-endian u64 t, u16 x, u16 y, u8 p, 3 zero pad bytes).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

BIN_RECORD = struct.Struct("<QHHB3x")
assert BIN_RECORD.size == 16


class EventFormatError(ValueError):
    """Malformed event data: bad field, bad record, or timestamp regression."""


@dataclass(frozen=True, slots=True)
class SensorGeometry:
    width: int = 304
    height: int = 240

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"sensor geometry must be positive, got {self.width}x{self.height}")

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


DEFAULT_GEOMETRY = SensorGeometry()


@dataclass(frozen=True, slots=True)
class Event:
    """One sensor spike. ``p`` is 1 for a light increase, 0 for a decrease."""

    t: int  # microseconds
    x: int
    y: int
    p: int


@dataclass(frozen=True, slots=True)
class GroundTruthSample:
    """True circle center and radius at time ``t`` (µs); coordinates real-valued."""

    t: int
    cx: float
    cy: float
    r: float


def parse_event_csv(line: str, geometry: SensorGeometry = DEFAULT_GEOMETRY) -> Event:
    """Parse one ``t_us,x,y,p`` line; whitespace around fields is tolerated."""
    fields = line.strip().split(",")
    if len(fields) != 4:
        raise EventFormatError(f"expected 4 fields in event line {line!r}, got {len(fields)}")
    try:
        t, x, y, p = (int(f.strip()) for f in fields)
    except ValueError:
        raise EventFormatError(f"non-numeric field in event line {line!r}") from None
    if t < 0:
        raise EventFormatError(f"negative timestamp in event line {line!r}")
    if not (0 <= x < geometry.width) or not (0 <= y < geometry.height):
        raise EventFormatError(
            f"coordinates out of {geometry.width}x{geometry.height} bounds in event line {line!r}"
        )
    if p not in (0, 1):
        raise EventFormatError(f"polarity not in {{0,1}} in event line {line!r}")
    return Event(t, x, y, p)


def read_event_stream(
    source: IO[bytes], fmt: str = "csv", geometry: SensorGeometry = DEFAULT_GEOMETRY
) -> Iterator[Event]:
    """Yield events from a byte stream in file order, rejecting timestamp regressions."""
    if fmt == "csv":
        yield from _read_csv(source, geometry)
    elif fmt == "bin":
        yield from _read_bin(source, geometry)
    else:
        raise ValueError(f"unknown event format {fmt!r}")


def _read_csv(source: IO[bytes], geometry: SensorGeometry) -> Iterator[Event]:
    last_t = -1
    for index, raw in enumerate(source):
        line = raw.decode("ascii")
        if not line.strip():
            continue
        ev = parse_event_csv(line, geometry)
        if ev.t < last_t:
            raise EventFormatError(f"timestamp regression at record {index}: {ev.t} < {last_t}")
        last_t = ev.t
        yield ev


def _read_bin(source: IO[bytes], geometry: SensorGeometry) -> Iterator[Event]:
    data = source.read()
    if len(data) % BIN_RECORD.size != 0:
        raise EventFormatError(
            f"truncated binary stream: {len(data)} bytes is not a multiple of {BIN_RECORD.size}"
        )
    last_t = -1
    for index, (t, x, y, p) in enumerate(BIN_RECORD.iter_unpack(data)):
        if not (0 <= x < geometry.width) or not (0 <= y < geometry.height):
            raise EventFormatError(f"coordinates out of bounds at record {index}")
        if p not in (0, 1):
            raise EventFormatError(f"polarity not in {{0,1}} at record {index}")
        if t < last_t:
            raise EventFormatError(f"timestamp regression at record {index}: {t} < {last_t}")
        last_t = t
        yield Event(t, x, y, p)


def write_event_stream(events: Iterable[Event], sink: IO[bytes], fmt: str = "csv") -> None:
    """Write a time-ordered stream; round-trips with read_event_stream."""
    last_t = -1
    if fmt == "csv":
        for ev in events:
            if ev.t < last_t:
                raise EventFormatError(f"events not time-ordered: {ev.t} < {last_t}")
            last_t = ev.t
            sink.write(f"{ev.t},{ev.x},{ev.y},{ev.p}\n".encode("ascii"))
    elif fmt == "bin":
        for ev in events:
            if ev.t < last_t:
                raise EventFormatError(f"events not time-ordered: {ev.t} < {last_t}")
            last_t = ev.t
            sink.write(BIN_RECORD.pack(ev.t, ev.x, ev.y, ev.p))
    else:
        raise ValueError(f"unknown event format {fmt!r}")


def merge_streams(a: Sequence[Event], b: Sequence[Event]) -> list[Event]:
    """Stable merge of two time-ordered streams; ties broken a-before-b."""
    out: list[Event] = []
    i = j = 0
    while i < len(a) and j < len(b):
        if b[j].t < a[i].t:
            out.append(b[j])
            j += 1
        else:
            out.append(a[i])
            i += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return out


def events_to_arrays(events: Sequence[Event]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Column arrays (t, x, y, p) for bulk numeric work on a stream."""
    n = len(events)
    t = np.fromiter((e.t for e in events), dtype=np.int64, count=n)
    x = np.fromiter((e.x for e in events), dtype=np.int32, count=n)
    y = np.fromiter((e.y for e in events), dtype=np.int32, count=n)
    p = np.fromiter((e.p for e in events), dtype=np.int8, count=n)
    return t, x, y, p


def read_truth_csv(source: IO[bytes]) -> list[GroundTruthSample]:
    """Read ``t_us,cx,cy,r`` ground-truth rows; a header line is tolerated."""
    samples: list[GroundTruthSample] = []
    last_t = -1
    for index, raw in enumerate(source):
        line = raw.decode("ascii").strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise EventFormatError(f"expected 4 fields in truth line {line!r}")
        try:
            t = int(float(fields[0]))
            cx, cy, r = (float(f) for f in fields[1:])
        except ValueError:
            if index == 0:
                continue  # header line
            raise EventFormatError(f"non-numeric field in truth line {line!r}") from None
        if r <= 0:
            raise EventFormatError(f"non-positive radius in truth line {line!r}")
        if t < last_t:
            raise EventFormatError(f"timestamp regression at truth record {index}")
        last_t = t
        samples.append(GroundTruthSample(t, cx, cy, r))
    return samples


def write_truth_csv(samples: Iterable[GroundTruthSample], sink: IO[bytes]) -> None:
    for s in samples:
        sink.write(f"{s.t},{s.cx:.6f},{s.cy:.6f},{s.r:.6f}\n".encode("ascii"))
