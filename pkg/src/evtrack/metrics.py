"""Tracking accuracy against ground truth and the particle-count scaling
experiment comparing the vertex-graph run with the sequential baseline."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .events import Event, GroundTruthSample
from .graph import OutputPacket, SimConfig, run_cpu_baseline, run_simulation


@dataclass(frozen=True, slots=True)
class TrackError:
    mean_center_err: float
    p95_center_err: float
    mean_radius_err: float
    lost_fraction: float
    samples_used: int
    samples_excluded: int

    CSV_HEADER = "mean_center_err_px,p95_center_err_px,mean_radius_err_px,lost_fraction,samples_used,samples_excluded"

    def to_csv_row(self) -> str:
        return (
            f"{self.mean_center_err:.6f},{self.p95_center_err:.6f},"
            f"{self.mean_radius_err:.6f},{self.lost_fraction:.6f},"
            f"{self.samples_used},{self.samples_excluded}"
        )


@dataclass(frozen=True, slots=True)
class ScalingRow:
    n: int
    mode: str
    modeled_update_rate_hz: float
    mean_update_period_us: float


@dataclass(frozen=True, slots=True)
class ScalingReport:
    rows: tuple[ScalingRow, ...]

    CSV_HEADER = "n,mode,rate_hz,period_us"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for row in self.rows:
            lines.append(
                f"{row.n},{row.mode},{row.modeled_update_rate_hz:.6f},{row.mean_update_period_us:.6f}"
            )
        return "\n".join(lines) + "\n"


def compute_tracking_error(
    track: Sequence[OutputPacket],
    truth: Sequence[GroundTruthSample],
    lost_threshold: float = 20.0,
    settle_fraction: float = 0.1,
) -> TrackError:
    """Compare a track against linearly interpolated ground truth.

    The first ``settle_fraction`` of the track duration is excluded as
    burn-in, as are samples outside the truth time span (counted).
    """
    if not track or not truth:
        raise ValueError("track and truth must be non-empty")
    ts = np.array([o.t_us for o in track], dtype=np.float64)
    tx = np.array([o.state.x for o in track])
    ty = np.array([o.state.y for o in track])
    tr = np.array([o.state.r for o in track])

    gt = np.array([s.t for s in truth], dtype=np.float64)
    gx = np.array([s.cx for s in truth])
    gy = np.array([s.cy for s in truth])
    gr = np.array([s.r for s in truth])

    settle_end = ts[0] + settle_fraction * (ts[-1] - ts[0])
    in_span = (ts >= gt[0]) & (ts <= gt[-1])
    keep = in_span & (ts > settle_end) if len(ts) > 1 else in_span
    excluded = int(len(ts) - np.count_nonzero(keep))
    if not np.any(keep):
        return TrackError(0.0, 0.0, 0.0, 0.0, 0, excluded)

    cx = np.interp(ts[keep], gt, gx)
    cy = np.interp(ts[keep], gt, gy)
    cr = np.interp(ts[keep], gt, gr)
    center_err = np.hypot(tx[keep] - cx, ty[keep] - cy)
    radius_err = np.abs(tr[keep] - cr)
    return TrackError(
        float(np.mean(center_err)),
        float(np.percentile(center_err, 95)),
        float(np.mean(radius_err)),
        float(np.mean(center_err > lost_threshold)),
        int(np.count_nonzero(keep)),
        excluded,
    )


def center_error_series(
    track: Sequence[OutputPacket], truth: Sequence[GroundTruthSample]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample center error for track samples inside the truth span."""
    ts = np.array([o.t_us for o in track], dtype=np.float64)
    gt = np.array([s.t for s in truth], dtype=np.float64)
    keep = (ts >= gt[0]) & (ts <= gt[-1])
    ts = ts[keep]
    cx = np.interp(ts, gt, [s.cx for s in truth])
    cy = np.interp(ts, gt, [s.cy for s in truth])
    tx = np.array([o.state.x for o in track])[keep]
    ty = np.array([o.state.y for o in track])[keep]
    return ts, np.hypot(tx - cx, ty - cy)


def compute_update_rate(track: Sequence[OutputPacket]) -> float:
    """Updates per second over the track's time span."""
    if len(track) < 2:
        raise ValueError("update rate undefined for fewer than 2 outputs")
    span = track[-1].t_us - track[0].t_us
    if span <= 0:
        raise ValueError("update rate undefined for zero time span")
    return (len(track) - 1) / span * 1e6


def scaling_experiment(
    base_config: SimConfig, n_values: Sequence[int], events: Sequence[Event]
) -> ScalingReport:
    """One graph-mode and one cpu-mode row per particle count, same stream."""
    if list(n_values) != sorted(n_values):
        raise ValueError("n values must be sorted ascending")
    rows: list[ScalingRow] = []
    for n in n_values:
        cfg = replace(base_config, n=n)
        for mode, runner in (("graph", run_simulation), ("cpu", run_cpu_baseline)):
            _, stats = runner(cfg, events)
            rows.append(
                ScalingRow(n, mode, stats.modeled_update_rate_hz, stats.mean_update_period_us)
            )
    return ScalingReport(tuple(rows))
