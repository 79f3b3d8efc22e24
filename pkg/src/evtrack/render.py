"""Debug overlay frames (binary PPM, bit-exact) and report figures.

Frames show the events of one frame period as black points on white with
the current estimate drawn as a 1-px red circle.  Report figures (scaling
curves, error timelines) are rendered with matplotlib next to the CSVs.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .events import Event, SensorGeometry
from .filter import ParticleState
from .graph import OutputPacket
from .metrics import ScalingReport

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
RED = (255, 0, 0)


def write_ppm(path: Path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as binary PPM (P6, maxval 255)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("rgb must be (H, W, 3) uint8")
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def circle_points(cx: int, cy: int, radius: int) -> list[tuple[int, int]]:
    """Integer midpoint-circle rasterization (1-px contour)."""
    if radius < 0:
        return []
    if radius == 0:
        return [(cx, cy)]
    pts = []
    x, y = radius, 0
    err = 1 - radius
    while x >= y:
        for dx, dy in ((x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)):
            pts.append((cx + dx, cy + dy))
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    return pts


def render_frame(
    geometry: SensorGeometry,
    events: Sequence[Event],
    estimate: ParticleState | None,
) -> np.ndarray:
    frame = np.full((geometry.height, geometry.width, 3), 255, dtype=np.uint8)
    for e in events:
        frame[e.y, e.x] = BLACK
    if estimate is not None:
        for px, py in circle_points(round(estimate.x), round(estimate.y), round(estimate.r)):
            if 0 <= px < geometry.width and 0 <= py < geometry.height:
                frame[py, px] = RED
    return frame


def render_track_frames(
    out_dir: Path,
    geometry: SensorGeometry,
    events: Sequence[Event],
    track: Sequence[OutputPacket],
    frame_period_us: int = 10_000,
) -> list[Path]:
    """Write numbered overlay frames at a fixed period; returns the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if not events:
        return []
    t0 = events[0].t
    t_end = events[-1].t
    n_frames = max(1, math.ceil((t_end - t0) / frame_period_us)) if t_end > t0 else 1
    paths = []
    ev_idx = 0
    track_idx = 0
    estimate: ParticleState | None = None
    for k in range(n_frames):
        frame_end = t0 + (k + 1) * frame_period_us
        start = ev_idx
        while ev_idx < len(events) and events[ev_idx].t < frame_end:
            ev_idx += 1
        while track_idx < len(track) and track[track_idx].t_us <= frame_end:
            estimate = track[track_idx].state
            track_idx += 1
        frame = render_frame(geometry, events[start:ev_idx], estimate)
        path = out_dir / f"frame_{k:06d}.ppm"
        write_ppm(path, frame)
        paths.append(path)
    return paths


def _use_agg():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_scaling(report: ScalingReport, path: Path) -> None:
    """Modeled update rate vs particle count, one line per mode."""
    plt = _use_agg()
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, marker in (("graph", "o"), ("cpu", "s")):
        rows = [r for r in report.rows if r.mode == mode]
        if rows:
            ax.plot(
                [r.n for r in rows],
                [r.modeled_update_rate_hz for r in rows],
                marker=marker,
                label=mode,
            )
    ax.set_xlabel("particles (n)")
    ax.set_ylabel("modeled update rate (Hz)")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_error_timeline(
    track_t_us: np.ndarray,
    center_err: np.ndarray,
    lost_threshold: float,
    path: Path,
) -> None:
    plt = _use_agg()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(track_t_us / 1e6, center_err, lw=0.8)
    ax.axhline(lost_threshold, color="red", ls="--", lw=0.8, label="lost threshold")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("center error (px)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
