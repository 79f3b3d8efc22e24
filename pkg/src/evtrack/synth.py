"""Synthetic event generation for a moving circular target.

Contour events are emitted as a Poisson process at ``event_rate`` events per
pixel of contour per second (so a circle of radius r fires at
``event_rate * 2 * pi * r`` Hz), placed uniformly in angle with Gaussian
radial jitter.  Clutter events are uniform over the frame.  Ground truth
between trajectory samples is linearly interpolated.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .events import DEFAULT_GEOMETRY, Event, GroundTruthSample, SensorGeometry, merge_streams

US = 1_000_000.0  # microseconds per second


def _check_trajectory(trajectory: Sequence[GroundTruthSample]) -> None:
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    for a, b in zip(trajectory, trajectory[1:]):
        if b.t < a.t:
            raise ValueError(f"trajectory timestamps decrease: {b.t} < {a.t}")


def _interp_truth(trajectory: Sequence[GroundTruthSample], t_us: np.ndarray):
    ts = np.array([s.t for s in trajectory], dtype=np.float64)
    cx = np.interp(t_us, ts, [s.cx for s in trajectory])
    cy = np.interp(t_us, ts, [s.cy for s in trajectory])
    r = np.interp(t_us, ts, [s.r for s in trajectory])
    return cx, cy, r


def _poisson_times(rate_hz: float, t0_us: float, t1_us: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson arrival times in [t0, t1), integer microseconds."""
    if rate_hz <= 0 or t1_us <= t0_us:
        return np.empty(0, dtype=np.int64)
    span_s = (t1_us - t0_us) / US
    count = rng.poisson(rate_hz * span_s)
    times = np.sort(rng.uniform(t0_us, t1_us, size=count))
    return times.astype(np.int64)


def generate_circle_events(
    trajectory: Sequence[GroundTruthSample],
    event_rate: float,
    contour_sigma: float,
    clutter_rate: float,
    geometry: SensorGeometry = DEFAULT_GEOMETRY,
    seed: int = 0,
) -> tuple[list[Event], list[GroundTruthSample]]:
    """Generate a deterministic event stream for the given trajectory.

    Contour emission rate follows the (interpolated) radius; positions are
    snapped to the pixel grid and clipped to sensor bounds.  Polarity is
    uniform random.  Returns the events and the ground-truth samples.
    """
    _check_trajectory(trajectory)
    if event_rate < 0 or clutter_rate < 0:
        raise ValueError("rates must be >= 0")
    rng = np.random.default_rng(seed)
    t0, t1 = float(trajectory[0].t), float(trajectory[-1].t)

    # Contour arrivals: piecewise-homogeneous per trajectory segment, using
    # the mean radius of the segment for the rate.
    contour_times: list[np.ndarray] = []
    if len(trajectory) == 1:
        segments = []
    else:
        segments = list(zip(trajectory, trajectory[1:]))
    for a, b in segments:
        mean_r = 0.5 * (a.r + b.r)
        contour_times.append(_poisson_times(event_rate * 2.0 * math.pi * mean_r, a.t, b.t, rng))
    times = np.concatenate(contour_times) if contour_times else np.empty(0, dtype=np.int64)
    times.sort()

    cx, cy, r = _interp_truth(trajectory, times.astype(np.float64))
    theta = rng.uniform(0.0, 2.0 * math.pi, size=times.size)
    d = r + rng.normal(0.0, contour_sigma, size=times.size) if contour_sigma > 0 else r
    ex = np.clip(np.rint(cx + d * np.cos(theta)), 0, geometry.width - 1).astype(np.int64)
    ey = np.clip(np.rint(cy + d * np.sin(theta)), 0, geometry.height - 1).astype(np.int64)
    pol = rng.integers(0, 2, size=times.size)
    contour = [Event(int(t), int(x), int(y), int(p)) for t, x, y, p in zip(times, ex, ey, pol)]

    clutter_t = _poisson_times(clutter_rate, t0, t1, rng)
    kx = rng.integers(0, geometry.width, size=clutter_t.size)
    ky = rng.integers(0, geometry.height, size=clutter_t.size)
    kp = rng.integers(0, 2, size=clutter_t.size)
    clutter = [Event(int(t), int(x), int(y), int(p)) for t, x, y, p in zip(clutter_t, kx, ky, kp)]

    return merge_streams(contour, clutter), list(trajectory)


def _sample_times(duration_us: int, step_us: int = 1000) -> list[int]:
    ts = list(range(0, duration_us, step_us))
    if ts[-1] != duration_us:
        ts.append(duration_us)
    return ts


def static_trajectory(
    cx: float, cy: float, r: float, duration_us: int, step_us: int = 1000
) -> list[GroundTruthSample]:
    return [GroundTruthSample(t, cx, cy, r) for t in _sample_times(duration_us, step_us)]


def linear_trajectory(
    cx: float, cy: float, r: float, vx: float, vy: float, duration_us: int, step_us: int = 1000
) -> list[GroundTruthSample]:
    """Center moves at (vx, vy) pixels per second; radius fixed."""
    return [
        GroundTruthSample(t, cx + vx * t / US, cy + vy * t / US, r)
        for t in _sample_times(duration_us, step_us)
    ]


def circle_orbit_trajectory(
    ox: float,
    oy: float,
    orbit_radius: float,
    r: float,
    speed: float,
    duration_us: int,
    step_us: int = 1000,
) -> list[GroundTruthSample]:
    """Target of radius r orbits (ox, oy) at ``speed`` pixels per second."""
    omega = speed / orbit_radius  # rad/s
    return [
        GroundTruthSample(
            t,
            ox + orbit_radius * math.cos(omega * t / US),
            oy + orbit_radius * math.sin(omega * t / US),
            r,
        )
        for t in _sample_times(duration_us, step_us)
    ]
