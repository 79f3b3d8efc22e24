"""Particle filter core: circle likelihood over an event window, motion
model, weight normalization, systematic resampling, mean state and ROI.

The likelihood of a circle hypothesis over a newest-first event window is
the best prefix sum of per-event contributions (+1 on the contour band,
-penalty in the interior, 0 outside), normalized by the circumference and
clamped to [eps_w, 1].  Maximizing over the prefix length discovers the
best temporal window instead of fixing one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import DEFAULT_GEOMETRY, Event, SensorGeometry


@dataclass(frozen=True, slots=True)
class ParticleState:
    """Circle hypothesis: center (x, y) and radius r, in pixels."""

    x: float
    y: float
    r: float


@dataclass(frozen=True, slots=True)
class Particle:
    state: ParticleState
    weight: float


@dataclass(frozen=True, slots=True)
class RoiSpec:
    """Circular region of interest gating which events reach the particles."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"ROI radius must be > 0, got {self.radius}")

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.radius


@dataclass(frozen=True, slots=True)
class FilterParams:
    sigma_xy: float = 2.0  # motion noise std, pixels
    sigma_r: float = 0.5  # radius noise std, pixels
    band: float = 1.5  # contour band half-width, pixels
    inner_penalty: float = 0.5  # per interior event
    q_trigger: int = 30  # events per update
    w_max: int = 300  # max window length, events
    eps_w: float = 1e-6  # weight floor
    r_min: float = 10.0
    r_max: float = 50.0

    def __post_init__(self) -> None:
        if self.sigma_xy < 0 or self.sigma_r < 0:
            raise ValueError("motion noise must be >= 0")
        if self.band <= 0 or self.eps_w <= 0:
            raise ValueError("band and eps_w must be > 0")
        if self.inner_penalty < 0:
            raise ValueError("inner_penalty must be >= 0")
        if self.q_trigger <= 0 or self.w_max <= 0:
            raise ValueError("q_trigger and w_max must be > 0")
        if self.q_trigger > self.w_max:
            raise ValueError("q_trigger must not exceed w_max")
        if not (0 < self.r_min <= self.r_max):
            raise ValueError("need 0 < r_min <= r_max")


@dataclass(frozen=True, slots=True)
class LikelihoodResult:
    value: float
    best_k: int  # window length that maximized the score; 0 for empty windows


def contour_distance(e: Event, s: ParticleState) -> float:
    """Distance from the event pixel to the hypothesis contour."""
    return abs(math.hypot(e.x - s.x, e.y - s.y) - s.r)


def event_score(e: Event, s: ParticleState, params: FilterParams) -> float:
    """+1 on the contour band, -inner_penalty in the interior, else 0."""
    dc = math.hypot(e.x - s.x, e.y - s.y)
    if abs(dc - s.r) <= params.band:
        return 1.0
    if dc < s.r - params.band:
        return -params.inner_penalty
    return 0.0


def score_events_batch(
    ex: np.ndarray, ey: np.ndarray, xs: np.ndarray, ys: np.ndarray, rs: np.ndarray,
    params: FilterParams,
) -> np.ndarray:
    """Per-event contributions for many states at once, shape (n_states, n_events)."""
    dc = np.hypot(ex[None, :] - xs[:, None], ey[None, :] - ys[:, None])
    rcol = rs[:, None]
    scores = np.zeros_like(dc)
    scores[np.abs(dc - rcol) <= params.band] = 1.0
    scores[dc < rcol - params.band] = -params.inner_penalty
    return scores


def likelihood_batch(
    ex: np.ndarray, ey: np.ndarray, xs: np.ndarray, ys: np.ndarray, rs: np.ndarray,
    params: FilterParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Windowed likelihoods for many states over one newest-first window.

    Returns (values, best_k); single pass via cumulative sums per row.
    """
    n = len(xs)
    if ex.size == 0:
        return np.full(n, params.eps_w), np.zeros(n, dtype=np.int64)
    scores = score_events_batch(ex, ey, xs, ys, rs, params)
    prefix = np.cumsum(scores, axis=1)
    best_k = np.argmax(prefix, axis=1) + 1  # argmax takes the first maximum
    best = prefix[np.arange(n), best_k - 1]
    values = np.clip(best / (2.0 * np.pi * rs), params.eps_w, 1.0)
    return values, best_k


def incremental_likelihood(
    window: Sequence[Event], s: ParticleState, params: FilterParams
) -> LikelihoodResult:
    """Likelihood of state ``s`` over a newest-first event window."""
    if len(window) > params.w_max:
        raise ValueError(f"window length {len(window)} exceeds w_max {params.w_max}")
    if not window:
        return LikelihoodResult(params.eps_w, 0)
    ex = np.fromiter((e.x for e in window), dtype=np.float64, count=len(window))
    ey = np.fromiter((e.y for e in window), dtype=np.float64, count=len(window))
    values, best_k = likelihood_batch(
        ex, ey, np.array([s.x]), np.array([s.y]), np.array([s.r]), params
    )
    return LikelihoodResult(float(values[0]), int(best_k[0]))


def draw_motion_noise(rng: np.random.Generator, params: FilterParams) -> tuple[float, float, float]:
    """Three scaled standard normals; always consumes the same stream length."""
    z = rng.standard_normal(3)
    return z[0] * params.sigma_xy, z[1] * params.sigma_xy, z[2] * params.sigma_r


def apply_motion_model(
    s: ParticleState,
    params: FilterParams,
    rng: np.random.Generator,
    geometry: SensorGeometry = DEFAULT_GEOMETRY,
) -> ParticleState:
    """Constant-position prediction: add Gaussian noise, no velocity term.

    Draws from ``rng`` even when the sigmas are zero, so the stream stays
    aligned across configurations.
    """
    dx, dy, dr = draw_motion_noise(rng, params)
    x = min(max(s.x + dx, 0.0), geometry.width - 1.0)
    y = min(max(s.y + dy, 0.0), geometry.height - 1.0)
    r = min(max(s.r + dr, params.r_min), params.r_max)
    return ParticleState(x, y, r)


def normalize_weights(population: Sequence[Particle], eps_w: float = 1e-6) -> list[Particle]:
    """Divide by the weight sum; all-degenerate populations reset to uniform."""
    if not population:
        return []
    weights = np.array([p.weight for p in population], dtype=np.float64)
    if np.any(weights < 0):
        raise ValueError("weights must be >= 0")
    total = float(np.sum(weights))
    n = len(population)
    if total < n * eps_w:
        return [Particle(p.state, 1.0 / n) for p in population]
    return [Particle(p.state, float(w)) for p, w in zip(population, weights / total)]


def systematic_resample_indices(weights: np.ndarray, u0: float, out_count: int) -> np.ndarray:
    """Stratum points u0 + j/out_count mapped to cumulative-weight intervals."""
    if not (0.0 <= u0 < 1.0 / out_count):
        raise ValueError(f"u0 must lie in [0, 1/{out_count}), got {u0}")
    cum = np.cumsum(weights)
    indices = np.empty(out_count, dtype=np.int64)
    j = 0
    last = len(weights) - 1
    for i in range(out_count):
        point = u0 + i / out_count
        while j < last and not (point < cum[j]):
            j += 1
        indices[i] = j
    return indices


def systematic_resample(
    population: Sequence[Particle], u0: float, out_count: int | None = None
) -> list[Particle]:
    """Resample proportionally to weight using one stratified offset.

    Requires normalized weights; survivors keep their input order and all
    output weights reset to 1/out_count.
    """
    weights = np.array([p.weight for p in population], dtype=np.float64)
    if abs(float(np.sum(weights)) - 1.0) > 1e-6:
        raise ValueError(f"weights not normalized: sum={float(np.sum(weights))!r}")
    count = len(population) if out_count is None else out_count
    indices = systematic_resample_indices(weights, u0, count)
    w = 1.0 / count
    return [Particle(population[int(i)].state, w) for i in indices]


def mean_state(population: Sequence[Particle]) -> ParticleState:
    """Weight-averaged state of a normalized population."""
    if not population:
        raise ValueError("mean_state of empty population")
    weights = np.array([p.weight for p in population], dtype=np.float64)
    x = float(np.dot(weights, [p.state.x for p in population]))
    y = float(np.dot(weights, [p.state.y for p in population]))
    r = float(np.dot(weights, [p.state.r for p in population]))
    return ParticleState(x, y, r)


def compute_roi(mean: ParticleState, roi_gain: float = 2.0, roi_margin: float = 10.0) -> RoiSpec:
    """ROI centered on the estimate, sized to keep the contour inside."""
    return RoiSpec(mean.x, mean.y, roi_gain * mean.r + roi_margin)
