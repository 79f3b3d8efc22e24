"""Event-driven particle-filter circle tracking on a simulated many-core
vertex graph, with a latency model for update-rate scaling studies."""

__version__ = "0.1.0"

from .events import Event, EventFormatError, GroundTruthSample, SensorGeometry
from .filter import FilterParams, Particle, ParticleState, RoiSpec
from .graph import (
    LatencyModel,
    OutputPacket,
    SimConfig,
    SimStats,
    run_cpu_baseline,
    run_simulation,
)
from .metrics import TrackError, compute_tracking_error, compute_update_rate, scaling_experiment

__all__ = [
    "Event",
    "EventFormatError",
    "GroundTruthSample",
    "SensorGeometry",
    "FilterParams",
    "Particle",
    "ParticleState",
    "RoiSpec",
    "LatencyModel",
    "OutputPacket",
    "SimConfig",
    "SimStats",
    "run_cpu_baseline",
    "run_simulation",
    "TrackError",
    "compute_tracking_error",
    "compute_update_rate",
    "scaling_experiment",
    "__version__",
]
