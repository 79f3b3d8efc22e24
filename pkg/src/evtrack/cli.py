"""Command-line entry point: synth, track, eval, bench.

Every run writes a manifest (resolved configuration, input digests, tool
version) next to its outputs; re-running from the manifest reproduces the
outputs byte-identically.  A flat key=value config file can seed any
command's options, with explicit flags taking precedence.

Exit codes: 0 success, 1 I/O or parse failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .events import (
    DEFAULT_GEOMETRY,
    Event,
    EventFormatError,
    GroundTruthSample,
    SensorGeometry,
    read_event_stream,
    read_truth_csv,
    write_event_stream,
    write_truth_csv,
)
from .filter import FilterParams, ParticleState
from .graph import (
    InitialPrior,
    LatencyModel,
    OutputPacket,
    SimConfig,
    run_cpu_baseline,
    run_simulation,
)
from .metrics import ScalingReport, center_error_series, compute_tracking_error, scaling_experiment
from .render import plot_error_timeline, plot_scaling, render_track_frames
from .synth import circle_orbit_trajectory, generate_circle_events, linear_trajectory, static_trajectory

TRACK_HEADER = "t_us,x,y,r"


class ConfigError(ValueError):
    """Bad configuration value or unknown config key."""


# ---------------------------------------------------------------------------
# Option plumbing: defaults live here; config file and manifest provide
# overrides below the command line.
# ---------------------------------------------------------------------------

SIM_DEFAULTS = {
    "n": 100,
    "h": 8,
    "mode": "graph",
    "engine": "fast",
    "seed": 0,
    "q_trigger": 30,
    "band": 1.5,
    "sigma_xy": 2.0,
    "sigma_r": 0.5,
    "inner_penalty": 0.5,
    "w_max": 300,
    "eps_w": 1e-6,
    "r_min": 10.0,
    "r_max": 50.0,
    "t_particle_hop": 4.6,
    "t_event_hop": 1.0,
    "t_score_per_event": 0.2,
    "t_cpu_overhead": 1.0,
    "roi_gain": 2.0,
    "roi_margin": 10.0,
    "width": DEFAULT_GEOMETRY.width,
    "height": DEFAULT_GEOMETRY.height,
    "init": "uniform",
}

SYNTH_DEFAULTS = {
    "traj": "static",
    "dur_ms": 1000.0,
    "step_ms": 1.0,
    "seed": 0,
    "event_rate": 40.0,
    "clutter_hz": 0.0,
    "contour_sigma": 1.0,
    "r": 20.0,
    "cx": None,
    "cy": None,
    "vx": 50.0,
    "vy": 0.0,
    "speed": 100.0,
    "orbit_radius": 60.0,
    "width": DEFAULT_GEOMETRY.width,
    "height": DEFAULT_GEOMETRY.height,
    "format": "csv",
}

_TYPES = {
    "n": int, "h": int, "seed": int, "q_trigger": int, "w_max": int,
    "width": int, "height": int,
    "mode": str, "engine": str, "init": str, "traj": str, "format": str,
    "events_file": str, "track_file": str, "truth_file": str, "n_list": str,
}


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    return _TYPES.get(key, float)(value)


def _read_config_file(path: str, allowed: set[str]) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"config line {raw!r} is not key=value")
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def _resolve_options(args: argparse.Namespace, defaults: dict, extra_keys: Sequence[str] = ()) -> dict:
    """defaults < manifest < config file < explicit CLI flags."""
    allowed = set(defaults) | set(extra_keys)
    resolved = dict(defaults)
    if getattr(args, "from_manifest", None):
        manifest = json.loads(Path(args.from_manifest).read_text())
        for key, value in manifest.get("config", {}).items():
            if key in allowed:
                resolved[key] = _coerce(key, value)
    if getattr(args, "config", None):
        resolved.update(_read_config_file(args.config, allowed))
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _parse_init(spec: str) -> InitialPrior:
    if spec == "uniform":
        return InitialPrior()
    parts = [float(p) for p in spec.split(",")]
    if len(parts) < 3 or len(parts) > 5:
        raise ConfigError(f"--init expects 'uniform' or 'cx,cy,r[,spread_xy[,spread_r]]', got {spec!r}")
    cx, cy, r = parts[:3]
    spread_xy = parts[3] if len(parts) > 3 else 10.0
    spread_r = parts[4] if len(parts) > 4 else 5.0
    return InitialPrior("state", cx, cy, r, spread_xy, spread_r)


def _sim_config(opts: dict) -> SimConfig:
    params = FilterParams(
        sigma_xy=opts["sigma_xy"],
        sigma_r=opts["sigma_r"],
        band=opts["band"],
        inner_penalty=opts["inner_penalty"],
        q_trigger=opts["q_trigger"],
        w_max=opts["w_max"],
        eps_w=opts["eps_w"],
        r_min=opts["r_min"],
        r_max=opts["r_max"],
    )
    latency = LatencyModel(
        t_particle_hop=opts["t_particle_hop"],
        t_event_hop=opts["t_event_hop"],
        t_score_per_event=opts["t_score_per_event"],
        t_cpu_overhead=opts["t_cpu_overhead"],
    )
    return SimConfig(
        n=opts["n"],
        h=opts["h"],
        params=params,
        latency=latency,
        geometry=SensorGeometry(opts["width"], opts["height"]),
        seed=opts["seed"],
        init=_parse_init(opts["init"]),
        mode=opts["mode"],
        roi_gain=opts["roi_gain"],
        roi_margin=opts["roi_margin"],
    )


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def _write_manifest(path: Path, command: str, opts: dict, inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
    manifest = {
        "tool": "evtrack",
        "version": __version__,
        "command": command,
        "config": {k: opts[k] for k in sorted(opts)},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_events(path: Path, fmt: str | None, geometry: SensorGeometry) -> list[Event]:
    if fmt is None:
        fmt = "bin" if path.suffix == ".bin" else "csv"
    with open(path, "rb") as f:
        return list(read_event_stream(f, fmt, geometry))


def _write_track(path: Path, track: Sequence[OutputPacket]) -> None:
    with open(path, "w") as f:
        f.write(TRACK_HEADER + "\n")
        for o in track:
            f.write(f"{o.t_us:.6f},{o.state.x:.6f},{o.state.y:.6f},{o.state.r:.6f}\n")


def _read_track(path: Path) -> list[OutputPacket]:
    rows: list[OutputPacket] = []
    for index, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise EventFormatError(f"expected 4 fields in track line {line!r}")
        try:
            t, x, y, r = (float(v) for v in fields)
        except ValueError:
            if index == 0:
                continue  # header
            raise EventFormatError(f"non-numeric field in track line {line!r}") from None
        rows.append(OutputPacket(ParticleState(x, y, r), t, len(rows)))
    return rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _build_trajectory(opts: dict, geometry: SensorGeometry) -> list[GroundTruthSample]:
    cx = opts["cx"] if opts["cx"] is not None else geometry.width / 2.0
    cy = opts["cy"] if opts["cy"] is not None else geometry.height / 2.0
    duration_us = int(round(opts["dur_ms"] * 1000))
    step_us = max(1, int(round(opts["step_ms"] * 1000)))
    if duration_us <= 0:
        raise ConfigError("--dur-ms must be > 0")
    traj = opts["traj"]
    if traj == "static":
        return static_trajectory(cx, cy, opts["r"], duration_us, step_us)
    if traj == "linear":
        return linear_trajectory(cx, cy, opts["r"], opts["vx"], opts["vy"], duration_us, step_us)
    if traj == "circle-orbit":
        return circle_orbit_trajectory(
            cx, cy, opts["orbit_radius"], opts["r"], opts["speed"], duration_us, step_us
        )
    raise ConfigError(f"unknown trajectory {traj!r}")


def cmd_synth(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, SYNTH_DEFAULTS)
    geometry = SensorGeometry(opts["width"], opts["height"])
    trajectory = _build_trajectory(opts, geometry)
    events, truth = generate_circle_events(
        trajectory,
        event_rate=opts["event_rate"],
        contour_sigma=opts["contour_sigma"],
        clutter_rate=opts["clutter_hz"],
        geometry=geometry,
        seed=opts["seed"],
    )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    fmt = opts["format"]
    if fmt not in ("csv", "bin"):
        raise ConfigError(f"unknown event format {fmt!r}")
    events_path = prefix.with_name(prefix.name + f".events.{fmt}")
    truth_path = prefix.with_name(prefix.name + ".truth.csv")
    with open(events_path, "wb") as f:
        write_event_stream(events, f, fmt)
    with open(truth_path, "wb") as f:
        write_truth_csv(truth, f)
    manifest_path = prefix.with_name(prefix.name + ".manifest.json")
    _write_manifest(manifest_path, "synth", opts, [], [events_path, truth_path])
    print(f"wrote {events_path} ({len(events)} events), {truth_path}, {manifest_path}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, SIM_DEFAULTS, extra_keys=["events_file", "format"])
    if args.events is not None:
        opts["events_file"] = args.events
    if opts.get("events_file") is None:
        raise ConfigError("no event file given (positional argument or manifest)")
    opts["frame_period_ms"] = args.frame_period_ms
    config = _sim_config(opts)
    events_path = Path(opts["events_file"])
    events = _load_events(events_path, opts.get("format"), config.geometry)

    if config.mode == "cpu":
        track, stats = run_cpu_baseline(config, events)
    else:
        track, stats = run_simulation(config, events, engine=opts["engine"])

    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    track_path = prefix.with_name(prefix.name + ".track.csv")
    stats_path = prefix.with_name(prefix.name + ".stats.txt")
    _write_track(track_path, track)
    stats_path.write_text(stats.to_text())
    outputs = [track_path, stats_path]
    if args.render_dir:
        frame_period_us = int(round(opts.get("frame_period_ms", args.frame_period_ms) * 1000))
        frames = render_track_frames(
            Path(args.render_dir), config.geometry, events, track, frame_period_us
        )
        outputs.extend(frames)
    manifest_path = prefix.with_name(prefix.name + ".manifest.json")
    _write_manifest(manifest_path, "track", opts, [events_path], outputs[:2])
    print(f"wrote {track_path} ({len(track)} outputs), {stats_path}, {manifest_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    track_path = Path(args.track)
    truth_path = Path(args.truth)
    track = _read_track(track_path)
    with open(truth_path, "rb") as f:
        truth = read_truth_csv(f)
    if not track or not truth:
        raise EventFormatError("track and truth must be non-empty")
    err = compute_tracking_error(track, truth, args.lost_threshold, args.settle_frac)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(err.CSV_HEADER + "\n" + err.to_csv_row() + "\n")
    fig_path = out_path.with_suffix(".png")
    ts, series = center_error_series(track, truth)
    plot_error_timeline(ts, series, args.lost_threshold, fig_path)
    manifest_path = out_path.with_suffix(".manifest.json")
    opts = {
        "track_file": str(track_path),
        "truth_file": str(truth_path),
        "lost_threshold": args.lost_threshold,
        "settle_frac": args.settle_frac,
    }
    _write_manifest(manifest_path, "eval", opts, [track_path, truth_path], [out_path, fig_path])
    print(err.CSV_HEADER)
    print(err.to_csv_row())
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    opts = _resolve_options(args, SIM_DEFAULTS, extra_keys=["events_file", "format", "n_list"])
    if args.events is not None:
        opts["events_file"] = args.events
    if opts.get("events_file") is None:
        raise ConfigError("no event file given (positional argument or manifest)")
    if opts.get("n_list") is None:
        raise ConfigError("--n is required (comma-separated particle counts)")
    try:
        n_values = [int(v) for v in str(opts["n_list"]).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --n list {opts['n_list']!r}") from None
    if not n_values or n_values != sorted(n_values):
        raise ConfigError("--n must be a non-empty ascending list")
    config = _sim_config(opts)
    events_path = Path(opts["events_file"])
    events = _load_events(events_path, opts.get("format"), config.geometry)
    report = scaling_experiment(config, n_values, events)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_csv())
    fig_path = out_path.with_suffix(".png")
    plot_scaling(report, fig_path)
    manifest_path = out_path.with_suffix(".manifest.json")
    _write_manifest(manifest_path, "bench", opts, [events_path], [out_path, fig_path])
    print(report.to_csv(), end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_sim_flags(p: argparse.ArgumentParser, include_n: bool = True) -> None:
    if include_n:
        p.add_argument("--n", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--q-trigger", type=int, dest="q_trigger")
    p.add_argument("--band", type=float)
    p.add_argument("--sigma-xy", type=float, dest="sigma_xy")
    p.add_argument("--sigma-r", type=float, dest="sigma_r")
    p.add_argument("--inner-penalty", type=float, dest="inner_penalty")
    p.add_argument("--w-max", type=int, dest="w_max")
    p.add_argument("--eps-w", type=float, dest="eps_w")
    p.add_argument("--r-min", type=float, dest="r_min")
    p.add_argument("--r-max", type=float, dest="r_max")
    p.add_argument("--t-particle-hop", type=float, dest="t_particle_hop")
    p.add_argument("--t-event-hop", type=float, dest="t_event_hop")
    p.add_argument("--t-score-per-event", type=float, dest="t_score_per_event")
    p.add_argument("--t-cpu-overhead", type=float, dest="t_cpu_overhead")
    p.add_argument("--roi-gain", type=float, dest="roi_gain")
    p.add_argument("--roi-margin", type=float, dest="roi_margin")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--init", help="'uniform' or 'cx,cy,r[,spread_xy[,spread_r]]'")
    p.add_argument("--engine", choices=["fast", "reference"])
    p.add_argument("--format", choices=["csv", "bin"])
    p.add_argument("--config", help="flat key=value config file; flags override")
    p.add_argument("--from-manifest", dest="from_manifest", help="re-run from a manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtrack", description=__doc__)
    parser.add_argument("--version", action="version", version=f"evtrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic event stream with ground truth")
    p.add_argument("--traj", choices=["static", "linear", "circle-orbit"])
    p.add_argument("--dur-ms", type=float, dest="dur_ms")
    p.add_argument("--step-ms", type=float, dest="step_ms")
    p.add_argument("--seed", type=int)
    p.add_argument("--event-rate", type=float, dest="event_rate",
                   help="contour events per pixel of contour per second")
    p.add_argument("--clutter-hz", type=float, dest="clutter_hz")
    p.add_argument("--contour-sigma", type=float, dest="contour_sigma")
    p.add_argument("--r", type=float)
    p.add_argument("--cx", type=float)
    p.add_argument("--cy", type=float)
    p.add_argument("--vx", type=float)
    p.add_argument("--vy", type=float)
    p.add_argument("--speed", type=float)
    p.add_argument("--orbit-radius", type=float, dest="orbit_radius")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--format", choices=["csv", "bin"])
    p.add_argument("--out-prefix", dest="out_prefix", default="synth")
    p.add_argument("--config")
    p.add_argument("--from-manifest", dest="from_manifest")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="run the tracker over an event file")
    p.add_argument("events", nargs="?", help="event file (csv or bin)")
    p.add_argument("--mode", choices=["graph", "cpu"])
    _add_sim_flags(p)
    p.add_argument("--out-prefix", dest="out_prefix", default="run")
    p.add_argument("--render-dir", dest="render_dir")
    p.add_argument("--frame-period-ms", type=float, dest="frame_period_ms", default=10.0)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a track against ground truth")
    p.add_argument("track")
    p.add_argument("truth")
    p.add_argument("--lost-threshold", type=float, dest="lost_threshold", default=20.0)
    p.add_argument("--settle-frac", type=float, dest="settle_frac", default=0.1)
    p.add_argument("--out", default="error.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="particle-count scaling experiment (graph vs cpu)")
    p.add_argument("events", nargs="?", help="event file (csv or bin)")
    p.add_argument("--n", dest="n_list", help="comma-separated ascending particle counts")
    _add_sim_flags(p, include_n=False)
    p.add_argument("--out", default="scaling.csv")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EventFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
