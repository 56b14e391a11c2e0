"""``airhaptics`` command line.

Exit codes: 0 success, 1 validation or input error, 2 usage error. Errors go
to stderr; artifacts are written only on success, each with a
``<out>.manifest.json`` run manifest.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .acoustics import evaluate_pressure, focal_gain, plane_grid, solve_focus_phases
from .compliance import SimLevel, assess_compliance, check_latency_budget, simulate_latency
from .config import (RunManifest, load_array, load_pipeline, load_profile_file, load_rig, parse_hand_trajectory,
                     resolve_input, write_field_map)
from .errors import HapticsError, ValidationError
from .hand import canonical_pose
from .interaction import event_log, run_session
from .modulation import Schedule
from .rig import POWER_MODEL, coverage_map, estimate_power
from .sensations import default_library


def _vector(text: str):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return tuple(parts)


def _plane(text: str):
    axis, _, value = text.partition("=")
    if axis not in ("x", "y", "z") or not value:
        raise argparse.ArgumentTypeError(f"plane must look like z=0.2, got {text!r}")
    try:
        return axis, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad plane offset in {text!r}") from None


def _pair(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, value


def _level(text: str):
    try:
        return SimLevel.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class Run:
    """Collects outputs and manifest data for one invocation."""

    def __init__(self, args):
        params = {k: _plain(v) for k, v in sorted(vars(args).items())
                  if k not in ("func", "command", "out", "manifest", "timestamp")}
        self.manifest = RunManifest(args.command, params)
        if args.timestamp:
            self.manifest.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.args = args
        self.stdout: list[str] = []
        self.files: list[tuple[Path, bytes]] = []

    def input(self, role: str, path: Path):
        self.manifest.add_input(role, path)
        return path

    def note(self, text: str):
        self.manifest.assumptions.append(text)

    def emit(self, data: bytes | str, out: str | None = None, role: str = "output"):
        if isinstance(data, str):
            data = data.encode()
        out = out if out is not None else self.args.out
        if out:
            self.manifest.add_output(role, Path(out).name, data)
            self.files.append((Path(out), data))
        else:
            self.stdout.append(data.decode())

    def finish(self):
        for path, data in self.files:
            path.write_bytes(data)
        manifest_path = self.args.manifest or (f"{self.args.out}.manifest.json" if self.args.out else None)
        if manifest_path:
            Path(manifest_path).write_text(self.manifest.to_json())
        sys.stdout.write("".join(self.stdout))


def _plain(v):
    if isinstance(v, SimLevel):
        return v.value
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    return v


def cmd_field(run: Run):
    a = run.args
    array = load_array(a.array)
    run.input("array", resolve_input(a.array, "array"))
    axis, offset = a.plane
    grid = plane_grid(axis, offset, a.extent, a.n)
    samples = evaluate_pressure(array, solve_focus_phases(array, a.focus), grid.points())
    fmt = a.format or ("pgm" if a.out and a.out.endswith(".pgm") else "csv")
    run.note("pressure in arbitrary units (unit source strength per element); no air absorption")
    run.emit(write_field_map(samples, fmt, grid.counts))


def cmd_gain(run: Run):
    a = run.args
    array = load_array(a.array)
    run.input("array", resolve_input(a.array, "array"))
    run.emit(json.dumps({"focus": list(a.focus), "focal_gain": focal_gain(array, a.focus)}) + "\n")


def _params(pairs):
    out = {}
    for k, v in pairs or ():
        try:
            out[k] = float(v)
        except ValueError:
            raise ValidationError(f"parameter {k} must be numeric") from None
    return out


def cmd_sensation(run: Run):
    a = run.args
    if a.trajectory:
        path = run.input("trajectory", resolve_input(a.trajectory, "trajectory"))
        with open(path, newline="") as fh:
            poses = parse_hand_trajectory(fh)
        if not poses:
            raise ValidationError("trajectory has no poses")
        hand = poses[0]
    else:
        hand = canonical_pose()
        run.note("hand: canonical open right hand, palm down at (0, 0, 0.2)")
    inst = default_library().instantiate(a.name, _params(a.param), hand)
    duration = a.duration_us
    if duration is None:
        duration = inst.scheme.duration_us if inst.is_burst and inst.scheme.duration_us else 10_000
    run.emit(inst.schedule(duration, a.rate).to_jsonl())


def cmd_session(run: Run):
    a = run.args
    profile = load_profile_file(a.profile)
    run.input("profile", resolve_input(a.profile, "profile"))
    rig = load_rig(a.rig)
    run.input("rig", resolve_input(a.rig, "rig"))
    path = run.input("trajectory", resolve_input(a.trajectory, "trajectory"))
    with open(path, newline="") as fh:
        poses = parse_hand_trajectory(fh)
    switches = []
    for t, name in a.switch or ():
        try:
            t_us = int(t)
        except ValueError:
            raise ValidationError(f"switch time must be an integer of microseconds, got {t!r}") from None
        switches.append((t_us, load_profile_file(name)))
        run.input(f"switch@{t_us}", resolve_input(name, "profile"))
    events = run_session(profile, rig, poses, a.rate, switches=switches)
    run.note("pose frames held constant until the next frame; click bursts fire on contact onset")
    run.emit(event_log(events))


def cmd_coverage(run: Run):
    a = run.args
    rig = load_rig(a.rig)
    run.input("rig", resolve_input(a.rig, "rig"))
    cov = coverage_map(rig, a.voxel)
    run.note("reach: distance <= max_range and off-boresight angle <= half of the 90 degree cone, inclusive")
    run.emit(cov.to_csv())
    summary = json.dumps(cov.summary(), indent=2) + "\n"
    if a.summary:
        run.emit(summary, a.summary, "summary")
    elif a.out:
        run.stdout.append(summary)


def cmd_power(run: Run):
    a = run.args
    rig = load_rig(a.rig)
    run.input("rig", resolve_input(a.rig, "rig"))
    schedules = {}
    if a.events:
        path = run.input("events", Path(a.events))
        columns: dict[str, list] = {}
        for n, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                columns.setdefault(rec["device"], []).append(float(rec["envelope"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValidationError(f"bad event on line {n}: {exc}") from None
        for dev, env in columns.items():
            if dev in rig.device_ids:
                spacing = round(1e6 / a.rate)
                schedules[dev] = Schedule([i * spacing for i in range(len(env))], [(0, 0, 0)] * len(env), env, a.rate)
    for dev, name in a.schedule or ():
        path = run.input(f"schedule:{dev}", Path(name))
        schedules[dev] = Schedule.from_jsonl(path.read_text().splitlines(), a.rate)
    watts = estimate_power(rig, schedules)
    run.note(POWER_MODEL)
    run.emit(json.dumps({"mean_power_w": watts, "model": POWER_MODEL}, indent=2) + "\n")


def cmd_latency(run: Run):
    a = run.args
    pipeline = load_pipeline(a.pipeline)
    run.input("pipeline", resolve_input(a.pipeline, "pipeline"))
    breakdown = simulate_latency(pipeline, a.distance)
    out = breakdown.to_dict()
    if a.level is not None:
        out["finding"] = check_latency_budget(breakdown.total_us, a.level).to_dict()
        out["level"] = a.level.value
    run.emit(json.dumps(out, indent=2) + "\n")


def cmd_compliance(run: Run):
    a = run.args
    profile = load_profile_file(a.profile)
    run.input("profile", resolve_input(a.profile, "profile"))
    measured = None
    if a.latency_us is not None:
        measured = a.latency_us
    elif a.pipeline:
        run.input("pipeline", resolve_input(a.pipeline, "pipeline"))
        measured = simulate_latency(load_pipeline(a.pipeline), a.distance)
    report = assess_compliance(profile, a.level, measured)
    run.emit(report.to_text(a.color) if a.format == "text" else report.to_json())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="airhaptics", description="Mid-air haptic cockpit simulation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--manifest", help="manifest path (default: OUT.manifest.json)")
        sp.add_argument("--timestamp", action="store_true", help="record wall-clock time in the manifest")
        return sp

    sp = add("field", cmd_field, "focus the array and sample |p| over a square plane")
    sp.add_argument("--array", default="default")
    sp.add_argument("--focus", type=_vector, required=True, help="x,y,z in metres")
    sp.add_argument("--plane", type=_plane, required=True, help="e.g. z=0.2")
    sp.add_argument("--extent", type=float, default=0.2, help="side length in metres")
    sp.add_argument("--n", type=int, default=64, help="samples per side")
    sp.add_argument("--format", choices=("csv", "pgm"))

    sp = add("gain", cmd_gain, "focal gain of the array at a point")
    sp.add_argument("--array", default="default")
    sp.add_argument("--focus", type=_vector, required=True)

    sp = add("sensation", cmd_sensation, "expand a named sensation into a JSON-lines schedule")
    sp.add_argument("--name", required=True)
    sp.add_argument("--param", type=_pair, action="append", metavar="KEY=VALUE")
    sp.add_argument("--trajectory", help="take the hand from the first pose of this CSV")
    sp.add_argument("--duration-us", type=int)
    sp.add_argument("--rate", type=float, default=40_000)

    sp = add("session", cmd_session, "replay a hand trajectory and write the haptic event log")
    sp.add_argument("--profile", default="default")
    sp.add_argument("--rig", default="default")
    sp.add_argument("--trajectory", default="default")
    sp.add_argument("--rate", type=float, default=40_000)
    sp.add_argument("--switch", type=_pair, action="append", metavar="T_US=PROFILE")

    sp = add("coverage", cmd_coverage, "per-voxel device coverage of the rig's interaction volume")
    sp.add_argument("--rig", default="default")
    sp.add_argument("--voxel", type=float, default=0.01)
    sp.add_argument("--summary", help="write the JSON summary here")

    sp = add("power", cmd_power, "mean electrical power per device")
    sp.add_argument("--rig", default="default")
    sp.add_argument("--events", help="event log from the session command")
    sp.add_argument("--schedule", type=_pair, action="append", metavar="DEVICE=FILE")
    sp.add_argument("--rate", type=float, default=40_000)

    sp = add("latency", cmd_latency, "stage-delay latency model, optionally checked against a level budget")
    sp.add_argument("--pipeline", default="default")
    sp.add_argument("--distance", type=float, default=0.2, help="focal distance in metres")
    sp.add_argument("--level", type=_level)

    sp = add("compliance", cmd_compliance, "FAA FTD/FFS screening report for a cockpit profile")
    sp.add_argument("--profile", default="default")
    sp.add_argument("--level", type=_level, required=True)
    sp.add_argument("--latency-us", type=int)
    sp.add_argument("--pipeline")
    sp.add_argument("--distance", type=float, default=0.2)
    sp.add_argument("--format", choices=("json", "text"), default="json")
    sp.add_argument("--color", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        run = Run(args)
        args.func(run)
        run.finish()
    except HapticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
