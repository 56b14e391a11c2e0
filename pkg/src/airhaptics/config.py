"""Config documents, file formats and run manifests.

Configs are versioned JSON (``schema_version: 1``) with unknown fields
rejected. Bulk numeric output is CSV, streams are JSON lines. Nothing
written here carries wall-clock time or absolute paths unless asked to.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from ._doc import Reader
from .acoustics import (DEFAULT_FREQUENCY, DEFAULT_PISTON_RADIUS, DEFAULT_PITCH, DEFAULT_SPEED_OF_SOUND,
                        PressureSample, Transducer, TransducerArray, default_array, grid_array)
from .compliance import LatencyPipeline
from .errors import ConfigError, ParseError, ValidationError
from .hand import HandPose
from .interaction import CockpitProfile, load_profile
from .rig import Box, Device, DevicePose, DeviceSpec, RigConfig

ASSET_ENV = "AIRHAPTICS_ASSETS"
BUNDLED = {
    "array": "default_array.json",
    "rig": "quad_rig.json",
    "profile": "a320_profile.json",
    "pipeline": "pipeline_default.json",
    "trajectory": "demo_trajectory.csv",
}


def asset_dir() -> Path:
    override = os.environ.get(ASSET_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("airhaptics") / "assets"))


def resolve_input(value: str, kind: str) -> Path:
    """A file path, ``default`` for the bundled asset, or a bundled file stem.

    ``a320`` finds ``a320_profile.json``; ``quad`` finds ``quad_rig.json``.
    """
    p = Path(value)
    if p.is_file():
        return p
    base = asset_dir()
    ext = ".csv" if kind == "trajectory" else ".json"
    names = [BUNDLED[kind]] if value == "default" else [value, value + ext, f"{value}_{kind}{ext}",
                                                          f"{p.stem}_{kind}{ext}"]
    for name in names:
        cand = base / name
        if cand.is_file():
            return cand
    raise ValidationError(f"cannot find {kind} {value!r} (looked for a file and in {base})")


def read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"], Path(path).name) from None


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# --- arrays ----------------------------------------------------------------

ARRAY_KEYS = {"carrier_frequency", "speed_of_sound", "directivity_mode", "grid", "elements"}
GRID_KEYS = {"nx", "ny", "pitch", "piston_radius", "drive_amplitude"}
ELEMENT_KEYS = {"position", "normal", "drive_amplitude", "piston_radius"}


def array_from_document(doc: Mapping, source: str = "array") -> TransducerArray:
    rd = Reader(source)
    d = rd.obj(doc, "array", required={"schema_version"}, optional=ARRAY_KEYS | {"kind"})
    if d is None:
        rd.fail()
    rd.version(d)
    rd.kind(d, "array")
    arr = _array_body(rd, d, "array")
    rd.fail_if_problems()
    return arr


def _array_body(rd: Reader, d: Mapping, where: str):
    freq = rd.number(d, "carrier_frequency", where, DEFAULT_FREQUENCY, positive=True)
    c = rd.number(d, "speed_of_sound", where, DEFAULT_SPEED_OF_SOUND, positive=True)
    mode = d.get("directivity_mode", "piston")
    if mode not in ("piston", "omnidirectional"):
        rd.problem(f"{where}.directivity_mode: must be piston or omnidirectional")
    if ("grid" in d) == ("elements" in d):
        rd.problem(f"{where}: give exactly one of 'grid' or 'elements'")
        return None
    if "grid" in d:
        g = rd.obj(d["grid"], where + ".grid", required={"nx", "ny"}, optional=GRID_KEYS)
        if g is None:
            return None
        nx, ny = rd.integer(g, "nx", where + ".grid"), rd.integer(g, "ny", where + ".grid")
        pitch = rd.number(g, "pitch", where + ".grid", DEFAULT_PITCH, positive=True)
        radius = rd.number(g, "piston_radius", where + ".grid", DEFAULT_PISTON_RADIUS, positive=True)
        amp = rd.number(g, "drive_amplitude", where + ".grid", 1.0, lo=0.0, hi=1.0)
        if rd.problems:
            return None
        with rd.guard(where):
            return grid_array(nx, ny, pitch, radius, amp, freq, c, mode)
        return None
    elements = []
    for i, e in enumerate(rd.array(d, "elements", where)):
        w = f"{where}.elements[{i}]"
        e = rd.obj(e, w, required={"position"}, optional=ELEMENT_KEYS)
        if e is None:
            continue
        with rd.guard(w):
            elements.append(Transducer(rd.vector(e, "position", w), tuple(e.get("normal", (0.0, 0.0, 1.0))),
                                       float(e.get("drive_amplitude", 1.0)),
                                       float(e.get("piston_radius", DEFAULT_PISTON_RADIUS))))
    if rd.problems:
        return None
    with rd.guard(where):
        return TransducerArray(tuple(elements), freq, c, mode)
    return None


def array_to_document(array: TransducerArray, versioned: bool = True) -> dict:
    doc = {"schema_version": 1, "kind": "array"} if versioned else {}
    doc.update({
        "carrier_frequency": array.carrier_frequency,
        "speed_of_sound": array.speed_of_sound,
        "directivity_mode": array.directivity_mode,
        "elements": [{"position": list(e.position), "normal": list(e.normal),
                      "drive_amplitude": e.drive_amplitude, "piston_radius": e.piston_radius}
                     for e in array.elements],
    })
    return doc


# --- rigs ------------------------------------------------------------------

DEVICE_KEYS = {"id", "array", "max_range", "cone_half_angle_deg", "peak_power_w", "rotation", "translation"}


def rig_from_document(doc: Mapping, source: str = "rig") -> RigConfig:
    rd = Reader(source)
    d = rd.obj(doc, "rig", required={"schema_version", "devices", "volume"}, optional={"kind"})
    if d is None:
        rd.fail()
    rd.version(d)
    rd.kind(d, "rig")
    vol = rd.obj(d["volume"], "rig.volume", required={"min", "max"})
    box = None
    if vol is not None:
        lo, hi = rd.vector(vol, "min", "rig.volume"), rd.vector(vol, "max", "rig.volume")
        if any(h < l for l, h in zip(lo, hi)):
            rd.problem("rig.volume: max must not be below min")
        box = Box(lo, hi)
    devices = []
    for i, dev in enumerate(rd.array(d, "devices", "rig")):
        w = f"rig.devices[{i}]"
        dev = rd.obj(dev, w, required={"id", "translation"}, optional=DEVICE_KEYS)
        if dev is None:
            continue
        arr_doc = dev.get("array", "default")
        if arr_doc == "default":
            array = default_array()
        else:
            inner = rd.obj(arr_doc, w + ".array", optional=ARRAY_KEYS)
            array = _array_body(rd, inner, w + ".array") if inner is not None else None
        with rd.guard(w):
            spec = DeviceSpec(array,
                              rd.number(dev, "max_range", w, 0.7, positive=True),
                              math.radians(rd.number(dev, "cone_half_angle_deg", w, 45.0)),
                              rd.number(dev, "peak_power_w", w, 80.0))
            pose = DevicePose(str(dev["id"]), dev.get("rotation", np.eye(3).tolist()),
                              rd.vector(dev, "translation", w))
            devices.append(Device(spec, pose))
    rd.fail_if_problems()
    try:
        return RigConfig(tuple(devices), box)
    except ValidationError as exc:
        raise ConfigError([str(exc)], source) from None


def rig_to_document(rig: RigConfig) -> dict:
    devices = []
    base = default_array()
    for dev in rig.devices:
        s = dev.spec
        devices.append({
            "id": dev.device_id,
            "array": "default" if s.array == base else array_to_document(s.array, versioned=False),
            "max_range": s.max_range,
            "cone_half_angle_deg": math.degrees(s.cone_half_angle),
            "peak_power_w": s.peak_power,
            "rotation": [list(r) for r in dev.pose.rotation],
            "translation": list(dev.pose.translation),
        })
    return {"schema_version": 1, "kind": "rig",
            "volume": {"min": list(rig.volume.lo), "max": list(rig.volume.hi)},
            "devices": devices}


# --- latency pipelines -----------------------------------------------------

def pipeline_from_document(doc: Mapping, source: str = "pipeline") -> LatencyPipeline:
    rd = Reader(source)
    d = rd.obj(doc, "pipeline", required={"schema_version", "stages"}, optional={"kind", "speed_of_sound"})
    if d is None:
        rd.fail()
    rd.version(d)
    rd.kind(d, "pipeline")
    c = rd.number(d, "speed_of_sound", "pipeline", 346.0, positive=True)
    stages = []
    for i, s in enumerate(rd.array(d, "stages", "pipeline")):
        w = f"pipeline.stages[{i}]"
        s = rd.obj(s, w, required={"name", "delay_us"})
        if s is not None:
            stages.append((rd.string(s, "name", w), rd.integer(s, "delay_us", w)))
    rd.fail_if_problems()
    try:
        return LatencyPipeline(tuple(stages), c)
    except ValidationError as exc:
        raise ConfigError([str(exc)], source) from None


def pipeline_to_document(p: LatencyPipeline) -> dict:
    return {"schema_version": 1, "kind": "pipeline", "speed_of_sound": p.speed_of_sound,
            "stages": [{"name": n, "delay_us": d} for n, d in p.stages]}


def load_array(value: str) -> TransducerArray:
    path = resolve_input(value, "array")
    return array_from_document(read_json(path), path.name)


def load_rig(value: str) -> RigConfig:
    path = resolve_input(value, "rig")
    return rig_from_document(read_json(path), path.name)


def load_profile_file(value: str, library=None) -> CockpitProfile:
    path = resolve_input(value, "profile")
    return load_profile(read_json(path), library, path.name)


def load_pipeline(value: str) -> LatencyPipeline:
    path = resolve_input(value, "pipeline")
    return pipeline_from_document(read_json(path), path.name)


# --- hand trajectories -----------------------------------------------------

TRAJECTORY_COLUMNS = (
    ["t_us"]
    + [f"{name}_{ax}" for name in ("palm", "normal", "lateral", "thumb", "index", "middle", "ring", "little")
       for ax in "xyz"]
)
UNIT_SLACK = 1e-3


def parse_hand_trajectory(stream) -> list[HandPose]:
    """Read poses from CSV. Row numbers in errors count the header as row 1."""
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty trajectory file", 1)
    if [h.strip() for h in header] != TRAJECTORY_COLUMNS:
        raise ParseError(f"header must be {','.join(TRAJECTORY_COLUMNS)}", 1)
    poses: list[HandPose] = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(TRAJECTORY_COLUMNS):
            raise ParseError(f"expected {len(TRAJECTORY_COLUMNS)} columns, got {len(row)}", row_no)
        try:
            t = int(row[0])
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise ParseError("malformed number", row_no) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", row_no)
        if poses and t <= poses[-1].t:
            raise ParseError("non-increasing timestamp", row_no)
        v = np.asarray(vals).reshape(8, 3)
        normal, lateral = _unit(v[1], "palm normal", row_no), _unit(v[2], "lateral axis", row_no)
        d = float(normal @ lateral)
        if abs(d) > UNIT_SLACK:
            raise ParseError("lateral axis not orthogonal to palm normal", row_no)
        lateral = _unit(lateral - d * normal, "lateral axis", row_no)
        try:
            poses.append(HandPose(t, tuple(v[0]), tuple(normal), tuple(lateral), tuple(tuple(p) for p in v[3:])))
        except ValidationError as exc:
            raise ParseError(str(exc), row_no) from None
    return poses


def _unit(v: np.ndarray, what: str, row_no: int) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > UNIT_SLACK:
        raise ParseError(f"{what} has length {n:.6g}, not unit", row_no)
    return v / n


def write_hand_trajectory(poses: Iterable[HandPose]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for p in poses:
        vals = [*p.palm_center, *p.palm_normal, *p.lateral_axis, *(c for tip in p.tips for c in tip)]
        w.writerow([p.t] + [repr(float(x)) for x in vals])
    return out.getvalue()


# --- field maps ------------------------------------------------------------

def write_field_map(samples: Sequence[PressureSample], fmt: str = "csv", shape: tuple[int, int] | None = None) -> bytes:
    """CSV (x,y,z,re,im,abs at 9 significant digits) or binary 8-bit PGM.

    PGM pixels scale magnitudes so the largest maps to 255. ``shape`` is
    (width, height) with the first grid axis along the rows; it defaults to
    a single row.
    """
    if not samples:
        raise ValidationError("no samples to write")
    if fmt == "csv":
        lines = ["x,y,z,re,im,abs"]
        for s in samples:
            p = s.pressure
            lines.append(",".join(f"{v:.9g}" for v in (*s.point, p.real, p.imag, abs(p))))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "pgm":
        w, h = shape if shape is not None else (len(samples), 1)
        if w * h != len(samples):
            raise ValidationError(f"shape {w}x{h} does not match {len(samples)} samples")
        mag = np.abs(np.asarray([s.pressure for s in samples]))
        top = mag.max()
        pix = np.zeros(len(mag), np.uint8) if top == 0 else np.floor(255 * mag / top + 0.5).astype(np.uint8)
        return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()
    raise ValidationError(f"unknown field map format {fmt!r}")


def read_pgm(data: bytes) -> tuple[int, int, np.ndarray]:
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValidationError("not an 8-bit binary PGM")
    w, h = (int(x) for x in dims.split())
    return w, h, np.frombuffer(rest, np.uint8).reshape(h, w)


# --- manifests -------------------------------------------------------------

def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    tool: str = "airhaptics"
    version: str = __version__
    timestamp: str | None = None

    def add_input(self, role: str, path):
        self.inputs[role] = {"name": Path(path).name, "sha256": digest(path)}

    def add_output(self, role: str, name: str, data: bytes):
        self.outputs[role] = {"name": name, "sha256": hashlib.sha256(data).hexdigest()}

    def to_json(self) -> str:
        d = {"tool": self.tool, "version": self.version, "subcommand": self.subcommand,
             "parameters": self.parameters, "inputs": self.inputs, "outputs": self.outputs,
             "assumptions": self.assumptions}
        if self.timestamp is not None:
            d["timestamp"] = self.timestamp
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
