"""Multi-device rig geometry: reach cones, device selection, coverage, power.

Each device emits along its local +z axis (the boresight). A point is in
reach when it is no further than ``max_range`` from the array centre and no
more than ``cone_half_angle`` off boresight. Both limits are inclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._geometry import Vec3, as_tuple_matrix, axis_angle, is_rotation, vec3
from .acoustics import TransducerArray, default_array
from .errors import ValidationError
from .modulation import Schedule

# slack on the inclusive reach limits and selection tie-breaks
REACH_TOL = 1e-9

DEFAULT_RANGE = 0.70
DEFAULT_HALF_ANGLE = math.pi / 4
DEFAULT_PEAK_POWER = 80.0


@dataclass(frozen=True)
class DevicePose:
    device_id: str
    rotation: tuple[Vec3, Vec3, Vec3] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    translation: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.device_id or not isinstance(self.device_id, str):
            raise ValidationError("device id must be a non-empty string")
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3) or not is_rotation(r):
            raise ValidationError(f"device {self.device_id}: rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", as_tuple_matrix(r))
        object.__setattr__(self, "translation", vec3(self.translation, "translation"))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.rotation)

    @property
    def boresight(self) -> Vec3:
        r = self.matrix
        return (float(r[0, 2]), float(r[1, 2]), float(r[2, 2]))

    def to_scene(self, point) -> Vec3:
        p = self.matrix @ np.asarray(point, dtype=float) + np.asarray(self.translation)
        return (float(p[0]), float(p[1]), float(p[2]))

    def to_device(self, point) -> Vec3:
        p = self.matrix.T @ (np.asarray(point, dtype=float) - np.asarray(self.translation))
        return (float(p[0]), float(p[1]), float(p[2]))

    def points_to_device(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - np.asarray(self.translation)) @ self.matrix

    def transformed(self, rotation, translation) -> "DevicePose":
        r = np.asarray(rotation, dtype=float)
        return DevicePose(self.device_id, r @ self.matrix, r @ np.asarray(self.translation) + np.asarray(translation))


def to_scene(pose: DevicePose, point) -> Vec3:
    return pose.to_scene(point)


def to_device(pose: DevicePose, point) -> Vec3:
    return pose.to_device(point)


@dataclass(frozen=True)
class DeviceSpec:
    array: TransducerArray = field(default_factory=default_array)
    max_range: float = DEFAULT_RANGE
    cone_half_angle: float = DEFAULT_HALF_ANGLE
    peak_power: float = DEFAULT_PEAK_POWER

    def __post_init__(self):
        if not self.max_range > 0:
            raise ValidationError("max_range must be positive")
        if not 0 < self.cone_half_angle < math.pi / 2:
            raise ValidationError("cone_half_angle must lie in (0, pi/2)")
        if not self.peak_power >= 0:
            raise ValidationError("peak_power must be non-negative")


@dataclass(frozen=True)
class Device:
    spec: DeviceSpec
    pose: DevicePose

    @property
    def device_id(self) -> str:
        return self.pose.device_id


@dataclass(frozen=True)
class Box:
    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        object.__setattr__(self, "lo", vec3(self.lo, "box lower corner"))
        object.__setattr__(self, "hi", vec3(self.hi, "box upper corner"))

    @property
    def extent(self) -> Vec3:
        return tuple(h - l for l, h in zip(self.lo, self.hi))  # type: ignore[return-value]

    def corners(self) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.array([[(lo, hi)[i][0], (lo, hi)[j][1], (lo, hi)[k][2]]
                         for i in (0, 1) for j in (0, 1) for k in (0, 1)])


@dataclass(frozen=True)
class RigConfig:
    devices: tuple[Device, ...]
    volume: Box

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if not self.devices:
            raise ValidationError("a rig needs at least one device")
        ids = [d.device_id for d in self.devices]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValidationError(f"duplicate device ids: {', '.join(dupes)}")

    @property
    def device_ids(self) -> list[str]:
        return [d.device_id for d in self.devices]

    def device(self, device_id: str) -> Device:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise ValidationError(f"no device {device_id!r} in rig")

    def with_device(self, device: Device) -> "RigConfig":
        return RigConfig(self.devices + (device,), self.volume)

    def transformed(self, rotation, translation) -> "RigConfig":
        """Rigidly move every device. The volume becomes the bounding box of its moved corners."""
        r = np.asarray(rotation, dtype=float)
        moved = self.volume.corners() @ r.T + np.asarray(translation, dtype=float)
        return RigConfig(
            tuple(Device(d.spec, d.pose.transformed(r, translation)) for d in self.devices),
            Box(tuple(moved.min(axis=0)), tuple(moved.max(axis=0))),
        )


def in_reach(spec: DeviceSpec, pose: DevicePose, point) -> bool:
    x, y, z = pose.to_device(point)
    dist = math.sqrt(x * x + y * y + z * z)
    if dist > spec.max_range + REACH_TOL:
        return False
    if dist == 0.0:
        return True
    angle = math.acos(max(-1.0, min(1.0, z / dist)))
    return angle <= spec.cone_half_angle + REACH_TOL


def _geometry(rig: RigConfig, points: np.ndarray):
    """Off-boresight angles, distances and reach mask, each shaped (devices, points)."""
    n = len(rig.devices)
    angles = np.empty((n, len(points)))
    dists = np.empty((n, len(points)))
    reach = np.empty((n, len(points)), dtype=bool)
    for i, dev in enumerate(rig.devices):
        local = dev.pose.points_to_device(points)
        d = np.linalg.norm(local, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.where(d > 0, local[:, 2] / d, 1.0)
        a = np.arccos(np.clip(cos_t, -1.0, 1.0))
        angles[i], dists[i] = a, d
        reach[i] = (d <= dev.spec.max_range + REACH_TOL) & (a <= dev.spec.cone_half_angle + REACH_TOL)
    return angles, dists, reach


def select_devices(rig: RigConfig, points) -> np.ndarray:
    """Index into ``rig.devices`` of the chosen device per point, -1 when none reaches it.

    Preference: smallest off-boresight angle, then shortest distance, then
    lowest device id. Angles and distances within 1e-9 count as ties.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    angles, dists, reach = _geometry(rig, pts)
    inf = np.inf
    a = np.where(reach, angles, inf)
    cand = reach & (a <= a.min(axis=0) + REACH_TOL)
    dd = np.where(cand, dists, inf)
    cand &= dd <= dd.min(axis=0) + REACH_TOL
    choice = np.full(len(pts), -1, dtype=np.int64)
    order = sorted(range(len(rig.devices)), key=lambda i: rig.devices[i].device_id)
    for i in reversed(order):
        choice[cand[i]] = i
    return choice


def select_device(rig: RigConfig, point) -> str | None:
    i = int(select_devices(rig, [vec3(point, "point")])[0])
    return None if i < 0 else rig.devices[i].device_id


@dataclass(frozen=True, eq=False)
class CoverageMap:
    """Per-voxel count of devices reaching each voxel centre.

    ``counts`` has shape (nx, ny, nz); rows are emitted with z varying fastest.
    """

    origin: Vec3
    voxel: float
    counts: np.ndarray
    device_count: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.counts.shape)  # type: ignore[return-value]

    def centers(self) -> np.ndarray:
        return _voxel_centers(self.origin, self.voxel, self.shape)

    def covered_fraction(self, threshold: int = 1) -> float:
        return float(np.count_nonzero(self.counts >= threshold)) / self.counts.size

    def summary(self) -> dict:
        return {
            "voxel_m": self.voxel,
            "shape": list(self.shape),
            "voxels": int(self.counts.size),
            "devices": self.device_count,
            "covered_fraction_ge1": self.covered_fraction(1),
            "covered_fraction_ge2": self.covered_fraction(2),
        }

    def to_csv(self) -> str:
        rows = ["x_mm,y_mm,z_mm,count"]
        for (x, y, z), c in zip(self.centers().tolist(), self.counts.reshape(-1).tolist()):
            rows.append(f"{_fmt_mm(x)},{_fmt_mm(y)},{_fmt_mm(z)},{c}")
        return "\n".join(rows) + "\n"


def _fmt_mm(v: float) -> str:
    return f"{v * 1000:.3f}"


def voxel_shape(volume: Box, voxel: float) -> tuple[int, int, int]:
    if not voxel > 0:
        raise ValidationError("voxel size must be positive")
    ext = volume.extent
    if any(not e > 0 for e in ext):
        raise ValidationError("interaction volume has zero extent")
    return tuple(max(1, math.ceil(e / voxel - 1e-9)) for e in ext)  # type: ignore[return-value]


def _voxel_centers(origin, voxel, shape) -> np.ndarray:
    ix, iy, iz = np.meshgrid(*(np.arange(n) for n in shape), indexing="ij")
    idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1)
    return np.asarray(origin) + (idx + 0.5) * voxel


def coverage_map(rig: RigConfig, voxel: float = 0.01) -> CoverageMap:
    shape = voxel_shape(rig.volume, voxel)
    centers = _voxel_centers(rig.volume.lo, voxel, shape)
    _, _, reach = _geometry(rig, centers)
    counts = reach.sum(axis=0).astype(np.int64).reshape(shape)
    return CoverageMap(rig.volume.lo, voxel, counts, len(rig.devices))


POWER_MODEL = "mean power = peak_power * mean(envelope^2) over the device's samples"


def estimate_power(rig: RigConfig, schedules: Mapping[str, Schedule]) -> dict[str, float]:
    """Duty-scaled peak power per device; devices without a schedule draw 0 W."""
    known = set(rig.device_ids)
    unknown = sorted(set(schedules) - known)
    if unknown:
        raise ValidationError(f"schedules for unknown devices: {', '.join(unknown)}")
    out = {}
    for dev in rig.devices:
        sched = schedules.get(dev.device_id)
        if sched is None or len(sched) == 0:
            out[dev.device_id] = 0.0
        else:
            out[dev.device_id] = float(dev.spec.peak_power * np.mean(sched.envelope ** 2))
    return out


def tilted_pose(device_id: str, position, toward, tilt: float) -> DevicePose:
    """Pose facing +z, tipped by ``tilt`` radians horizontally towards ``toward``."""
    h = np.asarray(toward, dtype=float)[:2] - np.asarray(position, dtype=float)[:2]
    if np.linalg.norm(h) == 0 or tilt == 0:
        return DevicePose(device_id, np.eye(3), position)
    h = np.array([h[0], h[1], 0.0]) / np.linalg.norm(h)
    axis = np.cross([0.0, 0.0, 1.0], h)
    return DevicePose(device_id, axis_angle(axis, tilt), position)


def quad_rig() -> RigConfig:
    """Four devices on the corners of a 0.6 m x 0.4 m frame, tilted 30 deg inwards.

    The layout is an illustrative default: the hand zone sits 0.2-0.6 m
    above the arrays in front of a seated user.
    """
    centre = (0.0, 0.45, 0.6)
    spots = [("usi1", (-0.3, 0.25, 0.6)), ("usi2", (0.3, 0.25, 0.6)),
             ("usi3", (-0.3, 0.65, 0.6)), ("usi4", (0.3, 0.65, 0.6))]
    devices = tuple(Device(DeviceSpec(), tilted_pose(i, p, centre, math.radians(30))) for i, p in spots)
    return RigConfig(devices, Box((-0.4, 0.2, 0.8), (0.4, 0.7, 1.2)))
