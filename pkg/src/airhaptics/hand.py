"""Tracked hand landmarks shared by the sensation and interaction layers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._geometry import Vec3, cross, dot, norm, vec3
from .errors import ValidationError

UNIT_TOL = 1e-6


class HandRegion(str, Enum):
    THUMB_TIP = "thumb_tip"
    INDEX_TIP = "index_tip"
    MIDDLE_TIP = "middle_tip"
    RING_TIP = "ring_tip"
    LITTLE_TIP = "little_tip"
    PALM_CENTER = "palm_center"

    def __str__(self):
        return self.value


FINGERTIPS = (HandRegion.THUMB_TIP, HandRegion.INDEX_TIP, HandRegion.MIDDLE_TIP,
              HandRegion.RING_TIP, HandRegion.LITTLE_TIP)


def region(name) -> HandRegion:
    try:
        return HandRegion(str(name))
    except ValueError:
        raise ValidationError(f"unknown hand region {name!r}") from None


@dataclass(frozen=True)
class HandPose:
    """One tracking frame. ``tips`` are ordered thumb, index, middle, ring, little."""

    t: int
    palm_center: Vec3
    palm_normal: Vec3
    lateral_axis: Vec3
    tips: tuple[Vec3, Vec3, Vec3, Vec3, Vec3]

    def __post_init__(self):
        if int(self.t) != self.t or self.t < 0:
            raise ValidationError("pose time must be a non-negative integer of microseconds")
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "palm_center", vec3(self.palm_center, "palm_center"))
        object.__setattr__(self, "palm_normal", vec3(self.palm_normal, "palm_normal"))
        object.__setattr__(self, "lateral_axis", vec3(self.lateral_axis, "lateral_axis"))
        tips = tuple(vec3(p, "fingertip") for p in self.tips)
        if len(tips) != 5:
            raise ValidationError("a hand pose needs five fingertips")
        object.__setattr__(self, "tips", tips)
        if abs(norm(self.palm_normal) - 1) > UNIT_TOL or abs(norm(self.lateral_axis) - 1) > UNIT_TOL:
            raise ValidationError("palm_normal and lateral_axis must be unit vectors")
        if abs(dot(self.palm_normal, self.lateral_axis)) > UNIT_TOL:
            raise ValidationError("lateral_axis must be orthogonal to palm_normal")

    def landmark(self, which: HandRegion) -> Vec3:
        which = HandRegion(which)
        if which is HandRegion.PALM_CENTER:
            return self.palm_center
        return self.tips[FINGERTIPS.index(which)]

    @property
    def forward_axis(self) -> Vec3:
        return cross(self.lateral_axis, self.palm_normal)

    def transformed(self, rotation, translation) -> "HandPose":
        r = np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float)

        def move(p):
            return tuple((r @ np.asarray(p) + t).tolist())

        def turn(v):
            return tuple((r @ np.asarray(v)).tolist())

        return HandPose(self.t, move(self.palm_center), turn(self.palm_normal),
                        turn(self.lateral_axis), tuple(move(p) for p in self.tips))

    def at(self, t: int) -> "HandPose":
        return HandPose(t, self.palm_center, self.palm_normal, self.lateral_axis, self.tips)


# (lateral, forward, normal) offsets from the palm centre, metres; right hand
OPEN_HAND = ((-0.045, 0.035, 0.0), (-0.025, 0.09, 0.0), (-0.005, 0.095, 0.0),
             (0.015, 0.09, 0.0), (0.035, 0.075, 0.0))


def make_pose(t: int, palm_center, forward=(0.0, 1.0, 0.0), normal=(0.0, 0.0, -1.0),
              offsets=OPEN_HAND) -> HandPose:
    """Build a pose from tip offsets expressed in the hand frame."""
    f = np.asarray(forward, dtype=float)
    n = np.asarray(normal, dtype=float)
    f, n = f / np.linalg.norm(f), n / np.linalg.norm(n)
    lat = np.cross(n, f)
    c = np.asarray(palm_center, dtype=float)
    tips = tuple(tuple((c + a * lat + b * f + k * n).tolist()) for a, b, k in offsets)
    return HandPose(t, tuple(c.tolist()), tuple(n.tolist()), tuple(lat.tolist()), tips)


def canonical_pose(t: int = 0) -> HandPose:
    """Open right hand, palm down, fingers along +y, palm centre at (0, 0, 0.2)."""
    return make_pose(t, (0.0, 0.0, 0.2))
