"""Focal-point scheduling: AM envelopes, STM path traversal, 4 mm snapping.

Times are integer microseconds. The device update rate is capped at 40 kHz,
so consecutive samples are never closer than 25 us.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from ._geometry import Vec3, cross, dot, norm, vec3
from .errors import RateCapError, ValidationError

MAX_UPDATE_RATE = 40_000.0
MIN_PERCEPTIBLE_HZ = 10.0
MAX_PERCEPTIBLE_HZ = 400.0
LATTICE = 0.004
# ties are detected within this fraction of one lattice step
_TIE_TOL = 1e-9
_US = 1_000_000


def check_band(frequency: float, what: str = "frequency"):
    if not MIN_PERCEPTIBLE_HZ <= frequency <= MAX_PERCEPTIBLE_HZ:
        raise ValidationError(f"{what} {frequency} Hz outside the perceptible band [10, 400] Hz")


def check_update_rate(update_rate: float):
    if not update_rate > 0:
        raise ValidationError("update rate must be positive")
    if update_rate > MAX_UPDATE_RATE:
        raise RateCapError(f"update rate {update_rate} Hz exceeds the 40 kHz device cap")


def sample_spacing_us(update_rate: float) -> int:
    check_update_rate(update_rate)
    return int(math.floor(_US / update_rate + 0.5))


def sample_count(duration_us: int, update_rate: float) -> int:
    return math.floor(Fraction(duration_us) * Fraction(update_rate) / _US)


def cycle_fraction(tau_us, frequency: float) -> np.ndarray:
    """Position within the current period, in [0, 1), for times ``tau_us``.

    Integral frequencies use exact integer arithmetic so periods close exactly.
    """
    tau = np.asarray(tau_us, dtype=np.int64)
    if float(frequency).is_integer():
        return ((tau * int(frequency)) % _US) / _US
    return np.mod(tau * (frequency / _US), 1.0)


@dataclass(frozen=True)
class AmScheme:
    frequency: float
    duty: float = 0.5
    strength: float = 1.0

    def __post_init__(self):
        check_band(self.frequency, "AM frequency")
        if not 0.0 < self.duty <= 1.0:
            raise ValidationError(f"duty must lie in (0, 1], got {self.duty}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValidationError(f"strength must lie in [0, 1], got {self.strength}")

    def envelope_at(self, tau_us) -> np.ndarray:
        tau = np.asarray(tau_us, dtype=np.int64)
        if float(self.frequency).is_integer():
            on = (tau * int(self.frequency)) % _US < self.duty * _US
        else:
            on = cycle_fraction(tau, self.frequency) < self.duty
        return np.where(on, self.strength, 0.0)


@dataclass(frozen=True)
class Path:
    """A focal path. ``vertices`` holds the point, segment ends or polyline.

    Circles keep ``vertices == (centre,)`` and use ``radius``, ``normal`` and
    ``start`` (unit vector from the centre towards the angle-zero point).
    Open paths are retraced back and forth, so one period covers twice
    their length.
    """

    kind: str
    vertices: tuple[Vec3, ...]
    radius: float = 0.0
    normal: Vec3 = (0.0, 0.0, 1.0)
    start: Vec3 = (1.0, 0.0, 0.0)

    def __post_init__(self):
        verts = tuple(vec3(v, "vertex") for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "normal", vec3(self.normal, "normal"))
        object.__setattr__(self, "start", vec3(self.start, "start"))
        if self.kind == "point":
            if len(verts) != 1:
                raise ValidationError("point path takes exactly one vertex")
        elif self.kind == "circle":
            if len(verts) != 1:
                raise ValidationError("circle path takes its centre as the only vertex")
            if not self.radius > 0:
                raise ValidationError("circle radius must be positive")
            if abs(norm(self.normal) - 1) > 1e-6 or abs(norm(self.start) - 1) > 1e-6:
                raise ValidationError("circle normal and start must be unit vectors")
            if abs(dot(self.normal, self.start)) > 1e-6:
                raise ValidationError("circle start direction must lie in the circle plane")
        elif self.kind in ("line_segment", "polyline"):
            if self.kind == "line_segment" and len(verts) != 2:
                raise ValidationError("line segment takes two endpoints")
            if len(verts) < 2:
                raise ValidationError("polyline needs at least two vertices")
            if any(norm(np.subtract(b, a)) == 0 for a, b in zip(verts, verts[1:])):
                raise ValidationError("consecutive path vertices must be distinct")
        else:
            raise ValidationError(f"unknown path kind {self.kind!r}")

    @property
    def length(self) -> float:
        """Geometric length (circumference for circles, 0 for points)."""
        if self.kind == "point":
            return 0.0
        if self.kind == "circle":
            return 2 * math.pi * self.radius
        return float(sum(norm(np.subtract(b, a)) for a, b in zip(self.vertices, self.vertices[1:])))

    @property
    def period_length(self) -> float:
        """Distance travelled by the focus in one draw period."""
        if self.kind in ("line_segment", "polyline"):
            return 2 * self.length
        return self.length

    def positions_at(self, fraction) -> np.ndarray:
        """Positions at period fractions in [0, 1), at constant speed."""
        f = np.asarray(fraction, dtype=float).reshape(-1)
        if self.kind == "point":
            return np.tile(np.asarray(self.vertices[0]), (len(f), 1))
        if self.kind == "circle":
            u = np.asarray(self.start)
            v = np.asarray(cross(self.normal, self.start))
            theta = 2 * math.pi * f
            return (np.asarray(self.vertices[0]) + self.radius * (np.cos(theta)[:, None] * u
                                                                  + np.sin(theta)[:, None] * v))
        verts = np.asarray(self.vertices)
        seg = np.diff(verts, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        total = cum[-1]
        s = f * 2 * total
        s = np.where(s <= total, s, 2 * total - s)
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        return verts[i] + ((s - cum[i]) / seg_len[i])[:, None] * seg[i]

    def transformed(self, rotation, translation) -> "Path":
        r = np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float)
        return Path(
            self.kind,
            tuple(tuple(r @ np.asarray(v) + t) for v in self.vertices),
            self.radius,
            tuple(r @ np.asarray(self.normal)),
            tuple(r @ np.asarray(self.start)),
        )


def point_path(p) -> Path:
    return Path("point", (p,))


def line_path(a, b) -> Path:
    return Path("line_segment", (a, b))


def polyline_path(vertices) -> Path:
    return Path("polyline", tuple(vertices))


def circle_path(centre, radius, normal=(0.0, 0.0, 1.0), start=(1.0, 0.0, 0.0)) -> Path:
    return Path("circle", (centre,), radius, normal, start)


@dataclass(frozen=True)
class StmScheme:
    path: Path
    draw_frequency: float
    strength: float = 1.0
    allow_any_frequency: bool = False

    def __post_init__(self):
        if not self.draw_frequency > 0:
            raise ValidationError("draw frequency must be positive")
        if not self.allow_any_frequency:
            check_band(self.draw_frequency, "STM draw frequency")
        if not 0.0 <= self.strength <= 1.0:
            raise ValidationError(f"strength must lie in [0, 1], got {self.strength}")

    def positions_at(self, tau_us) -> np.ndarray:
        return self.path.positions_at(cycle_fraction(tau_us, self.draw_frequency))


@dataclass(frozen=True)
class FocalSample:
    t: int
    position: Vec3
    envelope: float


class Schedule:
    """Immutable, evenly spaced run of focal samples stored column-wise."""

    __slots__ = ("t_us", "positions", "envelope", "update_rate")

    def __init__(self, t_us, positions, envelope, update_rate: float):
        spacing = sample_spacing_us(update_rate)
        t = np.array(t_us, dtype=np.int64).reshape(-1)
        pos = np.array(positions, dtype=float).reshape(-1, 3)
        env = np.array(envelope, dtype=float).reshape(-1)
        if not len(t) == len(pos) == len(env):
            raise ValidationError("schedule columns differ in length")
        if len(t) and t[0] < 0:
            raise ValidationError("sample times must be non-negative")
        if len(t) > 1 and np.any(np.diff(t) != spacing):
            raise ValidationError(f"sample spacing must be exactly {spacing} us")
        if np.any((env < 0) | (env > 1)):
            raise ValidationError("envelope must lie in [0, 1]")
        for a in (t, pos, env):
            a.flags.writeable = False
        object.__setattr__(self, "t_us", t)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "envelope", env)
        object.__setattr__(self, "update_rate", float(update_rate))

    def __setattr__(self, name, value):
        raise AttributeError("Schedule is immutable")

    @property
    def spacing_us(self) -> int:
        return sample_spacing_us(self.update_rate)

    def __len__(self):
        return len(self.t_us)

    def __iter__(self) -> Iterator[FocalSample]:
        for t, p, e in zip(self.t_us.tolist(), self.positions.tolist(), self.envelope.tolist()):
            yield FocalSample(t, tuple(p), e)

    @property
    def samples(self) -> tuple[FocalSample, ...]:
        return tuple(self)

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return (self.update_rate == other.update_rate
                and np.array_equal(self.t_us, other.t_us)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.envelope, other.envelope))

    def __repr__(self):
        return f"Schedule({len(self)} samples @ {self.update_rate:g} Hz)"

    def to_jsonl(self) -> str:
        lines = []
        for t, p, e in zip(self.t_us.tolist(), self.positions.tolist(), self.envelope.tolist()):
            lines.append(json.dumps({
                "t_us": t,
                "x_mm": _mm(p[0]),
                "y_mm": _mm(p[1]),
                "z_mm": _mm(p[2]),
                "envelope": e,
            }))
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_jsonl(cls, lines: Iterable[str], update_rate: float) -> "Schedule":
        t, pos, env = [], [], []
        for n, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t.append(int(rec["t_us"]))
                pos.append((rec["x_mm"] / 1000, rec["y_mm"] / 1000, rec["z_mm"] / 1000))
                env.append(float(rec["envelope"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValidationError(f"bad schedule record on line {n}: {exc}") from exc
        return cls(t, pos, env, update_rate)


def _mm(x: float) -> float:
    return round(x * 1000.0, 6) + 0.0


def _times(duration_us: int, update_rate: float, t0_us: int):
    if not duration_us > 0:
        raise ValidationError("duration must be positive")
    spacing = sample_spacing_us(update_rate)
    n = sample_count(duration_us, update_rate)
    tau = np.arange(n, dtype=np.int64) * spacing
    return tau, tau + int(t0_us)


def am_envelope(scheme: AmScheme, duration_us: int, update_rate: float,
                position=(0.0, 0.0, 0.0), t0_us: int = 0) -> Schedule:
    """Square-wave on/off envelope held at a fixed focal position."""
    tau, t = _times(duration_us, update_rate, t0_us)
    pos = np.tile(np.asarray(vec3(position, "position")), (len(t), 1))
    return Schedule(t, pos, scheme.envelope_at(tau), update_rate)


def stm_schedule(scheme: StmScheme, duration_us: int, update_rate: float, t0_us: int = 0) -> Schedule:
    """Constant-envelope traversal of ``scheme.path`` at the draw frequency."""
    tau, t = _times(duration_us, update_rate, t0_us)
    return Schedule(t, scheme.positions_at(tau), np.full(len(t), scheme.strength), update_rate)


def lattice_index(points) -> np.ndarray:
    """Integer lattice coordinates (multiples of 4 mm), ties away from zero."""
    q = np.asarray(points, dtype=float) / LATTICE
    a = np.abs(q)
    fl = np.floor(a)
    n = fl + (a - fl >= 0.5 - _TIE_TOL)
    return (np.sign(q) * n).astype(np.int64)


def snap_points(points) -> np.ndarray:
    return lattice_index(points) * LATTICE + 0.0


def snap_to_grid(position) -> Vec3:
    """Round each coordinate to the nearest multiple of 4 mm."""
    p = snap_points(vec3(position, "position"))
    return (float(p[0]), float(p[1]), float(p[2]))
