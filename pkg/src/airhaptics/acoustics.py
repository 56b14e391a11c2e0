"""Phased-array focusing and linear pressure-field superposition.

Pressure is in arbitrary units: every element is a unit-strength source
scaled by its drive amplitude. Propagation follows ``exp(+i k d)``, so the
focusing phase for an element at distance ``d`` from the target is ``-k d``.
Air absorption is not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from ._geometry import Vec3, norm, vec3
from .errors import ContractError, DegenerateGeometryError, DomainError, ValidationError

TWO_PI = 2.0 * math.pi

DEFAULT_FREQUENCY = 40_000.0
DEFAULT_SPEED_OF_SOUND = 346.0
DEFAULT_PITCH = 0.0103
DEFAULT_PISTON_RADIUS = 0.0043
DEFAULT_GRID = 16

# distance floor for the 1/d spreading term
NEAR_FIELD_FLOOR = 0.001
# series is used up to this argument; beyond it scipy's j1 takes over
SERIES_LIMIT = 12.0

_CHUNK = 4096


@dataclass(frozen=True)
class Transducer:
    position: Vec3
    normal: Vec3 = (0.0, 0.0, 1.0)
    drive_amplitude: float = 1.0
    piston_radius: float = DEFAULT_PISTON_RADIUS

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position, "position"))
        object.__setattr__(self, "normal", vec3(self.normal, "normal"))
        if abs(norm(self.normal) - 1.0) > 1e-9:
            raise ValidationError(f"transducer normal must be a unit vector, got {self.normal}")
        if not 0.0 <= self.drive_amplitude <= 1.0:
            raise ValidationError(f"drive_amplitude must lie in [0, 1], got {self.drive_amplitude}")
        if not self.piston_radius > 0:
            raise ValidationError(f"piston_radius must be positive, got {self.piston_radius}")


@dataclass(frozen=True)
class TransducerArray:
    elements: tuple[Transducer, ...]
    carrier_frequency: float = DEFAULT_FREQUENCY
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND
    directivity_mode: str = "piston"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValidationError("array needs at least one element")
        if not self.carrier_frequency > 0:
            raise ValidationError("carrier_frequency must be positive")
        if not self.speed_of_sound > 0:
            raise ValidationError("speed_of_sound must be positive")
        if self.directivity_mode not in ("piston", "omnidirectional"):
            raise ValidationError(f"unknown directivity_mode {self.directivity_mode!r}")
        if not (math.isfinite(self.wavenumber) and self.wavenumber > 0):
            raise ValidationError("wavenumber must be finite and positive")

    @property
    def wavenumber(self) -> float:
        return TWO_PI * self.carrier_frequency / self.speed_of_sound

    def __len__(self):
        return len(self.elements)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([e.position for e in self.elements], dtype=float)

    @cached_property
    def normals(self) -> np.ndarray:
        return np.array([e.normal for e in self.elements], dtype=float)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        return np.array([e.drive_amplitude for e in self.elements], dtype=float)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([e.piston_radius for e in self.elements], dtype=float)


def grid_array(
    nx: int = DEFAULT_GRID,
    ny: int = DEFAULT_GRID,
    pitch: float = DEFAULT_PITCH,
    piston_radius: float = DEFAULT_PISTON_RADIUS,
    drive_amplitude: float = 1.0,
    carrier_frequency: float = DEFAULT_FREQUENCY,
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND,
    directivity_mode: str = "piston",
) -> TransducerArray:
    """Planar ``nx`` x ``ny`` grid in the z=0 plane, centred on the origin, facing +z."""
    if nx < 1 or ny < 1:
        raise ValidationError("grid dimensions must be >= 1")
    if not pitch > 0:
        raise ValidationError("pitch must be positive")
    elements = [
        Transducer(
            ((ix - (nx - 1) / 2) * pitch, (iy - (ny - 1) / 2) * pitch, 0.0),
            (0.0, 0.0, 1.0),
            drive_amplitude,
            piston_radius,
        )
        for iy in range(ny)
        for ix in range(nx)
    ]
    return TransducerArray(tuple(elements), carrier_frequency, speed_of_sound, directivity_mode)


def default_array() -> TransducerArray:
    """The 256-element reference device (16 x 16 at 10.3 mm pitch)."""
    return grid_array()


@dataclass(frozen=True)
class PhasePattern:
    phases: tuple[float, ...]
    amplitudes: tuple[float, ...]

    def __post_init__(self):
        phases = tuple(float(p) for p in self.phases)
        amps = tuple(float(a) for a in self.amplitudes)
        if len(phases) != len(amps):
            raise ContractError("phases and amplitudes differ in length")
        if any(not 0.0 <= p < TWO_PI for p in phases):
            raise ValidationError("phases must lie in [0, 2*pi)")
        if any(not 0.0 <= a <= 1.0 for a in amps):
            raise ValidationError("amplitudes must lie in [0, 1]")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self):
        return len(self.phases)

    @classmethod
    def uniform(cls, array: TransducerArray, phase: float = 0.0) -> "PhasePattern":
        return cls((phase,) * len(array), tuple(array.amplitudes.tolist()))


@dataclass(frozen=True)
class PressureSample:
    point: Vec3
    pressure: complex


@dataclass(frozen=True)
class FieldGrid:
    """Regular sampling lattice; the first axis varies fastest in :meth:`points`."""

    origin: Vec3
    axes: tuple[Vec3, ...]
    counts: tuple[int, ...]
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin, "origin"))
        axes = tuple(vec3(a, "axis") for a in self.axes)
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "counts", counts)
        if len(axes) not in (2, 3) or len(counts) != len(axes):
            raise ValidationError("a field grid needs two or three axes with one count each")
        if any(c < 1 for c in counts):
            raise ValidationError("grid counts must be >= 1")
        if not self.spacing > 0:
            raise ValidationError("grid spacing must be positive")
        for i, a in enumerate(axes):
            if abs(norm(a) - 1.0) > 1e-9:
                raise ValidationError("grid axes must be unit vectors")
            for b in axes[i + 1:]:
                if abs(sum(x * y for x, y in zip(a, b))) > 1e-9:
                    raise ValidationError("grid axes must be mutually orthogonal")

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def points(self) -> np.ndarray:
        idx = np.indices(self.counts[::-1]).reshape(len(self.counts), -1)[::-1]
        axes = np.asarray(self.axes)
        return np.asarray(self.origin) + self.spacing * (idx.T.astype(float) @ axes)


def plane_grid(axis: str, offset: float, extent: float, n: int, center=(0.0, 0.0)) -> FieldGrid:
    """Square ``n`` x ``n`` grid of side ``extent`` in the plane ``axis = offset``.

    The in-plane axes are taken in cyclic order (z plane -> x then y).
    """
    order = {"x": (1, 2, 0), "y": (2, 0, 1), "z": (0, 1, 2)}
    if axis not in order:
        raise ValidationError(f"plane axis must be x, y or z, not {axis!r}")
    if n < 1:
        raise ValidationError("grid size must be >= 1")
    if not extent > 0:
        raise ValidationError("extent must be positive")
    u_i, v_i, w_i = order[axis]
    basis = np.eye(3)
    spacing = extent / (n - 1) if n > 1 else extent
    origin = np.zeros(3)
    origin[u_i] = center[0] - (extent / 2 if n > 1 else 0.0)
    origin[v_i] = center[1] - (extent / 2 if n > 1 else 0.0)
    origin[w_i] = offset
    return FieldGrid(tuple(origin), (tuple(basis[u_i]), tuple(basis[v_i])), (n, n), spacing)


def piston_gain(x) -> np.ndarray:
    """``2 J1(x) / x`` evaluated elementwise, 1 at x = 0."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x <= SERIES_LIMIT
    if small.any():
        out[small] = _piston_series(x[small])
    if (~small).any():
        big = x[~small]
        out[~small] = 2.0 * special.j1(big) / big
    return out


def _piston_series(x: np.ndarray) -> np.ndarray:
    # sum_m (-1)^m (x/2)^(2m) / (m! (m+1)!)
    q = -(x * 0.5) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    m = 0
    while True:
        term = term * q / ((m + 1) * (m + 2))
        total = total + term
        m += 1
        if m > 2 and np.max(np.abs(term), initial=0.0) < 1e-17:
            return total


def directivity(array: TransducerArray, angle: float, piston_radius: float | None = None) -> float:
    """Far-field gain of one element at ``angle`` from its normal.

    Uses the radius of the first element unless ``piston_radius`` is given.
    """
    if not 0.0 <= angle <= math.pi / 2:
        raise DomainError(f"angle must lie in [0, pi/2], got {angle}")
    if array.directivity_mode == "omnidirectional":
        return 1.0
    if angle == 0.0:
        return 1.0
    a = array.elements[0].piston_radius if piston_radius is None else piston_radius
    return float(piston_gain(array.wavenumber * a * math.sin(angle)))


def solve_focus_phases(array: TransducerArray, focus) -> PhasePattern:
    """Conjugate-phase focusing: every contribution arrives at ``focus`` in phase."""
    f = np.asarray(vec3(focus, "focus"))
    d = np.linalg.norm(array.positions - f, axis=1)
    if np.any(d < NEAR_FIELD_FLOOR):
        i = int(np.argmin(d))
        raise DegenerateGeometryError(f"focus lies within 1 mm of element {i}")
    phases = np.mod(-array.wavenumber * d, TWO_PI)
    phases[phases >= TWO_PI] = 0.0
    return PhasePattern(tuple(phases.tolist()), tuple(array.amplitudes.tolist()))


def _check_pattern(array: TransducerArray, pattern: PhasePattern):
    if len(pattern) != len(array):
        raise ContractError(f"pattern has {len(pattern)} entries, array has {len(array)} elements")


def _contributions(array: TransducerArray, phases: np.ndarray, amps: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Per-element complex contributions, shape (points, elements)."""
    diff = pts[:, None, :] - array.positions[None, :, :]
    d = np.sqrt(np.einsum("pnk,pnk->pn", diff, diff))
    spread = amps / np.maximum(d, NEAR_FIELD_FLOOR)
    if array.directivity_mode == "piston":
        proj = np.einsum("pnk,nk->pn", diff, array.normals)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.where(d > 0, proj / d, 1.0)
        sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, 1.0))
        spread = spread * piston_gain(array.wavenumber * array.radii * sin_t)
    return spread * np.exp(1j * (array.wavenumber * d + phases))


def element_contributions(array: TransducerArray, pattern: PhasePattern, point) -> np.ndarray:
    """Complex contribution of each element at a single point."""
    _check_pattern(array, pattern)
    pt = np.asarray([vec3(point, "point")])
    return _contributions(array, np.asarray(pattern.phases), np.asarray(pattern.amplitudes), pt)[0]


def pressure_field(array: TransducerArray, pattern: PhasePattern, points) -> np.ndarray:
    """Complex pressure at each row of ``points`` (shape (M, 3)).

    Each point is summed over elements in the same fixed order no matter how
    the points are batched, so results do not depend on chunking.
    """
    _check_pattern(array, pattern)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    phases = np.asarray(pattern.phases)
    amps = np.asarray(pattern.amplitudes)
    out = np.empty(len(pts), dtype=complex)
    for start in range(0, len(pts), _CHUNK):
        block = _contributions(array, phases, amps, pts[start:start + _CHUNK])
        out[start:start + _CHUNK] = block.sum(axis=1)
    return out


def evaluate_pressure(array: TransducerArray, pattern: PhasePattern, points: Iterable) -> list[PressureSample]:
    pts = np.asarray([vec3(p, "point") for p in points], dtype=float).reshape(-1, 3)
    values = pressure_field(array, pattern, pts)
    return [PressureSample(tuple(p.tolist()), complex(v)) for p, v in zip(pts, values)]


def focal_gain(array: TransducerArray, focus) -> float:
    """|p| at ``focus`` when focused, relative to the same amplitudes driven in phase."""
    if not np.any(array.amplitudes > 0):
        raise ValidationError("focal gain is undefined for a zero-amplitude array")
    f = [vec3(focus, "focus")]
    focused = abs(pressure_field(array, solve_focus_phases(array, f[0]), f)[0])
    flat = abs(pressure_field(array, PhasePattern.uniform(array), f)[0])
    if flat == 0.0:
        raise ValidationError("unfocused pressure vanishes at this point; ratio undefined")
    return focused / flat


def field_on_grid(array: TransducerArray, focus: Sequence[float], grid: FieldGrid) -> tuple[np.ndarray, np.ndarray]:
    """Focus on ``focus`` and sample the field over ``grid``; returns (points, pressures)."""
    pts = grid.points()
    return pts, pressure_field(array, solve_focus_phases(array, focus), pts)
