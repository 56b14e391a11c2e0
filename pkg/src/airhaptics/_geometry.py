import math

import numpy as np

Vec3 = tuple[float, float, float]


def vec3(value, name="vector") -> Vec3:
    """Coerce to a tuple of three finite floats."""
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must have three numeric components") from exc
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise ValueError(f"{name} must be finite")
    return (x, y, z)


def norm(v) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a, b) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def rotation_matrix(rotation) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3):
        raise ValueError("rotation must be 3x3")
    return r


def is_rotation(r, tol=1e-9) -> bool:
    r = np.asarray(r, dtype=float)
    return bool(np.allclose(r @ r.T, np.eye(3), atol=tol, rtol=0) and abs(np.linalg.det(r) - 1.0) <= tol)


def as_tuple_matrix(r) -> tuple[Vec3, Vec3, Vec3]:
    r = np.asarray(r, dtype=float)
    return tuple(tuple(float(v) for v in row) for row in r)  # type: ignore[return-value]


def axis_angle(axis, angle) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of ``angle`` about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def apply(rotation, translation, point) -> Vec3:
    p = np.asarray(rotation, dtype=float) @ np.asarray(point, dtype=float) + np.asarray(translation, dtype=float)
    return (float(p[0]), float(p[1]), float(p[2]))


def rotate(rotation, v) -> Vec3:
    p = np.asarray(rotation, dtype=float) @ np.asarray(v, dtype=float)
    return (float(p[0]), float(p[1]), float(p[2]))
