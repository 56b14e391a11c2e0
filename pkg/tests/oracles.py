"""Naive reference computations, kept independent of the package internals.

Everything here uses the ``math``/``cmath`` modules and plain loops so the
values it produces can be frozen into the tests as goldens.
"""

import cmath
import math

PITCH = 0.0103
RADIUS = 0.0043
FREQ = 40000.0
C = 346.0


def default_positions():
    return [((ix - 7.5) * PITCH, (iy - 7.5) * PITCH, 0.0) for iy in range(16) for ix in range(16)]


def besselj1_series(x, tol=1e-16):
    # J1(x) = sum_m (-1)^m (x/2)^(2m+1) / (m! (m+1)!)
    total = 0.0
    m = 0
    while True:
        term = (-1) ** m * (x / 2) ** (2 * m + 1) / (math.factorial(m) * math.factorial(m + 1))
        total += term
        if abs(term) < tol and m > 2:
            return total
        m += 1


def piston_gain(k, a, angle):
    x = k * a * math.sin(angle)
    if x == 0.0:
        return 1.0
    return 2.0 * besselj1_series(x) / x


def naive_pressure(positions, phases, amplitudes, point, k=None, radius=RADIUS):
    """Double loop over elements for one point; normals are +z."""
    if k is None:
        k = 2 * math.pi * FREQ / C
    total = 0j
    for (ex, ey, ez), ph, amp in zip(positions, phases, amplitudes):
        dx, dy, dz = point[0] - ex, point[1] - ey, point[2] - ez
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        cos_t = dz / d if d > 0 else 1.0
        angle = math.acos(max(-1.0, min(1.0, cos_t)))
        gain = piston_gain(k, radius, angle)
        total += amp / max(d, 0.001) * gain * cmath.exp(1j * (k * d + ph))
    return total


def naive_focus_phases(positions, focus, k=None):
    if k is None:
        k = 2 * math.pi * FREQ / C
    out = []
    for ex, ey, ez in positions:
        d = math.dist((ex, ey, ez), focus)
        out.append((-k * d) % (2 * math.pi))
    return out


def naive_focal_gain(focus):
    pos = default_positions()
    amps = [1.0] * len(pos)
    focused = naive_pressure(pos, naive_focus_phases(pos, focus), amps, focus)
    flat = naive_pressure(pos, [0.0] * len(pos), amps, focus)
    return abs(focused) / abs(flat)


if __name__ == "__main__":
    print(repr(piston_gain(2 * math.pi * FREQ / C, 3.5 / (2 * math.pi * FREQ / C), math.pi / 2)))
    print(repr(naive_focal_gain((0.05, 0.0, 0.2))))
    print(repr(naive_focal_gain((0.0, 0.0, 0.2))))
    pos = default_positions()
    f = (0.0, 0.0, 0.2)
    print(repr(abs(naive_pressure(pos, naive_focus_phases(pos, f), [1.0] * 256, f))))
