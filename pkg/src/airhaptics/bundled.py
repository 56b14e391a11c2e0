"""Factories for the bundled assets; ``python -m airhaptics.bundled DIR`` rewrites them.

The A320 layout and the demo trajectory are illustrative: four panels
(rotary dials, push buttons, landing gear lever, throttle quadrant) placed
inside the default rig's interaction zone.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

from ._geometry import axis_angle
from .compliance import LatencyPipeline
from .hand import HandPose, make_pose
from .interaction import BoxVolume, CockpitProfile, ControlWidget, HapticLabel, Panel, Sphere

DIAL_HDG = (-0.15, 0.55, 1.0)
DIAL_SPD = (-0.25, 0.55, 1.0)
BTN_AP1 = (0.0, 0.55, 1.0)
BTN_AP2 = (0.06, 0.55, 1.0)
BTN_ATHR = (0.12, 0.55, 1.0)
GEAR = (0.25, 0.5, 1.0)
THROTTLE = (0.0, 0.3, 0.9)


def a320_profile() -> CockpitProfile:
    panels = (
        Panel(1, "FCU rotary dials"),
        Panel(2, "autoflight push buttons"),
        Panel(3, "landing gear lever"),
        Panel(4, "throttle control module"),
    )
    dial = BoxVolume((0.025, 0.025, 0.02))
    button = Sphere(0.015)
    widgets = (
        ControlWidget("fcu_spd_knob", "rotary_dial", "systems_control", 1, DIAL_SPD, dial),
        ControlWidget("fcu_hdg_knob", "rotary_dial", "systems_control", 1, DIAL_HDG, dial),
        ControlWidget("ap1_button", "push_button", "systems_control", 2, BTN_AP1, button),
        ControlWidget("ap2_button", "push_button", "systems_control", 2, BTN_AP2, button),
        ControlWidget("athr_button", "push_button", "systems_control", 2, BTN_ATHR, button),
        ControlWidget("landing_gear_lever", "landing_gear_lever", "secondary_flight_control", 3, GEAR,
                      Sphere(0.04)),
        ControlWidget("thrust_levers", "throttle_lever", "secondary_flight_control", 4, THROTTLE,
                      BoxVolume((0.06, 0.04, 0.03))),
    )
    labels = (
        HapticLabel("fcu_spd_knob", "dial"),
        HapticLabel("fcu_hdg_knob", "dial", params={"detents": 36}),
        HapticLabel("ap1_button", "click"),
        HapticLabel("ap2_button", "click"),
        HapticLabel("athr_button", "click"),
        HapticLabel("landing_gear_lever", "presence"),
        HapticLabel("thrust_levers", "line"),
    )
    return CockpitProfile("A320 (simplified)", panels, widgets, labels)


# hand shapes as (lateral, forward, along-normal) tip offsets from the palm centre
PINCH = ((-0.012, 0.09, 0.0), (0.012, 0.09, 0.0), (0.035, 0.06, 0.03), (0.045, 0.05, 0.03), (0.055, 0.04, 0.03))
POINT = ((-0.035, 0.03, 0.02), (0.0, 0.09, 0.0), (0.02, 0.04, 0.03), (0.035, 0.035, 0.03), (0.05, 0.03, 0.03))
GRASP = ((-0.02, 0.07, 0.0), (0.0, 0.085, 0.0), (0.02, 0.08, 0.0), (0.035, 0.05, 0.02), (0.05, 0.04, 0.02))
FLAT = ((-0.045, 0.035, 0.0), (-0.025, 0.09, 0.0), (-0.005, 0.095, 0.0), (0.015, 0.09, 0.0), (0.035, 0.075, 0.0))

REST = (0.0, 0.3, 1.15)


def _tremor(t_s: float) -> np.ndarray:
    return 0.0008 * np.array([math.sin(7.1 * t_s), math.sin(5.3 * t_s + 1.0), math.sin(6.7 * t_s + 2.0)])


def _pose_at(t_us: int) -> HandPose:
    s = t_us / 1e6
    wobble = _tremor(s)
    if 0.5 <= s < 1.4:
        # pinch the heading knob and twist it by up to 40 degrees about the vertical
        twist = math.radians(40) * math.sin(math.pi * (s - 0.5) / 0.9)
        base = make_pose(t_us, np.add(DIAL_HDG, (0.0, -0.09, 0.0)) + wobble * 0.2, offsets=PINCH)
        r = axis_angle((0.0, 0.0, 1.0), twist)
        pivot = np.asarray(DIAL_HDG)
        return base.transformed(r, pivot - r @ pivot)
    if 1.8 <= s < 2.8:
        return make_pose(t_us, np.add(BTN_AP1, (0.0, -0.09, 0.0)) + wobble * 0.2, offsets=POINT)
    if 3.1 <= s < 3.9:
        return make_pose(t_us, np.add(GEAR, (0.0, -0.08, 0.0)) + wobble * 0.5, offsets=GRASP)
    if 4.1 <= s:
        slide = 0.01 * math.sin(math.pi * (s - 4.1) / 0.9)
        return make_pose(t_us, np.add(THROTTLE, (0.0, -slide, 0.0)) + wobble * 0.5, offsets=FLAT)
    return make_pose(t_us, np.add(REST, wobble), offsets=FLAT)


def demo_trajectory(seconds: float = 5.0, rate_hz: float = 90.0) -> list[HandPose]:
    """Rest, twist the heading knob, press AP1, grasp the gear lever, rest a palm on the thrust levers."""
    n = int(round(seconds * rate_hz))
    return [_pose_at(int(round(i * 1e6 / rate_hz))) for i in range(n)]


def write_assets(directory: Path):
    from .config import (dump_json, pipeline_to_document, rig_to_document,
                         write_hand_trajectory)
    from .interaction import profile_to_document
    from .rig import quad_rig

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "default_array.json").write_text(dump_json({
        "schema_version": 1, "kind": "array", "carrier_frequency": 40000.0, "speed_of_sound": 346.0,
        "directivity_mode": "piston",
        "grid": {"nx": 16, "ny": 16, "pitch": 0.0103, "piston_radius": 0.0043, "drive_amplitude": 1.0},
    }))
    (directory / "quad_rig.json").write_text(dump_json(rig_to_document(quad_rig())))
    (directory / "a320_profile.json").write_text(dump_json(profile_to_document(a320_profile())))
    (directory / "pipeline_default.json").write_text(dump_json(pipeline_to_document(LatencyPipeline())))
    (directory / "demo_trajectory.csv").write_text(write_hand_trajectory(demo_trajectory()))


if __name__ == "__main__":
    write_assets(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "assets")
