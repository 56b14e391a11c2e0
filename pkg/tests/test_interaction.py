import json
import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from airhaptics._geometry import axis_angle
from airhaptics.bundled import DIAL_HDG, PINCH, POINT
from airhaptics.config import load_profile_file, read_json, resolve_input
from airhaptics.errors import ConfigError, ProfileIntegrityError, ValidationError
from airhaptics.hand import HandPose, HandRegion as R, make_pose
from airhaptics.interaction import (BoxVolume, CockpitProfile, ControlWidget, HapticLabel, Panel, Sphere,
                                    activate, detect_contacts, event_log, load_profile, profile_to_document,
                                    render_session, run_session)
from airhaptics.modulation import AmScheme, am_envelope
from airhaptics.rig import Box, Device, DevicePose, DeviceSpec, RigConfig

BUTTON = ControlWidget("btn", "push_button", "systems_control", 1, (0.0, 0.09, 0.2), Sphere(0.015))
DIAL = ControlWidget("knob", "rotary_dial", "systems_control", 1, (-0.035, 0.09, 0.2), BoxVolume((0.02, 0.015, 0.01)))


def profile(widgets=(BUTTON,), labels=None):
    if labels is None:
        labels = tuple(HapticLabel(w.id, {"push_button": "click", "rotary_dial": "dial"}[w.kind]) for w in widgets)
    return CockpitProfile("test", (Panel(1),), tuple(widgets), tuple(labels))


def overhead_rig():
    return RigConfig((Device(DeviceSpec(), DevicePose("top")),), Box((-0.2, -0.1, 0.1), (0.2, 0.3, 0.4)))


def point_hand(t=0, at=(0.0, 0.09, 0.2)):
    # index tip at ``at``
    return make_pose(t, np.subtract(at, (0.0, 0.09, 0.0)), offsets=POINT)


def test_contact_examples():
    assert detect_contacts(point_hand(), profile()) == {"btn": frozenset({R.INDEX_TIP})}
    assert detect_contacts(point_hand(at=(1, 1, 1)), profile()) == {}
    tips = ((-0.04, 0.09, 0.2), (-0.03, 0.09, 0.2), (0.1, 0.2, 0.2), (0.1, 0.2, 0.2), (0.1, 0.2, 0.2))
    pinch = HandPose(0, (0.1, 0.0, 0.2), (0, 0, -1), (1, 0, 0), tips)
    assert detect_contacts(pinch, profile((DIAL,))) == {"knob": frozenset({R.THUMB_TIP, R.INDEX_TIP})}


def test_box_containment_is_inclusive_and_rotates_with_widget():
    w = ControlWidget("b", "other", "systems_control", 1, (0, 0, 0), BoxVolume((0.02, 0.01, 0.01)))
    assert w.contains([(0.02, 0.01, 0.01)]).all()
    assert not w.contains([(0.0201, 0, 0)]).any()
    turned = w.transformed(axis_angle((0, 0, 1), math.pi / 2), (0, 0, 0))
    assert turned.contains([(0.0, 0.019, 0.0)]).all()
    assert not turned.contains([(0.019, 0.0, 0.0)]).any()


def test_activate_examples():
    hand = point_hand()
    p = profile()
    out = activate(detect_contacts(hand, p), p, hand)
    assert [(i.name, i.control_id, i.targets) for i in out] == [("click", "btn", frozenset({R.INDEX_TIP}))]
    physical = p.with_physical(["btn"])
    assert activate(detect_contacts(hand, physical), physical, hand) == []
    assert activate({}, p, hand) == []


def test_unlabeled_virtual_contact_is_integrity_error():
    bare = profile(labels=())
    hand = point_hand()
    with pytest.raises(ProfileIntegrityError):
        activate(detect_contacts(hand, bare), bare, hand)
    with pytest.raises(ProfileIntegrityError):
        run_session(bare, overhead_rig(), [hand])


def test_profile_structure_errors_are_itemized():
    with pytest.raises(ConfigError) as err:
        CockpitProfile("x", (Panel(1),), (BUTTON, BUTTON, replace(BUTTON, id="b2", panel=9)),
                       (HapticLabel("ghost", "click"),))
    assert len(err.value.problems) == 3


def hold(seconds=1.0, rate_hz=100, start=(0.0, 0.09, 0.2)):
    n = int(seconds * rate_hz)
    return [point_hand(round(i * 1e6 / rate_hz), start) for i in range(n)]


def test_session_without_contact_is_empty():
    assert run_session(profile(), overhead_rig(), hold(start=(0.3, 0.3, 0.3))) == []


def test_button_hold_gives_one_click_burst():
    events = run_session(profile(), overhead_rig(), hold(1.0))
    assert len(events) == 4000
    assert {(e.control, e.sensation, e.device) for e in events} == {("btn", "click", "top")}
    assert len({e.position_mm for e in events}) == 1
    assert events[0].position_mm == (0, 92, 200)  # y = 0.09 is a lattice tie
    expected = am_envelope(AmScheme(200, 0.5), 100_000, 40_000)
    assert [e.envelope for e in events] == expected.envelope.tolist()
    assert [e.t for e in events] == expected.t_us.tolist()


def test_reclick_after_release():
    traj = hold(0.3) + [point_hand(300_000 + i * 10_000, (0.3, 0.3, 0.3)) for i in range(10)] \
        + [point_hand(400_000 + i * 10_000) for i in range(30)]
    events = run_session(profile(), overhead_rig(), traj)
    assert len(events) == 8000
    assert events[4000].t == 400_000


def test_unreachable_samples_are_kept():
    far_rig = RigConfig((Device(DeviceSpec(), DevicePose("x", translation=(3, 3, 3))),),
                        Box((0, 0, 0), (1, 1, 1)))
    events = run_session(profile(), far_rig, hold(0.2))
    assert events and {e.device for e in events} == {"unreachable"}


def test_empty_trajectory_rejected():
    with pytest.raises(ValidationError):
        run_session(profile(), overhead_rig(), [])
    with pytest.raises(ValidationError):
        run_session(profile(), overhead_rig(), [point_hand(10), point_hand(10)])


def _twist_pose(t, angle):
    base = make_pose(t, np.add(DIAL_HDG, (0.0, -0.09, 0.0)), offsets=PINCH)
    r = axis_angle((0.0, 0.0, 1.0), angle)
    pivot = np.asarray(DIAL_HDG)
    return base.transformed(r, pivot - r @ pivot)


def test_detent_crossing_adds_one_short_click(a320, rig):
    # 36 detents: 10 degree steps; twist from 2 to 14 degrees crosses one boundary
    traj = [_twist_pose(i * 10_000, math.radians(2 + i)) for i in range(13)]
    events = run_session(a320, rig, traj)
    clicks = [e for e in events if e.sensation == "click"]
    assert {e.control for e in clicks} == {"fcu_hdg_knob"}
    assert len(clicks) == 800  # 20 ms at 40 kHz
    assert clicks[0].t == 80_000  # first frame past 10 degrees
    assert sum(e.sensation == "dial" for e in events) == 130 * 40


def test_no_detents_without_parameter(rig):
    p = load_profile_file("a320")
    doc = profile_to_document(p)
    for lab in doc["labels"]:
        lab.pop("params", None)
    plain = load_profile(doc)
    traj = [_twist_pose(i * 10_000, math.radians(2 + i)) for i in range(13)]
    assert not any(e.sensation == "click" for e in run_session(plain, rig, traj))


def test_demo_session_invariants(a320, rig, demo_poses):
    samples = render_session(a320, rig, demo_poses)
    frame_t = np.array([t for t, _ in samples.frames])
    idx = np.searchsorted(frame_t, samples.t, side="right") - 1
    for i in np.unique(idx):
        controls = set(np.asarray(samples.control, dtype=object)[idx == i])
        assert controls <= samples.frames[i][1]
    events = run_session(a320, rig, demo_poses)
    assert all(c % 4 == 0 for e in events for c in e.position_mm)
    assert [(e.t, e.device, e.control, e.sensation) for e in events] == \
        sorted((e.t, e.device, e.control, e.sensation) for e in events)
    per = Counter((e.control, e.sensation) for e in events)
    assert per[("ap1_button", "click")] == 4000
    assert set(c for c, _ in per) == {"fcu_hdg_knob", "ap1_button", "landing_gear_lever", "thrust_levers"}


def test_physical_widgets_never_emit(a320, rig, demo_poses):
    p = a320.with_physical(["landing_gear_lever", "thrust_levers"])
    controls = {e.control for e in run_session(p, rig, demo_poses)}
    assert controls == {"fcu_hdg_knob", "ap1_button"}


def test_switch_profile_mid_session(a320, rig, demo_poses):
    doc = profile_to_document(a320)
    for w in doc["widgets"]:
        w["id"] = "b_" + w["id"]
    for lab in doc["labels"]:
        lab["control"] = "b_" + lab["control"]
    other = load_profile(doc)
    switch_t = 2_000_000
    events = run_session(a320, rig, demo_poses, switches=[(switch_t, other)])
    first_after = min(p.t for p in demo_poses if p.t >= switch_t)
    after = [e for e in events if e.t >= first_after]
    before = [e for e in events if e.t < first_after]
    assert after and all(e.control.startswith("b_") for e in after)
    assert before and not any(e.control.startswith("b_") for e in before)


def test_event_json_fields():
    events = run_session(profile(), overhead_rig(), hold(0.05))
    rec = json.loads(events[0].to_json())
    assert list(rec) == ["t_us", "device", "x_mm", "y_mm", "z_mm", "envelope", "sensation", "control"]
    assert event_log(events).count("\n") == len(events)


def test_bundled_profile_loads(a320):
    p = load_profile_file("default")
    assert p == a320
    assert len(p.panels) == 4
    kinds = {w.kind: p.label_for(w.id).sensation for w in p.widgets}
    assert kinds == {"rotary_dial": "dial", "push_button": "click", "landing_gear_lever": "presence",
                     "throttle_lever": "line"}
    assert load_profile(profile_to_document(p)) == p


def test_load_profile_reports_every_problem():
    doc = read_json(resolve_input("a320", "profile"))
    doc["widgets"][0]["colour"] = "red"
    doc["widgets"][1]["kind"] = "slider"
    doc["labels"] = doc["labels"][2:]
    doc["extra"] = 1
    with pytest.raises(ConfigError) as err:
        load_profile(doc)
    text = str(err.value)
    assert "colour" in text and "slider" in text and "extra" in text
    assert len(err.value.problems) >= 3


def test_unlabeled_virtual_widget_rejected_on_load():
    doc = read_json(resolve_input("a320", "profile"))
    doc["labels"] = [lab for lab in doc["labels"] if lab["control"] != "ap2_button"]
    with pytest.raises(ConfigError, match="ap2_button"):
        load_profile(doc)
    doc["widgets"] = [dict(w, physicality="physical") if w["id"] == "ap2_button" else w for w in doc["widgets"]]
    load_profile(doc)


def test_wrong_schema_version():
    doc = read_json(resolve_input("a320", "profile"))
    doc["schema_version"] = 2
    with pytest.raises(ConfigError):
        load_profile(doc)
