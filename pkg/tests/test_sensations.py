import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airhaptics._geometry import axis_angle
from airhaptics.errors import ConflictError, UnknownSensationError, ValidationError
from airhaptics.hand import HandPose, HandRegion as R, canonical_pose, make_pose
from airhaptics.modulation import AmScheme
from airhaptics.sensations import (AmBurst, Param, SensationLibrary, SensationTemplate, default_library,
                                   instantiate, resolve_targets)


def test_resolve_targets_examples(hand):
    assert resolve_targets({R.INDEX_TIP}, hand) == {R.INDEX_TIP: hand.tips[1]}
    assert resolve_targets(set(), hand) == {}
    moved = hand.transformed(np.eye(3), (0.1, 0, 0))
    a = resolve_targets({R.THUMB_TIP, R.INDEX_TIP}, hand)
    b = resolve_targets({R.THUMB_TIP, R.INDEX_TIP}, moved)
    for r in a:
        assert np.allclose(np.subtract(b[r], a[r]), (0.1, 0, 0))


def test_click_defaults(hand):
    inst = instantiate("click", None, hand)
    assert inst.is_burst
    assert inst.targets == {R.INDEX_TIP}
    assert inst.scheme.position == hand.landmark(R.INDEX_TIP)
    assert inst.scheme.scheme == AmScheme(200.0, 0.5, 1.0)
    assert inst.scheme.duration_us == 100_000
    assert len(inst.schedule()) == 4000


def test_dial_centre_is_thumb_index_midpoint():
    tips = ((0, 0, 0.2), (0.04, 0, 0.2), (0.05, 0.05, 0.2), (0.06, 0.05, 0.2), (0.07, 0.05, 0.2))
    hand = HandPose(0, (0.02, -0.05, 0.2), (0, 0, -1), (1, 0, 0), tips)
    inst = instantiate("dial", {}, hand)
    assert inst.targets == {R.THUMB_TIP, R.INDEX_TIP}
    path = inst.scheme.path
    assert path.kind == "circle"
    assert np.allclose(path.vertices[0], (0.02, 0, 0.2))
    assert path.radius == 0.01
    assert inst.scheme.draw_frequency == 100


def test_builtin_targets_and_shapes(hand):
    expected = {
        "dial": {R.THUMB_TIP, R.INDEX_TIP},
        "click": {R.INDEX_TIP},
        "presence": {R.THUMB_TIP, R.INDEX_TIP, R.MIDDLE_TIP},
        "line": {R.PALM_CENTER},
    }
    lib = default_library()
    assert sorted(lib.names()) == sorted(expected)
    for name, targets in expected.items():
        inst = lib.instantiate(name, None, hand)
        assert inst.targets == targets
    presence = lib.instantiate("presence", None, hand).scheme
    centroid = np.mean([hand.tips[0], hand.tips[1], hand.tips[2]], axis=0)
    assert np.allclose(presence.path.vertices[0], centroid)
    assert presence.path.radius == 0.02 and presence.draw_frequency == 70
    line = lib.instantiate("line", None, hand).scheme
    a, b = np.asarray(line.path.vertices)
    assert np.linalg.norm(b - a) == pytest.approx(0.06)
    assert np.allclose((a + b) / 2, hand.palm_center)
    assert np.allclose(np.cross(b - a, hand.lateral_axis), 0)


def test_unknown_name_and_bad_params(hand):
    with pytest.raises(UnknownSensationError):
        instantiate("warp", None, hand)
    with pytest.raises(ValidationError):
        instantiate("dial", {"frequency": 500}, hand)
    with pytest.raises(ValidationError):
        instantiate("dial", {"spin": 1}, hand)
    with pytest.raises(ValidationError):
        instantiate("dial", {"detents": 2.5}, hand)


def _buzz(p, anchors, hand):
    return AmBurst(AmScheme(p["frequency"]), next(iter(anchors.values())), None)


def test_register_custom(hand):
    lib = SensationLibrary()
    lib.register(SensationTemplate("buzz", {R.PALM_CENTER}, {"frequency": Param(150, 10, 400)}, _buzz))
    assert len(lib.names()) == 5
    inst = lib.instantiate("buzz", {"frequency": 120}, hand)
    assert inst.scheme.scheme.frequency == 120
    with pytest.raises(ValidationError):
        inst.schedule()
    assert len(inst.schedule(1_000)) == 40
    with pytest.raises(ConflictError):
        lib.register(SensationTemplate("dial", {R.PALM_CENTER}, {}, _buzz))
    with pytest.raises(ConflictError):
        lib.register(SensationTemplate("buzz", {R.PALM_CENTER}, {}, _buzz))
    # the shared default library is untouched
    assert "buzz" not in default_library()


def test_targets_override(hand):
    inst = default_library().instantiate("click", None, hand, targets={"middle_tip"})
    assert inst.targets == {R.MIDDLE_TIP}
    assert inst.scheme.position == hand.landmark(R.MIDDLE_TIP)


def test_deterministic(hand):
    assert instantiate("presence", {"radius": 0.03}, hand) == instantiate("presence", {"radius": 0.03}, hand)


def test_builtin_frequencies_in_band(hand):
    for name in default_library().names():
        inst = instantiate(name, None, hand)
        f = inst.scheme.scheme.frequency if inst.is_burst else inst.scheme.draw_frequency
        assert 10 <= f <= 400


@settings(max_examples=25, deadline=None)
@given(st.floats(-math.pi, math.pi), st.tuples(*[st.floats(-0.5, 0.5)] * 3))
def test_instantiation_is_pose_equivariant(angle, shift):
    rot = axis_angle((0.3, -0.5, 0.8), angle)
    hand = canonical_pose()
    moved = hand.transformed(rot, shift)
    for name in ("dial", "presence", "line", "click"):
        a = instantiate(name, None, hand)
        b = instantiate(name, None, moved)
        if a.is_burst:
            assert np.allclose(b.scheme.position, rot @ np.asarray(a.scheme.position) + shift, atol=1e-12)
            continue
        expect = a.scheme.path.transformed(rot, shift)
        got = b.scheme.path
        assert np.allclose(got.vertices, expect.vertices, atol=1e-12)
        if got.kind == "circle":
            assert np.allclose(got.normal, expect.normal, atol=1e-12)
            assert np.allclose(got.start, expect.start, atol=1e-12)
        ta = np.arange(0, 20_000, 25)
        assert np.allclose(b.scheme.positions_at(ta), a.scheme.positions_at(ta) @ rot.T + shift, atol=1e-12)


def test_hand_pose_validation():
    with pytest.raises(ValidationError):
        HandPose(0, (0, 0, 0), (0, 0, 1), (0, 0, 1), ((0, 0, 0),) * 5)
    with pytest.raises(ValidationError):
        HandPose(0, (0, 0, 0), (0, 0, 2), (1, 0, 0), ((0, 0, 0),) * 5)
    with pytest.raises(ValidationError):
        HandPose(-1, (0, 0, 0), (0, 0, 1), (1, 0, 0), ((0, 0, 0),) * 5)
    p = make_pose(5, (0, 0, 0.3))
    assert np.allclose(p.forward_axis, (0, 1, 0))
