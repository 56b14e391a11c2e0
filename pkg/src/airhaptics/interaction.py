"""Cockpit runtime: widgets, haptic labels, contact detection and the session engine.

A session replays a hand trajectory against a cockpit profile and a device
rig. Each tracking frame is held until the next one; within it the haptic
clock ticks at the update rate, every active sensation emits one focal
sample per tick, each sample is routed to a device and snapped to the 4 mm
lattice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._geometry import Vec3, as_tuple_matrix, is_rotation, vec3
from .errors import ConfigError, ProfileIntegrityError, ValidationError
from .hand import HandPose, HandRegion, region
from .modulation import AmScheme, lattice_index, sample_spacing_us
from .rig import RigConfig, select_devices
from .sensations import AmBurst, SensationInstance, SensationLibrary, default_library

UNREACHABLE = "unreachable"

WIDGET_KINDS = ("rotary_dial", "push_button", "toggle_switch", "landing_gear_lever",
                "throttle_lever", "stick_or_rudder", "other")
CATEGORIES = ("primary_flight_control", "secondary_flight_control", "systems_control")
FLIGHT_CONTROL_CATEGORIES = frozenset(CATEGORIES[:2])

# widget kind -> sensation used when a profile does not say otherwise
DEFAULT_BINDINGS = {
    "rotary_dial": "dial",
    "push_button": "click",
    "landing_gear_lever": "presence",
    "throttle_lever": "line",
}

DETENT_CLICK = AmScheme(200.0, 0.5, 1.0)
DETENT_CLICK_US = 20_000

_IDENTITY = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("sphere radius must be positive")

    def contains_local(self, p: np.ndarray) -> np.ndarray:
        return np.einsum("...k,...k->...", p, p) <= self.radius ** 2


@dataclass(frozen=True)
class BoxVolume:
    """Box aligned with the widget's own axes, given by half extents."""

    half_extents: Vec3

    def __post_init__(self):
        object.__setattr__(self, "half_extents", vec3(self.half_extents, "half_extents"))
        if any(not h > 0 for h in self.half_extents):
            raise ValidationError("box half extents must be positive")

    def contains_local(self, p: np.ndarray) -> np.ndarray:
        return np.all(np.abs(p) <= np.asarray(self.half_extents), axis=-1)


@dataclass(frozen=True)
class ControlWidget:
    id: str
    kind: str
    category: str
    panel: int
    position: Vec3
    volume: Sphere | BoxVolume
    physicality: str = "virtual"
    rotation: tuple[Vec3, Vec3, Vec3] = _IDENTITY

    def __post_init__(self):
        if self.kind not in WIDGET_KINDS:
            raise ValidationError(f"widget {self.id}: unknown kind {self.kind!r}")
        if self.category not in CATEGORIES:
            raise ValidationError(f"widget {self.id}: unknown category {self.category!r}")
        if self.physicality not in ("virtual", "physical"):
            raise ValidationError(f"widget {self.id}: physicality must be virtual or physical")
        object.__setattr__(self, "position", vec3(self.position, "position"))
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3) or not is_rotation(r):
            raise ValidationError(f"widget {self.id}: rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", as_tuple_matrix(r))

    @property
    def is_virtual(self) -> bool:
        return self.physicality == "virtual"

    def contains(self, points) -> np.ndarray:
        """Inclusive containment test for an (n, 3) array of scene points."""
        local = (np.asarray(points, dtype=float) - np.asarray(self.position)) @ np.asarray(self.rotation)
        return self.volume.contains_local(local)

    def transformed(self, rotation, translation) -> "ControlWidget":
        r = np.asarray(rotation, dtype=float)
        return ControlWidget(self.id, self.kind, self.category, self.panel,
                             tuple(r @ np.asarray(self.position) + np.asarray(translation)),
                             self.volume, self.physicality, r @ np.asarray(self.rotation))

    def with_physicality(self, physicality: str) -> "ControlWidget":
        return ControlWidget(self.id, self.kind, self.category, self.panel, self.position,
                             self.volume, physicality, self.rotation)


@dataclass(frozen=True)
class HapticLabel:
    control_id: str
    sensation: str
    targets: frozenset | None = None
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.targets is not None:
            object.__setattr__(self, "targets", frozenset(region(r) for r in self.targets))
        if isinstance(self.params, Mapping):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    @property
    def param_map(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class Panel:
    number: int
    name: str = ""


@dataclass(frozen=True)
class CockpitProfile:
    """Widgets and labels for one aircraft. Ids and references are checked here;
    label coverage is enforced by :func:`validate_profile` / :func:`load_profile`."""

    aircraft: str
    panels: tuple[Panel, ...]
    widgets: tuple[ControlWidget, ...]
    labels: tuple[HapticLabel, ...]

    def __post_init__(self):
        for name in ("panels", "widgets", "labels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = _structure_problems(self)
        if problems:
            raise ConfigError(problems, f"profile {self.aircraft!r}")

    def widget(self, control_id: str) -> ControlWidget:
        for w in self.widgets:
            if w.id == control_id:
                return w
        raise ValidationError(f"no control {control_id!r} in profile")

    def label_for(self, control_id: str) -> HapticLabel | None:
        for lab in self.labels:
            if lab.control_id == control_id:
                return lab
        return None

    def transformed(self, rotation, translation) -> "CockpitProfile":
        return CockpitProfile(self.aircraft, self.panels,
                              tuple(w.transformed(rotation, translation) for w in self.widgets), self.labels)

    def with_physical(self, control_ids: Iterable[str]) -> "CockpitProfile":
        ids = set(control_ids)
        return CockpitProfile(self.aircraft, self.panels,
                              tuple(w.with_physicality("physical") if w.id in ids else w for w in self.widgets),
                              self.labels)


def _dupes(items):
    seen, out = set(), []
    for i in items:
        if i in seen and i not in out:
            out.append(i)
        seen.add(i)
    return out


def _structure_problems(p: CockpitProfile) -> list[str]:
    problems = []
    for d in _dupes([x.number for x in p.panels]):
        problems.append(f"duplicate panel number {d}")
    for d in _dupes([w.id for w in p.widgets]):
        problems.append(f"duplicate control id {d!r}")
    for d in _dupes([lab.control_id for lab in p.labels]):
        problems.append(f"control {d!r} has more than one label")
    panels = {x.number for x in p.panels}
    ids = {w.id for w in p.widgets}
    for w in p.widgets:
        if w.panel not in panels:
            problems.append(f"control {w.id!r} refers to unknown panel {w.panel}")
    for lab in p.labels:
        if lab.control_id not in ids:
            problems.append(f"label refers to unknown control {lab.control_id!r}")
    return problems


def validate_profile(profile: CockpitProfile, library: SensationLibrary | None = None) -> list[str]:
    """Everything wrong with ``profile`` beyond structure; empty when usable."""
    library = library or default_library()
    problems = []
    for w in profile.widgets:
        if w.is_virtual and profile.label_for(w.id) is None:
            problems.append(f"virtual control {w.id!r} has no haptic label")
    for lab in profile.labels:
        if lab.sensation not in library:
            problems.append(f"label on {lab.control_id!r} uses unknown sensation {lab.sensation!r}")
            continue
        template = library.get(lab.sensation)
        try:
            template.resolve_params(lab.param_map)
        except ValidationError as exc:
            problems.append(f"label on {lab.control_id!r}: {exc}")
        if lab.targets is not None and not lab.targets:
            problems.append(f"label on {lab.control_id!r} has an empty target set")
    return problems


def detect_contacts(hand: HandPose, profile: CockpitProfile) -> dict[str, frozenset]:
    """Control id -> hand regions whose landmark lies inside that control's volume."""
    regions = list(HandRegion)
    pts = np.asarray([hand.landmark(r) for r in regions])
    out = {}
    for w in profile.widgets:
        inside = w.contains(pts)
        if inside.any():
            out[w.id] = frozenset(r for r, hit in zip(regions, inside) if hit)
    return dict(sorted(out.items()))


def activate(contacts: Mapping[str, Iterable], profile: CockpitProfile, hand: HandPose,
             library: SensationLibrary | None = None) -> list[SensationInstance]:
    """One instance per contacted virtual control, in control-id order."""
    library = library or default_library()
    out = []
    for cid in sorted(contacts):
        widget = profile.widget(cid)
        if not widget.is_virtual:
            continue
        label = profile.label_for(cid)
        if label is None:
            raise ProfileIntegrityError(f"virtual control {cid!r} was touched but has no haptic label")
        out.append(library.instantiate(label.sensation, label.param_map, hand, label.targets, control_id=cid))
    return out


@dataclass(frozen=True, order=True)
class HapticEvent:
    t: int
    device: str
    control: str
    sensation: str
    position_mm: tuple[int, int, int]
    envelope: float

    def to_json(self) -> str:
        x, y, z = self.position_mm
        return json.dumps({"t_us": self.t, "device": self.device, "x_mm": x, "y_mm": y, "z_mm": z,
                           "envelope": self.envelope, "sensation": self.sensation, "control": self.control})


def event_log(events: Iterable[HapticEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)


@dataclass
class _Active:
    onset: int
    angle: float | None = None


@dataclass
class _Burst:
    control: str
    onset: int


@dataclass
class SessionSamples:
    """Column-wise session output before snapping, in emission order."""

    t: np.ndarray
    positions: np.ndarray
    envelope: np.ndarray
    device: list
    control: list
    sensation: list
    frames: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)


class Session:
    """Stateful engine behind :func:`run_session`.

    ``advance(pose, until)`` renders the ticks in ``[pose.t, until)`` with the
    pose held constant. Contact onsets are tracked between frames so click
    bursts fire only on the rising edge.
    """

    def __init__(self, profile: CockpitProfile, rig: RigConfig, update_rate: float = 40_000,
                 library: SensationLibrary | None = None, t_origin: int = 0):
        self.library = library or default_library()
        _require_valid(profile, self.library)
        self.profile = profile
        self.rig = rig
        self.update_rate = update_rate
        self.spacing = sample_spacing_us(update_rate)
        self.t_origin = int(t_origin)
        self._active: dict[str, _Active] = {}
        self._bursts: list[_Burst] = []
        self._chunks: list[tuple] = []
        self.frames: list[tuple[int, frozenset]] = []

    def switch_profile(self, profile: CockpitProfile) -> "Session":
        """Swap aircraft; nothing from the old profile stays active."""
        _require_valid(profile, self.library)
        self.profile = profile
        self._active.clear()
        self._bursts.clear()
        return self

    def _ticks(self, start: int, stop: int) -> np.ndarray:
        s = self.spacing
        first = -((self.t_origin - start) // s)
        last = -((self.t_origin - stop) // s)
        return self.t_origin + np.arange(first, last, dtype=np.int64) * s

    def advance(self, pose: HandPose, until: int):
        ticks = self._ticks(pose.t, until)
        contacts = detect_contacts(pose, self.profile)
        self.frames.append((pose.t, frozenset(contacts)))
        instances = activate(contacts, self.profile, pose, self.library)
        onset_t = int(ticks[0]) if len(ticks) else int(self._ticks(pose.t, pose.t + self.spacing + 1)[0])
        live = {inst.control_id for inst in instances}
        for cid in list(self._active):
            if cid not in live:
                del self._active[cid]
        self._bursts = [b for b in self._bursts if b.control in live]
        for inst in instances:
            cid = inst.control_id
            state = self._active.get(cid)
            if state is None:
                state = self._active[cid] = _Active(onset_t)
            detents = int(dict(inst.params).get("detents", 0))
            if detents:
                angle = _twist_angle(pose, self.profile.widget(cid))
                if state.angle is not None and _crossed(state.angle, angle, detents):
                    self._bursts.append(_Burst(cid, onset_t))
                state.angle = angle
            if len(ticks):
                self._emit(inst, ticks, ticks - state.onset)
        for burst in self._bursts:
            if len(ticks):
                inst = next(i for i in instances if i.control_id == burst.control)
                pos = inst.anchor_map.get(HandRegion.INDEX_TIP, pose.landmark(HandRegion.INDEX_TIP))
                tau = ticks - burst.onset
                keep = tau < DETENT_CLICK_US
                if keep.any():
                    self._push(ticks[keep], np.tile(pos, (int(keep.sum()), 1)),
                               DETENT_CLICK.envelope_at(tau[keep]), burst.control, "click")
        self._bursts = [b for b in self._bursts if until - b.onset < DETENT_CLICK_US]

    def _emit(self, inst: SensationInstance, ticks: np.ndarray, tau: np.ndarray):
        scheme = inst.scheme
        if isinstance(scheme, AmBurst):
            keep = np.ones(len(tau), bool) if scheme.duration_us is None else tau < scheme.duration_us
            if not keep.any():
                return
            n = int(keep.sum())
            self._push(ticks[keep], np.tile(scheme.position, (n, 1)), scheme.scheme.envelope_at(tau[keep]),
                       inst.control_id, inst.name)
        else:
            self._push(ticks, scheme.positions_at(tau), np.full(len(ticks), scheme.strength),
                       inst.control_id, inst.name)

    def _push(self, t, pos, env, control, sensation):
        self._chunks.append((t, np.asarray(pos, dtype=float), np.asarray(env, dtype=float), control, sensation))

    def collect(self) -> SessionSamples:
        """Route every pending sample to a device and return the columns."""
        chunks, self._chunks = self._chunks, []
        if not chunks:
            return SessionSamples(np.empty(0, np.int64), np.empty((0, 3)), np.empty(0), [], [], [], self.frames)
        t = np.concatenate([c[0] for c in chunks])
        pos = np.concatenate([c[1] for c in chunks])
        env = np.concatenate([c[2] for c in chunks])
        control = [c[3] for c in chunks for _ in range(len(c[0]))]
        sensation = [c[4] for c in chunks for _ in range(len(c[0]))]
        choice = select_devices(self.rig, pos)
        ids = self.rig.device_ids + [UNREACHABLE]
        device = [ids[i] for i in choice.tolist()]
        return SessionSamples(t, pos, env, device, control, sensation, self.frames)


def _require_valid(profile: CockpitProfile, library: SensationLibrary):
    problems = validate_profile(profile, library)
    if problems:
        raise ProfileIntegrityError("; ".join(problems))


def _twist_angle(pose: HandPose, widget: ControlWidget) -> float:
    """Angle of the hand's lateral axis about the widget's local z axis."""
    local = np.asarray(widget.rotation).T @ np.asarray(pose.lateral_axis)
    return math.atan2(local[1], local[0])


def _crossed(before: float, after: float, detents: int) -> bool:
    step = 2 * math.pi / detents
    delta = math.remainder(after - before, 2 * math.pi)
    return math.floor(before / step) != math.floor((before + delta) / step)


def _check_trajectory(trajectory: Sequence[HandPose]):
    if not trajectory:
        raise ValidationError("trajectory is empty")
    for i, (a, b) in enumerate(zip(trajectory, trajectory[1:]), 1):
        if b.t <= a.t:
            raise ValidationError(f"trajectory timestamps must increase (pose {i})")


def _session_end(trajectory: Sequence[HandPose], end_us: int | None) -> int:
    if end_us is not None:
        if end_us <= trajectory[-1].t:
            raise ValidationError("end_us must come after the last pose")
        return int(end_us)
    if len(trajectory) == 1:
        return trajectory[0].t + round(1e6 / 90)
    gaps = sorted(b.t - a.t for a, b in zip(trajectory, trajectory[1:]))
    return trajectory[-1].t + gaps[len(gaps) // 2]


def render_session(profile: CockpitProfile, rig: RigConfig, trajectory: Sequence[HandPose],
                   update_rate: float = 40_000, library: SensationLibrary | None = None,
                   switches: Sequence[tuple[int, CockpitProfile]] = (), end_us: int | None = None) -> SessionSamples:
    """Unsnapped samples for a whole trajectory; see :func:`run_session`."""
    _check_trajectory(trajectory)
    end = _session_end(trajectory, end_us)
    session = Session(profile, rig, update_rate, library, trajectory[0].t)
    pending = sorted(switches, key=lambda s: s[0])
    for i, pose in enumerate(trajectory):
        while pending and pending[0][0] <= pose.t:
            session.switch_profile(pending.pop(0)[1])
        until = trajectory[i + 1].t if i + 1 < len(trajectory) else end
        session.advance(pose, until)
    return session.collect()


def samples_to_events(samples: SessionSamples) -> list[HapticEvent]:
    mm = (lattice_index(samples.positions) * 4).tolist()
    events = [
        HapticEvent(t, dev, ctl, sen, tuple(p), env)
        for t, dev, ctl, sen, p, env in zip(samples.t.tolist(), samples.device, samples.control,
                                             samples.sensation, mm, samples.envelope.tolist())
    ]
    events.sort(key=lambda e: (e.t, e.device, e.control, e.sensation))
    return events


def run_session(profile: CockpitProfile, rig: RigConfig, trajectory: Sequence[HandPose],
                update_rate: float = 40_000, library: SensationLibrary | None = None,
                switches: Sequence[tuple[int, CockpitProfile]] = (), end_us: int | None = None) -> list[HapticEvent]:
    """Replay ``trajectory`` and return the haptic event log ordered by (t, device).

    ``switches`` lists ``(t_us, profile)`` pairs; each takes effect at the first
    frame at or after ``t_us``. Samples no device can reach are kept with
    device ``"unreachable"``.
    """
    return samples_to_events(render_session(profile, rig, trajectory, update_rate, library, switches, end_us))


def switch_profile(session: Session, profile: CockpitProfile) -> Session:
    return session.switch_profile(profile)


# --- profile documents -----------------------------------------------------

PROFILE_KEYS = {"schema_version", "kind", "aircraft", "panels", "widgets", "labels"}


def load_profile(document: Mapping, library: SensationLibrary | None = None, source: str | None = None) -> CockpitProfile:
    """Parse and validate a profile document, reporting every problem at once."""
    from ._doc import Reader

    rd = Reader(source or "profile")
    doc = rd.obj(document, "profile", required=PROFILE_KEYS - {"kind"}, optional={"kind"})
    if doc is None:
        rd.fail()
    rd.version(doc)
    rd.kind(doc, "profile")
    aircraft = rd.string(doc, "aircraft", "profile")
    panels, widgets, labels = [], [], []
    for i, p in enumerate(rd.array(doc, "panels", "profile")):
        where = f"panels[{i}]"
        p = rd.obj(p, where, required={"number"}, optional={"name"})
        if p is not None:
            panels.append(Panel(rd.integer(p, "number", where), p.get("name", "")))
    for i, w in enumerate(rd.array(doc, "widgets", "profile")):
        where = f"widgets[{i}]"
        w = rd.obj(w, where, required={"id", "kind", "category", "panel", "position", "volume"},
                   optional={"physicality", "rotation"})
        if w is None:
            continue
        with rd.guard(where):
            widgets.append(ControlWidget(
                str(w["id"]), w["kind"], w["category"], rd.integer(w, "panel", where),
                rd.vector(w, "position", where), _volume(rd, w.get("volume"), where + ".volume"),
                w.get("physicality", "virtual"), w.get("rotation", _IDENTITY)))
    for i, lab in enumerate(rd.array(doc, "labels", "profile")):
        where = f"labels[{i}]"
        lab = rd.obj(lab, where, required={"control", "sensation"}, optional={"targets", "params"})
        if lab is None:
            continue
        with rd.guard(where):
            targets = lab.get("targets")
            labels.append(HapticLabel(str(lab["control"]), str(lab["sensation"]),
                                      None if targets is None else frozenset(region(t) for t in targets),
                                      dict(lab.get("params", {}))))
    rd.fail_if_problems()
    try:
        profile = CockpitProfile(aircraft, tuple(panels), tuple(widgets), tuple(labels))
    except ConfigError as exc:
        raise ConfigError(exc.problems, rd.source) from None
    problems = validate_profile(profile, library)
    if problems:
        raise ConfigError(problems, rd.source)
    return profile


def _volume(rd, v, where):
    v = rd.obj(v, where, required={"shape"}, optional={"radius", "half_extents"})
    if v is None:
        raise ValidationError(f"{where}: invalid volume")
    if v["shape"] == "sphere":
        return Sphere(float(v["radius"]))
    if v["shape"] == "box":
        return BoxVolume(tuple(v["half_extents"]))
    raise ValidationError(f"{where}: shape must be sphere or box")


def profile_to_document(profile: CockpitProfile) -> dict:
    def volume(v):
        if isinstance(v, Sphere):
            return {"shape": "sphere", "radius": v.radius}
        return {"shape": "box", "half_extents": list(v.half_extents)}

    widgets = []
    for w in profile.widgets:
        d = {"id": w.id, "kind": w.kind, "category": w.category, "panel": w.panel,
             "position": list(w.position), "volume": volume(w.volume), "physicality": w.physicality}
        if w.rotation != _IDENTITY:
            d["rotation"] = [list(r) for r in w.rotation]
        widgets.append(d)
    labels = []
    for lab in profile.labels:
        d = {"control": lab.control_id, "sensation": lab.sensation}
        if lab.targets is not None:
            d["targets"] = sorted(r.value for r in lab.targets)
        if lab.params:
            d["params"] = dict(lab.params)
        labels.append(d)
    return {
        "schema_version": 1,
        "kind": "profile",
        "aircraft": profile.aircraft,
        "panels": [{"number": p.number, "name": p.name} for p in profile.panels],
        "widgets": widgets,
        "labels": labels,
    }
