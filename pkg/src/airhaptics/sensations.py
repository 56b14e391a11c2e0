"""Named tactile templates that expand into AM bursts or STM paths on a hand.

The four built-ins follow the cockpit labelling scheme: ``dial`` on thumb
and index, ``click`` on the index tip, ``presence`` on thumb, index and
middle tips, ``line`` across the palm centre. Their waveforms (frequencies,
radii, lengths, burst duration) are library defaults exposed as parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from ._geometry import Vec3
from .errors import ConflictError, UnknownSensationError, ValidationError
from .hand import HandPose, HandRegion, region
from .modulation import AmScheme, Schedule, StmScheme, am_envelope, circle_path, line_path, stm_schedule

T = HandRegion


@dataclass(frozen=True)
class Param:
    default: float
    lo: float
    hi: float
    integer: bool = False

    def check(self, name: str, value) -> float:
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"parameter {name} must be numeric, got {value!r}") from None
        if self.integer and not v.is_integer():
            raise ValidationError(f"parameter {name} must be an integer")
        if not self.lo <= v <= self.hi:
            raise ValidationError(f"parameter {name}={v:g} outside [{self.lo:g}, {self.hi:g}]")
        return int(v) if self.integer else v


@dataclass(frozen=True)
class AmBurst:
    """AM at a fixed focus; ``duration_us=None`` keeps it on while active."""

    scheme: AmScheme
    position: Vec3
    duration_us: int | None = None


Rendering = Union[AmBurst, StmScheme]
Builder = Callable[[Mapping[str, float], Mapping[HandRegion, Vec3], HandPose], Rendering]


@dataclass(frozen=True)
class SensationTemplate:
    name: str
    default_targets: frozenset
    params: Mapping[str, Param]
    build: Builder = field(compare=False)

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "").replace("-", "").isalnum():
            raise ValidationError(f"invalid sensation name {self.name!r}")
        object.__setattr__(self, "default_targets", frozenset(region(r) for r in self.default_targets))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def resolve_params(self, given: Mapping | None) -> dict:
        given = dict(given or {})
        unknown = sorted(set(given) - set(self.params))
        if unknown:
            raise ValidationError(f"{self.name}: unknown parameters {', '.join(unknown)}")
        return {k: p.check(k, given.get(k, p.default)) for k, p in self.params.items()}


@dataclass(frozen=True)
class SensationInstance:
    name: str
    anchors: tuple[tuple[HandRegion, Vec3], ...]
    scheme: Rendering
    active: bool = True
    control_id: str | None = None
    params: tuple[tuple[str, float], ...] = ()

    @property
    def anchor_map(self) -> dict[HandRegion, Vec3]:
        return dict(self.anchors)

    @property
    def targets(self) -> frozenset:
        return frozenset(r for r, _ in self.anchors)

    @property
    def is_burst(self) -> bool:
        return isinstance(self.scheme, AmBurst)

    def schedule(self, duration_us: int | None = None, update_rate: float = 40_000, t0_us: int = 0) -> Schedule:
        """Expand into device samples. Bursts default to their own duration."""
        if isinstance(self.scheme, AmBurst):
            if duration_us is None:
                duration_us = self.scheme.duration_us
            if duration_us is None:
                raise ValidationError("continuous AM needs an explicit duration")
            return am_envelope(self.scheme.scheme, duration_us, update_rate, self.scheme.position, t0_us)
        if duration_us is None:
            raise ValidationError("STM sensations need an explicit duration")
        return stm_schedule(self.scheme, duration_us, update_rate, t0_us)


def resolve_targets(regions: Iterable, hand: HandPose) -> dict[HandRegion, Vec3]:
    return {region(r): hand.landmark(region(r)) for r in regions}


def _centroid(anchors: Mapping[HandRegion, Vec3]) -> Vec3:
    c = np.mean(np.asarray([anchors[r] for r in sorted(anchors)]), axis=0)
    return tuple(c.tolist())


def _click(p, anchors, hand):
    am = AmScheme(p["frequency"], p["duty"], p["strength"])
    return AmBurst(am, _centroid(anchors), int(p["duration_us"]))


def _circle(p, anchors, hand):
    path = circle_path(_centroid(anchors), p["radius"], hand.palm_normal, hand.lateral_axis)
    return StmScheme(path, p["frequency"], p["strength"])


def _line(p, anchors, hand):
    c = np.asarray(_centroid(anchors))
    half = 0.5 * p["length"] * np.asarray(hand.lateral_axis)
    return StmScheme(line_path(tuple(c - half), tuple(c + half)), p["frequency"], p["strength"])


def _freq(default):
    return Param(default, 10.0, 400.0)


STRENGTH = Param(1.0, 0.0, 1.0)


def builtin_templates() -> tuple[SensationTemplate, ...]:
    return (
        SensationTemplate("dial", {T.THUMB_TIP, T.INDEX_TIP}, {
            "frequency": _freq(100.0), "radius": Param(0.01, 0.002, 0.1),
            "strength": STRENGTH, "detents": Param(0, 0, 360, integer=True),
        }, _circle),
        SensationTemplate("click", {T.INDEX_TIP}, {
            "frequency": _freq(200.0), "duty": Param(0.5, 1e-6, 1.0),
            "duration_us": Param(100_000, 1_000, 10_000_000, integer=True), "strength": STRENGTH,
        }, _click),
        SensationTemplate("presence", {T.THUMB_TIP, T.INDEX_TIP, T.MIDDLE_TIP}, {
            "frequency": _freq(70.0), "radius": Param(0.02, 0.002, 0.1), "strength": STRENGTH,
        }, _circle),
        SensationTemplate("line", {T.PALM_CENTER}, {
            "frequency": _freq(100.0), "length": Param(0.06, 0.004, 0.3), "strength": STRENGTH,
        }, _line),
    )


BUILTIN_NAMES = frozenset(t.name for t in builtin_templates())


class SensationLibrary:
    """Registry of templates by name. Built-ins can never be replaced."""

    def __init__(self, templates: Iterable[SensationTemplate] = ()):
        self._templates: dict[str, SensationTemplate] = {t.name: t for t in builtin_templates()}
        for t in templates:
            self.register(t)

    def register(self, template: SensationTemplate) -> "SensationLibrary":
        if template.name in self._templates:
            kind = "built-in" if template.name in BUILTIN_NAMES else "registered"
            raise ConflictError(f"sensation {template.name!r} is already {kind}")
        self._templates[template.name] = template
        return self

    def __contains__(self, name):
        return name in self._templates

    def names(self) -> list[str]:
        return list(self._templates)

    def get(self, name: str) -> SensationTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise UnknownSensationError(f"no sensation named {name!r}") from None

    def instantiate(self, name: str, params: Mapping | None, hand: HandPose,
                    targets: Iterable | None = None, control_id: str | None = None) -> SensationInstance:
        template = self.get(name)
        values = template.resolve_params(params)
        regions = template.default_targets if targets is None else frozenset(region(r) for r in targets)
        if not regions:
            raise ValidationError(f"{name}: needs at least one target region")
        anchors = resolve_targets(regions, hand)
        scheme = template.build(values, anchors, hand)
        return SensationInstance(
            name,
            tuple(sorted(anchors.items(), key=lambda kv: kv[0].value)),
            scheme,
            True,
            control_id,
            tuple(sorted(values.items())),
        )


_DEFAULT = SensationLibrary()


def default_library() -> SensationLibrary:
    """A fresh library holding only the built-ins."""
    return SensationLibrary()


def instantiate(name: str, params: Mapping | None, hand: HandPose, library: SensationLibrary | None = None,
                **kw) -> SensationInstance:
    return (library or _DEFAULT).instantiate(name, params, hand, **kw)
