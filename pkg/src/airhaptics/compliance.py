"""FAA FTD/FFS rule checks for a haptic cockpit profile, plus a latency model.

Findings use three statuses ordered by severity: ``opportunity`` (green),
``potential_risk`` (amber) and ``risk`` (red). The report verdict is the
worst finding. Only criteria quoted for this concept are encoded; this is
not a certification tool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .errors import ValidationError
from .interaction import FLIGHT_CONTROL_CATEGORIES, CockpitProfile, ControlWidget

DISCLAIMER = ("Engineering screening only: encodes a handful of quoted FAA FTD/FFS criteria "
              "and is not a certification or qualification tool.")


class SimLevel(str, Enum):
    FTD4 = "FTD4"
    FTD5 = "FTD5"
    FTD6 = "FTD6"
    FTD7 = "FTD7"
    FFS_A = "FFS_A"
    FFS_B = "FFS_B"
    FFS_C = "FFS_C"
    FFS_D = "FFS_D"

    @classmethod
    def parse(cls, text: str) -> "SimLevel":
        key = str(text).strip().upper().replace("-", "_")
        if key.startswith("FFS") and "_" not in key and len(key) == 4:
            key = "FFS_" + key[3]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown simulator level {text!r}") from None

    @property
    def is_ffs(self) -> bool:
        return self.value.startswith("FFS")


STATUSES = ("opportunity", "potential_risk", "risk")
COLORS = {"opportunity": "green", "potential_risk": "amber", "risk": "red"}
VERDICTS = {"opportunity": "clear", "potential_risk": "amber", "risk": "red"}
_SEVERITY = {s: i for i, s in enumerate(STATUSES)}


@dataclass(frozen=True)
class Finding:
    rule_id: str
    status: str
    subject: str
    citation: str
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValidationError(f"unknown finding status {self.status!r}")

    @property
    def color(self) -> str:
        return COLORS[self.status]

    def to_dict(self) -> dict:
        d = {"rule_id": self.rule_id, "status": self.status, "color": self.color,
             "subject": self.subject, "citation": self.citation}
        if self.note:
            d["note"] = self.note
        return d


# quoted criteria, keyed by rule id
CITATIONS = {
    "FTD4-controls": "All controls, switches, and knobs may be touch sensitive activation "
                     "(not capable of manual manipulation of the flight controls) or may physically "
                     "replicate the aircraft in control operation.",
    "FTD5-controls": "Primary and secondary flight controls (e.g., rudder, aileron, elevator, flaps, "
                     "spoilers/speed brakes, engine controls, landing gear, nosewheel steering, trim, "
                     "brakes) must be physical controls. All other controls, switches, and knobs may be "
                     "touch sensitive activation.",
    "FTD6-controls": "All controls, switches, and knobs must physically replicate the aircraft in "
                     "control operation.",
    "FTD7-controls": "All controls, switches, and knobs must physically replicate the aircraft in "
                     "control operation.",
    "FFS-replica": "The simulator must have a flight deck that is a replica of the airplane simulated "
                   "with controls ... properly located, functionally accurate and replicating the airplane.",
    "FFS-control-forces": "The simulator must provide pilot controls with control forces and control "
                          "travel that correspond to the simulated airplane.",
    "FFS-control-feel": "Simulator control feel dynamics must replicate the airplane.",
    "FFS-stick-pusher": "For aircraft equipped with a stick pusher system, control forces, displacement, "
                        "and surface position must correspond to that of the airplane being simulated.",
    "FFS-visual": "The visual system must be free from optical discontinuities.",
    "FFS-thrust-effect": "The aerodynamic modeling in the simulator must include: Normal and reverse "
                         "dynamic thrust effect on control surfaces.",
    "FFS-latency-AB": "300 milliseconds of the airplane response.",
    "FFS-latency-CD": "100 milliseconds of the airplane response (motion and instrument cues). "
                      "120 milliseconds of the airplane response (visual system cues).",
    "FTD-latency": "No transport-delay limit is quoted for flight training devices.",
}

ASSUMPTIONS = (
    "Haptic cues are budgeted as motion/instrument cues (100 ms at FFS C/D), the stricter of the two limits.",
    "Any virtual control fails the FFS flight-deck replica criterion at every level A-D.",
    "Latency stage delays are engineering estimates; override them with measured values.",
)


def _rule_for(level: SimLevel) -> str:
    return "FFS-replica" if level.is_ffs else f"{level.value}-controls"


def classify_control(widget: ControlWidget, level: SimLevel) -> Finding:
    """Physical-control rule for one widget at one level."""
    level = SimLevel(level)
    rule = _rule_for(level)
    if not widget.is_virtual or level is SimLevel.FTD4:
        status = "opportunity"
    elif level is SimLevel.FTD5:
        status = "risk" if widget.category in FLIGHT_CONTROL_CATEGORIES else "opportunity"
    else:
        status = "risk"
    return Finding(rule, status, widget.id, CITATIONS[rule])


@dataclass(frozen=True)
class LatencyPipeline:
    stages: tuple[tuple[str, int], ...] = (
        ("tracking", 8000),
        ("contact_and_scheduling", 2000),
        ("phase_solve", 500),
        ("device_buffering", 1000),
    )
    speed_of_sound: float = 346.0

    def __post_init__(self):
        stages = tuple((str(n), int(d)) for n, d in self.stages)
        if any(d < 0 for _, d in stages):
            raise ValidationError("stage delays must be non-negative")
        names = [n for n, _ in stages]
        if len(set(names)) != len(names) or "acoustic_transit" in names:
            raise ValidationError("stage names must be unique and not 'acoustic_transit'")
        if not self.speed_of_sound > 0:
            raise ValidationError("speed_of_sound must be positive")
        object.__setattr__(self, "stages", stages)

    def scaled(self, factor: float) -> "LatencyPipeline":
        return LatencyPipeline(tuple((n, round(d * factor)) for n, d in self.stages), self.speed_of_sound)


@dataclass(frozen=True)
class LatencyBreakdown:
    stages: tuple[tuple[str, int], ...]
    total_us: int

    def to_dict(self) -> dict:
        return {"stages": [{"name": n, "delay_us": d} for n, d in self.stages], "total_us": self.total_us}


def simulate_latency(pipeline: LatencyPipeline, focal_distance: float) -> LatencyBreakdown:
    if not focal_distance >= 0:
        raise ValidationError("focal distance must be non-negative")
    transit = round(1e6 * focal_distance / pipeline.speed_of_sound)
    stages = pipeline.stages + (("acoustic_transit", transit),)
    return LatencyBreakdown(stages, sum(d for _, d in stages))


BUDGET_US = {SimLevel.FFS_A: 300_000, SimLevel.FFS_B: 300_000, SimLevel.FFS_C: 100_000, SimLevel.FFS_D: 100_000}


def check_latency_budget(total_us: int, level: SimLevel) -> Finding:
    if not total_us >= 0:
        raise ValidationError("latency total must be non-negative")
    level = SimLevel(level)
    if not level.is_ffs:
        return Finding("FTD-latency", "opportunity", "transport_delay", CITATIONS["FTD-latency"],
                       f"{total_us} us measured; no budget applies")
    budget = BUDGET_US[level]
    rule = "FFS-latency-AB" if budget == 300_000 else "FFS-latency-CD"
    status = "opportunity" if total_us <= budget else "risk"
    return Finding(rule, status, "transport_delay", CITATIONS[rule], f"{total_us} us against {budget} us budget")


@dataclass(frozen=True)
class ComplianceReport:
    level: SimLevel
    findings: tuple[Finding, ...]
    assumptions: tuple[str, ...] = ASSUMPTIONS
    disclaimer: str = DISCLAIMER

    @property
    def verdict(self) -> str:
        return VERDICTS[worst_status(self.findings)]

    def red_subjects(self, rule_prefix: str | None = None) -> list[str]:
        return [f.subject for f in self.findings
                if f.status == "risk" and (rule_prefix is None or f.rule_id.startswith(rule_prefix))]

    def to_dict(self) -> dict:
        return {
            "level": self.level.value,
            "verdict": self.verdict,
            "findings": [f.to_dict() for f in self.findings],
            "assumptions": list(self.assumptions),
            "disclaimer": self.disclaimer,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self, color: bool = False) -> str:
        ansi = {"green": "\033[32m", "amber": "\033[33m", "red": "\033[31m"}
        lines = [f"{self.level.value}: verdict {self.verdict.upper()}"]
        for f in self.findings:
            tag = f"[{f.color.upper():5}]"
            if color:
                tag = ansi[f.color] + tag + "\033[0m"
            extra = f" ({f.note})" if f.note else ""
            lines.append(f"{tag} {f.rule_id:<20} {f.subject}{extra}")
        lines.append("")
        lines.extend(f"assumption: {a}" for a in self.assumptions)
        lines.append(self.disclaimer)
        return "\n".join(lines) + "\n"


def worst_status(findings: Sequence[Finding]) -> str:
    if not findings:
        return "opportunity"
    return max((f.status for f in findings), key=_SEVERITY.__getitem__)


def _total(measured) -> int:
    if isinstance(measured, LatencyBreakdown):
        return measured.total_us
    if isinstance(measured, Mapping):
        return int(measured["total_us"])
    return int(measured)


def assess_compliance(profile: CockpitProfile, level: SimLevel, measured_latency=None) -> ComplianceReport:
    """Control findings for every widget, then level-scoped criteria.

    ``measured_latency`` may be a :class:`LatencyBreakdown`, a mapping with
    ``total_us`` or a plain number of microseconds.
    """
    level = SimLevel(level)
    findings = [classify_control(w, level) for w in profile.widgets]
    virtual_flight = [w for w in profile.widgets if w.is_virtual and w.category in FLIGHT_CONTROL_CATEGORIES]
    if level.is_ffs:
        if virtual_flight:
            findings.append(_criterion("FFS-control-forces", "potential_risk", "control_forces_and_travel"))
        if level in (SimLevel.FFS_C, SimLevel.FFS_D):
            if virtual_flight:
                findings.append(_criterion("FFS-control-feel", "potential_risk", "control_feel_dynamics"))
            if any(w.is_virtual and w.kind == "stick_or_rudder" for w in profile.widgets):
                findings.append(_criterion("FFS-stick-pusher", "potential_risk", "stick_pusher_soc"))
        findings.append(_criterion("FFS-visual", "potential_risk", "visual_continuity",
                                   "outside haptic rendering; flagged for completeness"))
        if level is SimLevel.FFS_D:
            findings.append(_criterion("FFS-thrust-effect", "potential_risk", "thrust_effect_feedback"))
    if measured_latency is not None:
        findings.append(check_latency_budget(_total(measured_latency), level))
    elif level.is_ffs:
        rule = "FFS-latency-AB" if BUDGET_US[level] == 300_000 else "FFS-latency-CD"
        findings.append(_criterion(rule, "potential_risk", "transport_delay", "not measured"))
    return ComplianceReport(level, tuple(findings))


def _criterion(rule: str, status: str, subject: str, note: str = "") -> Finding:
    return Finding(rule, status, subject, CITATIONS[rule], note)
