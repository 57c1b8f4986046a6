"""Branch enumeration over measurement timelines and counterfactual queries.

A timeline is an initial pure-state ensemble followed by an ordered list of
projective measurements. Enumerating it yields every outcome history with
its orthodox probability (Lüders collapse between events). A counterfactual
query edits the timeline (insert, remove or replace an event), conditions
on the recorded outcomes of events that happen strictly before the edit,
and classifies every outcome of the edited timeline as Forced, Possible or
Impossible.

Only the "hold prior outcomes" matching policy is offered. Holding later
recorded outcomes fixed across an edit would assume the answer to the
question being asked.

The engine says nothing about whether an unmeasured observable "has" a
value; Forced/Possible/Impossible are statements about conditional
probabilities only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import apparatus, hilbert
from .hilbert import TOL, StateVector
from .measurement import (
    ProjectiveMeasurement,
    Step,
    as_measurement,
    format_outcome,
    measure_projective,
)


class ImpossibleRecord(ValueError):
    """Conditioning on a record that has zero probability under the timeline."""


@dataclass(frozen=True)
class TimelineEvent:
    label: str
    step: Step

    def __post_init__(self):
        object.__setattr__(self, "step", as_measurement(self.step))

    @property
    def measurement(self) -> ProjectiveMeasurement:
        return self.step

    @property
    def outcomes(self) -> tuple:
        return self.step.outcomes

    def describe(self) -> str:
        return f"{self.step.name or 'measurement'}@{self.label}"


@dataclass(frozen=True)
class Timeline:
    initial: tuple[tuple[float, StateVector], ...]
    events: tuple[TimelineEvent, ...]

    def __post_init__(self):
        initial = tuple((float(w), s) for w, s in self.initial)
        events = tuple(self.events)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "events", events)
        if not initial:
            raise ValueError("initial ensemble is empty")
        weights = [w for w, _ in initial]
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > TOL:
            raise ValueError(f"ensemble weights must be nonnegative and sum to 1, got {weights}")
        dims = {s.dim for _, s in initial} | {e.measurement.dim for e in events}
        if len(dims) != 1:
            raise ValueError(f"inconsistent dimensions in timeline: {sorted(dims)}")
        tags = self.tags
        if len(set(tags)) != len(tags):
            raise ValueError(f"event labels must be unique: {tags}")

    @classmethod
    def pure(cls, state: StateVector, events: Sequence[TimelineEvent]) -> "Timeline":
        return cls(((1.0, state),), tuple(events))

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.events)

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise KeyError(f"no event labelled {tag!r} in timeline {self.tags}") from None

    def event(self, tag: str) -> TimelineEvent:
        return self.events[self.index(tag)]


@dataclass(frozen=True)
class Branch:
    member: int
    tags: tuple[str, ...]
    outcomes: tuple
    probability: float

    def outcome(self, tag: str):
        return self.outcomes[self.tags.index(tag)]

    def record(self) -> dict:
        return dict(zip(self.tags, self.outcomes))


def enumerate_branches(tl: Timeline) -> list[Branch]:
    """Every positive-probability (ensemble member, outcome history) pair."""
    tags = tl.tags
    branches = []

    def walk(member, weight, state, i, history):
        if i == len(tl.events):
            branches.append(Branch(member, tags, tuple(history), weight))
            return
        for outcome, entry in measure_projective(state, tl.events[i].measurement).entries.items():
            p = weight * entry.probability
            if p < TOL:
                continue
            walk(member, p, entry.post_state, i + 1, history + [outcome])

    for member, (weight, state) in enumerate(tl.initial):
        if weight >= TOL:
            walk(member, weight, state, 0, [])
    return branches


def history_distribution(branches: Sequence[Branch]) -> dict[tuple, float]:
    """Outcome history -> total probability, summed over ensemble members."""
    out: dict[tuple, float] = {}
    for b in branches:
        out[b.outcomes] = out.get(b.outcomes, 0.0) + b.probability
    return out


def condition(branches: Sequence[Branch], record: Mapping[str, object]) -> list[Branch]:
    """Branches consistent with ``record``, renormalized."""
    if not branches:
        raise ImpossibleRecord("no branches to condition")
    tags = branches[0].tags
    for tag in record:
        if tag not in tags:
            raise KeyError(f"record tag {tag!r} is not an event of the timeline {tags}")
    kept = [b for b in branches if all(b.outcome(t) == v for t, v in record.items())]
    total = sum(b.probability for b in kept)
    if total < TOL:
        shown = {t: format_outcome(v) for t, v in record.items()}
        raise ImpossibleRecord(f"record impossible under this timeline: {shown}")
    return [Branch(b.member, b.tags, b.outcomes, b.probability / total) for b in kept]


def marginal(branches: Sequence[Branch], tag: str) -> dict:
    out: dict = {}
    for b in branches:
        v = b.outcome(tag)
        out[v] = out.get(v, 0.0) + b.probability
    return out


class Status(str, enum.Enum):
    FORCED = "Forced"
    POSSIBLE = "Possible"
    IMPOSSIBLE = "Impossible"


@dataclass(frozen=True)
class Classification:
    status: Status
    probability: float

    @classmethod
    def of(cls, p: float) -> "Classification":
        if p >= 1.0 - TOL:
            return cls(Status.FORCED, 1.0)
        if p < TOL:
            return cls(Status.IMPOSSIBLE, 0.0)
        return cls(Status.POSSIBLE, p)

    def to_dict(self) -> dict:
        return {"status": self.status.value, "probability": self.probability}

    def __str__(self):
        if self.status is Status.POSSIBLE:
            return f"Possible ({self.probability:.6g})"
        return self.status.value


def _classify_branches(branches: Sequence[Branch], tag: str, value) -> Classification:
    return Classification.of(marginal(branches, tag).get(value, 0.0))


def classify(tl: Timeline, record: Mapping[str, object], query_tag: str, query_value) -> Classification:
    tl.index(query_tag)
    branches = condition(enumerate_branches(tl), record)
    return _classify_branches(branches, query_tag, query_value)


class MatchingPolicy(enum.Enum):
    HOLD_PRIOR_OUTCOMES = "hold-prior-outcomes"


@dataclass(frozen=True)
class Modification:
    """Edit of a timeline.

    ``insert`` places ``new_event`` immediately before the event labelled
    ``position`` (or at the end when ``position`` is None); ``replace`` swaps
    the event at ``position`` for ``new_event``; ``remove`` drops it.
    """

    kind: str
    position: str | None
    new_event: TimelineEvent | None = None

    def __post_init__(self):
        if self.kind not in ("insert", "remove", "replace"):
            raise ValueError(f"unknown modification kind {self.kind!r}")
        if self.kind in ("insert", "replace") and self.new_event is None:
            raise ValueError(f"{self.kind} needs a new event")
        if self.kind in ("remove", "replace") and self.position is None:
            raise ValueError(f"{self.kind} needs a position")

    @classmethod
    def insert(cls, new_event: TimelineEvent, before: str | None = None) -> "Modification":
        return cls("insert", before, new_event)

    @classmethod
    def replace(cls, position: str, new_event: TimelineEvent) -> "Modification":
        return cls("replace", position, new_event)

    @classmethod
    def remove(cls, position: str) -> "Modification":
        return cls("remove", position)

    def describe(self) -> str:
        if self.kind == "insert":
            where = f"before {self.position}" if self.position else "at the end"
            return f"insert {self.new_event.describe()} {where}"
        if self.kind == "replace":
            return f"replace event {self.position} by {self.new_event.describe()}"
        return f"remove event {self.position}"


def modify(tl: Timeline, mod: Modification) -> tuple[Timeline, int]:
    """Apply ``mod``; returns the new timeline and the index of the edit point in it."""
    events = list(tl.events)
    if mod.kind == "insert":
        if mod.new_event.label in tl.tags:
            raise ValueError(f"inserted label {mod.new_event.label!r} is not fresh")
        idx = len(events) if mod.position is None else tl.index(mod.position)
        events.insert(idx, mod.new_event)
    elif mod.kind == "replace":
        idx = tl.index(mod.position)
        if mod.new_event.label != mod.position and mod.new_event.label in tl.tags:
            raise ValueError(f"replacement label {mod.new_event.label!r} clashes with another event")
        events[idx] = mod.new_event
    else:
        idx = tl.index(mod.position)
        del events[idx]
    return Timeline(tl.initial, tuple(events)), idx


@dataclass(frozen=True)
class EventReport:
    tag: str
    name: str
    classifications: dict  # outcome -> Classification
    recorded: object = None
    recorded_status: Classification | None = None

    def to_dict(self) -> dict:
        out = {
            "tag": self.tag,
            "observable": self.name,
            "outcomes": {format_outcome(k): c.to_dict() for k, c in self.classifications.items()},
        }
        if self.recorded is not None:
            out["recorded"] = format_outcome(self.recorded)
            out["recorded_status"] = self.recorded_status.to_dict()
        return out


@dataclass(frozen=True)
class CounterfactualReport:
    modification: str
    policy: str
    held: dict
    events: tuple[EventReport, ...]
    pivot: str | None = None
    # pivot outcome -> later tag -> outcome -> Classification
    given_pivot: dict = field(default_factory=dict)
    later_recorded: tuple = ()
    notes: tuple[str, ...] = ()

    def event(self, tag: str) -> EventReport:
        for e in self.events:
            if e.tag == tag:
                return e
        raise KeyError(tag)

    @property
    def contradiction_dissolved(self) -> bool:
        """True when some later recorded outcome is no longer Forced."""
        return any(c.status is not Status.FORCED for _, _, c in self.later_recorded)

    def to_dict(self) -> dict:
        return {
            "modification": self.modification,
            "policy": self.policy,
            "held": {t: format_outcome(v) for t, v in self.held.items()},
            "events": [e.to_dict() for e in self.events],
            "pivot": self.pivot,
            "given_pivot": {
                format_outcome(pv): {
                    tag: {format_outcome(v): c.to_dict() for v, c in cls_.items()}
                    for tag, cls_ in per_tag.items()
                }
                for pv, per_tag in self.given_pivot.items()
            },
            "later_recorded": [
                {"tag": t, "recorded": format_outcome(v), **c.to_dict()} for t, v, c in self.later_recorded
            ],
            "notes": list(self.notes),
        }


_VALUE_NOTE = (
    "classifications are conditional probabilities of outcomes; "
    "they do not assert that an unmeasured observable possesses a value"
)


def counterfactual_report(
    base: Timeline,
    record: Mapping[str, object],
    mod: Modification | None = None,
    policy: MatchingPolicy = MatchingPolicy.HOLD_PRIOR_OUTCOMES,
) -> CounterfactualReport:
    """Classify every event of the edited timeline.

    Recorded outcomes of events strictly before the edit point (and not
    themselves edited) are held fixed; everything else is recomputed. With
    ``mod=None`` nothing is edited and the whole record is held.
    """
    if policy is not MatchingPolicy.HOLD_PRIOR_OUTCOMES:
        raise ValueError(f"unsupported matching policy {policy!r}")
    for tag in record:
        base.index(tag)
    if mod is None:
        modified, cut = base, len(base.events)
    else:
        modified, cut = modify(base, mod)
    prior_tags = modified.tags[:cut]
    held = {t: v for t, v in record.items() if t in prior_tags}
    branches = condition(enumerate_branches(modified), held)

    events = []
    for ev in modified.events:
        dist = marginal(branches, ev.label)
        classes = {o: Classification.of(dist.get(o, 0.0)) for o in ev.outcomes}
        rec = record.get(ev.label)
        # a replaced event's old record does not apply to the new measurement
        if mod is not None and mod.kind == "replace" and ev.label == mod.position:
            rec = None
        events.append(
            EventReport(ev.label, ev.measurement.name, classes, rec, classes.get(rec) if rec is not None else None)
        )

    pivot = None
    given_pivot: dict = {}
    if mod is not None and mod.kind in ("insert", "replace"):
        pivot = mod.new_event.label
        later = modified.tags[cut + 1 :]
        for pv in modified.events[cut].outcomes:
            consistent = [b for b in branches if b.outcome(pivot) == pv]
            if sum(b.probability for b in consistent) < TOL:
                continue
            sub = condition(branches, {pivot: pv})
            given_pivot[pv] = {
                tag: {o: _classify_branches(sub, tag, o) for o in modified.event(tag).outcomes}
                for tag in later
            }

    later_recorded = []
    for ev in events:
        if ev.tag in modified.tags[cut:] and ev.recorded is not None:
            later_recorded.append((ev.tag, ev.recorded, ev.recorded_status))

    return CounterfactualReport(
        modification=mod.describe() if mod is not None else "none",
        policy=policy.value,
        held=held,
        events=tuple(events),
        pivot=pivot,
        given_pivot=given_pivot,
        later_recorded=tuple(later_recorded),
        notes=(_VALUE_NOTE,),
    )


def forced_equal(report: CounterfactualReport, tag: str) -> bool:
    """True when, for every pivot outcome, ``tag`` is Forced to that same outcome."""
    if not report.given_pivot:
        return False
    for pv, per_tag in report.given_pivot.items():
        c = per_tag.get(tag, {}).get(pv)
        if c is None or c.status is not Status.FORCED:
            return False
    return True


# Spin history: X at t1, Z at t2, both recorded +1.

def maximally_mixed() -> tuple[tuple[float, StateVector], ...]:
    return ((0.5, hilbert.SPIN_STATES["z+"]), (0.5, hilbert.SPIN_STATES["z-"]))


def preset_spin_history(initial=None) -> tuple[Timeline, dict]:
    """X measured at t1 then Z at t2, both giving +1.

    No preparation is specified for this story, so the default initial
    ensemble is maximally mixed; pass ``initial`` to override.
    """
    initial = maximally_mixed() if initial is None else initial
    tl = Timeline(
        initial,
        (TimelineEvent("t1", hilbert.pauli("X")), TimelineEvent("t2", hilbert.pauli("Z"))),
    )
    return tl, {"t1": 1, "t2": 1}


def spin_history_modifications() -> dict[str, Modification]:
    return {
        "insert": Modification.insert(TimelineEvent("t", hilbert.pauli("X")), before="t2"),
        "replace": Modification.replace("t1", TimelineEvent("t1", hilbert.pauli("Z"))),
    }


# Apparatus analogue: a click after BC1, and pre-combiner detectors inserted.

RETRODICTION_INPUTS: dict[str, StateVector] = {
    "phi+": hilbert.PHI_PLUS,
    "(u+ + u-)/sqrt2": StateVector.from_amplitudes([1, 1, 0, 0]),
    "u+": hilbert.STATES["u+"],
}


@dataclass(frozen=True)
class RetrodictionCase:
    name: str
    p_bc1: float
    recorded: str
    status_without: Classification
    status_with: Classification
    routing: dict  # detector -> region -> Classification
    report: CounterfactualReport

    @property
    def remains_forced(self) -> bool:
        return self.status_with.status is Status.FORCED

    def to_dict(self) -> dict:
        return {
            "input": self.name,
            "p_bc1": self.p_bc1,
            "recorded": self.recorded,
            "without_insertion": self.status_without.to_dict(),
            "with_insertion": self.status_with.to_dict(),
            "routing": {
                det: {r: c.to_dict() for r, c in per.items()} for det, per in self.routing.items()
            },
        }


def retrodiction_case(name: str, s: StateVector, combiner=None) -> RetrodictionCase:
    """Record the stage-2 click, then ask what inserting stage-1 detectors
    before the combiners would have done to that click.

    The recorded click is BC1 whenever BC1 can fire at all, BC2 otherwise.
    """
    detection = apparatus.combiner_detection(combiner)
    base = Timeline.pure(s, (TimelineEvent("bc", detection),))
    p_bc1 = float(np.vdot(s.amplitudes, detection.projector("BC1") @ s.amplitudes).real)
    recorded = "BC1" if p_bc1 >= TOL else "BC2"
    record = {"bc": recorded}
    without = counterfactual_report(base, record)
    mod = Modification.insert(TimelineEvent("pre", apparatus.detector_measurement()), before="bc")
    report = counterfactual_report(base, record, mod)
    return RetrodictionCase(
        name=name,
        p_bc1=p_bc1,
        recorded=recorded,
        status_without=without.event("bc").recorded_status,
        status_with=report.event("bc").recorded_status,
        routing={det: per["bc"] for det, per in report.given_pivot.items()},
        report=report,
    )


def apparatus_retrodiction_demo(inputs: Mapping[str, StateVector] | None = None) -> list[RetrodictionCase]:
    inputs = RETRODICTION_INPUTS if inputs is None else inputs
    return [retrodiction_case(name, s) for name, s in inputs.items()]
