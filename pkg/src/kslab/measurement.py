"""Projective measurement: Lüders-rule distributions, joint measurement of
commuting pairs, seeded sampling and sequential pipelines.

Randomness comes from :class:`RngStream`, a counter-based SplitMix64
generator. Draw ``k`` of a stream with seed ``s`` is a pure function of
``(s, k)``, so results do not depend on platform or scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Iterator, Mapping, Sequence, Union

import numpy as np

from .hilbert import (
    TOL,
    Observable,
    StateVector,
    commutator,
    frobenius,
    product,
    spectral_projectors,
)

Outcome = Hashable
JointOutcome = tuple[int, int]

OUTCOME_VALUES = (1, -1)
JOINT_OUTCOMES: tuple[JointOutcome, ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _splitmix64(state: int) -> int:
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _splitmix64_array(states: np.ndarray) -> np.ndarray:
    z = states.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class RngStream:
    """Counter-based SplitMix64 stream.

    The value at position ``counter`` is
    ``mix64((seed + (counter + 1) * 0x9E3779B97F4A7C15) mod 2**64)``, i.e. the
    sequence a textbook SplitMix64 generator seeded with ``seed`` produces.
    Uniform floats in ``[0, 1)`` take the top 53 bits.
    """

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int = 0, counter: int = 0):
        if counter < 0:
            raise ValueError("counter must be nonnegative")
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def __eq__(self, other):
        return isinstance(other, RngStream) and (self.seed, self.counter) == (other.seed, other.counter)

    def copy(self) -> "RngStream":
        return RngStream(self.seed, self.counter)

    def value_at(self, counter: int) -> int:
        return _splitmix64(self.seed + (counter + 1) * _GOLDEN)

    def next_u64(self) -> int:
        value = self.value_at(self.counter)
        self.counter += 1
        return value

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def u64s(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        self.counter += n
        return _splitmix64_array(states)

    def floats(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms; identical to ``n`` calls of :meth:`next_float`."""
        return (self.u64s(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def substream(self, index: int) -> "RngStream":
        """Independent stream for trial/worker ``index``, derived from the seed only."""
        return RngStream(_splitmix64(self.seed ^ _splitmix64(index + 1)))


def _check_projector_family(projectors: Sequence[np.ndarray], dim: int) -> None:
    eye = np.eye(dim)
    if frobenius(sum(projectors) - eye) > TOL:
        raise ValueError("projectors do not sum to the identity")
    for i, p in enumerate(projectors):
        if frobenius(p @ p - p) > TOL or frobenius(p - p.conj().T) > TOL:
            raise ValueError(f"element {i} is not an orthogonal projector")
        for q in projectors[i + 1 :]:
            if frobenius(p @ q) > TOL:
                raise ValueError("projectors are not mutually orthogonal")


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Ordered outcome -> projector table for a complete projective measurement."""

    outcomes: tuple
    projectors: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.outcomes) != len(self.projectors) or not self.outcomes:
            raise ValueError("need one projector per outcome")
        projs = []
        for p in self.projectors:
            arr = np.array(p, dtype=complex)
            arr.setflags(write=False)
            projs.append(arr)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "projectors", tuple(projs))
        _check_projector_family(projs, self.dim)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def projector(self, outcome) -> np.ndarray:
        return self.projectors[self.outcomes.index(outcome)]

    @classmethod
    def of_observable(cls, o: Observable) -> "ProjectiveMeasurement":
        return _observable_measurement(o)

    @classmethod
    def of_pair(cls, a: Observable, b: Observable) -> "ProjectiveMeasurement":
        return _pair_measurement(a, b)


# Observables are immutable and hash by identity, so the tables can be cached.
@lru_cache(maxsize=256)
def _observable_measurement(o: Observable) -> ProjectiveMeasurement:
    plus, minus = spectral_projectors(o)
    return ProjectiveMeasurement(OUTCOME_VALUES, (plus, minus), name=o.name)


@lru_cache(maxsize=256)
def _pair_measurement(a: Observable, b: Observable) -> ProjectiveMeasurement:
    check_commuting(a, b)
    pa, pb = spectral_projectors(a), spectral_projectors(b)
    projs = tuple(pa.for_value(i) @ pb.for_value(j) for i, j in JOINT_OUTCOMES)
    return ProjectiveMeasurement(JOINT_OUTCOMES, projs, name=f"({a.name},{b.name})")


def check_commuting(a: Observable, b: Observable) -> None:
    norm = frobenius(commutator(a, b))
    if norm > TOL:
        raise ValueError(
            f"{a.name or 'a'} and {b.name or 'b'} do not commute (|[a,b]|_F = {norm:.3g}); "
            "no joint measurement exists"
        )


@dataclass(frozen=True)
class Entry:
    probability: float
    post_state: StateVector


@dataclass(frozen=True)
class OutcomeDistribution:
    """Outcome -> (probability, Lüders post-state), in canonical outcome order.

    Outcomes with probability below ``TOL`` are omitted.
    """

    entries: Mapping[Outcome, Entry] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(e.probability for e in self.entries.values())
        if any(e.probability < 0 for e in self.entries.values()) or abs(total - 1.0) > TOL:
            raise ValueError(f"probabilities must be nonnegative and sum to 1 (got {total!r})")

    def __iter__(self) -> Iterator[Outcome]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, outcome):
        return outcome in self.entries

    def __getitem__(self, outcome) -> Entry:
        return self.entries[outcome]

    def outcomes(self) -> tuple:
        return tuple(self.entries)

    def probability(self, outcome) -> float:
        entry = self.entries.get(outcome)
        return entry.probability if entry is not None else 0.0

    def probabilities(self) -> dict:
        return {k: e.probability for k, e in self.entries.items()}

    def support(self) -> frozenset:
        return frozenset(self.entries)


def measure_projective(s: StateVector, pm: ProjectiveMeasurement) -> OutcomeDistribution:
    if s.dim != pm.dim:
        raise ValueError(f"dimension mismatch: state {s.dim}, measurement {pm.dim}")
    kept = []
    for outcome, proj in zip(pm.outcomes, pm.projectors):
        vec = proj @ s.amplitudes
        prob = float(np.vdot(vec, vec).real)
        if prob < TOL:
            continue
        kept.append((outcome, prob, vec))
    total = sum(p for _, p, _ in kept)
    entries = {
        outcome: Entry(prob / total, StateVector(vec / np.sqrt(prob), s.labels))
        for outcome, prob, vec in kept
    }
    return OutcomeDistribution(entries)


def measure(s: StateVector, o: Observable) -> OutcomeDistribution:
    """Projective measurement of a +/-1-valued observable (Lüders rule)."""
    return measure_projective(s, ProjectiveMeasurement.of_observable(o))


def joint_measure(s: StateVector, a: Observable, b: Observable) -> OutcomeDistribution:
    """Joint measurement of a commuting pair; outcomes are ``(value_a, value_b)``."""
    return measure_projective(s, ProjectiveMeasurement.of_pair(a, b))


def _inverse_cdf(probs: Sequence[float], u):
    cdf = np.cumsum(probs)
    # the last bin absorbs rounding in the cumulative sum
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def sample(dist: OutcomeDistribution, rng: RngStream):
    """Draw one ``(outcome, post_state)`` by inverse CDF on the next uniform."""
    outcomes = dist.outcomes()
    k = int(_inverse_cdf([dist[o].probability for o in outcomes], rng.next_float()))
    chosen = outcomes[k]
    return chosen, dist[chosen].post_state


def sample_outcomes(dist: OutcomeDistribution, rng: RngStream, n: int) -> list:
    """``n`` outcomes, identical to ``n`` successive :func:`sample` calls."""
    outcomes = dist.outcomes()
    idx = _inverse_cdf([dist[o].probability for o in outcomes], rng.floats(n))
    return [outcomes[i] for i in idx]


Step = Union[Observable, tuple[Observable, Observable], ProjectiveMeasurement]


def as_measurement(step: Step) -> ProjectiveMeasurement:
    if isinstance(step, ProjectiveMeasurement):
        return step
    if isinstance(step, Observable):
        return ProjectiveMeasurement.of_observable(step)
    if isinstance(step, tuple) and len(step) == 2:
        return ProjectiveMeasurement.of_pair(*step)
    raise TypeError(f"cannot interpret {step!r} as a measurement step")


@dataclass(frozen=True)
class SequentialRecord:
    outcomes: tuple
    final_state: StateVector


def sequential_measure(s: StateVector, steps: Sequence[Step], rng: RngStream) -> SequentialRecord:
    """Measure each step in turn, collapsing the state between steps."""
    measurements = [as_measurement(step) for step in steps]
    outcomes = []
    state = s
    for pm in measurements:
        outcome, state = sample(measure_projective(state, pm), rng)
        outcomes.append(outcome)
    return SequentialRecord(tuple(outcomes), state)


@dataclass(frozen=True)
class ConsistencyReport:
    via_joint: dict
    via_product: dict
    max_deviation: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= TOL


def functional_consistency_check(s: StateVector, a: Observable, b: Observable) -> ConsistencyReport:
    """Compare the distribution of ``value_a * value_b`` from a joint
    measurement with a direct measurement of the product observable."""
    joint = joint_measure(s, a, b)
    via_joint = {1: 0.0, -1: 0.0}
    for (va, vb), entry in joint.entries.items():
        via_joint[va * vb] += entry.probability
    direct = measure(s, product(a, b))
    via_product = {v: direct.probability(v) for v in OUTCOME_VALUES}
    dev = max(abs(via_joint[v] - via_product[v]) for v in OUTCOME_VALUES)
    return ConsistencyReport(via_joint, via_product, dev)


def format_outcome(outcome) -> str:
    """``1 -> "+1"``, ``(1, -1) -> "(+1,-1)"``; other labels pass through."""
    if isinstance(outcome, tuple):
        return "(" + ",".join(format_outcome(o) for o in outcome) + ")"
    if isinstance(outcome, (int, np.integer)) and not isinstance(outcome, bool):
        return f"{int(outcome):+d}"
    return str(outcome)
