"""Noncontextual hidden-variable model for the four spin observables.

An ontic state fixes +/-1 values for Z1, Z2, X1, X2 at once. The value of a
product of commuting observables is the product of the values, and a
repeated measurement just reads the same value back.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import hilbert
from .measurement import JOINT_OUTCOMES, joint_measure

SYMBOLS = ("Z1", "Z2", "X1", "X2")
_SLOT = {"Z1": 1, "X1": 1, "Z2": 2, "X2": 2}


def _check_value(v: int) -> int:
    if v not in (1, -1):
        raise ValueError(f"value must be +1 or -1, got {v!r}")
    return v


@dataclass(frozen=True, order=True)
class ValueAssignment:
    z1: int
    z2: int
    x1: int
    x2: int

    def __post_init__(self):
        for v in (self.z1, self.z2, self.x1, self.x2):
            _check_value(v)

    def __getitem__(self, symbol: str) -> int:
        try:
            return getattr(self, symbol.lower())
        except AttributeError:
            raise KeyError(symbol) from None

    def signs(self) -> str:
        return "".join("+" if v > 0 else "-" for v in (self.z1, self.z2, self.x1, self.x2))


@dataclass(frozen=True)
class ProductSpec:
    """A single symbol or a cross-slot product such as ``Z1*X2``."""

    factors: tuple[str, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        if not 1 <= len(factors) <= 2:
            raise ValueError(f"product must have one or two factors, got {factors}")
        for f in factors:
            if f not in _SLOT:
                raise ValueError(f"unknown symbol {f!r}; expected one of {SYMBOLS}")
        if len(factors) == 2 and _SLOT[factors[0]] == _SLOT[factors[1]]:
            raise ValueError(
                f"{factors[0]}*{factors[1]} acts twice on slot {_SLOT[factors[0]]}; "
                "values multiply only for commuting observables"
            )

    @classmethod
    def parse(cls, text: str) -> "ProductSpec":
        """Accepts ``"Z1"``, ``"Z1X2"``, ``"Z1*X2"`` or ``"Z1·X2"``."""
        cleaned = text.replace("*", "").replace("·", "").replace(" ", "").upper()
        if len(cleaned) % 2 or not cleaned:
            raise ValueError(f"cannot parse product {text!r}")
        return cls(tuple(cleaned[i : i + 2] for i in range(0, len(cleaned), 2)))

    def __str__(self):
        return "".join(self.factors)


def spec(text: str | ProductSpec) -> ProductSpec:
    return text if isinstance(text, ProductSpec) else ProductSpec.parse(text)


@dataclass(frozen=True)
class Constraint:
    spec: ProductSpec
    required: int

    def __post_init__(self):
        _check_value(self.required)

    def holds(self, assignment: ValueAssignment) -> bool:
        return val(assignment, self.spec) == self.required


def constraint(text: str, required: int) -> Constraint:
    return Constraint(spec(text), required)


# Preparation in the (+1, +1) eigenstate of (Z1Z2, X1X2)
PLUS_PLUS_PREPARATION = (constraint("Z1Z2", 1), constraint("X1X2", 1))
# Singlet-like preparation, both products -1
SINGLET_PREPARATION = (constraint("Z1Z2", -1), constraint("X1X2", -1))


def val(assignment: ValueAssignment, product_spec: ProductSpec | str) -> int:
    product_spec = spec(product_spec)
    result = 1
    for f in product_spec.factors:
        result *= assignment[f]
    return result


def all_assignments() -> list[ValueAssignment]:
    """All 16 assignments, (z1, z2, x1, x2) lexicographic with +1 before -1."""
    return [ValueAssignment(*vals) for vals in itertools.product((1, -1), repeat=4)]


def enumerate_assignments(constraints: Iterable[Constraint] = ()) -> list[ValueAssignment]:
    """Assignments satisfying every constraint, in :func:`all_assignments` order."""
    constraints = tuple(constraints)
    return [a for a in all_assignments() if all(c.holds(a) for c in constraints)]


class UnsatisfiablePreparation(ValueError):
    pass


def predict_pair(
    constraints: Iterable[Constraint],
    first: ProductSpec | str,
    second: ProductSpec | str,
    weights: bool = False,
):
    """Possible value pairs of ``(first, second)`` over satisfying assignments.

    Returns a frozenset by default. With ``weights=True`` returns a dict of
    exact fractions from a uniform prior over the satisfying assignments;
    that prior is a modelling choice, not something the value rule implies.
    """
    first, second = spec(first), spec(second)
    assignments = enumerate_assignments(constraints)
    if not assignments:
        raise UnsatisfiablePreparation("unsatisfiable preparation: no assignment meets the constraints")
    pairs = [(val(a, first), val(a, second)) for a in assignments]
    if not weights:
        return frozenset(pairs)
    counts: dict = {}
    for p in pairs:
        counts[p] = counts.get(p, 0) + 1
    return {p: Fraction(counts[p], len(pairs)) for p in JOINT_OUTCOMES if p in counts}


def hv_sequential(assignment: ValueAssignment, specs: Sequence[ProductSpec | str]) -> tuple[int, ...]:
    """Outcomes of measuring each spec in turn; the ontic state never changes."""
    return tuple(val(assignment, spec(s)) for s in specs)


@dataclass(frozen=True)
class ContrastReport:
    qm_distribution: dict
    qm_outcomes: frozenset
    nchv_outcomes: frozenset

    @property
    def intersection(self) -> frozenset:
        return self.qm_outcomes & self.nchv_outcomes

    @property
    def union(self) -> frozenset:
        return self.qm_outcomes | self.nchv_outcomes

    @property
    def disjoint(self) -> bool:
        return not self.intersection


def qm_nchv_contrast() -> ContrastReport:
    """Outcomes of the (Z1X2, X1Z2) measurement on the (+1, +1) preparation."""
    qm = joint_measure(hilbert.PHI_PLUS, hilbert.Z1X2, hilbert.X1Z2)
    nchv = predict_pair(PLUS_PLUS_PREPARATION, "Z1X2", "X1Z2")
    return ContrastReport(qm.probabilities(), qm.support(), nchv)
