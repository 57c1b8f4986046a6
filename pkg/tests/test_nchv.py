import itertools
from fractions import Fraction

import pytest

from kslab import nchv
from kslab.nchv import (
    PLUS_PLUS_PREPARATION,
    SINGLET_PREPARATION,
    ProductSpec,
    ValueAssignment,
    constraint,
    enumerate_assignments,
    hv_sequential,
    predict_pair,
    qm_nchv_contrast,
    val,
)

CROSS_SPECS = ["Z1Z2", "Z1X2", "X1Z2", "X1X2"]


def brute_force_pairs(zz, xx, first, second):
    """Enumerate raw (z1, z2, x1, x2) tuples and compute products by hand."""
    idx = {"Z1": 0, "Z2": 1, "X1": 2, "X2": 3}

    def v(t, s):
        return t[idx[s[:2]]] * (t[idx[s[2:]]] if len(s) == 4 else 1)

    out = set()
    for t in itertools.product((1, -1), repeat=4):
        if t[0] * t[1] == zz and t[2] * t[3] == xx:
            out.add((v(t, first), v(t, second)))
    return out


def test_val_examples():
    assert val(ValueAssignment(1, 1, -1, -1), "Z1*X2") == -1
    assert val(ValueAssignment(1, 1, 1, 1), "X1·Z2") == 1
    for a in nchv.all_assignments():
        if a.z1 == a.z2:
            assert val(a, "Z1Z2") == 1


@pytest.mark.parametrize("bad", ["Z1X1", "Z2X2", "Z1Z1", "Y1", "Z1Z2X1"])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        ProductSpec.parse(bad)


def test_value_assignment_rejects_non_pm1():
    with pytest.raises(ValueError):
        ValueAssignment(1, 0, 1, 1)


def test_enumerate_examples():
    got = enumerate_assignments(PLUS_PLUS_PREPARATION)
    assert [a.signs() for a in got] == ["++++", "++--", "--++", "----"]
    assert len(enumerate_assignments()) == 16
    assert enumerate_assignments([constraint("Z1", 1), constraint("Z1", -1)]) == []


def test_enumerate_canonical_and_idempotent():
    all16 = nchv.all_assignments()
    assert all16 == sorted(all16, reverse=True)
    once = enumerate_assignments(PLUS_PLUS_PREPARATION)
    assert enumerate_assignments(PLUS_PLUS_PREPARATION) == once


def test_predict_pair_plus_plus():
    assert predict_pair(PLUS_PLUS_PREPARATION, "Z1X2", "X1Z2") == {(1, 1), (-1, -1)}
    assert brute_force_pairs(1, 1, "Z1X2", "X1Z2") == {(1, 1), (-1, -1)}


def test_predict_pair_singlet_from_oracle():
    # computed by brute force rather than read off any text
    oracle = brute_force_pairs(-1, -1, "Z1X2", "X1Z2")
    assert oracle == {(1, 1), (-1, -1)}
    assert predict_pair(SINGLET_PREPARATION, "Z1X2", "X1Z2") == oracle


@pytest.mark.parametrize("zz, xx", list(itertools.product((1, -1), repeat=2)))
@pytest.mark.parametrize("first, second", list(itertools.product(CROSS_SPECS, repeat=2)))
def test_predict_pair_matches_brute_force(zz, xx, first, second):
    cons = [constraint("Z1Z2", zz), constraint("X1X2", xx)]
    assert predict_pair(cons, first, second) == brute_force_pairs(zz, xx, first, second)


def test_predict_pair_same_symbol_twice():
    assert predict_pair([], "Z1", "Z1") == {(1, 1), (-1, -1)}


def test_predict_pair_weights_are_a_uniform_model_choice():
    w = predict_pair(PLUS_PLUS_PREPARATION, "Z1X2", "X1Z2", weights=True)
    assert w == {(1, 1): Fraction(1, 2), (-1, -1): Fraction(1, 2)}


def test_predict_pair_unsatisfiable():
    with pytest.raises(nchv.UnsatisfiablePreparation, match="unsatisfiable"):
        predict_pair([constraint("Z1", 1), constraint("Z1", -1)], "Z1", "Z2")


def test_hv_sequential_examples():
    for a in nchv.all_assignments():
        first, second = hv_sequential(a, ["Z1Z2", "Z1Z2"])
        assert first == second
    for a in enumerate_assignments(PLUS_PLUS_PREPARATION):
        x, y = hv_sequential(a, ["Z1X2", "X1Z2"])
        assert x == y
    ones = ValueAssignment(1, 1, 1, 1)
    assert set(hv_sequential(ones, ["Z1", "X2", "Z1X2", "X1Z2", "X1X2"])) == {1}
    with pytest.raises(ValueError):
        hv_sequential(ones, ["Z1X1"])


def test_hv_sequential_deterministic():
    a = ValueAssignment(1, -1, -1, 1)
    specs = ["Z1", "X1Z2", "Z1X2", "X2", "Z1Z2"]
    assert hv_sequential(a, specs) == hv_sequential(a, specs)


@pytest.mark.parametrize("a", nchv.all_assignments(), ids=lambda a: a.signs())
def test_multiplicativity_exhaustive(a):
    for s1 in ("Z1", "X1"):
        for s2 in ("Z2", "X2"):
            assert val(a, ProductSpec((s1, s2))) == val(a, s1) * val(a, s2)
            assert val(a, ProductSpec((s2, s1))) == val(a, s1) * val(a, s2)


@pytest.mark.parametrize("a", nchv.all_assignments(), ids=lambda a: a.signs())
def test_parity_identity_exhaustive(a):
    assert val(a, "Z1X2") * val(a, "X1Z2") == val(a, "Z1Z2") * val(a, "X1X2")


def test_contrast_report():
    rep = qm_nchv_contrast()
    assert rep.qm_outcomes == {(1, -1), (-1, 1)}
    assert rep.nchv_outcomes == {(1, 1), (-1, -1)}
    assert rep.intersection == frozenset()
    assert rep.disjoint
    assert rep.union == set(itertools.product((1, -1), repeat=2))
    assert len(rep.qm_outcomes) == len(rep.nchv_outcomes) == 2
