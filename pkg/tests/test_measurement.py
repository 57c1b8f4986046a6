import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kslab import hilbert
from kslab.hilbert import OBSERVABLES, PHI_PLUS, SINGLET, SPIN_STATES, StateVector, TOL, pauli
from kslab.measurement import (
    Entry,
    OutcomeDistribution,
    ProjectiveMeasurement,
    RngStream,
    format_outcome,
    functional_consistency_check,
    joint_measure,
    measure,
    sample,
    sample_outcomes,
    sequential_measure,
)

from .conftest import random_states, states

NAMES = ("Z1", "Z2", "X1", "X2", "Z1Z2", "X1X2", "Z1X2", "X1Z2")


def joint_oracle(state, a, b):
    """Probabilities from a simultaneous eigenbasis: a + 2b has the four
    distinct eigenvalues a_val + 2*b_val, so its eigenvectors label outcomes."""
    vals, vecs = np.linalg.eigh(a.matrix + 2 * b.matrix)
    probs = {}
    for lam, v in zip(vals, vecs.T):
        for va, vb in itertools.product((1, -1), repeat=2):
            if abs(lam - (va + 2 * vb)) < 1e-9:
                key = (va, vb)
        probs[key] = probs.get(key, 0.0) + abs(np.vdot(v, state.amplitudes)) ** 2
    return {k: p for k, p in probs.items() if p > TOL}


# SplitMix64 reference outputs for seed 0 (Vigna's splitmix64.c).
SPLITMIX64_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


class TestRngStream:
    def test_reference_vectors(self):
        rng = RngStream(0)
        assert [rng.next_u64() for _ in range(3)] == SPLITMIX64_SEED0
        assert rng.counter == 3

    def test_value_at_is_pure(self):
        rng = RngStream(0)
        assert rng.value_at(1) == SPLITMIX64_SEED0[1]
        assert rng.counter == 0

    def test_resume_from_counter(self):
        a = RngStream(42)
        seq = [a.next_u64() for _ in range(10)]
        b = RngStream(42, counter=5)
        assert [b.next_u64() for _ in range(5)] == seq[5:]

    def test_vectorized_matches_scalar(self):
        a, b = RngStream(2**63 + 17), RngStream(2**63 + 17)
        vec = a.floats(1000)
        scalar = np.array([b.next_float() for _ in range(1000)])
        np.testing.assert_array_equal(vec, scalar)
        assert a == b

    def test_floats_in_unit_interval(self):
        u = RngStream(7).floats(10_000)
        assert u.min() >= 0 and u.max() < 1

    def test_substreams_deterministic_and_distinct(self):
        rng = RngStream(5)
        assert rng.substream(3) == RngStream(5).substream(3)
        assert rng.substream(3).next_u64() != rng.substream(4).next_u64()
        assert rng.counter == 0


def test_measure_examples():
    assert measure(StateVector.basis("u,+"), OBSERVABLES["Z1"]).probabilities() == {1: 1.0}
    assert measure(PHI_PLUS, OBSERVABLES["Z1Z2"]).probabilities() == pytest.approx({1: 1.0})
    assert measure(SINGLET, OBSERVABLES["X1X2"]).probabilities() == pytest.approx({-1: 1.0})


def test_measure_phi_plus_projector_oracle():
    plus = (np.eye(4) + np.kron(np.diag([1, -1]), np.diag([1, -1]))) / 2
    np.testing.assert_allclose(plus @ PHI_PLUS.amplitudes, PHI_PLUS.amplitudes)


def test_measure_rejects_non_involution():
    with pytest.raises(ValueError):
        measure(PHI_PLUS, hilbert.Observable(np.diag([1.0, 0.0, 0.0, -1.0])))


def test_joint_measure_examples():
    dist = joint_measure(PHI_PLUS, OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    oracle = joint_oracle(PHI_PLUS, OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    assert set(oracle) == {(1, -1), (-1, 1)}
    assert dist.outcomes() == ((1, -1), (-1, 1))
    for k, p in oracle.items():
        assert dist.probability(k) == pytest.approx(0.5, abs=TOL)
        assert dist.probability(k) == pytest.approx(p, abs=TOL)
    singlet = joint_measure(SINGLET, OBSERVABLES["Z1Z2"], OBSERVABLES["X1X2"])
    assert singlet.probabilities() == pytest.approx({(-1, -1): 1.0})


def test_joint_measure_rejects_non_commuting():
    with pytest.raises(ValueError, match="do not commute"):
        joint_measure(PHI_PLUS, OBSERVABLES["Z1"], OBSERVABLES["X1"])


def test_joint_post_states_are_joint_eigenstates():
    dist = joint_measure(PHI_PLUS, OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    for (va, vb), entry in dist.entries.items():
        psi = entry.post_state.amplitudes
        np.testing.assert_allclose(OBSERVABLES["Z1X2"].matrix @ psi, va * psi, atol=TOL)
        np.testing.assert_allclose(OBSERVABLES["X1Z2"].matrix @ psi, vb * psi, atol=TOL)


def test_distribution_validation():
    with pytest.raises(ValueError):
        OutcomeDistribution({1: Entry(0.7, PHI_PLUS)})


def test_projective_measurement_validation():
    with pytest.raises(ValueError):
        ProjectiveMeasurement(("a", "b"), (np.eye(2), np.eye(2)))


def test_sample_point_mass():
    dist = measure(StateVector.basis("u,+"), OBSERVABLES["Z1"])
    for seed in range(20):
        outcome, post = sample(dist, RngStream(seed))
        assert outcome == 1


def test_sample_frequencies_seed_42():
    dist = joint_measure(PHI_PLUS, OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    n = 100_000
    drawn = sample_outcomes(dist, RngStream(42), n)
    sigma = 0.5 / np.sqrt(n)
    for o in dist.outcomes():
        assert abs(drawn.count(o) / n - 0.5) < 4 * sigma


def test_sample_deterministic_and_matches_batch():
    dist = measure(random_states(1)[0], OBSERVABLES["X1Z2"])
    a, b = RngStream(3), RngStream(3)
    seq = [sample(dist, a)[0] for _ in range(500)]
    assert seq == [sample(dist, b)[0] for _ in range(500)]
    assert sample_outcomes(dist, RngStream(3), 500) == seq


def test_sample_uses_inverse_cdf():
    dist = measure(StateVector.from_amplitudes([1, 1, 0, 0]), OBSERVABLES["Z2"])
    rng = RngStream(11)
    u = rng.copy().next_float()
    assert sample(dist, rng)[0] == (1 if u < 0.5 else -1)


def test_sequential_repeatability():
    x = pauli("X")
    for seed in range(50):
        rec = sequential_measure(SPIN_STATES["z+"], [x, x], RngStream(seed))
        assert rec.outcomes[0] == rec.outcomes[1]


def test_sequential_x_then_z_on_x_plus():
    x, z = pauli("X"), pauli("Z")
    n = 4000
    seconds = []
    for seed in range(n):
        rec = sequential_measure(SPIN_STATES["x+"], [x, z], RngStream(seed))
        assert rec.outcomes[0] == 1
        seconds.append(rec.outcomes[1])
    # projector oracle: |<z+|x+>|^2 = 1/2
    assert abs(seconds.count(1) / n - 0.5) < 4 * 0.5 / np.sqrt(n)


def test_sequential_joint_pair_repeats():
    pair = (OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    for seed in range(50):
        rec = sequential_measure(PHI_PLUS, [pair, pair], RngStream(seed))
        assert rec.outcomes[0] == rec.outcomes[1]
        assert rec.outcomes[0] in {(1, -1), (-1, 1)}


def test_sequential_propagates_errors():
    with pytest.raises(ValueError):
        sequential_measure(PHI_PLUS, [(OBSERVABLES["Z1"], OBSERVABLES["X1"])], RngStream(0))


def test_functional_consistency_examples():
    rep = functional_consistency_check(PHI_PLUS, OBSERVABLES["Z1X2"], OBSERVABLES["X1Z2"])
    assert rep.passed
    assert rep.via_joint == pytest.approx({1: 0.0, -1: 1.0})
    assert rep.via_product == pytest.approx(measure(PHI_PLUS, OBSERVABLES["Y1Y2"]).probabilities() | {1: 0.0})
    rep = functional_consistency_check(SINGLET, OBSERVABLES["Z1Z2"], OBSERVABLES["X1X2"])
    assert rep.via_joint == pytest.approx({1: 1.0, -1: 0.0})
    rep = functional_consistency_check(StateVector.basis("u,+"), OBSERVABLES["Z1"], OBSERVABLES["Z2"])
    assert rep.via_product == {1: 1.0, -1: 0.0}
    with pytest.raises(ValueError):
        functional_consistency_check(PHI_PLUS, OBSERVABLES["Z1"], OBSERVABLES["X1"])


def test_format_outcome():
    assert format_outcome(1) == "+1"
    assert format_outcome((1, -1)) == "(+1,-1)"
    assert format_outcome("BC1") == "BC1"


# --- invariants over random inputs -----------------------------------------


def test_normalization_200_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        s = hilbert.random_state(rng)
        o = OBSERVABLES[NAMES[rng.integers(len(NAMES))]]
        dist = measure(s, o)
        assert abs(sum(dist.probabilities().values()) - 1) < TOL
        for e in dist.entries.values():
            assert abs(np.linalg.norm(e.post_state.amplitudes) - 1) < TOL


@pytest.mark.parametrize("name", NAMES)
def test_repeatability_analytic(name):
    o = OBSERVABLES[name]
    for s in random_states(20, seed=5):
        for outcome, entry in measure(s, o).entries.items():
            assert measure(entry.post_state, o).probability(outcome) == pytest.approx(1, abs=TOL)


COMMUTING = [
    (a, b) for a, b in itertools.combinations(NAMES, 2) if hilbert.commutes(OBSERVABLES[a], OBSERVABLES[b])
]


def test_commuting_pair_list():
    assert ("Z1Z2", "X1X2") in COMMUTING and ("Z1X2", "X1Z2") in COMMUTING
    assert ("Z1", "X1") not in COMMUTING


@pytest.mark.parametrize("a, b", COMMUTING)
def test_joint_marginals_and_consistency_random(a, b):
    A, B = OBSERVABLES[a], OBSERVABLES[b]
    for s in random_states(50, seed=8):
        joint = joint_measure(s, A, B)
        oracle = joint_oracle(s, A, B)
        for k in set(oracle) | set(joint.outcomes()):
            assert joint.probability(k) == pytest.approx(oracle.get(k, 0.0), abs=1e-12)
        single = measure(s, A)
        for v in (1, -1):
            marg = sum(p for (va, _), p in joint.probabilities().items() if va == v)
            assert marg == pytest.approx(single.probability(v), abs=TOL)
        assert functional_consistency_check(s, A, B).passed


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sampling_convergence(seed):
    n = 100_000
    s = random_states(1, seed=seed)[0]
    dist = joint_measure(s, OBSERVABLES["Z1"], OBSERVABLES["X2"])
    drawn = sample_outcomes(dist, RngStream(seed), n)
    for o, p in dist.probabilities().items():
        assert abs(drawn.count(o) / n - p) < 4 * np.sqrt(p * (1 - p) / n)


@settings(max_examples=100, deadline=None)
@given(states(), st.sampled_from(NAMES))
def test_property_post_state_is_eigenstate(s, name):
    o = OBSERVABLES[name]
    for v, entry in measure(s, o).entries.items():
        psi = entry.post_state.amplitudes
        assert np.linalg.norm(o.matrix @ psi - v * psi) < 1e-9
