"""Analytic invariant checks across all modules (no sampling).

Each check returns ``(passed, detail)``; :func:`run_checks` collects them
in a fixed order so repeated runs print identical output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import apparatus, counterfactual, hilbert, measurement, nchv
from .hilbert import TOL, frobenius

N_RANDOM = 50
RANDOM_SEED = 20260101

_PRODUCTS = ("Z1Z2", "X1X2", "Z1X2", "X1Z2")
_ALL = ("Z1", "Z2", "X1", "X2") + _PRODUCTS


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_states(n: int = N_RANDOM, seed: int = RANDOM_SEED):
    rng = np.random.default_rng(seed)
    return [hilbert.random_state(rng) for _ in range(n)]


def _worst(values) -> str:
    return f"max deviation {max(values, default=0.0):.2e}"


def check_commutation() -> tuple[bool, str]:
    o = hilbert.OBSERVABLES
    zero = [frobenius(hilbert.commutator(o["Z1Z2"], o["X1X2"])), frobenius(hilbert.commutator(o["Z1X2"], o["X1Z2"]))]
    nonzero = [frobenius(hilbert.commutator(o["Z1"], o["X1"])), frobenius(hilbert.commutator(o["Z2"], o["X2"]))]
    ok = max(zero) <= TOL and all(abs(n - 4.0) <= TOL for n in nonzero)
    return ok, f"commuting norms {zero}, non-commuting norms {nonzero}"


def check_involutions() -> tuple[bool, str]:
    devs = [frobenius(hilbert.OBSERVABLES[n].matrix @ hilbert.OBSERVABLES[n].matrix - np.eye(4)) for n in _ALL]
    return max(devs) <= TOL, _worst(devs)


def check_projector_algebra() -> tuple[bool, str]:
    devs = []
    for name in _ALL:
        plus, minus = hilbert.spectral_projectors(hilbert.OBSERVABLES[name])
        devs += [
            frobenius(plus + minus - np.eye(4)),
            frobenius(plus @ plus - plus),
            frobenius(minus @ minus - minus),
            frobenius(plus @ minus),
        ]
    return max(devs) <= TOL, _worst(devs)


def check_state_predictions() -> tuple[bool, str]:
    s, phi = hilbert.SINGLET, hilbert.PHI_PLUS
    devs = [
        abs(hilbert.expectation(s, hilbert.Z1Z2) + 1),
        abs(hilbert.expectation(s, hilbert.X1X2) + 1),
        float(np.linalg.norm((hilbert.Z1Z2.matrix - np.eye(4)) @ phi.amplitudes)),
        float(np.linalg.norm((hilbert.X1X2.matrix - np.eye(4)) @ phi.amplitudes)),
    ]
    return max(devs) <= TOL, _worst(devs)


def check_expectation_real() -> tuple[bool, str]:
    residues = []
    for st in _random_states(100, RANDOM_SEED + 1):
        for name in _ALL:
            m = hilbert.OBSERVABLES[name].matrix
            residues.append(abs(np.vdot(st.amplitudes, m @ st.amplitudes).imag))
    return max(residues) <= TOL, _worst(residues)


def check_normalization_and_repeatability() -> tuple[bool, str]:
    devs = []
    for st in _random_states():
        for name in _ALL:
            o = hilbert.OBSERVABLES[name]
            dist = measurement.measure(st, o)
            devs.append(abs(sum(dist.probabilities().values()) - 1))
            for outcome, entry in dist.entries.items():
                again = measurement.measure(entry.post_state, o)
                devs.append(1 - again.probability(outcome))
    return max(devs) <= TOL, _worst(devs)


def _commuting_pairs():
    obs = hilbert.OBSERVABLES
    for a, b in itertools.combinations(_ALL, 2):
        if hilbert.commutes(obs[a], obs[b]):
            yield obs[a], obs[b]


def check_joint_marginals_and_consistency() -> tuple[bool, str]:
    devs = []
    for st in _random_states():
        for a, b in _commuting_pairs():
            joint = measurement.joint_measure(st, a, b)
            single = measurement.measure(st, a)
            for v in measurement.OUTCOME_VALUES:
                marg = sum(p for (va, _), p in joint.probabilities().items() if va == v)
                devs.append(abs(marg - single.probability(v)))
            devs.append(measurement.functional_consistency_check(st, a, b).max_deviation)
    return max(devs) <= TOL, _worst(devs)


def check_nchv_value_rule() -> tuple[bool, str]:
    bad = 0
    cross = [nchv.ProductSpec((a, b)) for a in ("Z1", "X1") for b in ("Z2", "X2")]
    for asg in nchv.all_assignments():
        for s in cross:
            if nchv.val(asg, s) != nchv.val(asg, s.factors[0]) * nchv.val(asg, s.factors[1]):
                bad += 1
        if nchv.val(asg, "Z1X2") * nchv.val(asg, "X1Z2") != nchv.val(asg, "Z1Z2") * nchv.val(asg, "X1X2"):
            bad += 1
    n = len(nchv.enumerate_assignments(nchv.PLUS_PLUS_PREPARATION))
    return bad == 0 and n == 4, f"{bad} violations, {n} assignments satisfy the (+1,+1) preparation"


def check_contrast() -> tuple[bool, str]:
    rep = nchv.qm_nchv_contrast()
    qm_ok = rep.qm_outcomes == {(1, -1), (-1, 1)} and all(
        abs(p - 0.5) <= TOL for p in rep.qm_distribution.values()
    )
    ok = qm_ok and rep.nchv_outcomes == {(1, 1), (-1, -1)} and rep.disjoint
    return ok, f"qm {sorted(rep.qm_outcomes)}, nchv {sorted(rep.nchv_outcomes)}"


def check_combiner_unitary(matrix) -> tuple[bool, str]:
    defect = hilbert.unitarity_defect(matrix)
    return defect <= TOL, f"|U^dag U - I|_F = {defect:.2e}"


def check_combiner_rows(matrix) -> tuple[bool, str]:
    u = np.asarray(matrix, dtype=complex)
    r = 1 / np.sqrt(2)
    out1 = u @ np.array([r, 0, 0, r])
    out2 = u @ np.array([0, r, r, 0])
    devs = [1 - abs(out1[0]), 1 - abs(out2[2])]
    return max(devs) <= TOL, _worst(devs)


def check_povm(matrix) -> tuple[bool, str]:
    dev = apparatus.povm_matches_product(matrix)
    return dev <= TOL, f"distance to Z1Z2 projectors {dev:.2e}"


def check_region_probability(matrix) -> tuple[bool, str]:
    effects = apparatus.region_povm(matrix)
    plus = hilbert.spectral_projectors(hilbert.Z1Z2).plus
    devs = []
    for st in _random_states():
        a = st.amplitudes
        p_region = np.vdot(a, effects["BC1"] @ a).real
        devs.append(abs(p_region - np.vdot(a, plus @ a).real))
    return max(devs) <= TOL, _worst(devs)


def check_product_stage_agreement() -> tuple[bool, str]:
    devs = []
    for st in _random_states():
        p1, p2 = apparatus.product_distribution(1, st), apparatus.product_distribution(2, st)
        devs += [abs(p1[v] - p2[v]) for v in measurement.OUTCOME_VALUES]
    return max(devs) <= TOL, _worst(devs)


def check_coherence_retention() -> tuple[bool, str]:
    post = apparatus.stage2_retrodicted(hilbert.PHI_PLUS)
    fid = post["BC1"].post_state.fidelity(hilbert.PHI_PLUS)
    fu2 = apparatus.followup_marginal(2, hilbert.PHI_PLUS, hilbert.X1X2)
    fu1 = apparatus.followup_marginal(1, hilbert.PHI_PLUS, hilbert.X1X2)
    devs = [1 - fid, 1 - fu2[1], abs(fu1[1] - 0.5), abs(fu1[-1] - 0.5)]
    return max(devs) <= TOL, _worst(devs)


def check_random_completions(n: int = 20) -> tuple[bool, str]:
    rng = np.random.default_rng(RANDOM_SEED + 2)
    devs = [apparatus.povm_matches_product(apparatus.random_completion(rng)) for _ in range(n)]
    return max(devs) <= TOL, _worst(devs)


def check_spin_history() -> tuple[bool, str]:
    tl, rec = counterfactual.preset_spin_history()
    mods = counterfactual.spin_history_modifications()
    ins = counterfactual.counterfactual_report(tl, rec, mods["insert"])
    rep = counterfactual.counterfactual_report(tl, rec, mods["replace"])
    x_t = ins.event("t").classifications[1]
    z_t2 = ins.event("t2").recorded_status
    ok = (
        x_t.status is counterfactual.Status.FORCED
        and z_t2.status is counterfactual.Status.POSSIBLE
        and abs(z_t2.probability - 0.5) <= TOL
        and counterfactual.forced_equal(rep, "t2")
    )
    return ok, f"inserted X@t: {x_t}; recorded Z@t2: {z_t2}"


def check_retrodiction_boundary(matrix) -> tuple[bool, str]:
    u = hilbert.UnitaryMap(matrix, hilbert.PATH_SPIN_LABELS, apparatus.OUTLET_LABELS)
    plus = hilbert.spectral_projectors(hilbert.Z1Z2).plus
    inputs = dict(counterfactual.RETRODICTION_INPUTS)
    inputs.update({f"random{i}": s for i, s in enumerate(_random_states())})
    bad = []
    for name, s in inputs.items():
        case = counterfactual.retrodiction_case(name, s, u)
        p = np.vdot(s.amplitudes, plus @ s.amplitudes).real
        sharp = p <= TOL or p >= 1 - TOL
        if case.remains_forced != sharp:
            bad.append(name)
    return not bad, f"{len(inputs) - len(bad)}/{len(inputs)} inputs on the predicted side"


def run_checks(combiner_matrix=None) -> list[CheckResult]:
    """Run every invariant check; ``combiner_matrix`` overrides the built-in combiner."""
    matrix = apparatus._combiner_matrix() if combiner_matrix is None else np.asarray(combiner_matrix)
    checks: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("hilbert: commutation structure", check_commutation),
        ("hilbert: product observables are involutions", check_involutions),
        ("hilbert: spectral projector algebra", check_projector_algebra),
        ("hilbert: expectation values are real", check_expectation_real),
        ("measurement: singlet and phi+ predictions", check_state_predictions),
        ("measurement: normalization and repeatability", check_normalization_and_repeatability),
        ("measurement: joint marginals and product consistency", check_joint_marginals_and_consistency),
        ("nchv: multiplicativity and parity identity", check_nchv_value_rule),
        ("nchv: quantum vs hidden-variable outcome sets", check_contrast),
        ("apparatus: combiner unitarity", lambda: check_combiner_unitary(matrix)),
        ("apparatus: combiner row action", lambda: check_combiner_rows(matrix)),
        ("apparatus: region POVM equals Z1Z2 projectors", lambda: check_povm(matrix)),
        ("apparatus: region probability matches <(I+Z1Z2)/2>", lambda: check_region_probability(matrix)),
        ("apparatus: stage-1/stage-2 product agreement", check_product_stage_agreement),
        ("apparatus: coherence retention on phi+", check_coherence_retention),
        ("apparatus: randomized per-combiner completions", check_random_completions),
        ("counterfactual: spin history classifications", check_spin_history),
        ("counterfactual: retrodiction boundary", lambda: check_retrodiction_boundary(matrix)),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # a broken invariant may surface as a raised error
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
    return results
