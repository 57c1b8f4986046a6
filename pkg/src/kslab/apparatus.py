"""Mode-level model of the two-stage path/spin apparatus.

Stage 1: a Stern-Gerlach analyser on each path with a detector in every
outlet, so a click reveals path and spin (a joint Z1, Z2 measurement).

Stage 2: the (u,+) and (d,-) outlets feed beam combiner BC1, the (u,-) and
(d,+) outlets feed BC2. Each combiner has two output ports and one detector
region covering both, so a click only reveals which combiner fired, i.e.
the value of Z1Z2 (+1 for BC1, -1 for BC2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import hilbert
from .hilbert import (
    PATH_SPIN_LABELS,
    TOL,
    Observable,
    StateVector,
    UnitaryMap,
    apply,
    frobenius,
    spectral_projectors,
)
from .measurement import (
    OUTCOME_VALUES,
    Entry,
    OutcomeDistribution,
    ProjectiveMeasurement,
    RngStream,
    measure,
    measure_projective,
)

OUTLET_LABELS = ("BC1a", "BC1b", "BC2a", "BC2b")
REGIONS: dict[str, tuple[str, ...]] = {"BC1": ("BC1a", "BC1b"), "BC2": ("BC2a", "BC2b")}
REGION_VALUE = {"BC1": 1, "BC2": -1}

DETECTORS: dict[str, str] = {"D_u+": "u,+", "D_u-": "u,-", "D_d+": "d,+", "D_d-": "d,-"}
DETECTOR_VALUES: dict[str, tuple[int, int]] = {
    "D_u+": (1, 1),
    "D_u-": (1, -1),
    "D_d+": (-1, 1),
    "D_d-": (-1, -1),
}

_R2 = 1 / np.sqrt(2)


def _combiner_matrix() -> np.ndarray:
    # rows are outlets, columns (u,+), (u,-), (d,+), (d,-)
    return np.array(
        [
            [_R2, 0, 0, _R2],  # (|u,+> + |d,->)/sqrt2 -> BC1a
            [_R2, 0, 0, -_R2],  # (|u,+> - |d,->)/sqrt2 -> BC1b
            [0, _R2, _R2, 0],  # (|u,-> + |d,+>)/sqrt2 -> BC2a
            [0, _R2, -_R2, 0],  # (|u,-> - |d,+>)/sqrt2 -> BC2b
        ],
        dtype=complex,
    )


def combiner_unitary() -> UnitaryMap:
    """The two beam combiners as one unitary from path/spin modes to outlets."""
    return UnitaryMap(_combiner_matrix(), PATH_SPIN_LABELS, OUTLET_LABELS)


def region_projectors(labels=OUTLET_LABELS) -> dict[str, np.ndarray]:
    out = {}
    for region, modes in REGIONS.items():
        diag = np.array([1.0 if lab in modes else 0.0 for lab in labels])
        out[region] = np.diag(diag).astype(complex)
    return out


def region_measurement() -> ProjectiveMeasurement:
    """Coarse-grained detection on the outlet modes: BC1 vs BC2."""
    projs = region_projectors()
    return ProjectiveMeasurement(tuple(projs), tuple(projs.values()), name="combiner regions")


def detector_measurement() -> ProjectiveMeasurement:
    """Fine-grained stage-1 detection, one projector per path/spin mode."""
    projs = []
    for mode in DETECTORS.values():
        vec = StateVector.basis(mode).amplitudes
        projs.append(np.outer(vec, vec.conj()))
    return ProjectiveMeasurement(tuple(DETECTORS), tuple(projs), name="stage-1 detectors")


def region_povm(matrix) -> dict[str, np.ndarray]:
    """Effects U^dag P_region U, in path/spin labels, for an arbitrary combiner matrix."""
    u = np.asarray(matrix, dtype=complex)
    return {r: u.conj().T @ p @ u for r, p in region_projectors().items()}


def stage2_povm(combiner: UnitaryMap | None = None) -> tuple[np.ndarray, np.ndarray]:
    combiner = combiner or combiner_unitary()
    effects = region_povm(combiner.matrix)
    return effects["BC1"], effects["BC2"]


def combiner_detection(combiner: UnitaryMap | None = None) -> ProjectiveMeasurement:
    """Stage-2 detection pulled back to path/spin labels (Heisenberg picture)."""
    e1, e2 = stage2_povm(combiner)
    return ProjectiveMeasurement(("BC1", "BC2"), (e1, e2), name="combiner detection")


def _check_input(s: StateVector) -> None:
    if s.dim != 4 or s.labels != PATH_SPIN_LABELS:
        raise ValueError(f"apparatus input must be a path/spin state with labels {PATH_SPIN_LABELS}")


def stage1_distribution(s: StateVector) -> OutcomeDistribution:
    """Detector -> (probability, collapsed basis mode)."""
    _check_input(s)
    return measure_projective(s, detector_measurement())


def stage2_distribution(s: StateVector, combiner: UnitaryMap | None = None) -> OutcomeDistribution:
    """Region -> (probability, post-state in outlet labels)."""
    _check_input(s)
    combiner = combiner or combiner_unitary()
    return measure_projective(apply(combiner, s), region_measurement())


def stage2_retrodicted(s: StateVector, combiner: UnitaryMap | None = None) -> OutcomeDistribution:
    """Stage-2 distribution with post-states mapped back through the inverse combiner."""
    combiner = combiner or combiner_unitary()
    back = combiner.inverse()
    dist = stage2_distribution(s, combiner)
    return OutcomeDistribution(
        {r: Entry(e.probability, apply(back, e.post_state)) for r, e in dist.entries.items()}
    )


def product_distribution(stage: int, s: StateVector) -> dict[int, float]:
    """Distribution of the reported Z1Z2 value for either stage."""
    out = {1: 0.0, -1: 0.0}
    if stage == 1:
        for det, e in stage1_distribution(s).entries.items():
            z1, z2 = DETECTOR_VALUES[det]
            out[z1 * z2] += e.probability
    elif stage == 2:
        for region, e in stage2_distribution(s).entries.items():
            out[REGION_VALUE[region]] += e.probability
    else:
        raise ValueError(f"stage must be 1 or 2, got {stage!r}")
    return out


def _post_states(stage: int, s: StateVector) -> OutcomeDistribution:
    if stage == 1:
        return stage1_distribution(s)
    if stage == 2:
        return stage2_retrodicted(s)
    raise ValueError(f"stage must be 1 or 2, got {stage!r}")


def followup_distribution(stage: int, s: StateVector, follow_up: Observable) -> dict[tuple[str, int], float]:
    """Analytic joint distribution of (detection region, follow-up outcome)."""
    if not follow_up.is_involution():
        raise ValueError("follow-up observable must be an involution")
    out = {}
    for region, e in _post_states(stage, s).entries.items():
        for value, fe in measure(e.post_state, follow_up).entries.items():
            out[(region, value)] = e.probability * fe.probability
    return out


def followup_marginal(stage: int, s: StateVector, follow_up: Observable) -> dict[int, float]:
    out = {1: 0.0, -1: 0.0}
    for (_, value), p in followup_distribution(stage, s, follow_up).items():
        out[value] += p
    return out


@dataclass(frozen=True)
class RunStatistics:
    """Counts per detector region, plus (region, follow-up outcome) counts."""

    counts: Mapping[str, int]
    trials: int
    follow_up: Mapping[tuple[str, int], int] | None = None
    follow_up_name: str = ""

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if sum(self.counts.values()) != self.trials:
            raise ValueError("counts must sum to the number of trials")
        if self.follow_up is not None and sum(self.follow_up.values()) != self.trials:
            raise ValueError("follow-up counts must sum to the number of trials")

    def frequencies(self) -> dict[str, float]:
        return {k: c / self.trials for k, c in self.counts.items()}

    def follow_up_frequencies(self) -> dict[int, float]:
        out = {1: 0, -1: 0}
        for (_, value), c in (self.follow_up or {}).items():
            out[value] += c
        return {v: c / self.trials for v, c in out.items()}


def _run(
    dist: OutcomeDistribution,
    trials: int,
    rng: RngStream,
    follow_up: Observable | None,
    post_state_of,
) -> RunStatistics:
    # trial i uses draw counter+i for detection and counter+trials+i for follow-up
    if trials <= 0:
        raise ValueError("trials must be positive")
    outcomes = dist.outcomes()
    cdf = np.cumsum([dist[o].probability for o in outcomes])
    det_idx = np.minimum(np.searchsorted(cdf, rng.floats(trials), side="right"), len(outcomes) - 1)
    fu_uniforms = rng.floats(trials) if follow_up is not None else None
    counts = {o: int(np.count_nonzero(det_idx == k)) for k, o in enumerate(outcomes)}
    fu_counts = None
    if follow_up is not None:
        if not follow_up.is_involution():
            raise ValueError("follow-up observable must be an involution")
        fu_counts = {}
        for k, region in enumerate(outcomes):
            mask = det_idx == k
            fu = measure(post_state_of(region), follow_up)
            vals = fu.outcomes()
            fu_cdf = np.cumsum([fu[v].probability for v in vals])
            idx = np.minimum(np.searchsorted(fu_cdf, fu_uniforms[mask], side="right"), len(vals) - 1)
            for j, v in enumerate(vals):
                fu_counts[(region, v)] = int(np.count_nonzero(idx == j))
    return RunStatistics(counts, trials, fu_counts, follow_up.name if follow_up is not None else "")


def _with_zero_regions(stats: RunStatistics, names) -> RunStatistics:
    counts = {n: stats.counts.get(n, 0) for n in names}
    fu = None
    if stats.follow_up is not None:
        fu = {(n, v): stats.follow_up.get((n, v), 0) for n in names for v in OUTCOME_VALUES}
    return RunStatistics(counts, stats.trials, fu, stats.follow_up_name)


def run_stage1(
    s: StateVector, trials: int, rng: RngStream, follow_up: Observable | None = None
) -> RunStatistics:
    """Sample stage-1 detections. A follow-up, if given, is measured on the
    collapsed mode as though detection were nondestructive (an idealization)."""
    dist = stage1_distribution(s)
    stats = _run(dist, trials, rng, follow_up, lambda det: dist[det].post_state)
    return _with_zero_regions(stats, DETECTORS)


def run_stage2(
    s: StateVector,
    trials: int,
    rng: RngStream,
    follow_up: Observable | None = None,
    combiner: UnitaryMap | None = None,
) -> RunStatistics:
    """Sample stage-2 region detections; the follow-up acts on the
    coarse-grained Lüders post-state mapped back to path/spin labels."""
    dist = stage2_retrodicted(s, combiner)
    stats = _run(dist, trials, rng, follow_up, lambda region: dist[region].post_state)
    return _with_zero_regions(stats, REGIONS)


@dataclass(frozen=True)
class StageContrast:
    follow_up_name: str
    product_stage1: dict
    product_stage2: dict
    follow_up_stage1: dict
    follow_up_stage2: dict
    sampled_stage1: RunStatistics | None = None
    sampled_stage2: RunStatistics | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def products_agree(self) -> bool:
        return all(abs(self.product_stage1[v] - self.product_stage2[v]) <= TOL for v in OUTCOME_VALUES)

    @property
    def follow_ups_differ(self) -> bool:
        return any(abs(self.follow_up_stage1[v] - self.follow_up_stage2[v]) > TOL for v in OUTCOME_VALUES)

    def sampled_products_agree(self, sigmas: float = 4.0) -> bool | None:
        """Stage-1 and stage-2 sampled product frequencies both within
        ``sigmas`` binomial standard errors of the analytic value."""
        if self.sampled_stage1 is None or self.sampled_stage2 is None:
            return None
        n = self.sampled_stage1.trials
        f1 = {1: 0, -1: 0}
        for det, c in self.sampled_stage1.counts.items():
            z1, z2 = DETECTOR_VALUES[det]
            f1[z1 * z2] += c / n
        f2 = {REGION_VALUE[r]: c / self.sampled_stage2.trials for r, c in self.sampled_stage2.counts.items()}
        for v in OUTCOME_VALUES:
            p = self.product_stage1[v]
            bound = sigmas * np.sqrt(p * (1 - p) / n) + TOL
            if abs(f1[v] - p) > bound or abs(f2[v] - p) > bound:
                return False
        return True


def stage_contrast(
    s: StateVector, follow_up: Observable, trials: int = 0, rng: RngStream | None = None
) -> StageContrast:
    """Same preparation through stage 1 and stage 2, each followed by ``follow_up``."""
    sampled1 = sampled2 = None
    if trials:
        rng = rng if rng is not None else RngStream(0)
        sampled1 = run_stage1(s, trials, rng, follow_up)
        sampled2 = run_stage2(s, trials, rng, follow_up)
    return StageContrast(
        follow_up_name=follow_up.name,
        product_stage1=product_distribution(1, s),
        product_stage2=product_distribution(2, s),
        follow_up_stage1=followup_marginal(1, s, follow_up),
        follow_up_stage2=followup_marginal(2, s, follow_up),
        sampled_stage1=sampled1,
        sampled_stage2=sampled2,
        notes=("stage-1 follow-up treats detection as nondestructive (idealization)",),
    )


def random_completion(rng: np.random.Generator, per_combiner: bool = True) -> np.ndarray:
    """A random unitary keeping the BC1a and BC2a rows fixed up to phase.

    With ``per_combiner`` each combiner stays a device on its own two input
    modes, so the remaining rows are fixed up to phase too and only phases
    are random. Without it the two free rows are a Haar-random unitary
    mixture of the whole orthogonal complement, which ignores the routing
    of outlets into combiners.
    """
    base = _combiner_matrix()
    phases = np.exp(2j * np.pi * rng.random(4))
    if per_combiner:
        return phases[:, None] * base
    free = hilbert.random_unitary(rng, 2) @ base[[1, 3]]
    out = base.copy()
    out[[1, 3]] = free
    return phases[:, None] * out


def povm_matches_product(matrix) -> float:
    """Largest Frobenius distance between the region effects of ``matrix``
    and the Z1Z2 spectral projectors."""
    effects = region_povm(matrix)
    plus, minus = spectral_projectors(hilbert.Z1Z2)
    return max(frobenius(effects["BC1"] - plus), frobenius(effects["BC2"] - minus))
