"""Two-photon linear optics: BSM click statistics and MZI analyzers.

The swapping station interferes the two signal photons on a 50:50 beam
splitter and watches two detectors.  Adjacent-bin components behave like a
generalized Hong-Ou-Mandel experiment: the antisymmetric combination
always splits across the detectors, the symmetric one always bunches, and
partial distinguishability xi in [0, 1] interpolates linearly in xi^2
toward classical random routing.  Same-bin (Phi) components bunch into a
single time bin and cannot be told apart with linear optics.

The herald decision layer then folds in the detector recovery time: with
a 40 ns dead time, two clicks of the same detector in consecutive 1 ns
bins collapse to one, so only different-detector adjacent-bin patterns
survive as Psi- heralds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .timebin import BellComponent, BellKind, PairState

#: Default bin separation at the 1 GHz clock, ps.
TAU_PS = 1000.0

#: FWHM coherence time of the filtered signal photons, ps.
SIGNAL_COHERENCE_PS = 110.0

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class Click(NamedTuple):
    detector: int       # 1 or 2
    bin: int
    time_ps: float


@dataclass(frozen=True)
class ClickPattern:
    """Detector click geometry of one BSM attempt (pre dead-time)."""

    clicks: tuple

    def times_by_detector(self):
        per = {}
        for c in self.clicks:
            per.setdefault(c.detector, []).append(c)
        for det in per:
            per[det].sort(key=lambda c: c.time_ps)
        return per


@dataclass(frozen=True)
class PhotonArrival:
    """One photon reaching the swapping beam splitter."""

    port: str                       # "A" (Alice) or "B" (Bob)
    bin: int
    fine_time_ps: float = 0.0       # arrival offset within the frame
    polarization_overlap: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.fine_time_ps):
            raise ValueError("fine arrival time must be finite")
        if not 0.0 <= self.polarization_overlap <= 1.0:
            raise ValueError("polarization overlap must lie in [0, 1]")


class OutcomeKind(Enum):
    HERALD_PSI_MINUS = "herald_psi_minus"
    WOULD_BE_PSI_PLUS = "would_be_psi_plus"
    UNHERALDABLE = "unheraldable"
    NO_HERALD = "no_herald"


@dataclass(frozen=True)
class BellOutcome:
    kind: OutcomeKind
    k: int | None = None


def hom_overlap(delta_t_ps: float, coherence_time_ps: float = SIGNAL_COHERENCE_PS) -> float:
    """Temporal amplitude overlap of two photons arriving delta_t apart.

    Gaussian wave packets with the FWHM equal to the coherence time:
    exp(-dt^2 / (2 sigma^2)), sigma = FWHM / (2 sqrt(2 ln 2)).
    """
    if coherence_time_ps <= 0:
        raise ValueError("coherence time must be positive")
    sigma = coherence_time_ps * _FWHM_TO_SIGMA
    return float(math.exp(-(delta_t_ps ** 2) / (2.0 * sigma ** 2)))


def _pattern(dets_bins, tau_ps: float) -> ClickPattern:
    clicks = tuple(
        sorted(
            (Click(d, b, b * tau_ps) for d, b in dets_bins),
            key=lambda c: (c.time_ps, c.detector),
        )
    )
    return ClickPattern(clicks=clicks)


def bsm_click_distribution(
    state_component: BellComponent,
    overlap: float,
    pol_overlap: float = 1.0,
    tau_ps: float = TAU_PS,
) -> list:
    """Click-pattern distribution of one Bell component at the 50:50 BS.

    ``overlap`` is the temporal amplitude overlap (hom_overlap) and
    ``pol_overlap`` the polarization overlap; their product xi is the
    total indistinguishability.  Returns [(ClickPattern, probability)],
    probabilities summing to 1.

    Psi-: different detectors with weight (1 + xi^2)/2, same detector
    (distinguishable leakage) with (1 - xi^2)/2; Psi+ mirrored.  Phi
    components put both photons in one bin; they bunch with (1 + xi^2)/2
    and split across detectors within the bin with (1 - xi^2)/2.
    Nonadjacent components route classically.
    """
    for name, val in (("overlap", overlap), ("pol_overlap", pol_overlap)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {val}")
    xi2 = (overlap * pol_overlap) ** 2
    k = state_component.k
    kind = state_component.kind

    if kind in (BellKind.PSI_MINUS, BellKind.PSI_PLUS):
        p_diff = (1.0 + xi2) / 2.0 if kind is BellKind.PSI_MINUS else (1.0 - xi2) / 2.0
        p_same = 1.0 - p_diff
        return [
            (_pattern([(1, k), (2, k + 1)], tau_ps), p_diff / 2.0),
            (_pattern([(2, k), (1, k + 1)], tau_ps), p_diff / 2.0),
            (_pattern([(1, k), (1, k + 1)], tau_ps), p_same / 2.0),
            (_pattern([(2, k), (2, k + 1)], tau_ps), p_same / 2.0),
        ]
    if kind in (BellKind.PHI_PLUS, BellKind.PHI_MINUS):
        p_bunch = (1.0 + xi2) / 2.0
        return [
            (_pattern([(1, k), (1, k)], tau_ps), p_bunch / 2.0),
            (_pattern([(2, k), (2, k)], tau_ps), p_bunch / 2.0),
            (_pattern([(1, k), (2, k)], tau_ps), 1.0 - p_bunch),
        ]
    # Nonadjacent: fully distinguishable, independent 50/50 routing.
    ka, kb = state_component.signal_bins
    return [
        (_pattern([(1, ka), (1, kb)], tau_ps), 0.25),
        (_pattern([(1, ka), (2, kb)], tau_ps), 0.25),
        (_pattern([(2, ka), (1, kb)], tau_ps), 0.25),
        (_pattern([(2, ka), (2, kb)], tau_ps), 0.25),
    ]


def apply_dead_time_to_pattern(pattern: ClickPattern, dead_time_ps: float) -> ClickPattern:
    """Collapse same-detector clicks closer than the recovery time.

    Simultaneous same-detector clicks always merge (a detector cannot
    count two photons in one pulse).
    """
    survivors = []
    for det, clicks in sorted(pattern.times_by_detector().items()):
        last_kept = None
        for c in clicks:
            if last_kept is not None:
                dt = c.time_ps - last_kept
                if dt < dead_time_ps or dt == 0.0:
                    continue
            survivors.append(c)
            last_kept = c.time_ps
    survivors.sort(key=lambda c: (c.time_ps, c.detector))
    return ClickPattern(clicks=tuple(survivors))


def herald_decision(clicks: ClickPattern, dead_time_ps: float) -> BellOutcome:
    """Map a click pattern to a Bell-state-measurement outcome.

    Psi- is heralded iff two clicks land on different detectors in
    adjacent bins.  Same-detector adjacent-bin pairs survive only when the
    dead time is shorter than the bin separation, in which case they would
    identify Psi+; with realistic (40 ns) dead time the second click is
    swallowed and nothing is heralded.
    """
    if dead_time_ps < 0:
        raise ValueError("dead time must be >= 0")
    surviving = apply_dead_time_to_pattern(clicks, dead_time_ps)
    cs = surviving.clicks
    if len(cs) < 2:
        return BellOutcome(OutcomeKind.NO_HERALD)
    if len(cs) > 2:
        return BellOutcome(OutcomeKind.UNHERALDABLE)
    first, second = cs
    dbin = abs(second.bin - first.bin)
    if dbin == 0:
        # two detectors fired in the same bin: Phi-sector signature
        return BellOutcome(OutcomeKind.UNHERALDABLE, k=first.bin)
    if dbin == 1:
        base = min(first.bin, second.bin)
        if first.detector != second.detector:
            return BellOutcome(OutcomeKind.HERALD_PSI_MINUS, k=base)
        return BellOutcome(OutcomeKind.WOULD_BE_PSI_PLUS, k=base)
    # clicks further apart than the BSM window
    return BellOutcome(OutcomeKind.NO_HERALD)


# ---------------------------------------------------------------------------
# Analyzing interferometers (one-bin path difference)
# ---------------------------------------------------------------------------

def mzi_transfer(n: int, theta: float) -> np.ndarray:
    """Single-photon transfer tensor M[port, slot, bin] of the analyzer.

    Input bin k exits in slot k via the short arm (amplitude 1/2 on each
    port) or in slot k+1 via the long arm (amplitude +e^{i theta}/2 on
    port 0, -e^{i theta}/2 on port 1).  The map is an isometry.
    """
    m = np.zeros((2, n + 1, n), dtype=complex)
    long_amp = 0.5 * np.exp(1j * theta)
    for k in range(n):
        m[0, k, k] += 0.5
        m[1, k, k] += 0.5
        m[0, k + 1, k] += long_amp
        m[1, k + 1, k] += -long_amp
    return m


def joint_mzi_distribution(
    state: PairState, theta_1: float, theta_2: float
) -> np.ndarray:
    """Joint (port, slot) x (port, slot) probabilities after both analyzers.

    ``theta_1``/``theta_2`` are the long-arm optical phases of the two
    analyzers.  Returns a real array P[p1, j1, p2, j2] summing to 1.
    Interference of the dephased component is handled through the state's
    visibility factor: cross terms between different input bin pairs are
    scaled by it.
    """
    n = state.n
    m1 = mzi_transfer(n, theta_1)
    m2 = mzi_transfer(n, theta_2)
    amp = np.zeros((n, n), dtype=complex)
    for (k, l), a in state.amps.items():
        amp[k, l] = a
    joint = np.einsum("kl,pjk,qml->pjqm", amp, m1, m2)
    prob = np.abs(joint) ** 2

    v = state.visibility
    if v < 1.0:
        # Dephased mixture: with weight (1 - v) the input bin phases are
        # scrambled, killing every cross term between distinct bin pairs.
        diag = np.zeros_like(prob)
        for (k, l), a in state.amps.items():
            single = np.einsum(
                "pj,qm->pjqm", m1[:, :, k] * a, m2[:, :, l]
            )
            diag += np.abs(single) ** 2
        prob = v * prob + (1.0 - v) * diag
    return prob


def mzi_analyze(state: PairState, theta_phase: float, side: int = 0) -> dict:
    """Marginal (port, slot) probability table of one photon after its MZI.

    ``side`` selects which photon of the pair is analyzed (0 or 1); the
    other photon is untouched and traced out.  Probabilities sum to 1 over
    both output ports and all slots.
    """
    if side not in (0, 1):
        raise ValueError("side must be 0 or 1")
    n = state.n
    m = mzi_transfer(n, theta_phase)
    amp = np.zeros((n, n), dtype=complex)
    for (k, l), a in state.amps.items():
        amp[k, l] = a
    if side == 1:
        amp = amp.T
    # amplitude over (port, slot, other bin); coherence in the other bin
    # index is irrelevant for the marginal
    out = np.einsum("pjk,kl->pjl", m, amp)
    # For diagonal and anti-diagonal pair states the partner photon's bin
    # tags the path, so the traced-out marginal carries no interference
    # between input bins and is independent of the dephasing factor.
    probs = np.sum(np.abs(out) ** 2, axis=2)
    table = {}
    for p in range(2):
        for j in range(n + 1):
            if probs[p, j] > 0:
                table[(p, j)] = float(probs[p, j])
    return table


def central_slot_table(
    state: PairState, theta_1: float, theta_2: float
) -> dict:
    """Same-slot central coincidences by port pair, plus the remainder.

    Sums the joint distribution over the interfering slots 1..n-1 (edge
    slots excluded: they have no partner bin in a finite frame and vanish
    for the quasi-infinite pulse train being emulated).  Keys are (p1, p2)
    tuples and "other".
    """
    prob = joint_mzi_distribution(state, theta_1, theta_2)
    n = state.n
    table = {}
    total_cc = 0.0
    for p1 in range(2):
        for p2 in range(2):
            s = float(sum(prob[p1, j, p2, j] for j in range(1, n)))
            table[(p1, p2)] = s
            total_cc += s
    table["other"] = float(prob.sum() - total_cc)
    return table


def heralded_port_pair_probs(arg, antisymmetric) -> np.ndarray:
    """Vectorized central-central port-pair probabilities of heralded idlers.

    ``arg`` is theta_a + theta_b + (relative amplitude phase) per event and
    ``antisymmetric`` flags Psi--like states (True) versus Psi+-like
    (False).  Columns are the port pairs (0,0), (0,1), (1,0), (1,1), each
    (1 -+ cos arg)/16; the residual 3/4 sits in non-central slots.
    Scalar-checked against :func:`swapped_central_probs`.
    """
    arg = np.atleast_1d(np.asarray(arg, dtype=float))
    cross = np.where(np.atleast_1d(antisymmetric), -np.cos(arg), np.cos(arg))
    p_equal = (1.0 + cross) / 16.0
    p_unequal = (1.0 - cross) / 16.0
    return np.stack([p_equal, p_unequal, p_unequal, p_equal], axis=1)


def swapped_central_probs(
    amp_early: complex,
    amp_late: complex,
    theta_a: float,
    theta_b: float,
    visibility: float = 1.0,
) -> np.ndarray:
    """Central-central coincidence probabilities of a heralded idler pair.

    ``amp_early`` multiplies |t_k>|t_{k+1}> (photon 1 early), ``amp_late``
    |t_{k+1}>|t_k>.  theta_b follows the package dial convention (minus
    the optical long-arm phase).  Returns P[p1, p2] for the four port
    pairs; the remaining probability mass sits in non-central slots.
    """
    base = abs(amp_early) ** 2 + abs(amp_late) ** 2
    cross = 2.0 * visibility * (
        amp_early * np.conj(amp_late) * np.exp(1j * (theta_a + theta_b))
    ).real
    out = np.empty((2, 2))
    for p1 in range(2):
        for p2 in range(2):
            sign = 1.0 if p1 == p2 else -1.0
            out[p1, p2] = (base + sign * cross) / 16.0
    return out
