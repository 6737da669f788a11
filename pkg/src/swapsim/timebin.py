"""Amplitude-level algebra for sequential time-bin two-photon states.

A source pumped by a train of n mutually coherent pulses (1 ns apart at the
1 GHz clock) emits photon pairs in a coherent superposition of time bins:
the two photons of a pair share the same bin k with amplitude
exp(2ik*theta)/sqrt(n), where theta is the optical phase advance per bin.
This module implements that state, the Franson two-photon fringe,
the Bell decomposition of two independent pairs at the swapping station,
and the fringe of the heralded (swapped) idler state.

Mixedness convention: a partially dephased source is represented by the
pure-state amplitude table plus a scalar ``visibility`` in (0, 1], the
weight of the phase-coherent part in a convex mixture with a
phase-scrambled diagonal state.  All closed-form fringe expressions carry
that scalar through their interference terms.

Analyzer phase convention: every analyzing interferometer imposes its
phase on the long (one-bin-delayed) arm.  For the two-fold fringe of a
single source the dials are the optical long-arm phases themselves and the
fringe depends on their sum.  An anti-correlated (swapped) state fringes
in the DIFFERENCE of the optical phases, so for the four-fold measurement
the second analyzer's dial is defined as minus its long-arm phase; with
that relabeling of one knob both fringe families take the summed-phase
form used throughout this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import IncompatibleSourcesError, NotHeraldedError

TWO_PI = 2.0 * math.pi

#: Unit-norm tolerance for constructed and transformed states.
NORM_TOL = 1e-12


@dataclass(frozen=True)
class PhaseConfig:
    """Pump phase bookkeeping: bin separation tau and phase step theta.

    theta = 2*pi*nu*tau mod 2*pi, with nu the optical frequency.
    """

    nu: float               # optical frequency, Hz
    tau: float = 1e-9       # bin separation, s (1 GHz clock)
    theta: float = field(init=False)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"bin separation must be positive, got {self.tau}")
        object.__setattr__(self, "theta", (TWO_PI * self.nu * self.tau) % TWO_PI)

    @classmethod
    def from_theta(cls, theta: float, tau: float = 1e-9) -> "PhaseConfig":
        """Build a config carrying a given phase step directly."""
        return cls(nu=(theta % TWO_PI) / (TWO_PI * tau), tau=tau)


@dataclass(frozen=True)
class PairState:
    """Sparse two-photon amplitude table over time bins.

    ``amps`` maps (bin of photon A, bin of photon B) to a complex
    amplitude.  For a source state photon A is the signal and photon B the
    idler and the table is diagonal; for a swapped state the two photons
    are the idlers of the two sources.

    ``visibility`` is the phase-coherence factor of the dephasing mixture
    model (1.0 = pure state).  ``theta`` records the nominal phase step
    for diagonal source states; it is None for general states.
    """

    n: int
    amps: dict
    visibility: float = 1.0
    labels: tuple = ("s", "i")
    theta: float | None = None

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amps.values()))

    def validate(self) -> None:
        if abs(self.norm_sq() - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized: |psi|^2 = {self.norm_sq()!r}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility factor out of range: {self.visibility}")

    def is_diagonal(self) -> bool:
        return all(k == l for (k, l) in self.amps)

    def diagonal_amplitudes(self) -> np.ndarray:
        """Dense vector a_k for a diagonal state (zeros where absent)."""
        a = np.zeros(self.n, dtype=complex)
        for (k, l), v in self.amps.items():
            if k != l:
                raise ValueError("state is not diagonal")
            a[k] = v
        return a


def build_pair_state(n: int, phase: PhaseConfig, imperfection: float = 1.0) -> PairState:
    """Source state over n bins: a_{k,k} = exp(2ik*theta)/sqrt(n).

    ``imperfection`` in (0, 1] is the phase-coherent weight; the analytic
    Franson visibility of the returned state equals this factor.
    """
    if n < 1:
        raise ValueError(f"bin count must be >= 1, got {n}")
    if not 0.0 < imperfection <= 1.0:
        raise ValueError(f"visibility factor must be in (0, 1], got {imperfection}")
    amps = {(k, k): np.exp(2j * k * phase.theta) / math.sqrt(n) for k in range(n)}
    state = PairState(n=n, amps=amps, visibility=imperfection, theta=phase.theta)
    state.validate()
    return state


@dataclass(frozen=True)
class JointState:
    """Product of two independent source pair states (no BSM applied yet)."""

    source1: PairState
    source2: PairState

    def __post_init__(self):
        self.source1.validate()
        self.source2.validate()

    def amplitude(self, k: int, l: int) -> complex:
        """Combined amplitude of (source-1 pair in bin k, source-2 pair in bin l)."""
        return self.source1.amps.get((k, k), 0j) * self.source2.amps.get((l, l), 0j)


class BellKind(Enum):
    PSI_MINUS = "psi_minus"
    PSI_PLUS = "psi_plus"
    PHI_PLUS = "phi_plus"
    PHI_MINUS = "phi_minus"
    # Signal photons more than one bin apart: outside the BSM coincidence
    # window, kept so the decomposition stays complete (unitary).
    NONADJACENT = "nonadjacent"


@dataclass(frozen=True)
class BellComponent:
    """One term of the Bell decomposition at the swapping beam splitter.

    ``amplitude`` is real non-negative; all phase information lives in the
    attached two-idler state so that the components reassemble exactly.
    """

    kind: BellKind
    k: int                      # base time bin
    amplitude: float
    idler_state: PairState
    signal_bins: tuple

    @property
    def heraldable(self) -> bool:
        return self.kind is BellKind.PSI_MINUS

    def probability(self) -> float:
        return self.amplitude ** 2


def _split_amp(raw: complex):
    """Split a complex amplitude into (magnitude, unit phase factor)."""
    mag = abs(raw)
    return mag, (raw / mag if mag > 0 else 1.0 + 0j)


def bell_decompose(joint: JointState) -> list:
    """Decompose a two-source product state in the Bell basis of the signals.

    Same-bin terms split into Phi+/Phi- (unheraldable: both signal photons
    leave the same beam-splitter port in the same bin), adjacent-bin terms
    into Psi+/Psi-, and remaining terms are kept as NONADJACENT residuals.
    The Psi- component at bin k carries the antisymmetric idler state
    (|t_k>|t_{k+1}> - |t_{k+1}>|t_k>)/sqrt(2) tagged with the product of
    the two source visibility factors.
    """
    s1, s2 = joint.source1, joint.source2
    if s1.n != s2.n:
        raise IncompatibleSourcesError(f"bin counts differ: {s1.n} vs {s2.n}")
    if s1.theta is None or s2.theta is None or not math.isclose(
        s1.theta, s2.theta, abs_tol=1e-9
    ):
        raise IncompatibleSourcesError(
            f"bin phases differ: {s1.theta} vs {s2.theta}"
        )
    if not (s1.is_diagonal() and s2.is_diagonal()):
        raise IncompatibleSourcesError("sources must be diagonal pair states")

    n = s1.n
    vis = s1.visibility * s2.visibility
    idler_labels = ("i1", "i2")
    a1 = {k: s1.amps.get((k, k), 0j) for k in range(n)}
    a2 = {k: s2.amps.get((k, k), 0j) for k in range(n)}
    out = []

    # Same-bin sector: |t_k t_k>_s = (Phi+ + Phi-)/sqrt(2), idlers both at k.
    for k in range(n):
        raw = a1[k] * a2[k] / math.sqrt(2)
        mag, ph = _split_amp(raw)
        for kind in (BellKind.PHI_PLUS, BellKind.PHI_MINUS):
            idler = PairState(n=n, amps={(k, k): ph}, visibility=vis,
                              labels=idler_labels)
            out.append(BellComponent(kind=kind, k=k, amplitude=mag,
                                     idler_state=idler, signal_bins=(k, k)))

    # Adjacent-bin sector: Psi+/Psi- with entangled two-idler states.
    for k in range(n - 1):
        t1 = a1[k] * a2[k + 1]          # idler1 at k,   idler2 at k+1
        t2 = a1[k + 1] * a2[k]          # idler1 at k+1, idler2 at k
        for kind, sign in ((BellKind.PSI_PLUS, +1.0), (BellKind.PSI_MINUS, -1.0)):
            c1, c2 = t1 / math.sqrt(2), sign * t2 / math.sqrt(2)
            mag = math.sqrt(abs(c1) ** 2 + abs(c2) ** 2)
            if mag == 0:
                continue
            idler = PairState(
                n=n,
                amps={(k, k + 1): c1 / mag, (k + 1, k): c2 / mag},
                visibility=vis,
                labels=idler_labels,
            )
            out.append(BellComponent(kind=kind, k=k, amplitude=mag,
                                     idler_state=idler, signal_bins=(k, k + 1)))

    # Distant sector, |k - l| >= 2: no interference at the BSM, no Bell label.
    for k in range(n):
        for l in range(n):
            if abs(k - l) < 2:
                continue
            mag, ph = _split_amp(a1[k] * a2[l])
            if mag == 0:
                continue
            idler = PairState(n=n, amps={(k, l): ph}, visibility=vis,
                              labels=idler_labels)
            out.append(BellComponent(kind=BellKind.NONADJACENT, k=min(k, l),
                                     amplitude=mag, idler_state=idler,
                                     signal_bins=(k, l)))
    return out


def _bell_signal_ket(kind: BellKind, k: int, signal_bins: tuple) -> dict:
    """Signal-pair ket of a component, keyed (bin of signal 1, bin of signal 2)."""
    r = 1.0 / math.sqrt(2)
    if kind is BellKind.PSI_PLUS:
        return {(k, k + 1): r, (k + 1, k): r}
    if kind is BellKind.PSI_MINUS:
        return {(k, k + 1): r, (k + 1, k): -r}
    if kind is BellKind.PHI_PLUS:
        return {(k, k): r, (k + 1, k + 1): r}
    if kind is BellKind.PHI_MINUS:
        return {(k, k): r, (k + 1, k + 1): -r}
    return {signal_bins: 1.0}


def reassemble_joint(components: list) -> dict:
    """Sum components back into 4-photon amplitudes (k1s, k2s, k1i, k2i).

    Used by the completeness checks: the result must reproduce the input
    product state within NORM_TOL amplitude error.
    """
    total = {}
    for comp in components:
        ket_s = _bell_signal_ket(comp.kind, comp.k, comp.signal_bins)
        for (ks1, ks2), cs in ket_s.items():
            for (ki1, ki2), ci in comp.idler_state.amps.items():
                key = (ks1, ks2, ki1, ki2)
                total[key] = total.get(key, 0j) + comp.amplitude * cs * ci
    return {k: v for k, v in total.items() if abs(v) > NORM_TOL}


def psi_minus_probability(n: int) -> float:
    """Total Psi- herald probability of the ideal n-bin joint state."""
    return (n - 1) / n**2 if n >= 1 else 0.0


def swapped_state(component: BellComponent) -> PairState:
    """Two-idler state heralded by a Psi- Bell-state measurement."""
    if component.kind is not BellKind.PSI_MINUS:
        raise NotHeraldedError(
            f"only Psi- components herald a swapped state, got {component.kind.value}"
        )
    state = component.idler_state
    state.validate()
    return state


def franson_coincidence_prob(state: PairState, theta_s: float, theta_i: float) -> float:
    """Central-slot coincidence probability of the two-photon Franson fringe.

    Both photons pass interferometers with a one-bin path difference; the
    coincidence is post-selected on the interfering (central) output slots
    of one chosen port pair.  For the ideal source this evaluates to
    (n-1)/(8n) * (1 + V cos(theta_s + theta_i - 2*theta)).
    """
    state.validate()
    a = state.diagonal_amplitudes()
    v = state.visibility
    phase = np.exp(1j * (theta_s + theta_i))
    p = 0.0
    for j in range(1, state.n):
        cross = a[j - 1] * np.conj(a[j]) * phase
        p += (abs(a[j]) ** 2 + abs(a[j - 1]) ** 2 + 2.0 * v * cross.real) / 16.0
    return float(p)


def fourfold_fringe_prob(swapped: PairState, theta_a: float, theta_b: float) -> float:
    """Conditioned Franson coincidence of the swapped two-idler state.

    Post-selected on both analyzers' central slots, one port pair.  For the
    heralded antisymmetric state this is (1 - V cos(theta_a + theta_b))/16;
    the (k, k+1)/(k+1, k) amplitude phases shift the fringe offset.
    """
    swapped.validate()
    phase = np.exp(1j * (theta_a + theta_b))
    v = swapped.visibility
    p = 0.0
    seen = set()
    for (k, l), a in swapped.amps.items():
        if abs(k - l) != 1:
            raise ValueError("swapped state must live on adjacent-bin pairs")
        base = min(k, l)
        if base in seen:
            continue
        seen.add(base)
        c_kl = swapped.amps.get((base, base + 1), 0j)     # photon 1 early
        c_lk = swapped.amps.get((base + 1, base), 0j)     # photon 1 late
        cross = c_kl * np.conj(c_lk) * phase
        p += (abs(c_kl) ** 2 + abs(c_lk) ** 2 + 2.0 * v * cross.real) / 16.0
    return float(p)
