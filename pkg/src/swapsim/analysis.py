"""Fringe fitting, visibility estimation and entanglement verdicts.

Coincidence counts versus an analyzer control value (interferometer
temperature or phase) are fit with a sinusoid under Poissonian weights;
the fringe visibility (max - min)/(max + min) of the fitted curve and its
1-sigma error certify entanglement against the 1/3 Werner-state bound.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import FitFailureError, InsufficientDataError

#: Separability threshold for Werner states.
WERNER_VISIBILITY_BOUND = 1.0 / 3.0

#: Default thermal tuning of the analyzing interferometers, rad per degC.
#: One full fringe per 0.5 degC; a calibration input, not a measured value.
THERMAL_COEFF_RAD_PER_C = 2.0 * math.pi / 0.5


@dataclass(frozen=True)
class FringeData:
    """Sweep points: control value, coincidence counts, accumulation time."""

    control: np.ndarray
    counts: np.ndarray
    seconds: np.ndarray

    def __post_init__(self):
        if not (len(self.control) == len(self.counts) == len(self.seconds)):
            raise ValueError("columns must have equal length")
        if np.any(np.asarray(self.counts) < 0):
            raise ValueError("counts must be >= 0")

    @classmethod
    def from_arrays(cls, control, counts, seconds) -> "FringeData":
        return cls(
            control=np.asarray(control, dtype=float),
            counts=np.asarray(counts, dtype=float),
            seconds=np.asarray(seconds, dtype=float),
        )


@dataclass(frozen=True)
class FringeFit:
    v: float
    v_err: float
    amplitude: float
    phase0: float           # x0 of the fitted sinusoid, in control units
    period: float
    chi2_dof: float
    clamped: bool = False   # set when the raw fit left [0, 1]

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.amplitude * (
            1.0 + self.v * np.sin(2.0 * math.pi * (x - self.phase0) / self.period)
        )


def _model(x, amp, vis, x0, period):
    return amp * (1.0 + vis * np.sin(2.0 * math.pi * (x - x0) / period))


def fit_fringe(data: FringeData, period_hint: float) -> FringeFit:
    """Weighted least squares of A(1 + V sin(2 pi (x - x0)/P)).

    Weights are Poissonian, sigma_i = sqrt(max(count_i, 1)); parameter
    errors come from the covariance with absolute sigma.  The visibility
    is reported as (max - min)/(max + min) of the fitted curve, clamped to
    [0, 1] with a flag when the raw estimate falls outside.
    """
    x = np.asarray(data.control, dtype=float)
    y = np.asarray(data.counts, dtype=float)
    if len(x) < 5:
        raise InsufficientDataError("need at least 5 sweep points to fit")
    if np.ptp(x) == 0:
        raise FitFailureError("degenerate sweep: control value is constant")
    if period_hint <= 0:
        raise ValueError("period hint must be positive")

    sigma = np.sqrt(np.maximum(y, 1.0))
    amp0 = max(float(np.mean(y)), 1e-9)
    span = float(np.max(y) - np.min(y))
    v0 = min(span / max(np.max(y) + np.min(y), 1e-9), 0.95)
    # coarse scan for the phase start, robust against bad initial x0
    candidates = np.linspace(0.0, period_hint, 8, endpoint=False)
    best, best_cost = None, math.inf
    for x0 in candidates:
        try:
            with warnings.catch_warnings():
                # flat data has a singular covariance; errors become inf,
                # which is the honest answer
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(
                    _model, x, y,
                    p0=[amp0, max(v0, 0.05), x0, period_hint],
                    sigma=sigma, absolute_sigma=True, maxfev=20000,
                    xtol=1e-14, ftol=1e-14,
                )
        except RuntimeError:
            continue
        resid = (y - _model(x, *popt)) / sigma
        cost = float(np.sum(resid ** 2))
        if cost < best_cost:
            best, best_cost = (popt, pcov), cost
    if best is None:
        raise FitFailureError("sinusoidal fit did not converge")

    popt, pcov = best
    amp, vis, x0, period = popt
    # canonicalize: positive amplitude and visibility
    if amp < 0:
        amp, vis = -amp, -vis
    if vis < 0:
        vis = -vis
        x0 = x0 + period / 2.0
    x0 = x0 % period
    errs = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    v_raw = float(vis)
    clamped = not 0.0 <= v_raw <= 1.0
    v = min(max(v_raw, 0.0), 1.0)
    dof = max(len(x) - 4, 1)
    return FringeFit(
        v=v,
        v_err=float(errs[1]),
        amplitude=float(amp),
        phase0=float(x0),
        period=float(period),
        chi2_dof=best_cost / dof,
        clamped=clamped,
    )


@dataclass(frozen=True)
class Verdict:
    entangled: bool
    margin: float           # V - 1/3
    criterion: str

    @property
    def label(self) -> str:
        return "entangled" if self.entangled else "inconclusive"


def entanglement_verdict(fit: FringeFit) -> Verdict:
    """Three-sigma test of the fringe visibility against the 1/3 bound.

    entangled iff V - 3 V_err > 1/3 (strict); the margin reported is
    V - 1/3 regardless of the verdict.
    """
    ok = (fit.v - 3.0 * fit.v_err) > WERNER_VISIBILITY_BOUND
    return Verdict(
        entangled=bool(ok),
        margin=fit.v - WERNER_VISIBILITY_BOUND,
        criterion="V - 3*V_err > 1/3",
    )


def drift_statistics(delays_ps) -> dict:
    """Sample standard deviation and peak-to-peak of a delay series (ps)."""
    d = np.asarray(delays_ps, dtype=float)
    if d.size < 2:
        raise InsufficientDataError("need at least 2 samples")
    return {
        "sigma_ps": float(np.std(d, ddof=1)),
        "peak_to_peak_ps": float(np.ptp(d)),
    }


def temperature_to_phase(
    temp_c, coefficient: float = THERMAL_COEFF_RAD_PER_C, offset: float = 0.0
):
    """Affine interferometer tuning: theta = c * T + offset (rad)."""
    if coefficient == 0:
        raise ValueError("thermal coefficient must be non-zero")
    return np.asarray(temp_c, dtype=float) * coefficient + offset


def phase_to_temperature(
    theta, coefficient: float = THERMAL_COEFF_RAD_PER_C, offset: float = 0.0
):
    if coefficient == 0:
        raise ValueError("thermal coefficient must be non-zero")
    return (np.asarray(theta, dtype=float) - offset) / coefficient


# ---------------------------------------------------------------------------
# Interchange formats
# ---------------------------------------------------------------------------

def write_fringe_csv(data: FringeData, path, header_comment: str = "") -> None:
    """FringeData export: control_value, counts, seconds."""
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("control_value,counts,seconds\n")
        for c, n, s in zip(data.control, data.counts, data.seconds):
            fh.write(f"{c:.9g},{n:.9g},{s:.9g}\n")


def read_fringe_csv(path) -> FringeData:
    control, counts, seconds = [], [], []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[:3] != ["control_value", "counts", "seconds"]:
                    raise ValueError(
                        f"expected header 'control_value,counts,seconds', got {line!r}"
                    )
                continue
            c, n, s = line.split(",")[:3]
            control.append(float(c))
            counts.append(float(n))
            seconds.append(float(s))
    return FringeData.from_arrays(control, counts, seconds)


def write_fit_json(fit: FringeFit, path, meta: dict | None = None) -> None:
    payload = {
        "meta": meta or {},
        "visibility": fit.v,
        "visibility_err": fit.v_err,
        "amplitude": fit.amplitude,
        "phase0": fit.phase0,
        "period": fit.period,
        "chi2_dof": fit.chi2_dof,
        "clamped": fit.clamped,
        "error_model": "fit-covariance (absolute Poisson sigma)",
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
