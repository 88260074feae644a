"""Population-time dynamics of both formalisms and their trace series."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from core.errors import ModelError, NumericError
from core.nhh_engine import free_coeffs, quasi_green_time
from core.rf_engine import GreenForm, GreenKind, green_time, rf_populations
from models.system import ThreeLevelModel, derive_rates

logger = logging.getLogger(__name__)

RF_COLUMNS = {
    "rf_bbbb": GreenKind.BBBB_T,
    "rf_eeee": GreenKind.EEEE_T,
    "rf_bbee": GreenKind.BBEE_T,
    "rf_eebb": GreenKind.EEBB_T,
    "rf_im_ceee": GreenKind.CEEE_T,
    "rf_im_eeec": GreenKind.EEEC_T,
    "rf_ceec": GreenKind.CEEC_T,
}

NHH_COLUMNS = {
    "nhh_bbbb": "bbbb",
    "nhh_eeee": "eeee",
    "nhh_im_ceee": "ceee",
    "nhh_im_eeec": "eeec",
    "nhh_ceec": "ceec",
}

TRACE_COLUMNS = ("rf_trace_b", "rf_trace_e", "nhh_trace_b", "nhh_trace_e")


@dataclass
class DynamicsTable:
    """Real-valued columns sampled on a common t2 grid (us)."""
    t2: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return ["t2"] + list(self.columns)

    def as_array(self, names=None) -> np.ndarray:
        names = names or list(self.columns)
        return np.column_stack([self.t2] + [self.columns[n] for n in names])

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t2":
            return self.t2
        return self.columns[name]


def _check_grid(t2_grid) -> np.ndarray:
    t2 = np.asarray(t2_grid, dtype=float)
    if t2.ndim != 1 or t2.size == 0:
        raise ModelError("t2 grid must be a non-empty 1-D sequence", key="t2")
    if np.any(t2 < 0) or np.any(np.diff(t2) <= 0):
        raise ModelError("t2 grid must be ascending and >= 0", key="t2")
    return t2


def _real_part(name: str, values: np.ndarray) -> np.ndarray:
    return np.imag(values) if "_im_" in name else np.real(values)


def population_dynamics(
    model: ThreeLevelModel,
    t2_grid,
    form: GreenForm = GreenForm.ANALYTIC,
) -> DynamicsTable:
    """
    Sample the t2 Green functions of both methods and the trace series.

    RF traces are the exact populations summed from |b> and from |e>; the
    NHH traces are the surviving norms |C_bb|^2 and |C_ee|^2 + |C_ce|^2.
    """
    t2 = _check_grid(t2_grid)
    rates = derive_rates(model)
    gammas = (model.gamma1, model.gamma2)
    table = DynamicsTable(t2)

    for name, kind in RF_COLUMNS.items():
        table.columns[name] = _real_part(name, green_time(kind, t2, rates, gammas, form))
    for name, kind in NHH_COLUMNS.items():
        table.columns[name] = _real_part(name, quasi_green_time(kind, t2, rates, model.omega_eb))

    table.columns["rf_trace_b"] = rf_populations(t2, rates, gammas, "b").sum(axis=-1)
    table.columns["rf_trace_e"] = rf_populations(t2, rates, gammas, "e").sum(axis=-1)
    coeffs = free_coeffs(t2, rates)
    table.columns["nhh_trace_b"] = np.abs(coeffs.bb) ** 2
    table.columns["nhh_trace_e"] = np.abs(coeffs.ee) ** 2 + np.abs(coeffs.ce) ** 2
    logger.debug("population dynamics on %d t2 samples (%s)", t2.size, form.value)
    return table


def _refine(values: np.ndarray, index: int) -> float:
    """Sub-sample offset of an extremum from a parabola through three samples."""
    if index <= 0 or index >= values.size - 1:
        return 0.0
    left, mid, right = values[index - 1], values[index], values[index + 1]
    denom = left - 2 * mid + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def first_extrema(t2: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """
    Times of the first interior valley and the first peak after it.

    Raises:
        NumericError: the series has no interior valley or later peak
    """
    valleys, _ = find_peaks(-values)
    if valleys.size == 0:
        raise NumericError("series has no interior minimum")
    v = valleys[0]
    peaks, _ = find_peaks(values[v:])
    if peaks.size == 0:
        raise NumericError("series has no maximum after its first minimum")
    p = peaks[0] + v
    step = t2[1] - t2[0]
    return (
        float(t2[v] + _refine(values, v) * step),
        float(t2[p] + _refine(values, p) * step),
    )


def oscillation_frequency(t2: np.ndarray, values: np.ndarray) -> float:
    """Angular frequency from the mean spacing of refined maxima (uniform grid)."""
    peaks, _ = find_peaks(values)
    if peaks.size < 2:
        raise NumericError("need at least two maxima to measure an oscillation")
    step = t2[1] - t2[0]
    times = np.array([t2[p] + _refine(values, p) * step for p in peaks])
    period = float(np.mean(np.diff(times)))
    return 2 * np.pi / period


def oscillation_phase(t2: np.ndarray, values: np.ndarray, frequency: float, decay: float) -> float:
    """
    Phase of the damped oscillation e^{-decay t}(A cos(w t) + B sin(w t)) + C
    found by least squares; returns atan2(-B, A).
    """
    envelope = np.exp(-decay * t2)
    basis = np.column_stack([
        envelope,
        envelope * np.cos(frequency * t2),
        envelope * np.sin(frequency * t2),
        np.ones_like(t2),
    ])
    coeffs, *_ = np.linalg.lstsq(basis, values, rcond=None)
    return float(np.arctan2(-coeffs[2], coeffs[1]))


def phase_shift(t2: np.ndarray, first: np.ndarray, second: np.ndarray, frequency: float, decay: float) -> float:
    """Phase of ``second`` minus the phase of ``first``, wrapped into [0, 2 pi)."""
    shift = oscillation_phase(t2, second, frequency, decay) - oscillation_phase(t2, first, frequency, decay)
    return float(np.mod(shift, 2 * np.pi))
