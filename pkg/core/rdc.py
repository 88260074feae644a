"""Six-level carbonyl model and its impulsive third-order 2D spectrum."""
import logging
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from core.errors import ModelError
from core.paths import NON_REPHASING, PULSES, REPHASING, PhaseSignature
from core.spectra import absorptive_combine, double_fft, evaluate_grid
from models.spectrum import Axis, ComplexGrid2D, SpectrumResult
from models.system import MultiLevelModel
from models.units import angular_to_wavenumber, wavenumber_to_angular

logger = logging.getLogger(__name__)

RDC_LABELS = ("00", "a", "s", "2a", "2s", "as")
RDC_ENERGIES_CM = (0.0, 2015.0, 2084.0, 4016.0, 4157.0, 4073.0)
RDC_QUANTA = (0, 1, 1, 2, 2, 2)
# (upper, lower, dipole relative to mu_s0)
RDC_DIPOLES = (
    ("a", "00", 1.05),
    ("s", "00", 1.0),
    ("as", "s", 1.05),
    ("as", "a", 1.0),
    ("2a", "a", 1.48),
    ("2s", "s", 1.41),
    ("2s", "a", 0.13),
    ("2a", "s", 0.13),
)
DEFAULT_GAMMA_CM = 0.3
DEFAULT_FRAME_CM = 2036.0


@dataclass(frozen=True)
class RdcSystem:
    """Multi-level model with excitation quanta and a rotating-frame carrier (rad/ps)."""
    model: MultiLevelModel
    quanta: tuple[int, ...]
    frame: float
    gamma: float

    def __post_init__(self):
        if len(self.quanta) != self.model.n_levels:
            raise ModelError("one quantum number per level is required", key="quanta")

    @property
    def frame_energies(self) -> np.ndarray:
        """Energies in the frame rotating at ``frame`` per quantum."""
        return self.model.energies - np.asarray(self.quanta) * self.frame

    def transition_cm(self, upper: str, lower: str) -> float:
        m = self.model
        return float(angular_to_wavenumber(m.energies[m.index(upper)] - m.energies[m.index(lower)]))

    def with_dipoles(self, changes: dict[tuple[str, str], float]) -> "RdcSystem":
        """Copy with some dipole elements replaced; keys are (level, level) label pairs."""
        m = self.model
        dipole = np.array(m.dipole)
        for (i, j), value in changes.items():
            dipole[m.index(i), m.index(j)] = dipole[m.index(j), m.index(i)] = value
        return replace(self, model=MultiLevelModel(m.energies, dipole, m.decay, m.labels))

    def without_two_quantum(self) -> "RdcSystem":
        """Copy with every dipole into a two-quantum level set to zero."""
        m = self.model
        changes = {
            (m.labels[i], m.labels[j]): 0.0
            for i in range(m.n_levels) for j in range(m.n_levels)
            if self.quanta[i] == 2 and m.dipole[i, j] != 0
        }
        return self.with_dipoles(changes)


def build_rdc(gamma_cm: float = DEFAULT_GAMMA_CM, frame_cm: float = DEFAULT_FRAME_CM) -> RdcSystem:
    """
    The six-level system with energies anchored at the ground level.

    Every excited level carries population decay 2*gamma, so each coherence
    with the ground level decays as exp(-gamma t).
    """
    if gamma_cm < 0:
        raise ModelError(f"gamma must be >= 0, got {gamma_cm}", key="gamma")
    n = len(RDC_LABELS)
    dipole = np.zeros((n, n))
    for upper, lower, mu in RDC_DIPOLES:
        i, j = RDC_LABELS.index(upper), RDC_LABELS.index(lower)
        dipole[i, j] = dipole[j, i] = mu
    gamma = float(wavenumber_to_angular(gamma_cm))
    decay = np.array([0.0] + [2 * gamma] * (n - 1))
    model = MultiLevelModel(wavenumber_to_angular(np.array(RDC_ENERGIES_CM)), dipole, decay, RDC_LABELS)
    return RdcSystem(model, RDC_QUANTA, float(wavenumber_to_angular(frame_cm)), gamma)


class _Branch(NamedTuple):
    levels: tuple[int, ...]  # level after each pulse, starting from the ground level
    factor: complex
    signature: PhaseSignature


class RdcPath(NamedTuple):
    ket: tuple[int, ...]
    bra: tuple[int, ...]
    weight: complex
    signature: PhaseSignature
    # Exponents of the three free intervals, rad/ps
    exponents: tuple[complex, complex, complex]

    def kind(self, quanta) -> str:
        if quanta[self.ket[3]] == 2:
            return "esa"
        return "gsb" if self.ket[2] == self.bra[2] == 0 else "se"


def _dipole_branches(system: RdcSystem, side: int) -> list[_Branch]:
    """
    Every sequence of at most one dipole action per pulse on one side.

    side +1 is the ket (factor i*mu, tag +k going up); side -1 is the bra
    (factor -i*mu, tags negated).
    """
    mu = system.model.dipole
    quanta = system.quanta
    branches = [_Branch((0,), 1.0 + 0j, PhaseSignature())]
    for pulse in PULSES:
        grown = []
        for br in branches:
            here = br.levels[-1]
            grown.append(_Branch(br.levels + (here,), br.factor, br.signature))
            for there in np.nonzero(mu[:, here])[0]:
                step = quanta[there] - quanta[here]
                if abs(step) != 1:
                    continue
                tag = PhaseSignature.unit(pulse, side * step)
                grown.append(_Branch(
                    br.levels + (int(there),),
                    br.factor * side * 1j * mu[there, here],
                    br.signature + tag,
                ))
        branches = grown
    return branches


def enumerate_rdc_paths(system: RdcSystem, signature: PhaseSignature = REPHASING) -> list[RdcPath]:
    """Third-order ket/bra action pairs with the given phase signature."""
    energies = system.frame_energies
    decay = system.model.decay
    mu = system.model.dipole

    def exponent(k: int, b: int) -> complex:
        return -1j * (energies[k] - energies[b]) - 0.5 * (decay[k] + decay[b])

    paths = []
    for ket in _dipole_branches(system, +1):
        for bra in _dipole_branches(system, -1):
            if ket.signature + bra.signature != signature:
                continue
            # Each pulse acts exactly once
            if any((ket.levels[i] != ket.levels[i + 1]) == (bra.levels[i] != bra.levels[i + 1]) for i in range(3)):
                continue
            weight = ket.factor * bra.factor * mu[bra.levels[3], ket.levels[3]]
            if weight == 0:
                continue
            exps = tuple(exponent(ket.levels[i], bra.levels[i]) for i in (1, 2, 3))
            paths.append(RdcPath(ket.levels, bra.levels, complex(weight), signature, exps))
    logger.debug("signature %s: %d rdc paths", tuple(signature), len(paths))
    return paths


def third_order_signal(
    system: RdcSystem,
    signature: PhaseSignature,
    t1,
    t2,
    t3,
    paths: Optional[list[RdcPath]] = None,
) -> np.ndarray:
    """
    Polarization sum_paths w * exp(z1 t1 + z2 t2 + z3 t3) in the rotating
    frame; t1, t2, t3 in ps and broadcastable.
    """
    t1, t2, t3 = (np.asarray(t, dtype=float) for t in (t1, t2, t3))
    if np.any(t1 < 0) or np.any(t2 < 0) or np.any(t3 < 0):
        raise ModelError("delay times must be >= 0")
    if paths is None:
        paths = enumerate_rdc_paths(system, signature)
    total = np.zeros(np.broadcast_shapes(t1.shape, t2.shape, t3.shape), dtype=complex)
    for path in paths:
        z1, z2, z3 = path.exponents
        total = total + path.weight * np.exp(z1 * t1) * np.exp(z2 * t2) * np.exp(z3 * t3)
    return total


@dataclass(frozen=True)
class RdcSettings:
    t_max: float = 5.0  # ps
    t_step: float = 0.005  # ps
    pad_to: int = 5000
    window_cm: float = 200.0  # half-width kept around the frame, cm-1
    t2: float = 0.0
    workers: int = 1

    def time_axis(self) -> Axis:
        count = int(round(self.t_max / self.t_step)) + 1
        return Axis(0.0, self.t_step, count, "ps")


def _signal_spectrum(system: RdcSystem, signature: PhaseSignature, settings: RdcSettings, name: str) -> SpectrumResult:
    paths = enumerate_rdc_paths(system, signature)
    axis = settings.time_axis()

    def field(t3, t2, t1):
        return 1j * third_order_signal(system, signature, t1, t2, t3, paths)

    time_grid = evaluate_grid(field, axis, axis, settings.t2, workers=settings.workers)
    half = float(wavenumber_to_angular(settings.window_cm))
    grid = double_fft(time_grid, settings.pad_to, window1=(-half, half), window2=(-half, half))
    return SpectrumResult(grid, name, t2=settings.t2, center_frequency=system.frame,
                          metadata={"paths": len(paths)})


def to_wavenumber_axes(result: SpectrumResult, frame: float) -> SpectrumResult:
    """Rotating-frame rad/ps axes to absolute cm-1."""
    scale = float(angular_to_wavenumber(1.0))
    grid = result.grid
    axes = (grid.axis1.shifted(frame, scale, "cm-1"), grid.axis2.shifted(frame, scale, "cm-1"))
    return result.with_grid(ComplexGrid2D(axes[0], axes[1], grid.values))


def simulate_rdc(system: Optional[RdcSystem] = None, settings: RdcSettings = RdcSettings()) -> dict[str, SpectrumResult]:
    """
    Rephasing, non-rephasing and absorptive spectra on absolute cm-1 axes.

    The absorptive spectrum is max-normalized; the other two keep their
    raw scale.
    """
    system = system or build_rdc()
    logger.info("rdc: %d x %d time grid, padded to %d", settings.time_axis().count,
                settings.time_axis().count, settings.pad_to)
    rephasing = _signal_spectrum(system, REPHASING, settings, "rdc-rephasing")
    nonrephasing = _signal_spectrum(system, NON_REPHASING, settings, "rdc-nonrephasing")
    absorptive = absorptive_combine(rephasing, nonrephasing)
    return {
        "rephasing": to_wavenumber_axes(rephasing, system.frame),
        "nonrephasing": to_wavenumber_axes(nonrephasing, system.frame),
        "absorptive": to_wavenumber_axes(absorptive, system.frame).normalized(),
    }
