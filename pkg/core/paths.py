"""Phase-tagged amplitude branching and Liouville-path enumeration."""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Iterable

import numpy as np

from core.errors import ModelError
from core.nhh_engine import free_coeffs, quasi_green_freq, quasi_green_time
from models.system import ThreeLevelModel, DerivedRates, derive_rates

logger = logging.getLogger(__name__)

PULSES = ("a", "b", "c")
INTERVALS = ("t1", "t2", "t3")
EMITTING = {("e", "b"), ("b", "e")}


class PhaseSignature(NamedTuple):
    """Accumulated multiples of the pulse wavevectors k_a, k_b, k_c."""
    n_a: int = 0
    n_b: int = 0
    n_c: int = 0

    def __add__(self, other: "PhaseSignature") -> "PhaseSignature":
        return PhaseSignature(*(x + y for x, y in zip(self, other)))

    def __neg__(self) -> "PhaseSignature":
        return PhaseSignature(-self.n_a, -self.n_b, -self.n_c)

    def conjugate(self) -> "PhaseSignature":
        return -self

    @classmethod
    def unit(cls, pulse_id: str, sign: int = 1) -> "PhaseSignature":
        values = [0, 0, 0]
        values[PULSES.index(pulse_id)] = sign
        return cls(*values)

    @classmethod
    def parse(cls, text: str) -> "PhaseSignature":
        parts = [int(p) for p in text.replace("(", "").replace(")", "").split(",")]
        if len(parts) != 3:
            raise ValueError(f"signature needs three integers, got {text!r}")
        return cls(*parts)


REPHASING = PhaseSignature(-1, 1, 1)
NON_REPHASING = PhaseSignature(1, -1, 1)


@dataclass(frozen=True)
class PhasedAmplitude:
    """
    A level amplitude carrying its phase signature and the levels it has
    visited (initial level, then after every pulse and free interval).
    """
    level: str
    amplitude: complex
    signature: PhaseSignature = PhaseSignature()
    history: tuple[str, ...] = ()


class Element(NamedTuple):
    """Density-matrix element |ket><bra|."""
    ket: str
    bra: str

    @property
    def label(self) -> str:
        return self.ket + self.bra


class PathStep(NamedTuple):
    interval: str
    start: Element
    end: Element

    @property
    def kind(self) -> str:
        """Green-function label: final element followed by initial element."""
        return self.end.label + self.start.label


def _pulse_connects(before: Element, after: Element) -> bool:
    allowed = {("b", "b"), ("e", "e"), ("c", "c"), ("b", "e"), ("e", "b")}
    return (before.ket, after.ket) in allowed and (before.bra, after.bra) in allowed


@dataclass(frozen=True)
class LiouvillePath:
    """Three free intervals joined by single pulse actions, with a complex weight."""
    steps: tuple[PathStep, ...]
    weight: complex
    signature: PhaseSignature

    def __post_init__(self):
        if tuple(step.interval for step in self.steps) != INTERVALS:
            raise ModelError("a path needs exactly the intervals t1, t2, t3")
        for prev, nxt in zip(self.steps, self.steps[1:]):
            if not _pulse_connects(prev.end, nxt.start):
                raise ModelError(f"{prev.kind} -> {nxt.kind} is not joined by one pulse")

    @property
    def kinds(self) -> tuple[str, str, str]:
        return tuple(step.kind for step in self.steps)

    @property
    def chain(self) -> tuple:
        return tuple((s.interval, s.start, s.end) for s in self.steps)


def _nonzero(branches: Iterable[PhasedAmplitude]) -> list[PhasedAmplitude]:
    # Histories are unique per branch; equal chains are summed once paired into paths
    return [br for br in branches if br.amplitude != 0]


def pulse_apply(
    state: list[PhasedAmplitude],
    pulse_id: str,
    direction_sign: int,
    rates: DerivedRates,
) -> list[PhasedAmplitude]:
    """
    Apply one square probe pulse to every branch.

    direction_sign +1 acts on the ket side; -1 acts on the bra side, where
    amplitudes enter conjugated and the phase tags are negated.

    |b> -> N(|b> + beta e^{+ik}|e>), |e> -> N(beta e^{-ik}|b> + |e>), |c> -> |c>
    """
    if pulse_id not in PULSES:
        raise ModelError(f"unknown pulse {pulse_id!r}")
    if direction_sign not in (1, -1):
        raise ModelError("direction_sign must be +1 or -1")

    def side(value: complex) -> complex:
        return value if direction_sign > 0 else np.conj(value)

    n = side(rates.n_p)
    nb = side(rates.n_p * rates.beta_p)
    up = PhaseSignature.unit(pulse_id, direction_sign)
    down = -up

    out = []
    for br in state:
        amp, sig = br.amplitude, br.signature
        if br.level == "b":
            out.append(PhasedAmplitude("b", amp * n, sig, br.history + ("b",)))
            out.append(PhasedAmplitude("e", amp * nb, sig + up, br.history + ("e",)))
        elif br.level == "e":
            out.append(PhasedAmplitude("b", amp * nb, sig + down, br.history + ("b",)))
            out.append(PhasedAmplitude("e", amp * n, sig, br.history + ("e",)))
        else:
            out.append(PhasedAmplitude(br.level, amp, sig, br.history + (br.level,)))
    return _nonzero(out)


def free_apply(state: list[PhasedAmplitude], rates: DerivedRates) -> list[PhasedAmplitude]:
    """Symbolic free evolution: record every level a branch can reach."""
    targets = {"b": ("b",), "e": ("e", "c"), "c": ("e", "c")}
    driven = rates.rabi_ec != 0
    out = []
    for br in state:
        for level in targets[br.level]:
            if level != br.level and not driven:
                continue
            out.append(PhasedAmplitude(level, br.amplitude, br.signature, br.history + (level,)))
    return _nonzero(out)


def _branches(rates: DerivedRates, direction_sign: int) -> list[PhasedAmplitude]:
    state = [PhasedAmplitude("b", 1.0 + 0j, PhaseSignature(), ("b",))]
    for pulse_id in PULSES:
        state = pulse_apply(state, pulse_id, direction_sign, rates)
        state = free_apply(state, rates)
    return state


def enumerate_paths(model, signature_select: PhaseSignature = REPHASING) -> list[LiouvillePath]:
    """
    Pair ket and bra branches of the three-pulse sequence and keep the pairs
    with the selected phase signature that end on an emitting coherence.

    Args:
        model: ThreeLevelModel or its DerivedRates
        signature_select: phase-matching direction

    Returns:
        Distinct paths in generation order; identical chains have summed weights.
    """
    rates = model if isinstance(model, DerivedRates) else derive_rates(model)
    kets = _branches(rates, 1)
    bras = _branches(rates, -1)

    paths: dict = {}
    for ket in kets:
        for bra in bras:
            if ket.signature + bra.signature != signature_select:
                continue
            if (ket.level, bra.level) not in EMITTING:
                continue
            h, g = ket.history, bra.history
            steps = tuple(
                PathStep(interval, Element(h[i], g[i]), Element(h[i + 1], g[i + 1]))
                for interval, i in zip(INTERVALS, (1, 3, 5))
            )
            chain = tuple((s.interval, s.start, s.end) for s in steps)
            weight = ket.amplitude * bra.amplitude
            paths[chain] = (steps, paths.get(chain, (steps, 0))[1] + weight)

    result = [
        LiouvillePath(steps, complex(weight), signature_select)
        for steps, weight in paths.values()
        if weight != 0
    ]
    logger.debug("signature %s: %d paths", tuple(signature_select), len(result))
    return result


def path_polarization(paths: list[LiouvillePath], t3, t2, t1, rates: DerivedRates) -> np.ndarray:
    """Time-domain polarization of enumerated paths, carrier removed."""
    times = {"t1": t1, "t2": t2, "t3": t3}
    total = 0
    for path in paths:
        value = path.weight
        for step in path.steps:
            coeffs = free_coeffs(times[step.interval], rates)
            value = value * coeffs.get(step.end.ket, step.start.ket) * np.conj(
                coeffs.get(step.end.bra, step.start.bra)
            )
        total = total + value
    return np.asarray(total, dtype=complex)


def signal_from_paths(
    paths: list[LiouvillePath],
    omega3,
    t2,
    omega1,
    model: ThreeLevelModel,
) -> np.ndarray:
    """Frequency-domain signal built from enumerated rephasing path weights."""
    rates = derive_rates(model)
    omega_e = model.omega_eb
    total = 0
    for path in paths:
        k1, k2, k3 = path.kinds
        total = total + (
            path.weight
            * quasi_green_freq(k1, omega1, rates, omega_e)
            * quasi_green_time(k2, t2, rates, omega_e)
            * quasi_green_freq(k3, omega3, rates, omega_e)
        )
    return np.asarray(total, dtype=complex)
