"""Non-Hermitian Hamiltonian propagation and the quasi-Green rephasing signal."""
from enum import Enum
from typing import NamedTuple, Union

import numpy as np

from core.errors import ModelError
from core.rf_engine import sin_over
from models.system import ThreeLevelModel, DerivedRates, derive_rates

ArrayLike = Union[float, np.ndarray]


class FreeCoefficients(NamedTuple):
    """Amplitudes C_ji(t) of free evolution from |i> to |j>."""
    bb: np.ndarray
    ee: np.ndarray
    ce: np.ndarray
    ec: np.ndarray
    cc: np.ndarray

    def get(self, final: str, initial: str) -> np.ndarray:
        """C_{final,initial}; zero for transitions free evolution cannot make."""
        name = final + initial
        if name in self._fields:
            return getattr(self, name)
        return np.zeros_like(self.bb)


class QuasiGreenKind(Enum):
    BEBE = "bebe"
    BCBE = "bcbe"
    EBEB = "ebeb"
    EBCB = "ebcb"
    BBBB = "bbbb"
    EEEE = "eeee"
    CEEE = "ceee"
    EEEC = "eeec"
    CEEC = "ceec"

    @property
    def is_frequency(self) -> bool:
        return self in _FREQUENCY_KINDS


_FREQUENCY_KINDS = {QuasiGreenKind.BEBE, QuasiGreenKind.BCBE, QuasiGreenKind.EBEB, QuasiGreenKind.EBCB}

# Label -> (t1 kind, t2 kind, t3 kind) of each rephasing path
NHH_PATHS: dict[str, tuple[QuasiGreenKind, QuasiGreenKind, QuasiGreenKind]] = {
    "a": (QuasiGreenKind.BEBE, QuasiGreenKind.BBBB, QuasiGreenKind.EBEB),
    "b": (QuasiGreenKind.BEBE, QuasiGreenKind.EEEE, QuasiGreenKind.EBEB),
    "c": (QuasiGreenKind.BEBE, QuasiGreenKind.CEEE, QuasiGreenKind.EBCB),
    "d": (QuasiGreenKind.BCBE, QuasiGreenKind.EEEC, QuasiGreenKind.EBEB),
    "e": (QuasiGreenKind.BCBE, QuasiGreenKind.CEEC, QuasiGreenKind.EBCB),
}

# Partial spectra grouped by their t1/t3 evolution
PATH_GROUPS = {"part1": ("a", "b"), "part2": ("c", "d"), "part3": ("e",)}


def free_coeffs(t: ArrayLike, rates: DerivedRates) -> FreeCoefficients:
    """
    Closed-form amplitudes of the damped free evolution.

    The b level decays on its own; e and c are mixed by the control field
    at the dressed frequency omega_tilde_minus.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ModelError("free evolution time must be >= 0")
    envelope = np.exp(-0.5 * rates.gamma_ec_plus * t)
    theta = 0.5 * rates.omega_tilde_minus * t
    s = sin_over(rates.omega_tilde_minus, 0.5 * t)  # sin(theta)/omega_tilde_minus
    cos_theta = np.cos(theta)
    skew = 0.5 * rates.gamma_ec_minus * s
    mixing = envelope * 1j * rates.rabi_ec * s
    return FreeCoefficients(
        bb=np.exp(-0.5 * rates.gamma_b * t) + 0j,
        ee=envelope * (cos_theta - skew) + 0j,
        ce=mixing,
        ec=mixing.copy(),
        cc=envelope * (cos_theta + skew) + 0j,
    )


def nonhermitian_hamiltonian(model: ThreeLevelModel) -> np.ndarray:
    """Free-evolution Hamiltonian with decay terms, basis (b, e, c), rad/us."""
    h = np.zeros((3, 3), dtype=complex)
    h[1, 2] = h[2, 1] = -0.5 * model.rabi_ec
    h -= 0.5j * np.diag([
        model.gamma2 + model.gamma0_b,
        model.gamma1 + model.gamma0_e,
        model.gamma0_c,
    ])
    return h


def _kind_label(kind) -> str:
    if isinstance(kind, QuasiGreenKind):
        return kind.value
    try:
        return QuasiGreenKind(str(kind)).value
    except ValueError:
        raise ModelError(f"unknown quasi-Green kind {kind!r}") from None


def carries_carrier(label: str) -> bool:
    """Optical coherences (exactly one index on b) carry exp(-i omega_e t)."""
    return (label[0] == "b") != (label[1] == "b")


def quasi_green_time(kind, t: ArrayLike, rates: DerivedRates, omega_e: float) -> np.ndarray:
    """
    G_ijkl(t) = conj(C_jl(t)) * C_ik(t), with the optical carrier folded in.

    ``kind`` is a QuasiGreenKind or its label; kl is the initial element
    |k><l| and ij the final element |i><j|.
    """
    label = _kind_label(kind)
    i, j, k, l = label
    coeffs = free_coeffs(t, rates)
    value = np.conj(coeffs.get(j, l)) * coeffs.get(i, k)
    if carries_carrier(label):
        value = value * np.exp(-1j * omega_e * np.asarray(t, dtype=float))
    return value


def quasi_green_freq(kind, omega: ArrayLike, rates: DerivedRates, omega_e: float) -> np.ndarray:
    """
    Closed-form transforms of the t1 and t3 quasi-Green functions.

    The t1 kinds (bebe, bcbe) are conj of the e^{+i omega t} transform and the
    t3 kinds (ebeb, ebcb) are the e^{+i omega t} transform itself.
    """
    label = _kind_label(kind)
    u = np.asarray(omega, dtype=float) - omega_e
    base = rates.gamma_b + rates.gamma_ec_plus
    dressed2 = rates.rabi_ec ** 2 - 0.25 * rates.gamma_ec_minus ** 2
    if label in ("bebe", "bcbe"):
        x = base + 2j * u
    elif label in ("ebeb", "ebcb"):
        x = base - 2j * u
    else:
        raise ModelError(f"no frequency-domain form for {label}")
    denom = dressed2 + x ** 2
    if label in ("bebe", "ebeb"):
        return (2 * x - rates.gamma_ec_minus) / denom
    return 2j * rates.rabi_ec / denom


def _prefactors(rates: DerivedRates) -> dict[str, complex]:
    # Equal pulse areas and durations for a, b and c
    n_a = n_b = n_c = rates.n_p
    beta_a = beta_b = beta_c = rates.beta_p
    common = n_a ** 2 * n_b * n_c * np.conj(beta_a)
    return {
        "a": common * n_b * n_c * np.conj(beta_b) * beta_c,
        "b": common * n_b * n_c * beta_b * np.conj(beta_c),
        "c": common * n_b * beta_b * np.conj(beta_c),
        "d": common * n_c * beta_b * np.conj(beta_c),
        "e": common * beta_b * np.conj(beta_c),
    }


def rp_signal_nhh_terms(omega3, t2, omega1, model: ThreeLevelModel) -> dict[str, np.ndarray]:
    """The five rephasing terms keyed a..e, each with its pulse prefactor."""
    rates = derive_rates(model)
    omega_e = model.omega_eb
    prefactors = _prefactors(rates)
    terms = {}
    for label, (k1, k2, k3) in NHH_PATHS.items():
        terms[label] = (
            prefactors[label]
            * quasi_green_freq(k1, omega1, rates, omega_e)
            * quasi_green_time(k2, t2, rates, omega_e)
            * quasi_green_freq(k3, omega3, rates, omega_e)
        )
    return terms


def rp_signal_nhh(omega3, t2, omega1, model: ThreeLevelModel) -> np.ndarray:
    """Rephasing polarization from the quasi-Green functions."""
    return sum(rp_signal_nhh_terms(omega3, t2, omega1, model).values())


def emitted_field(polarization: np.ndarray) -> np.ndarray:
    """Field radiated by a polarization, i*P; absorptive peaks come out positive."""
    return 1j * np.asarray(polarization)


def group_terms(terms: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Sum path terms into the partial spectra part1, part2 and part3."""
    return {name: sum(terms[label] for label in labels) for name, labels in PATH_GROUPS.items()}
