"""Response-function formalism: Green functions and rephasing signal assembly."""
import logging
from enum import Enum
from typing import Union

import numpy as np
from scipy.linalg import expm

from core.errors import SingularityError, ModelError
from models.system import ThreeLevelModel, DerivedRates, derive_rates

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this |Omega * t| the ratio sin(Omega t)/Omega is taken from its series
SERIES_THRESHOLD = 1e-4

# Density-matrix elements of the nine coupled equations, in this order
POPULATION_ELEMENTS = ("bb", "ee", "cc", "eb", "be", "ec", "ce", "cb", "bc")


class GreenKind(Enum):
    BEBE_W = "bebe_w"
    EBEB_W = "ebeb_w"
    BCBE_W = "bcbe_w"
    EBCB_W = "ebcb_w"
    EEEE_T = "eeee_t"
    BBEE_T = "bbee_t"
    EEBB_T = "eebb_t"
    BBBB_T = "bbbb_t"
    CEEE_T = "ceee_t"
    EEEC_T = "eeec_t"
    CEEC_T = "ceec_t"

    @property
    def is_frequency(self) -> bool:
        return self.value.endswith("_w")

    @property
    def elements(self) -> tuple[str, str]:
        """(final element, initial element) labels, e.g. ('ce', 'ee')."""
        tag = self.value[:4]
        return tag[:2], tag[2:]


class GreenForm(Enum):
    # Closed forms exactly as derived with off-diagonals treated perturbatively
    ANALYTIC = "analytic"
    # Matrix exponential of the nine coupled population/coherence equations
    EXACT = "exact"
    # Matrix exponential of the perturbatively decoupled equations
    PERTURBATIVE = "perturbative"


# Four-path and five-path term layouts: label -> (t3 kind, t2 kind, t1 kind)
RF_TERMS: dict[str, tuple[GreenKind, GreenKind, GreenKind]] = {
    "eeee": (GreenKind.EBEB_W, GreenKind.EEEE_T, GreenKind.BEBE_W),
    "bbee": (GreenKind.EBEB_W, GreenKind.BBEE_T, GreenKind.BEBE_W),
    "eebb": (GreenKind.EBEB_W, GreenKind.EEBB_T, GreenKind.BEBE_W),
    "bbbb": (GreenKind.EBEB_W, GreenKind.BBBB_T, GreenKind.BEBE_W),
}

RF_NHH_PATH_TERMS: dict[str, tuple[GreenKind, GreenKind, GreenKind]] = {
    "a": (GreenKind.EBEB_W, GreenKind.BBBB_T, GreenKind.BEBE_W),
    "b": (GreenKind.EBEB_W, GreenKind.EEEE_T, GreenKind.BEBE_W),
    "c": (GreenKind.EBCB_W, GreenKind.CEEE_T, GreenKind.BEBE_W),
    "d": (GreenKind.EBEB_W, GreenKind.EEEC_T, GreenKind.BCBE_W),
    "e": (GreenKind.EBCB_W, GreenKind.CEEC_T, GreenKind.BCBE_W),
}


def sin_over(omega: complex, t: ArrayLike) -> np.ndarray:
    """sin(omega*t)/omega, switching to its series where |omega*t| is tiny."""
    t = np.asarray(t, dtype=float)
    x = omega * t
    small = np.abs(x) < SERIES_THRESHOLD
    safe = omega if omega != 0 else 1.0
    exact = np.sin(x) / safe
    series = t * (1.0 - x ** 2 / 6.0 + x ** 4 / 120.0)
    return np.where(small, series, exact)


def _checked_divide(numerator, denominator, kind) -> np.ndarray:
    denominator = np.asarray(denominator)
    if np.any(denominator == 0):
        raise SingularityError(f"{kind} denominator vanishes")
    return numerator / denominator


def green_freq(
    kind: GreenKind,
    omega: ArrayLike,
    rates: DerivedRates,
    omega_eb: float,
) -> np.ndarray:
    """
    Frequency-domain Green function for the t1/t3 coherences.

    Args:
        kind: one of BEBE_W, EBEB_W, BCBE_W, EBCB_W
        omega: absolute angular frequency (rad/us), scalar or array
        rates: derived rates of the model
        omega_eb: e <-> b transition frequency; the control keeps c resonant so
            omega_cb equals omega_eb in the rotating frame

    Returns:
        Complex value(s) with the shape of ``omega``.

    The t1 kinds are i * conj of the e^{+i omega t} transform and the t3 kinds
    are -i times the transform, so every kind is a fixed phase away from its
    quasi-Green counterpart. The purely imaginary bcbe response changes sign
    under the conjugation.
    """
    u = np.asarray(omega, dtype=float) - omega_eb
    rabi = rates.rabi_ec
    g_eb, g_bc = rates.gamma_eb, rates.gamma_bc

    if kind is GreenKind.BEBE_W:
        x = u - 1j * g_bc
        return _checked_divide(4 * x, 4 * x * (u - 1j * g_eb) - rabi ** 2, kind)
    if kind is GreenKind.EBEB_W:
        x = u + 1j * g_bc
        return _checked_divide(4 * x, 4 * x * (u + 1j * g_eb) - rabi ** 2, kind)
    if kind is GreenKind.BCBE_W:
        denom = 4 * (u - 1j * g_bc) * (-u + 1j * g_eb) + rabi ** 2
        return _checked_divide(-2 * rabi + 0j * u, denom, kind)
    if kind is GreenKind.EBCB_W:
        denom = 4 * (u + 1j * g_bc) * (-u - 1j * g_eb) + rabi ** 2
        return _checked_divide(2 * rabi + 0j * u, denom, kind)
    raise ModelError(f"{kind} is not a frequency-domain Green function")


def population_generator(rates: DerivedRates, gamma1: float, gamma2: float) -> np.ndarray:
    """
    9x9 generator L of the coupled equations d/dt x = L x in the
    rotating frame, with x ordered as POPULATION_ELEMENTS.
    """
    bb, ee, cc, _, _, ec, ce, _, _ = range(9)
    half = 0.5j * rates.rabi_ec
    L = np.zeros((9, 9), dtype=complex)

    L[bb, ee] += gamma1
    L[bb, bb] -= gamma2

    L[ee, ce] += half
    L[ee, ec] -= half
    L[ee, ee] -= gamma1
    L[ee, bb] += gamma2

    L[cc, ce] -= half
    L[cc, ec] += half

    L[ec, cc] += half
    L[ec, ee] -= half
    L[ec, ec] -= rates.gamma_ec_plus
    L[ce, cc] -= half
    L[ce, ee] += half
    L[ce, ce] -= rates.gamma_ec_plus

    _optical_rows(L, dict(zip(POPULATION_ELEMENTS, range(9))), rates)
    return L


def _optical_rows(L: np.ndarray, index: dict[str, int], rates: DerivedRates) -> None:
    """The b-e and b-c coherences, which close among themselves."""
    eb, be, cb, bc = (index[name] for name in ("eb", "be", "cb", "bc"))
    half = 0.5j * rates.rabi_ec

    L[eb, cb] += half
    L[eb, eb] -= rates.gamma_eb
    L[be, bc] -= half
    L[be, be] -= rates.gamma_eb

    L[cb, eb] += half
    L[cb, cb] -= rates.gamma_bc
    L[bc, be] -= half
    L[bc, bc] -= rates.gamma_bc


# Slots of the perturbatively decoupled equations, "element|channel".
# Channel b: population launched on b, untouched by the control field.
# Channel e: population launched on e or c; b and e together face c as one
# Rabi manifold and exchange population inside it.
# Channel x: e-c coherences, Rabi-cycling without b-e exchange.
PERTURBATIVE_SLOTS = (
    "bb|b", "ee|b",
    "bb|e", "ee|e", "cc|e", "ec|e", "ce|e",
    "ee|x", "cc|x", "ec|x", "ce|x",
    "eb", "be", "cb", "bc",
)

_LAUNCH = {"bb": "bb|b", "ee": "ee|e", "cc": "cc|e", "ec": "ec|x", "ce": "ce|x"}


def perturbative_launch(element: str) -> int:
    """Slot that an initial density-matrix element starts in."""
    if element not in POPULATION_ELEMENTS:
        raise ModelError(f"unknown density-matrix element {element!r}")
    return PERTURBATIVE_SLOTS.index(_LAUNCH.get(element, element))


def perturbative_readout(element: str) -> list[int]:
    """Slots whose sum is the density-matrix element."""
    if element not in POPULATION_ELEMENTS:
        raise ModelError(f"unknown density-matrix element {element!r}")
    return [k for k, slot in enumerate(PERTURBATIVE_SLOTS) if slot.split("|")[0] == element]


def perturbative_generator(rates: DerivedRates, gamma1: float, gamma2: float) -> np.ndarray:
    """
    Generator of the coupled equations with populations and coherences
    decoupled perturbatively, over PERTURBATIVE_SLOTS.

    Its solutions are the ANALYTIC closed forms; population launched on b
    relaxes to gamma1 / (gamma1 + gamma2).
    """
    index = {slot: k for k, slot in enumerate(PERTURBATIVE_SLOTS)}
    half = 0.5j * rates.rabi_ec
    gp = rates.gamma_ec_plus
    L = np.zeros((len(PERTURBATIVE_SLOTS),) * 2, dtype=complex)

    for channel in ("b", "e"):
        bb, ee = index["bb|" + channel], index["ee|" + channel]
        L[bb, ee] += gamma1
        L[bb, bb] -= gamma2
        L[ee, ee] -= gamma1
        L[ee, bb] += gamma2

    for channel, manifold in (("e", ("bb|e", "ee|e")), ("x", ("ee|x",))):
        ee, cc, ec, ce = (index[f"{name}|{channel}"] for name in ("ee", "cc", "ec", "ce"))
        L[ee, ce] += half
        L[ee, ec] -= half
        L[cc, ce] -= half
        L[cc, ec] += half

        L[ec, cc] += half
        L[ce, cc] -= half
        for slot in manifold:
            L[ec, index[slot]] -= half
            L[ce, index[slot]] += half
        L[ec, ec] -= gp
        L[ce, ce] -= gp

    _optical_rows(L, index, rates)
    return L


def _exact_green_time(kind: GreenKind, t2: np.ndarray, rates, gamma1, gamma2, form) -> np.ndarray:
    final, initial = kind.elements
    if form is GreenForm.PERTURBATIVE:
        rows = perturbative_readout(final)
        col = perturbative_launch(initial)
        generator = perturbative_generator(rates, gamma1, gamma2)
    else:
        rows = [POPULATION_ELEMENTS.index(final)]
        col = POPULATION_ELEMENTS.index(initial)
        generator = population_generator(rates, gamma1, gamma2)
    flat = t2.ravel()
    logger.debug("%s %s over %d sample times", form.value, kind.value, flat.size)
    out = np.empty(flat.shape, dtype=complex)
    for i, t in enumerate(flat):
        out[i] = expm(generator * t)[rows, col].sum()
    return out.reshape(t2.shape)


def _analytic_green_time(kind: GreenKind, t: np.ndarray, rates: DerivedRates, g1, g2) -> np.ndarray:
    rabi2 = rates.rabi_ec ** 2
    gp = rates.gamma_ec_plus
    wt = rates.omega_tilde_plus
    envelope = np.exp(-0.5 * gp * t)
    s = sin_over(wt, t)  # sin(wt t)/wt
    c = np.cos(wt * t)

    if kind in (GreenKind.CEEE_T, GreenKind.EEEC_T):
        value = 0.5j * rates.rabi_ec * s * envelope
        return value if kind is GreenKind.CEEE_T else -value
    if kind is GreenKind.CEEC_T:
        return (0.25 * gp * s - 0.5 * c) * envelope + 0.5 * np.exp(-gp * t) + 0j

    total = g1 + g2
    if total == 0:
        raise SingularityError("analytic population forms need gamma1 + gamma2 > 0")
    relax = np.exp(-total * t)
    if kind is GreenKind.EEBB_T:
        return (g2 - g2 * relax) / total + 0j
    if kind is GreenKind.BBBB_T:
        return (g1 + g2 * relax) / total + 0j

    a1, a2 = rates.a1, rates.a2
    if a1 == 0:
        raise SingularityError("A1 vanishes")
    transfer = g1 * (2 * a1 - rabi2) / (2 * a1 * total) * relax
    if kind is GreenKind.EEEE_T:
        osc = (a2 * g2 * gp + rabi2 * (gp - 2 * g1)) / (4 * a1) * s
        osc = osc + (a2 * g2 + rabi2) / (2 * a1) * c
        return envelope * osc + g2 / (2 * total) + transfer
    if kind is GreenKind.BBEE_T:
        osc = (a2 * gp + 2 * rabi2) / (4 * a1) * s + a2 / (2 * a1) * c
        return envelope * g1 * osc + g1 / (2 * total) - transfer
    raise ModelError(f"{kind} is not a time-domain Green function")


def green_time(
    kind: GreenKind,
    t2: ArrayLike,
    rates: DerivedRates,
    gammas: tuple[float, float],
    form: GreenForm = GreenForm.ANALYTIC,
) -> np.ndarray:
    """
    Time-domain Green function for the population time.

    Args:
        kind: one of the *_T kinds
        t2: population time(s) in us, >= 0
        rates: derived rates of the model
        gammas: (gamma1, gamma2) dissipation rates
        form: closed form, or the matrix exponential of the full or the
            perturbatively decoupled equations

    Returns:
        Complex value(s) with the shape of ``t2``.
    """
    if kind.is_frequency:
        raise ModelError(f"{kind} is not a time-domain Green function")
    t = np.asarray(t2, dtype=float)
    if np.any(t < 0):
        raise ModelError("t2 must be >= 0", key="t2")
    g1, g2 = gammas
    if form is not GreenForm.ANALYTIC:
        return _exact_green_time(kind, t, rates, g1, g2, form)
    return np.asarray(_analytic_green_time(kind, t, rates, g1, g2), dtype=complex)


def rf_populations(
    t: ArrayLike,
    rates: DerivedRates,
    gammas: tuple[float, float],
    initial: str,
) -> np.ndarray:
    """
    Exact (rho_bb, rho_ee, rho_cc) from |initial><initial|.

    Returns:
        Real array of shape t.shape + (3,).
    """
    if initial not in ("b", "e", "c"):
        raise ModelError(f"initial level must be b, e or c, got {initial!r}")
    generator = population_generator(rates, *gammas)
    start = np.zeros(9, dtype=complex)
    start[POPULATION_ELEMENTS.index(initial * 2)] = 1.0
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (3,))
    for idx, value in np.ndenumerate(t):
        out[idx] = (expm(generator * value) @ start)[:3].real
    return out


def _assemble(
    layout: dict,
    omega3: ArrayLike,
    t2: float,
    omega1: ArrayLike,
    model: ThreeLevelModel,
    form: GreenForm,
) -> dict[str, np.ndarray]:
    rates = derive_rates(model)
    gammas = (model.gamma1, model.gamma2)
    cache: dict[GreenKind, np.ndarray] = {}

    def value(kind, argument):
        if kind not in cache:
            if kind.is_frequency:
                cache[kind] = green_freq(kind, argument, rates, model.omega_eb)
            else:
                cache[kind] = green_time(kind, argument, rates, gammas, form)
        return cache[kind]

    terms = {}
    for label, (k3, k2, k1) in layout.items():
        terms[label] = value(k3, omega3) * value(k2, t2) * value(k1, omega1)
    return terms


def rp_signal_rf_terms(omega3, t2, omega1, model, form=GreenForm.ANALYTIC) -> dict[str, np.ndarray]:
    """The four population-time paths, keyed by their t2 Green function."""
    return _assemble(RF_TERMS, omega3, t2, omega1, model, form)


def rp_signal_rf(omega3, t2, omega1, model, form=GreenForm.ANALYTIC) -> np.ndarray:
    """Rephasing signal of the response-function formalism."""
    return sum(rp_signal_rf_terms(omega3, t2, omega1, model, form).values())


def rp_signal_rf_nhh_paths_terms(omega3, t2, omega1, model, form=GreenForm.ANALYTIC) -> dict[str, np.ndarray]:
    """Five terms following the non-Hermitian Liouville paths, keyed a..e."""
    return _assemble(RF_NHH_PATH_TERMS, omega3, t2, omega1, model, form)


def rp_signal_rf_nhh_paths(omega3, t2, omega1, model, form=GreenForm.ANALYTIC) -> np.ndarray:
    return sum(rp_signal_rf_nhh_paths_terms(omega3, t2, omega1, model, form).values())
