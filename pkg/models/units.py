"""Unit labels, conversion factors and wavenumber helpers."""
import math

import numpy as np

TWO_PI = 2.0 * math.pi
# Speed of light in cm per picosecond
SPEED_OF_LIGHT_CM_PER_PS = 0.0299792458

FREQUENCY = "frequency"
TIME = "time"
WAVENUMBER = "wavenumber"

# Factor that converts one unit into the canonical unit of its dimension.
# Canonical units: rad/us for frequencies, us for times, cm^-1 for wavenumbers.
_UNITS: dict[str, tuple[str, float]] = {
    "rad_per_us": (FREQUENCY, 1.0),
    "kHz_over_2pi": (FREQUENCY, TWO_PI * 1e-3),
    "MHz_over_2pi": (FREQUENCY, TWO_PI),
    "GHz_over_2pi": (FREQUENCY, TWO_PI * 1e3),
    "THz_over_2pi": (FREQUENCY, TWO_PI * 1e6),
    "us": (TIME, 1.0),
    "ns": (TIME, 1e-3),
    "ps": (TIME, 1e-6),
    "fs": (TIME, 1e-9),
    "cm-1": (WAVENUMBER, 1.0),
}


def known_units() -> list[str]:
    return sorted(_UNITS)


def unit_dimension(unit: str) -> str:
    """Return the dimension of a unit label, raising KeyError if unknown."""
    return _UNITS[unit][0]


def convert(value: float, unit: str, target: str) -> float:
    """
    Convert a value between two units of the same dimension.

    Args:
        value: Number expressed in ``unit``
        unit: Source unit label
        target: Destination unit label

    Returns:
        The value expressed in ``target``.
    """
    dim_from, factor_from = _UNITS[unit]
    dim_to, factor_to = _UNITS[target]
    if dim_from != dim_to:
        raise ValueError(f"cannot convert {unit} ({dim_from}) to {target} ({dim_to})")
    if unit == target:
        return float(value)
    return float(value) * factor_from / factor_to


def wavenumber_to_angular(nu_tilde):
    """Wavenumber in cm^-1 to angular frequency in rad/ps."""
    scale = TWO_PI * SPEED_OF_LIGHT_CM_PER_PS
    if np.ndim(nu_tilde):
        return np.asarray(nu_tilde, dtype=float) * scale
    return float(nu_tilde) * scale


def angular_to_wavenumber(omega):
    """Angular frequency in rad/ps to wavenumber in cm^-1."""
    scale = TWO_PI * SPEED_OF_LIGHT_CM_PER_PS
    if np.ndim(omega):
        return np.asarray(omega, dtype=float) / scale
    return float(omega) / scale
