"""Physical parameter containers for the three-level and multi-level systems."""
import cmath
import math
from dataclasses import dataclass, field, asdict, fields
from typing import Optional

import numpy as np

from core.errors import ModelError
from models.units import TWO_PI

_THREE_LEVEL_RATES = ("gamma1", "gamma2", "gamma0_b", "gamma0_e", "gamma0_c")


@dataclass(frozen=True)
class ThreeLevelModel:
    """
    Ladder |b> - |e> - |c> driven by a resonant control field on e <-> c
    and probed on b <-> e.

    All frequencies and rates in rad/us, times in us.
    """
    omega_b: float = 0.0
    omega_e: float = TWO_PI * 4.33e6
    omega_c: float = TWO_PI * 4.32e6
    rabi_ec: float = TWO_PI * 2.0
    rabi_be: float = TWO_PI * 50.0
    gamma1: float = TWO_PI * 1e-3
    gamma2: float = TWO_PI * 0.03e-3
    gamma0_b: float = TWO_PI * 0.1
    gamma0_e: float = TWO_PI * 0.1
    gamma0_c: float = TWO_PI * 0.1
    dt_probe: float = 0.5e-3
    # Control frequency; None means resonant with e <-> c
    nu_c: Optional[float] = None

    def __post_init__(self):
        for name in _THREE_LEVEL_RATES + ("rabi_ec", "rabi_be", "dt_probe"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ModelError(f"{name} must be finite, got {value}", key=name)
            if value < 0:
                raise ModelError(f"{name} must be >= 0, got {value}", key=name)
        if not (self.omega_e > self.omega_c > self.omega_b):
            raise ModelError(
                "level ordering must satisfy omega_e > omega_c > omega_b",
                key="omega_c",
            )
        resonant = self.omega_e - self.omega_c
        if self.nu_c is None:
            object.__setattr__(self, "nu_c", resonant)
        elif not math.isclose(self.nu_c, resonant, rel_tol=1e-12, abs_tol=1e-9):
            raise ModelError(
                f"control field must be resonant: nu_c={self.nu_c} but "
                f"omega_e - omega_c = {resonant}",
                key="nu_c",
            )

    @property
    def omega_eb(self) -> float:
        return self.omega_e - self.omega_b

    def replace(self, **changes) -> "ThreeLevelModel":
        """Copy with some fields changed; nu_c follows the new resonance."""
        data = self.to_dict()
        data["nu_c"] = None
        data.update(changes)
        return ThreeLevelModel(**data)

    def scaled_damping(self, factor: float) -> "ThreeLevelModel":
        """Copy with every dissipation and dephasing rate multiplied by factor."""
        return self.replace(**{name: getattr(self, name) * factor for name in _THREE_LEVEL_RATES})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ThreeLevelModel":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class DerivedRates:
    """Closed-form rate combinations consumed by every three-level formula."""
    gamma_eb: float
    gamma_ec_plus: float
    gamma_bc: float
    gamma_b: float
    gamma_ec_minus: float
    omega_tilde_plus: complex
    omega_tilde_minus: complex
    a1: float
    a2: float
    beta_p: complex
    n_p: float
    rabi_ec: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("omega_tilde_plus", "omega_tilde_minus", "beta_p"):
            d[key] = [d[key].real, d[key].imag]
        return d


def _principal_sqrt(x: float) -> complex:
    return cmath.sqrt(complex(x, 0.0))


def derive_rates(model: ThreeLevelModel) -> DerivedRates:
    """Evaluate the dephasing rates, dressed frequencies and pulse constants."""
    for name in _THREE_LEVEL_RATES:
        if getattr(model, name) < 0:
            raise ModelError(f"{name} must be >= 0", key=name)

    g1, g2 = model.gamma1, model.gamma2
    gb0, ge0, gc0 = model.gamma0_b, model.gamma0_e, model.gamma0_c
    rabi = model.rabi_ec

    gamma_ec_plus = 0.5 * (g1 + ge0 + gc0)
    gamma_ec_minus = g1 + ge0 - gc0
    a2 = g1 + g2 - gamma_ec_plus
    beta = 0.5j * model.rabi_be * model.dt_probe

    return DerivedRates(
        gamma_eb=0.5 * (g1 + g2 + ge0 + gb0),
        gamma_ec_plus=gamma_ec_plus,
        gamma_bc=0.5 * (g2 + gb0 + gc0),
        gamma_b=g2 + gb0,
        gamma_ec_minus=gamma_ec_minus,
        omega_tilde_plus=_principal_sqrt(rabi ** 2 - 0.25 * gamma_ec_plus ** 2),
        omega_tilde_minus=_principal_sqrt(rabi ** 2 - 0.25 * gamma_ec_minus ** 2),
        a1=(g1 + g2) * a2 + rabi ** 2,
        a2=a2,
        beta_p=beta,
        n_p=1.0 / math.sqrt(1.0 + abs(beta) ** 2),
        rabi_ec=rabi,
    )


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MultiLevelModel:
    """
    General N-level system.

    energies and decay in rad/ps; dipole is a symmetric real matrix with a
    zero diagonal (zero off-diagonal entries are forbidden transitions).
    decay holds per-level population decay rates, so a level amplitude
    decays at decay/2.
    """
    energies: np.ndarray
    dipole: np.ndarray
    decay: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        energies = _frozen(self.energies)
        dipole = _frozen(self.dipole)
        decay = _frozen(self.decay)
        n = energies.shape[0]
        if energies.ndim != 1 or n < 2:
            raise ModelError("energies must be a 1-D array of at least two levels", key="energies")
        if dipole.shape != (n, n):
            raise ModelError(f"dipole must be {n}x{n}, got {dipole.shape}", key="dipole")
        if decay.shape != (n,):
            raise ModelError(f"decay must have {n} entries", key="decay")
        if np.any(np.diag(dipole) != 0):
            raise ModelError("dipole diagonal must be zero", key="dipole")
        if not np.allclose(dipole, dipole.T, rtol=0.0, atol=1e-12):
            raise ModelError("dipole matrix must be symmetric", key="dipole")
        if np.any(decay < 0):
            raise ModelError("decay rates must be >= 0", key="decay")
        labels = tuple(self.labels) or tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise ModelError("one label per level is required", key="labels")
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "dipole", dipole)
        object.__setattr__(self, "decay", decay)
        object.__setattr__(self, "labels", labels)

    @property
    def n_levels(self) -> int:
        return self.energies.shape[0]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "energies": self.energies.tolist(),
            "dipole": self.dipole.tolist(),
            "decay": self.decay.tolist(),
        }
