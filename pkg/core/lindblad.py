"""
Brute-force master-equation oracle.

Fixed-step RK4 over the Lindblad generator (and the jump-free non-Hermitian
equation). The generator is linear, so one RK4 step is itself a matrix; long
times are reached with matrix powers of that one-step propagator.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from core.errors import ConfigError, ConvergenceError, ModelError, StepSizeError
from core.nhh_engine import free_coeffs, nonhermitian_hamiltonian
from core.rf_engine import (
    POPULATION_ELEMENTS, perturbative_generator, perturbative_launch, perturbative_readout,
    population_generator,
)
from models.system import MultiLevelModel, ThreeLevelModel, derive_rates
from models.units import TWO_PI

logger = logging.getLogger(__name__)

HERMITIAN_ATOL = 1e-12
THREE_LEVELS = ("b", "e", "c")
STEPS_PER_SCALE = 200
STEADY_START = 1.0
STEADY_MAX_HORIZON = 2.0 ** 20
STEADY_RATE_TOL = 1e-10

Model = Union[ThreeLevelModel, MultiLevelModel]


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian N x N density matrix."""
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ModelError(f"density matrix must be square, got shape {data.shape}")
        if not np.allclose(data, data.conj().T, rtol=0.0, atol=HERMITIAN_ATOL):
            raise ModelError("density matrix must be Hermitian")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def pure(cls, vector) -> "DensityMatrix":
        psi = np.asarray(vector, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, n: int, index: int) -> "DensityMatrix":
        psi = np.zeros(n, dtype=complex)
        psi[index] = 1.0
        return cls.pure(psi)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data).min())


@dataclass(frozen=True)
class IntegratorConfig:
    # None picks min(2*pi/omega_max, 1/gamma_max)/200
    step: Optional[float] = None
    method: str = "rk4"
    tolerance: float = 1e-6
    check_step: bool = True

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ConfigError(f"integrator step must be > 0, got {self.step}", key="step")
        if self.method != "rk4":
            raise ConfigError(f"unknown integrator method {self.method!r}", key="method")
        if not self.tolerance > 0:
            raise ConfigError("integrator tolerance must be > 0", key="tolerance")


class MasterVariant(Enum):
    GENERATOR = "generator"  # jump operators through the generic Lindblad form
    NINE_ODE = "nine_ode"  # hand-written three-level element equations
    PERTURBATIVE = "perturbative"  # populations and coherences decoupled perturbatively


def lindblad_rhs(hamiltonian: np.ndarray, rho: np.ndarray, jumps: list) -> np.ndarray:
    comm = hamiltonian @ rho - rho @ hamiltonian
    drho = -1j * comm

    for gamma, c in jumps:
        cd = c.conj().T
        cdc = cd @ c
        drho += gamma * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))

    return drho


def nhh_rhs(hamiltonian: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return -1j * (hamiltonian @ rho - rho @ hamiltonian.conj().T)


def rk4_step(fun: Callable, y: np.ndarray, dt: float, *args) -> np.ndarray:
    """One classical Runge-Kutta step; y is not modified."""
    dt2 = dt / 2.0

    k1 = fun(y, *args)
    k2 = fun(y + k1 * dt2, *args)
    k3 = fun(y + k2 * dt2, *args)
    k4 = fun(y + k3 * dt, *args)

    return y + (k1 + 2 * k2 + 2 * k3 + k4) / 6.0 * dt


def _projector(n: int, i: int, j: int) -> np.ndarray:
    op = np.zeros((n, n), dtype=complex)
    op[i, j] = 1.0
    return op


def three_level_operators(model: ThreeLevelModel) -> tuple[np.ndarray, list]:
    """Rotating-frame Hamiltonian and (rate, jump operator) pairs, basis (b, e, c)."""
    b, e, c = range(3)
    h = np.zeros((3, 3), dtype=complex)
    h[e, c] = h[c, e] = -0.5 * model.rabi_ec
    jumps = [
        (model.gamma1, _projector(3, b, e)),
        (model.gamma2, _projector(3, e, b)),
        (model.gamma0_b, _projector(3, b, b)),
        (model.gamma0_e, _projector(3, e, e)),
        (model.gamma0_c, _projector(3, c, c)),
    ]
    return h, [(rate, op) for rate, op in jumps if rate > 0]


def multilevel_operators(model: MultiLevelModel) -> tuple[np.ndarray, list]:
    """Level energies on the diagonal; every excited level decays to level 0."""
    n = model.n_levels
    h = np.diag(model.energies).astype(complex)
    jumps = [(float(model.decay[k]), _projector(n, 0, k)) for k in range(1, n) if model.decay[k] > 0]
    return h, jumps


def _nonhermitian(model: Model) -> np.ndarray:
    if isinstance(model, ThreeLevelModel):
        return nonhermitian_hamiltonian(model)
    return np.diag(model.energies).astype(complex) - 0.5j * np.diag(model.decay)


def _superoperator(apply: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of a linear map on n x n matrices, acting on row-major vectors."""
    columns = []
    for k in range(n * n):
        unit = np.zeros(n * n, dtype=complex)
        unit[k] = 1.0
        columns.append(apply(unit.reshape(n, n)).ravel())
    return np.stack(columns, axis=1)


def _row_major(element: str) -> int:
    return THREE_LEVELS.index(element[0]) * 3 + THREE_LEVELS.index(element[1])


def _nine_ode_generator(model: ThreeLevelModel) -> np.ndarray:
    """Element equations re-expressed on the row-major (b, e, c) layout."""
    rates = derive_rates(model)
    nine = population_generator(rates, model.gamma1, model.gamma2)
    order = [_row_major(el) for el in POPULATION_ELEMENTS]
    full = np.zeros((9, 9), dtype=complex)
    full[np.ix_(order, order)] = nine
    return full


def master_generator(model: Model, variant: MasterVariant = MasterVariant.GENERATOR) -> np.ndarray:
    """
    Generator of the chosen variant. GENERATOR and NINE_ODE act on row-major
    density vectors; PERTURBATIVE acts on its own slots (see master_system).
    """
    if variant is not MasterVariant.GENERATOR and not isinstance(model, ThreeLevelModel):
        raise ModelError(f"the {variant.value} form exists only for the three-level model")
    if variant is MasterVariant.NINE_ODE:
        return _nine_ode_generator(model)
    if variant is MasterVariant.PERTURBATIVE:
        return perturbative_generator(derive_rates(model), model.gamma1, model.gamma2)
    if isinstance(model, ThreeLevelModel):
        h, jumps = three_level_operators(model)
    else:
        h, jumps = multilevel_operators(model)
    return _superoperator(lambda rho: lindblad_rhs(h, rho, jumps), h.shape[0])


@dataclass(frozen=True)
class MasterSystem:
    """Linear state equation with its maps from and back to row-major density vectors."""
    generator: np.ndarray
    embed: np.ndarray
    readout: np.ndarray

    @property
    def n(self) -> int:
        return int(round(math.sqrt(self.readout.shape[0])))

    @classmethod
    def direct(cls, generator: np.ndarray) -> "MasterSystem":
        identity = np.eye(generator.shape[0], dtype=complex)
        return cls(generator, identity, identity)


def master_system(model: Model, variant: MasterVariant = MasterVariant.GENERATOR) -> MasterSystem:
    generator = master_generator(model, variant)
    if variant is not MasterVariant.PERTURBATIVE:
        return MasterSystem.direct(generator)
    embed = np.zeros((generator.shape[0], 9), dtype=complex)
    readout = np.zeros((9, generator.shape[0]), dtype=complex)
    for element in POPULATION_ELEMENTS:
        embed[perturbative_launch(element), _row_major(element)] = 1.0
        readout[_row_major(element), perturbative_readout(element)] = 1.0
    return MasterSystem(generator, embed, readout)


def nhh_generator(model: Model) -> np.ndarray:
    h = _nonhermitian(model)
    return _superoperator(lambda rho: nhh_rhs(h, rho), h.shape[0])


def auto_step(model: Model) -> float:
    if isinstance(model, ThreeLevelModel):
        omega_max = model.rabi_ec
        gamma_max = max(model.gamma1, model.gamma2, model.gamma0_b, model.gamma0_e, model.gamma0_c)
    else:
        omega_max = float(np.max(np.abs(model.energies)))
        gamma_max = float(np.max(model.decay))
    scales = []
    if omega_max > 0:
        scales.append(TWO_PI / omega_max)
    if gamma_max > 0:
        scales.append(1.0 / gamma_max)
    if not scales:
        return 1e-2
    return min(scales) / STEPS_PER_SCALE


def step_propagator(generator: np.ndarray, dt: float) -> np.ndarray:
    """The RK4 step of d/dt x = L x applied to every basis vector at once."""
    identity = np.eye(generator.shape[0], dtype=complex)
    return rk4_step(lambda y: generator @ y, identity, dt)


def _propagate(generator: np.ndarray, vector: np.ndarray, t: float, step: float) -> np.ndarray:
    if t == 0:
        return vector.copy()
    n_steps = max(1, math.ceil(t / step - 1e-9))
    propagator = np.linalg.matrix_power(step_propagator(generator, t / n_steps), n_steps)
    return propagator @ vector


def _checked_propagate(generator, vector, t: float, config: IntegratorConfig, step: float) -> np.ndarray:
    coarse = _propagate(generator, vector, t, step)
    if not config.check_step or t == 0:
        return coarse
    fine = _propagate(generator, vector, t, step / 2)
    # RK4 halving shrinks the global error by 16
    estimate = float(np.max(np.abs(fine - coarse))) / 15.0
    logger.debug("step %.3g over t=%.4g: error estimate %.3g", step, t, estimate)
    if estimate > config.tolerance:
        raise StepSizeError(
            f"step {step:.3g} too large: step-halving error {estimate:.3g} > {config.tolerance:.3g}"
        )
    return fine


def _as_density(rho, n: int) -> DensityMatrix:
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    if rho.n != n:
        raise ModelError(f"state has dimension {rho.n}, model has {n} levels")
    return rho


def _symmetrized(vector: np.ndarray, n: int) -> DensityMatrix:
    rho = vector.reshape(n, n)
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ModelError(f"integration time must be finite and >= 0, got {t}")
    return t


def integrate_master(
    model: Model,
    rho0,
    t: float,
    config: IntegratorConfig = IntegratorConfig(),
    variant: MasterVariant = MasterVariant.GENERATOR,
) -> DensityMatrix:
    """
    Evolve rho0 under the full Lindblad equation for a time t.

    Raises:
        StepSizeError: step-halving disagreement above config.tolerance
    """
    t = _check_time(t)
    system = master_system(model, variant)
    rho = _as_density(rho0, system.n)
    step = config.step or auto_step(model)
    out = _checked_propagate(system.generator, system.embed @ rho.data.ravel(), t, config, step)
    return _symmetrized(system.readout @ out, system.n)


def element_response(
    model: ThreeLevelModel,
    initial: str,
    t: float,
    config: IntegratorConfig = IntegratorConfig(),
    variant: MasterVariant = MasterVariant.GENERATOR,
) -> np.ndarray:
    """
    Complex 3x3 matrix grown from the single element |k><l| after a time t.

    ``initial`` is the label "kl" over b, e, c. Coherences are allowed, so
    the result is not symmetrized.
    """
    t = _check_time(t)
    if not isinstance(model, ThreeLevelModel):
        raise ModelError("element responses exist only for the three-level model")
    if len(initial) != 2 or any(ch not in THREE_LEVELS for ch in initial):
        raise ModelError(f"unknown density-matrix element {initial!r}")
    system = master_system(model, variant)
    start = np.zeros(9, dtype=complex)
    start[_row_major(initial)] = 1.0
    step = config.step or auto_step(model)
    out = _checked_propagate(system.generator, system.embed @ start, t, config, step)
    return (system.readout @ out).reshape(3, 3)


def integrate_nhh(model: Model, state, t: float, config: IntegratorConfig = IntegratorConfig()):
    """
    Jump-free evolution. A 1-D state vector is propagated as a wavefunction
    and returned as one; a density matrix is propagated as a density matrix.
    """
    t = _check_time(t)
    h = _nonhermitian(model)
    step = config.step or auto_step(model)
    if not isinstance(state, DensityMatrix) and np.ndim(state) == 1:
        psi = np.asarray(state, dtype=complex)
        if psi.shape[0] != h.shape[0]:
            raise ModelError(f"state has dimension {psi.shape[0]}, model has {h.shape[0]} levels")
        return _checked_propagate(-1j * h, psi, t, config, step)
    rho = _as_density(state, h.shape[0])
    out = _checked_propagate(nhh_generator(model), rho.data.ravel(), t, config, step)
    return _symmetrized(out, h.shape[0])


def trajectory(
    model: Model,
    rho0,
    times,
    config: IntegratorConfig = IntegratorConfig(),
    method: str = "lindblad",
    variant: MasterVariant = MasterVariant.GENERATOR,
) -> np.ndarray:
    """
    Density matrices at each of the increasing sample times, shape (len(times), n, n).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ModelError("sample times must be a non-negative increasing 1-D sequence")
    if method == "lindblad":
        system = master_system(model, variant)
    elif method == "nhh":
        system = MasterSystem.direct(nhh_generator(model))
    else:
        raise ModelError(f"unknown method {method!r}")
    n = system.n
    vector = system.embed @ _as_density(rho0, n).data.ravel()
    step = config.step or auto_step(model)

    out = np.empty((times.shape[0], n, n), dtype=complex)
    previous = 0.0
    cache: dict = {}
    for i, t in enumerate(times):
        interval = t - previous
        if interval > 0:
            n_steps = max(1, math.ceil(interval / step - 1e-9))
            key = (n_steps, round(interval, 12))
            if key not in cache:
                cache[key] = np.linalg.matrix_power(step_propagator(system.generator, interval / n_steps), n_steps)
            vector = cache[key] @ vector
        rho = (system.readout @ vector).reshape(n, n)
        out[i] = 0.5 * (rho + rho.conj().T)
        previous = t
    return out


def _is_damped(model: Model) -> bool:
    if isinstance(model, ThreeLevelModel):
        return any(r > 0 for r in (model.gamma1, model.gamma2, model.gamma0_b, model.gamma0_e, model.gamma0_c))
    return bool(np.any(model.decay > 0))


def _nhh_populations(model: Model, rho: DensityMatrix, t: float) -> np.ndarray:
    if isinstance(model, ThreeLevelModel):
        coeffs = free_coeffs(t, derive_rates(model))
        u = np.zeros((3, 3), dtype=complex)
        for i, final in enumerate(THREE_LEVELS):
            for j, initial in enumerate(THREE_LEVELS):
                u[i, j] = coeffs.get(final, initial)
    else:
        u = np.diag(np.exp(-1j * _nonhermitian(model).diagonal() * t))
    return np.real(np.diag(u @ rho.data @ u.conj().T))


def steady_state(
    model: Model,
    method: str = "lindblad",
    initial=None,
    config: IntegratorConfig = IntegratorConfig(),
    variant: Optional[MasterVariant] = None,
) -> np.ndarray:
    """
    Long-time populations, found by doubling the horizon from 1 time unit
    until the populations change by less than 1e-10 per unit time.

    Args:
        method: "lindblad" or "nhh"
        initial: DensityMatrix or array; defaults to the ground level
        variant: master-equation variant for "lindblad"; defaults to
            PERTURBATIVE for the three-level model and GENERATOR otherwise

    Raises:
        ConvergenceError: no convergence within 2**20 time units
    """
    if not _is_damped(model):
        raise ModelError("steady state needs at least one nonzero damping rate")
    n = 3 if isinstance(model, ThreeLevelModel) else model.n_levels
    rho = _as_density(initial, n) if initial is not None else DensityMatrix.basis(n, 0)

    horizon = STEADY_START
    if method == "lindblad":
        if variant is None:
            three_level = isinstance(model, ThreeLevelModel)
            variant = MasterVariant.PERTURBATIVE if three_level else MasterVariant.GENERATOR
        system = master_system(model, variant)
        step = config.step or auto_step(model)
        n_steps = max(1, math.ceil(horizon / step))
        propagator = np.linalg.matrix_power(step_propagator(system.generator, horizon / n_steps), n_steps)
        vector = system.embed @ rho.data.ravel()

        def advance(t):
            nonlocal propagator
            if t > STEADY_START:
                propagator = propagator @ propagator
            return np.real(np.diag((system.readout @ propagator @ vector).reshape(n, n)))
    elif method == "nhh":
        def advance(t):
            return _nhh_populations(model, rho, t)
    else:
        raise ModelError(f"unknown method {method!r}")

    current = advance(horizon)
    while horizon < STEADY_MAX_HORIZON:
        nxt = advance(2 * horizon)
        change = float(np.max(np.abs(nxt - current))) / horizon
        horizon *= 2
        current = nxt
        if change < STEADY_RATE_TOL:
            logger.debug("%s steady state reached at horizon %g", method, horizon)
            return current
    raise ConvergenceError(
        f"{method} populations still changing after {STEADY_MAX_HORIZON:g} time units"
    )
