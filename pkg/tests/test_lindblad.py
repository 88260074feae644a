import math

import numpy as np
import pytest
from scipy.linalg import expm

from core.errors import ConfigError, ConvergenceError, ModelError, StepSizeError
from core.lindblad import (
    DensityMatrix, IntegratorConfig, MasterVariant, auto_step, element_response, integrate_master, integrate_nhh,
    lindblad_rhs, master_generator, rk4_step, steady_state, three_level_operators, trajectory,
)
from core.nhh_engine import free_coeffs, quasi_green_time
from core.rf_engine import GreenForm, GreenKind, green_time
from models.system import MultiLevelModel, ThreeLevelModel, derive_rates

FINE = IntegratorConfig(step=5e-4)
B, E, C = range(3)
THREE_LEVELS = "bec"


class TestDensityMatrix:
    def test_pure_and_basis(self):
        rho = DensityMatrix.basis(3, 1)
        assert rho.trace() == pytest.approx(1.0)
        np.testing.assert_allclose(rho.populations(), [0, 1, 0])
        assert rho.min_eigenvalue() == pytest.approx(0.0, abs=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ModelError):
            DensityMatrix(np.array([[1, 1], [0, 0]]))
        with pytest.raises(ModelError):
            DensityMatrix(np.ones(3))

    def test_read_only(self):
        rho = DensityMatrix.basis(2, 0)
        with pytest.raises(ValueError):
            rho.data[0, 0] = 2


class TestIntegratorConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            IntegratorConfig(step=0.0)
        with pytest.raises(ConfigError):
            IntegratorConfig(method="euler")
        with pytest.raises(ConfigError):
            IntegratorConfig(tolerance=-1.0)

    def test_auto_step(self, model):
        expected = min(2 * math.pi / model.rabi_ec, 1 / model.gamma0_b) / 200
        assert auto_step(model) == pytest.approx(expected)


class TestBuildingBlocks:
    def test_rk4_step_does_not_mutate(self):
        y = np.array([1.0 + 0j, 0.0])
        out = rk4_step(lambda v: -v, y, 0.1)
        assert y[0] == 1.0
        assert out[0] == pytest.approx(math.exp(-0.1), rel=1e-6)

    def test_generator_matches_rhs(self, model):
        h, jumps = three_level_operators(model)
        rng = np.random.default_rng(3)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = a @ a.conj().T
        L = master_generator(model)
        np.testing.assert_allclose(L @ rho.ravel(), lindblad_rhs(h, rho, jumps).ravel(), atol=1e-12)

    def test_zero_rates_drop_out(self, undamped):
        _, jumps = three_level_operators(undamped)
        assert jumps == []

    def test_two_codings_agree(self, model):
        full = master_generator(model, MasterVariant.GENERATOR)
        nine = master_generator(model, MasterVariant.NINE_ODE)
        np.testing.assert_allclose(full, nine, atol=1e-12)

    def test_nine_ode_only_for_three_levels(self):
        multi = MultiLevelModel([0.0, 1.0], [[0, 1], [1, 0]], [0.0, 0.1])
        with pytest.raises(ModelError):
            master_generator(multi, MasterVariant.NINE_ODE)


class TestIntegration:
    def test_matches_exact_green_function(self, model, rates):
        for t in (0.1, 0.24, 0.5, 1.0):
            rho = integrate_master(model, DensityMatrix.basis(3, E), t, FINE)
            exact = green_time(GreenKind.EEEE_T, t, rates, (model.gamma1, model.gamma2), GreenForm.EXACT)
            assert rho.data[E, E].real == pytest.approx(exact.real, abs=1e-6)

    def test_variants_agree(self, model):
        start = DensityMatrix.basis(3, E)
        full = integrate_master(model, start, 0.7, FINE, MasterVariant.GENERATOR)
        nine = integrate_master(model, start, 0.7, FINE, MasterVariant.NINE_ODE)
        np.testing.assert_allclose(full.data, nine.data, atol=1e-10)

    def test_fourth_order_convergence(self, model):
        rho0 = DensityMatrix.basis(3, E)
        reference = expm(master_generator(model) * 1.0) @ rho0.data.ravel()
        errors = []
        for h in (0.05, 0.025, 0.0125):
            rho = integrate_master(model, rho0, 1.0, IntegratorConfig(step=h, check_step=False))
            errors.append(np.max(np.abs(rho.data.ravel() - reference)))
        slope = math.log(errors[0] / errors[2]) / math.log(4.0)
        assert slope >= 3.5

    def test_perturbative_matches_closed_forms(self, model, rates):
        gammas = (model.gamma1, model.gamma2)
        for t in (0.1, 0.24, 0.5, 1.0):
            for kind in (k for k in GreenKind if not k.is_frequency):
                final, initial = kind.elements
                response = element_response(model, initial, t, FINE, MasterVariant.PERTURBATIVE)
                expected = complex(green_time(kind, t, rates, gammas, GreenForm.ANALYTIC))
                row, col = (THREE_LEVELS.index(ch) for ch in final)
                assert response[row, col] == pytest.approx(expected, abs=1e-6)

    def test_perturbative_density_populations(self, model, rates):
        rho = integrate_master(model, DensityMatrix.basis(3, E), 0.5, FINE, MasterVariant.PERTURBATIVE)
        gammas = (model.gamma1, model.gamma2)
        assert rho.data[E, E].real == pytest.approx(
            green_time(GreenKind.EEEE_T, 0.5, rates, gammas).real, abs=1e-6)
        assert rho.data[B, B].real == pytest.approx(
            green_time(GreenKind.BBEE_T, 0.5, rates, gammas).real, abs=1e-6)

    def test_perturbative_needs_three_levels(self):
        multi = MultiLevelModel([0.0, 1.0, 2.0], np.zeros((3, 3)), [0.0, 0.5, 0.8])
        with pytest.raises(ModelError):
            master_generator(multi, MasterVariant.PERTURBATIVE)

    def test_element_response_validation(self, model):
        with pytest.raises(ModelError):
            element_response(model, "bx", 0.1)
        with pytest.raises(ModelError):
            element_response(model, "eee", 0.1)
        start = element_response(model, "ec", 0.0)
        assert start[E, C] == 1.0
        assert np.count_nonzero(start) == 1

    @pytest.mark.parametrize("level", [B, E])
    @pytest.mark.parametrize("variant", [MasterVariant.GENERATOR, MasterVariant.PERTURBATIVE])
    def test_long_run_keeps_trace(self, model, level, variant):
        rhos = trajectory(model, DensityMatrix.basis(3, level), np.linspace(0, 10, 101),
                          IntegratorConfig(step=5e-3), variant=variant)
        traces = np.trace(rhos, axis1=1, axis2=2).real
        np.testing.assert_allclose(traces, 1.0, atol=1e-8)

    def test_step_too_large(self, model):
        with pytest.raises(StepSizeError):
            integrate_master(model, DensityMatrix.basis(3, E), 1.0, IntegratorConfig(step=0.1, tolerance=1e-12))

    def test_trace_and_positivity(self, model):
        rhos = trajectory(model, DensityMatrix.basis(3, E), np.linspace(0, 2, 41), IntegratorConfig(step=5e-3))
        for rho in rhos:
            assert np.trace(rho).real == pytest.approx(1.0, abs=1e-8)
            assert np.linalg.eigvalsh(rho).min() >= -1e-8

    def test_linearity(self, model):
        rho1, rho2 = DensityMatrix.basis(3, B), DensityMatrix.basis(3, E)
        mixed = DensityMatrix(0.3 * rho1.data + 0.7 * rho2.data)
        out = integrate_master(model, mixed, 0.4, FINE).data
        parts = 0.3 * integrate_master(model, rho1, 0.4, FINE).data + 0.7 * integrate_master(model, rho2, 0.4, FINE).data
        np.testing.assert_allclose(out, parts, atol=1e-10)

    def test_ground_level_without_coupling_is_frozen(self, model):
        frozen = model.replace(gamma2=0.0, rabi_ec=0.0)
        rho = integrate_master(frozen, DensityMatrix.basis(3, B), 3.0)
        np.testing.assert_allclose(rho.data, DensityMatrix.basis(3, B).data, atol=1e-12)

    def test_trajectory_rejects_bad_times(self, model):
        with pytest.raises(ModelError):
            trajectory(model, DensityMatrix.basis(3, B), [0.0, 1.0, 0.5])
        with pytest.raises(ModelError):
            trajectory(model, DensityMatrix.basis(3, B), [0.0, 1.0], method="magic")

    def test_negative_time_rejected(self, model):
        with pytest.raises(ModelError):
            integrate_master(model, DensityMatrix.basis(3, B), -1.0)


class TestNonHermitian:
    def test_wavefunction_matches_closed_form(self, model, rates):
        psi0 = np.array([0, 1, 0], dtype=complex)
        for t in (0.13, 0.5, 1.1):
            psi = integrate_nhh(model, psi0, t, FINE)
            c = free_coeffs(t, rates)
            np.testing.assert_allclose(psi, [0, c.ee, c.ce], atol=1e-8)

    def test_density_matches_quasi_green(self, model, rates):
        for t in (0.2, 0.6):
            rho = integrate_nhh(model, DensityMatrix.basis(3, E), t, FINE)
            assert rho.data[E, E] == pytest.approx(complex(quasi_green_time("eeee", t, rates, 0.0)), abs=1e-8)
            assert rho.data[C, E] == pytest.approx(complex(quasi_green_time("ceee", t, rates, 0.0)), abs=1e-8)

    def test_pure_state_stays_pure(self, model):
        psi = np.ones(3) / math.sqrt(3)
        rho = integrate_nhh(model, DensityMatrix.pure(psi), 1.0, FINE)
        s = np.linalg.svd(rho.data, compute_uv=False)
        assert s[1] / s[0] < 1e-8

    def test_norm_decreases(self, model):
        rhos = trajectory(model, DensityMatrix.basis(3, E), np.linspace(0, 1, 21), IntegratorConfig(step=5e-3),
                          method="nhh")
        traces = np.trace(rhos, axis1=1, axis2=2).real
        assert np.all(np.diff(traces) < 0)

    @pytest.mark.parametrize("level", [B, E])
    def test_norm_leaks_over_long_run(self, model, level):
        rhos = trajectory(model, DensityMatrix.basis(3, level), np.linspace(0, 10, 101),
                          IntegratorConfig(step=5e-3), method="nhh")
        traces = np.trace(rhos, axis1=1, axis2=2).real
        assert np.all(np.diff(traces) < 0)
        assert traces[-1] < 1 - 1e-3

    def test_undamped_keeps_ground_level(self, undamped):
        psi = integrate_nhh(undamped, np.array([1, 0, 0], dtype=complex), 2.0)
        np.testing.assert_allclose(psi, [1, 0, 0], atol=1e-12)

    def test_dimension_mismatch(self, model):
        with pytest.raises(ModelError):
            integrate_nhh(model, np.ones(4), 0.1)

    def test_deviation_from_master_scales_with_dephasing(self, model):
        times = np.linspace(0, 0.5, 51)
        start = DensityMatrix.basis(3, B)
        config = IntegratorConfig(step=5e-3)

        def deviation(scale):
            scaled = model.scaled_damping(scale)
            full = trajectory(scaled, start, times, config)
            jump_free = trajectory(scaled, start, times, config, method="nhh")
            pops = lambda rhos: np.real(np.diagonal(rhos, axis1=1, axis2=2))  # noqa: E731
            return np.max(np.abs(pops(full) - pops(jump_free)))

        d1, d2, d4 = deviation(1.0), deviation(0.5), deviation(0.25)
        assert 0.45 < d2 / d1 < 0.6
        assert 0.45 < d4 / d2 < 0.6


class TestSteadyState:
    def test_driven_master_equation(self, model):
        pops = steady_state(model, variant=MasterVariant.GENERATOR)
        expected = model.gamma1 / (model.gamma1 + 2 * model.gamma2)
        assert pops[B] == pytest.approx(expected, abs=1e-5)
        assert pops[E] == pytest.approx(pops[C], abs=1e-5)

    def test_decoupled_equation_is_default(self, model):
        pops = steady_state(model)
        assert pops[B] == pytest.approx(0.97087, abs=1e-4)
        assert pops[B] == pytest.approx(model.gamma1 / (model.gamma1 + model.gamma2), abs=1e-6)
        np.testing.assert_allclose(pops, steady_state(model, variant=MasterVariant.PERTURBATIVE))

    def test_undriven_master_equation(self, model):
        pops = steady_state(model.replace(rabi_ec=0.0))
        assert pops[B] == pytest.approx(1 / 1.03, abs=1e-5)
        assert pops[C] == pytest.approx(0.0, abs=1e-12)

    def test_excitation_returns_to_ground(self, model):
        relaxing = model.replace(rabi_ec=0.0, gamma2=0.0)
        pops = steady_state(relaxing, initial=DensityMatrix.basis(3, E))
        assert pops[B] == pytest.approx(1.0, abs=1e-8)

    def test_jump_free_equation_empties(self, model):
        np.testing.assert_allclose(steady_state(model, "nhh"), 0.0, atol=1e-6)

    def test_undamped_model_rejected(self, undamped):
        with pytest.raises(ModelError):
            steady_state(undamped)

    def test_slow_relaxation_does_not_converge(self):
        slow = ThreeLevelModel(rabi_ec=0.0, gamma1=1e-9, gamma2=0.0, gamma0_b=0.0, gamma0_e=0.0, gamma0_c=0.0)
        with pytest.raises(ConvergenceError):
            steady_state(slow, initial=DensityMatrix.basis(3, E))

    def test_multilevel_model(self):
        multi = MultiLevelModel([0.0, 1.0, 2.0], np.zeros((3, 3)), [0.0, 0.5, 0.8])
        pops = steady_state(multi, initial=DensityMatrix.basis(3, 2))
        np.testing.assert_allclose(pops, [1.0, 0.0, 0.0], atol=1e-8)

    def test_unknown_method(self, model):
        with pytest.raises(ModelError):
            steady_state(model, "monte-carlo")


class TestRandomizedClosedForms:
    """Closed forms against numerical integration over randomly scaled parameters."""

    SAMPLES = 100
    CONFIG = IntegratorConfig(step=1e-3)

    @pytest.fixture
    def samples(self, model):
        rng = np.random.default_rng(20240611)
        out = []
        for _ in range(self.SAMPLES):
            changes = {
                name: getattr(model, name) * rng.uniform(0.5, 1.5)
                for name in ("rabi_ec", "gamma1", "gamma2", "gamma0_b", "gamma0_e", "gamma0_c")
            }
            out.append((model.replace(**changes), float(rng.uniform(0.0, 2.0))))
        return out

    def test_green_functions_match_decoupled_master_equation(self, samples):
        kinds = [k for k in GreenKind if not k.is_frequency]
        for sample, t in samples:
            rates = derive_rates(sample)
            gammas = (sample.gamma1, sample.gamma2)
            responses = {
                initial: element_response(sample, initial, t, self.CONFIG, MasterVariant.PERTURBATIVE)
                for initial in ("bb", "ee", "ec")
            }
            for kind in kinds:
                final, initial = kind.elements
                row, col = (THREE_LEVELS.index(ch) for ch in final)
                expected = complex(green_time(kind, t, rates, gammas, GreenForm.ANALYTIC))
                assert responses[initial][row, col] == pytest.approx(expected, abs=1e-6), (kind, t)

    def test_quasi_green_functions_match_wavefunctions(self, samples):
        for sample, t in samples:
            rates = derive_rates(sample)
            columns = {
                level: integrate_nhh(sample, np.eye(3, dtype=complex)[THREE_LEVELS.index(level)], t, self.CONFIG)
                for level in THREE_LEVELS
            }
            for label in ("bbbb", "eeee", "ceee", "eeec", "ceec"):
                i, j = (THREE_LEVELS.index(ch) for ch in label[:2])
                expected = columns[label[2]][i] * np.conj(columns[label[3]][j])
                assert complex(quasi_green_time(label, t, rates, 0.0)) == pytest.approx(expected, abs=1e-6)
            c = free_coeffs(t, rates)
            np.testing.assert_allclose(columns["e"], [0, c.ee, c.ce], atol=1e-6)
            np.testing.assert_allclose(columns["c"], [0, c.ec, c.cc], atol=1e-6)
            assert columns["b"][0] == pytest.approx(c.bb, abs=1e-6)


def test_rates_fixture_consistent(model, rates):
    assert rates == derive_rates(model)
