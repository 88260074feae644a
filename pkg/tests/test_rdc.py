from dataclasses import replace

import numpy as np
import pytest

from core.errors import ModelError
from core.paths import NON_REPHASING, REPHASING
from core.peaks import find_peaks, peak_gaps
from core.rdc import (
    RDC_LABELS, RdcSettings, build_rdc, enumerate_rdc_paths, simulate_rdc, third_order_signal,
)
from models.system import MultiLevelModel
from models.units import TWO_PI, angular_to_wavenumber

QUICK = RdcSettings(t_max=2.5, t_step=0.01, pad_to=1000)


@pytest.fixture(scope="module")
def system():
    return build_rdc()


@pytest.fixture(scope="module")
def absorptive(system):
    return simulate_rdc(system)["absorptive"]


class TestLevels:
    def test_transition_frequencies(self, system):
        assert system.transition_cm("a", "00") == pytest.approx(2015.0)
        assert system.transition_cm("2a", "a") == pytest.approx(2001.0)
        assert system.transition_cm("as", "s") == pytest.approx(1989.0)
        assert system.transition_cm("as", "a") == pytest.approx(2058.0)
        assert system.transition_cm("2s", "s") == pytest.approx(2073.0)
        assert system.transition_cm("2a", "s") == pytest.approx(1932.0)
        assert system.transition_cm("2s", "a") == pytest.approx(2142.0)

    def test_rotating_frame(self, system):
        frame = angular_to_wavenumber(system.frame_energies)
        assert frame[RDC_LABELS.index("a")] == pytest.approx(2015.0 - 2036.0)
        assert frame[RDC_LABELS.index("2s")] == pytest.approx(4157.0 - 2 * 2036.0)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ModelError):
            build_rdc(gamma_cm=-0.1)


class TestPaths:
    def test_rephasing_path_counts(self, system):
        paths = enumerate_rdc_paths(system, REPHASING)
        kinds = [p.kind(system.quanta) for p in paths]
        assert len(paths) == 20
        assert kinds.count("gsb") == 4
        assert kinds.count("se") == 4
        assert kinds.count("esa") == 12

    def test_nonrephasing_path_count(self, system):
        assert len(enumerate_rdc_paths(system, NON_REPHASING)) == 20

    def test_weak_overtone_dipoles_remove_paths(self, system):
        weak = system.with_dipoles({("2s", "a"): 0.0, ("2a", "s"): 0.0})
        assert len(enumerate_rdc_paths(weak, REPHASING)) == 14
        assert system.model.dipole[RDC_LABELS.index("2s"), RDC_LABELS.index("a")] == 0.13

    def test_polarization_at_zero_delays(self, system):
        mu = system.model.dipole
        one = [RDC_LABELS.index(x) for x in ("a", "s")]
        two = [RDC_LABELS.index(f) for f in ("2a", "2s", "as")]
        bleach = sum(mu[x, 0] ** 2 for x in one) ** 2
        absorption = sum(sum(mu[x, 0] * mu[f, x] for x in one) ** 2 for f in two)
        value = third_order_signal(system, REPHASING, 0.0, 0.0, 0.0)
        assert value == pytest.approx(-2j * bleach + 1j * absorption)
        assert value == pytest.approx(0.79650575j)

    def test_coherence_decay_along_t1(self, system):
        undamped = build_rdc(gamma_cm=0.0)
        t1 = np.linspace(0, 5, 11)
        damped = third_order_signal(system, REPHASING, t1, 0.0, 0.0)
        free = third_order_signal(undamped, REPHASING, t1, 0.0, 0.0)
        np.testing.assert_allclose(damped, np.exp(-system.gamma * t1) * free, rtol=1e-12)

    def test_coherence_decay_along_t3(self, system):
        t3 = np.linspace(0, 5, 11)
        damped = third_order_signal(system.without_two_quantum(), REPHASING, 0.0, 0.0, t3)
        free = third_order_signal(build_rdc(gamma_cm=0.0).without_two_quantum(), REPHASING, 0.0, 0.0, t3)
        np.testing.assert_allclose(damped, np.exp(-system.gamma * t3) * free, rtol=1e-12)

    def test_conjugate_direction(self, system):
        t1, t2, t3 = np.meshgrid([0.0, 0.7], [0.0, 0.2], [0.1, 1.3], indexing="ij")
        forward = third_order_signal(system, REPHASING, t1, t2, t3)
        backward = third_order_signal(system, -REPHASING, t1, t2, t3)
        np.testing.assert_allclose(backward, np.conj(forward), rtol=1e-12)

    def test_negative_delay_rejected(self, system):
        with pytest.raises(ModelError):
            third_order_signal(system, REPHASING, -1.0, 0.0, 0.0)


class TestSpectrum:
    EXPECTED = [
        # (omega1, omega3, sign), cm-1
        (2015.0, 2015.0, 1), (2015.0, 2001.0, -1), (2015.0, 2084.0, 1), (2015.0, 2058.0, -1),
        (2084.0, 2084.0, 1), (2084.0, 2073.0, -1), (2084.0, 2015.0, 1), (2084.0, 1989.0, -1),
    ]

    def test_axes_are_absolute_wavenumbers(self, absorptive):
        axis = absorptive.grid.axis1
        assert axis.unit == "cm-1"
        assert axis.start == pytest.approx(2036.0 - 200.0, abs=2.0)
        assert axis.stop == pytest.approx(2036.0 + 200.0, abs=2.0)
        assert axis.step == pytest.approx(1.3343, abs=1e-3)
        assert np.max(np.abs(absorptive.grid.values)) == pytest.approx(1.0)

    def test_absorptive_peak_pattern(self, absorptive):
        peaks = find_peaks(absorptive, 0.35)
        matched = {}
        for omega1, omega3, sign in self.EXPECTED:
            peak = peaks.near(omega1, omega3, 2.5)
            assert peak is not None, (omega1, omega3)
            assert peak.sign == sign, (omega1, omega3)
            matched[(omega1, omega3)] = peak

        def gap(first, second):
            return peak_gaps([matched[first], matched[second]])[0]

        assert gap((2015.0, 2015.0), (2015.0, 2001.0)) == pytest.approx(14.0, abs=2.0)
        assert gap((2084.0, 2084.0), (2084.0, 2073.0)) == pytest.approx(11.0, abs=2.0)
        assert gap((2015.0, 2084.0), (2015.0, 2058.0)) == pytest.approx(26.0, abs=2.0)
        assert gap((2084.0, 2015.0), (2084.0, 1989.0)) == pytest.approx(26.0, abs=2.0)

    def test_no_excited_absorption_without_overtones(self, system):
        result = simulate_rdc(system.without_two_quantum(), QUICK)["absorptive"]
        peaks = find_peaks(result, 0.3)
        assert len(peaks) == 4
        assert not peaks.negative()

    def test_frame_shift_translates_spectrum(self, system):
        step = TWO_PI / (QUICK.pad_to * QUICK.t_step)
        delta = 6 * step
        m = system.model
        moved = replace(system, model=MultiLevelModel(
            m.energies + np.asarray(system.quanta) * delta, m.dipole, m.decay, m.labels,
        ))
        base = find_peaks(simulate_rdc(system, QUICK)["absorptive"], 0.5)[0]
        shifted = find_peaks(simulate_rdc(moved, QUICK)["absorptive"], 0.5)[0]
        delta_cm = angular_to_wavenumber(delta)
        half_bin = 0.5 * angular_to_wavenumber(step)
        assert shifted.omega1 - base.omega1 == pytest.approx(delta_cm, abs=half_bin)
        assert shifted.omega3 - base.omega3 == pytest.approx(delta_cm, abs=half_bin)

    def test_all_three_spectra_returned(self, system):
        spectra = simulate_rdc(system, QUICK)
        assert set(spectra) == {"rephasing", "nonrephasing", "absorptive"}
        assert spectra["rephasing"].metadata["paths"] == 20
        assert spectra["absorptive"].method == "absorptive"
