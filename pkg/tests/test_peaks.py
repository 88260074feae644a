import numpy as np
import pytest

from core.errors import ConfigError, EmptySpectrumError
from core.peaks import PeakFinder, compare_peaks, find_peaks, peak_gaps
from models.spectrum import Axis, ComplexGrid2D, Peak, PeakList, SpectrumResult

AXIS = Axis(-10.0, 0.1, 201)


def gaussian_grid(centers, sigma=0.3):
    w1, w3 = np.meshgrid(AXIS.values, AXIS.values, indexing="ij")
    values = np.zeros_like(w1)
    for c1, c3, height in centers:
        values += height * np.exp(-((w1 - c1) ** 2 + (w3 - c3) ** 2) / (2 * sigma ** 2))
    return ComplexGrid2D(AXIS, AXIS, values + 0j)


def test_single_peak_sub_bin_position():
    peaks = find_peaks(SpectrumResult(gaussian_grid([(1.03, -2.47, 1.0)]), "test"))
    assert len(peaks) == 1
    assert peaks[0].omega1 == pytest.approx(1.03, abs=0.01)
    assert peaks[0].omega3 == pytest.approx(-2.47, abs=0.01)
    assert peaks[0].height == pytest.approx(1.0, abs=0.02)


def test_threshold_and_sign():
    grid = gaussian_grid([(0.0, 0.0, 1.0), (3.0, 3.0, -0.6), (-4.0, 5.0, 0.2)])
    peaks = find_peaks(grid, 0.3)
    assert len(peaks) == 2
    assert peaks[0].sign == 1
    assert peaks[1].sign == -1
    assert len(peaks.positive()) == 1 and len(peaks.negative()) == 1
    assert len(PeakFinder(0.1).find_peaks(grid)) == 3


def test_positions_invariant_under_positive_scaling():
    grid = gaussian_grid([(0.0, 0.0, 1.0), (3.0, 3.0, -0.6)])
    base = find_peaks(grid)
    scaled = find_peaks(grid.with_values(grid.values * 37.5))
    for a, b in zip(base, scaled):
        assert (a.omega1, a.omega3) == pytest.approx((b.omega1, b.omega3))


def test_invalid_inputs():
    with pytest.raises(ConfigError):
        PeakFinder(1.5)
    with pytest.raises(ConfigError):
        PeakFinder().find_peaks(gaussian_grid([(0, 0, 1)]), 0.0)
    with pytest.raises(EmptySpectrumError):
        find_peaks(ComplexGrid2D(AXIS, AXIS, np.zeros((201, 201))))


def test_peak_gaps():
    peaks = PeakList([Peak(0.0, 1.0, 1.0), Peak(0.0, 3.5, -0.5), Peak(2.0, 2.0, 0.7)])
    assert peak_gaps(peaks) == pytest.approx([1.0, 1.5])
    assert peak_gaps(peaks, axis=1) == pytest.approx([0.0, 2.0])
    assert peak_gaps(peaks, pairs=[(0, 1)]) == pytest.approx([2.5])
    assert peak_gaps(PeakList([Peak(0, 0, 1)])) == []
    with pytest.raises(ConfigError):
        peak_gaps(peaks, axis=2)


def test_compare_peaks():
    first = PeakList([Peak(0.0, 0.0, 1.0), Peak(5.0, 5.0, 0.5)])
    second = PeakList([Peak(0.1, -0.1, 0.9), Peak(-5.0, 5.0, 0.4)])
    matches, lonely_first, lonely_second = compare_peaks(first, second, bin_width=0.1, bins=3)
    assert len(matches) == 1
    assert matches[0].shift1 == pytest.approx(0.1)
    assert matches[0].shift3 == pytest.approx(-0.1)
    assert matches[0].height_ratio == pytest.approx(0.9)
    assert lonely_first[0].omega1 == 5.0
    assert lonely_second[0].omega1 == -5.0


def test_peak_list_lookup():
    peaks = PeakList([Peak(0.0, 0.0, 0.2), Peak(1.0, 1.0, -0.9)])
    assert peaks[0].height == -0.9
    assert peaks.near(0.9, 1.1, 0.2).height == -0.9
    assert peaks.near(5.0, 5.0, 0.2) is None
    assert peaks.to_rows()[0]["sign"] == -1
