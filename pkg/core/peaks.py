"""Peak extraction and peak-position comparison on 2D spectra using OpenCV."""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import cv2
import numpy as np

from core.errors import ConfigError, EmptySpectrumError
from models.spectrum import ComplexGrid2D, Peak, PeakList, SpectrumResult

logger = logging.getLogger(__name__)

MATCH_BINS = 3


def _parabolic(left: float, mid: float, right: float) -> float:
    denom = left - 2 * mid + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


class PeakFinder:
    """Finds local extrema of the real part of a spectrum."""

    def __init__(self, min_height_fraction: float = 0.3):
        self._check_fraction(min_height_fraction)
        self.min_height_fraction = min_height_fraction

    @staticmethod
    def _check_fraction(fraction: float):
        if not 0 < fraction < 1:
            raise ConfigError(f"min_height_fraction must be in (0, 1), got {fraction}", key="min_height_fraction")

    def find_peaks(
        self,
        spectrum: Union[SpectrumResult, ComplexGrid2D],
        min_height_fraction: Optional[float] = None,
    ) -> PeakList:
        """
        Locate extrema of Re(spectrum) in the 8-neighborhood sense.

        Args:
            spectrum: frequency-domain grid (axis1 = omega1, axis2 = omega3)
            min_height_fraction: Override default threshold, relative to the
                largest |Re|

        Returns:
            Peaks refined to sub-bin positions, largest |height| first
        """
        fraction = min_height_fraction if min_height_fraction is not None else self.min_height_fraction
        self._check_fraction(fraction)
        grid = spectrum.grid if isinstance(spectrum, SpectrumResult) else spectrum

        real = np.real(grid.values)
        magnitude = np.abs(real)
        if magnitude.size == 0 or not np.any(magnitude > 0):
            raise EmptySpectrumError("spectrum has no nonzero values")

        level = fraction * magnitude.max()
        mag32 = magnitude.astype(np.float32)
        # A pixel is a local maximum when 3x3 dilation leaves it unchanged
        dilated = cv2.dilate(mag32, np.ones((3, 3), np.uint8))
        rows, cols = np.nonzero((mag32 == dilated) & (magnitude >= level))

        order = np.argsort(-magnitude[rows, cols], kind="stable")
        kept: list[tuple[int, int]] = []
        for i, j in zip(rows[order], cols[order]):
            # Avoid duplicate detections on flat tops (within 1 bin)
            if any(abs(i - a) <= 1 and abs(j - b) <= 1 for a, b in kept):
                continue
            kept.append((int(i), int(j)))

        peaks = [self._refined(grid, magnitude, real, i, j) for i, j in kept]
        logger.debug("found %d peaks above %.3g", len(peaks), level)
        return PeakList(peaks)

    @staticmethod
    def _refined(grid: ComplexGrid2D, magnitude, real, i: int, j: int) -> Peak:
        n1, n2 = magnitude.shape
        d1 = _parabolic(magnitude[i - 1, j], magnitude[i, j], magnitude[i + 1, j]) if 0 < i < n1 - 1 else 0.0
        d3 = _parabolic(magnitude[i, j - 1], magnitude[i, j], magnitude[i, j + 1]) if 0 < j < n2 - 1 else 0.0
        return Peak(
            omega1=grid.axis1.start + (i + d1) * grid.axis1.step,
            omega3=grid.axis2.start + (j + d3) * grid.axis2.step,
            height=float(real[i, j]),
        )


def find_peaks(spectrum, min_height_fraction: float = 0.3) -> PeakList:
    return PeakFinder(min_height_fraction).find_peaks(spectrum)


def peak_gaps(
    peaks: PeakList,
    axis: int = 3,
    pairs: Optional[list[tuple[int, int]]] = None,
) -> list[float]:
    """
    Spacings along omega1 (axis=1) or omega3 (axis=3).

    Without ``pairs`` the peaks are sorted by that coordinate and adjacent
    differences returned; otherwise |coord[a] - coord[b]| for each index pair.
    """
    if axis not in (1, 3):
        raise ConfigError(f"axis must be 1 or 3, got {axis}", key="axis")
    coords = [p.omega1 if axis == 1 else p.omega3 for p in peaks]
    if pairs is not None:
        return [abs(coords[a] - coords[b]) for a, b in pairs]
    if len(coords) < 2:
        return []
    ordered = np.sort(np.asarray(coords))
    return np.diff(ordered).tolist()


@dataclass(frozen=True)
class PeakMatch:
    first: Peak
    second: Peak

    @property
    def shift1(self) -> float:
        return self.second.omega1 - self.first.omega1

    @property
    def shift3(self) -> float:
        return self.second.omega3 - self.first.omega3

    @property
    def height_ratio(self) -> float:
        return self.second.height / self.first.height if self.first.height else float("inf")


def compare_peaks(first: PeakList, second: PeakList, bin_width: float, bins: int = MATCH_BINS):
    """
    Pair each peak of ``first`` with the nearest unused peak of ``second``
    within ``bins`` bins on both axes.

    Returns:
        (matches, unmatched_first, unmatched_second)
    """
    tolerance = bins * bin_width
    used: set[int] = set()
    matches, lonely = [], []
    for peak in first:
        best, best_dist = None, None
        for k, other in enumerate(second):
            if k in used:
                continue
            if abs(other.omega1 - peak.omega1) > tolerance or abs(other.omega3 - peak.omega3) > tolerance:
                continue
            dist = np.hypot(other.omega1 - peak.omega1, other.omega3 - peak.omega3)
            if best_dist is None or dist < best_dist:
                best, best_dist = k, dist
        if best is None:
            lonely.append(peak)
        else:
            used.add(best)
            matches.append(PeakMatch(peak, second[best]))
    leftover = [p for k, p in enumerate(second) if k not in used]
    return matches, PeakList(lonely), PeakList(leftover)
