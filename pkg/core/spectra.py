"""
Signal grids and their transforms.

Forward convention on both axes: S(w) = sum_k x(t_k) exp(+i w t_k) dt, so a
coherence rotating as exp(-i w0 t) lands at +w0 after the carrier is removed.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from core.errors import GridMismatchError, ModelError
from models.spectrum import Axis, ComplexGrid2D, SpectrumResult

logger = logging.getLogger(__name__)

FFT_SIGN = +1
DEFAULT_CHUNK_ROWS = 64

SignalFn = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


def evaluate_grid(
    signal_fn: SignalFn,
    axis1: Axis,
    axis2: Axis,
    t2: float,
    workers: int = 1,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> ComplexGrid2D:
    """
    Evaluate signal_fn(axis2, t2, axis1) on the outer product of the axes.

    The function receives broadcastable arrays (axis2 as a row, a block of
    axis1 as a column). Blocks of rows are evaluated on a thread pool and
    reassembled in order, so the result does not depend on ``workers``.
    """
    if workers < 1:
        raise ModelError(f"workers must be >= 1, got {workers}")
    x1 = axis1.values
    x2 = axis2.values[None, :]
    bounds = [(i, min(i + chunk_rows, x1.size)) for i in range(0, x1.size, chunk_rows)]

    def block(bound):
        lo, hi = bound
        out = np.asarray(signal_fn(x2, t2, x1[lo:hi, None]), dtype=complex)
        return np.broadcast_to(out, (hi - lo, x2.size))

    if workers == 1 or len(bounds) == 1:
        blocks = [block(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(block, bounds))
    logger.debug("evaluated %dx%d grid in %d blocks", x1.size, x2.size, len(bounds))
    return ComplexGrid2D(axis1, axis2, np.concatenate(blocks, axis=0))


def frequency_axis(time_axis: Axis, pad_to: int) -> Axis:
    """DC-centered angular-frequency axis of a padded transform."""
    d_omega = 2 * np.pi / (pad_to * time_axis.step)
    unit = f"rad/{time_axis.unit}" if time_axis.unit else "rad"
    return Axis(-(pad_to // 2) * d_omega, d_omega, pad_to, unit)


def _crop(values: np.ndarray, axis: Axis, window, dim: int):
    if window is None:
        return values, axis
    lo, hi = window
    coords = axis.values
    keep = np.nonzero((coords >= lo - 1e-9 * axis.step) & (coords <= hi + 1e-9 * axis.step))[0]
    if keep.size < 2:
        raise GridMismatchError(f"window {window} keeps fewer than two frequency bins")
    cropped = Axis(float(coords[keep[0]]), axis.step, int(keep.size), axis.unit)
    return np.take(values, keep, axis=dim), cropped


def _transform_axis(values: np.ndarray, axis: Axis, pad_to: int, dim: int):
    if pad_to < axis.count:
        raise GridMismatchError(f"pad_to={pad_to} is smaller than the {axis.count} samples")
    freq = frequency_axis(axis, pad_to)
    # ifft carries exp(+2 pi i k m / n); scale by n * dt for the Riemann sum
    spectrum = np.fft.ifft(values, n=pad_to, axis=dim) * pad_to * axis.step
    spectrum = np.fft.fftshift(spectrum, axes=dim)
    if axis.start != 0:
        phase = np.exp(1j * FFT_SIGN * freq.values * axis.start)
        shape = [1, 1]
        shape[dim] = pad_to
        spectrum = spectrum * phase.reshape(shape)
    return spectrum, freq


def double_fft(
    time_grid: ComplexGrid2D,
    pad_to,
    window1: Optional[tuple[float, float]] = None,
    window2: Optional[tuple[float, float]] = None,
) -> ComplexGrid2D:
    """
    Zero-pad and transform t3 -> omega3, then t1 -> omega1.

    Args:
        time_grid: samples over (t1, t3)
        pad_to: padded length, one int for both axes or a (n1, n2) pair
        window1, window2: optional (low, high) frequency ranges kept after
            each axis is transformed

    Raises:
        GridMismatchError: pad_to smaller than an axis length
    """
    pad1, pad2 = (pad_to, pad_to) if np.isscalar(pad_to) else pad_to
    values, axis2 = _transform_axis(time_grid.values, time_grid.axis2, int(pad2), dim=1)
    values, axis2 = _crop(values, axis2, window2, dim=1)
    values, axis1 = _transform_axis(values, time_grid.axis1, int(pad1), dim=0)
    values, axis1 = _crop(values, axis1, window1, dim=0)
    logger.debug("double fft -> %dx%d", axis1.count, axis2.count)
    return ComplexGrid2D(axis1, axis2, values)


def mirror_omega1(grid: ComplexGrid2D) -> ComplexGrid2D:
    """
    Reflect omega1 -> -omega1 on the same axis.

    Works for axes symmetric about zero and for the even-length FFT layout,
    whose lowest bin maps onto itself.
    """
    axis = grid.axis1
    tol = 1e-9 * axis.step
    if abs(axis.start + axis.stop) <= tol:
        return grid.with_values(grid.values[::-1, :].copy())
    if axis.count % 2 == 0 and abs(axis.start + (axis.count // 2) * axis.step) <= tol:
        return grid.with_values(np.roll(grid.values[::-1, :], 1, axis=0))
    raise GridMismatchError("omega1 axis is not symmetric about zero")


def absorptive_combine(rephasing: SpectrumResult, nonrephasing: SpectrumResult) -> SpectrumResult:
    """Re(rephasing mirrored in omega1) + Re(nonrephasing)."""
    mirrored = mirror_omega1(rephasing.grid)
    if not mirrored.matches(nonrephasing.grid):
        raise GridMismatchError("rephasing and non-rephasing grids differ")
    values = np.real(mirrored.values) + np.real(nonrephasing.grid.values)
    return nonrephasing.with_grid(nonrephasing.grid.with_values(values + 0j), method="absorptive")


def time_energy(grid: ComplexGrid2D) -> float:
    return float(np.sum(np.abs(grid.values) ** 2) * grid.axis1.step * grid.axis2.step)


def frequency_energy(grid: ComplexGrid2D) -> float:
    """Sum |X|^2 dw1 dw2 / (2 pi)^2; equals time_energy for an unpadded transform."""
    return float(np.sum(np.abs(grid.values) ** 2) * grid.axis1.step * grid.axis2.step / (2 * np.pi) ** 2)
