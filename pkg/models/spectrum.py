"""Grid, spectrum and peak containers."""
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from core.errors import GridMismatchError, ModelError


@dataclass(frozen=True)
class Axis:
    """Uniform grid: start + k * step for k in range(count)."""
    start: float
    step: float
    count: int
    unit: str = ""

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ModelError(f"axis step must be > 0, got {self.step}")
        if self.count < 2:
            raise ModelError(f"axis needs at least 2 points, got {self.count}")

    @classmethod
    def centered(cls, center: float, half_width: float, count: int, unit: str = "") -> "Axis":
        """count points spanning [center - half_width, center + half_width]."""
        if count < 2:
            raise ModelError(f"axis needs at least 2 points, got {count}")
        return cls(center - half_width, 2 * half_width / (count - 1), count, unit)

    @property
    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def index_of(self, value: float) -> float:
        """Fractional index of a coordinate."""
        return (value - self.start) / self.step

    def matches(self, other: "Axis", rtol: float = 1e-9) -> bool:
        return (
            self.count == other.count
            and self.unit == other.unit
            and math.isclose(self.step, other.step, rel_tol=rtol)
            and math.isclose(self.start, other.start, rel_tol=rtol, abs_tol=rtol * self.step)
        )

    def shifted(self, offset: float, scale: float = 1.0, unit: Optional[str] = None) -> "Axis":
        """Axis with values (v + offset) * scale."""
        return Axis((self.start + offset) * scale, self.step * scale, self.count,
                    self.unit if unit is None else unit)

    def to_dict(self) -> dict:
        return {"start": self.start, "step": self.step, "count": self.count, "unit": self.unit}

    @classmethod
    def from_dict(cls, data: dict) -> "Axis":
        return cls(float(data["start"]), float(data["step"]), int(data["count"]), data.get("unit", ""))


@dataclass(frozen=True)
class ComplexGrid2D:
    """
    Complex samples on axis1 x axis2, values[i, j] at (axis1[i], axis2[j]).

    axis1 is t1 or omega1, axis2 is t3 or omega3.
    """
    axis1: Axis
    axis2: Axis
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        expected = (self.axis1.count, self.axis2.count)
        if values.shape != expected:
            raise GridMismatchError(f"values have shape {values.shape}, axes need {expected}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values: np.ndarray) -> "ComplexGrid2D":
        return ComplexGrid2D(self.axis1, self.axis2, values)

    def matches(self, other: "ComplexGrid2D") -> bool:
        return self.axis1.matches(other.axis1) and self.axis2.matches(other.axis2)


@dataclass(frozen=True)
class SpectrumResult:
    """Frequency-domain grid with provenance."""
    grid: ComplexGrid2D
    method: str
    t2: float = 0.0
    center_frequency: float = 0.0
    normalization: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.normalization > 0:
            raise ModelError(f"normalization must be > 0, got {self.normalization}")

    def normalized(self) -> "SpectrumResult":
        """Divide by max |value|; the constant used is kept in ``normalization``."""
        peak = float(np.max(np.abs(self.grid.values))) if self.grid.values.size else 0.0
        if peak == 0:
            return self
        return replace(
            self,
            grid=self.grid.with_values(self.grid.values / peak),
            normalization=self.normalization * peak,
        )

    def with_grid(self, grid: ComplexGrid2D, method: Optional[str] = None) -> "SpectrumResult":
        return replace(self, grid=grid, method=method or self.method)

    def describe(self) -> dict:
        return {
            "method": self.method,
            "t2": self.t2,
            "center_frequency": self.center_frequency,
            "normalization": self.normalization,
            "axis1": self.grid.axis1.to_dict(),
            "axis2": self.grid.axis2.to_dict(),
            **self.metadata,
        }


@dataclass(frozen=True)
class Peak:
    omega1: float
    omega3: float
    height: float

    @property
    def sign(self) -> int:
        return 1 if self.height >= 0 else -1

    def to_dict(self) -> dict:
        return {"omega1": self.omega1, "omega3": self.omega3, "height": self.height, "sign": self.sign}


class PeakList(list):
    """Peaks ordered by |height|, largest first."""

    def __init__(self, peaks=()):
        super().__init__(sorted(peaks, key=lambda p: abs(p.height), reverse=True))

    def positive(self) -> "PeakList":
        return PeakList(p for p in self if p.height > 0)

    def negative(self) -> "PeakList":
        return PeakList(p for p in self if p.height < 0)

    def near(self, omega1: float, omega3: float, tolerance: float) -> Optional[Peak]:
        """The closest peak within tolerance on both axes, or None."""
        candidates = [
            p for p in self
            if abs(p.omega1 - omega1) <= tolerance and abs(p.omega3 - omega3) <= tolerance
        ]
        if not candidates:
            return None
        return min(candidates, key=lambda p: math.hypot(p.omega1 - omega1, p.omega3 - omega3))

    def to_rows(self) -> list[dict]:
        return [p.to_dict() for p in self]
