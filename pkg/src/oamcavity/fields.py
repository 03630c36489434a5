"""Sampled transverse fields on square Cartesian grids."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["GridSpec", "SampledField", "SamplingError"]


class SamplingError(ValueError):
    """The grid cannot represent the requested field."""


@dataclass(frozen=True)
class GridSpec:
    """``n x n`` samples at ``pitch`` spacing; sample ``n // 2`` sits on the center."""

    n: int
    pitch: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 32 or self.n & (self.n - 1):
            raise SamplingError(f"grid size must be a power of two >= 32 (got {self.n})")
        if not self.pitch > 0:
            raise SamplingError(f"grid pitch must be positive (got {self.pitch})")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.pitch

    @property
    def window(self) -> float:
        return self.n * self.pitch

    @property
    def half_diagonal(self) -> float:
        return np.sqrt(2.0) * 0.5 * self.window + np.hypot(*self.center)

    def coordinates(self):
        """Return ``(x, y)`` arrays of shape ``(n, n)``; rows index y."""
        x = self.axis + self.center[0]
        y = self.axis + self.center[1]
        return np.meshgrid(x, y, indexing="xy")

    def polar(self):
        x, y = self.coordinates()
        return np.hypot(x, y), np.mod(np.arctan2(y, x), 2 * np.pi)

    @property
    def cell_area(self) -> float:
        return self.pitch * self.pitch

    def with_pitch(self, pitch: float) -> "GridSpec":
        return replace(self, pitch=pitch)


@dataclass(frozen=True)
class SampledField:
    """Complex transverse amplitude; the ``exp(-ikz)`` carrier is kept apart in ``axial_phase``."""

    grid: GridSpec
    amplitudes: np.ndarray
    wavelength: float
    axial_phase: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n, self.grid.n):
            raise SamplingError(f"amplitude shape {a.shape} does not match grid n={self.grid.n}")
        object.__setattr__(self, "amplitudes", a)

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_area)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, amplitudes, grid: GridSpec | None = None, axial_phase: float | None = None) -> "SampledField":
        return SampledField(
            grid=self.grid if grid is None else grid,
            amplitudes=amplitudes,
            wavelength=self.wavelength,
            axial_phase=self.axial_phase if axial_phase is None else axial_phase,
        )

    def normalized(self) -> "SampledField":
        p = self.power
        if p <= 0:
            raise SamplingError("cannot normalize a field with zero power")
        return self.with_amplitudes(self.amplitudes / np.sqrt(p))

    def __add__(self, other: "SampledField") -> "SampledField":
        if other.grid != self.grid:
            raise SamplingError("fields live on different grids")
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def scaled(self, factor: complex) -> "SampledField":
        return self.with_amplitudes(self.amplitudes * factor)

    def overlap(self, other: "SampledField") -> complex:
        """Inner product ``<self|other>`` on a shared grid."""
        if other.grid != self.grid:
            raise SamplingError("fields live on different grids")
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_area)


def fidelity(a: SampledField, b: SampledField) -> float:
    """``|<a|b>|^2 / (|a|^2 |b|^2)``; insensitive to global phase."""
    return abs(a.overlap(b)) ** 2 / (a.power * b.power)


def relative_l2_modulo_phase(a: np.ndarray, b: np.ndarray) -> float:
    """``||a - e^{i phi} b|| / ||a||`` with the best-fit global phase ``phi``."""
    inner = np.vdot(b, a)
    phase = inner / abs(inner) if abs(inner) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b) / np.linalg.norm(a))


__all__ += ["fidelity", "relative_l2_modulo_phase"]
