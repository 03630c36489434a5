"""Laguerre-Gaussian modes: evaluation, sampling, superposition and decomposition.

Phase conventions (used everywhere in the package):

* carrier ``exp(-ikz)`` is factored out of every field;
* wavefront curvature ``exp(-ik rho^2 / 2R)``;
* azimuthal phase ``exp(-i l phi)``;
* Gouy phase ``exp(+i (2p + |l| + 1) psi)`` with ``psi = arctan((z - z0) / zR)``.

The last sign is the one the Collins kernel produces under the ``exp(-ikz)``
carrier, so analytic modes and numerically propagated fields agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import GridSpec, SampledField, SamplingError

__all__ = [
    "LGIndex",
    "BeamGeometry",
    "ModeCoefficients",
    "laguerre_polynomial",
    "lg_field",
    "mode_radius",
    "sample_mode",
    "superpose",
    "dft6_matrix",
    "dft6_coefficients",
    "DFT6_BASIS",
    "decompose",
    "reconstruct",
    "conjugate_superposition",
    "count_azimuthal_maxima",
    "DEFAULT_WAVELENGTH",
    "DEFAULT_WAIST",
]

DEFAULT_WAVELENGTH = 780e-9
DEFAULT_WAIST = 0.75e-3


@dataclass(frozen=True, order=True)
class LGIndex:
    p: int
    l: int

    def __post_init__(self):
        if self.p < 0 or int(self.p) != self.p or int(self.l) != self.l:
            raise ValueError(f"invalid LG index (p={self.p}, l={self.l})")

    @property
    def order(self) -> int:
        """Transverse mode order ``2p + |l|``."""
        return 2 * self.p + abs(self.l)

    def __str__(self):
        return f"LG(p={self.p}, l={self.l:+d})"


@dataclass(frozen=True)
class BeamGeometry:
    """Gaussian beam parameters shared by a family of LG modes."""

    wavelength: float = DEFAULT_WAVELENGTH
    waist: float = DEFAULT_WAIST
    waist_position: float = 0.0

    @classmethod
    def from_q(cls, q: complex, wavelength: float, z: float = 0.0) -> "BeamGeometry":
        """Geometry whose complex beam parameter at plane ``z`` is ``q = (z - z0) + i zR``."""
        if not q.imag > 0:
            raise ValueError("beam parameter must have positive imaginary part")
        waist = math.sqrt(q.imag * wavelength / math.pi)
        return cls(wavelength=wavelength, waist=waist, waist_position=z - q.real)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist**2 / self.wavelength

    def q(self, z: float) -> complex:
        return complex(z - self.waist_position, self.rayleigh_range)

    def width(self, z: float) -> float:
        return self.waist * math.sqrt(1.0 + ((z - self.waist_position) / self.rayleigh_range) ** 2)

    def curvature(self, z: float) -> float:
        """``1 / R(z)``; zero at the waist."""
        dz = z - self.waist_position
        return dz / (dz * dz + self.rayleigh_range**2)

    def gouy(self, z: float) -> float:
        return math.atan((z - self.waist_position) / self.rayleigh_range)

    def propagated(self, matrix) -> "BeamGeometry":
        """Geometry after an ABCD map, referenced to a new plane at ``z = 0``."""
        return BeamGeometry.from_q(matrix.transform_q(self.q(0.0)), self.wavelength)


def laguerre_polynomial(p: int, alpha: float, x):
    """Generalized Laguerre polynomial ``L_p^alpha(x)`` by upward recurrence in ``p``."""
    if p < 0:
        raise ValueError("p must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for n in range(1, p):
        prev, cur = cur, ((2 * n + 1 + alpha - x) * cur - (n + alpha) * prev) / (n + 1)
    return cur if cur.ndim else float(cur)


def lg_field(index: LGIndex, geom: BeamGeometry, rho, phi, z: float = None, amplitude: float = 1.0):
    """Complex LG amplitude at polar points ``(rho, phi)`` in the plane ``z``.

    With ``amplitude=1`` the mode carries unit power.
    """
    z = geom.waist_position if z is None else z
    p, l = index.p, index.l
    al = abs(l)
    rho = np.asarray(rho, dtype=float)
    phi = np.asarray(phi, dtype=float)
    w = geom.width(z)
    norm = math.sqrt(2.0 * math.factorial(p) / (math.pi * math.factorial(al + p))) / w
    s = 2.0 * rho**2 / w**2
    radial = (np.sqrt(s)) ** al * laguerre_polynomial(p, al, s) * np.exp(-0.5 * s)
    phase = -0.5 * geom.k * rho**2 * geom.curvature(z) + (2 * p + al + 1) * geom.gouy(z) - l * phi
    return amplitude * norm * radial * np.exp(1j * phase)


def mode_radius(index: LGIndex, geom: BeamGeometry, z: float = None) -> float:
    """Effective radius ``w(z) sqrt(2p + |l| + 1)``."""
    z = geom.waist_position if z is None else z
    return geom.width(z) * math.sqrt(2 * index.p + abs(index.l) + 1)


def _check_resolution(index: LGIndex, geom: BeamGeometry, grid: GridSpec, z: float):
    radius = mode_radius(index, geom, z)
    if grid.pitch > radius / 8.0:
        raise SamplingError(
            f"{index} needs pitch <= {radius / 8.0:.3e} m (8 samples across the mode radius); grid has {grid.pitch:.3e} m"
        )
    if 0.5 * grid.window < radius:
        raise SamplingError(
            f"{index} has radius {radius:.3e} m but the grid half-window is only {0.5 * grid.window:.3e} m"
        )


def sample_mode(index: LGIndex, geom: BeamGeometry, grid: GridSpec, z: float = None) -> SampledField:
    """Rasterize a unit-power LG mode onto ``grid``."""
    z = geom.waist_position if z is None else z
    _check_resolution(index, geom, grid, z)
    rho, phi = grid.polar()
    return SampledField(grid, lg_field(index, geom, rho, phi, z), geom.wavelength)


@dataclass
class ModeCoefficients:
    """Complex amplitudes over LG modes sharing one beam geometry."""

    coefficients: dict = field(default_factory=dict)
    geometry: BeamGeometry = field(default_factory=BeamGeometry)

    def __post_init__(self):
        self.coefficients = {
            (k if isinstance(k, LGIndex) else LGIndex(*k)): complex(v) for k, v in dict(self.coefficients).items()
        }

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coefficients.values()))

    def normalized(self) -> "ModeCoefficients":
        n = math.sqrt(self.norm_squared)
        if n == 0:
            raise ValueError("cannot normalize all-zero coefficients")
        return ModeCoefficients({k: v / n for k, v in self.coefficients.items()}, self.geometry)

    def __getitem__(self, key) -> complex:
        key = key if isinstance(key, LGIndex) else LGIndex(*key)
        return self.coefficients.get(key, 0.0j)

    def indices(self) -> list:
        return sorted(self.coefficients)

    def vector(self, basis: Iterable[LGIndex]) -> np.ndarray:
        return np.array([self[b] for b in basis], dtype=complex)

    def populations(self) -> dict:
        return {k: abs(v) ** 2 for k, v in self.coefficients.items()}


def superpose(coeffs: ModeCoefficients, grid: GridSpec, z: float = None) -> SampledField:
    """Linear combination of sampled LG modes."""
    geom = coeffs.geometry
    total = np.zeros((grid.n, grid.n), dtype=complex)
    for idx, c in coeffs.coefficients.items():
        if c != 0:
            total += c * sample_mode(idx, geom, grid, z).amplitudes
    return SampledField(grid, total, geom.wavelength)


def conjugate_superposition(l: int, geom: BeamGeometry | None = None, sign: int = 1, p: int = 0) -> ModeCoefficients:
    """``(|+l> + sign |-l>) / sqrt(2)``."""
    geom = geom or BeamGeometry()
    r = 1 / math.sqrt(2)
    return ModeCoefficients({LGIndex(p, l): r, LGIndex(p, -l): sign * r}, geom)


DFT6_BASIS = tuple(LGIndex(0, l) for l in (+1, -1, +3, -3, +5, -5))


def dft6_matrix() -> np.ndarray:
    """6x6 matrix ``omega**(j k) / sqrt(6)`` with ``omega = exp(i pi / 3)``."""
    omega = np.exp(1j * np.pi / 3)
    j = np.arange(6)
    return omega ** np.outer(j, j) / np.sqrt(6)


def dft6_coefficients(j: int, geom: BeamGeometry | None = None) -> ModeCoefficients:
    """Row ``j`` of the six-state DFT over ``|+1>, |-1>, |+3>, |-3>, |+5>, |-5>``."""
    if not 0 <= j <= 5 or int(j) != j:
        raise IndexError(f"DFT row must be in 0..5 (got {j})")
    row = dft6_matrix()[j]
    return ModeCoefficients(dict(zip(DFT6_BASIS, row)), geom or BeamGeometry())


def decompose(field_: SampledField, basis: Iterable[LGIndex], geom: BeamGeometry, z: float = None) -> ModeCoefficients:
    """Project a sampled field onto LG modes by discrete overlap integrals.

    Warns when the captured power falls below 99% of the field power.
    """
    grid = field_.grid
    coeffs = {}
    for idx in basis:
        mode = sample_mode(idx, geom, grid, z)
        coeffs[idx] = mode.overlap(field_)
    result = ModeCoefficients(coeffs, geom)
    total = field_.power
    if total > 0 and result.norm_squared < 0.99 * total:
        warnings.warn(
            f"basis captures only {result.norm_squared / total:.4f} of the field power",
            RuntimeWarning,
            stacklevel=2,
        )
    return result


def reconstruct(coeffs: ModeCoefficients, grid: GridSpec, z: float = None) -> SampledField:
    return superpose(coeffs, grid, z)


def count_azimuthal_maxima(intensity: np.ndarray, grid: GridSpec, radius: float | None = None, samples: int = 1440,
                           rel_prominence: float = 0.05) -> int:
    """Count intensity maxima around the ring of peak azimuthally-averaged intensity.

    The ring radius defaults to the radius where the azimuthal mean of
    ``intensity`` peaks. Maxima below ``rel_prominence`` of the ring's
    intensity range are ignored.
    """
    intensity = np.asarray(intensity, dtype=float)
    x, y = grid.coordinates()
    if radius is None:
        rho = np.hypot(x - grid.center[0], y - grid.center[1])
        edges = np.arange(0.0, 0.5 * grid.window, grid.pitch)
        which = np.digitize(rho.ravel(), edges)
        sums = np.bincount(which, weights=intensity.ravel(), minlength=len(edges) + 1)
        counts = np.bincount(which, minlength=len(edges) + 1)
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)[1 : len(edges)]
        radius = edges[int(np.argmax(mean))] + 0.5 * grid.pitch
    phi = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    px = (radius * np.cos(phi) - grid.axis[0]) / grid.pitch
    py = (radius * np.sin(phi) - grid.axis[0]) / grid.pitch
    ring = map_coordinates(intensity, [py, px], order=3, mode="nearest")
    span = ring.max() - ring.min()
    if span <= rel_prominence * max(ring.max(), 1e-300):
        return 0
    left, right = np.roll(ring, 1), np.roll(ring, -1)
    peaks = np.flatnonzero((ring > left) & (ring >= right))
    # drop shallow ripples
    lo = ring.min()
    keep = [i for i in peaks if ring[i] - lo > rel_prominence * span]
    return len(keep)
