"""Paraxial ray-matrix algebra for ring resonators.

Matrices act on ``(y, theta)`` column vectors and are written in propagation
order from right to left. All lengths are in meters and frequencies in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

__all__ = [
    "OpticalDomainError",
    "RayMatrix",
    "ThickLensSpec",
    "EquivalentLens",
    "FreeSpace",
    "Lens",
    "Mirror",
    "CavityLayout",
    "DegeneracyReport",
    "Linewidth",
    "free_space_matrix",
    "thin_lens_matrix",
    "thick_lens_matrix",
    "equivalent_thin_lens",
    "degenerate_spacing",
    "compose",
    "degeneracy_metric",
    "free_spectral_range",
    "round_trip_survival",
    "cavity_linewidth",
    "circulation_factor",
    "finesse_from_survival",
    "LINEWIDTH_CONVENTIONS",
    "degenerate_ring",
    "displace_lens",
    "reference_lens",
    "DEGENERACY_TOL",
]

#: Gouy angle below which a round trip counts as degenerate (radians).
DEGENERACY_TOL = 1e-9


class OpticalDomainError(ValueError):
    """Raised for non-physical optical parameters."""


@dataclass(frozen=True)
class RayMatrix:
    """2x2 paraxial transfer matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> "RayMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, m) -> "RayMatrix":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __matmul__(self, other: "RayMatrix") -> "RayMatrix":
        # self applied after other
        return RayMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def half_trace(self) -> float:
        return 0.5 * (self.a + self.d)

    def allclose(self, other: "RayMatrix", atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol))

    def transform_q(self, q: complex) -> complex:
        """Apply the ABCD law to a complex beam parameter."""
        return (self.a * q + self.b) / (self.c * q + self.d)

    def eigen_q(self) -> complex:
        """Self-consistent beam parameter of a stable round-trip matrix.

        Raises
        ------
        OpticalDomainError
            If the matrix is unstable, degenerate (any beam reproduces
            itself), or has ``b == 0``.
        """
        report = degeneracy_metric(self)
        if not report.stable:
            raise OpticalDomainError("unstable round trip has no Gaussian eigenmode")
        if report.degenerate or self.b == 0.0:
            raise OpticalDomainError("degenerate round trip: every beam parameter is an eigenmode")
        inv_q = (self.d - self.a) / (2 * self.b) - 1j * math.sin(report.gouy_angle) / abs(self.b)
        return 1.0 / inv_q


def free_space_matrix(length: float) -> RayMatrix:
    return RayMatrix(1.0, float(length), 0.0, 1.0)


def thin_lens_matrix(focal_length: float) -> RayMatrix:
    return RayMatrix(1.0, 0.0, -1.0 / focal_length, 1.0)


@dataclass(frozen=True)
class ThickLensSpec:
    """Planoconvex lens: curved face of radius ``r`` followed by a flat face.

    Parameters
    ----------
    r : float
        Radius of curvature of the convex face (m), positive.
    h : float
        Center thickness (m).
    n2 : float
        Refractive index of the glass.
    n1 : float
        Refractive index of the ambient medium.
    clear_aperture_diameter : float
        Usable diameter (m).
    """

    r: float
    h: float
    n2: float
    n1: float = 1.0
    clear_aperture_diameter: float = 22.8e-3

    def validate(self) -> None:
        problems = []
        if not self.r > 0:
            problems.append(f"r must be > 0 (got {self.r})")
        if not self.h >= 0:
            problems.append(f"h must be >= 0 (got {self.h})")
        if not self.n2 > 0:
            problems.append(f"n2 must be > 0 (got {self.n2})")
        if not self.n1 >= 1:
            problems.append(f"n1 must be >= 1 (got {self.n1})")
        if not self.clear_aperture_diameter > 0:
            problems.append(f"clear_aperture_diameter must be > 0 (got {self.clear_aperture_diameter})")
        if problems:
            raise OpticalDomainError("; ".join(problems))


@dataclass(frozen=True)
class EquivalentLens:
    """Ideal thin lens followed by a free-space stretch."""

    focal_length: float
    equivalent_free_length: float

    def matrix(self) -> RayMatrix:
        return free_space_matrix(self.equivalent_free_length) @ thin_lens_matrix(self.focal_length)


def reference_lens() -> ThickLensSpec:
    """The planoconvex lens used in the 4-lens ring (r=38.9 mm, h=4 mm, n=1.51)."""
    return ThickLensSpec(r=38.9e-3, h=4.0e-3, n2=1.51, n1=1.0, clear_aperture_diameter=22.8e-3)


def thick_lens_matrix(lens: ThickLensSpec) -> RayMatrix:
    """Refraction at the curved face, transit through the glass, exit at the flat face."""
    lens.validate()
    n1, n2 = lens.n1, lens.n2
    curved = RayMatrix(1.0, 0.0, (n1 - n2) / (n2 * lens.r), n1 / n2)
    transit = free_space_matrix(lens.h)
    flat = RayMatrix(1.0, 0.0, 0.0, n2 / n1)
    return flat @ transit @ curved


def equivalent_thin_lens(lens: ThickLensSpec) -> EquivalentLens:
    """Factor the thick lens into ``FreeSpace(L_eq) @ ThinLens(f)``.

    The factorization exists whenever the lens has focusing power and ``d == 1``,
    which holds for the planoconvex matrix since its flat exit face leaves
    the angle unscaled after transit.
    """
    m = thick_lens_matrix(lens)
    if m.c == 0.0:
        raise OpticalDomainError("lens has no focusing power; no thin-lens factorization")
    f = -1.0 / m.c
    l_eq = m.b
    if not math.isclose(m.d, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise OpticalDomainError(f"matrix d={m.d} != 1; cannot factor as free space after thin lens")
    return EquivalentLens(focal_length=f, equivalent_free_length=l_eq)


def degenerate_spacing(lens: ThickLensSpec) -> float:
    """Air gap between adjacent lens surfaces that makes the ring degenerate."""
    eq = equivalent_thin_lens(lens)
    return 2.0 * eq.focal_length - eq.equivalent_free_length


def compose(path: Iterable[RayMatrix]) -> RayMatrix:
    """Compose matrices given in propagation order (first element hit first)."""
    path = list(path)
    if not path:
        raise ValueError("compose needs at least one matrix")
    return reduce(lambda acc, m: m @ acc, path[1:], path[0])


@dataclass(frozen=True)
class DegeneracyReport:
    gouy_angle: float  # nan when unstable
    degenerate: bool
    stable: bool
    half_trace: float


def degeneracy_metric(m: RayMatrix, tol: float = DEGENERACY_TOL) -> DegeneracyReport:
    """Round-trip Gouy angle ``arccos((a + d) / 2)`` and the derived flags."""
    half = m.half_trace
    # absorb roundoff of exactly-degenerate products
    if abs(abs(half) - 1.0) < 1e-13:
        half = math.copysign(1.0, half)
    if abs(half) > 1.0:
        return DegeneracyReport(math.nan, False, False, half)
    theta = math.acos(half)
    return DegeneracyReport(theta, theta < tol, True, half)


# -- cavity layout -------------------------------------------------------


@dataclass(frozen=True)
class FreeSpace:
    length: float
    index: float = 1.0

    def matrix(self) -> RayMatrix:
        return free_space_matrix(self.length)

    @property
    def optical_path(self) -> float:
        return self.index * self.length


@dataclass(frozen=True)
class Lens:
    """A lens element, either a thick planoconvex spec or an ideal equivalent lens.

    ``aperture_radius`` defaults to half the clear aperture for thick lenses;
    ``None`` means no clipping.
    """

    spec: Union[ThickLensSpec, EquivalentLens]
    transmittance: float = 1.0
    aperture_radius: float | None = None

    def matrix(self) -> RayMatrix:
        if isinstance(self.spec, ThickLensSpec):
            return thick_lens_matrix(self.spec)
        return self.spec.matrix()

    @property
    def optical_path(self) -> float:
        if isinstance(self.spec, ThickLensSpec):
            return self.spec.n2 * self.spec.h
        return self.spec.equivalent_free_length

    @property
    def clip_radius(self) -> float | None:
        if self.aperture_radius is not None:
            return self.aperture_radius
        if isinstance(self.spec, ThickLensSpec):
            return 0.5 * self.spec.clear_aperture_diameter
        return None


@dataclass(frozen=True)
class Mirror:
    """Flat mirror; contributes amplitude ``sqrt(R)`` and a phase of pi per bounce."""

    reflectivity: float
    transmittance: float | None = None

    def matrix(self) -> RayMatrix:
        return RayMatrix.identity()

    @property
    def optical_path(self) -> float:
        return 0.0

    @property
    def transmission(self) -> float:
        return 1.0 - self.reflectivity if self.transmittance is None else self.transmittance


Element = Union[FreeSpace, Lens, Mirror]


@dataclass(frozen=True)
class CavityLayout:
    """Closed loop of elements, listed in propagation order from the reference plane."""

    elements: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            for name in ("reflectivity", "transmittance"):
                v = getattr(el, name, None)
                if v is not None and not 0.0 <= v <= 1.0:
                    raise OpticalDomainError(f"{type(el).__name__}.{name}={v} outside [0, 1]")
            if isinstance(el, FreeSpace) and el.length < 0:
                raise OpticalDomainError(f"negative free-space length {el.length}")

    def round_trip_matrix(self) -> RayMatrix:
        if not self.elements:
            return RayMatrix.identity()
        return compose(el.matrix() for el in self.elements)

    @property
    def geometric_path(self) -> float:
        total = 0.0
        for el in self.elements:
            if isinstance(el, FreeSpace):
                total += el.length
            elif isinstance(el, Lens) and isinstance(el.spec, ThickLensSpec):
                total += el.spec.h
        return total

    @property
    def optical_path(self) -> float:
        return sum(el.optical_path for el in self.elements)

    @property
    def lenses(self) -> list:
        return [el for el in self.elements if isinstance(el, Lens)]

    @property
    def mirrors(self) -> list:
        return [el for el in self.elements if isinstance(el, Mirror)]

    def rotated(self, k: int) -> "CavityLayout":
        k %= max(len(self.elements), 1)
        return CavityLayout(self.elements[k:] + self.elements[:k])


def degenerate_ring(
    lens: ThickLensSpec | None = None,
    reflectivities: Sequence[float] = (0.9999, 0.9999, 0.93, 0.93),
    lens_transmittance: float = 0.999,
    spacing: float | None = None,
    apertures: bool = True,
) -> CavityLayout:
    """Four-lens, four-mirror ring: ``[gap, mirror, lens] * 4``.

    The reference plane sits directly after the fourth lens, so every round
    trip starts and ends on a lens plane.
    """
    lens = lens or reference_lens()
    s = degenerate_spacing(lens) if spacing is None else spacing
    aperture = None if apertures else math.inf
    elements = []
    for refl in reflectivities:
        elements += [
            FreeSpace(s),
            Mirror(refl),
            Lens(lens, transmittance=lens_transmittance, aperture_radius=aperture),
        ]
    return CavityLayout(tuple(elements))


def displace_lens(layout: CavityLayout, lens_number: int, delta: float, convention: str = "symmetric") -> CavityLayout:
    """Perturb the ring around one lens by an axial error ``delta`` (m).

    ``"symmetric"`` lengthens both air gaps adjacent to the lens by ``delta``,
    equivalent to a lens whose focal plane pair is mis-set; this keeps the
    ring stable for either sign. ``"slide"`` moves the lens along the axis
    (upstream gap shortened, downstream lengthened); for the 4f ring this
    makes ``a + d > 2`` and the cavity unstable.
    """
    elements = list(layout.elements)
    lens_positions = [i for i, el in enumerate(elements) if isinstance(el, Lens)]
    pos = lens_positions[lens_number % len(lens_positions)]
    n = len(elements)

    def nearest_gap(step):
        i = (pos + step) % n
        while not isinstance(elements[i], FreeSpace):
            i = (i + step) % n
        return i

    up, down = nearest_gap(-1), nearest_gap(+1)
    if convention == "symmetric":
        changes = {up: delta, down: delta}
    elif convention == "slide":
        changes = {up: -delta, down: delta}
    else:
        raise ValueError(f"unknown displacement convention {convention!r}")
    for i, dl in changes.items():
        gap = elements[i]
        if gap.length + dl < 0:
            raise OpticalDomainError("displacement exceeds the available gap")
        elements[i] = FreeSpace(gap.length + dl, gap.index)
    return CavityLayout(tuple(elements))


def free_spectral_range(layout: CavityLayout) -> float:
    """``c / L0`` with ``L0`` the round-trip optical path."""
    if not layout.elements:
        raise OpticalDomainError("empty layout has no free spectral range")
    l0 = layout.optical_path
    if not l0 > 0:
        raise OpticalDomainError(f"round-trip optical path must be positive (got {l0})")
    return SPEED_OF_LIGHT / l0


def round_trip_survival(layout: CavityLayout) -> float:
    """Fraction of intracavity intensity left after one round trip."""
    rho = 1.0
    for el in layout.elements:
        if isinstance(el, Mirror):
            rho *= el.reflectivity
        elif isinstance(el, Lens):
            rho *= el.transmittance
    return rho


@dataclass(frozen=True)
class Linewidth:
    fwhm: float
    hwhm: float
    finesse: float
    survival: float
    fsr: float
    convention: str = "survival"

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.finesse)


LINEWIDTH_CONVENTIONS = ("survival", "field")


def circulation_factor(rho: float, convention: str = "survival") -> float:
    """Per-round-trip factor ``g`` entering the Airy function for survival ``rho``.

    ``"survival"`` uses ``g = rho`` (finesse ``pi sqrt(rho) / (1 - rho)``);
    ``"field"`` treats ``rho`` as an intensity fraction acting on the
    circulating field, ``g = sqrt(rho)``, which gives twice the finesse.
    """
    if convention == "survival":
        return rho
    if convention == "field":
        return math.sqrt(rho)
    raise ValueError(f"unknown linewidth convention {convention!r}; expected one of {LINEWIDTH_CONVENTIONS}")


def finesse_from_survival(rho: float, convention: str = "survival") -> float:
    """``pi sqrt(g) / (1 - g)``; infinite for ``rho >= 1``."""
    if rho >= 1.0:
        return math.inf
    g = circulation_factor(rho, convention)
    return math.pi * math.sqrt(g) / (1.0 - g)


def cavity_linewidth(layout: CavityLayout, convention: str = "survival") -> Linewidth:
    """Finesse and resonance width from the round-trip intensity survival.

    The Airy coefficient is ``4 g / (1 - g)**2`` with ``g`` chosen by
    :func:`circulation_factor`. A lossless cavity reports infinite finesse
    and zero width.
    """
    rho = round_trip_survival(layout)
    fsr = free_spectral_range(layout)
    if not 0.0 <= rho <= 1.0:
        raise OpticalDomainError(f"round-trip survival {rho} outside [0, 1]")
    circulation_factor(rho, convention)
    if rho >= 1.0:
        return Linewidth(0.0, 0.0, math.inf, rho, fsr, convention)
    finesse = finesse_from_survival(rho, convention)
    fwhm = fsr / finesse
    return Linewidth(fwhm, 0.5 * fwhm, finesse, rho, fsr, convention)
