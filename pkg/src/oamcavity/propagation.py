"""Wave-optics propagation of sampled fields through ABCD systems.

The Collins integral is evaluated with a single transform: multiply by the
input chirp, take a centered DFT, multiply by the output chirp. The output
pitch is ``wavelength * |B| / (n * pitch)``, so a grid sampled at
``sqrt(wavelength * |B| / n)`` maps onto itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.fft import fft2, fftshift, ifft2, ifftshift
from scipy.ndimage import map_coordinates

from .fields import GridSpec, SampledField, SamplingError, relative_l2_modulo_phase
from .ray_optics import CavityLayout, FreeSpace, Lens, Mirror, RayMatrix

__all__ = [
    "B_MIN",
    "AliasingError",
    "SingularMatrixError",
    "collins_propagate",
    "collins_direct",
    "imaging_limit",
    "propagate",
    "apply_aperture",
    "round_trip",
    "resample",
    "natural_pitch",
    "ring_grid",
    "segments",
    "FoxLiResult",
    "fox_li_dominant_mode",
]

#: Below this |B| (m) the chirp method degenerates; use the imaging limit.
B_MIN = 1e-6

_EDGE_SLACK = 1e-9


class AliasingError(SamplingError):
    """A quadratic phase changes by more than pi between neighbouring samples."""


class SingularMatrixError(ValueError):
    """The matrix is outside the domain of the requested propagator."""


def natural_pitch(wavelength: float, b: float, n: int) -> float:
    """Pitch for which the Collins output grid equals the input grid."""
    return math.sqrt(wavelength * abs(b) / n)


def _check_chirps(grid: GridSpec, m: RayMatrix, wavelength: float, out_pitch: float):
    n, dx = grid.n, grid.pitch
    lam_b = wavelength * abs(m.b)
    x_in = 0.5 * n * dx + max(abs(grid.center[0]), abs(grid.center[1]))
    # phase step of exp(-i pi A x^2 / (lambda B)) at the outermost sample, in units of pi
    step_in = 2 * abs(m.a) * x_in * dx / lam_b
    if step_in > 1 + _EDGE_SLACK:
        max_window = lam_b / (abs(m.a) * dx)
        raise AliasingError(
            f"input chirp aliased ({step_in:.3f} pi per sample at the grid edge); "
            f"maximum admissible window for this pitch is {max_window:.4e} m"
        )
    step_out = abs(m.d) * n * out_pitch**2 / lam_b
    if step_out > 1 + _EDGE_SLACK:
        min_pitch = math.sqrt(lam_b * abs(m.d) / n)
        raise AliasingError(
            f"output chirp aliased ({step_out:.3f} pi per sample at the grid edge); "
            f"input pitch must be >= {min_pitch:.4e} m (window {n * min_pitch:.4e} m)"
        )


def collins_propagate(field: SampledField, m: RayMatrix, path_length: float = 0.0,
                      check_sampling: bool = True) -> SampledField:
    """Propagate through an ABCD system with ``|B| > B_MIN``.

    Parameters
    ----------
    field : SampledField
        Input field; its grid may be off-center.
    m : RayMatrix
        Transfer matrix between the input and output planes.
    path_length : float
        Optical path (m) added to the tracked carrier phase as ``k * L``.

    Returns
    -------
    SampledField
        Field on a grid centered on the axis with pitch ``lambda |B| / (n pitch)``.
    """
    if abs(m.b) <= B_MIN:
        raise SingularMatrixError(f"|B| = {abs(m.b):.3e} m <= B_MIN; use imaging_limit")
    grid = field.grid
    lam = field.wavelength
    n, dx = grid.n, grid.pitch
    out_pitch = lam * abs(m.b) / (n * dx)
    if check_sampling:
        _check_chirps(grid, m, lam, out_pitch)
    out_grid = GridSpec(n, out_pitch)

    x0, y0 = grid.coordinates()
    g = field.amplitudes * np.exp(-1j * math.pi * m.a * (x0**2 + y0**2) / (lam * m.b))
    if m.b > 0:
        s = n * n * fftshift(ifft2(ifftshift(g)))
    else:
        s = fftshift(fft2(ifftshift(g)))
    x1, y1 = out_grid.coordinates()
    cx, cy = grid.center
    if cx or cy:
        s = s * np.exp(2j * math.pi * (cx * x1 + cy * y1) / (lam * m.b))
    out = (1j / (lam * m.b)) * dx * dx * np.exp(-1j * math.pi * m.d * (x1**2 + y1**2) / (lam * m.b)) * s
    return SampledField(out_grid, out, lam, field.axial_phase + field.k * path_length)


def collins_direct(field: SampledField, m: RayMatrix, out_grid: GridSpec | None = None) -> np.ndarray:
    """Brute-force double sum of the Collins integral (test oracle, small grids only)."""
    grid = field.grid
    lam = field.wavelength
    if out_grid is None:
        out_grid = GridSpec(grid.n, lam * abs(m.b) / (grid.n * grid.pitch))
    x0, y0 = (c.ravel() for c in grid.coordinates())
    x1, y1 = (c.ravel() for c in out_grid.coordinates())
    e0 = field.amplitudes.ravel()
    a, b, d = m.a, m.b, m.d
    out = np.empty(x1.size, dtype=complex)
    for i in range(x1.size):
        q = a * (x0**2 + y0**2) + d * (x1[i] ** 2 + y1[i] ** 2) - 2 * (x0 * x1[i] + y0 * y1[i])
        out[i] = np.sum(e0 * np.exp(-1j * math.pi * q / (lam * b)))
    out *= (1j / (lam * b)) * grid.cell_area
    return out.reshape(out_grid.n, out_grid.n)


def resample(field: SampledField, grid: GridSpec) -> SampledField:
    """Bilinear interpolation of real and imaginary parts onto ``grid`` (zero outside)."""
    if grid == field.grid:
        return field
    x, y = grid.coordinates()
    src = field.grid
    col = (x - src.center[0] - src.axis[0]) / src.pitch
    row = (y - src.center[1] - src.axis[0]) / src.pitch
    re = map_coordinates(field.amplitudes.real, [row, col], order=1, mode="constant", cval=0.0)
    im = map_coordinates(field.amplitudes.imag, [row, col], order=1, mode="constant", cval=0.0)
    return field.with_amplitudes(re + 1j * im, grid=grid)


def imaging_limit(field: SampledField, m: RayMatrix, path_length: float = 0.0) -> SampledField:
    """``B -> 0`` limit: ``E(x) -> E(x / A) exp(-ik C x^2 / 2A) / A`` on the same grid."""
    if abs(m.a) < 1e-9:
        raise SingularMatrixError(f"magnification A = {m.a:.3e} too small for the imaging limit")
    if abs(m.b) > B_MIN:
        raise SingularMatrixError(f"|B| = {abs(m.b):.3e} m > B_MIN; use collins_propagate")
    grid = field.grid
    phase = field.axial_phase + field.k * path_length
    if m.a == 1.0 and m.c == 0.0:
        return SampledField(grid, field.amplitudes, field.wavelength, phase)
    if m.a == 1.0:
        src = field.amplitudes
    else:
        x, y = grid.coordinates()
        col = (x / m.a - grid.center[0] - grid.axis[0]) / grid.pitch
        row = (y / m.a - grid.center[1] - grid.axis[0]) / grid.pitch
        re = map_coordinates(field.amplitudes.real, [row, col], order=1, mode="constant", cval=0.0)
        im = map_coordinates(field.amplitudes.imag, [row, col], order=1, mode="constant", cval=0.0)
        src = re + 1j * im
    x, y = grid.coordinates()
    out = src / m.a
    if m.c != 0.0:
        out = out * np.exp(-1j * field.k * m.c * (x**2 + y**2) / (2 * m.a))
    return SampledField(grid, out, field.wavelength, phase)


def propagate(field: SampledField, m: RayMatrix, path_length: float = 0.0) -> SampledField:
    """Dispatch to the Collins transform or the imaging limit by ``|B|``."""
    if abs(m.b) > B_MIN:
        return collins_propagate(field, m, path_length)
    return imaging_limit(field, m, path_length)


def apply_aperture(field: SampledField, radius: float):
    """Zero the field outside a centered circle; return ``(field, clipped_power_fraction)``."""
    if not radius > 0:
        raise ValueError("aperture radius must be positive")
    rho, _ = field.grid.polar()
    p_in = field.power
    out = field.with_amplitudes(np.where(rho <= radius, field.amplitudes, 0.0))
    clipped = 0.0 if p_in == 0 else min(max((p_in - out.power) / p_in, 0.0), 1.0)
    return out, clipped


@dataclass(frozen=True)
class Segment:
    """Lumped stretch between two aperture planes."""

    matrix: RayMatrix
    optical_path: float
    amplitude: complex
    aperture: float | None


def segments(layout: CavityLayout, apertures: bool = True, losses: bool = True) -> list:
    """Split a layout into Collins segments that end on each lens plane."""
    out = []
    m = RayMatrix.identity()
    path = 0.0
    amp = 1.0 + 0.0j
    for el in layout.elements:
        m = el.matrix() @ m
        path += el.optical_path
        if isinstance(el, Mirror):
            amp *= -(math.sqrt(el.reflectivity) if losses else 1.0)
        elif isinstance(el, Lens):
            if losses:
                amp *= math.sqrt(el.transmittance)
            radius = el.clip_radius if apertures else None
            if radius is not None and not math.isfinite(radius):
                radius = None
            out.append(Segment(m, path, amp, radius))
            m, path, amp = RayMatrix.identity(), 0.0, 1.0 + 0.0j
    if path or amp != 1.0 or not m.allclose(RayMatrix.identity(), atol=0.0):
        out.append(Segment(m, path, amp, None))
    return out


def admissible_pitch_range(layout: CavityLayout, wavelength: float, n: int) -> tuple:
    """Input pitches for which no Collins segment of a round trip aliases its chirps.

    Each segment maps pitch ``p`` to ``lambda |B| / (n p)`` and needs
    ``|D| lambda |B| / n <= p**2 <= lambda |B| / (n |A|)``; the bounds are
    carried back to the first segment. Returns ``(lo, hi)``, empty if ``lo > hi``.
    """
    lo, hi = 0.0, math.inf
    # pitch of the current segment's input as ``scale * p0**power``
    scale, power = 1.0, 1
    for seg in segments(layout):
        m = seg.matrix
        if abs(m.b) <= B_MIN:
            continue  # the imaging limit keeps the grid
        lam_b = wavelength * abs(m.b) / n
        p_lo = math.sqrt(abs(m.d) * lam_b)
        p_hi = math.sqrt(lam_b / abs(m.a)) if m.a != 0 else math.inf
        if power == 1:
            lo, hi = max(lo, p_lo / scale), min(hi, p_hi / scale)
        else:  # pitch = scale / p0
            lo = max(lo, scale / p_hi if math.isfinite(p_hi) else 0.0)
            hi = min(hi, scale / p_lo if p_lo > 0 else math.inf)
        scale, power = lam_b / scale, -power
    return lo, hi


def ring_grid(layout: CavityLayout, wavelength: float, n: int = 512) -> GridSpec:
    """Grid for round trips of ``layout``.

    Natural for the first Collins segment when that pitch keeps every
    segment free of chirp aliasing; otherwise the geometric centre of the
    admissible pitch range.
    """
    first = segments(layout)[0]
    pitch = natural_pitch(wavelength, first.matrix.b, n)
    lo, hi = admissible_pitch_range(layout, wavelength, n)
    if lo > hi * (1 + _EDGE_SLACK):
        raise AliasingError(f"no grid pitch samples every segment of this layout without aliasing (n={n})")
    if not lo * (1 - _EDGE_SLACK) <= pitch <= hi * (1 + _EDGE_SLACK):
        pitch = math.sqrt(lo * hi) if math.isfinite(hi) else 2 * lo
    return GridSpec(n, pitch)


def round_trip(field: SampledField, layout: CavityLayout, apertures: bool = True, losses: bool = True,
               match_input_grid: bool = False) -> SampledField:
    """Send ``field`` once around the cavity, clipping at each lens aperture.

    Mirrors contribute ``-sqrt(R)`` and lenses ``sqrt(T)`` as amplitude
    factors. With ``match_input_grid`` the result is resampled onto the input
    grid when the round-trip pitch differs.
    """
    current = field
    for seg in segments(layout, apertures, losses):
        current = propagate(current, seg.matrix, seg.optical_path)
        if seg.amplitude != 1.0:
            current = current.scaled(seg.amplitude)
        if seg.aperture is not None:
            current, _ = apply_aperture(current, seg.aperture)
    if match_input_grid and not math.isclose(current.grid.pitch, field.grid.pitch, rel_tol=1e-12):
        current = resample(current, field.grid)
    elif match_input_grid:
        current = current.with_amplitudes(current.amplitudes, grid=field.grid)
    return current


@dataclass(frozen=True)
class FoxLiResult:
    mode: SampledField
    round_trip_eigenvalue: complex
    iterations: int
    residual: float
    converged: bool


def fox_li_dominant_mode(layout: CavityLayout, seed: SampledField, max_iter: int = 500, tol: float = 1e-6,
                         apertures: bool = True, losses: bool = True) -> FoxLiResult:
    """Power iteration on the round-trip operator.

    The eigenvalue is the amplitude multiplier per round trip excluding the
    ``exp(-ik L0)`` carrier. For an exactly degenerate lossless ring every
    field is an eigenvector, so the seed comes back unchanged after one
    step. Non-convergence is reported through ``converged=False``.
    """
    if seed.power <= 0:
        raise ValueError("seed field has no power")
    current = seed.normalized()
    eigenvalue = 0.0j
    residual = math.inf
    for it in range(1, max_iter + 1):
        out = round_trip(current, layout, apertures, losses, match_input_grid=True)
        eigenvalue = current.overlap(out)
        if abs(eigenvalue) == 0:
            return FoxLiResult(current, eigenvalue, it, math.inf, False)
        residual = float(np.linalg.norm(out.amplitudes - eigenvalue * current.amplitudes)
                         / (abs(eigenvalue) * np.linalg.norm(current.amplitudes)))
        if residual < tol:
            return FoxLiResult(current, eigenvalue, it, residual, True)
        nxt = out.scaled(abs(eigenvalue) / eigenvalue).normalized()
        current = nxt.with_amplitudes(nxt.amplitudes, axial_phase=seed.axial_phase)
    return FoxLiResult(current, eigenvalue, max_iter, residual, False)


__all__ += ["Segment", "relative_l2_modulo_phase", "admissible_pitch_range"]
