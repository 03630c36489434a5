"""Frequency-domain cavity model: mode-resolved resonances, dispersion, Airy spectra, PZT scans.

Offsets are measured from the fundamental ``(p=0, l=0)`` resonance of the same
longitudinal order. Lengthening the cavity lowers every resonance frequency,
``d nu = -nu dL / L0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import brentq

from .lg_modes import LGIndex, ModeCoefficients
from .ray_optics import (
    CavityLayout,
    Mirror,
    OpticalDomainError,
    cavity_linewidth,
    circulation_factor,
    finesse_from_survival,
    degeneracy_metric,
    displace_lens,
    equivalent_thin_lens,
    free_spectral_range,
    round_trip_survival,
)

__all__ = [
    "UnstableCavityError",
    "NoRootError",
    "SpanError",
    "gouy_angle",
    "resonant_frequencies",
    "mode_offset",
    "DispersionCurve",
    "dispersion_curve",
    "displacement_for_threshold",
    "airy",
    "peak_transmission",
    "multipass_transmission",
    "numerical_fwhm",
    "Peak",
    "Spectrum",
    "transmission_spectrum",
    "ScanRamp",
    "default_ramp",
    "pzt_scan",
    "count_peaks",
]


class UnstableCavityError(OpticalDomainError):
    pass


class NoRootError(ValueError):
    pass


class SpanError(ValueError):
    pass


def gouy_angle(layout: CavityLayout) -> float:
    report = degeneracy_metric(layout.round_trip_matrix())
    if not report.stable:
        raise UnstableCavityError(f"round trip unstable: (A+D)/2 = {report.half_trace:.12f}")
    return report.gouy_angle


def resonant_frequencies(layout: CavityLayout, mode: LGIndex, n_window: Iterable[int]) -> np.ndarray:
    """``nu_n = FSR (n + (2p + |l| + 1) theta / 2pi)`` for each longitudinal order ``n``."""
    theta = gouy_angle(layout)
    fsr = free_spectral_range(layout)
    n = np.asarray(list(n_window), dtype=float)
    return fsr * (n + (mode.order + 1) * theta / (2 * math.pi))


def mode_offset(layout: CavityLayout, mode: LGIndex) -> float:
    """Frequency offset of ``mode`` from the co-scanned fundamental resonance."""
    theta = gouy_angle(layout)
    return mode.order * theta * free_spectral_range(layout) / (2 * math.pi)


@dataclass
class DispersionCurve:
    """Offset versus topological charge with the linewidth band ``|offset| <= band`` (band = HWHM)."""

    l: np.ndarray
    offset: np.ndarray
    band: float
    p: int = 0
    label: str = ""

    @property
    def band_edges(self):
        return (-self.band, self.band)

    def inside_band(self) -> np.ndarray:
        return np.abs(self.offset) <= self.band

    def first_outside(self) -> int | None:
        """Smallest ``|l|`` whose offset leaves the band, or ``None``."""
        outside = sorted(abs(int(l)) for l, ok in zip(self.l, self.inside_band()) if not ok)
        return outside[0] if outside else None

    def rows(self):
        lo, hi = self.band_edges
        return [(int(l), float(o), lo, hi) for l, o in zip(self.l, self.offset)]


def dispersion_curve(layout: CavityLayout, l_range: Iterable[int], p: int = 0, label: str = "",
                     convention: str = "survival") -> DispersionCurve:
    ls = np.array(sorted(set(int(l) for l in l_range)))
    offsets = np.array([mode_offset(layout, LGIndex(p, int(l))) for l in ls])
    band = cavity_linewidth(layout, convention).hwhm
    return DispersionCurve(ls, offsets, band, p, label)


def displacement_for_threshold(layout: CavityLayout, l_star: int, threshold: float, lens_number: int = 0,
                               convention: str = "symmetric", rtol: float = 1e-6) -> float:
    """Lens displacement that puts mode ``(0, l_star)`` exactly ``threshold`` Hz off resonance.

    Searches ``delta`` in ``(0, f/2)``; raises :class:`NoRootError` if the
    threshold is not reached while the ring stays stable.
    """
    if l_star < 1:
        raise ValueError("l_star must be >= 1")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    lens = layout.lenses[lens_number % len(layout.lenses)].spec
    f = getattr(lens, "focal_length", None) or equivalent_thin_lens(lens).focal_length
    target = LGIndex(0, l_star)

    def excess(delta):
        perturbed = displace_lens(layout, lens_number, delta, convention)
        try:
            return mode_offset(perturbed, target) - threshold
        except UnstableCavityError:
            return math.nan

    hi_limit = 0.5 * f
    grid = np.geomspace(hi_limit * 1e-9, hi_limit, 400)
    prev_d, prev_v = 0.0, -threshold
    for d in grid:
        v = excess(d)
        if math.isnan(v):
            break
        if v >= 0:
            return brentq(excess, prev_d, d, xtol=1e-15, rtol=rtol * 1e-3)
        prev_d, prev_v = d, v
    raise NoRootError(f"offset {threshold:.4g} Hz for l={l_star} not reachable with delta in (0, {hi_limit:.4g}) m")


# -- spectra -------------------------------------------------------------


def airy(detuning, fsr: float, finesse: float, t_max: float = 1.0):
    """Airy transmission ``t_max / (1 + (2F/pi)^2 sin^2(pi detuning / FSR))``."""
    detuning = np.asarray(detuning, dtype=float)
    coeff = (2 * finesse / math.pi) ** 2
    return t_max / (1.0 + coeff * np.sin(math.pi * detuning / fsr) ** 2)


def _couplers(layout: CavityLayout):
    mirrors = sorted(layout.mirrors, key=lambda m: m.reflectivity)
    if len(mirrors) >= 2:
        return mirrors[0].transmission, mirrors[1].transmission
    if len(mirrors) == 1:
        return mirrors[0].transmission, mirrors[0].transmission
    return 1.0, 1.0


def peak_transmission(layout: CavityLayout) -> float:
    """On-resonance power transmission, coupling in and out through the two leakiest mirrors.

    Uses the field factor ``sqrt(rho)`` regardless of the linewidth convention;
    it only scales the spectra.
    """
    t_in, t_out = _couplers(layout)
    g = math.sqrt(round_trip_survival(layout))
    if g >= 1.0:
        return 1.0
    return min(t_in * t_out / (1.0 - g) ** 2, 1.0)


def multipass_transmission(detuning, fsr: float, survival: float, t_max: float = 1.0, passes: int | None = None,
                           convention: str = "survival"):
    """Sum the circulating partial waves explicitly: ``|sum_n (g e^{-i delta})^n|^2``, normalized to ``t_max``.

    Independent of the closed-form Airy expression; ``g`` follows
    :func:`circulation_factor` and ``passes`` defaults to enough terms for
    the truncated tail to be below 1e-16.
    """
    detuning = np.asarray(detuning, dtype=float)
    g = circulation_factor(survival, convention)
    if passes is None:
        passes = int(math.ceil(math.log(1e-16) / math.log(g))) + 1 if 0 < g < 1 else 1
    step = np.exp(-2j * math.pi * detuning / fsr)
    total = np.zeros_like(step)
    term = np.ones_like(step)
    for _ in range(passes):
        total += term
        term = term * g * step
    peak = (1.0 / (1.0 - g)) ** 2
    return t_max * np.abs(total) ** 2 / peak


def numerical_fwhm(layout: CavityLayout, samples: int = 200001, convention: str = "survival") -> float:
    """FWHM of the fundamental peak found by scanning the multi-pass sum."""
    fsr = free_spectral_range(layout)
    rho = round_trip_survival(layout)
    nu = np.linspace(-0.5 * fsr, 0.5 * fsr, samples)
    t = multipass_transmission(nu, fsr, rho, convention=convention)
    half = 0.5 * t.max()
    above = np.flatnonzero(t >= half)
    i0, i1 = above[0], above[-1]

    def cross(i, j):
        return nu[i] + (half - t[i]) * (nu[j] - nu[i]) / (t[j] - t[i])

    return float(cross(i1, i1 + 1) - cross(i0 - 1, i0))


@dataclass(frozen=True)
class Peak:
    index: LGIndex
    center: float
    height: float
    tone: str = "signal"


@dataclass
class Spectrum:
    """Transmission sampled on a detuning (Hz) or time (s) axis."""

    axis: np.ndarray
    transmission: np.ndarray
    axis_kind: str = "detuning"
    peaks: list = field(default_factory=list)
    reference: np.ndarray | None = None
    ramp: np.ndarray | None = None


def _mode_survival(layout: CavityLayout, clip_fractions, idx: LGIndex) -> float:
    rho = round_trip_survival(layout)
    if clip_fractions and idx in clip_fractions:
        rho *= 1.0 - clip_fractions[idx]
    return rho


def transmission_spectrum(layout: CavityLayout, input_modes: ModeCoefficients, detuning_range: Sequence[float],
                          samples: int = 4001, clip_fractions: dict | None = None,
                          convention: str = "survival") -> Spectrum:
    """Mode-weighted sum of Airy peaks over a detuning window.

    ``clip_fractions`` optionally maps modes to the aperture power loss per
    round trip, lowering their finesse.
    """
    rho = round_trip_survival(layout)
    if not 0.0 < rho < 1.0:
        raise OpticalDomainError(f"round-trip survival {rho} must lie in (0, 1) for a finite spectrum")
    fsr = free_spectral_range(layout)
    t_max = peak_transmission(layout)
    lo, hi = detuning_range
    nu = np.linspace(lo, hi, samples)
    total = np.zeros_like(nu)
    peaks = []
    norm = input_modes.norm_squared
    for idx, c in sorted(input_modes.coefficients.items()):
        weight = abs(c) ** 2 / norm
        if weight == 0:
            continue
        rho_m = _mode_survival(layout, clip_fractions, idx)
        offset = mode_offset(layout, idx)
        total += weight * airy(nu - offset, fsr, finesse_from_survival(rho_m, convention), t_max)
        k_lo = math.ceil((lo - offset) / fsr)
        k_hi = math.floor((hi - offset) / fsr)
        for k in range(k_lo, k_hi + 1):
            peaks.append(Peak(idx, offset + k * fsr, weight * t_max))
    return Spectrum(nu, np.clip(total, 0.0, 1.0), "detuning", peaks)


@dataclass(frozen=True)
class ScanRamp:
    """Triangular cavity-length ramp: up over the first half period, down over the second."""

    period: float
    amplitude: float  # peak-to-peak length change (m)
    shape: str = "triangular"

    def __post_init__(self):
        if not self.amplitude > 0 or not self.period > 0:
            raise ValueError("ramp period and amplitude must be positive")
        if self.shape != "triangular":
            raise ValueError("only triangular ramps are modelled")

    def length_change(self, t):
        """Length change in ``[-amplitude/2, +amplitude/2]`` at time ``t``."""
        phase = np.mod(np.asarray(t, dtype=float) / self.period, 1.0)
        tri = np.where(phase < 0.5, 4 * phase - 1, 3 - 4 * phase)
        return 0.5 * self.amplitude * tri


def default_ramp(layout: CavityLayout, wavelength: float, span_fsr: float = 1.5, rate: float = 10.0) -> ScanRamp:
    """10 Hz ramp whose length excursion sweeps ``span_fsr`` free spectral ranges."""
    nu = SPEED_OF_LIGHT / wavelength
    amplitude = span_fsr * free_spectral_range(layout) * layout.optical_path / nu
    return ScanRamp(1.0 / rate, amplitude)


def pzt_scan(layout: CavityLayout, input_modes: ModeCoefficients, ramp: ScanRamp, reference_offset: float,
             wavelength: float, samples: int = 20000, periods: int = 1, span_fsr: float | None = None,
             clip_fractions: dict | None = None, convention: str = "survival") -> Spectrum:
    """Transmission of signal and reference tones versus time under a PZT length ramp.

    The signal laser sits on the fundamental resonance at zero length
    change; the reference tone is ``reference_offset`` Hz above it.
    """
    fsr = free_spectral_range(layout)
    l0 = layout.optical_path
    nu = SPEED_OF_LIGHT / wavelength
    covered = nu * ramp.amplitude / l0 / fsr
    if span_fsr is not None and covered < span_fsr:
        raise SpanError(f"ramp covers {covered:.3f} FSR, {span_fsr} requested")
    rho = round_trip_survival(layout)
    if not 0.0 < rho < 1.0:
        raise OpticalDomainError(f"round-trip survival {rho} must lie in (0, 1)")
    t_max = peak_transmission(layout)
    t = np.arange(samples * periods) * (ramp.period / samples)
    dl = ramp.length_change(t)
    sweep = nu * dl / l0  # laser detuning from the unperturbed fundamental resonance
    reference = airy(sweep + reference_offset, fsr, finesse_from_survival(rho, convention), t_max)
    signal = np.zeros_like(t)
    peaks = []
    norm = input_modes.norm_squared
    rate = nu * (ramp.amplitude / l0) / (0.5 * ramp.period)
    for idx, c in sorted(input_modes.coefficients.items()):
        weight = abs(c) ** 2 / norm
        if weight == 0:
            continue
        offset = mode_offset(layout, idx)
        signal += weight * airy(sweep - offset, fsr,
                                finesse_from_survival(_mode_survival(layout, clip_fractions, idx), convention), t_max)
        peaks += _crossing_peaks(idx, offset, weight * t_max, ramp, rate, fsr, periods, "signal")
    peaks += _crossing_peaks(LGIndex(0, 0), -reference_offset, t_max, ramp, rate, fsr, periods, "reference")
    return Spectrum(t, np.clip(signal, 0.0, 1.0), "time", sorted(peaks, key=lambda p: p.center),
                    np.clip(reference, 0.0, 1.0), dl)


def _crossing_peaks(idx, offset, height, ramp: ScanRamp, rate, fsr, periods, tone):
    half_span = 0.5 * rate * 0.5 * ramp.period
    peaks = []
    k_lo = math.ceil((-half_span - offset) / fsr)
    k_hi = math.floor((half_span - offset) / fsr)
    for k in range(k_lo, k_hi + 1):
        target = offset + k * fsr  # sweep value at which this resonance is hit
        t_up = (target + half_span) / rate
        for n in range(periods):
            base = n * ramp.period
            peaks.append(Peak(idx, base + t_up, height, tone))
            peaks.append(Peak(idx, base + ramp.period - t_up, height, tone))
    return peaks


def count_peaks(trace: np.ndarray, rel_height: float = 0.5) -> int:
    """Number of local maxima above ``rel_height`` of the trace maximum."""
    trace = np.asarray(trace, dtype=float)
    if trace.max() <= 0:
        return 0
    thr = rel_height * trace.max()
    above = trace >= thr
    # count contiguous runs above threshold
    edges = np.diff(above.astype(int))
    runs = int(np.sum(edges == 1)) + int(above[0])
    return runs
