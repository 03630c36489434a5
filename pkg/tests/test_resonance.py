import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamcavity.lg_modes import LGIndex, ModeCoefficients, conjugate_superposition
from oamcavity.ray_optics import (
    cavity_linewidth,
    degeneracy_metric,
    displace_lens,
    free_spectral_range,
    round_trip_survival,
)
from oamcavity.resonance import (
    NoRootError,
    ScanRamp,
    SpanError,
    UnstableCavityError,
    airy,
    count_peaks,
    default_ramp,
    dispersion_curve,
    displacement_for_threshold,
    gouy_angle,
    mode_offset,
    multipass_transmission,
    numerical_fwhm,
    peak_transmission,
    pzt_scan,
    resonant_frequencies,
    transmission_spectrum,
)

FSR = 480621445.80590974  # c / L0 for the default ring (exact rational inputs)
CALIBRATED_DELTA = 1.7187669163e-3


@pytest.fixture(scope="module")
def displaced(ring):
    return displace_lens(ring, 0, 1e-3)


@pytest.fixture(scope="module")
def calibrated(ring):
    return displace_lens(ring, 0, displacement_for_threshold(ring, 7, 12e6))


def test_resonances_spaced_by_fsr(ring):
    nu = resonant_frequencies(ring, LGIndex(0, 0), range(10))
    np.testing.assert_allclose(np.diff(nu), FSR, rtol=1e-12)


def test_degenerate_modes_share_resonance(ring):
    for idx in (LGIndex(0, 1), LGIndex(3, -7), LGIndex(0, 15)):
        assert mode_offset(ring, idx) == pytest.approx(0.0, abs=1e-3)
        np.testing.assert_allclose(resonant_frequencies(ring, idx, [3]), resonant_frequencies(ring, LGIndex(0, 0), [3]),
                                   atol=1e-3)


def test_offset_linear_in_order(displaced):
    theta = gouy_angle(displaced)
    assert theta == pytest.approx(0.013110633744292364, rel=1e-12)
    step = theta * free_spectral_range(displaced) / (2 * math.pi)
    for idx in (LGIndex(0, 1), LGIndex(0, -3), LGIndex(2, 5)):
        assert mode_offset(displaced, idx) == pytest.approx(idx.order * step, rel=1e-12)
    assert mode_offset(displaced, LGIndex(0, 4)) == mode_offset(displaced, LGIndex(0, -4))


def test_unstable_layout_raises(ring):
    with pytest.raises(UnstableCavityError):
        gouy_angle(displace_lens(ring, 0, 1e-3, convention="slide"))


def test_dispersion_degenerate_flat(ring):
    curve = dispersion_curve(ring, range(-15, 16))
    assert np.all(np.abs(curve.offset) < 1e-3)
    assert curve.inside_band().all() and curve.first_outside() is None
    assert curve.band == pytest.approx(cavity_linewidth(ring).hwhm)


def test_dispersion_calibrated_crossing(calibrated):
    curve = dispersion_curve(calibrated, range(-15, 16))
    assert curve.first_outside() == 7
    assert curve.offset[curve.l == 7][0] == pytest.approx(12e6, rel=1e-6)
    assert curve.offset[curve.l == 6][0] < curve.band < curve.offset[curve.l == 7][0]
    lo, hi = curve.band_edges
    assert lo == -hi and len(curve.rows()) == 31


def test_threshold_displacement_value(ring):
    delta = displacement_for_threshold(ring, 7, 12e6)
    assert delta == pytest.approx(CALIBRATED_DELTA, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 15), st.floats(1e6, 40e6))
def test_threshold_root_is_consistent(l_star, threshold):
    from oamcavity import degenerate_ring
    ring = degenerate_ring()
    delta = displacement_for_threshold(ring, l_star, threshold)
    offset = mode_offset(displace_lens(ring, 0, delta), LGIndex(0, l_star))
    assert offset == pytest.approx(threshold, rel=1e-6)


def test_threshold_unreachable(ring):
    with pytest.raises(NoRootError):
        displacement_for_threshold(ring, 1, 10 * FSR)
    with pytest.raises(ValueError):
        displacement_for_threshold(ring, 0, 1e6)


def test_linewidth_values(ring):
    lw = cavity_linewidth(ring)
    assert lw.fsr == pytest.approx(FSR, rel=1e-12)
    assert lw.finesse == pytest.approx(21.0165, abs=1e-4)
    assert lw.hwhm == pytest.approx(11.4344e6, rel=1e-4)
    field = cavity_linewidth(ring, convention="field")
    assert field.finesse == pytest.approx(42.0623, abs=1e-4)
    assert field.fwhm == pytest.approx(11.4264e6, rel=1e-4)


@pytest.mark.parametrize("convention", ["survival", "field"])
def test_multipass_sum_matches_airy(ring, convention):
    fsr, rho = free_spectral_range(ring), round_trip_survival(ring)
    nu = np.linspace(-0.6 * fsr, 0.6 * fsr, 2001)
    lw = cavity_linewidth(ring, convention)
    np.testing.assert_allclose(multipass_transmission(nu, fsr, rho, convention=convention),
                               airy(nu, fsr, lw.finesse), atol=1e-12)
    assert numerical_fwhm(ring, convention=convention) == pytest.approx(lw.fwhm, rel=1e-2)


def test_peak_transmission(ring):
    # T1 T2 / (1 - sqrt(rho))^2 with T1 = T2 = 0.07 and rho = 0.861273...
    g = math.sqrt(round_trip_survival(ring))
    assert peak_transmission(ring) == pytest.approx(0.07 * 0.07 / (1 - g) ** 2, rel=1e-12)
    assert peak_transmission(ring) == pytest.approx(0.9465, abs=5e-5)


def test_spectrum_two_peaks_weighted(calibrated):
    coeffs = ModeCoefficients({(0, 0): math.sqrt(0.3), (0, 1): math.sqrt(0.7)})
    sp = transmission_spectrum(calibrated, coeffs, (-30e6, 40e6), samples=14001)
    centers = sorted(p.center for p in sp.peaks)
    assert len(centers) == 2
    assert centers[1] - centers[0] == pytest.approx(12e6 / 7, rel=1e-6)
    heights = {p.index: p.height for p in sp.peaks}
    t_max = peak_transmission(calibrated)
    assert heights[LGIndex(0, 0)] == pytest.approx(0.3 * t_max)
    assert heights[LGIndex(0, 1)] == pytest.approx(0.7 * t_max)


def test_spectrum_l7_separates_by_threshold(calibrated):
    coeffs = ModeCoefficients({(0, 0): 1.0, (0, 7): 1.0})
    sp = transmission_spectrum(calibrated, coeffs, (-20e6, 30e6), samples=50001)
    centers = sorted(p.center for p in sp.peaks)
    assert centers[1] - centers[0] == pytest.approx(12e6, rel=1e-6)
    assert centers[1] > cavity_linewidth(calibrated).hwhm

    def maxima(tr):
        return len(np.flatnonzero((tr[1:-1] > tr[:-2]) & (tr[1:-1] > tr[2:])))

    # just past one half width the two peaks still blend; the narrower field-convention peaks resolve
    assert maxima(sp.transmission) == 1
    narrow = transmission_spectrum(calibrated, coeffs, (-20e6, 30e6), samples=50001, convention="field")
    assert maxima(narrow.transmission) == 2


def test_spectrum_is_fsr_periodic(displaced):
    fsr = free_spectral_range(displaced)
    coeffs = conjugate_superposition(3)
    a = transmission_spectrum(displaced, coeffs, (-5e6, 5e6), samples=401)
    b = transmission_spectrum(displaced, coeffs, (fsr - 5e6, fsr + 5e6), samples=401)
    np.testing.assert_allclose(a.transmission, b.transmission, atol=1e-9)


def test_clip_loss_broadens_peak(ring):
    coeffs = ModeCoefficients({(0, 0): 1.0})
    clean = transmission_spectrum(ring, coeffs, (-20e6, 20e6), samples=4001)
    lossy = transmission_spectrum(ring, coeffs, (-20e6, 20e6), samples=4001, clip_fractions={LGIndex(0, 0): 0.05})
    assert lossy.transmission[2000] == clean.transmission[2000]
    assert lossy.transmission[2600] > clean.transmission[2600]


def test_ramp_shape():
    ramp = ScanRamp(0.1, 2e-6)
    t = np.array([0.0, 0.025, 0.05, 0.075])
    np.testing.assert_allclose(ramp.length_change(t), [-1e-6, 0.0, 1e-6, 0.0], atol=1e-18)
    with pytest.raises(ValueError):
        ScanRamp(0.1, -1.0)


def test_scan_reference_coincides_at_zero_offset(ring):
    ramp = default_ramp(ring, 780e-9)
    sp = pzt_scan(ring, ModeCoefficients({(0, 0): 1.0}), ramp, 0.0, 780e-9, samples=20000)
    np.testing.assert_allclose(sp.reference, sp.transmission, atol=1e-12)
    sig = sorted(p.center for p in sp.peaks if p.tone == "signal")
    ref = sorted(p.center for p in sp.peaks if p.tone == "reference")
    np.testing.assert_allclose(sig, ref, atol=1e-15)


def test_scan_time_offset_matches_frequency_offset(calibrated):
    ramp = default_ramp(calibrated, 780e-9)
    sp = pzt_scan(calibrated, ModeCoefficients({(0, 7): 1.0}), ramp, 0.0, 780e-9)
    nu = 299792458.0 / 780e-9
    rate = nu * ramp.amplitude / calibrated.optical_path / (0.5 * ramp.period)
    sig = sorted(p.center for p in sp.peaks if p.tone == "signal")
    ref = sorted(p.center for p in sp.peaks if p.tone == "reference")
    # rising slope: the l = 7 resonance is hit later by 12 MHz / rate
    assert sig[0] - ref[0] == pytest.approx(12e6 / rate, rel=1e-6)


def test_scan_mirror_symmetric(displaced):
    ramp = default_ramp(displaced, 780e-9)
    sp = pzt_scan(displaced, conjugate_superposition(2), ramp, 3e6, 780e-9, samples=20000)
    tr = sp.transmission
    np.testing.assert_allclose(tr[1:], tr[1:][::-1], atol=1e-9)


def test_scan_span_error(ring):
    with pytest.raises(SpanError):
        pzt_scan(ring, ModeCoefficients({(0, 0): 1.0}), default_ramp(ring, 780e-9, span_fsr=0.5), 0.0, 780e-9,
                 span_fsr=1.0)


def test_count_peaks():
    x = np.linspace(0, 1, 1000)
    assert count_peaks(np.exp(-((x - 0.3) / 0.01) ** 2) + np.exp(-((x - 0.7) / 0.01) ** 2)) == 2
    assert count_peaks(np.zeros(10)) == 0


def test_gouy_angle_matches_metric(displaced):
    assert gouy_angle(displaced) == degeneracy_metric(displaced.round_trip_matrix()).gouy_angle
