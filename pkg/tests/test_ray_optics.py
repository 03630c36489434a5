import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamcavity.ray_optics import (
    CavityLayout,
    FreeSpace,
    Lens,
    Mirror,
    OpticalDomainError,
    RayMatrix,
    ThickLensSpec,
    cavity_linewidth,
    compose,
    degeneracy_metric,
    degenerate_ring,
    degenerate_spacing,
    displace_lens,
    equivalent_thin_lens,
    free_space_matrix,
    free_spectral_range,
    round_trip_survival,
    thick_lens_matrix,
    thin_lens_matrix,
)

# Frozen from a symbolic expansion of the three-matrix product (sympy, exact rationals).
REF_MATRIX = (0.96527009312381893, 0.0026490066225165563, -13.110539845758355, 1.0)
REF_F = 0.076274509803921569
REF_LEQ = 0.0026490066225165563
REF_S = 0.14990001298532658
REF_FSR = 480621445.80590974

lenses = st.builds(
    ThickLensSpec,
    r=st.floats(1e-3, 1.0),
    h=st.floats(0.0, 0.05),
    n2=st.floats(1.05, 3.0),
    n1=st.floats(1.0, 1.04),
)


def test_thick_lens_matches_symbolic_expansion(lens):
    m = thick_lens_matrix(lens)
    np.testing.assert_allclose([m.a, m.b, m.c, m.d], REF_MATRIX, rtol=1e-14)
    assert m.c == pytest.approx(-(1.51 - 1) / 38.9e-3, rel=1e-14)
    assert m.b == pytest.approx(4.0e-3 / 1.51, rel=1e-14)


def test_zero_thickness_is_thin_lens():
    m = thick_lens_matrix(ThickLensSpec(r=0.05, h=0.0, n2=1.5))
    assert m.allclose(thin_lens_matrix(0.05 / 0.5), atol=1e-15)


def test_matched_index_is_plain_glass_transit():
    # no refraction: only the free-space transit through the slab remains
    m = thick_lens_matrix(ThickLensSpec(r=0.05, h=3e-3, n2=1.0, n1=1.0))
    assert m.allclose(free_space_matrix(3e-3), atol=1e-15)
    assert thick_lens_matrix(ThickLensSpec(r=0.05, h=0.0, n2=1.0)).allclose(RayMatrix.identity(), atol=0)


@pytest.mark.parametrize("kw", [dict(r=0.0), dict(r=-1e-3), dict(h=-1e-3), dict(n2=0.0), dict(n2=-1.5)])
def test_non_physical_lens_rejected(kw):
    spec = dict(r=0.04, h=4e-3, n2=1.5)
    spec.update(kw)
    with pytest.raises(OpticalDomainError):
        thick_lens_matrix(ThickLensSpec(**spec))


def test_equivalent_lens_reference_values(lens):
    eq = equivalent_thin_lens(lens)
    assert eq.focal_length == pytest.approx(REF_F, rel=1e-14)
    assert eq.equivalent_free_length == pytest.approx(REF_LEQ, rel=1e-14)
    assert eq.focal_length * 1e3 == pytest.approx(76.2745, abs=5e-5)
    assert eq.equivalent_free_length * 1e3 == pytest.approx(2.6490, abs=5e-5)


def test_equivalent_lens_simple_cases():
    f0 = 0.123
    assert equivalent_thin_lens(ThickLensSpec(r=0.5 * f0, h=2e-3, n2=1.5)).focal_length == pytest.approx(f0)
    a = equivalent_thin_lens(ThickLensSpec(r=0.04, h=3e-3, n2=1.6))
    b = equivalent_thin_lens(ThickLensSpec(r=0.04, h=6e-3, n2=1.6))
    assert b.equivalent_free_length == pytest.approx(2 * a.equivalent_free_length, rel=1e-14)
    assert b.focal_length == pytest.approx(a.focal_length, rel=1e-14)


def test_equivalent_lens_needs_power():
    with pytest.raises(OpticalDomainError):
        equivalent_thin_lens(ThickLensSpec(r=0.05, h=3e-3, n2=1.0))


def test_degenerate_spacing(lens):
    assert degenerate_spacing(lens) == pytest.approx(REF_S, rel=1e-14)
    assert degenerate_spacing(lens) * 1e3 == pytest.approx(149.900, abs=5e-4)
    thin = ThickLensSpec(r=0.04, h=0.0, n2=1.5)
    assert degenerate_spacing(thin) == pytest.approx(2 * 0.08, rel=1e-14)
    huge_index = ThickLensSpec(r=0.04 * 1e6, h=4e-3, n2=1e6 + 1)
    assert degenerate_spacing(huge_index) == pytest.approx(2 * 0.04, rel=1e-5)


@settings(max_examples=200, deadline=None)
@given(lenses)
def test_thick_lens_unit_determinant(lens):
    assert thick_lens_matrix(lens).determinant == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(lenses)
def test_equivalent_lens_recomposes(lens):
    m = thick_lens_matrix(lens).as_array()
    r = equivalent_thin_lens(lens).matrix().as_array()
    np.testing.assert_allclose(r, m, rtol=1e-12, atol=1e-15)


def test_compose_basics():
    i = RayMatrix.identity()
    assert compose([i, i]) == i
    assert compose([free_space_matrix(0.1), free_space_matrix(0.25)]).allclose(free_space_matrix(0.35), atol=1e-15)
    with pytest.raises(ValueError):
        compose([])


def test_compose_order_is_propagation_order():
    f, l = free_space_matrix(0.2), thin_lens_matrix(0.1)
    assert compose([f, l]) == l @ f
    assert compose([f, l]) != f @ l


matrices = st.builds(
    RayMatrix, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)
)


@settings(max_examples=100, deadline=None)
@given(matrices, matrices, matrices)
def test_compose_associative_and_determinant_multiplicative(a, b, c):
    left = (c @ b) @ a
    right = c @ (b @ a)
    np.testing.assert_allclose(left.as_array(), right.as_array(), rtol=1e-9, atol=1e-9)
    assert compose([a, b]).determinant == pytest.approx(a.determinant * b.determinant, rel=1e-9, abs=1e-9)


def test_degenerate_ring_is_identity(ring):
    m = ring.round_trip_matrix()
    assert m.allclose(RayMatrix.identity(), atol=1e-10)
    rep = degeneracy_metric(m)
    assert rep.stable and rep.degenerate and rep.gouy_angle == 0.0


def test_half_ring_inverts(lens):
    s = degenerate_spacing(lens)
    half = compose([free_space_matrix(s), thick_lens_matrix(lens)] * 2)
    # between equivalent planes the half ring images with magnification -1
    eq = equivalent_thin_lens(lens)
    shifted = free_space_matrix(-eq.equivalent_free_length) @ half @ free_space_matrix(eq.equivalent_free_length)
    assert shifted.allclose(RayMatrix(-1, 0, 0, -1), atol=1e-10)


def test_degeneracy_metric_cases():
    assert degeneracy_metric(RayMatrix.identity()).degenerate
    rep = degeneracy_metric(RayMatrix(0.5, 1.0, -0.75, -0.5))
    assert rep.gouy_angle == pytest.approx(math.pi / 2)
    assert not rep.degenerate
    unstable = degeneracy_metric(RayMatrix(2.0, 1.0, 1.0, 1.0))
    assert not unstable.stable and math.isnan(unstable.gouy_angle)


def test_displaced_ring_regression(ring):
    m = displace_lens(ring, 0, 1.0e-3).round_trip_matrix()
    rep = degeneracy_metric(m)
    assert rep.stable and not rep.degenerate
    # regression value from composing the perturbed ring
    assert rep.gouy_angle == pytest.approx(0.013110633744292364, rel=1e-9)
    # slope of theta with delta agrees with a central finite difference
    th = [degeneracy_metric(displace_lens(ring, 0, d).round_trip_matrix()).gouy_angle for d in (0.999e-3, 1.001e-3)]
    assert (th[1] - th[0]) / 2e-6 == pytest.approx(rep.gouy_angle / 1e-3, rel=1e-3)


def test_sliding_a_lens_destabilizes_the_ring(ring):
    for d in (1e-3, -1e-3):
        rep = degeneracy_metric(displace_lens(ring, 1, d, convention="slide").round_trip_matrix())
        assert not rep.stable


def test_free_spectral_range(ring):
    assert free_spectral_range(ring) == pytest.approx(REF_FSR, rel=1e-12)
    assert round(free_spectral_range(ring) / 1e6, 1) == 480.6
    one_hz = CavityLayout((FreeSpace(299792458.0),))
    assert free_spectral_range(one_hz) == pytest.approx(1.0)
    with pytest.raises(OpticalDomainError):
        free_spectral_range(CavityLayout(()))


def test_fsr_halves_when_lengths_double(lens):
    a = degenerate_ring(lens)
    big = ThickLensSpec(r=2 * lens.r, h=2 * lens.h, n2=lens.n2)
    b = degenerate_ring(big)
    assert free_spectral_range(b) == pytest.approx(0.5 * free_spectral_range(a), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 11), st.floats(-3e-3, 3e-3))
def test_fsr_rotation_invariant(k, delta):
    layout = displace_lens(degenerate_ring(), 2, delta)
    assert free_spectral_range(layout.rotated(k)) == pytest.approx(free_spectral_range(layout), rel=1e-13)


def test_round_trip_optical_path(ring, lens):
    s = degenerate_spacing(lens)
    assert ring.optical_path == pytest.approx(4 * s + 4 * lens.n2 * lens.h, rel=1e-14)
    assert ring.geometric_path == pytest.approx(4 * s + 4 * lens.h, rel=1e-14)


def test_reference_linewidth(ring):
    assert round_trip_survival(ring) == pytest.approx(0.9999**2 * 0.93**2 * 0.999**4, rel=1e-14)
    assert round(round_trip_survival(ring), 4) == 0.8613
    lw = cavity_linewidth(ring)
    rho = lw.survival
    assert lw.finesse == pytest.approx(math.pi * math.sqrt(rho) / (1 - rho), rel=1e-14)
    assert lw.finesse == pytest.approx(21.0165, abs=1e-4)
    assert lw.hwhm / 1e6 == pytest.approx(11.434, abs=1e-3)
    assert lw.fwhm * lw.finesse == pytest.approx(lw.fsr, rel=1e-9)
    assert lw.hwhm == 0.5 * lw.fwhm


def test_field_convention_doubles_finesse(ring):
    lw = cavity_linewidth(ring, convention="field")
    g = math.sqrt(lw.survival)
    assert lw.finesse == pytest.approx(math.pi * math.sqrt(g) / (1 - g), rel=1e-14)
    assert lw.fwhm / 1e6 == pytest.approx(11.426, abs=1e-3)
    with pytest.raises(ValueError):
        cavity_linewidth(ring, convention="amplitude")


def test_lossless_linewidth_unbounded():
    layout = CavityLayout((FreeSpace(0.5), Mirror(1.0), Lens(ThickLensSpec(0.04, 3e-3, 1.5), 1.0)))
    lw = cavity_linewidth(layout)
    assert not lw.bounded and lw.fwhm == 0.0


def test_heavy_loss_linewidth_approaches_fsr():
    layout = CavityLayout((FreeSpace(0.5), Mirror(1e-8)))
    lw = cavity_linewidth(layout)
    assert lw.finesse < 0.05
    assert lw.fwhm > lw.fsr


def test_layout_rejects_bad_reflectivity():
    with pytest.raises(OpticalDomainError):
        CavityLayout((FreeSpace(0.1), Mirror(1.2)))
    with pytest.raises(OpticalDomainError):
        CavityLayout((FreeSpace(-0.1),))


def test_eigen_q_reproduces_itself(ring):
    m = displace_lens(ring, 3, -0.7e-3).round_trip_matrix()
    q = m.eigen_q()
    assert q.imag > 0
    assert m.transform_q(q) == pytest.approx(q, rel=1e-10)
    with pytest.raises(OpticalDomainError):
        ring.round_trip_matrix().eigen_q()
