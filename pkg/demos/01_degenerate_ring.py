"""Build the four-lens degenerate ring and read off its cavity parameters.

Each thick planoconvex lens is reduced to a thin lens plus a short stretch of
free space. Placing the lenses so that every lens-to-lens hop is an exact
2f relay makes the round-trip ray matrix the identity, so all transverse
modes share one set of resonance frequencies.
"""

from oamcavity import (
    cavity_linewidth,
    degeneracy_metric,
    degenerate_ring,
    degenerate_spacing,
    equivalent_thin_lens,
    reference_lens,
    thick_lens_matrix,
)
from oamcavity.ray_optics import free_spectral_range

lens = reference_lens()
m = thick_lens_matrix(lens)
eq = equivalent_thin_lens(lens)
print(f"thick lens matrix   A={m.a:.6f} B={m.b * 1e3:.4f} mm C={m.c:.4f} /m D={m.d:.6f}")
print(f"focal length        {eq.focal_length * 1e3:.4f} mm")
print(f"equivalent gap      {eq.equivalent_free_length * 1e3:.4f} mm")
print(f"mirror-lens spacing {degenerate_spacing(lens) * 1e3:.3f} mm")

ring = degenerate_ring(lens)
report = degeneracy_metric(ring.round_trip_matrix())
print(f"round trip          {ring.round_trip_matrix().as_array().round(12).tolist()}")
print(f"degenerate          {report.degenerate} (Gouy angle {report.gouy_angle:.2e} rad)")
print(f"FSR                 {free_spectral_range(ring) / 1e6:.2f} MHz")

# Two ways to turn round-trip power survival into a resonance width.
for convention in ("survival", "field"):
    lw = cavity_linewidth(ring, convention)
    print(f"{convention:9s} finesse {lw.finesse:6.2f}  FWHM {lw.fwhm / 1e6:6.3f} MHz  HWHM {lw.hwhm / 1e6:6.3f} MHz")
