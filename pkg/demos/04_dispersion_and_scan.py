"""Lift the degeneracy until l = 7 sits 12 MHz off resonance, then scan the cavity.

The offset of each mode grows linearly with 2p + |l|. A PZT ramp sweeps the
cavity length; a reference tone one FSR away marks where the fundamental
would appear, and higher-order modes show up displaced in time.
"""

from oamcavity import LGIndex, ModeCoefficients, degenerate_ring, dispersion_curve, displace_lens
from oamcavity.resonance import count_peaks, default_ramp, displacement_for_threshold, pzt_scan
from oamcavity.ray_optics import free_spectral_range

ring = degenerate_ring()
delta = displacement_for_threshold(ring, 7, 12e6)
displaced = displace_lens(ring, 0, delta)
print(f"lens 1 moved by {delta * 1e3:.4f} mm")

curve = dispersion_curve(displaced, range(0, 16))
print(f"linewidth band +-{curve.band / 1e6:.3f} MHz; first mode outside: l={curve.first_outside()}")
for l, offset, _, _ in curve.rows():
    marker = "" if abs(offset) <= curve.band else "  outside"
    print(f"  l={l:2d}  {offset / 1e6:7.3f} MHz{marker}")

ramp = default_ramp(displaced, 780e-9)
fsr = free_spectral_range(displaced)
for l in (0, 5, 10):
    scan = pzt_scan(displaced, ModeCoefficients({LGIndex(0, l): 1.0}), ramp, fsr, 780e-9)
    sig = [p.center for p in scan.peaks if p.tone == "signal"]
    ref = [p.center for p in scan.peaks if p.tone == "reference"]
    print(f"l={l:2d}: {count_peaks(scan.transmission)} signal peaks per ramp period, "
          f"first at {sig[0] * 1e3:.3f} ms (reference {ref[0] * 1e3:.3f} ms)")
