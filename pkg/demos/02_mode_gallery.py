"""Render LG intensity patterns: single vortices, petal superpositions, DFT states.

Images are written as 16-bit PGM files into ``gallery/`` next to this script.
"""

from pathlib import Path

from oamcavity import (
    BeamGeometry,
    LGIndex,
    conjugate_superposition,
    count_azimuthal_maxima,
    decompose,
    degenerate_ring,
    dft6_coefficients,
    ring_grid,
    sample_mode,
    superpose,
)
from oamcavity.lg_modes import DFT6_BASIS
from oamcavity.scenarios import emit_image

out = Path(__file__).with_name("gallery")
out.mkdir(exist_ok=True)

geom = BeamGeometry(780e-9, 0.75e-3)
grid = ring_grid(degenerate_ring(), geom.wavelength, 512)
print(f"grid: {grid.n} x {grid.n}, pitch {grid.pitch * 1e6:.2f} um, window {grid.window * 1e3:.2f} mm")

for l in (0, 1, 5, 15):
    f = sample_mode(LGIndex(0, l), geom, grid)
    emit_image(f, out / f"lg_0_{l}.pgm")
    print(f"LG(0,{l:+d}) power {f.power:.6f}")

# |+l> + |-l> interferes into 2l petals around the ring.
for l in (1, 3, 5):
    f = superpose(conjugate_superposition(l, geom), grid)
    emit_image(f, out / f"petals_{l}.pgm")
    print(f"l={l}: {count_azimuthal_maxima(f.intensity, grid)} petals")

# The six DFT states over l = +-1, +-3, +-5 decompose back onto their rows.
for j in range(6):
    f = superpose(dft6_coefficients(j, geom), grid)
    emit_image(f, out / f"dft_{j}.pgm")
    c = decompose(f, DFT6_BASIS, geom)
    print(f"row {j}: |c|^2 =", " ".join(f"{abs(v) ** 2:.3f}" for v in c.vector(DFT6_BASIS)))
