"""Find the lowest-loss mode of a perturbed ring by power iteration.

Small apertures at the lenses make the round-trip operator lossy for
anything but the fundamental; repeated round trips from random noise
converge on it.
"""

import numpy as np

from oamcavity import BeamGeometry, LGIndex, SampledField, degenerate_ring, displace_lens, fidelity, lg_field, ring_grid
from oamcavity.propagation import fox_li_dominant_mode
from oamcavity.ray_optics import CavityLayout, Lens

ring = displace_lens(degenerate_ring(), 0, 1e-3)
layout = CavityLayout(tuple(Lens(el.spec, el.transmittance, 0.25e-3) if isinstance(el, Lens) else el
                            for el in ring.elements))
grid = ring_grid(layout, 780e-9, 256)

rng = np.random.default_rng(0)
seed = SampledField(grid, rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256)), 780e-9)
result = fox_li_dominant_mode(layout, seed, max_iter=200)
print(f"converged {result.converged} after {result.iterations} round trips, |eigenvalue| {abs(result.round_trip_eigenvalue):.4f}")

eigen = BeamGeometry.from_q(layout.round_trip_matrix().eigen_q(), 780e-9)
print(f"eigen beam waist {eigen.waist * 1e3:.3f} mm")
# the eigen waist is only a few pixels wide here, so evaluate it directly rather than through sample_mode
rho, phi = grid.polar()
lg00 = SampledField(grid, lg_field(LGIndex(0, 0), eigen, rho, phi), 780e-9)
# the 0.25 mm apertures clip and reshape it, so the overlap stays well below 1
print(f"overlap with the Gaussian eigen beam: {fidelity(result.mode, lg00):.3f}")
