"""Physical-optics simulation of degenerate ring cavities carrying Laguerre-Gaussian modes."""

__version__ = "0.1.0"

from .fields import GridSpec, SampledField, SamplingError, fidelity
from .lg_modes import (
    BeamGeometry,
    LGIndex,
    ModeCoefficients,
    conjugate_superposition,
    count_azimuthal_maxima,
    decompose,
    dft6_coefficients,
    dft6_matrix,
    laguerre_polynomial,
    lg_field,
    sample_mode,
    superpose,
)
from .propagation import (
    apply_aperture,
    collins_propagate,
    fox_li_dominant_mode,
    imaging_limit,
    propagate,
    ring_grid,
    round_trip,
)
from .ray_optics import (
    CavityLayout,
    FreeSpace,
    Lens,
    Mirror,
    RayMatrix,
    ThickLensSpec,
    cavity_linewidth,
    compose,
    degeneracy_metric,
    degenerate_ring,
    degenerate_spacing,
    displace_lens,
    equivalent_thin_lens,
    free_spectral_range,
    reference_lens,
    thick_lens_matrix,
)
from .resonance import (
    dispersion_curve,
    displacement_for_threshold,
    mode_offset,
    pzt_scan,
    resonant_frequencies,
    transmission_spectrum,
)
