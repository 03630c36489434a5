"""Scenario execution: figure reproductions and the invariant suite."""

from __future__ import annotations

import csv
import json
import math
import traceback
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..fields import GridSpec, SamplingError, fidelity
from ..lg_modes import (
    BeamGeometry,
    LGIndex,
    ModeCoefficients,
    conjugate_superposition,
    count_azimuthal_maxima,
    decompose,
    dft6_coefficients,
    dft6_matrix,
    sample_mode,
    superpose,
)
from ..propagation import (
    collins_propagate,
    natural_pitch,
    resample,
    ring_grid,
    round_trip,
    segments,
)
from ..ray_optics import (
    RayMatrix,
    cavity_linewidth,
    compose,
    degeneracy_metric,
    degenerate_spacing,
    displace_lens,
    equivalent_thin_lens,
    free_space_matrix,
    free_spectral_range,
    round_trip_survival,
    thick_lens_matrix,
    ThickLensSpec,
)
from ..resonance import (
    airy,
    count_peaks,
    default_ramp,
    dispersion_curve,
    displacement_for_threshold,
    mode_offset,
    numerical_fwhm,
    pzt_scan,
)
from .config import ScenarioConfig
from .images import emit_image, normalized_intensity

__all__ = [
    "RunArtifacts",
    "SCENARIOS",
    "derived_quantities",
    "run_scenario",
    "run_fig3_scenario",
    "run_fig4_scenario",
    "run_property_suite",
    "gouy_from_round_trip",
    "CSV_SCHEMA_VERSION",
]

CSV_SCHEMA_VERSION = 1
IMAGE_MAE_TOL = 1e-4


@dataclass
class RunArtifacts:
    out_dir: Path
    manifest: dict = field(default_factory=dict)
    csv_files: list = field(default_factory=list)
    image_files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    exit_status: int = 0

    def check(self, name, passed, **details):
        self.checks.append({"name": name, "passed": bool(passed), **details})
        return passed

    def write_csv(self, name, kind, header, rows):
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# oamcavity-csv v{CSV_SCHEMA_VERSION} {kind}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        self.csv_files.append(str(path))
        return path

    def write_image(self, name, data, fmt="pgm"):
        record = emit_image(data, self.out_dir / name, fmt)
        self.image_files.append(record)
        return record


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return v


def derived_quantities(config: ScenarioConfig) -> dict:
    """Recompute every derived cavity number from the lens and layout parameters."""
    eq = equivalent_thin_lens(config.lens)
    layout = config.layout()
    lw = cavity_linewidth(layout, config.linewidth_convention)
    report = degeneracy_metric(layout.round_trip_matrix())
    m = layout.round_trip_matrix()
    return {
        "focal_length_m": eq.focal_length,
        "equivalent_free_length_m": eq.equivalent_free_length,
        "degenerate_spacing_m": degenerate_spacing(config.lens),
        "spacings_m": list(config.spacings),
        "round_trip_optical_path_m": layout.optical_path,
        "round_trip_geometric_path_m": layout.geometric_path,
        "fsr_hz": free_spectral_range(layout),
        "round_trip_survival": round_trip_survival(layout),
        "finesse": lw.finesse,
        "fwhm_hz": lw.fwhm,
        "hwhm_hz": lw.hwhm,
        "linewidth_convention": lw.convention,
        "round_trip_matrix": [m.a, m.b, m.c, m.d],
        "gouy_angle_rad": None if not report.stable else report.gouy_angle,
        "stable": report.stable,
        "degenerate": report.degenerate,
    }


def _expected_warnings(config: ScenarioConfig, derived: dict) -> list:
    mapping = {"fsr": "fsr_hz", "finesse": "finesse", "fwhm": "fwhm_hz", "hwhm": "hwhm_hz",
               "spacing": "degenerate_spacing_m"}
    out = []
    for key, claimed in config.expected.items():
        actual = derived[mapping[key]]
        if not math.isclose(claimed, actual, rel_tol=1e-3):
            msg = f"config asserts {key}={claimed:.6g} but recomputation gives {actual:.6g}"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            out.append(msg)
    return out


def _geometry(config: ScenarioConfig) -> BeamGeometry:
    return BeamGeometry(config.wavelength, config.waist, 0.0)


def _ring_grid(config: ScenarioConfig, n: int | None = None) -> GridSpec:
    n = n or config.grid_n
    if config.pitch is not None:
        return GridSpec(n, config.pitch)
    first = segments(config.ideal_layout())[0]
    return GridSpec(n, natural_pitch(config.wavelength, first.matrix.b, n))


# -- dispersion and scans ----------------------------------------------------


def run_fig3_scenario(config: ScenarioConfig, art: RunArtifacts) -> RunArtifacts:
    """Dispersion curves and PZT scan traces for the degenerate and calibrated displaced rings."""
    ideal = config.ideal_layout()
    l_star = int(config.param("threshold_l", 7))
    threshold = config.param("threshold", 12e6)
    delta = displacement_for_threshold(ideal, l_star, threshold)
    cases = {"degenerate": ideal, "displaced": displace_lens(ideal, 0, delta)}
    l_range = config.param("l_range", [-15, 15])
    l_values = config.param("l_values", [0, 5, -5, 10, -10, 15, -15])
    rate = config.param("ramp_rate", 10.0)
    span = float(config.param("ramp_span", 1.5))
    samples = int(config.param("samples", 20000))

    summary = []
    for case, layout in cases.items():
        curve = dispersion_curve(layout, range(int(l_range[0]), int(l_range[1]) + 1), label=case,
                                 convention=config.linewidth_convention)
        art.write_csv(f"fig3_dispersion_{case}.csv", "dispersion",
                      ["l", "offset_hz", "band_lo_hz", "band_hi_hz"], curve.rows())
        fsr = free_spectral_range(layout)
        report = degeneracy_metric(layout.round_trip_matrix())
        first_out = curve.first_outside()
        summary.append([case, delta if case == "displaced" else 0.0, report.gouy_angle, fsr, curve.band,
                        -1 if first_out is None else first_out])
        if case == "degenerate":
            art.check("fig3_degenerate_offsets_zero", np.all(curve.offset == 0.0),
                      max_abs_offset_hz=float(np.max(np.abs(curve.offset))))
        else:
            art.check("fig3_displaced_band_crossing", first_out == l_star, first_outside_l=first_out,
                      expected=l_star)

        ramp = default_ramp(layout, config.wavelength, span, rate)
        ref_offset = config.param("reference_offset", "fsr")
        ref_offset = fsr if ref_offset == "fsr" else ref_offset
        for l in l_values:
            coeffs = ModeCoefficients({LGIndex(0, int(l)): 1.0}, _geometry(config))
            spec = pzt_scan(layout, coeffs, ramp, ref_offset, config.wavelength, samples=samples, span_fsr=span,
                            convention=config.linewidth_convention)
            rows = zip(spec.axis, spec.ramp, spec.reference, spec.transmission)
            art.write_csv(f"fig3_scan_{case}_l{int(l):+d}.csv", "pzt_scan",
                          ["time_s", "ramp_m", "reference_T", "signal_T"], rows)
            n_peaks = count_peaks(spec.transmission)
            art.check(f"fig3_scan_{case}_l{int(l):+d}_two_peaks", n_peaks == 2, peaks=n_peaks)
    art.write_csv("fig3_summary.csv", "fig3_summary",
                  ["case", "delta_m", "gouy_angle_rad", "fsr_hz", "band_halfwidth_hz", "first_outside_l"], summary)
    art.manifest["fig3"] = {"calibrated_displacement_m": delta, "threshold_hz": threshold, "threshold_l": l_star,
                            "ramp_rate_hz": rate, "ramp_span_fsr": span, "samples_per_period": samples}
    return art


# -- beam profile gallery ----------------------------------------------------


def _before_after(field_, layout):
    after = round_trip(field_, layout, match_input_grid=True)
    b, _ = normalized_intensity(field_.intensity)
    a, _ = normalized_intensity(after.intensity)
    return after, float(np.mean(np.abs(a - b)))


def run_fig4_scenario(config: ScenarioConfig, art: RunArtifacts, grid_n: int | None = None) -> RunArtifacts:
    """Beam-profile gallery before and after one round trip of the ideal ring."""
    layout = config.ideal_layout()
    geom = _geometry(config)
    grid = _ring_grid(config, grid_n)
    fmt = "png" if config.param("png", False) else "pgm"
    rows = []
    jobs = []
    for l in config.param("pure_l", [0, 1, -1, 3, -3, 5, -5, 15]):
        jobs.append(("a", f"l{int(l):+d}", ModeCoefficients({LGIndex(0, int(l)): 1.0}, geom), None))
    for l in config.param("conjugate_l", [1, 3, 5]):
        jobs.append(("b", f"l{int(l)}", conjugate_superposition(int(l), geom), 2 * abs(int(l))))
    for j in config.param("dft_rows", [0, 1, 2, 3, 4, 5]):
        jobs.append(("c", f"j{int(j)}", dft6_coefficients(int(j), geom), None))

    for panel, label, coeffs, petals_expected in jobs:
        before = superpose(coeffs, grid)
        after, mae = _before_after(before, layout)
        art.write_image(f"fig4{panel}_{label}_before.{fmt}", before, fmt)
        art.write_image(f"fig4{panel}_{label}_after.{fmt}", after, fmt)
        petals = count_azimuthal_maxima(before.intensity, grid)
        petals_after = count_azimuthal_maxima(after.intensity, grid)
        rows.append([panel, label, petals, petals_after, mae])
        art.check(f"fig4{panel}_{label}_profile_preserved", mae <= IMAGE_MAE_TOL, mae=mae, tol=IMAGE_MAE_TOL)
        if petals_expected is not None:
            art.check(f"fig4{panel}_{label}_petals", petals == petals_expected == petals_after,
                      petals=petals, petals_after=petals_after, expected=petals_expected)
        if panel == "a" and label == "l+0":
            centre = before.intensity[grid.n // 2, grid.n // 2]
            art.check("fig4a_l+0_central_peak", centre >= 0.99 * before.intensity.max(),
                      centre_over_peak=float(centre / before.intensity.max()))
    art.write_csv("fig4_summary.csv", "fig4_summary", ["panel", "label", "petals_before", "petals_after", "mae"], rows)
    art.manifest["fig4"] = {"grid_n": grid.n, "grid_pitch_m": grid.pitch, "waist_m": geom.waist,
                            "image_normalization": "per-image peak", "mae_tolerance": IMAGE_MAE_TOL}
    return art


# -- invariant suite ---------------------------------------------------------


def gouy_from_round_trip(layout, wavelength: float, n: int = 256, modes=None):
    """Fit the per-round-trip Gouy phase of a stable ring from wave-optics overlaps.

    LG modes matched to the round-trip eigen beam parameter are sent once
    around the ring; the phase of each returning coefficient is linear in
    ``2p + |l| + 1`` with slope ``sign(B) * theta``. Returns
    ``(signed_theta, max_fit_residual, max_leakage)``.
    """
    m = layout.round_trip_matrix()
    geom = BeamGeometry.from_q(m.eigen_q(), wavelength)
    grid = ring_grid(layout, wavelength, n)
    modes = modes or [LGIndex(0, 0), LGIndex(0, 1), LGIndex(0, -2), LGIndex(1, 0), LGIndex(0, 3), LGIndex(1, -1)]
    orders, phases, leak = [], [], 0.0
    for idx in modes:
        inp = sample_mode(idx, geom, grid, z=0.0)
        out = round_trip(inp, layout, losses=False)
        if out.grid != grid:
            out = resample(out, grid)
        c = decompose(out, [idx], geom, z=0.0)[idx]
        leak = max(leak, 1.0 - abs(c) ** 2 / out.power)
        orders.append(idx.order + 1)
        phases.append(np.angle(c))
    orders = np.array(orders, dtype=float)
    phases = np.array(phases)
    # align to the N=1 phase, then wrap differences into (-pi, pi]
    ref = phases[np.argmin(orders)]
    rel = np.angle(np.exp(1j * (phases - ref)))
    dn = orders - orders.min()
    slope, intercept = np.polyfit(dn, rel, 1)
    resid = float(np.max(np.abs(rel - (slope * dn + intercept))))
    return float(slope), resid, float(leak)


def _suite(config: ScenarioConfig, rng):
    """Yield ``(name, callable)``; each callable returns ``(passed, residual, tolerance, detail)``."""
    lens = config.lens
    layout = config.layout()
    geom = _geometry(config)

    def det_lens():
        worst = 0.0
        for _ in range(50):
            spec = ThickLensSpec(r=rng.uniform(5e-3, 0.5), h=rng.uniform(0, 20e-3), n2=rng.uniform(1.3, 2.0))
            worst = max(worst, abs(thick_lens_matrix(spec).determinant - 1.0))
        return worst <= 1e-12, worst, 1e-12, "50 random planoconvex lenses"

    def recompose():
        m = thick_lens_matrix(lens)
        eq = equivalent_thin_lens(lens).matrix()
        err = float(np.max(np.abs(m.as_array() - eq.as_array()) / np.maximum(np.abs(m.as_array()), 1e-300)))
        return err <= 1e-12, err, 1e-12, "relative entrywise"

    def identity():
        m = layout.round_trip_matrix()
        err = float(np.max(np.abs(m.as_array() - np.eye(2))))
        rep = degeneracy_metric(m)
        detail = f"theta={rep.gouy_angle!r} stable={rep.stable} degenerate={rep.degenerate}"
        return err <= 1e-10 and rep.degenerate, err, 1e-10, detail

    def fsr_rotation():
        base = free_spectral_range(layout)
        err = max(abs(free_spectral_range(layout.rotated(k)) / base - 1.0) for k in range(len(layout.elements)))
        return err <= 1e-12, err, 1e-12, "all cyclic rotations"

    def linewidth_product():
        lw = cavity_linewidth(layout, config.linewidth_convention)
        err = abs(lw.fwhm * lw.finesse / lw.fsr - 1.0)
        return err <= 1e-9, err, 1e-9, ""

    def airy_scan():
        lw = cavity_linewidth(layout, config.linewidth_convention)
        err = abs(numerical_fwhm(layout, convention=lw.convention) / lw.fwhm - 1.0)
        return err <= 0.01, err, 0.01, f"closed-form FWHM {lw.fwhm:.6g} Hz"

    def dft_unitary():
        u = dft6_matrix()
        err = float(np.max(np.abs(u @ u.conj().T - np.eye(6))))
        return err <= 1e-12, err, 1e-12, ""

    def orthonormal():
        # a property of the mode family: use a window wide enough for every basis tail
        grid = GridSpec(config.grid_n, 12 * config.waist / config.grid_n)
        basis = [LGIndex(p, l) for p in (0, 1) for l in (-3, 0, 2, 5)]
        fields = [sample_mode(b, geom, grid) for b in basis]
        gram = np.array([[f.overlap(g) for g in fields] for f in fields])
        err = float(np.max(np.abs(gram - np.eye(len(basis)))))
        return err <= 1e-8, err, 1e-8, f"{len(basis)} modes"

    def petals():
        grid = _ring_grid(config)
        bad = []
        for l in range(1, 16):
            got = count_azimuthal_maxima(superpose(conjugate_superposition(l, geom), grid).intensity, grid)
            if got != 2 * l:
                bad.append((l, got))
        return not bad, float(len(bad)), 0.0, f"mismatches {bad}" if bad else "l = 1..15"

    def sampling_l15():
        grid = _ring_grid(config)
        f = sample_mode(LGIndex(0, 15), geom, grid)
        err = abs(f.power - 1.0)
        return err <= 1e-3, err, 1e-3, f"n={grid.n} pitch={grid.pitch:.4e} m"

    def collins_unitary():
        grid = _ring_grid(config)
        f = superpose(dft6_coefficients(1, geom), grid)
        worst = 0.0
        for seg in segments(config.ideal_layout()):
            out = collins_propagate(f, seg.matrix)
            worst = max(worst, abs(out.power / f.power - 1.0))
        return worst <= 1e-6, worst, 1e-6, "lens-to-lens segments"

    def collins_composition():
        n = 256
        zr = geom.rayleigh_range
        m1, m2 = free_space_matrix(0.3 * zr), free_space_matrix(0.7 * zr)
        both = compose([m1, m2])
        grid = GridSpec(n, natural_pitch(geom.wavelength, both.b, n))
        f = sample_mode(LGIndex(1, 2), geom, grid)
        # two steps land on a rescaled grid; compare in mode space
        two = collins_propagate(collins_propagate(f, m1, check_sampling=False), m2, check_sampling=False)
        one = collins_propagate(f, both)
        g_out = geom.propagated(both)
        c_two = decompose(two, [LGIndex(1, 2)], g_out, z=0.0)[LGIndex(1, 2)]
        c_one = decompose(one, [LGIndex(1, 2)], g_out, z=0.0)[LGIndex(1, 2)]
        err = abs(c_two - c_one)
        return err <= 1e-6, err, 1e-6, "free space 0.3 zR then 0.7 zR vs 1.0 zR"

    def ring_fidelity():
        grid = _ring_grid(config)
        worst = 0.0
        for l in (0, 7, -15):
            f = sample_mode(LGIndex(0, l), geom, grid)
            out = round_trip(f, layout, match_input_grid=True)
            worst = max(worst, 1.0 - fidelity(f, out))
        return worst <= 1e-4, worst, 1e-4, "l in {0, 7, -15} through the configured ring"

    def gouy_consistency():
        worst = 0.0
        ideal = config.ideal_layout()
        for _ in range(2):
            lay = displace_lens(ideal, int(rng.integers(0, len(ideal.lenses))), float(rng.uniform(-2e-3, 2e-3)))
            m = lay.round_trip_matrix()
            slope, _, _ = gouy_from_round_trip(lay, config.wavelength, n=256)
            theta = degeneracy_metric(m).gouy_angle
            worst = max(worst, abs(slope - math.copysign(theta, m.b)))
        return worst <= 1e-4, worst, 1e-4, "2 random displaced rings"

    def offset_parity():
        lay = displace_lens(config.ideal_layout(), 0, 1e-3)
        err = max(abs(mode_offset(lay, LGIndex(p, l)) - mode_offset(lay, LGIndex(p, -l)))
                  for p in range(3) for l in range(16))
        return err == 0.0, err, 0.0, ""

    def spectrum_periodic():
        lw = cavity_linewidth(layout, config.linewidth_convention)
        nu = rng.uniform(-lw.fsr, lw.fsr, 1000)
        a = airy(nu, lw.fsr, lw.finesse)
        b = airy(nu + lw.fsr, lw.fsr, lw.finesse)
        err = float(np.max(np.abs(a - b) / a))
        return err <= 1e-9, err, 1e-9, ""

    return [
        ("thick_lens_determinant", det_lens),
        ("equivalent_lens_recomposition", recompose),
        ("round_trip_identity", identity),
        ("fsr_rotation_invariance", fsr_rotation),
        ("linewidth_times_finesse_is_fsr", linewidth_product),
        ("airy_scan_matches_closed_form", airy_scan),
        ("dft6_unitarity", dft_unitary),
        ("lg_orthonormality", orthonormal),
        ("sampling_precondition_l15", sampling_l15),
        ("petal_rule", petals),
        ("collins_unitarity", collins_unitary),
        ("collins_composition", collins_composition),
        ("degenerate_round_trip_fidelity", ring_fidelity),
        ("gouy_cross_module", gouy_consistency),
        ("offset_pm_l_symmetry", offset_parity),
        ("spectrum_periodicity", spectrum_periodic),
    ]


def run_property_suite(config: ScenarioConfig, art: RunArtifacts, seed: int = 0) -> RunArtifacts:
    rng = np.random.default_rng(seed)
    rows = []
    for name, fn in _suite(config, rng):
        try:
            passed, residual, tol, detail = fn()
        except Exception as exc:  # a failing precondition is a reported result
            passed, residual, tol, detail = False, math.nan, math.nan, f"{type(exc).__name__}: {exc}"
        art.check(name, passed, residual=residual, tolerance=tol, detail=detail)
        rows.append([name, "pass" if passed else "fail", float(residual), float(tol), detail])
    art.write_csv("properties.csv", "properties", ["check", "status", "residual", "tolerance", "detail"], rows)
    return art


SCENARIOS = {"fig3": "run_fig3_scenario", "fig4": "run_fig4_scenario", "properties": "run_property_suite"}


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_scenario(name: str, config: ScenarioConfig, out_dir, grid_n: int | None = None, seed: int | None = None) -> RunArtifacts:
    """Run one scenario (or ``"all"``) and always write ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(out_dir)
    seed = int(config.param("seed", 0) if seed is None else seed)
    if grid_n is not None:
        config.grid_n = grid_n
    art.manifest.update({
        "package": "oamcavity",
        "version": __version__,
        "scenario": name,
        "config_source": config.source,
        "inputs": config.raw,
        "defaults_applied": config.defaults_applied,
        "beam": {"wavelength_m": config.wavelength, "waist_m": config.waist, "grid_n": config.grid_n,
                 "grid_pitch_m": config.pitch if config.pitch is not None else "auto"},
        "seed": seed,
        "status": "running",
    })
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            derived = derived_quantities(config)
            art.manifest["derived"] = derived
            art.manifest["warnings"] = _expected_warnings(config, derived)
            names = list(SCENARIOS) if name == "all" else [name]
            for n in names:
                if n == "fig3":
                    run_fig3_scenario(config, art)
                elif n == "fig4":
                    run_fig4_scenario(config, art)
                elif n == "properties":
                    run_property_suite(config, art, seed)
                else:
                    raise ValueError(f"unknown scenario {n!r}")
            extra = [str(w.message) for w in caught if str(w.message) not in art.manifest["warnings"]]
            art.manifest["warnings"] += sorted(set(extra))
        failed = [c["name"] for c in art.checks if not c["passed"]]
        art.exit_status = 1 if failed else 0
        art.manifest["status"] = "failed" if failed else "ok"
        art.manifest["failed_checks"] = failed
    except Exception as exc:
        art.exit_status = 1
        art.manifest["status"] = "error"
        art.manifest["error"] = f"{type(exc).__name__}: {exc}"
        art.manifest["traceback"] = traceback.format_exc()
    finally:
        art.manifest["checks"] = art.checks
        art.manifest["outputs"] = {"csv": [Path(p).name for p in art.csv_files],
                                   "images": [{**r, "path": Path(r["path"]).name} for r in art.image_files]}
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(_json_safe(art.manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return art
