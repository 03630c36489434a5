"""YAML scenario configuration with unit-suffixed physical values.

Lengths accept ``nm``, ``um``, ``mm``, ``cm``, ``m``; frequencies ``Hz``,
``kHz``, ``MHz``, ``GHz``; times ``s``, ``ms``. Everything is converted to SI
on load.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..ray_optics import (
    CavityLayout,
    FreeSpace,
    Lens,
    Mirror,
    ThickLensSpec,
    degenerate_spacing,
    displace_lens,
)

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config", "parse_quantity", "DEFAULTS"]

_UNITS = {
    "length": {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]+)\s*$")

DEFAULTS = {
    "cavity": {
        "lens": {
            "radius": "38.9mm",
            "thickness": "4.0mm",
            "index": 1.51,
            "ambient_index": 1.0,
            "clear_aperture": "22.8mm",
            "transmittance": 0.999,
        },
        "spacing": "auto-degenerate",
        "mirrors": [0.9999, 0.9999, 0.93, 0.93],
        "apertures": True,
        "displacement": None,
        "linewidth_convention": "survival",
    },
    "beam": {"wavelength": "780nm", "waist": "0.75mm", "grid": 512, "pitch": "auto"},
    "scenario": {},
    "expected": {},
}

_SCENARIO_KEYS = {
    "name", "output", "seed", "l_values", "l_range", "threshold", "threshold_l", "ramp_rate", "ramp_span",
    "samples", "reference_offset", "pure_l", "conjugate_l", "dft_rows", "png", "perturbed_layouts",
}
_EXPECTED_KEYS = {"fsr", "finesse", "fwhm", "hwhm", "spacing"}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violated constraint."""

    def __init__(self, problems, line=None):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"configuration error{where}: " + "; ".join(self.problems))


def parse_quantity(value, kind: str, key: str = "value") -> float:
    """Convert ``"38.9mm"`` to ``0.0389``; bare numbers are rejected for dimensioned values."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError(f"{key}: expected a {kind} with a unit suffix, got {value!r}")
    m = _QUANTITY.match(value)
    if not m or m.group(2) not in _UNITS[kind]:
        raise ConfigError(f"{key}: cannot parse {value!r} as a {kind} (units: {', '.join(_UNITS[kind])})")
    return float(m.group(1)) * _UNITS[kind][m.group(2)]


@dataclass
class ScenarioConfig:
    lens: ThickLensSpec
    lens_transmittance: float
    spacings: list
    mirrors: list
    apertures: bool
    displacement: dict | None
    linewidth_convention: str
    wavelength: float
    waist: float
    grid_n: int
    pitch: float | None  # None means natural sampling for the lens-to-lens segment
    scenario: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    defaults_applied: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)
    source: str | None = None

    def layout(self, displaced: bool = True) -> CavityLayout:
        elements = []
        aperture = None if self.apertures else math.inf
        for gap, refl in zip(self.spacings, self.mirrors):
            elements += [FreeSpace(gap), Mirror(refl), Lens(self.lens, self.lens_transmittance, aperture)]
        layout = CavityLayout(tuple(elements))
        if displaced and self.displacement:
            layout = displace_lens(layout, self.displacement["lens"], self.displacement["delta"],
                                   self.displacement.get("convention", "symmetric"))
        return layout

    def ideal_layout(self) -> CavityLayout:
        return self.layout(displaced=False)

    def param(self, key, default=None):
        return self.scenario.get(key, default)


def _merge(defaults, given, path, problems, applied):
    out = copy.deepcopy(defaults)
    if given is None:
        applied.append(path)
        return out
    if not isinstance(given, dict):
        problems.append(f"{path}: expected a mapping")
        return out
    for key, value in given.items():
        if key not in defaults:
            problems.append(f"{path}.{key}: unknown key")
            continue
        if isinstance(defaults[key], dict) and defaults[key]:
            out[key] = _merge(defaults[key], value, f"{path}.{key}", problems, applied)
        else:
            out[key] = value
    for key in defaults:
        if key not in given and not (isinstance(defaults[key], dict) and defaults[key]):
            applied.append(f"{path}.{key}")
    return out


def parse_config(data, source: str | None = None) -> ScenarioConfig:
    """Validate a parsed mapping and build a :class:`ScenarioConfig`."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    problems, applied = [], []
    for key in data:
        if key not in DEFAULTS:
            problems.append(f"{key}: unknown section")
    cav = _merge(DEFAULTS["cavity"], data.get("cavity"), "cavity", problems, applied)
    beam = _merge(DEFAULTS["beam"], data.get("beam"), "beam", problems, applied)
    scenario = dict(data.get("scenario") or {})
    expected = dict(data.get("expected") or {})
    for key in scenario:
        if key not in _SCENARIO_KEYS:
            problems.append(f"scenario.{key}: unknown key")
    for key in expected:
        if key not in _EXPECTED_KEYS:
            problems.append(f"expected.{key}: unknown key")

    def quantity(value, kind, key, positive=True):
        try:
            v = parse_quantity(value, kind, key)
        except ConfigError as exc:
            problems.extend(exc.problems)
            return math.nan
        if positive and not v > 0:
            problems.append(f"{key}: must be positive (got {value!r})")
        return v

    def number(value, key, lo=None, hi=None, lo_open=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{key}: expected a number, got {value!r}")
            return math.nan
        v = float(value)
        if lo is not None and (v <= lo if lo_open else v < lo):
            problems.append(f"{key}: must be {'>' if lo_open else '>='} {lo} (got {v})")
        if hi is not None and v > hi:
            problems.append(f"{key}: must be <= {hi} (got {v})")
        return v

    lens_cfg = cav["lens"]
    r = quantity(lens_cfg["radius"], "length", "cavity.lens.radius")
    h = quantity(lens_cfg["thickness"], "length", "cavity.lens.thickness")
    n1 = number(lens_cfg["ambient_index"], "cavity.lens.ambient_index", lo=1.0)
    n2 = number(lens_cfg["index"], "cavity.lens.index", lo=0.0, lo_open=True)
    if n2 == n2 and n1 == n1 and not n2 > n1:
        problems.append(f"cavity.lens.index: must exceed ambient_index ({n2} <= {n1})")
    aperture = quantity(lens_cfg["clear_aperture"], "length", "cavity.lens.clear_aperture")
    t_lens = number(lens_cfg["transmittance"], "cavity.lens.transmittance", lo=0.0, hi=1.0, lo_open=True)

    mirrors = cav["mirrors"]
    if not isinstance(mirrors, list) or not mirrors:
        problems.append("cavity.mirrors: expected a non-empty list of reflectivities")
        mirrors = []
    mirrors = [number(m, f"cavity.mirrors[{i}]", lo=0.0, hi=1.0, lo_open=True) for i, m in enumerate(mirrors)]

    apertures = cav["apertures"]
    if not isinstance(apertures, bool):
        problems.append("cavity.apertures: expected true or false")

    convention = cav["linewidth_convention"]
    if convention not in ("survival", "field"):
        problems.append("cavity.linewidth_convention: expected 'survival' or 'field'")

    lens = None
    if not problems:
        lens = ThickLensSpec(r=r, h=h, n2=n2, n1=n1, clear_aperture_diameter=aperture)

    spacing = cav["spacing"]
    spacings = []
    if spacing == "auto-degenerate":
        if lens is not None:
            spacings = [degenerate_spacing(lens)] * len(mirrors)
    elif isinstance(spacing, list):
        if len(spacing) != len(mirrors):
            problems.append(f"cavity.spacing: {len(spacing)} gaps given for {len(mirrors)} mirrors")
        spacings = [quantity(s, "length", f"cavity.spacing[{i}]") for i, s in enumerate(spacing)]
    else:
        s = quantity(spacing, "length", "cavity.spacing")
        spacings = [s] * len(mirrors)

    displacement = cav["displacement"]
    if displacement is not None:
        if not isinstance(displacement, dict) or set(displacement) - {"lens", "delta", "convention"}:
            problems.append("cavity.displacement: expected {lens, delta[, convention]}")
            displacement = None
        else:
            lens_no = displacement.get("lens", 0)
            if isinstance(lens_no, bool) or not isinstance(lens_no, int) or not 0 <= lens_no < max(len(mirrors), 1):
                problems.append(f"cavity.displacement.lens: expected an index in 0..{len(mirrors) - 1}")
            delta = quantity(displacement.get("delta", "0mm"), "length", "cavity.displacement.delta", positive=False)
            conv = displacement.get("convention", "symmetric")
            if conv not in ("symmetric", "slide"):
                problems.append("cavity.displacement.convention: expected 'symmetric' or 'slide'")
            displacement = {"lens": lens_no, "delta": delta, "convention": conv}

    wavelength = quantity(beam["wavelength"], "length", "beam.wavelength")
    waist = quantity(beam["waist"], "length", "beam.waist")
    grid_n = beam["grid"]
    if isinstance(grid_n, bool) or not isinstance(grid_n, int) or grid_n < 32 or grid_n & (grid_n - 1):
        problems.append(f"beam.grid: expected a power of two >= 32 (got {grid_n!r})")
    pitch = None if beam["pitch"] == "auto" else quantity(beam["pitch"], "length", "beam.pitch")

    for key in ("threshold", "reference_offset"):
        if key in scenario and scenario[key] != "fsr":
            scenario[key] = quantity(scenario[key], "frequency", f"scenario.{key}")
    if "ramp_rate" in scenario:
        scenario["ramp_rate"] = quantity(scenario["ramp_rate"], "frequency", "scenario.ramp_rate")
    for key in list(expected):
        kind = "frequency" if key in ("fsr", "fwhm", "hwhm") else ("length" if key == "spacing" else None)
        expected[key] = quantity(expected[key], kind, f"expected.{key}") if kind else number(expected[key], f"expected.{key}")

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        lens=lens,
        lens_transmittance=t_lens,
        spacings=spacings,
        mirrors=mirrors,
        apertures=apertures,
        displacement=displacement,
        linewidth_convention=convention,
        wavelength=wavelength,
        waist=waist,
        grid_n=grid_n,
        pitch=pitch,
        scenario=scenario,
        expected=expected,
        defaults_applied=applied,
        raw=data,
        source=source,
    )


def load_config(path) -> ScenarioConfig:
    """Read and validate a YAML configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"{path}: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, source=str(path))
