"""Configuration-driven scenario runner and the ``sim`` command line."""

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .images import emit_image, read_pgm
from .runner import (
    RunArtifacts,
    derived_quantities,
    run_fig3_scenario,
    run_fig4_scenario,
    run_property_suite,
    run_scenario,
)
