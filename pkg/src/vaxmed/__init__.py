"""Counterfactual estimands for vaccine effects mediated by behaviour."""
from .estimands import (
    controlled_direct_effect,
    natural_direct_effect,
    natural_indirect_effect,
    path_specific_effects,
    total_effect,
    trial_estimand,
)
from .estimation import (
    MediatorMisclassifier,
    PluginNDE,
    PluginTotal,
    misclassify_mediator,
    plugin_nde,
    plugin_nde_limit,
    plugin_total,
    plugin_total_limit,
)
from .exceptions import CapacityError, EstimationError, GraphError, InputError, ScenarioError, VaxmedError
from .graph import CausalDag, check_nde_assumptions, d_separated, validate
from .report import run
from .scenario import list_builtin, load_builtin, parse_scenario
from .scm import StructuralModel, analytic_expectation, cf, sample_units

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "CausalDag", "EstimationError", "GraphError", "InputError", "MediatorMisclassifier",
    "PluginNDE", "PluginTotal", "ScenarioError", "StructuralModel", "VaxmedError", "analytic_expectation", "cf",
    "check_nde_assumptions", "controlled_direct_effect", "d_separated", "list_builtin", "load_builtin",
    "misclassify_mediator", "natural_direct_effect", "natural_indirect_effect", "parse_scenario",
    "path_specific_effects", "plugin_nde", "plugin_nde_limit", "plugin_total", "plugin_total_limit", "run",
    "sample_units", "total_effect", "trial_estimand", "validate",
]
