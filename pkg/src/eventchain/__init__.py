"""Model-driven toolchain for automotive event chains."""
from .codegen import parse_template, render, shipped_template
from .constraints import evaluate, parse_constraints, shipped_constraints
from .ingest import lower_to_instance, parse_event_chain
from .metamodel import event_chain_metamodel, load_instance, serialize_instance
from .sim import AebScenario, load_wiring, run_scenario

__all__ = [
    "AebScenario", "evaluate", "event_chain_metamodel", "load_instance", "load_wiring",
    "lower_to_instance", "parse_constraints", "parse_event_chain", "parse_template", "render",
    "run_scenario", "serialize_instance", "shipped_constraints", "shipped_template",
]
