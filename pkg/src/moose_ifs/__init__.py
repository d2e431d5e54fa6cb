"""Static physics verification of MOOSE input files.

Reconstructs a physics contract from a HIT input and scores a candidate
against a reference contract with the weighted Intent Fidelity Score.
"""

from .contract import PhysicsContract, load_contract, save_contract
from .hit import ParseError, parse_input
from .ifs import ScoreConfig, ViolationReport, align_variables, coefficient_match, evaluate, render_report
from .mcs import extract_facts, mcs
from .reconstruct import reconstruct_contract
from .registry import MappingRegistry, RegistryError, default_registry, load_registry

__all__ = [
    "MappingRegistry",
    "ParseError",
    "PhysicsContract",
    "RegistryError",
    "ScoreConfig",
    "ViolationReport",
    "align_variables",
    "coefficient_match",
    "default_registry",
    "evaluate",
    "extract_facts",
    "load_contract",
    "load_registry",
    "mcs",
    "parse_input",
    "reconstruct_contract",
    "render_report",
    "save_contract",
]

__version__ = "0.1.0"
