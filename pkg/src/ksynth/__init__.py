"""Synthesis of protocols from knowledge-based specifications."""
from .environment import (Environment, EnvironmentValidationError, load_environment, read_environment,
                          say_formula, transform_did, transform_say)
from .kbp import KnowledgeBasedProgram, kbp_implement, kbp_to_spec, parse_kbp
from .logic import And, Formula, FormulaSyntaxError, parse_formula, render
from .protocol_runtime import (Protocol, check_acceptable, evaluate_ka, induced_tree, load_protocol,
                               project_protocol, run_protocol, verify_realizes)
from .synthesis import Realizable, Unrealizable, extract_protocol, synthesize

__all__ = [
    "And", "Environment", "EnvironmentValidationError", "Formula", "FormulaSyntaxError",
    "KnowledgeBasedProgram", "Protocol", "Realizable", "Unrealizable", "check_acceptable",
    "evaluate_ka", "extract_protocol", "induced_tree", "kbp_implement", "kbp_to_spec",
    "load_environment", "load_protocol", "parse_formula", "parse_kbp", "project_protocol",
    "read_environment", "render", "run_protocol", "say_formula", "synthesize", "transform_did",
    "transform_say", "verify_realizes",
]
