"""Satisfiability for a tree logic with converse modalities, fixpoints and counting.

The package is split by concern:

``formula``
    AST, parser, normal forms and syntactic rewrites.
``semantics``
    finite tree models, the reference evaluator and a brute-force oracle.
``lean``
    navigation extraction, Fisher-Ladner closure, lean and node types.
``solver``
    the bottom-up tableau and model extraction.
``xpath``
    an XPath fragment with counting, translated into the logic.
"""

from tlsat.formula import Formula, Modality, parse_formula
from tlsat.semantics import TreeModel, evaluate
from tlsat.solver import SolveResult, solve

__all__ = [
    "Formula",
    "Modality",
    "SolveResult",
    "TreeModel",
    "evaluate",
    "parse_formula",
    "solve",
]

__version__ = "0.1.0"
