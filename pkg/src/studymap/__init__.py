"""Adaptive independent-study engine.

Diagnoses per-student knowledge over a weighted concept map with an exact
Bayesian network, generates parameterized practice questions from templates,
and serves an interactive study loop (answer, immediate feedback, updated
per-concept progress bars).
"""

__version__ = "0.1.0"

from studymap.concepts import ConceptMap, ConceptNode, parse_concept_map
from studymap.evidence import QuestionMeta, parse_siacua_block
from studymap.network import build_network, posteriors

__all__ = [
    "ConceptMap",
    "ConceptNode",
    "QuestionMeta",
    "build_network",
    "parse_concept_map",
    "parse_siacua_block",
    "__version__",
]
