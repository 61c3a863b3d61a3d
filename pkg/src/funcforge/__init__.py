"""Synthesis pipeline for function-calling training data.

Curates tool pools into similarity groups, generates multi-agent tool-use
dialogues with best-of-N candidate selection, checks them against
structural and consistency rules, gates them through a model checker into
a human review queue, computes rewards for policy optimisation, and
exports instruction-tuning datasets.
"""

from .errors import FuncForgeError

__version__ = "0.1.0"

__all__ = ["FuncForgeError", "__version__"]
