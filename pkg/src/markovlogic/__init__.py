"""Exact verification toolkit for probability logic with a dynamic operator.

Model-checks formulas over finite dynamic Markov processes with rational
arithmetic, decides frame-definability correspondences for stochastic and
dynamical properties, and checks Hilbert-style derivations with rational
metavariables and parametric Archimedean premises.
"""

from . import definability, formula, process, proofs, semantics, stochastic

__all__ = ["definability", "formula", "process", "proofs", "semantics", "stochastic"]
__version__ = "0.1.0"
