from .linear import Constraint, ConstraintSet, parse_constraint
from .axioms import AXIOMS, SYSTEM_AXIOMS, MatchError, match_axiom, tautology
from .checker import (
    CheckResult,
    Derivation,
    GArchPayload,
    ProofFileError,
    Step,
    builtin_corpus,
    check_derivation,
    check_proof_file,
    load_proof_file,
    load_proof_file_doc,
)

__all__ = [
    "Constraint", "ConstraintSet", "parse_constraint",
    "AXIOMS", "SYSTEM_AXIOMS", "MatchError", "match_axiom", "tautology",
    "CheckResult", "Derivation", "GArchPayload", "ProofFileError", "Step",
    "builtin_corpus", "check_derivation", "check_proof_file",
    "load_proof_file", "load_proof_file_doc",
]
