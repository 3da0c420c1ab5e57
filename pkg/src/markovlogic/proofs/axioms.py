"""Axiom schemes, scheme matching, and propositional tautology checking.

Schemes are formula patterns with formula slots (phi, psi) and threshold
slots (scheme variables r, s); side conditions are linear constraints over
the scheme variables.  Matching binds slots by one-way structural descent;
compound threshold expressions in a pattern (such as r + s in the finite
additivity conclusions) are resolved against the bindings and compared in
affine normal form.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .. import formula as F
from ..formula import Affine
from .linear import Constraint, ConstraintSet

PHI = F.FVar("phi")
PSI = F.FVar("psi")
_R = Affine.var("r")
_S = Affine.var("s")
_SCHEME_VARS = frozenset({"r", "s"})
_ONE = Fraction(1)
_ZERO = Fraction(0)


@dataclass(frozen=True)
class AxiomScheme:
    name: str
    pattern: Optional[F.Formula]  # None for the tautology scheme
    side: tuple[Constraint, ...] = ()


def _c(text: str) -> Constraint:
    from .linear import parse_constraint

    return parse_constraint(text, set(_SCHEME_VARS))


AXIOMS: dict[str, AxiomScheme] = {
    "Taut": AxiomScheme("Taut", None),
    "FA1": AxiomScheme("FA1", F.L(_ZERO, F.And((PHI, F.Neg(PHI))))),
    "FA2": AxiomScheme("FA2", F.impl(F.L(_R, F.Neg(PHI)), F.Neg(F.L(_S, PHI))), (_c("r + s > 1"),)),
    "FA3": AxiomScheme(
        "FA3",
        F.impl(F.And((F.L(_R, F.And((PHI, PSI))), F.L(_S, F.And((PHI, F.Neg(PSI)))))), F.L(_R + _S, PHI)),
        (_c("r + s <= 1"),),
    ),
    "FA4": AxiomScheme(
        "FA4",
        F.impl(
            F.And((F.Neg(F.L(_R, F.And((PHI, PSI)))), F.Neg(F.L(_S, F.And((PHI, F.Neg(PSI))))))),
            F.Neg(F.L(_R + _S, PHI)),
        ),
        (_c("r + s <= 1"),),
    ),
    "Mono": AxiomScheme("Mono", F.impl(F.L(_ONE, F.impl(PHI, PSI)), F.impl(F.L(_R, PHI), F.L(_R, PSI)))),
    "FuncNext": AxiomScheme("FuncNext", F.iff(F.Next(F.Neg(PHI)), F.Neg(F.Next(PHI)))),
    "ConjNext": AxiomScheme("ConjNext", F.iff(F.Next(F.And((PHI, PSI))), F.And((F.Next(PHI), F.Next(PSI))))),
    "M": AxiomScheme("M", F.iff(F.L(_R, F.Next(PHI)), F.Next(F.L(_R, PHI)))),
    "Id": AxiomScheme("Id", F.iff(F.Next(PHI), PHI)),
    "H1": AxiomScheme("H1", F.impl(F.L(_R, PHI), F.L(_ONE, F.L(_R, PHI)))),
    "H2": AxiomScheme("H2", F.impl(F.Neg(F.L(_R, PHI)), F.L(_ONE, F.Neg(F.L(_R, PHI))))),
}

_BASE = ("Taut", "FA1", "FA2", "FA3", "FA4", "Mono", "FuncNext", "ConjNext")

SYSTEM_AXIOMS: dict[str, tuple[str, ...]] = {
    "H_DPL": _BASE,
    "H_M": _BASE + ("M",),
    "H_Pure": _BASE + ("M", "Id"),
    "H_ADS": _BASE + ("M", "H1", "H2"),
}

# systems whose Archimedean rule is the n = 0 form
CHAINED_GARCH_SYSTEMS = frozenset({"H_DPL"})


class MatchError(ValueError):
    pass


def _match_threshold(pat: F.Threshold, cand: F.Threshold, tbind: dict[str, Affine]) -> None:
    cand_aff = F.as_affine(cand)
    pat_aff = F.as_affine(pat)
    unbound = [v for v in pat_aff.variables() if v not in tbind]
    if len(unbound) == 1 and not (pat_aff.variables() - set(unbound)) \
            and pat_aff.const == 0 and pat_aff.coeffs()[unbound[0]] == 1:
        tbind[unbound[0]] = cand_aff
        return
    if unbound:
        raise MatchError(f"threshold pattern {pat_aff} has unresolved scheme variables")
    if pat_aff.substitute(tbind) != cand_aff:
        raise MatchError(f"threshold {cand_aff} does not fit pattern {pat_aff}")


def _match(pat: F.Formula, cand: F.Formula, fbind: dict[str, F.Formula], tbind: dict[str, Affine]) -> None:
    if isinstance(pat, F.FVar):
        bound = fbind.get(pat.name)
        if bound is None:
            fbind[pat.name] = cand
        elif bound != cand:
            raise MatchError(f"slot {pat.name} bound to two different formulas")
        return
    if type(pat) is not type(cand):
        raise MatchError(f"{type(cand).__name__} where {type(pat).__name__} expected")
    if isinstance(pat, F.Atom):
        if pat.name != cand.name:
            raise MatchError(f"atom {cand.name} where {pat.name} expected")
        return
    if isinstance(pat, F.Neg):
        _match(pat.body, cand.body, fbind, tbind)
        return
    if isinstance(pat, F.Next):
        _match(pat.body, cand.body, fbind, tbind)
        return
    if isinstance(pat, F.And):
        if len(pat.items) != len(cand.items):
            raise MatchError("conjunction arity mismatch")
        for p, c in zip(pat.items, cand.items):
            _match(p, c, fbind, tbind)
        return
    if isinstance(pat, F.L):
        _match_threshold(pat.threshold, cand.threshold, tbind)
        _match(pat.body, cand.body, fbind, tbind)
        return
    raise MatchError(f"axiom patterns do not contain {type(pat).__name__} nodes")


def match_axiom(name: str, candidate: F.Formula, cset: ConstraintSet, system: str = "H_DPL") -> dict:
    """Match candidate against the named scheme; side conditions must be
    entailed by the ambient constraint set.  Returns the substitution."""
    if name not in SYSTEM_AXIOMS.get(system, ()):
        raise MatchError(f"axiom {name} is not part of {system}")
    scheme = AXIOMS[name]
    if scheme.pattern is None:  # Taut
        if not tautology(candidate):
            raise MatchError("boolean skeleton is not a tautology")
        return {}
    fbind: dict[str, F.Formula] = {}
    tbind: dict[str, Affine] = {}
    _match(scheme.pattern, candidate, fbind, tbind)
    for side in scheme.side:
        inst = Constraint(side.expr.substitute(tbind), side.op)
        if not cset.entails(inst):
            raise MatchError(f"side condition {side} not entailed (instance: {inst})")
    return {**fbind, **{k: v for k, v in tbind.items()}}


# ---------------------------------------------------------------------------
# Propositional tautology checking over the boolean skeleton.

_TABLE_ATOMS = 20


def _skeleton(f: F.Formula, leaves: dict[F.Formula, int]):
    """Boolean structure with maximal non-boolean subformulas as leaves,
    identified syntactically (symbolic thresholds included)."""
    if isinstance(f, F.Neg):
        return ("not", _skeleton(f.body, leaves))
    if isinstance(f, F.And):
        return ("and", tuple(_skeleton(g, leaves) for g in f.items))
    idx = leaves.get(f)
    if idx is None:
        idx = len(leaves)
        leaves[f] = idx
    return ("leaf", idx)


def _leaf_pattern(i: int, k: int) -> int:
    """Truth vector of leaf i over all 2^k assignments: bit j is (j >> i) & 1."""
    half = 1 << i
    block = ((1 << half) - 1) << half  # ones in the upper half of one period
    width = half << 1
    total = 1 << k
    while width < total:
        block |= block << width
        width <<= 1
    return block & ((1 << total) - 1)


def _truth_vector(sk, k: int, patterns: list[int], full: int) -> int:
    tag = sk[0]
    if tag == "leaf":
        return patterns[sk[1]]
    if tag == "not":
        return full ^ _truth_vector(sk[1], k, patterns, full)
    out = full
    for g in sk[1]:
        out &= _truth_vector(g, k, patterns, full)
        if not out:
            break
    return out


def _table_valid(sk, k: int) -> bool:
    full = (1 << (1 << k)) - 1
    patterns = [_leaf_pattern(i, k) for i in range(k)]
    return _truth_vector(sk, k, patterns, full) == full


def _simplify(sk, var: int, value: bool):
    tag = sk[0]
    if tag == "leaf":
        if sk[1] == var:
            return value
        return sk
    if tag == "not":
        inner = _simplify(sk[1], var, value)
        if isinstance(inner, bool):
            return not inner
        return ("not", inner)
    parts = []
    for g in sk[1]:
        s = _simplify(g, var, value)
        if s is False:
            return False
        if s is not True:
            parts.append(s)
    if not parts:
        return True
    return ("and", tuple(parts))


def _vars_of(sk, out: set[int]):
    if isinstance(sk, bool):
        return
    if sk[0] == "leaf":
        out.add(sk[1])
    elif sk[0] == "not":
        _vars_of(sk[1], out)
    else:
        for g in sk[1]:
            _vars_of(g, out)


def tautology(f: F.Formula) -> bool:
    """Exact propositional validity of the boolean skeleton: bit-parallel
    truth table up to 20 leaves, case splitting above."""
    leaves: dict[F.Formula, int] = {}
    sk = _skeleton(f, leaves)
    k = len(leaves)
    if k <= _TABLE_ATOMS:
        return _table_valid(sk, k)
    return _split_valid(sk)


def _split_valid(sk) -> bool:
    if isinstance(sk, bool):
        return sk
    vs: set[int] = set()
    _vars_of(sk, vs)
    if len(vs) <= _TABLE_ATOMS:
        remap = {v: i for i, v in enumerate(sorted(vs))}
        packed = _repack(sk, remap)
        return _table_valid(packed, len(vs))
    var = next(iter(vs))
    return _split_valid(_simplify(sk, var, False)) and _split_valid(_simplify(sk, var, True))


def _repack(sk, remap):
    if sk[0] == "leaf":
        return ("leaf", remap[sk[1]])
    if sk[0] == "not":
        return ("not", _repack(sk[1], remap))
    return ("and", tuple(_repack(g, remap) for g in sk[1]))
