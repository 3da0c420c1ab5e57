"""Hilbert-style derivation checking with rational metavariables.

A derivation is an ordered DAG of steps inside a named lemma.  Step rules:
axiom instances (matched against the active system's schemes under the
lemma's constraint set), assumption references, citations of previously
checked closed lemmas (instantiated by matching), modus ponens, the two
necessitation rules (barred under assumptions), and the parametric
Archimedean rule whose countably many premises are represented by one
sub-derivation in a fresh threshold metavariable bounded below the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .. import formula as F
from ..formula import Affine
from .axioms import AXIOMS, MatchError, SYSTEM_AXIOMS, match_axiom, _match, tautology
from .linear import Constraint, ConstraintSet, parse_constraint


class ProofFileError(ValueError):
    pass


@dataclass
class GArchPayload:
    param: str
    exponent: int
    chain: tuple[F.Threshold, ...]
    target: F.Threshold
    sub: "Derivation"


@dataclass
class Step:
    id: int
    formula: F.Formula
    rule: str  # Axiom | Assumption | Theorem | MP | NecL1 | NecNext | GArch
    axiom: Optional[str] = None
    index: Optional[int] = None
    lemma: Optional[str] = None
    premises: tuple[int, ...] = ()
    garch: Optional[GArchPayload] = None


@dataclass
class Derivation:
    name: str
    system: str
    metavars: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    assumptions: tuple[F.Formula, ...]
    steps: tuple[Step, ...]

    @property
    def conclusion(self) -> F.Formula:
        return self.steps[-1].formula

    def constraint_set(self) -> ConstraintSet:
        return ConstraintSet.make(self.metavars, self.constraints)


@dataclass
class CheckResult:
    name: str
    ok: bool
    step_id: Optional[int] = None
    rule: Optional[str] = None
    reason: Optional[str] = None

    def message(self) -> str:
        if self.ok:
            return f"{self.name}: ok"
        return f"{self.name}: step {self.step_id} ({self.rule}): {self.reason}"


def _fail(d: Derivation, step: Optional[Step], reason: str) -> CheckResult:
    return CheckResult(
        d.name, False,
        step.id if step else None,
        step.rule if step else None,
        reason,
    )


# A theorem of a smaller system stays a theorem of the extensions (the
# chained Archimedean rule with next exponents is derivable once M is
# present, so the extension relation covers the rule sets as well).
_SYSTEM_EXTENDS = {
    "H_DPL": frozenset(),
    "H_M": frozenset({"H_DPL"}),
    "H_Pure": frozenset({"H_DPL", "H_M"}),
    "H_ADS": frozenset({"H_DPL", "H_M"}),
}


def _schema_thresholds(f: F.Formula, out: list, ok: list) -> None:
    """Collect thresholds; flag nodes outside the finitary schema grammar."""
    if isinstance(f, F.Atom):
        return
    if isinstance(f, F.Neg) or isinstance(f, F.Next):
        _schema_thresholds(f.body, out, ok)
        return
    if isinstance(f, F.And):
        for g in f.items:
            _schema_thresholds(g, out, ok)
        return
    if isinstance(f, F.L):
        out.append(f.threshold)
        _schema_thresholds(f.body, out, ok)
        return
    ok.append(type(f).__name__)


def _wellformed(f: F.Formula, cset: ConstraintSet) -> Optional[str]:
    """Schema formulas stay inside the finitary grammar, and every symbolic
    threshold must provably lie in [0, 1] under the constraints."""
    thresholds: list[F.Threshold] = []
    bad: list[str] = []
    _schema_thresholds(f, thresholds, bad)
    if bad:
        return f"{bad[0]} nodes are outside the proof grammar"
    for t in thresholds:
        a = F.as_affine(t)
        if a.is_constant():
            continue
        if not cset.entails(Constraint(-a, "le")):
            return f"threshold {a} not provably >= 0"
        if not cset.entails(Constraint(a - Affine(Fraction(1), ()), "le")):
            return f"threshold {a} not provably <= 1"
    return None


def check_derivation(d: Derivation, library: dict[str, Derivation]) -> CheckResult:
    """Check every step; the first failure names the step, rule, and condition."""
    if d.system not in SYSTEM_AXIOMS:
        return _fail(d, None, f"unknown system {d.system}")
    cset = d.constraint_set()
    if not cset.satisfiable():
        return _fail(d, None, "constraint set unsatisfiable")
    if not d.steps:
        return _fail(d, None, "derivation has no steps")
    return _check_steps(d, d.steps, d.assumptions, cset, library)


def _check_steps(
    d: Derivation,
    steps: tuple[Step, ...],
    assumptions: tuple[F.Formula, ...],
    cset: ConstraintSet,
    library: dict[str, Derivation],
) -> CheckResult:
    proved: dict[int, F.Formula] = {}
    under_assumptions = bool(assumptions)
    for a in assumptions:
        reason = _wellformed(a, cset)
        if reason:
            return _fail(d, None, f"assumption {F.print_formula(a)}: {reason}")
    for step in steps:
        if step.id in proved:
            return _fail(d, step, f"duplicate step id {step.id}")
        reason = _wellformed(step.formula, cset)
        if reason:
            return _fail(d, step, reason)

        def premise(i: int) -> Optional[F.Formula]:
            return proved.get(i)

        if step.rule == "Axiom":
            if step.axiom is None:
                return _fail(d, step, "missing axiom name")
            try:
                match_axiom(step.axiom, step.formula, cset, d.system)
            except MatchError as e:
                return _fail(d, step, str(e))
            except KeyError:
                return _fail(d, step, f"unknown axiom {step.axiom}")
        elif step.rule == "Assumption":
            if step.index is None or not (0 <= step.index < len(assumptions)):
                return _fail(d, step, "assumption index out of range")
            if assumptions[step.index] != step.formula:
                return _fail(d, step, "formula differs from the cited assumption")
        elif step.rule == "Theorem":
            if step.lemma not in library:
                return _fail(d, step, f"lemma {step.lemma!r} not in the checked library")
            cited = library[step.lemma]
            if cited.assumptions:
                return _fail(d, step, "only closed lemmas may be cited")
            if cited.system != d.system and cited.system not in _SYSTEM_EXTENDS[d.system]:
                return _fail(d, step, f"{cited.system} theorems are not available in {d.system}")
            reason = _match_theorem(cited, step.formula, cset)
            if reason:
                return _fail(d, step, reason)
        elif step.rule == "MP":
            if len(step.premises) != 2:
                return _fail(d, step, "modus ponens takes two premises")
            imp, ant = premise(step.premises[0]), premise(step.premises[1])
            if imp is None or ant is None:
                return _fail(d, step, "premise id does not refer to an earlier step")
            if imp != F.impl(ant, step.formula):
                return _fail(d, step, "premises do not fit the implication shape")
        elif step.rule == "NecL1":
            if under_assumptions:
                return _fail(d, step, "necessitation under assumptions")
            if len(step.premises) != 1:
                return _fail(d, step, "necessitation takes one premise")
            prem = premise(step.premises[0])
            if prem is None:
                return _fail(d, step, "premise id does not refer to an earlier step")
            if step.formula != F.L(Fraction(1), prem):
                return _fail(d, step, "conclusion is not the L[1] closure of the premise")
        elif step.rule == "NecNext":
            if under_assumptions:
                return _fail(d, step, "necessitation under assumptions")
            if len(step.premises) != 1:
                return _fail(d, step, "necessitation takes one premise")
            prem = premise(step.premises[0])
            if prem is None:
                return _fail(d, step, "premise id does not refer to an earlier step")
            if step.formula != F.Next(prem):
                return _fail(d, step, "conclusion is not the next closure of the premise")
        elif step.rule == "GArch":
            reason = _check_garch(d, step, assumptions, cset, library)
            if reason:
                return _fail(d, step, reason)
        else:
            return _fail(d, step, f"unknown rule {step.rule!r}")
        proved[step.id] = step.formula
    return CheckResult(d.name, True)


def _match_theorem(cited: Derivation, candidate: F.Formula, cset: ConstraintSet) -> Optional[str]:
    """Instantiate a closed lemma: its atoms become formula slots and its
    metavariables threshold slots; its constraints must be entailed."""
    pattern = F.substitute_atoms(
        cited.conclusion, {a: F.FVar(f"atom:{a}") for a in F.atoms(cited.conclusion)}
    )
    fbind: dict[str, F.Formula] = {}
    tbind: dict[str, Affine] = {}
    # rename the lemma's metavariables so they cannot collide with ours
    renamed = F.substitute_thresholds(pattern, {v: Affine.var(f"mv:{v}") for v in cited.metavars})
    try:
        _match(renamed, candidate, fbind, tbind)
    except MatchError as e:
        return str(e)
    for v in cited.metavars:
        if f"mv:{v}" not in tbind:
            return f"metavariable {v} of {cited.name} left uninstantiated"
    subst = {v: tbind[f"mv:{v}"] for v in cited.metavars}
    for c in cited.constraints:
        lifted = Constraint(c.expr.substitute(subst), c.op)
        if not cset.entails(lifted):
            return f"constraint {c} of {cited.name} not entailed (instance: {lifted})"
    return None


def _strip_impl(f: F.Formula) -> Optional[tuple[F.Formula, F.Formula]]:
    # impl(a, b) is Neg(And((a, Neg(b))))
    if isinstance(f, F.Neg) and isinstance(f.body, F.And) and len(f.body.items) == 2:
        a, nb = f.body.items
        if isinstance(nb, F.Neg):
            return a, nb.body
    return None


def _check_garch(
    d: Derivation,
    step: Step,
    assumptions: tuple[F.Formula, ...],
    cset: ConstraintSet,
    library: dict[str, Derivation],
) -> Optional[str]:
    g = step.garch
    if g is None:
        return "missing parametric payload"
    if d.system != "H_DPL" and g.exponent != 0:
        return f"{d.system} admits the Archimedean rule only without next exponents"
    if g.param in cset.metavars:
        return f"parameter {g.param} is not fresh"
    for a in assumptions:
        if g.param in F.threshold_metavars(a):
            return f"parameter {g.param} occurs in an assumption"
    if g.param in F.threshold_metavars(step.formula):
        return f"parameter {g.param} occurs in the conclusion"
    sigma = Affine.var(g.param)
    target = F.as_affine(g.target)
    if g.param in target.variables() or any(g.param in F.as_affine(c).variables() for c in g.chain):
        return f"parameter {g.param} occurs in the rule indices"
    sub_cset = cset.extended(
        [g.param],
        [Constraint(sigma - target, "lt")],  # sigma < target; 0 <= sigma is implicit
    )
    if not sub_cset.satisfiable():
        return "parametric premise constraints unsatisfiable (target admits no smaller threshold)"
    sub_result = _check_steps(g.sub, g.sub.steps, assumptions, sub_cset, library)
    if not sub_result.ok:
        return f"sub-derivation step {sub_result.step_id} ({sub_result.rule}): {sub_result.reason}"
    sub_conclusion = g.sub.conclusion
    parts = _strip_impl(sub_conclusion)
    if parts is None:
        return "sub-derivation conclusion is not an implication"
    antecedent, core = parts
    for _ in range(g.exponent):
        if not isinstance(core, F.Next):
            return "sub-derivation conclusion has too few next operators"
        core = core.body
    for i, c in enumerate(g.chain):
        if not isinstance(core, F.L) or F.as_affine(core.threshold) != F.as_affine(c):
            return f"chain index {i} does not match the sub-derivation conclusion"
        core = core.body
    if not isinstance(core, F.L) or F.as_affine(core.threshold) != sigma:
        return "parametric threshold is not in the final chain position"
    body = core.body
    if g.param in F.threshold_metavars(antecedent) or g.param in F.threshold_metavars(body):
        return "parameter occurs outside the chain position"
    expected = F.impl(
        antecedent,
        F.next_n(g.exponent, F.l_chain(list(g.chain) + [g.target], body)),
    )
    if step.formula != expected:
        return "conclusion does not replace the parameter by the target"
    return None


# ---------------------------------------------------------------------------
# Proof file loading.


def _parse_threshold_text(text: str, metavars: set[str]) -> F.Threshold:
    from .linear import _parse_affine

    a = _parse_affine(str(text), metavars)
    c = F.threshold_constant(a)
    return c if c is not None else a


def _load_steps(doc, metavars: set[str], name: str) -> tuple[Step, ...]:
    steps = []
    for sdoc in doc:
        try:
            sid = int(sdoc["id"])
            formula = F.parse(sdoc["formula"], metavars)
            rule = sdoc["rule"]
        except (KeyError, TypeError) as e:
            raise ProofFileError(f"{name}: malformed step ({e})")
        except F.ParseError as e:
            raise ProofFileError(f"{name}: step {sdoc.get('id')}: {e}")
        step = Step(id=sid, formula=formula, rule=rule)
        if rule == "Axiom":
            step.axiom = sdoc.get("axiom")
        elif rule == "Assumption":
            step.index = sdoc.get("index")
        elif rule == "Theorem":
            step.lemma = sdoc.get("lemma")
        elif rule == "MP":
            step.premises = tuple(sdoc.get("premises", ()))
        elif rule in ("NecL1", "NecNext"):
            prem = sdoc.get("premise")
            step.premises = (prem,) if prem is not None else tuple(sdoc.get("premises", ()))
        elif rule == "GArch":
            try:
                param = sdoc["param"]
                exponent = int(sdoc.get("exponent", 0))
                chain = tuple(_parse_threshold_text(c, metavars) for c in sdoc.get("chain", []))
                target = _parse_threshold_text(sdoc["target"], metavars)
                sub_steps = _load_steps(sdoc["sub"]["steps"], metavars | {param}, f"{name}/sub")
            except (KeyError, TypeError) as e:
                raise ProofFileError(f"{name}: step {sid}: malformed parametric payload ({e})")
            except F.ParseError as e:
                raise ProofFileError(f"{name}: step {sid}: {e}")
            sub = Derivation(
                name=f"{name}#garch{sid}", system="H_DPL", metavars=(),
                constraints=(), assumptions=(), steps=sub_steps,
            )
            step.garch = GArchPayload(param, exponent, chain, target, sub)
        steps.append(step)
    return tuple(steps)


def load_proof_file_doc(doc: dict) -> list[Derivation]:
    if not isinstance(doc, dict) or not isinstance(doc.get("lemmas"), list):
        raise ProofFileError("proof file must hold an object with a 'lemmas' list")
    out = []
    for ldoc in doc["lemmas"]:
        try:
            name = ldoc["name"]
            system = ldoc.get("system", "H_DPL")
            metavars = tuple(ldoc.get("metavars", ()))
        except (KeyError, TypeError) as e:
            raise ProofFileError(f"malformed lemma ({e})")
        mset = set(metavars)
        try:
            constraints = tuple(parse_constraint(c, mset) for c in ldoc.get("constraints", ()))
            assumptions = tuple(F.parse(a, mset) for a in ldoc.get("assumptions", ()))
            steps = _load_steps(ldoc.get("steps", ()), mset, name)
        except F.ParseError as e:
            raise ProofFileError(f"{name}: {e}")
        out.append(Derivation(name, system, metavars, constraints, assumptions, steps))
    return out


def load_proof_file(path: str) -> list[Derivation]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ProofFileError(f"invalid JSON: {e}")
    return load_proof_file_doc(doc)


def check_proof_file(derivations: list[Derivation], library: Optional[dict[str, Derivation]] = None) -> list[CheckResult]:
    """Check lemmas in order; each successfully checked closed lemma becomes
    citable by the ones after it."""
    lib = dict(library or {})
    results = []
    for d in derivations:
        result = check_derivation(d, lib)
        results.append(result)
        if result.ok and not d.assumptions:
            lib[d.name] = d
    return results


def builtin_corpus() -> list[Derivation]:
    """The lemma corpus shipped with the package."""
    from importlib.resources import files

    doc = json.loads(files("markovlogic.proofs").joinpath("corpus.json").read_text())
    return load_proof_file_doc(doc)
