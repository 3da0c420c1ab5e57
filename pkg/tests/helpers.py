"""Shared generators for the test suite: random formulas, axiom instances,
system-class process sampling, and derivation mutation."""

from __future__ import annotations

import dataclasses
import random
from fractions import Fraction

from markovlogic import formula as F
from markovlogic.process import (
    DynamicMarkovProcess,
    random_ads,
    random_harsanyi,
    random_measure_preserving,
    random_process,
    random_pure,
)
from markovlogic.proofs.axioms import AXIOMS
from markovlogic.proofs.checker import Derivation, Step


def random_threshold(rng: random.Random, max_denom: int = 8) -> Fraction:
    den = rng.randint(1, max_denom)
    return Fraction(rng.randint(0, den), den)


def random_formula(rng: random.Random, depth: int = 3, atoms=("p", "q"), max_denom: int = 8) -> F.Formula:
    """Random finitary formula (atoms, negation, conjunction, L, next)."""
    if depth <= 0 or rng.random() < 0.25:
        return F.Atom(rng.choice(atoms))
    kind = rng.randrange(4)
    if kind == 0:
        return F.Neg(random_formula(rng, depth - 1, atoms, max_denom))
    if kind == 1:
        return F.And((
            random_formula(rng, depth - 1, atoms, max_denom),
            random_formula(rng, depth - 1, atoms, max_denom),
        ))
    if kind == 2:
        return F.L(random_threshold(rng, max_denom), random_formula(rng, depth - 1, atoms, max_denom))
    return F.Next(random_formula(rng, depth - 1, atoms, max_denom))


def random_valuation(rng: random.Random, n: int, atoms=("p", "q")) -> dict[str, int]:
    return {a: rng.randrange(1 << n) for a in atoms}


_TAUT_TEMPLATES = [
    lambda a, b: F.impl(a, a),
    lambda a, b: F.disj(a, F.Neg(a)),
    lambda a, b: F.impl(F.And((a, b)), a),
    lambda a, b: F.impl(a, F.disj(a, b)),
    lambda a, b: F.impl(F.And((F.impl(a, b), a)), b),
    lambda a, b: F.iff(F.Neg(F.And((a, b))), F.disj(F.Neg(a), F.Neg(b))),
]


def axiom_instance(name: str, rng: random.Random, max_denom: int = 8) -> F.Formula:
    """A random ground instance of the named scheme, side condition honored."""
    phi = random_formula(rng, 3, max_denom=max_denom)
    psi = random_formula(rng, 3, max_denom=max_denom)
    if name == "Taut":
        return rng.choice(_TAUT_TEMPLATES)(phi, psi)
    scheme = AXIOMS[name]
    for _ in range(1000):
        r = random_threshold(rng, max_denom)
        s = random_threshold(rng, max_denom)
        binding = {"r": r, "s": s}
        ok = True
        for side in scheme.side:
            inst = side.expr.substitute(binding)
            value = inst.const
            ok = ok and (value < 0 if side.op == "lt" else value <= 0)
        if ok:
            body = F.substitute_atoms(scheme.pattern, {"phi": phi, "psi": psi})
            return F.substitute_thresholds(body, binding)
    raise RuntimeError(f"could not satisfy the side condition of {name}")


def process_for_system(system: str, rng: random.Random, n_max: int = 4, denom: int = 5) -> DynamicMarkovProcess:
    n = rng.randint(1, n_max)
    seed = rng.getrandbits(30)
    if system == "H_M":
        return random_measure_preserving(seed, n, denom)
    if system == "H_Pure":
        return random_pure(seed, n, denom)
    if system == "H_ADS":
        return random_ads(seed, n, denom)
    return random_process(seed, n, denom, with_init=False)


# ---------------------------------------------------------------------------
# Derivation mutation.


def _constant_threshold_positions(f: F.Formula) -> int:
    count = 0

    def walk(g):
        nonlocal count
        if isinstance(g, F.L):
            if isinstance(g.threshold, Fraction):
                count += 1
            walk(g.body)
        elif isinstance(g, (F.Neg, F.Next)):
            walk(g.body)
        elif isinstance(g, F.And):
            for h in g.items:
                walk(h)

    walk(f)
    return count


def _perturb_threshold(f: F.Formula, target: int, delta: Fraction) -> F.Formula:
    seen = [0]

    def walk(g):
        if isinstance(g, F.L):
            if isinstance(g.threshold, Fraction):
                idx = seen[0]
                seen[0] += 1
                if idx == target:
                    t = g.threshold + delta
                    t = max(Fraction(0), min(Fraction(1), t))
                    return F.L(t, walk(g.body))
            return F.L(g.threshold, walk(g.body))
        if isinstance(g, F.Neg):
            return F.Neg(walk(g.body))
        if isinstance(g, F.Next):
            return F.Next(walk(g.body))
        if isinstance(g, F.And):
            return F.And(tuple(walk(h) for h in g.items))
        return g

    return walk(f)


_RULE_NAMES = ["Axiom", "Assumption", "Theorem", "MP", "NecL1", "NecNext"]
_AXIOM_NAMES = list(AXIOMS)


def mutate_derivation(d: Derivation, rng: random.Random) -> Derivation:
    """One random single-step mutation: rule rename, premise retarget, or
    threshold perturbation; always structurally different from the input."""
    for _ in range(50):
        steps = list(d.steps)
        idx = rng.randrange(len(steps))
        step = steps[idx]
        kind = rng.choice(["rule", "premise", "threshold"])
        if kind == "rule":
            if step.rule == "Axiom" and rng.random() < 0.6:
                other = rng.choice([a for a in _AXIOM_NAMES if a != step.axiom])
                steps[idx] = dataclasses.replace(step, axiom=other)
            else:
                other = rng.choice([r for r in _RULE_NAMES if r != step.rule])
                replacement = dataclasses.replace(step, rule=other)
                if other == "MP" and len(replacement.premises) != 2:
                    earlier = [s.id for s in steps[:idx]]
                    if len(earlier) < 2:
                        continue
                    replacement = dataclasses.replace(replacement, premises=tuple(rng.sample(earlier, 2)))
                if other in ("NecL1", "NecNext") and len(replacement.premises) != 1:
                    earlier = [s.id for s in steps[:idx]]
                    if not earlier:
                        continue
                    replacement = dataclasses.replace(replacement, premises=(rng.choice(earlier),))
                if other == "Assumption" and replacement.index is None:
                    replacement = dataclasses.replace(replacement, index=0)
                if other == "Theorem" and replacement.lemma is None:
                    replacement = dataclasses.replace(replacement, lemma="refl_imp")
                steps[idx] = replacement
        elif kind == "premise":
            if not step.premises:
                continue
            earlier = [s.id for s in steps[:idx]]
            if not earlier:
                continue
            premises = list(step.premises)
            if len(premises) == 2 and rng.random() < 0.5:
                premises = [premises[1], premises[0]]
            else:
                premises[rng.randrange(len(premises))] = rng.choice(earlier)
            if tuple(premises) == step.premises:
                continue
            steps[idx] = dataclasses.replace(step, premises=tuple(premises))
        else:
            count = _constant_threshold_positions(step.formula)
            if count == 0:
                continue
            delta = rng.choice([Fraction(1, 8), Fraction(-1, 8), Fraction(1, 4)])
            mutated = _perturb_threshold(step.formula, rng.randrange(count), delta)
            if mutated == step.formula:
                continue
            steps[idx] = dataclasses.replace(step, formula=mutated)
        if tuple(steps) != d.steps:
            return dataclasses.replace(d, steps=tuple(steps))
    raise RuntimeError("could not produce a mutation")


def ground_instances(d: Derivation, rng: random.Random, count: int, max_denom: int = 8):
    """Metavariable assignments on the denominator grid satisfying the
    lemma's constraints, paired with the instantiated conclusion."""
    out = []
    tries = 0
    while len(out) < count and tries < 2000:
        tries += 1
        binding = {v: random_threshold(rng, max_denom) for v in d.metavars}
        ok = True
        for c in d.constraints:
            val = c.expr.substitute(binding).const
            ok = ok and (val < 0 if c.op == "lt" else (val <= 0 if c.op == "le" else val == 0))
        if not ok:
            continue
        try:
            conclusion = F.substitute_thresholds(d.conclusion, binding)
            assumptions = tuple(F.substitute_thresholds(a, binding) for a in d.assumptions)
        except F.FormulaError:
            continue
        out.append((binding, assumptions, conclusion))
    return out
