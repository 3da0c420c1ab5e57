"""Formula ASTs for probability logic with a dynamic operator.

The core grammar is

    f ::= atom | !f | f & f | L[q] f | O f

extended with finitely representable infinitary forms: big conjunctions
and disjunctions over three family kinds, initial-distribution operators
``I[q]``, n-step operators ``LN[n,q]``, and two limit-shaped operators
``LimL``/``LimM`` whose bodies are templates in an iteration marker
``Iter``.  Thresholds are exact rationals; inside axiom schemes and proof
files they may also be affine expressions over declared metavariables.

Derived connectives (|, ->, <->, M[q], threshold chains, top, bottom)
desugar to the core and never appear as node kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Union


class FormulaError(ValueError):
    """Malformed formula construction (bad threshold, empty family, ...)."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Thresholds: exact rationals, or affine expressions over metavariables.


@dataclass(frozen=True)
class Affine:
    """Affine expression c + sum(coeff * var) with exact rational coefficients.

    Kept in a normal form (zero coefficients dropped, variables sorted) so
    that structural equality coincides with arithmetic equality.
    """

    const: Fraction = Fraction(0)
    terms: tuple[tuple[str, Fraction], ...] = ()

    @staticmethod
    def make(const: Fraction | int = 0, coeffs: Mapping[str, Fraction] | None = None) -> "Affine":
        items = []
        for var, c in sorted((coeffs or {}).items()):
            c = Fraction(c)
            if c != 0:
                items.append((var, c))
        return Affine(Fraction(const), tuple(items))

    @staticmethod
    def var(name: str) -> "Affine":
        return Affine(Fraction(0), ((name, Fraction(1)),))

    def coeffs(self) -> dict[str, Fraction]:
        return dict(self.terms)

    def variables(self) -> set[str]:
        return {v for v, _ in self.terms}

    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other: "Affine") -> "Affine":
        cs = self.coeffs()
        for v, c in other.terms:
            cs[v] = cs.get(v, Fraction(0)) + c
        return Affine.make(self.const + other.const, cs)

    def __neg__(self) -> "Affine":
        return Affine.make(-self.const, {v: -c for v, c in self.terms})

    def __sub__(self, other: "Affine") -> "Affine":
        return self + (-other)

    def scale(self, k: Fraction) -> "Affine":
        return Affine.make(self.const * k, {v: c * k for v, c in self.terms})

    def substitute(self, binding: Mapping[str, "Threshold"]) -> "Affine":
        out = Affine(self.const, ())
        for v, c in self.terms:
            if v in binding:
                out = out + as_affine(binding[v]).scale(c)
            else:
                out = out + Affine.make(0, {v: c})
        return out

    def __str__(self) -> str:
        parts: list[str] = []
        if self.const != 0 or not self.terms:
            parts.append(str(self.const))
        for v, c in self.terms:
            if c == 1:
                term = v
            elif c == -1:
                term = f"-{v}"
            else:
                term = f"{c}*{v}"
            if parts and not term.startswith("-"):
                parts.append(f"+ {term}")
            elif parts:
                parts.append(f"- {term[1:]}")
            else:
                parts.append(term)
        return " ".join(parts)


Threshold = Union[Fraction, Affine]


def as_affine(t: Threshold) -> Affine:
    return t if isinstance(t, Affine) else Affine(Fraction(t), ())


def threshold_constant(t: Threshold) -> Optional[Fraction]:
    """The rational value of t, or None if metavariables remain."""
    if isinstance(t, Fraction):
        return t
    return t.const if t.is_constant() else None


def threshold_str(t: Threshold) -> str:
    return str(t)


def _check_threshold(t: Threshold) -> Threshold:
    c = threshold_constant(t)
    if c is not None and not (0 <= c <= 1):
        raise FormulaError(f"threshold {c} outside [0, 1]")
    return t


# ---------------------------------------------------------------------------
# AST nodes.


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Neg:
    body: "Formula"


@dataclass(frozen=True)
class And:
    items: tuple["Formula", ...]

    def __post_init__(self):
        if not self.items:
            raise FormulaError("empty conjunction")


@dataclass(frozen=True)
class L:
    """Probability-at-least operator: measure of the body is >= threshold."""

    threshold: Threshold
    body: "Formula"

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class Next:
    body: "Formula"


@dataclass(frozen=True)
class InitL:
    """Initial-distribution operator: pi(body) >= threshold, world-independent."""

    threshold: Threshold
    body: "Formula"

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class NStepL:
    """n-step operator: the n-step transition measure of the body is >= threshold.

    steps = 0 reads the initial distribution, steps = 1 is the plain L operator.
    """

    steps: int
    threshold: Threshold
    body: "Formula"

    def __post_init__(self):
        if self.steps < 0:
            raise FormulaError("negative step count")
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class Iter:
    """Iteration marker inside a NatTemplate; instantiate(k) turns it into O^k."""

    body: "Formula"


@dataclass(frozen=True)
class NatTemplate:
    """A formula with at least one Iter marker, indexed by a natural number."""

    body: "Formula"

    def __post_init__(self):
        count = _count_iters(self.body, allow=True)
        if count == 0:
            raise FormulaError("template contains no Iter marker")

    def instantiate(self, k: int) -> "Formula":
        """Replace every Iter(g) with k nested Next applications around g."""
        if k < 0:
            raise FormulaError("negative iteration index")
        return _instantiate(self.body, k)

    def next_depth(self) -> int:
        """Maximum Next nesting of instantiate(1); bounds the preimage depth per step."""
        return _next_depth(self.body) + 1


@dataclass(frozen=True)
class LimL:
    """Liminf form: liminf over k of the measure of template(k) is >= threshold."""

    threshold: Threshold
    template: NatTemplate

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class LimM:
    """Limsup form: limsup over k of the measure of template(k) is <= threshold."""

    threshold: Threshold
    template: NatTemplate

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class FVar:
    """Formula slot in an axiom scheme pattern; never occurs in user formulas."""

    name: str


# Families for big conjunctions / disjunctions.


@dataclass(frozen=True)
class FiniteFamily:
    members: tuple["Formula", ...]

    def __post_init__(self):
        if not self.members:
            raise FormulaError("empty family")


@dataclass(frozen=True)
class NatFamily:
    """Eventually constant family: member i is prefix[i] for i < len(prefix), else tail."""

    prefix: tuple["Formula", ...]
    tail: "Formula"


@dataclass(frozen=True)
class ThresholdFamily:
    """Family {template[var := s] : s rational, s < bound} (or s <= bound).

    The hole variable may appear only in threshold positions of the template.
    """

    var: str
    bound: Fraction
    strict: bool
    template: "Formula"

    def __post_init__(self):
        if not (0 <= self.bound <= 1):
            raise FormulaError(f"family bound {self.bound} outside [0, 1]")

    def member(self, value: Fraction) -> "Formula":
        return substitute_thresholds(self.template, {self.var: Fraction(value)})


Family = Union[FiniteFamily, NatFamily, ThresholdFamily]


@dataclass(frozen=True)
class BigAnd:
    family: Family


@dataclass(frozen=True)
class BigOr:
    family: Family


Formula = Union[Atom, Neg, And, BigAnd, BigOr, L, Next, InitL, NStepL, LimL, LimM, Iter, FVar]


# ---------------------------------------------------------------------------
# Derived connectives (constructors only; they desugar to the core).


def impl(a: Formula, b: Formula) -> Formula:
    return Neg(And((a, Neg(b))))


def disj(a: Formula, b: Formula) -> Formula:
    return Neg(And((Neg(a), Neg(b))))


def iff(a: Formula, b: Formula) -> Formula:
    return And((impl(a, b), impl(b, a)))


def top(basis: Formula = Atom("p")) -> Formula:
    return Neg(And((basis, Neg(basis))))


def bot(basis: Formula = Atom("p")) -> Formula:
    return And((basis, Neg(basis)))


def m_op(threshold: Threshold, body: Formula) -> Formula:
    """At-most operator M[q] f, an abbreviation for L[1-q] !f."""
    t = as_affine(threshold)
    one_minus = Affine(Fraction(1), ()) - t
    c = threshold_constant(one_minus)
    return L(c if c is not None else one_minus, Neg(body))


def l_chain(thresholds: list[Threshold], body: Formula) -> Formula:
    """Nested chain L[q1] L[q2] ... L[qk] f."""
    out = body
    for t in reversed(thresholds):
        out = L(t, out)
    return out


def next_n(n: int, body: Formula) -> Formula:
    for _ in range(n):
        body = Next(body)
    return body


# ---------------------------------------------------------------------------
# Traversal helpers.


def _count_iters(f: Formula, allow: bool) -> int:
    if isinstance(f, Iter):
        if not allow:
            raise FormulaError("nested Iter markers")
        return 1 + _count_iters(f.body, allow=False)
    if isinstance(f, Atom) or isinstance(f, FVar):
        return 0
    if isinstance(f, (Neg, Next)):
        return _count_iters(f.body, allow)
    if isinstance(f, And):
        return sum(_count_iters(g, allow) for g in f.items)
    if isinstance(f, (L, InitL, NStepL)):
        return _count_iters(f.body, allow)
    if isinstance(f, (LimL, LimM)):
        return 0  # markers inside a nested template belong to that template
    if isinstance(f, (BigAnd, BigOr)):
        fam = f.family
        if isinstance(fam, FiniteFamily):
            return sum(_count_iters(g, allow) for g in fam.members)
        if isinstance(fam, NatFamily):
            return sum(_count_iters(g, allow) for g in fam.prefix) + _count_iters(fam.tail, allow)
        return _count_iters(fam.template, allow)
    raise FormulaError(f"unknown node {f!r}")


def _instantiate(f: Formula, k: int) -> Formula:
    if isinstance(f, Iter):
        return next_n(k, f.body)
    if isinstance(f, (Atom, FVar)):
        return f
    if isinstance(f, Neg):
        return Neg(_instantiate(f.body, k))
    if isinstance(f, Next):
        return Next(_instantiate(f.body, k))
    if isinstance(f, And):
        return And(tuple(_instantiate(g, k) for g in f.items))
    if isinstance(f, L):
        return L(f.threshold, _instantiate(f.body, k))
    if isinstance(f, InitL):
        return InitL(f.threshold, _instantiate(f.body, k))
    if isinstance(f, NStepL):
        return NStepL(f.steps, f.threshold, _instantiate(f.body, k))
    if isinstance(f, (LimL, LimM)):
        return f
    if isinstance(f, (BigAnd, BigOr)):
        fam = f.family
        if isinstance(fam, FiniteFamily):
            fam2: Family = FiniteFamily(tuple(_instantiate(g, k) for g in fam.members))
        elif isinstance(fam, NatFamily):
            fam2 = NatFamily(tuple(_instantiate(g, k) for g in fam.prefix), _instantiate(fam.tail, k))
        else:
            fam2 = ThresholdFamily(fam.var, fam.bound, fam.strict, _instantiate(fam.template, k))
        return type(f)(fam2)
    raise FormulaError(f"unknown node {f!r}")


def instantiate(template: NatTemplate, k: int) -> Formula:
    return template.instantiate(k)


def substitute_thresholds(f: Formula, binding: Mapping[str, Threshold]) -> Formula:
    """Substitute metavariables / hole variables in threshold positions."""

    def sub_t(t: Threshold) -> Threshold:
        if isinstance(t, Fraction):
            return t
        t2 = t.substitute(binding)
        c = threshold_constant(t2)
        return _check_threshold(c if c is not None else t2)

    def walk(g: Formula) -> Formula:
        if isinstance(g, (Atom, FVar)):
            return g
        if isinstance(g, Neg):
            return Neg(walk(g.body))
        if isinstance(g, Next):
            return Next(walk(g.body))
        if isinstance(g, Iter):
            return Iter(walk(g.body))
        if isinstance(g, And):
            return And(tuple(walk(h) for h in g.items))
        if isinstance(g, L):
            return L(sub_t(g.threshold), walk(g.body))
        if isinstance(g, InitL):
            return InitL(sub_t(g.threshold), walk(g.body))
        if isinstance(g, NStepL):
            return NStepL(g.steps, sub_t(g.threshold), walk(g.body))
        if isinstance(g, LimL):
            return LimL(sub_t(g.threshold), NatTemplate(walk(g.template.body)))
        if isinstance(g, LimM):
            return LimM(sub_t(g.threshold), NatTemplate(walk(g.template.body)))
        if isinstance(g, (BigAnd, BigOr)):
            fam = g.family
            if isinstance(fam, FiniteFamily):
                fam2: Family = FiniteFamily(tuple(walk(h) for h in fam.members))
            elif isinstance(fam, NatFamily):
                fam2 = NatFamily(tuple(walk(h) for h in fam.prefix), walk(fam.tail))
            else:
                inner = {k: v for k, v in binding.items() if k != fam.var}
                fam2 = ThresholdFamily(
                    fam.var, fam.bound, fam.strict,
                    substitute_thresholds(fam.template, inner) if inner else fam.template,
                )
            return type(g)(fam2)
        raise FormulaError(f"unknown node {g!r}")

    return walk(f)


def substitute_atoms(f: Formula, binding: Mapping[str, Formula]) -> Formula:
    """Replace atoms (and FVar slots) by formulas; used for scheme instantiation."""

    def walk(g: Formula) -> Formula:
        if isinstance(g, Atom):
            return binding.get(g.name, g)
        if isinstance(g, FVar):
            return binding.get(g.name, g)
        if isinstance(g, Neg):
            return Neg(walk(g.body))
        if isinstance(g, Next):
            return Next(walk(g.body))
        if isinstance(g, Iter):
            return Iter(walk(g.body))
        if isinstance(g, And):
            return And(tuple(walk(h) for h in g.items))
        if isinstance(g, L):
            return L(g.threshold, walk(g.body))
        if isinstance(g, InitL):
            return InitL(g.threshold, walk(g.body))
        if isinstance(g, NStepL):
            return NStepL(g.steps, g.threshold, walk(g.body))
        if isinstance(g, LimL):
            return LimL(g.threshold, NatTemplate(walk(g.template.body)))
        if isinstance(g, LimM):
            return LimM(g.threshold, NatTemplate(walk(g.template.body)))
        if isinstance(g, (BigAnd, BigOr)):
            fam = g.family
            if isinstance(fam, FiniteFamily):
                fam2: Family = FiniteFamily(tuple(walk(h) for h in fam.members))
            elif isinstance(fam, NatFamily):
                fam2 = NatFamily(tuple(walk(h) for h in fam.prefix), walk(fam.tail))
            else:
                fam2 = ThresholdFamily(fam.var, fam.bound, fam.strict, walk(fam.template))
            return type(g)(fam2)
        raise FormulaError(f"unknown node {g!r}")

    return walk(f)


def atoms(f: Formula) -> set[str]:
    out: set[str] = set()

    def walk(g: Formula):
        if isinstance(g, Atom):
            out.add(g.name)
        elif isinstance(g, FVar):
            pass
        elif isinstance(g, (Neg, Next, Iter, L, InitL, NStepL)):
            walk(g.body)
        elif isinstance(g, And):
            for h in g.items:
                walk(h)
        elif isinstance(g, (LimL, LimM)):
            walk(g.template.body)
        elif isinstance(g, (BigAnd, BigOr)):
            fam = g.family
            if isinstance(fam, FiniteFamily):
                for h in fam.members:
                    walk(h)
            elif isinstance(fam, NatFamily):
                for h in fam.prefix:
                    walk(h)
                walk(fam.tail)
            else:
                walk(fam.template)

    walk(f)
    return out


def threshold_metavars(f: Formula) -> set[str]:
    """Metavariable names occurring in threshold positions (hole vars included)."""
    out: set[str] = set()

    def note(t: Threshold):
        if isinstance(t, Affine):
            out.update(t.variables())

    def walk(g: Formula):
        if isinstance(g, (Neg, Next, Iter)):
            walk(g.body)
        elif isinstance(g, And):
            for h in g.items:
                walk(h)
        elif isinstance(g, (L, InitL, NStepL)):
            note(g.threshold)
            walk(g.body)
        elif isinstance(g, (LimL, LimM)):
            note(g.threshold)
            walk(g.template.body)
        elif isinstance(g, (BigAnd, BigOr)):
            fam = g.family
            if isinstance(fam, FiniteFamily):
                for h in fam.members:
                    walk(h)
            elif isinstance(fam, NatFamily):
                for h in fam.prefix:
                    walk(h)
                walk(fam.tail)
            else:
                walk(fam.template)
                out.discard(fam.var)

    walk(f)
    return out


def _next_depth(f: Formula) -> int:
    if isinstance(f, (Atom, FVar)):
        return 0
    if isinstance(f, Next):
        return 1 + _next_depth(f.body)
    if isinstance(f, (Neg, Iter, L, InitL, NStepL)):
        return _next_depth(f.body)
    if isinstance(f, And):
        return max(_next_depth(g) for g in f.items)
    if isinstance(f, (LimL, LimM)):
        return _next_depth(f.template.body)
    if isinstance(f, (BigAnd, BigOr)):
        fam = f.family
        if isinstance(fam, FiniteFamily):
            return max(_next_depth(g) for g in fam.members)
        if isinstance(fam, NatFamily):
            return max([_next_depth(g) for g in fam.prefix] + [_next_depth(fam.tail)])
        return _next_depth(fam.template)
    raise FormulaError(f"unknown node {f!r}")


def subformulas(f: Formula) -> set[Formula]:
    """Closure under the defining clauses of the subformula set.

    Families contribute their finite representation: prefix members and tail
    for eventually constant families, the template with its symbolic hole for
    threshold families, the template body for the limit operators.
    """
    out: set[Formula] = set()

    def walk(g: Formula):
        if g in out:
            return
        out.add(g)
        if isinstance(g, (Atom, FVar)):
            return
        if isinstance(g, (Neg, Next, Iter, L, InitL, NStepL)):
            walk(g.body)
        elif isinstance(g, And):
            for h in g.items:
                walk(h)
        elif isinstance(g, (LimL, LimM)):
            walk(g.template.body)
        elif isinstance(g, (BigAnd, BigOr)):
            fam = g.family
            if isinstance(fam, FiniteFamily):
                for h in fam.members:
                    walk(h)
            elif isinstance(fam, NatFamily):
                for h in fam.prefix:
                    walk(h)
                walk(fam.tail)
            else:
                walk(fam.template)

    walk(f)
    return out


def formal_negation(f: Formula) -> Formula:
    """The negation normal transform: ~p = !p, ~(!f) = f, ~(big and) = big or
    of member negations, ~(L[r] f) = !L[r] !~f, ~(O f) = O ~f.

    Defined on the grammar without InitL/NStepL/LimL/LimM nodes.
    """
    if isinstance(f, Atom):
        return Neg(f)
    if isinstance(f, Neg):
        return f.body
    if isinstance(f, And):
        return BigOr(FiniteFamily(tuple(formal_negation(g) for g in f.items)))
    if isinstance(f, BigAnd) or isinstance(f, BigOr):
        fam = f.family
        if isinstance(fam, FiniteFamily):
            fam2: Family = FiniteFamily(tuple(formal_negation(g) for g in fam.members))
        elif isinstance(fam, NatFamily):
            fam2 = NatFamily(tuple(formal_negation(g) for g in fam.prefix), formal_negation(fam.tail))
        else:
            fam2 = ThresholdFamily(fam.var, fam.bound, fam.strict, formal_negation(fam.template))
        return BigOr(fam2) if isinstance(f, BigAnd) else BigAnd(fam2)
    if isinstance(f, L):
        # ~(L[r] f) = !M[1-r] ~f, and M[1-r] g desugars to L[r] !g.
        return Neg(L(f.threshold, Neg(formal_negation(f.body))))
    if isinstance(f, Next):
        return Next(formal_negation(f.body))
    raise FormulaError(f"formal negation undefined on {type(f).__name__} nodes")


# ---------------------------------------------------------------------------
# Concrete syntax.

_KEYWORDS = {
    "O", "L", "M", "I", "LN", "And", "Or", "BigAnd", "AndTail", "OrTail",
    "AndBelow", "OrBelow", "LimL", "LimM", "Iter",
}

_SYMBOLS = ["<->", "->", "<=", "<", "&", "|", "!", "(", ")", "[", "]",
            "{", "}", ",", ";", "^", "+", "-", "*", "/"]


@dataclass
class _Token:
    kind: str  # 'ident', 'num', 'sym', 'eof'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Token("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str, metavars: Optional[set[str]] = None):
        self.toks = _tokenize(text)
        self.pos = 0
        self.metavars = metavars or set()
        self.hole_vars: list[str] = []
        self.in_template = False

    # -- token plumbing

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def at_sym(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == text

    def at_kw(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == text

    # -- thresholds

    def parse_rational(self) -> Fraction:
        t = self.expect("num")
        num = int(t.text)
        if self.at_sym("/"):
            self.next()
            den = int(self.expect("num").text)
            if den == 0:
                raise ParseError("zero denominator", t.line, t.col)
            return Fraction(num, den)
        return Fraction(num)

    def parse_affine(self) -> Threshold:
        tok = self.peek()
        expr = self._affine_term(negate=False)
        while self.at_sym("+") or self.at_sym("-"):
            op = self.next().text
            expr = expr + self._affine_term(negate=(op == "-"))
        c = threshold_constant(expr)
        if c is not None:
            return c
        unknown = expr.variables() - self.metavars - set(self.hole_vars)
        if unknown:
            raise ParseError(f"undeclared metavariable {sorted(unknown)[0]!r}", tok.line, tok.col)
        return expr

    def _affine_term(self, negate: bool) -> Affine:
        t = self.peek()
        if t.kind == "num":
            q = self.parse_rational()
            if self.at_sym("*"):
                self.next()
                var = self.expect("ident").text
                a = Affine.make(0, {var: q})
            else:
                a = Affine(q, ())
        elif t.kind == "ident":
            self.next()
            a = Affine.var(t.text)
            if self.at_sym("*"):
                self.next()
                a = a.scale(self.parse_rational())
            elif self.at_sym("/"):
                self.next()
                den = int(self.expect("num").text)
                if den == 0:
                    raise ParseError("zero denominator", t.line, t.col)
                a = a.scale(Fraction(1, den))
        else:
            raise ParseError(f"expected threshold, found {t.text!r}", t.line, t.col)
        return -a if negate else a

    def parse_threshold(self) -> Threshold:
        tok = self.peek()
        t = self.parse_affine()
        c = threshold_constant(t)
        if c is not None and not (0 <= c <= 1):
            raise ParseError(f"threshold {c} outside [0, 1]", tok.line, tok.col)
        return t

    # -- formulas (precedence: ! > & > | > -> > <->; prefix ops bind tightest)

    def parse_formula(self) -> Formula:
        lhs = self.parse_impl()
        while self.at_sym("<->"):
            self.next()
            lhs = iff(lhs, self.parse_impl())
        return lhs

    def parse_impl(self) -> Formula:
        lhs = self.parse_or()
        if self.at_sym("->"):
            self.next()
            return impl(lhs, self.parse_impl())
        return lhs

    def parse_or(self) -> Formula:
        lhs = self.parse_and()
        while self.at_sym("|"):
            self.next()
            lhs = disj(lhs, self.parse_and())
        return lhs

    def parse_and(self) -> Formula:
        lhs = self.parse_unary()
        while self.at_sym("&"):
            self.next()
            lhs = And((lhs, self.parse_unary()))
        return lhs

    def parse_unary(self) -> Formula:
        t = self.peek()
        if self.at_sym("!"):
            self.next()
            return Neg(self.parse_unary())
        if self.at_kw("O"):
            self.next()
            n = 1
            if self.at_sym("^"):
                self.next()
                n = int(self.expect("num").text)
            return next_n(n, self.parse_unary())
        if self.at_kw("L") or self.at_kw("M") or self.at_kw("I"):
            kw = self.next().text
            self.expect("sym", "[")
            thr = self.parse_threshold()
            self.expect("sym", "]")
            body = self.parse_unary()
            if kw == "L":
                return L(thr, body)
            if kw == "M":
                return m_op(thr, body)
            return InitL(thr, body)
        if self.at_kw("LN"):
            self.next()
            self.expect("sym", "[")
            steps = int(self.expect("num").text)
            self.expect("sym", ",")
            thr = self.parse_threshold()
            self.expect("sym", "]")
            return NStepL(steps, thr, self.parse_unary())
        if self.at_kw("LimL") or self.at_kw("LimM"):
            kw = self.next().text
            self.expect("sym", "[")
            thr = self.parse_threshold()
            self.expect("sym", "]")
            self.expect("sym", "{")
            saved = self.in_template
            self.in_template = True
            body = self.parse_formula()
            self.in_template = saved
            self.expect("sym", "}")
            try:
                template = NatTemplate(body)
            except FormulaError as e:
                raise ParseError(str(e), t.line, t.col)
            return (LimL if kw == "LimL" else LimM)(thr, template)
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        t = self.peek()
        if self.at_sym("("):
            self.next()
            f = self.parse_formula()
            self.expect("sym", ")")
            return f
        if self.at_kw("And"):
            # n-ary plain conjunction node; BigAnd(...) spells the family form
            self.next()
            return And(tuple(self._paren_list()))
        if self.at_kw("BigAnd") or self.at_kw("Or"):
            kw = self.next().text
            members = self._paren_list()
            fam = FiniteFamily(tuple(members))
            return BigAnd(fam) if kw == "BigAnd" else BigOr(fam)
        if self.at_kw("AndTail") or self.at_kw("OrTail"):
            kw = self.next().text
            self.expect("sym", "(")
            prefix: list[Formula] = []
            if not self.at_sym(";"):
                prefix.append(self.parse_formula())
                while self.at_sym(","):
                    self.next()
                    prefix.append(self.parse_formula())
            self.expect("sym", ";")
            tail = self.parse_formula()
            self.expect("sym", ")")
            fam = NatFamily(tuple(prefix), tail)
            return BigAnd(fam) if kw == "AndTail" else BigOr(fam)
        if self.at_kw("AndBelow") or self.at_kw("OrBelow"):
            kw = self.next().text
            self.expect("sym", "[")
            var = self.expect("ident").text
            if var in _KEYWORDS:
                raise ParseError(f"reserved word {var!r} cannot be a hole variable", t.line, t.col)
            if self.at_sym("<="):
                self.next()
                strict = False
            else:
                self.expect("sym", "<")
                strict = True
            bound_tok = self.peek()
            bound = self.parse_rational()
            if not (0 <= bound <= 1):
                raise ParseError(f"threshold {bound} outside [0, 1]", bound_tok.line, bound_tok.col)
            self.expect("sym", "]")
            self.expect("sym", "{")
            self.hole_vars.append(var)
            template = self.parse_formula()
            self.hole_vars.pop()
            self.expect("sym", "}")
            fam = ThresholdFamily(var, bound, strict, template)
            return BigAnd(fam) if kw == "AndBelow" else BigOr(fam)
        if self.at_kw("Iter"):
            if not self.in_template:
                raise ParseError("Iter marker outside LimL/LimM template", t.line, t.col)
            self.next()
            self.expect("sym", "(")
            saved = self.in_template
            self.in_template = False  # no nesting
            body = self.parse_formula()
            self.in_template = saved
            self.expect("sym", ")")
            return Iter(body)
        if t.kind == "ident":
            if t.text in _KEYWORDS:
                raise ParseError(f"reserved word {t.text!r} cannot be an atom", t.line, t.col)
            self.next()
            return Atom(t.text)
        raise ParseError(f"expected a formula, found {t.text or 'end of input'!r}", t.line, t.col)

    def _paren_list(self) -> list[Formula]:
        self.expect("sym", "(")
        out = [self.parse_formula()]
        while self.at_sym(","):
            self.next()
            out.append(self.parse_formula())
        self.expect("sym", ")")
        return out


def parse(text: str, metavars: Optional[set[str]] = None) -> Formula:
    """Parse the concrete syntax; metavars, when given, may appear in thresholds."""
    p = _Parser(text, metavars)
    f = p.parse_formula()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return f


# Precedence levels for the printer.
_P_IFF, _P_IMPL, _P_OR, _P_AND, _P_PREFIX, _P_ATOM = 1, 2, 3, 4, 5, 6


def _print(f: Formula) -> tuple[str, int]:
    if isinstance(f, Atom):
        return f.name, _P_ATOM
    if isinstance(f, FVar):
        return f"?{f.name}", _P_ATOM
    if isinstance(f, Neg):
        s, p = _print(f.body)
        return ("!" + (f"({s})" if p < _P_PREFIX else s)), _P_PREFIX
    if isinstance(f, And):
        if len(f.items) == 2:
            ls, lp = _print(f.items[0])
            rs, rp = _print(f.items[1])
            left = f"({ls})" if lp < _P_AND else ls
            right = f"({rs})" if rp <= _P_AND else rs
            return f"{left} & {right}", _P_AND
        return "And(" + ", ".join(_print(g)[0] for g in f.items) + ")", _P_ATOM
    if isinstance(f, Next):
        s, p = _print(f.body)
        return ("O " + (f"({s})" if p < _P_PREFIX else s)), _P_PREFIX
    if isinstance(f, L):
        s, p = _print(f.body)
        return (f"L[{threshold_str(f.threshold)}] " + (f"({s})" if p < _P_PREFIX else s)), _P_PREFIX
    if isinstance(f, InitL):
        s, p = _print(f.body)
        return (f"I[{threshold_str(f.threshold)}] " + (f"({s})" if p < _P_PREFIX else s)), _P_PREFIX
    if isinstance(f, NStepL):
        s, p = _print(f.body)
        body = f"({s})" if p < _P_PREFIX else s
        return f"LN[{f.steps},{threshold_str(f.threshold)}] " + body, _P_PREFIX
    if isinstance(f, LimL) or isinstance(f, LimM):
        name = "LimL" if isinstance(f, LimL) else "LimM"
        return f"{name}[{threshold_str(f.threshold)}]{{ {_print(f.template.body)[0]} }}", _P_ATOM
    if isinstance(f, Iter):
        return f"Iter({_print(f.body)[0]})", _P_ATOM
    if isinstance(f, BigAnd) or isinstance(f, BigOr):
        is_and = isinstance(f, BigAnd)
        fam = f.family
        if isinstance(fam, FiniteFamily):
            name = "BigAnd" if is_and else "Or"
            return name + "(" + ", ".join(_print(g)[0] for g in fam.members) + ")", _P_ATOM
        if isinstance(fam, NatFamily):
            name = "AndTail" if is_and else "OrTail"
            prefix = ", ".join(_print(g)[0] for g in fam.prefix)
            return f"{name}({prefix}; {_print(fam.tail)[0]})", _P_ATOM
        name = "AndBelow" if is_and else "OrBelow"
        op = "<" if fam.strict else "<="
        return f"{name}[{fam.var} {op} {fam.bound}]{{ {_print(fam.template)[0]} }}", _P_ATOM
    raise FormulaError(f"unknown node {f!r}")


def print_formula(f: Formula) -> str:
    """Canonical text form; parse(print_formula(f)) is structurally f."""
    return _print(f)[0]
