"""Exact linear constraint entailment over the rationals.

Side conditions of axiom schemes are affine inequalities over threshold
metavariables.  Entailment is decided by refutation: the negated goal is
added and the system is tested for satisfiability with Fourier-Motzkin
elimination, tracking strictness exactly (a combination is strict when
either parent is).  Every threshold metavariable implicitly ranges over
[0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ..formula import Affine, ParseError, _Parser


@dataclass(frozen=True)
class Constraint:
    """expr OP 0 with OP in {'le', 'lt', 'eq'}."""

    expr: Affine
    op: str

    def __post_init__(self):
        if self.op not in ("le", "lt", "eq"):
            raise ValueError(f"unknown comparison {self.op!r}")

    def negated(self) -> list["Constraint"]:
        """Disjuncts of the negation (two branches for a negated equality)."""
        if self.op == "le":
            return [Constraint(-self.expr, "lt")]
        if self.op == "lt":
            return [Constraint(-self.expr, "le")]
        return [Constraint(self.expr, "lt"), Constraint(-self.expr, "lt")]

    def __str__(self) -> str:
        sym = {"le": "<=", "lt": "<", "eq": "="}[self.op]
        return f"{self.expr} {sym} 0"


def parse_constraint(text: str, metavars: set[str]) -> Constraint:
    """Parse 'lhs OP rhs' with OP among <, <=, =, >=, >."""
    for sym, op, flip in (("<=", "le", False), (">=", "le", True),
                          ("<", "lt", False), (">", "lt", True), ("=", "eq", False)):
        if sym in text:
            left, right = text.split(sym, 1)
            la = _parse_affine(left, metavars)
            ra = _parse_affine(right, metavars)
            expr = (ra - la) if flip else (la - ra)
            return Constraint(expr, op)
    raise ParseError(f"no comparison operator in constraint {text!r}", 1, 1)


def _parse_affine(text: str, metavars: set[str]) -> Affine:
    p = _Parser(text, metavars)
    t = p.parse_affine()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input {tok.text!r} in threshold expression", tok.line, tok.col)
    return t if isinstance(t, Affine) else Affine(Fraction(t), ())


@dataclass(frozen=True)
class ConstraintSet:
    """Constraints plus the metavariables they range over (each in [0, 1])."""

    metavars: frozenset[str]
    constraints: tuple[Constraint, ...]

    @staticmethod
    def make(metavars: Iterable[str], constraints: Iterable[Constraint]) -> "ConstraintSet":
        return ConstraintSet(frozenset(metavars), tuple(constraints))

    def extended(self, extra_vars: Iterable[str], extra: Iterable[Constraint]) -> "ConstraintSet":
        return ConstraintSet(self.metavars | frozenset(extra_vars), self.constraints + tuple(extra))

    def _with_bounds(self) -> list[Constraint]:
        out = list(self.constraints)
        for v in sorted(self.metavars):
            var = Affine.var(v)
            out.append(Constraint(-var, "le"))                      # 0 <= v
            out.append(Constraint(var - Affine(Fraction(1), ()), "le"))  # v <= 1
        return out

    def satisfiable(self) -> bool:
        return _satisfiable(self._with_bounds())

    def entails(self, goal: Constraint) -> bool:
        """True iff every rational assignment satisfying the set satisfies goal."""
        base = self._with_bounds()
        return all(not _satisfiable(base + [neg]) for neg in goal.negated())


def _satisfiable(constraints: list[Constraint]) -> bool:
    # rows: (coeffs dict, const, strict)
    rows: list[tuple[dict[str, Fraction], Fraction, bool]] = []
    for c in constraints:
        coeffs = c.expr.coeffs()
        if c.op == "eq":
            rows.append((coeffs, c.expr.const, False))
            rows.append(({v: -k for v, k in coeffs.items()}, -c.expr.const, False))
        else:
            rows.append((coeffs, c.expr.const, c.op == "lt"))
    variables = sorted({v for coeffs, _, _ in rows for v in coeffs if coeffs[v] != 0})
    for var in variables:
        uppers, lowers, rest = [], [], []
        for coeffs, const, strict in rows:
            a = coeffs.get(var, Fraction(0))
            if a > 0:
                uppers.append((coeffs, const, strict, a))
            elif a < 0:
                lowers.append((coeffs, const, strict, a))
            else:
                rest.append((coeffs, const, strict))
        new_rows = rest
        for cu, ku, su, a in uppers:
            for cl, kl, sl, b in lowers:
                coeffs = {}
                for v in set(cu) | set(cl):
                    if v == var:
                        continue
                    val = cu.get(v, Fraction(0)) * (-b) + cl.get(v, Fraction(0)) * a
                    if val != 0:
                        coeffs[v] = val
                const = ku * (-b) + kl * a
                new_rows.append((coeffs, const, su or sl))
        rows = new_rows
    for coeffs, const, strict in rows:
        if strict:
            if not const < 0:
                return False
        else:
            if not const <= 0:
                return False
    return True
