"""Exact formula evaluation on finite models, frame validity, and
truncation-based cross-check evaluation for the infinitary forms.

Extensions are bitmasks over the state set.  Threshold families are
evaluated at a finite pool of critical values (attained measures, their
midpoints, and the endpoints): every subformula truth value is a step
function of the threshold with breakpoints at attained measures, so the
pool instantiation agrees with the full rational-indexed conjunction.
Limit operators are evaluated through the eventually periodic preimage
orbit, with no truncation error.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from . import formula as F
from .process import DynamicMarkovProcess, bits, full_mask, require_valid
from .stochastic import matrix_power


class MissingAtomError(KeyError):
    pass


class ResourceCapError(RuntimeError):
    pass


DEFAULT_FRAME_CAP = 1 << 24
_TABLE_LIMIT = 12


@dataclass
class Model:
    process: DynamicMarkovProcess
    valuation: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        require_valid(self.process)
        n = self.process.n_states
        for prop, mask in self.valuation.items():
            if mask < 0 or mask >= (1 << n):
                raise ValueError(f"valuation of {prop!r} does not fit {n} states")


@dataclass
class Counterexample:
    valuation: dict[str, int]
    world: int
    formula: F.Formula


@dataclass
class Verdict:
    valid: bool
    counterexample: Optional[Counterexample] = None


@dataclass(frozen=True)
class TruncationBounds:
    """Literal truncation bounds: natural indices up to nat_cap, iteration/
    partition indices up to k_cap, threshold instantiation from rational_grid."""

    nat_cap: int
    k_cap: int
    rational_grid: tuple[Fraction, ...] = ()


class Evaluator:
    """Per-process evaluation engine with measure tables and orbit caches."""

    def __init__(self, process: DynamicMarkovProcess):
        require_valid(process)
        self.p = process
        self.n = process.n_states
        self._tables: Optional[list[list[Fraction]]] = None
        self._init_table: Optional[list[Fraction]] = None
        self._attained: dict[int, tuple[Fraction, ...]] = {}
        self._lim_cache: dict = {}
        self._trunc_cache: dict = {}

    # -- measures

    def _build_tables(self):
        if self._tables is not None:
            return
        if self.n > _TABLE_LIMIT:
            raise ResourceCapError(
                f"{self.n} states exceed the exhaustive-subset limit ({_TABLE_LIMIT})"
            )
        tables = []
        for w in range(self.n):
            row = self.p.kernel[w]
            tab = [Fraction(0)] * (1 << self.n)
            for mask in range(1, 1 << self.n):
                low = mask & -mask
                tab[mask] = tab[mask ^ low] + row[low.bit_length() - 1]
            tables.append(tab)
        self._tables = tables
        if self.p.init is not None:
            tab = [Fraction(0)] * (1 << self.n)
            for mask in range(1, 1 << self.n):
                low = mask & -mask
                tab[mask] = tab[mask ^ low] + self.p.init[low.bit_length() - 1]
            self._init_table = tab

    def measure(self, w: int, mask: int) -> Fraction:
        if self.n <= _TABLE_LIMIT:
            self._build_tables()
            return self._tables[w][mask]
        return self.p.measure(w, mask)

    def init_measure(self, mask: int) -> Fraction:
        if self.p.init is None:
            raise F.FormulaError("initial-distribution operator on a process without init")
        if self.n <= _TABLE_LIMIT:
            self._build_tables()
            return self._init_table[mask]
        return self.p.init_measure(mask)

    def step_measure(self, steps: int, w: int, mask: int) -> Fraction:
        row = matrix_power(self.p.kernel, steps)[w]
        return sum((row[v] for v in bits(mask)), Fraction(0))

    def attained_values(self, extra_steps: Sequence[int] = ()) -> tuple[Fraction, ...]:
        """Every measure value any subset attains, under the kernel, the
        initial distribution (when present), and the listed matrix powers."""
        key = tuple(sorted(set(extra_steps)))
        if key in self._attained:
            return self._attained[key]
        self._build_tables()
        vals: set[Fraction] = {Fraction(0), Fraction(1)}
        for w in range(self.n):
            vals.update(self._tables[w])
        if self._init_table is not None:
            vals.update(self._init_table)
        for s in key:
            if s >= 2:
                power = matrix_power(self.p.kernel, s)
                for w in range(self.n):
                    row = power[w]
                    for mask in range(1 << self.n):
                        vals.add(sum((row[v] for v in bits(mask)), Fraction(0)))
        out = tuple(sorted(vals))
        self._attained[key] = out
        return out

    def threshold_pool(self, bound: Fraction, strict: bool, extra_steps: Sequence[int] = ()) -> list[Fraction]:
        """Finite instantiation pool for a rational-indexed family below bound.

        Attained values sliced below the bound, plus midpoints of adjacent
        pool members: the midpoints witness strict threshold boundaries, so
        sampling the pool decides the full conjunction/disjunction.
        """
        base = sorted(set(self.attained_values(extra_steps)) | {Fraction(0), Fraction(1), bound})
        pool = set(base)
        for a, b in zip(base, base[1:]):
            pool.add((a + b) / 2)
        if strict:
            return sorted(v for v in pool if 0 <= v < bound)
        return sorted(v for v in pool if 0 <= v <= bound)


def evaluator_for(process: DynamicMarkovProcess) -> Evaluator:
    # stashed on the (immutable) process: repeated evaluation is the common
    # case and re-hashing rational kernels per call is measurable
    ev = process.__dict__.get("_evaluator")
    if ev is None:
        ev = Evaluator(process)
        object.__setattr__(process, "_evaluator", ev)
    return ev


# ---------------------------------------------------------------------------
# Exact extension computation.


def _nstep_steps(f: F.Formula) -> set[int]:
    """NStepL step counts appearing anywhere in f (for critical pools)."""
    out: set[int] = set()
    for g in F.subformulas(f):
        if isinstance(g, F.NStepL):
            out.add(g.steps)
    return out


class _Context:
    def __init__(self, ev: Evaluator, valuation: dict[str, int]):
        self.ev = ev
        self.valuation = valuation
        self.memo: dict[int, int] = {}  # keyed by node identity
        self._pins: list[F.Formula] = []  # keeps transient members alive
        self.full = full_mask(ev.n)

    def ext(self, f: F.Formula) -> int:
        got = self.memo.get(id(f))
        if got is None:
            got = self._compute(f)
            self.memo[id(f)] = got
        return got

    def _threshold(self, t: F.Threshold) -> Fraction:
        c = F.threshold_constant(t)
        if c is None:
            raise F.FormulaError(f"unresolved metavariable in threshold {t}")
        return c

    def _compute(self, f: F.Formula) -> int:
        ev = self.ev
        if isinstance(f, F.Atom):
            try:
                return self.valuation[f.name]
            except KeyError:
                raise MissingAtomError(f.name)
        if isinstance(f, F.Neg):
            return self.full & ~self.ext(f.body)
        if isinstance(f, F.And):
            out = self.full
            for g in f.items:
                out &= self.ext(g)
            return out
        if isinstance(f, F.Next):
            return ev.p.preimage(self.ext(f.body))
        if isinstance(f, F.L):
            t = self._threshold(f.threshold)
            body = self.ext(f.body)
            return sum(1 << w for w in range(ev.n) if ev.measure(w, body) >= t)
        if isinstance(f, F.InitL):
            t = self._threshold(f.threshold)
            return self.full if ev.init_measure(self.ext(f.body)) >= t else 0
        if isinstance(f, F.NStepL):
            t = self._threshold(f.threshold)
            body = self.ext(f.body)
            if f.steps == 0:
                return self.full if ev.init_measure(body) >= t else 0
            return sum(1 << w for w in range(ev.n) if ev.step_measure(f.steps, w, body) >= t)
        if isinstance(f, (F.LimL, F.LimM)):
            t = self._threshold(f.threshold)
            stats = self._lim_stats(f.template)
            if isinstance(f, F.LimL):
                return sum(1 << w for w in range(ev.n) if stats[w][0] >= t)
            return sum(1 << w for w in range(ev.n) if stats[w][1] <= t)
        if isinstance(f, F.BigAnd) or isinstance(f, F.BigOr):
            masks = self._family_masks(f.family)
            if isinstance(f, F.BigAnd):
                out = self.full
                for m in masks:
                    out &= m
            else:
                out = 0
                for m in masks:
                    out |= m
            return out
        raise F.FormulaError(f"cannot evaluate {type(f).__name__} node")

    def _family_masks(self, fam: F.Family) -> list[int]:
        if isinstance(fam, F.FiniteFamily):
            return [self.ext(g) for g in fam.members]
        if isinstance(fam, F.NatFamily):
            return [self.ext(g) for g in fam.prefix] + [self.ext(fam.tail)]
        pool = self.ev.threshold_pool(fam.bound, fam.strict, _nstep_steps(fam.template))
        members = [fam.member(v) for v in pool]
        self._pins.extend(members)
        return [self.ext(g) for g in members]

    def _lim_stats(self, template: F.NatTemplate) -> list[tuple[Fraction, Fraction]]:
        """Per world, (liminf, limsup) of the measure sequence of template(k).

        Cycle detection runs on the tuple of iterated preimages of the marked
        subformulas: the instantiated extension is a function of that tuple,
        and the finite lattice forces eventual periodicity.
        """
        marked = _iter_bodies(template.body)
        relevant = {a: self.valuation.get(a, 0) for a in sorted(F.atoms(template.body))}
        key = (template, tuple(sorted(relevant.items())))
        got = self.ev._lim_cache.get(key)
        if got is not None:
            return got
        base = [self.ext(b) for b in marked]
        seen: dict[tuple[int, ...], int] = {}
        states: list[tuple[int, ...]] = []
        cur = tuple(base)
        while cur not in seen:
            seen[cur] = len(states)
            states.append(cur)
            cur = tuple(self.ev.p.preimage(m) for m in cur)
        start = seen[cur]
        cycle_exts = [
            self._template_ext(template.body, dict(zip(marked, st)))
            for st in states[start:]
        ]
        stats = []
        for w in range(self.ev.n):
            vals = [self.ev.measure(w, e) for e in cycle_exts]
            stats.append((min(vals), max(vals)))
        self.ev._lim_cache[key] = stats
        return stats

    def _template_ext(self, body: F.Formula, iter_masks: dict[F.Formula, int]) -> int:
        sub = _TemplateContext(self, iter_masks)
        return sub.ext(body)


class _TemplateContext(_Context):
    """Evaluates a template body with Iter markers pinned to concrete masks."""

    def __init__(self, parent: _Context, iter_masks: dict[F.Formula, int]):
        super().__init__(parent.ev, parent.valuation)
        self.iter_masks = iter_masks

    def _compute(self, f: F.Formula) -> int:
        if isinstance(f, F.Iter):
            return self.iter_masks[f.body]
        return super()._compute(f)


def _iter_bodies(body: F.Formula) -> list[F.Formula]:
    out: list[F.Formula] = []

    def walk(g: F.Formula):
        if isinstance(g, F.Iter):
            if g.body not in out:
                out.append(g.body)
            return
        if isinstance(g, (F.Neg, F.Next, F.L, F.InitL, F.NStepL)):
            walk(g.body)
        elif isinstance(g, F.And):
            for h in g.items:
                walk(h)
        elif isinstance(g, (F.BigAnd, F.BigOr)):
            fam = g.family
            if isinstance(fam, F.FiniteFamily):
                for h in fam.members:
                    walk(h)
            elif isinstance(fam, F.NatFamily):
                for h in fam.prefix:
                    walk(h)
                walk(fam.tail)
            else:
                walk(fam.template)

    walk(body)
    return out


def extension(model: Model, f: F.Formula) -> int:
    """Bitmask of the worlds satisfying f in the model."""
    ctx = _Context(evaluator_for(model.process), model.valuation)
    return ctx.ext(f)


def satisfies(model: Model, world: int, f: F.Formula) -> bool:
    if not (0 <= world < model.process.n_states):
        raise ValueError(f"world {world} out of range")
    return bool(extension(model, f) >> world & 1)


def frame_valid(
    process: DynamicMarkovProcess,
    formulas: Union[F.Formula, Sequence[F.Formula]],
    cap: int = DEFAULT_FRAME_CAP,
) -> Verdict:
    """Validity over every valuation of the occurring atoms and every world.

    Valuations are enumerated lexicographically (atoms sorted, subsets as
    binary numbers); the counterexample returned is the first in that order,
    with the smallest world and the first failing formula.
    """
    if isinstance(formulas, (list, tuple)):
        flist = list(formulas)
    else:
        flist = [formulas]
    require_valid(process)
    names = sorted(set().union(*(F.atoms(f) for f in flist)) if flist else set())
    n = process.n_states
    count = (1 << n) ** len(names)
    if count > cap:
        raise ResourceCapError(
            f"{count} candidate valuations exceed the cap ({cap})"
        )
    ev = evaluator_for(process)
    full = full_mask(n)
    for assignment in itertools.product(range(1 << n), repeat=len(names)):
        valuation = dict(zip(names, assignment))
        ctx = _Context(ev, valuation)
        for f in flist:
            ext = ctx.ext(f)
            if ext != full:
                missing = full & ~ext
                world = (missing & -missing).bit_length() - 1
                return Verdict(False, Counterexample(valuation, world, f))
    return Verdict(True)


# ---------------------------------------------------------------------------
# Literal truncation cross-check.


def _trunc_minus(r: Fraction, eps: Fraction) -> Fraction:
    return r - eps if r > eps else Fraction(0)


class _TruncContext(_Context):
    def __init__(self, ev: Evaluator, valuation: dict[str, int], bounds: TruncationBounds):
        super().__init__(ev, valuation)
        self.bounds = bounds
        # keyed by (bounds, steps, mask): valuation-independent, shared per process
        self._nstep_memo = ev._trunc_cache

    def _compute(self, f: F.Formula) -> int:
        if isinstance(f, (F.BigAnd, F.BigOr)) and isinstance(f.family, F.ThresholdFamily):
            fam = f.family
            grid = [
                v for v in self.bounds.rational_grid
                if (v < fam.bound if fam.strict else v <= fam.bound) and 0 <= v <= 1
            ]
            members = [fam.member(v) for v in grid]
            self._pins.extend(members)
            masks = [self.ext(g) for g in members]
            if isinstance(f, F.BigAnd):
                out = self.full
                for m in masks:
                    out &= m
                return out
            out = 0
            for m in masks:
                out |= m
            return out
        if isinstance(f, (F.BigAnd, F.BigOr)) and isinstance(f.family, F.NatFamily):
            fam = f.family
            members = [
                fam.prefix[i] if i < len(fam.prefix) else fam.tail
                for i in range(self.bounds.nat_cap + 1)
            ]
            masks = [self.ext(g) for g in members]
            if isinstance(f, F.BigAnd):
                out = self.full
                for m in masks:
                    out &= m
                return out
            out = 0
            for m in masks:
                out |= m
            return out
        if isinstance(f, (F.LimL, F.LimM)):
            return self._trunc_lim(f)
        if isinstance(f, F.NStepL):
            t = self._threshold(f.threshold)
            body = self.ext(f.body)
            return self._trunc_nstep(f.steps, body, t)
        return super()._compute(f)

    def _trunc_lim(self, f) -> int:
        t = self._threshold(f.threshold)
        marked = _iter_bodies(f.template.body)
        masks = {b: self.ext(b) for b in marked}
        exts = []
        cur = dict(masks)
        for _ in range(self.bounds.k_cap + 1):
            exts.append(self._template_ext(f.template.body, cur))
            cur = {b: self.ev.p.preimage(m) for b, m in cur.items()}
        out = 0
        for w in range(self.ev.n):
            vals = [self.ev.measure(w, e) for e in exts]
            ok = True
            for nn in range(1, self.bounds.nat_cap + 1):
                if isinstance(f, F.LimL):
                    lo = _trunc_minus(t, Fraction(1, nn))
                    if not any(all(v >= lo for v in vals[m:]) for m in range(len(vals))):
                        ok = False
                        break
                else:
                    hi = min(Fraction(1), t + Fraction(1, nn))
                    if not any(all(v <= hi for v in vals[m:]) for m in range(len(vals))):
                        ok = False
                        break
            if ok:
                out |= 1 << w
        return out

    def _trunc_nstep(self, steps: int, body_mask: int, t: Fraction) -> int:
        """Literal truncated n-step verdict.

        Realizes the recursive expansion: an intersection over slack indices
        l <= nat_cap of a union over partition sizes k <= k_cap of lower
        Lebesgue sums through truncated (n-1)-step strata, with the top
        stratum closed so measure-1 mass is not dropped.  Two exact collapses
        keep this tractable: the slack conjunction equals its tightest member
        (the slack bounds are nested), and the best weight tuple of each
        partition is the per-stratum maximum of the grid values whose
        conjunct holds, which is a bisection because truncated verdicts are
        antitone in the threshold.
        """
        values = self._trunc_values(steps, body_mask)
        return sum(
            1 << w
            for w in range(self.ev.n)
            if values[w] >= _trunc_minus(t, self._slack(steps))
        )

    def _slack(self, steps: int) -> Fraction:
        # base levels are exact; expansions carry the tightest slack bound
        if steps <= 1:
            return Fraction(0)
        return Fraction(1, self.bounds.nat_cap)

    def _trunc_values(self, steps: int, body_mask: int) -> list[Fraction]:
        """Per world, the largest threshold the truncated verdict passes
        (up to the slack): exact measures at the base levels, best truncated
        Lebesgue sums over partitions k <= k_cap above them.

        Each level stratifies by the truncated (n-1)-step values of the body
        and weighs the strata with the ONE-step kernel, mirroring the
        defining integral of the n-step kernel (the n-step measure is the
        one-step integral of the (n-1)-step stratum values).
        """
        key = (self.bounds, steps, body_mask)
        got = self._nstep_memo.get(key)
        if got is not None:
            return got
        ev = self.ev
        if steps == 0:
            v = ev.init_measure(body_mask)
            out = [v] * ev.n
        elif steps == 1:
            out = [ev.measure(w, body_mask) for w in range(ev.n)]
        else:
            grid = sorted({v for v in self.bounds.rational_grid if 0 <= v <= 1} | {Fraction(0)})
            inner = self._trunc_values(steps - 1, body_mask)
            slack = self._slack(steps - 1)
            best = [Fraction(0)] * ev.n
            for k in range(1, self.bounds.k_cap + 1):
                alpha = [Fraction(0)] * ev.n
                for i in range(1, k):
                    lower = sum(
                        1 << y for y in range(ev.n)
                        if inner[y] >= _trunc_minus(Fraction(i, k), slack)
                    )
                    if i < k - 1:
                        upper = sum(
                            1 << y for y in range(ev.n)
                            if inner[y] >= _trunc_minus(Fraction(i + 1, k), slack)
                        )
                        stratum = lower & ~upper
                    else:
                        stratum = lower  # closed top stratum
                    weight = Fraction(i, k)
                    for w in range(ev.n):
                        cutoff = ev.measure(w, stratum)  # one-step conjunct
                        idx = bisect.bisect_right(grid, cutoff) - 1
                        if idx >= 0:
                            alpha[w] += weight * grid[idx]
                for w in range(ev.n):
                    if alpha[w] > best[w]:
                        best[w] = alpha[w]
            out = best
        self._nstep_memo[key] = out
        return out


def frame_consequence(
    process: DynamicMarkovProcess,
    assumptions: Sequence[F.Formula],
    conclusion: F.Formula,
    cap: int = DEFAULT_FRAME_CAP,
) -> Verdict:
    """Semantic consequence over one finite process, for finite assumption
    sets only: at every world of every valuation where all assumptions hold,
    the conclusion holds."""
    if not assumptions:
        return frame_valid(process, conclusion, cap)
    premise = assumptions[0] if len(assumptions) == 1 else F.And(tuple(assumptions))
    return frame_valid(process, F.impl(premise, conclusion), cap)


def truncated_eval(model: Model, f: F.Formula, bounds: TruncationBounds) -> int:
    """Literal finite-truncation evaluation of the infinitary forms.

    Monotone in the bounds: enlarging them only shrinks big-conjunction
    verdicts and only grows big-disjunction verdicts.
    """
    ctx = _TruncContext(evaluator_for(model.process), model.valuation, bounds)
    return ctx.ext(f)
