"""Defining formulas for frame properties and the correspondence harness.

Each property pairs a family of formulas with a stochastic oracle; the
harness checks, over concrete finite frames, that validity of the formulas
(instantiated at the frame's critical threshold values) coincides with the
oracle verdict.

Two properties need an implication between validities rather than a valid
implication.  The ergodicity formula guards its consequent with invariance
of the valuation set, and the recurrence formula guards with accessibility:
both guards are world-dependent, so the property reads "if the guard holds
at every world then the consequent holds at every world".  Evaluating the
material implication per world instead is strictly stronger and fails on
frames satisfying the property (a three-cycle with uniform measure is
ergodic yet has worlds where the pointwise implication fails), so the
harness checks the validity-level reading.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

from . import formula as F
from .process import (
    DynamicMarkovProcess,
    bits,
    classify,
    full_mask,
    harsanyi_holds,
    mask_of,
    random_ads,
    random_dps,
    random_process,
)
from .semantics import (
    Counterexample,
    Model,
    ResourceCapError,
    Verdict,
    evaluator_for,
    extension,
    frame_valid,
)
from .stochastic import (
    FrameClassError,
    expected_visits,
    is_ergodic,
    is_irreducible,
    is_mixing,
    is_recurrent,
    is_stationary,
    matrix_power,
    measure_on,
    push_distribution,
    reach_in_one_or_more,
    recurrent_state_mask,
)

P = F.Atom("p")
Q = F.Atom("q")


class PropertyId(Enum):
    MEASURE_PRESERVING = "measure-preserving"
    ERGODIC = "ergodic"
    MIXING = "mixing"
    STATIONARY = "stationary"
    IRREDUCIBLE = "irreducible"
    RECURRENT = "recurrent"
    PURELY_PROBABILISTIC = "purely-probabilistic"
    HARSANYI = "harsanyi"


@dataclass
class CorrespondenceReport:
    label: str
    frame_verdict: bool
    oracle_verdict: bool
    witness: Optional[Counterexample] = None

    @property
    def agree(self) -> bool:
        return self.frame_verdict == self.oracle_verdict


def _require(cond: bool, message: str):
    if not cond:
        raise FrameClassError(message)


def _is_dps(p: DynamicMarkovProcess) -> bool:
    return all(row == p.kernel[0] for row in p.kernel)


def admissible(prop: PropertyId, p: DynamicMarkovProcess) -> bool:
    if prop in (PropertyId.MEASURE_PRESERVING, PropertyId.ERGODIC):
        return _is_dps(p)
    if prop is PropertyId.MIXING:
        return _is_dps(p) and classify(p).measure_preserving
    if prop in (PropertyId.STATIONARY, PropertyId.IRREDUCIBLE, PropertyId.RECURRENT):
        return p.init is not None
    return True


# ---------------------------------------------------------------------------
# Formula builders.


def mixing_template() -> F.NatTemplate:
    return F.NatTemplate(F.And((F.Iter(P), Q)))


def defining_formulas(prop: PropertyId, thresholds: Iterable[Fraction] = ()) -> list[F.Formula]:
    """The property's defining formulas, instantiated at the given thresholds.

    Properties whose paper shape quantifies over all rationals take the
    threshold list explicitly; the correspondence harness supplies the
    frame's critical values.
    """
    ts = list(thresholds)
    if prop is PropertyId.MEASURE_PRESERVING:
        return [F.iff(F.L(r, F.Next(P)), F.Next(F.L(r, P))) for r in ts]
    if prop is PropertyId.ERGODIC:
        # consequent: the valuation set has measure 0 (at-most-0) or measure 1
        return [F.impl(F.iff(F.Next(P), P), F.disj(F.m_op(Fraction(0), P), F.L(Fraction(1), P)))]
    if prop is PropertyId.MIXING:
        out = []
        tmpl = mixing_template()
        for r, s in itertools.product(ts, repeat=2):
            out.append(F.impl(F.And((F.L(r, P), F.L(s, Q))), F.LimL(r * s, tmpl)))
            out.append(F.impl(F.And((F.m_op(r, P), F.m_op(s, Q))), F.LimM(r * s, tmpl)))
        return out
    if prop is PropertyId.PURELY_PROBABILISTIC:
        return [F.iff(F.Next(P), P)]
    if prop is PropertyId.HARSANYI:
        out = []
        for r in ts:
            out.append(F.impl(F.L(r, P), F.L(Fraction(1), F.L(r, P))))
            out.append(F.impl(F.Neg(F.L(r, P)), F.L(Fraction(1), F.Neg(F.L(r, P)))))
        return out
    if prop is PropertyId.IRREDUCIBLE:
        raise ValueError("irreducibility formulas are frame-size dependent; use irreducibility_formula(n_states)")
    if prop is PropertyId.RECURRENT:
        raise ValueError("recurrence formulas are frame-size dependent; use recurrence harness")
    if prop is PropertyId.STATIONARY:
        raise ValueError("stationarity formulas carry frame value grids; use stationary_formula")
    raise ValueError(prop)


def accessibility_formula(n_states: int) -> F.Formula:
    """Positive n-step reachability of the valuation set, with the unbounded
    disjunction truncated at the state count (longer paths revisit states)."""
    return F.BigOr(F.FiniteFamily(tuple(
        F.Neg(F.NStepL(n, Fraction(1), F.Neg(P))) for n in range(1, n_states + 1)
    )))


def irreducibility_formula(n_states: int) -> F.Formula:
    return F.impl(F.Neg(F.InitL(Fraction(1), F.Neg(P))), accessibility_formula(n_states))


def _stratum_formulas(values: list[Fraction], body: F.Formula) -> list[tuple[Fraction, F.Formula]]:
    """Level sets of the one-step measure of the body, by attained value.

    Stratum j collects the worlds whose measure lies in [values[j],
    values[j+1]); the top stratum is closed so measure-1 worlds are kept.
    """
    out = []
    for j, v in enumerate(values):
        lower = F.L(v, body)
        if j + 1 < len(values):
            member = F.And((lower, F.Neg(F.L(values[j + 1], body))))
        else:
            member = lower
        out.append((v, member))
    return out


def stationary_formula(
    r: Fraction,
    kernel_values: list[Fraction],
    init_values: list[Fraction],
    max_tuples: int = 200_000,
) -> F.Formula:
    """One threshold instance of the stationarity correspondence.

    The pushed-forward mass of the valuation set is reconstructed inside the
    logic as a weighted sum over the one-step measure strata: a disjunction
    over weight tuples (one initial-operator conjunct per stratum) whose
    weighted sums reach r.  On a finite frame the stratification by attained
    kernel values makes the lower Lebesgue sum exact.
    """
    strata = _stratum_formulas(kernel_values, P)
    choices: list[list[tuple[Fraction, Fraction]]] = []
    for v, _ in strata:
        opts = [(Fraction(0), Fraction(0))]
        for u in init_values:
            if u > 0:
                opts.append((v * u, u))
        choices.append(opts)
    count = 1
    for opts in choices:
        count *= len(opts)
        if count > max_tuples:
            raise ResourceCapError(f"stationarity tuple family exceeds {max_tuples} members")
    disjuncts = []
    for combo in itertools.product(*choices):
        if sum(c for c, _ in combo) < r:
            continue
        conjuncts = tuple(
            F.InitL(u, member)
            for (_, u), (_, member) in zip(combo, strata)
            if u > 0
        )
        if conjuncts:
            disjuncts.append(F.And(conjuncts))
    rhs: F.Formula
    if disjuncts:
        rhs = F.BigOr(F.FiniteFamily(tuple(disjuncts)))
    else:
        rhs = F.bot(P) if r > 0 else F.top(P)
    return F.iff(F.InitL(r, P), rhs)


# ---------------------------------------------------------------------------
# Frame-side checks (exact, per property).


def _critical_pool(p: DynamicMarkovProcess, extra_steps: Iterable[int] = ()) -> list[Fraction]:
    ev = evaluator_for(p)
    return ev.threshold_pool(Fraction(1), strict=False, extra_steps=tuple(extra_steps))


def frame_measure_preserving(p: DynamicMarkovProcess) -> Verdict:
    _require(_is_dps(p), "measure-preserving correspondence needs a dynamic probability space")
    return frame_valid(p, defining_formulas(PropertyId.MEASURE_PRESERVING, _critical_pool(p)))


def frame_purely_probabilistic(p: DynamicMarkovProcess) -> Verdict:
    return frame_valid(p, defining_formulas(PropertyId.PURELY_PROBABILISTIC))


def frame_harsanyi(p: DynamicMarkovProcess) -> Verdict:
    return frame_valid(p, defining_formulas(PropertyId.HARSANYI, _critical_pool(p)))


def frame_mixing(p: DynamicMarkovProcess) -> Verdict:
    _require(_is_dps(p) and classify(p).measure_preserving,
             "mixing correspondence needs an abstract dynamical system")
    return frame_valid(p, defining_formulas(PropertyId.MIXING, _critical_pool(p)))


def frame_ergodic(p: DynamicMarkovProcess) -> Verdict:
    """Validity-level reading: valuations making the invariance guard valid
    must make the triviality consequent valid."""
    _require(_is_dps(p), "ergodicity correspondence needs a dynamic probability space")
    n = p.n_states
    full = full_mask(n)
    guard = F.iff(F.Next(P), P)
    consequent = F.disj(F.m_op(Fraction(0), P), F.L(Fraction(1), P))
    for a in range(1 << n):
        model = Model(p, {"p": a})
        if extension(model, guard) != full:
            continue
        ext = extension(model, consequent)
        if ext != full:
            missing = full & ~ext
            world = (missing & -missing).bit_length() - 1
            return Verdict(False, Counterexample({"p": a}, world, consequent))
    return Verdict(True)


def frame_stationary(p: DynamicMarkovProcess) -> Verdict:
    """Exact stationarity check through the logic's strata formulas.

    For every valuation set and every critical threshold, the initial mass
    and the strata-reconstructed pushed mass must pass the same thresholds.
    The reconstruction evaluates the stratum formulas and reads their initial
    masses, i.e. the greedy maximal weight tuple of the defining disjunction.
    """
    _require(p.init is not None, "stationarity needs an initial distribution")
    ev = evaluator_for(p)
    n = p.n_states
    kernel_values = sorted({ev.measure(w, a) for w in range(n) for a in range(1 << n)})
    pushed = push_distribution(p.init, p.kernel)
    crit = sorted(
        {ev.init_measure(a) for a in range(1 << n)}
        | {measure_on(pushed, a) for a in range(1 << n)}
    )
    strata = _stratum_formulas(kernel_values, P)
    for a in range(1 << n):
        model = Model(p, {"p": a})
        lhs_mass = ev.init_measure(a)
        rhs_mass = Fraction(0)
        for v, member in strata:
            rhs_mass += v * ev.init_measure(extension(model, member))
        for r in crit:
            if (lhs_mass >= r) != (rhs_mass >= r):
                witness = _stationary_witness(p, a, lhs_mass, rhs_mass, kernel_values, strata, model)
                return Verdict(False, witness)
    return Verdict(True)


def _stationary_witness(p, a, lhs_mass, rhs_mass, kernel_values, strata, model) -> Counterexample:
    """Compact replayable counterexample for a non-stationary frame.

    Reduced to the direction where the pushed mass exceeds the initial mass
    (passing to the complement set if needed); there the maximal true weight
    tuple yields a false implication 'tuple conjunction -> initial operator'.
    """
    ev = evaluator_for(p)
    if rhs_mass < lhs_mass:
        a = full_mask(p.n_states) & ~a
        model = Model(p, {"p": a})
        lhs_mass = ev.init_measure(a)
        rhs_mass = Fraction(0)
        for v, member in strata:
            rhs_mass += v * ev.init_measure(extension(model, member))
    r = rhs_mass  # pushed mass reaches r, initial mass does not
    conjuncts = []
    for v, member in strata:
        u = ev.init_measure(extension(model, member))
        if u > 0 and v > 0:
            conjuncts.append(F.InitL(u, member))
    body = F.And(tuple(conjuncts)) if conjuncts else F.top(P)
    return Counterexample({"p": a}, 0, F.impl(body, F.InitL(r, P)))


def frame_irreducible(p: DynamicMarkovProcess) -> Verdict:
    _require(p.init is not None, "irreducibility needs an initial distribution")
    return frame_valid(p, irreducibility_formula(p.n_states))


def frame_recurrent(
    p: DynamicMarkovProcess,
    smoke_r_cap: Fraction = Fraction(2),
    smoke_k_cap: int = 8,
) -> Verdict:
    """Irreducibility formulas plus the recurrence implication under the
    validity-level accessibility guard.

    Divergence of the expected visit count is decided structurally; a
    truncated literal evaluation of the partial visit sums (thresholds up to
    smoke_r_cap, horizon smoke_k_cap) cross-checks monotonicity and never
    overrules the structural verdict.
    """
    _require(p.init is not None, "recurrence needs an initial distribution")
    irr = frame_irreducible(p)
    if not irr.valid:
        return irr
    n = p.n_states
    full = full_mask(n)
    access = accessibility_formula(n)
    reach = reach_in_one_or_more(p)
    rec = recurrent_state_mask(p)
    for a in range(1, 1 << n):
        model = Model(p, {"p": a})
        if extension(model, access) != full:
            continue
        for w in bits(a):
            diverges = bool(reach[w] & a & rec)
            partial = _partial_visit_sums(p, w, a, smoke_k_cap)
            assert all(x <= y for x, y in zip(partial, partial[1:])), "visit sums must be monotone"
            if not diverges:
                assert expected_visits(p, w, a) is not None, "structural verdict contradicts the exact sum"
                return Verdict(False, _recurrence_witness(w, a, access))
    return Verdict(True)


def _partial_visit_sums(p: DynamicMarkovProcess, w: int, mask: int, k_cap: int) -> list[Fraction]:
    sums = []
    total = Fraction(0)
    for m in range(1, k_cap + 1):
        total += measure_on(matrix_power(p.kernel, m)[w], mask)
        sums.append(total)
    return sums


def _recurrence_witness(world: int, mask: int, access: F.Formula) -> Counterexample:
    """Counterexample instance at a threshold the finite visit count misses.

    The disjunction over weight tuples reaching such a threshold has no true
    member, so the instance is rendered with a contradiction in consequent
    position; the implication replays false at the reported world.
    """
    inner = F.impl(P, F.bot(P))
    return Counterexample({"p": mask}, world, F.impl(access, inner))


_FRAME_CHECKS: dict[PropertyId, Callable[[DynamicMarkovProcess], Verdict]] = {
    PropertyId.MEASURE_PRESERVING: frame_measure_preserving,
    PropertyId.ERGODIC: frame_ergodic,
    PropertyId.MIXING: frame_mixing,
    PropertyId.STATIONARY: frame_stationary,
    PropertyId.IRREDUCIBLE: frame_irreducible,
    PropertyId.RECURRENT: frame_recurrent,
    PropertyId.PURELY_PROBABILISTIC: frame_purely_probabilistic,
    PropertyId.HARSANYI: frame_harsanyi,
}


def _oracle(prop: PropertyId, p: DynamicMarkovProcess) -> bool:
    if prop is PropertyId.MEASURE_PRESERVING:
        return classify(p).measure_preserving
    if prop is PropertyId.ERGODIC:
        return is_ergodic(p)
    if prop is PropertyId.MIXING:
        return is_mixing(p)
    if prop is PropertyId.STATIONARY:
        return is_stationary(p)
    if prop is PropertyId.IRREDUCIBLE:
        return is_irreducible(p)
    if prop is PropertyId.RECURRENT:
        return is_recurrent(p)
    if prop is PropertyId.PURELY_PROBABILISTIC:
        return classify(p).purely_probabilistic
    if prop is PropertyId.HARSANYI:
        return harsanyi_holds(p)
    raise ValueError(prop)


def correspondence_check(prop: PropertyId, p: DynamicMarkovProcess, label: str = "") -> CorrespondenceReport:
    if not admissible(prop, p):
        raise FrameClassError(f"process outside the admissible class of {prop.value}")
    verdict = _FRAME_CHECKS[prop](p)
    oracle = _oracle(prop, p)
    return CorrespondenceReport(
        label=label,
        frame_verdict=verdict.valid,
        oracle_verdict=oracle,
        witness=verdict.counterexample,
    )


# ---------------------------------------------------------------------------
# Literal truncated n-step expansion (materialized form).


def expand_nstep_literal(
    n: int,
    r: Fraction,
    body: F.Formula,
    l_cap: int,
    k_cap: int,
    values: Iterable[Fraction],
    max_nodes: int = 500_000,
) -> F.Formula:
    """Materialize the truncated recursive expansion of the n-step operator.

    The slack conjunction runs to l_cap, partition sizes to k_cap; weight
    tuples are drawn from {i/k * v : v in values} per stratum, restricted to
    sums reaching r less the slack.  Strata are level sets of the next-lower
    expansion; each conjunct reads the ONE-step mass of its stratum,
    mirroring the defining integral of the n-step kernel.  The zero-weight
    position of each partition is omitted (it cannot contribute), and the
    top stratum keeps its closing boundary so measure-one mass is not
    dropped.  Base cases: step 0 is the initial operator, step 1 the plain
    probability operator.
    """
    if l_cap < 1 or k_cap < 1:
        raise ValueError("caps must be positive")
    vals = sorted({v for v in values if 0 < v <= 1})
    budget = [max_nodes]

    def spend(k: int = 1):
        budget[0] -= k
        if budget[0] < 0:
            raise ResourceCapError(f"expansion exceeds {max_nodes} nodes")

    def stratum(m: int, i: int, k: int) -> F.Formula:
        lower = build(m, Fraction(i, k))
        if i + 1 < k:
            return F.And((lower, F.Neg(build(m, Fraction(i + 1, k)))))
        return lower

    def build(m: int, t: Fraction) -> F.Formula:
        spend()
        if m == 0:
            return F.InitL(t, body)
        if m == 1:
            return F.L(t, body)
        l_disjunctions = []
        for l in range(1, l_cap + 1):
            goal = t - Fraction(1, l) if t > Fraction(1, l) else Fraction(0)
            k_disjuncts = []
            for k in range(1, k_cap + 1):
                for combo in _weight_tuples(k, vals, goal):
                    spend(len(combo) + 1)
                    conjuncts = tuple(
                        F.L(v, stratum(m - 1, i, k)) for i, v in combo
                    )
                    k_disjuncts.append(F.And(conjuncts) if conjuncts else F.top(body))
            if k_disjuncts:
                l_disjunctions.append(F.BigOr(F.FiniteFamily(tuple(k_disjuncts))))
            else:
                l_disjunctions.append(F.bot(body) if goal > 0 else F.top(body))
        return F.BigAnd(F.FiniteFamily(tuple(l_disjunctions)))

    return build(n, r)


def _weight_tuples(k: int, vals: list[Fraction], goal: Fraction) -> Iterator[list[tuple[int, Fraction]]]:
    """Weight choices per stratum index 1..k-1 whose contributions sum to >= goal.

    Yields sparse (index, conjunct threshold) lists; a stratum may be skipped
    (zero weight).  Contribution of threshold v at index i is i/k * v.
    """
    positions = list(range(1, k))
    options: list[list[tuple[Fraction, Optional[Fraction]]]] = []
    for i in positions:
        opts: list[tuple[Fraction, Optional[Fraction]]] = [(Fraction(0), None)]
        opts.extend((Fraction(i, k) * v, v) for v in vals)
        options.append(opts)
    max_tail = [Fraction(0)] * (len(positions) + 1)
    for idx in range(len(positions) - 1, -1, -1):
        max_tail[idx] = max_tail[idx + 1] + max(c for c, _ in options[idx])

    def rec(idx: int, acc: Fraction, chosen: list[tuple[int, Fraction]]):
        if acc + max_tail[idx] < goal:
            return
        if idx == len(positions):
            if acc >= goal:
                yield list(chosen)
            return
        for contrib, v in options[idx]:
            if v is not None:
                chosen.append((positions[idx], v))
            yield from rec(idx + 1, acc + contrib, chosen)
            if v is not None:
                chosen.pop()

    if not positions:
        if goal <= 0:
            yield []
        return
    yield from rec(0, Fraction(0), [])


# ---------------------------------------------------------------------------
# Experiments.


@dataclass
class ExperimentConfig:
    mode: str  # 'exhaustive' | 'random'
    n_states: int
    denom_bound: int = 3
    samples: int = 100
    seed: int = 0
    max_processes: int = 200_000


@dataclass
class ExperimentSummary:
    prop: PropertyId
    mode: str
    total: int
    agree: int
    disagree: int
    witnesses: list[dict]

    def as_dict(self) -> dict:
        return {
            "property": self.prop.value,
            "mode": self.mode,
            "total": self.total,
            "agree": self.agree,
            "disagree": self.disagree,
            "witnesses": self.witnesses,
        }


def enumerate_distributions(n: int, denom_bound: int) -> list[tuple[Fraction, ...]]:
    """All length-n probability vectors whose entries have denominators <= denom_bound."""
    import math

    common = math.lcm(*range(1, denom_bound + 1))
    out = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 1:
            cand = prefix + [remaining]
            vec = tuple(Fraction(k, common) for k in cand)
            if all(q.denominator <= denom_bound for q in vec):
                out.append(vec)
            return
        for k in range(remaining + 1):
            if Fraction(k, common).denominator <= denom_bound:
                rec(prefix + [k], remaining - k, slots - 1)

    rec([], common, n)
    return out


def enumerate_processes(prop: PropertyId, n: int, denom_bound: int, cap: int) -> Iterator[tuple[str, DynamicMarkovProcess]]:
    """Every process of the property's admissible class on the denominator grid."""
    dists = enumerate_distributions(n, denom_bound)
    maps = list(itertools.product(range(n), repeat=n))
    count = 0

    def emit(label, p):
        nonlocal count
        count += 1
        if count > cap:
            raise ResourceCapError(f"exhaustive enumeration exceeds {cap} processes")
        return label, p

    if prop in (PropertyId.MEASURE_PRESERVING, PropertyId.ERGODIC, PropertyId.MIXING):
        for mu in dists:
            for fmap in maps:
                if prop is PropertyId.MIXING and push_distribution(mu, tuple(
                    tuple(Fraction(1) if v == fmap[w] else Fraction(0) for v in range(n))
                    for w in range(n)
                )) != mu:
                    continue
                p = DynamicMarkovProcess(n, tuple(mu for _ in range(n)), fmap, None)
                yield emit(f"mu={mu} map={fmap}", p)
    elif prop in (PropertyId.STATIONARY, PropertyId.IRREDUCIBLE, PropertyId.RECURRENT):
        for rows in itertools.product(dists, repeat=n):
            for init in dists:
                p = DynamicMarkovProcess(n, tuple(rows), tuple(range(n)), init)
                yield emit(f"kernel={rows} init={init}", p)
    else:
        for rows in itertools.product(dists, repeat=n):
            for fmap in maps:
                p = DynamicMarkovProcess(n, tuple(rows), fmap, None)
                yield emit(f"kernel={rows} map={fmap}", p)


def sample_processes(prop: PropertyId, config: ExperimentConfig) -> Iterator[tuple[str, DynamicMarkovProcess]]:
    rng = random.Random(config.seed)
    produced = 0
    while produced < config.samples:
        sub = rng.getrandbits(30)
        n = config.n_states
        if prop in (PropertyId.MEASURE_PRESERVING, PropertyId.ERGODIC):
            p = random_dps(sub, n, config.denom_bound)
        elif prop is PropertyId.MIXING:
            p = random_ads(sub, n, config.denom_bound)
        elif prop in (PropertyId.STATIONARY, PropertyId.IRREDUCIBLE, PropertyId.RECURRENT):
            p = random_process(sub, n, config.denom_bound, with_init=True)
        else:
            p = random_process(sub, n, config.denom_bound, with_init=False)
        produced += 1
        yield f"seed={sub}", p


def run_experiment(prop: PropertyId, config: ExperimentConfig) -> tuple[list[CorrespondenceReport], ExperimentSummary]:
    if config.mode == "exhaustive":
        source = enumerate_processes(prop, config.n_states, config.denom_bound, config.max_processes)
    elif config.mode == "random":
        source = sample_processes(prop, config)
    else:
        raise ValueError(f"unknown mode {config.mode!r}")
    reports = []
    witnesses = []
    for label, p in source:
        report = correspondence_check(prop, p, label)
        reports.append(report)
        if not report.agree:
            entry = {
                "process": label,
                "frame": report.frame_verdict,
                "oracle": report.oracle_verdict,
            }
            if report.witness is not None:
                entry["valuation"] = {k: sorted(bits(v)) for k, v in report.witness.valuation.items()}
                entry["world"] = report.witness.world
                entry["formula"] = F.print_formula(report.witness.formula)
            witnesses.append(entry)
    agree = sum(1 for r in reports if r.agree)
    summary = ExperimentSummary(
        prop=prop,
        mode=config.mode,
        total=len(reports),
        agree=agree,
        disagree=len(reports) - agree,
        witnesses=witnesses,
    )
    return reports, summary
