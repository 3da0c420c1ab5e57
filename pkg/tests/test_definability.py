import random
from fractions import Fraction

import pytest

from markovlogic import formula as F
from markovlogic.definability import (
    CorrespondenceReport,
    ExperimentConfig,
    PropertyId,
    correspondence_check,
    defining_formulas,
    enumerate_distributions,
    expand_nstep_literal,
    frame_stationary,
    irreducibility_formula,
    run_experiment,
    stationary_formula,
)
from markovlogic.process import DynamicMarkovProcess, random_process
from markovlogic.semantics import (
    Model,
    TruncationBounds,
    evaluator_for,
    extension,
    frame_valid,
    satisfies,
    truncated_eval,
)
from markovlogic.stochastic import FrameClassError

H = Fraction(1, 2)


def proc(kernel, fmap=None, init=None):
    n = len(kernel)
    return DynamicMarkovProcess(
        n,
        tuple(tuple(Fraction(x) for x in row) for row in kernel),
        tuple(fmap if fmap is not None else range(n)),
        tuple(Fraction(x) for x in init) if init is not None else None,
    )


class TestDefiningFormulas:
    def test_measure_preserving_shape(self):
        [f] = defining_formulas(PropertyId.MEASURE_PRESERVING, [H])
        assert f == F.parse("L[1/2] O p <-> O L[1/2] p")

    def test_ergodic_shape(self):
        # the triviality disjunct reads "at most 0 or at least 1"
        [f] = defining_formulas(PropertyId.ERGODIC)
        assert f == F.parse("(O p <-> p) -> (M[0] p | L[1] p)")
        assert F.parse("M[0] p") == F.parse("L[1] !p")

    def test_purely_probabilistic_shape(self):
        [f] = defining_formulas(PropertyId.PURELY_PROBABILISTIC)
        assert f == F.parse("O p <-> p")

    def test_mixing_shapes(self):
        fs = defining_formulas(PropertyId.MIXING, [H])
        assert len(fs) == 2
        for f in fs:
            assert isinstance(f, F.Neg)  # implications desugar to the core

    def test_irreducibility_truncated_at_state_count(self):
        f = irreducibility_formula(3)
        text = F.print_formula(f)
        assert "LN[3,1]" in text and "LN[4,1]" not in text


class TestCorrespondenceExamples:
    def test_mp_swap(self):
        report = correspondence_check(PropertyId.MEASURE_PRESERVING, proc([[H, H], [H, H]], fmap=(1, 0)))
        assert report.frame_verdict and report.oracle_verdict and report.agree

    def test_mp_constant(self):
        const = proc([[H, H], [H, H]], fmap=(0, 0))
        report = correspondence_check(PropertyId.MEASURE_PRESERVING, const)
        assert not report.frame_verdict and not report.oracle_verdict and report.agree
        assert report.witness is not None
        m = Model(const, report.witness.valuation)
        assert not satisfies(m, report.witness.world, report.witness.formula)

    def test_ergodic_identity(self):
        report = correspondence_check(PropertyId.ERGODIC, proc([[H, H], [H, H]], fmap=(0, 1)))
        assert not report.frame_verdict and not report.oracle_verdict

    def test_ergodic_three_cycle(self):
        third = Fraction(1, 3)
        p = proc([[third] * 3] * 3, fmap=(1, 2, 0))
        report = correspondence_check(PropertyId.ERGODIC, p)
        assert report.frame_verdict and report.oracle_verdict

    def test_admissibility_enforced(self):
        non_dps = proc([[1, 0], [0, 1]], fmap=(0, 1))
        with pytest.raises(FrameClassError):
            correspondence_check(PropertyId.MIXING, non_dps)

    def test_witness_only_when_frame_fails(self):
        good = correspondence_check(PropertyId.MEASURE_PRESERVING, proc([[H, H], [H, H]], fmap=(1, 0)))
        assert good.witness is None


class TestNStepExpansion:
    def test_base_cases(self):
        p = F.Atom("p")
        assert expand_nstep_literal(1, H, p, 4, 4, [H]) == F.L(H, p)
        assert expand_nstep_literal(0, H, p, 4, 4, [H]) == F.InitL(H, p)

    def test_swap_example_truncated_matches_closed_form(self):
        swap = proc([[0, 1], [1, 0]], fmap=(1, 0), init=[H, H])
        m = Model(swap, {"p": 0b01})
        values = evaluator_for(swap).attained_values()
        expansion = expand_nstep_literal(2, Fraction(1), F.Atom("p"), 4, 4, values)
        closed = extension(m, F.NStepL(2, Fraction(1), F.Atom("p")))
        assert satisfies(m, 0, expansion) == bool(closed & 1)
        assert closed == 0b01

    def test_materialized_expansion_equals_truncated_evaluator(self):
        rng = random.Random(19)
        for _ in range(12):
            n = rng.randint(1, 3)
            p = random_process(rng.getrandbits(30), n, 2, with_init=True)
            m = Model(p, {"p": rng.randrange(1 << n)})
            values = evaluator_for(p).attained_values()
            den = rng.randint(1, 4)
            r = Fraction(rng.randint(0, den), den)
            caps = (3, 3)
            ast = expand_nstep_literal(2, r, F.Atom("p"), caps[0], caps[1], values)
            bounds = TruncationBounds(nat_cap=caps[0], k_cap=caps[1], rational_grid=tuple(values))
            node = F.NStepL(2, r, F.Atom("p"))
            assert extension(m, ast) == truncated_eval(m, node, bounds)


class TestStationaryFormula:
    def test_materialized_matches_greedy_check(self):
        rng = random.Random(29)
        for _ in range(12):
            n = rng.randint(1, 2)
            p = random_process(rng.getrandbits(30), n, 2, with_init=True)
            ev = evaluator_for(p)
            kernel_values = sorted({ev.measure(w, a) for w in range(n) for a in range(1 << n)})
            init_values = sorted({ev.init_measure(a) for a in range(1 << n)})
            den = rng.randint(1, 4)
            r = Fraction(rng.randint(0, den), den)
            formula = stationary_formula(r, kernel_values, init_values)
            verdict = frame_valid(p, formula, cap=1 << 16)
            from markovlogic.stochastic import measure_on, push_distribution
            pushed = push_distribution(p.init, p.kernel)
            manual = all(
                (ev.init_measure(a) >= r) == (measure_on(pushed, a) >= r)
                for a in range(1 << n)
            )
            assert verdict.valid == manual

    def test_stationary_witness_replays(self):
        p = proc([[0, 1], [1, 0]], init=[1, 0])
        verdict = frame_stationary(p)
        assert not verdict.valid
        ce = verdict.counterexample
        m = Model(p, ce.valuation)
        assert not satisfies(m, ce.world, ce.formula)


class TestExperiments:
    def test_exhaustive_distributions_grid(self):
        dists = enumerate_distributions(2, 4)
        assert (Fraction(1, 3), Fraction(2, 3)) in dists
        assert all(sum(d, Fraction(0)) == 1 for d in dists)
        assert all(q.denominator <= 4 for d in dists for q in d)
        assert len(dists) == 7

    def test_exhaustive_ergodic_small(self):
        _, summary = run_experiment(
            PropertyId.ERGODIC, ExperimentConfig(mode="exhaustive", n_states=2, denom_bound=2)
        )
        assert summary.total == 12 and summary.disagree == 0

    def test_random_stationary(self):
        _, summary = run_experiment(
            PropertyId.STATIONARY,
            ExperimentConfig(mode="random", n_states=3, denom_bound=4, samples=40, seed=5),
        )
        assert summary.total == 40 and summary.disagree == 0

    def test_exhaustive_pure_identity_only(self):
        reports, summary = run_experiment(
            PropertyId.PURELY_PROBABILISTIC,
            ExperimentConfig(mode="exhaustive", n_states=2, denom_bound=1),
        )
        assert summary.disagree == 0
        frame_true = [r for r in reports if r.frame_verdict]
        assert frame_true and all("map=(0, 1)" in r.label for r in frame_true)

    def test_summary_schema(self):
        _, summary = run_experiment(
            PropertyId.HARSANYI, ExperimentConfig(mode="random", n_states=2, denom_bound=2, samples=5, seed=1)
        )
        doc = summary.as_dict()
        assert set(doc) == {"property", "mode", "total", "agree", "disagree", "witnesses"}

    def test_exhaustive_harsanyi_small_states(self):
        # introspection axioms at critical thresholds match the kernel-row
        # condition on every process of the small grids
        for n, denom in ((1, 3), (2, 2), (3, 1)):
            _, summary = run_experiment(
                PropertyId.HARSANYI, ExperimentConfig(mode="exhaustive", n_states=n, denom_bound=denom)
            )
            assert summary.disagree == 0 and summary.total > 0
