import random
from fractions import Fraction

import pytest

from helpers import random_formula, random_valuation
from markovlogic import formula as F
from markovlogic.process import DynamicMarkovProcess, full_mask, random_process
from markovlogic.semantics import (
    Model,
    MissingAtomError,
    ResourceCapError,
    TruncationBounds,
    evaluator_for,
    extension,
    frame_valid,
    satisfies,
    truncated_eval,
)

H = Fraction(1, 2)


def proc(kernel, fmap=None, init=None):
    n = len(kernel)
    return DynamicMarkovProcess(
        n,
        tuple(tuple(Fraction(x) for x in row) for row in kernel),
        tuple(fmap if fmap is not None else range(n)),
        tuple(Fraction(x) for x in init) if init is not None else None,
    )


UNIFORM_SWAP = proc([[H, H], [H, H]], fmap=(1, 0))
PERM_SWAP = proc([[0, 1], [1, 0]], fmap=(1, 0))


class TestExtension:
    def test_l_thresholds(self):
        m = Model(UNIFORM_SWAP, {"p": 0b01})
        assert extension(m, F.parse("L[1/2] p")) == 0b11
        assert extension(m, F.parse("L[3/4] p")) == 0

    def test_next_is_preimage(self):
        m = Model(UNIFORM_SWAP, {"p": 0b01})
        assert extension(m, F.parse("O p")) == 0b10

    def test_nstep_permutation(self):
        m = Model(PERM_SWAP, {"p": 0b01})
        assert extension(m, F.parse("LN[2,1] p")) == 0b01

    def test_boolean_clauses(self):
        rng = random.Random(8)
        for _ in range(60):
            n = rng.randint(1, 4)
            p = random_process(rng.getrandbits(30), n, 4, False)
            val = random_valuation(rng, n)
            model = Model(p, val)
            f = random_formula(rng, 3)
            g = random_formula(rng, 2)
            full = full_mask(n)
            assert extension(model, F.Neg(f)) == full & ~extension(model, f)
            assert extension(model, F.And((f, g))) == extension(model, f) & extension(model, g)
            assert extension(model, F.Next(f)) == p.preimage(extension(model, f))

    def test_missing_atom(self):
        with pytest.raises(MissingAtomError):
            extension(Model(UNIFORM_SWAP, {}), F.parse("p"))

    def test_init_operator_constant(self):
        p = proc([[H, H], [H, H]], init=[Fraction(1, 4), Fraction(3, 4)])
        m = Model(p, {"p": 0b10})
        assert extension(m, F.parse("I[3/4] p")) == 0b11
        assert extension(m, F.parse("I[1] p")) == 0
        with pytest.raises(F.FormulaError):
            extension(Model(UNIFORM_SWAP, {"p": 1}), F.parse("I[1] p"))


class TestSatisfies:
    def test_top(self):
        m = Model(UNIFORM_SWAP, {"p": 0b01})
        for w in range(2):
            assert satisfies(m, w, F.top())

    def test_l_half(self):
        m = Model(UNIFORM_SWAP, {"p": 0b01})
        assert satisfies(m, 0, F.parse("L[1/2] p"))

    def test_negation_flip(self):
        rng = random.Random(12)
        for _ in range(30):
            n = rng.randint(1, 4)
            p = random_process(rng.getrandbits(30), n, 4, False)
            m = Model(p, random_valuation(rng, n))
            f = random_formula(rng, 3)
            w = rng.randrange(n)
            assert satisfies(m, w, F.Neg(f)) == (not satisfies(m, w, f))


class TestFormalNegationSemantics:
    def test_negation_is_semantic_complement(self):
        rng = random.Random(23)
        for _ in range(80):
            n = rng.randint(1, 4)
            p = random_process(rng.getrandbits(30), n, 4, False)
            m = Model(p, random_valuation(rng, n))
            f = random_formula(rng, 3)
            neg = F.formal_negation(f)
            assert extension(m, neg) == full_mask(n) & ~extension(m, f)


class TestFrameValid:
    def test_tautology(self):
        rng = random.Random(1)
        p = random_process(rng.getrandbits(30), 3, 4, False)
        assert frame_valid(p, F.parse("p -> p")).valid

    def test_constant_map_counterexample(self):
        const = proc([[H, H], [H, H]], fmap=(0, 0))
        v = frame_valid(const, F.parse("L[1] O p -> O L[1] p"))
        assert not v.valid
        assert v.counterexample.valuation == {"p": 0b01}

    def test_single_state_excluded_middle(self):
        single = proc([[1]], fmap=(0,))
        assert frame_valid(single, F.parse("L[1] p | L[1] !p")).valid

    def test_counterexamples_replay(self):
        rng = random.Random(77)
        found = 0
        for _ in range(120):
            n = rng.randint(1, 3)
            p = random_process(rng.getrandbits(30), n, 3, False)
            f = random_formula(rng, 3)
            v = frame_valid(p, f)
            if not v.valid:
                found += 1
                ce = v.counterexample
                assert not satisfies(Model(p, ce.valuation), ce.world, ce.formula)
        assert found > 20

    def test_first_counterexample_is_lexicographic(self):
        const = proc([[H, H], [H, H]], fmap=(0, 0))
        f = F.parse("L[1] O p -> O L[1] p")
        v = frame_valid(const, f)
        ce = v.counterexample
        # p=0 (empty set) satisfies the formula; p={0} is the first failure
        assert ce.valuation["p"] == 1 and ce.world == 0

    def test_resource_cap(self):
        p = random_process(3, 4, 3, False)
        with pytest.raises(ResourceCapError):
            frame_valid(p, F.parse("p & q & r0 & r1"), cap=1000)


class TestConsequence:
    def test_finite_consequence_on_one_process(self):
        from markovlogic.semantics import frame_consequence

        p = proc([[H, H], [H, H]], fmap=(1, 0))
        mono = frame_consequence(p, [F.parse("L[1](p -> q)"), F.parse("L[1/2] p")], F.parse("L[1/2] q"))
        assert mono.valid
        bad = frame_consequence(p, [F.parse("L[1/2] p")], F.parse("L[1] p"))
        assert not bad.valid
        # counterexamples replay through the implication form
        ce = bad.counterexample
        assert not satisfies(Model(p, ce.valuation), ce.world, ce.formula)


class TestArchimedeanStepFunction:
    def test_witness_form(self):
        rng = random.Random(55)
        for _ in range(120):
            n = rng.randint(1, 4)
            p = random_process(rng.getrandbits(30), n, 5, False)
            m = Model(p, random_valuation(rng, n))
            body = random_formula(rng, 2)
            chain = [Fraction(rng.randint(0, 4), 4) for _ in range(rng.randint(0, 2))]
            den = rng.randint(1, 8)
            r = Fraction(rng.randint(1, den), den)
            full_formula = F.l_chain(chain + [r], body)
            ext_r = extension(m, full_formula)
            ev = evaluator_for(p)
            pool = ev.threshold_pool(r, strict=True)
            # monotonicity: lowering the innermost threshold grows the extension
            for s in pool:
                assert ext_r & ~extension(m, F.l_chain(chain + [s], body)) == 0
            for w in range(n):
                if not (ext_r >> w) & 1:
                    # witness: midway between the last surviving pool value and r
                    attained = [s for s in pool if satisfies(m, w, F.l_chain(chain + [s], body))]
                    v = max(attained) if attained else Fraction(0)
                    s = (v + r) / 2
                    assert s < r
                    assert not satisfies(m, w, F.l_chain(chain + [s], body))


class TestFamilies:
    def test_nat_family_finite_support(self):
        rng = random.Random(99)
        for _ in range(40):
            n = rng.randint(1, 4)
            p = random_process(rng.getrandbits(30), n, 4, False)
            m = Model(p, random_valuation(rng, n))
            prefix = tuple(random_formula(rng, 2) for _ in range(rng.randint(0, 3)))
            tail = random_formula(rng, 2)
            r = Fraction(rng.randint(0, 4), 4)
            fam = F.BigAnd(F.NatFamily(prefix, tail))
            lhs = extension(m, F.L(r, fam))
            rhs = full_mask(n)
            for k in range(len(prefix) + 2):
                members = [prefix[i] if i < len(prefix) else tail for i in range(k + 1)]
                rhs &= extension(m, F.L(r, members[0] if len(members) == 1 else F.And(tuple(members))))
            assert lhs == rhs

    def test_threshold_family_matches_truncation_on_pool(self):
        rng = random.Random(101)
        for _ in range(40):
            n = rng.randint(1, 3)
            p = random_process(rng.getrandbits(30), n, 3, False)
            m = Model(p, random_valuation(rng, n))
            bound = Fraction(rng.randint(1, 4), 4)
            strict = rng.random() < 0.5
            template = F.L(F.Affine.var("s"), random_formula(rng, 2))
            if rng.random() < 0.5:
                template = F.Neg(template)
            fam = F.ThresholdFamily("s", bound, strict, template)
            node = F.BigAnd(fam) if rng.random() < 0.5 else F.BigOr(fam)
            exact = extension(m, node)
            pool = evaluator_for(p).threshold_pool(bound, strict)
            bounds = TruncationBounds(nat_cap=4, k_cap=4, rational_grid=tuple(pool))
            assert truncated_eval(m, node, bounds) == exact

    def test_extra_thresholds_never_change_family_verdicts(self):
        rng = random.Random(103)
        for _ in range(30):
            n = rng.randint(1, 3)
            p = random_process(rng.getrandbits(30), n, 3, False)
            m = Model(p, random_valuation(rng, n))
            bound = Fraction(rng.randint(1, 4), 4)
            template = F.L(F.Affine.var("s"), random_formula(rng, 2))
            node = F.BigAnd(F.ThresholdFamily("s", bound, True, template))
            exact = extension(m, node)
            pool = set(evaluator_for(p).threshold_pool(bound, strict=True))
            for _ in range(5):
                den = rng.randint(1, 16)
                extra = Fraction(rng.randint(0, den), den)
                if extra < bound:
                    pool.add(extra)
            narrowed = full_mask(n)
            for s in sorted(pool):
                narrowed &= extension(m, F.ThresholdFamily("s", bound, True, template).member(s))
            assert narrowed == exact


class TestLimOperators:
    def test_eventually_constant_truncation_matches(self):
        # identity and constant maps stabilize the preimage orbit, so the
        # literal tail-window truncation coincides with the exact limit once
        # the horizon passes the stabilization index
        rng = random.Random(107)
        for _ in range(40):
            n = rng.randint(1, 4)
            base = random_process(rng.getrandbits(30), n, 4, False)
            fmap = tuple(range(n)) if rng.random() < 0.5 else (rng.randrange(n),) * n
            p = DynamicMarkovProcess(n, base.kernel, fmap, None)
            m = Model(p, random_valuation(rng, n))
            tmpl = F.NatTemplate(F.And((F.Iter(F.Atom("p")), F.Atom("q"))))
            den = rng.randint(1, 6)
            t = Fraction(rng.randint(0, den), den)
            node = F.LimL(t, tmpl) if rng.random() < 0.5 else F.LimM(t, tmpl)
            exact = extension(m, node)
            k_cap = n + 2
            bounds = TruncationBounds(nat_cap=64, k_cap=k_cap, rational_grid=())
            assert truncated_eval(m, node, bounds) == exact

    def test_liml_reads_cycle_minimum(self):
        m = Model(UNIFORM_SWAP, {"p": 0b01, "q": 0b11})
        tmpl = F.NatTemplate(F.And((F.Iter(F.Atom("p")), F.Atom("q"))))
        # measures oscillate between 1/2 and 1/2 here: f^-k({0}) is a singleton
        assert extension(m, F.LimL(Fraction(1, 2), tmpl)) == 0b11
        assert extension(m, F.LimL(Fraction(3, 4), tmpl)) == 0


class TestTruncationMonotone:
    def test_bigand_shrinks_bigor_grows(self):
        rng = random.Random(109)
        for _ in range(30):
            n = rng.randint(1, 3)
            p = random_process(rng.getrandbits(30), n, 3, False)
            m = Model(p, random_valuation(rng, n))
            tmpl = F.NatTemplate(F.And((F.Iter(F.Atom("p")), F.Atom("q"))))
            t = Fraction(rng.randint(0, 4), 4)
            node_and = F.LimL(t, tmpl)
            small = TruncationBounds(nat_cap=2, k_cap=3, rational_grid=())
            large = TruncationBounds(nat_cap=5, k_cap=9, rational_grid=())
            assert truncated_eval(m, node_and, large) & ~truncated_eval(m, node_and, small) == 0
