import itertools
import json
import random
from fractions import Fraction

import pytest

from markovlogic.process import (
    DynamicMarkovProcess,
    InvalidProcessError,
    bits,
    classify,
    harsanyi_holds,
    mask_of,
    preimage_orbit,
    process_from_dict,
    process_to_dict,
    random_ads,
    random_harsanyi,
    random_measure_preserving,
    random_process,
    random_pure,
    validate,
)

H = Fraction(1, 2)


def uniform(n, fmap, init=None):
    row = tuple(Fraction(1, n) for _ in range(n))
    return DynamicMarkovProcess(n, tuple(row for _ in range(n)), tuple(fmap), init)


class TestValidate:
    def test_ok(self):
        assert validate(uniform(2, (1, 0))) == []

    def test_row_sum(self):
        p = DynamicMarkovProcess(2, ((H, Fraction(1, 3)), (H, H)), (0, 1))
        msgs = validate(p)
        assert any("row 0 sums to 5/6" in m for m in msgs)

    def test_map_range(self):
        p = DynamicMarkovProcess(2, ((H, H), (H, H)), (2, 0))
        assert any("out of range" in m for m in validate(p))

    def test_init_checked(self):
        p = DynamicMarkovProcess(2, ((H, H), (H, H)), (0, 1), (H, Fraction(1, 3)))
        assert any("init sums" in m for m in validate(p))

    def test_never_raises_on_malformed(self):
        p = DynamicMarkovProcess(3, ((H, H),), (0,), None)
        assert validate(p)  # reports, does not raise


class TestClassify:
    def test_swap_is_ads(self):
        c = classify(uniform(2, (1, 0)))
        assert c.measure_preserving and c.dynamic_probability_space and c.abstract_dynamical_system
        assert not c.purely_probabilistic

    def test_constant_map_not_mp(self):
        c = classify(uniform(2, (0, 0)))
        assert not c.measure_preserving and c.dynamic_probability_space

    def test_dirac_rows_harsanyi(self):
        p = DynamicMarkovProcess(2, ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))), (1, 0))
        assert classify(p).harsanyi

    def test_harsanyi_fails_on_leak(self):
        p = DynamicMarkovProcess(2, ((H, H), (Fraction(1), Fraction(0))), (0, 1))
        assert not harsanyi_holds(p)

    def test_pure_implies_mp(self):
        rng = random.Random(7)
        for _ in range(25):
            p = random_pure(rng.getrandbits(30), rng.randint(1, 4), 5)
            c = classify(p)
            assert c.purely_probabilistic and c.measure_preserving

    def test_relabeling_invariance(self):
        rng = random.Random(3)
        for _ in range(20):
            n = rng.randint(2, 4)
            p = random_process(rng.getrandbits(30), n, 4, with_init=False)
            perm = list(range(n))
            rng.shuffle(perm)
            inv = [perm.index(i) for i in range(n)]
            kernel = tuple(
                tuple(p.kernel[inv[w]][inv[v]] for v in range(n)) for w in range(n)
            )
            fmap = tuple(perm[p.map[inv[w]]] for w in range(n))
            q = DynamicMarkovProcess(n, kernel, fmap)
            assert classify(p) == classify(q)

    def test_dps_mp_matches_pushforward_form(self):
        # on probability spaces the two formulations agree subset by subset
        rng = random.Random(11)
        for _ in range(30):
            n = rng.randint(1, 4)
            p = random_ads(rng.getrandbits(30), n, 4) if rng.random() < 0.5 \
                else random_process(rng.getrandbits(30), n, 3, False)
            if any(p.kernel[w] != p.kernel[0] for w in range(n)):
                continue
            mu = p.kernel[0]
            pushforward_equal = all(
                p.measure(0, p.preimage(a)) == p.measure(0, a) for a in range(1 << n)
            )
            assert classify(p).measure_preserving == pushforward_equal
            _ = mu


class TestPreimageOrbit:
    def test_swap(self):
        assert preimage_orbit(uniform(2, (1, 0)), 0b01) == ([], [0b01, 0b10])

    def test_identity(self):
        assert preimage_orbit(uniform(2, (0, 1)), 0b01) == ([], [0b01])

    def test_constant(self):
        assert preimage_orbit(uniform(2, (0, 0)), 0b01) == ([0b01], [0b11])

    def test_reproduces_direct_preimages(self):
        rng = random.Random(5)
        for _ in range(40):
            n = rng.randint(1, 5)
            p = random_process(rng.getrandbits(30), n, 3, False)
            a = rng.randrange(1 << n)
            prefix, cycle = preimage_orbit(p, a)
            cur = a
            for k in range(len(prefix) + 2 * len(cycle)):
                if k < len(prefix):
                    expected = prefix[k]
                else:
                    expected = cycle[(k - len(prefix)) % len(cycle)]
                assert cur == expected
                cur = p.preimage(cur)


class TestRandomProcess:
    def test_single_state(self):
        p = random_process(9, 1, 4, False)
        assert p.kernel == ((Fraction(1),),) and p.map == (0,)

    def test_always_valid(self):
        for seed in range(60):
            p = random_process(seed, 1 + seed % 5, 1 + seed % 7, with_init=bool(seed % 2))
            assert validate(p) == []

    def test_deterministic(self):
        assert random_process(123, 4, 6, True) == random_process(123, 4, 6, True)

    def test_class_generators(self):
        rng = random.Random(17)
        for _ in range(25):
            seed = rng.getrandbits(30)
            n = rng.randint(1, 5)
            ads = random_ads(seed, n, 4)
            c = classify(ads)
            assert c.abstract_dynamical_system, (seed, n)
            mp = random_measure_preserving(seed, n, 4)
            assert classify(mp).measure_preserving, (seed, n)
            assert classify(random_pure(seed, n, 4)).purely_probabilistic
            assert harsanyi_holds(random_harsanyi(seed, n, 4))


class TestJson:
    def test_roundtrip(self):
        p = random_process(42, 3, 5, True)
        valuation = {"p": 0b101, "q": 0b010}
        doc = process_to_dict(p, valuation)
        q, val2 = process_from_dict(json.loads(json.dumps(doc)))
        assert q == p and val2 == valuation

    def test_rationals_as_strings_or_ints(self):
        doc = {"states": 2, "kernel": [["1/2", "1/2"], [1, 0]], "map": [0, 1]}
        p, _ = process_from_dict(doc)
        assert p.kernel[1] == (Fraction(1), Fraction(0))

    def test_rejects_bad_kernel(self):
        doc = {"states": 2, "kernel": [["1/2", "1/3"], ["1/2", "1/2"]], "map": [0, 1]}
        with pytest.raises(InvalidProcessError):
            process_from_dict(doc)

    def test_rejects_bad_valuation(self):
        doc = {"states": 2, "kernel": [["1/2", "1/2"], ["1/2", "1/2"]], "map": [0, 1],
               "valuation": {"p": [3]}}
        with pytest.raises(InvalidProcessError):
            process_from_dict(doc)


class TestMasks:
    def test_bits_mask_roundtrip(self):
        assert mask_of(bits(0b1011)) == 0b1011
        assert list(bits(mask_of([0, 3]))) == [0, 3]
