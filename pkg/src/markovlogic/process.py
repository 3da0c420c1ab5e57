"""Finite dynamic Markov processes with exact rational kernels.

A process is a finite state set {0, ..., n-1}, a row-stochastic kernel of
Fractions, a total map on states (read by the next operator), and an
optional initial distribution.  State sets are int bitmasks over [0, n).
All arithmetic is exact; validation never tolerates rounding.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional


class InvalidProcessError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


# -- bitmask state sets


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def bits(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def full_mask(n: int) -> int:
    return (1 << n) - 1


def set_str(mask: int) -> str:
    return "{" + ",".join(str(i) for i in bits(mask)) + "}"


@dataclass(frozen=True)
class DynamicMarkovProcess:
    n_states: int
    kernel: tuple[tuple[Fraction, ...], ...]  # row w is the measure T(w, .)
    map: tuple[int, ...]
    init: Optional[tuple[Fraction, ...]] = None

    def row(self, w: int) -> tuple[Fraction, ...]:
        return self.kernel[w]

    def measure(self, w: int, mask: int) -> Fraction:
        row = self.kernel[w]
        return sum((row[i] for i in bits(mask)), Fraction(0))

    def init_measure(self, mask: int) -> Fraction:
        if self.init is None:
            raise InvalidProcessError(["process has no initial distribution"])
        return sum((self.init[i] for i in bits(mask)), Fraction(0))

    def preimage(self, mask: int) -> int:
        out = 0
        for w in range(self.n_states):
            if mask >> self.map[w] & 1:
                out |= 1 << w
        return out

    def image_of_state(self, w: int) -> int:
        return self.map[w]


@dataclass(frozen=True)
class ProcessClassification:
    measure_preserving: bool
    purely_probabilistic: bool
    dynamic_probability_space: bool
    abstract_dynamical_system: bool
    harsanyi: bool

    def as_dict(self) -> dict:
        return {
            "measure_preserving": self.measure_preserving,
            "purely_probabilistic": self.purely_probabilistic,
            "dynamic_probability_space": self.dynamic_probability_space,
            "abstract_dynamical_system": self.abstract_dynamical_system,
            "harsanyi": self.harsanyi,
        }


def validate(p: DynamicMarkovProcess) -> list[str]:
    """All invariant violations, as human-readable strings; empty means valid."""
    out: list[str] = []
    n = p.n_states
    if n <= 0:
        return [f"state count {n} is not positive"]
    if len(p.kernel) != n:
        out.append(f"kernel has {len(p.kernel)} rows, expected {n}")
    for w, row in enumerate(p.kernel):
        if len(row) != n:
            out.append(f"kernel row {w} has {len(row)} entries, expected {n}")
            continue
        for v, q in enumerate(row):
            if not (0 <= q <= 1):
                out.append(f"kernel entry ({w},{v}) = {q} outside [0, 1]")
        total = sum(row, Fraction(0))
        if total != 1:
            out.append(f"kernel row {w} sums to {total}")
    if len(p.map) != n:
        out.append(f"map has {len(p.map)} entries, expected {n}")
    for w, v in enumerate(p.map):
        if not (0 <= v < n):
            out.append(f"map[{w}] = {v} out of range")
    if p.init is not None:
        if len(p.init) != n:
            out.append(f"init has {len(p.init)} entries, expected {n}")
        else:
            for v, q in enumerate(p.init):
                if not (0 <= q <= 1):
                    out.append(f"init[{v}] = {q} outside [0, 1]")
            total = sum(p.init, Fraction(0))
            if total != 1:
                out.append(f"init sums to {total}")
    return out


def require_valid(p: DynamicMarkovProcess) -> DynamicMarkovProcess:
    violations = validate(p)
    if violations:
        raise InvalidProcessError(violations)
    return p


_EXHAUSTIVE_MP_LIMIT = 12


def classify(p: DynamicMarkovProcess) -> ProcessClassification:
    """Membership flags for the process taxonomy.

    measure_preserving demands T(w, f^-1(A)) = T(f(w), A) for every world and
    every subset; up to 12 states this is checked over all 2^n subsets, above
    that over singletons only (equivalent by finite additivity).
    """
    require_valid(p)
    n = p.n_states
    if n <= _EXHAUSTIVE_MP_LIMIT:
        mp = all(
            p.measure(w, p.preimage(a)) == p.measure(p.map[w], a)
            for w in range(n)
            for a in range(1 << n)
        )
    else:
        mp = all(
            p.measure(w, p.preimage(1 << v)) == p.kernel[p.map[w]][v]
            for w in range(n)
            for v in range(n)
        )
    pure = all(p.map[w] == w for w in range(n))
    dps = all(p.kernel[w] == p.kernel[0] for w in range(n))
    return ProcessClassification(
        measure_preserving=mp,
        purely_probabilistic=pure,
        dynamic_probability_space=dps,
        abstract_dynamical_system=dps and mp,
        harsanyi=harsanyi_holds(p),
    )


def harsanyi_holds(p: DynamicMarkovProcess) -> bool:
    """Every world's kernel puts mass 0 on worlds whose kernel rows differ from its own."""
    require_valid(p)
    for w in range(p.n_states):
        row = p.kernel[w]
        if any(row[v] != 0 for v in range(p.n_states) if p.kernel[v] != row):
            return False
    return True


def preimage_orbit(p: DynamicMarkovProcess, mask: int) -> tuple[list[int], list[int]]:
    """Eventually periodic decomposition of k -> f^-k(A), starting at k = 0.

    Returns (prefix, cycle): the sequence is prefix followed by cycle repeated
    forever.  The subset lattice is finite, so the orbit always closes.
    """
    seen: dict[int, int] = {}
    seq: list[int] = []
    cur = mask
    while cur not in seen:
        seen[cur] = len(seq)
        seq.append(cur)
        cur = p.preimage(cur)
    start = seen[cur]
    return seq[:start], seq[start:]


# ---------------------------------------------------------------------------
# Seeded generation.


def _random_distribution(rng: random.Random, n: int, denom_bound: int) -> tuple[Fraction, ...]:
    weights = [rng.randint(0, denom_bound) for _ in range(n)]
    if not any(weights):
        weights[rng.randrange(n)] = 1
    total = sum(weights)
    return tuple(Fraction(w, total) for w in weights)


def random_process(seed: int, n: int, denom_bound: int, with_init: bool) -> DynamicMarkovProcess:
    """Deterministic-in-seed process with integer-weight rows (rows sum to 1 exactly)."""
    if n < 1 or denom_bound < 1:
        raise ValueError("n and denom_bound must be positive")
    rng = random.Random(seed)
    kernel = tuple(_random_distribution(rng, n, denom_bound) for _ in range(n))
    fmap = tuple(rng.randrange(n) for _ in range(n))
    init = _random_distribution(rng, n, denom_bound) if with_init else None
    return DynamicMarkovProcess(n, kernel, fmap, init)


def random_dps(seed: int, n: int, denom_bound: int, with_init: bool = False) -> DynamicMarkovProcess:
    """Random dynamic probability space: one shared row, arbitrary map."""
    rng = random.Random(seed)
    mu = _random_distribution(rng, n, denom_bound)
    fmap = tuple(rng.randrange(n) for _ in range(n))
    init = _random_distribution(rng, n, denom_bound) if with_init else None
    return DynamicMarkovProcess(n, tuple(mu for _ in range(n)), fmap, init)


def _cycles_of(fmap: tuple[int, ...]) -> list[list[int]]:
    n = len(fmap)
    on_cycle = set()
    for s in range(n):
        # iterate n steps to land inside the eventual cycle of s
        cur = s
        for _ in range(n):
            cur = fmap[cur]
        start = cur
        cyc = [cur]
        cur = fmap[cur]
        while cur != start:
            cyc.append(cur)
            cur = fmap[cur]
        on_cycle.add(frozenset(cyc))
    return [sorted(c) for c in sorted(on_cycle, key=min)]


def random_ads(seed: int, n: int, denom_bound: int, with_init: bool = False) -> DynamicMarkovProcess:
    """Random abstract dynamical system: shared measure invariant under the map.

    Invariant measures of a deterministic map are mixtures of uniform measures
    on its cycles, so mass is drawn per cycle and spread uniformly inside it.
    """
    rng = random.Random(seed)
    fmap = tuple(rng.randrange(n) for _ in range(n))
    cycles = _cycles_of(fmap)
    cycle_mass = _random_distribution(rng, len(cycles), denom_bound)
    mu = [Fraction(0)] * n
    for c, mass in zip(cycles, cycle_mass):
        for s in c:
            mu[s] = mass / len(c)
    row = tuple(mu)
    init = _random_distribution(rng, n, denom_bound) if with_init else None
    return DynamicMarkovProcess(n, tuple(row for _ in range(n)), fmap, init)


def random_measure_preserving(seed: int, n: int, denom_bound: int) -> DynamicMarkovProcess:
    """Random measure-preserving process, not necessarily a probability space.

    Alternates between two exact constructions: an abstract dynamical system,
    and a permutation map whose rows are constant on the orbits of f^c (c the
    length of the row's own cycle), which forces T(w, f^-1(A)) = T(f(w), A).
    """
    rng = random.Random(seed)
    if rng.random() < 0.5:
        return random_ads(rng.randrange(1 << 30), n, denom_bound)
    perm = list(range(n))
    rng.shuffle(perm)
    fmap = tuple(perm)
    cycles = _cycles_of(fmap)
    kernel: list[Optional[tuple[Fraction, ...]]] = [None] * n
    for cyc in cycles:
        c = len(cyc)
        # orbits of f^c partition the states; a row constant on them is
        # invariant under c-fold pushforward, so it propagates consistently
        orbit_of = {}
        for s in range(n):
            if s in orbit_of:
                continue
            orbit = []
            cur = s
            while cur not in orbit:
                orbit.append(cur)
                for _ in range(c):
                    cur = fmap[cur]
            for x in orbit:
                orbit_of[x] = tuple(orbit)
        orbits = sorted({orbit_of[s] for s in range(n)}, key=min)
        masses = _random_distribution(rng, len(orbits), denom_bound)
        base = [Fraction(0)] * n
        for orbit, mass in zip(orbits, masses):
            for s in orbit:
                base[s] = mass / len(orbit)
        row = tuple(base)
        w = cyc[0]
        for _ in range(c):
            kernel[w] = row
            # the next row around the cycle is the pushforward of this one
            nxt = [Fraction(0)] * n
            for s in range(n):
                nxt[fmap[s]] += row[s]
            row = tuple(nxt)
            w = fmap[w]
    # a permutation has no tree part, so every row was assigned above
    return DynamicMarkovProcess(n, tuple(kernel), fmap, None)  # type: ignore[arg-type]


def random_pure(seed: int, n: int, denom_bound: int) -> DynamicMarkovProcess:
    rng = random.Random(seed)
    kernel = tuple(_random_distribution(rng, n, denom_bound) for _ in range(n))
    return DynamicMarkovProcess(n, kernel, tuple(range(n)), None)


def random_harsanyi(seed: int, n: int, denom_bound: int) -> DynamicMarkovProcess:
    """Random process with the introspection property: states are grouped in
    blocks sharing a row whose mass stays inside the block."""
    rng = random.Random(seed)
    block_of = [rng.randrange(n) for _ in range(n)]
    blocks: dict[int, list[int]] = {}
    for s, b in enumerate(block_of):
        blocks.setdefault(b, []).append(s)
    kernel: list[tuple[Fraction, ...]] = [()] * n
    for members in blocks.values():
        weights = [rng.randint(0, denom_bound) for _ in members]
        if not any(weights):
            weights[0] = 1
        total = sum(weights)
        row = [Fraction(0)] * n
        for s, wgt in zip(members, weights):
            row[s] = Fraction(wgt, total)
        for s in members:
            kernel[s] = tuple(row)
    fmap = tuple(rng.randrange(n) for _ in range(n))
    return DynamicMarkovProcess(n, tuple(kernel), fmap, None)


# ---------------------------------------------------------------------------
# JSON interchange.


def _parse_rational_field(v, where: str) -> Fraction:
    try:
        if isinstance(v, int):
            return Fraction(v)
        if isinstance(v, str):
            return Fraction(v)
    except (ValueError, ZeroDivisionError):
        pass
    raise InvalidProcessError([f"malformed rational {v!r} in {where}"])


def process_from_dict(doc: dict) -> tuple[DynamicMarkovProcess, dict[str, int]]:
    """Parse the process file schema; returns the process and the valuation
    (proposition -> state bitmask), which is empty when absent."""
    try:
        n = int(doc["states"])
    except (KeyError, TypeError, ValueError):
        raise InvalidProcessError(["missing or malformed 'states'"])
    kernel_doc = doc.get("kernel")
    if not isinstance(kernel_doc, list):
        raise InvalidProcessError(["missing 'kernel'"])
    kernel = tuple(
        tuple(_parse_rational_field(v, f"kernel row {w}") for v in row)
        for w, row in enumerate(kernel_doc)
    )
    map_doc = doc.get("map")
    if not isinstance(map_doc, list) or not all(isinstance(v, int) for v in map_doc):
        raise InvalidProcessError(["missing or malformed 'map'"])
    init = None
    if doc.get("init") is not None:
        init = tuple(_parse_rational_field(v, "init") for v in doc["init"])
    p = DynamicMarkovProcess(n, kernel, tuple(map_doc), init)
    require_valid(p)
    valuation: dict[str, int] = {}
    for prop, states in (doc.get("valuation") or {}).items():
        if not all(isinstance(s, int) and 0 <= s < n for s in states):
            raise InvalidProcessError([f"valuation of {prop!r} out of range"])
        valuation[prop] = mask_of(states)
    return p, valuation


def process_to_dict(p: DynamicMarkovProcess, valuation: Optional[dict[str, int]] = None) -> dict:
    doc: dict = {
        "states": p.n_states,
        "kernel": [[str(q) for q in row] for row in p.kernel],
        "map": list(p.map),
    }
    if p.init is not None:
        doc["init"] = [str(q) for q in p.init]
    if valuation:
        doc["valuation"] = {prop: sorted(bits(m)) for prop, m in sorted(valuation.items())}
    return doc


def load_process(path: str) -> tuple[DynamicMarkovProcess, dict[str, int]]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise InvalidProcessError([f"invalid JSON: {e}"])
    if not isinstance(doc, dict):
        raise InvalidProcessError(["process file must hold a JSON object"])
    return process_from_dict(doc)
