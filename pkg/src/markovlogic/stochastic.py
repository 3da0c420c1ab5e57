"""Exact oracles for stochastic and dynamical properties of finite processes.

Everything here is decided with rational arithmetic or graph structure; no
series is ever summed numerically and no tolerance appears anywhere.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .process import (
    DynamicMarkovProcess,
    InvalidProcessError,
    bits,
    classify,
    harsanyi_holds,
    preimage_orbit,
    require_valid,
)



__all__ = [
    "n_step", "matrix_power", "push_distribution", "is_stationary",
    "is_ergodic", "is_mixing", "is_irreducible", "is_recurrent",
    "harsanyi_holds", "FrameClassError", "reach_in_one_or_more",
    "recurrent_state_mask", "measure_on", "n_step_measure", "expected_visits",
]

Matrix = tuple[tuple[Fraction, ...], ...]


class FrameClassError(ValueError):
    """Operation applied outside its admissible frame class."""


def _mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum((ra[k] * cb[k] for k in range(n)), Fraction(0)) for cb in bt)
        for ra in a
    )


def _identity(n: int) -> Matrix:
    return tuple(
        tuple(Fraction(1) if i == j else Fraction(0) for j in range(n))
        for i in range(n)
    )


@lru_cache(maxsize=4096)
def matrix_power(kernel: Matrix, n: int) -> Matrix:
    if n == 0:
        return _identity(len(kernel))
    if n == 1:
        return kernel
    half = matrix_power(kernel, n // 2)
    out = _mat_mul(half, half)
    if n % 2:
        out = _mat_mul(out, kernel)
    return out


def n_step(p: DynamicMarkovProcess, n: int, mode: str = "dirac"):
    """n-step transition data: the matrix T^n for n >= 1.

    For n = 0 the two conventions diverge: mode 'dirac' returns the identity
    matrix (each world sees its own point mass; used by the recurrence
    oracle), mode 'with_init' returns the initial distribution vector (the
    world-independent convention the initial-operator semantics uses).
    """
    require_valid(p)
    if n < 0:
        raise ValueError("negative step count")
    if n == 0:
        if mode == "with_init":
            if p.init is None:
                raise InvalidProcessError(["process has no initial distribution"])
            return p.init
        if mode == "dirac":
            return _identity(p.n_states)
        raise ValueError(f"unknown mode {mode!r}")
    return matrix_power(p.kernel, n)


def measure_on(row, mask: int) -> Fraction:
    return sum((row[i] for i in bits(mask)), Fraction(0))


def n_step_measure(p: DynamicMarkovProcess, n: int, w: int, mask: int) -> Fraction:
    """T^n(w, A) with the Dirac convention at n = 0."""
    if n == 0:
        return Fraction(1) if (mask >> w) & 1 else Fraction(0)
    return measure_on(matrix_power(p.kernel, n)[w], mask)


def push_distribution(dist, kernel: Matrix):
    """Row vector times kernel: the one-step image of a distribution."""
    n = len(kernel)
    return tuple(
        sum((dist[w] * kernel[w][a] for w in range(n)), Fraction(0))
        for a in range(n)
    )


def is_stationary(p: DynamicMarkovProcess) -> bool:
    """Whether the initial distribution is invariant: pi T = pi, exactly."""
    require_valid(p)
    if p.init is None:
        raise InvalidProcessError(["process has no initial distribution"])
    return push_distribution(p.init, p.kernel) == p.init


def _weak_components(fmap: tuple[int, ...]) -> list[int]:
    """Masks of the weakly connected components of the functional graph.

    A set A satisfies f^-1(A) = A exactly when it is a union of these
    components, so they are the minimal invariant sets.
    """
    n = len(fmap)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for w in range(n):
        a, b = find(w), find(fmap[w])
        if a != b:
            parent[a] = b
    comps: dict[int, int] = {}
    for w in range(n):
        comps[find(w)] = comps.get(find(w), 0) | (1 << w)
    return sorted(comps.values())


_EXHAUSTIVE_LIMIT = 12


def _single_measure(p: DynamicMarkovProcess) -> tuple[Fraction, ...]:
    if any(p.kernel[w] != p.kernel[0] for w in range(p.n_states)):
        raise FrameClassError("not a dynamic probability space (kernel rows differ)")
    return p.kernel[0]


def is_ergodic(p: DynamicMarkovProcess) -> bool:
    """On a dynamic probability space: every invariant set has measure 0 or 1.

    Up to 12 states all invariant sets are enumerated outright; beyond that
    the minimal invariant components of the map's functional graph decide it.
    """
    require_valid(p)
    mu = _single_measure(p)
    n = p.n_states
    if n <= _EXHAUSTIVE_LIMIT:
        for a in range(1 << n):
            if p.preimage(a) == a:
                m = measure_on(mu, a)
                if m != 0 and m != 1:
                    return False
        return True
    for comp in _weak_components(p.map):
        m = measure_on(mu, comp)
        if m != 0 and m != 1:
            return False
    return True


def is_mixing(p: DynamicMarkovProcess) -> bool:
    """On an abstract dynamical system: mu(f^-k(A) n B) -> mu(A) mu(B) for all A, B.

    The preimage orbit of A is eventually periodic, so the limit exists iff
    the intersection measure is constant along the cycle; mixing iff that
    constant equals the product, for every pair of subsets, exactly.
    """
    require_valid(p)
    mu = _single_measure(p)
    if not classify(p).measure_preserving:
        raise FrameClassError("not an abstract dynamical system (map does not preserve the measure)")
    n = p.n_states
    for a in range(1 << n):
        _, cycle = preimage_orbit(p, a)
        mu_a = measure_on(mu, a)
        for b in range(1 << n):
            target = mu_a * measure_on(mu, b)
            if any(measure_on(mu, s & b) != target for s in cycle):
                return False
    return True


def reach_in_one_or_more(p: DynamicMarkovProcess) -> list[int]:
    """reach[w] = mask of states reachable from w in >= 1 steps through
    strictly positive transitions."""
    n = p.n_states
    succ = [
        sum(1 << v for v in range(n) if p.kernel[w][v] > 0)
        for w in range(n)
    ]
    reach = []
    for w in range(n):
        seen = succ[w]
        frontier = succ[w]
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= succ[v]
            frontier = nxt & ~seen
            seen |= nxt
        reach.append(seen)
    return reach


def is_irreducible(p: DynamicMarkovProcess) -> bool:
    """Every state carrying initial mass is reachable, with positive
    probability and at least one step, from every state."""
    require_valid(p)
    if p.init is None:
        raise InvalidProcessError(["process has no initial distribution"])
    reach = reach_in_one_or_more(p)
    positive = sum(1 << a for a in range(p.n_states) if p.init[a] > 0)
    return all(reach[w] & positive == positive for w in range(p.n_states))


def _sccs(succ: list[int], n: int) -> list[int]:
    """Strongly connected components (as masks) of the positive-edge graph,
    via Kosaraju's two sweeps; fine at this scale."""
    order: list[int] = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        stack = [(start, iter(list(bits(succ[start]))))]
        seen[start] = True
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                if not seen[v]:
                    seen[v] = True
                    stack.append((v, iter(list(bits(succ[v])))))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
    pred = [0] * n
    for w in range(n):
        for v in bits(succ[w]):
            pred[v] |= 1 << w
    comp = [-1] * n
    comps: list[int] = []
    for start in reversed(order):
        if comp[start] != -1:
            continue
        cid = len(comps)
        mask = 0
        frontier = [start]
        comp[start] = cid
        while frontier:
            node = frontier.pop()
            mask |= 1 << node
            for v in bits(pred[node]):
                if comp[v] == -1:
                    comp[v] = cid
                    frontier.append(v)
        comps.append(mask)
    return comps


def recurrent_state_mask(p: DynamicMarkovProcess) -> int:
    """States lying in a closed strongly connected class of the positive graph.

    The expected number of visits U(w, A) diverges exactly when some state of
    A in this mask is reachable from w; a single bounded n = 0 term never
    affects divergence.
    """
    n = p.n_states
    succ = [
        sum(1 << v for v in range(n) if p.kernel[w][v] > 0)
        for w in range(n)
    ]
    out = 0
    for comp in _sccs(succ, n):
        closed = all(succ[w] & ~comp == 0 for w in bits(comp))
        if closed:
            out |= comp
    return out


def expected_visits(p: DynamicMarkovProcess, w: int, mask: int):
    """U(w, A) counted over steps >= 1: the exact rational sum of T^n(w, A),
    or None when the sum diverges.

    Divergence is structural (a recurrent state of A is reachable); the
    finite case solves the absorbing-chain system (I - Q) N = I over the
    transient states with exact Gaussian elimination.
    """
    require_valid(p)
    n = p.n_states
    reach = reach_in_one_or_more(p)
    rec = recurrent_state_mask(p)
    if reach[w] & mask & rec:
        return None
    transient = [s for s in range(n) if not (rec >> s) & 1]
    if not transient:
        return Fraction(0)
    idx = {s: i for i, s in enumerate(transient)}
    m = len(transient)
    # rows of (I - Q) augmented with the identity
    aug = [
        [
            (Fraction(1) if i == j else Fraction(0)) - p.kernel[transient[i]][transient[j]]
            for j in range(m)
        ]
        + [Fraction(1) if i == j else Fraction(0) for j in range(m)]
        for i in range(m)
    ]
    for col in range(m):
        pivot = next(r for r in range(col, m) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    visits = Fraction(0)
    for t in bits(mask):
        if t in idx:
            if w in idx:
                count = aug[idx[w]][m + idx[t]]  # visits at times >= 0
                visits += count - (Fraction(1) if w == t else Fraction(0))
            else:
                # recurrent start never leaves its closed class, so it never
                # meets a transient state
                pass
    return visits


def is_recurrent(p: DynamicMarkovProcess) -> bool:
    """Irreducible, and every accessible set has infinite expected visits from
    each of its own states, decided structurally through recurrent classes."""
    require_valid(p)
    if not is_irreducible(p):
        return False
    n = p.n_states
    reach = reach_in_one_or_more(p)
    rec = recurrent_state_mask(p)
    for a in range(1, 1 << n):
        accessible = all(reach[w] & a for w in range(n))
        if not accessible:
            continue
        for w in bits(a):
            if not (reach[w] & a & rec):
                return False
    return True
