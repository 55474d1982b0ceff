"""Finite measure-preserving systems with two commuting permutations.

A `FiniteMPS` is a weighted point set {0..n-1} together with two commuting,
weight-preserving permutations S and T, i.e. a measure-preserving Z^2 action
presented by its two generators.  Zero-weight points are stripped at
construction (measure preservation makes the zero set invariant), so weights
are always strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from random import Random
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .core import Partition, as_fraction, format_fraction


class InvalidSystemError(ValueError):
    """System data violates a construction invariant; the message names it."""


@dataclass(frozen=True)
class GroupElement:
    """An element S^i T^j of the acting group, written additively as (i, j)."""

    i: int
    j: int

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.i + other.i, self.j + other.j)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.i, -self.j)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.i - other.i, self.j - other.j)


S_GEN = GroupElement(1, 0)
T_GEN = GroupElement(0, 1)


def _check_permutation(perm: Sequence[int], n: int, name: str) -> Tuple[int, ...]:
    perm = tuple(perm)
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise InvalidSystemError(f"bad permutation: {name} is not a permutation of 0..{n - 1}")
    return perm


def _cycle_lengths(perm: Tuple[int, ...]) -> List[int]:
    seen = [False] * len(perm)
    out = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, x = 0, start
        while not seen[x]:
            seen[x] = True
            x = perm[x]
            length += 1
        out.append(length)
    return out


class FiniteMPS:
    """A finite system (X, mu, S, T) with S, T commuting and mu-preserving."""

    __slots__ = ("n", "weights", "S", "T", "_pow2", "_order", "_grid_cache")

    def __init__(self, weights: Sequence, S: Sequence[int], T: Sequence[int]):
        weights = [as_fraction(w) for w in weights]
        n = len(weights)
        S = _check_permutation(S, n, "S")
        T = _check_permutation(T, n, "T")
        if any(w < 0 for w in weights):
            raise InvalidSystemError("bad weights: negative entry")
        if sum(weights) != 1:
            raise InvalidSystemError(f"bad weights: total mass {sum(weights)} != 1")
        for x in range(n):
            if weights[S[x]] != weights[x]:
                raise InvalidSystemError(f"non-preserving: weight changes along S at point {x}")
            if weights[T[x]] != weights[x]:
                raise InvalidSystemError(f"non-preserving: weight changes along T at point {x}")
            if S[T[x]] != T[S[x]]:
                raise InvalidSystemError(f"non-commuting: S(T(x)) != T(S(x)) at point {x}")

        if any(w == 0 for w in weights):
            # The zero-weight set is S- and T-invariant, so restriction is sound.
            keep = [x for x in range(n) if weights[x] > 0]
            index = {x: k for k, x in enumerate(keep)}
            weights = [weights[x] for x in keep]
            S = tuple(index[S[x]] for x in keep)
            T = tuple(index[T[x]] for x in keep)
            n = len(keep)
        if n == 0:
            raise InvalidSystemError("bad weights: empty support")

        self.n = n
        self.weights = tuple(weights)
        self.S = S
        self.T = T
        self._pow2: Dict[str, List[Tuple[int, ...]]] = {}
        self._order: Dict[str, int] = {}
        self._grid_cache: Dict = {}

    # -- derived data ------------------------------------------------------

    def order_s(self) -> int:
        """lcm of the S-cycle lengths (the order of S as a permutation)."""
        if "S" not in self._order:
            self._order["S"] = math.lcm(*_cycle_lengths(self.S))
        return self._order["S"]

    def order_t(self) -> int:
        if "T" not in self._order:
            self._order["T"] = math.lcm(*_cycle_lengths(self.T))
        return self._order["T"]

    def _tables(self, which: str) -> List[Tuple[int, ...]]:
        """Cached repeated-squaring tables: which^(2^k) for 2^k below its order."""
        if which not in self._pow2:
            base = self.S if which == "S" else self.T
            order = self.order_s() if which == "S" else self.order_t()
            tables = [base]
            k = 1
            while (1 << k) < order:
                prev = tables[-1]
                tables.append(tuple(prev[prev[x]] for x in range(self.n)))
                k += 1
            self._pow2[which] = tables
        return self._pow2[which]

    def _apply_power(self, which: str, e: int, x: int) -> int:
        order = self.order_s() if which == "S" else self.order_t()
        e %= order
        tables = self._tables(which)
        k = 0
        while e:
            if e & 1:
                x = tables[k][x]
            e >>= 1
            k += 1
        return x

    def apply(self, g: GroupElement, x: int) -> int:
        """Apply S^i T^j to a point, in O(log|i| + log|j|) table lookups."""
        return self._apply_power("S", g.i, self._apply_power("T", g.j, x))

    def group_perm(self, g: GroupElement) -> Tuple[int, ...]:
        """The permutation S^i T^j as an index map."""
        return tuple(self.apply(g, x) for x in range(self.n))

    def cycle_length(self, g: GroupElement, x: int) -> int:
        """Least a > 0 with (S^i T^j)^a x = x; constant along commuting orbits."""
        y = self.apply(g, x)
        length = 1
        while y != x:
            y = self.apply(g, y)
            length += 1
        return length

    def __eq__(self, other):
        return (
            isinstance(other, FiniteMPS)
            and self.weights == other.weights
            and self.S == other.S
            and self.T == other.T
        )

    def __repr__(self):
        return f"FiniteMPS(n={self.n})"


def apply_group(sys: FiniteMPS, g: GroupElement, x: int) -> int:
    return sys.apply(g, x)


def invariant_partition(sys: FiniteMPS, gens: Iterable[GroupElement]) -> Partition:
    """Orbit partition of the subgroup generated by `gens` (union-find).

    Since generators are permutations of a finite set, closing under the
    forward maps alone already yields the full orbit relation.
    """
    parent = list(range(sys.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        perm = sys.group_perm(g)
        for x in range(sys.n):
            rx, ry = find(x), find(perm[x])
            if rx != ry:
                parent[ry] = rx
    return Partition.from_labels([find(x) for x in range(sys.n)])


def partition_s(sys: FiniteMPS) -> Partition:
    """Partition into S-orbits; its saturated sets are the S-invariant sets."""
    return invariant_partition(sys, [S_GEN])


def partition_t(sys: FiniteMPS) -> Partition:
    return invariant_partition(sys, [T_GEN])


def is_ergodic(sys: FiniteMPS) -> bool:
    """True iff the two-generator action is transitive on the support."""
    return invariant_partition(sys, [S_GEN, T_GEN]).num_blocks == 1


class FreenessResult(NamedTuple):
    free: bool
    witness: Optional[Tuple[int, int]]  # (i, j) with S^i T^j = identity when not free


def is_free(sys: FiniteMPS) -> FreenessResult:
    """Exhaustive freeness check over the fundamental window.

    The action is called free when S^i T^j is the identity only for
    (i, j) = (0, 0) with 0 <= i < ord(S), 0 <= j < ord(T); permutation powers
    are periodic with exactly these periods, so checking the window decides
    every (i, j) with (i mod ord S, j mod ord T) != (0, 0).  A trivial
    generator (ord = 1) is a degenerate failure witnessed by (1,0) or (0,1).
    """
    if sys.order_s() == 1:
        return FreenessResult(False, (1, 0))
    if sys.order_t() == 1:
        return FreenessResult(False, (0, 1))
    identity = tuple(range(sys.n))
    # S^i T^j = id  iff  T^j = S^{-i}; index the T-powers once.
    t_powers: Dict[Tuple[int, ...], int] = {}
    perm = identity
    for j in range(sys.order_t()):
        t_powers.setdefault(perm, j)
        perm = tuple(sys.T[x] for x in perm)
    perm = identity
    s_inv = [0] * sys.n
    for x in range(sys.n):
        s_inv[sys.S[x]] = x
    for i in range(sys.order_s()):
        j = t_powers.get(perm)
        if j is not None and (i, j) != (0, 0):
            return FreenessResult(False, (i, j))
        perm = tuple(s_inv[x] for x in perm)  # now perm = S^{-(i+1)}
    return FreenessResult(True, None)


@dataclass(frozen=True)
class ErgodicComponent:
    """One transitivity class of the action, with its conditional measure."""

    support: Tuple[int, ...]
    weights: Tuple[Fraction, ...]  # conditional probabilities on the support
    mass: Fraction

    def subsystem(self, sys: FiniteMPS) -> "FiniteMPS":
        """The component as a system in its own right (indices = support order)."""
        index = {x: k for k, x in enumerate(self.support)}
        return FiniteMPS(
            self.weights,
            [index[sys.S[x]] for x in self.support],
            [index[sys.T[x]] for x in self.support],
        )


def ergodic_decomposition(sys: FiniteMPS) -> List[ErgodicComponent]:
    """Decompose into orbit closures of the two-generator action.

    Components are returned in order of their smallest point; masses sum to 1
    and mass-weighted conditional measures reassemble the original weights.
    """
    part = invariant_partition(sys, [S_GEN, T_GEN])
    out = []
    for block in part.blocks():
        mass = sum((sys.weights[x] for x in block), Fraction(0))
        out.append(
            ErgodicComponent(
                support=tuple(block),
                weights=tuple(sys.weights[x] / mass for x in block),
                mass=mass,
            )
        )
    return out


# -- serialization ---------------------------------------------------------


class SystemFormatError(ValueError):
    """A system document is malformed; the message names the violated field."""


def system_to_dict(sys: FiniteMPS) -> dict:
    return {
        "n": sys.n,
        "weights": [format_fraction(w) for w in sys.weights],
        "S": list(sys.S),
        "T": list(sys.T),
    }


def system_from_dict(doc: dict) -> FiniteMPS:
    for key in ("n", "weights", "S", "T"):
        if key not in doc:
            raise SystemFormatError(f"missing field: {key}")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise SystemFormatError("n: expected a positive integer")
    if len(doc["weights"]) != n:
        raise SystemFormatError(f"weights: expected {n} entries, got {len(doc['weights'])}")
    try:
        weights = [Fraction(str(w)) for w in doc["weights"]]
    except (ValueError, ZeroDivisionError) as exc:
        raise SystemFormatError(f"weights: not a p/q rational ({exc})") from exc
    for name in ("S", "T"):
        if len(doc[name]) != n or any(not isinstance(v, int) for v in doc[name]):
            raise SystemFormatError(f"{name}: expected {n} integer entries")
    try:
        return FiniteMPS(weights, doc["S"], doc["T"])
    except InvalidSystemError as exc:
        raise SystemFormatError(str(exc)) from exc


# -- stock systems and seeded generators ------------------------------------


def translation_system(
    a: int, b: int, s: Tuple[int, int], t: Tuple[int, int], weights=None
) -> FiniteMPS:
    """Z_a x Z_b with S = +s and T = +t (all translations commute).

    Points are indexed row-major: (u, v) -> u*b + v.
    """
    n = a * b
    if weights is None:
        weights = [Fraction(1, n)] * n

    def shift(d):
        du, dv = d
        return [((u + du) % a) * b + ((v + dv) % b) for u in range(a) for v in range(b)]

    return FiniteMPS(weights, shift(s), shift(t))


def z4_diagonal() -> FiniteMPS:
    """Z_4 with S = T = +1 — the smallest interesting non-magic system."""
    return translation_system(4, 1, (1, 0), (1, 0))


def product_grid(a: int = 2, b: int = 3) -> FiniteMPS:
    """Z_a x Z_b with S moving only the first coordinate and T only the second."""
    return translation_system(a, b, (1, 0), (0, 1))


def diagonal_grid(a: int = 2, b: int = 3) -> FiniteMPS:
    """Z_a x Z_b with S = +(1,1) and T = +(0,1): ergodic but not free."""
    return translation_system(a, b, (1, 1), (0, 1))


def product_system(first: FiniteMPS, second: FiniteMPS) -> FiniteMPS:
    """Direct product: S and T act coordinate-wise, weights multiply.

    Points are indexed row-major: (x, y) -> x*second.n + y.
    """
    m = second.n
    n = first.n * m
    weights = [Fraction(0)] * n
    S = [0] * n
    T = [0] * n
    for x in range(first.n):
        for y in range(m):
            weights[x * m + y] = first.weights[x] * second.weights[y]
            S[x * m + y] = first.S[x] * m + second.S[y]
            T[x * m + y] = first.T[x] * m + second.T[y]
    return FiniteMPS(weights, S, T)


def _random_masses(rng: Random, k: int) -> List[Fraction]:
    parts = [rng.randint(1, 5) for _ in range(k)]
    total = sum(parts)
    return [Fraction(p, total) for p in parts]


def random_system(rng: Random, max_order: int = 4, max_components: int = 2) -> FiniteMPS:
    """A seeded union of translation systems with orbit-wise re-weighting.

    Weights must be constant on orbits of the action to be preserved; the
    generator re-weights exactly at that granularity, so the family covers
    non-uniform and non-ergodic systems.
    """
    k = rng.randint(1, max_components)
    pieces = []
    for _ in range(k):
        a, b = rng.randint(1, max_order), rng.randint(1, max_order)
        s = (rng.randrange(a), rng.randrange(b))
        t = (rng.randrange(a), rng.randrange(b))
        pieces.append(translation_system(a, b, s, t))
    sizes = [p.n for p in pieces]
    offset = [0]
    for size in sizes:
        offset.append(offset[-1] + size)
    n = offset[-1]
    S = [0] * n
    T = [0] * n
    for p, off in zip(pieces, offset):
        for x in range(p.n):
            S[off + x] = off + p.S[x]
            T[off + x] = off + p.T[x]
    # Re-weight across the orbits of the glued action.
    glued = FiniteMPS([Fraction(1, n)] * n, S, T)
    orbits = invariant_partition(glued, [S_GEN, T_GEN]).blocks()
    masses = _random_masses(rng, len(orbits))
    weights = [Fraction(0)] * n
    for orbit, mass in zip(orbits, masses):
        for x in orbit:
            weights[x] = mass / len(orbit)
    return FiniteMPS(weights, S, T)


def random_ergodic_system(rng: Random, max_order: int = 4) -> FiniteMPS:
    """A seeded transitive translation system with S != id and T != id."""
    while True:
        a, b = rng.randint(1, max_order), rng.randint(1, max_order)
        if a * b < 2:
            continue
        s = (rng.randrange(a), rng.randrange(b))
        t = (rng.randrange(a), rng.randrange(b))
        if s == (0, 0) or t == (0, 0):
            continue
        sys = translation_system(a, b, s, t)
        if is_ergodic(sys):
            return sys


def random_product_system(rng: Random, max_order: int = 4) -> FiniteMPS:
    """A seeded product system (rotation x rotation), randomly relabeled.

    These are ergodic, free, and carry the product structure that makes the
    invariant-algebra decomposition split cleanly, so they serve as stock
    "nice" systems in sweeps.
    """
    a, b = rng.randint(2, max_order), rng.randint(2, max_order)
    base = product_grid(a, b)
    relabel = list(range(base.n))
    rng.shuffle(relabel)
    inverse = [0] * base.n
    for x, y in enumerate(relabel):
        inverse[y] = x
    weights = [base.weights[inverse[y]] for y in range(base.n)]
    S = [relabel[base.S[inverse[y]]] for y in range(base.n)]
    T = [relabel[base.T[inverse[y]]] for y in range(base.n)]
    return FiniteMPS(weights, S, T)
