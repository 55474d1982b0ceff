"""Spaces of orbit quadruples and pairs, and the group that moves them.

The quadruple space of a system collects every pattern
(x, S^i x, T^j x, S^i T^j x); it carries an action by four commuting
permutations (advance each side, or both diagonals).  The module also
provides the one-dimensional pair analogue, the identification of a
product system's quadruple space with a product of pair spaces, and an
empirical engine that measures how fast box averages of point masses
approach a reference measure under any commuting tuple of permutations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Sequence, Tuple, Union

from .core import DimensionError, PreconditionError, SparseMeasure
from .finite import FiniteMPS, GroupElement, S_GEN, T_GEN, is_ergodic, product_system
from .joinings import S_STAR, T_STAR, apply_rule, diagonal_rule, host_measure, rel_indep_square
from .averaging import ConvergenceReport, ReportRow, window_counts

_ID = GroupElement(0, 0)


class CubeTransform(NamedTuple):
    """A named coordinate rule: coordinate k of a tuple advances by rule[k]."""

    name: str
    rule: Tuple[GroupElement, ...]


@dataclass(frozen=True)
class ActionSpace:
    """A finite set of orbit tuples, closed under named coordinate transforms."""

    base: FiniteMPS
    points: Tuple[Tuple[int, ...], ...]
    transforms: Tuple[CubeTransform, ...]
    index_of: Dict[Tuple[int, ...], int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise ValueError("duplicate tuples in action space")
        arity = len(self.points[0]) if self.points else 0
        for t in self.transforms:
            if len(t.rule) != arity:
                raise DimensionError(f"transform {t.name} has arity {len(t.rule)}, points have {arity}")
        object.__setattr__(self, "index_of", {p: k for k, p in enumerate(self.points)})

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def arity(self) -> int:
        return len(self.points[0])

    def apply(self, name: str, point: Tuple[int, ...]) -> Tuple[int, ...]:
        for t in self.transforms:
            if t.name == name:
                image = apply_rule(self.base, t.rule, point)
                if image not in self.index_of:
                    raise ValueError(f"transform {name} leaves the space at {point}")
                return image
        raise ValueError(f"unknown transform: {name!r}")

    def transform_permutations(self) -> List[Tuple[int, ...]]:
        """Each transform as a permutation of point indices (they commute)."""
        perms = []
        for t in self.transforms:
            perm = [0] * self.size
            for k, p in enumerate(self.points):
                image = apply_rule(self.base, t.rule, p)
                target = self.index_of.get(image)
                if target is None:
                    raise ValueError(f"transform {t.name} leaves the space at {p}")
                perm[k] = target
            perms.append(tuple(perm))
        return perms

    def orbits(self) -> List[Tuple[int, ...]]:
        """Orbits of the transform group on point indices, by first occurrence."""
        perms = self.transform_permutations()
        seen = [False] * self.size
        out = []
        for start in range(self.size):
            if seen[start]:
                continue
            stack, orbit = [start], []
            seen[start] = True
            while stack:
                cur = stack.pop()
                orbit.append(cur)
                for perm in perms:
                    nxt = perm[cur]
                    if not seen[nxt]:
                        seen[nxt] = True
                        stack.append(nxt)
            out.append(tuple(sorted(orbit)))
        return out

    def is_transitive(self) -> bool:
        return len(self.orbits()) == 1

    def uniform_measure(self) -> SparseMeasure:
        """Uniform probability on point indices: the only candidate invariant
        measure when the transform group is transitive."""
        mass = Fraction(1, self.size)
        return SparseMeasure(arity=1, n=self.size, entries={(k,): mass for k in range(self.size)})


def cube_space(sys: FiniteMPS) -> ActionSpace:
    """All quadruples (x, S^i x, T^j x, S^i T^j x), with the four-transform action.

    Exponents only matter modulo the cycle lengths of S and T on the orbit of
    x, so ranging i < a_x and j < b_x enumerates everything.
    """
    quads = set()
    for x in range(sys.n):
        a = sys.cycle_length(S_GEN, x)
        b = sys.cycle_length(T_GEN, x)
        sx = x
        for _ in range(a):
            row_t, row_st = x, sx
            for _ in range(b):
                quads.add((x, sx, row_t, row_st))
                row_t, row_st = sys.T[row_t], sys.T[row_st]
            sx = sys.S[sx]
    transforms = (
        CubeTransform("side_s", S_STAR),
        CubeTransform("side_t", T_STAR),
        CubeTransform("diag_s", diagonal_rule(S_GEN)),
        CubeTransform("diag_t", diagonal_rule(T_GEN)),
    )
    return ActionSpace(base=sys, points=tuple(sorted(quads)), transforms=transforms)


def two_sided_cube(sys: FiniteMPS, g: GroupElement) -> ActionSpace:
    """All pairs (x, g^i x), with one side transform and both diagonals."""
    pairs = set()
    for x in range(sys.n):
        y = x
        for _ in range(sys.cycle_length(g, x)):
            pairs.add((x, y))
            y = sys.apply(g, y)
    transforms = (
        CubeTransform("side", (_ID, g)),
        CubeTransform("diag_s", (S_GEN, S_GEN)),
        CubeTransform("diag_t", (T_GEN, T_GEN)),
    )
    return ActionSpace(base=sys, points=tuple(sorted(pairs)), transforms=transforms)


PairKey = Tuple[Tuple[int, int], Tuple[int, int]]


@dataclass(frozen=True)
class ProductCubeReport:
    """Outcome of identifying a product system's quadruple space with the
    product of its factors' pair spaces."""

    product: FiniteMPS
    cube_size: int
    first_pair_size: int
    second_pair_size: int
    bijective: bool
    intertwines: bool          # each cube transform matches a factor-pair transform
    measure_matches: bool      # pushforward of the quadruple measure is the product

    @property
    def identified(self) -> bool:
        return self.bijective and self.intertwines and self.measure_matches


def _transpose(sys: FiniteMPS) -> FiniteMPS:
    return FiniteMPS(list(sys.weights), list(sys.T), list(sys.S))


def product_cube_identification(first: FiniteMPS, second: FiniteMPS) -> ProductCubeReport:
    """Identify Q(first x second) with pairs(first) x pairs(second).

    Requires `first` to move only under S (its T is the identity), `second`
    only under T, and both to be ergodic.  The map sends the quadruple of
    product points with base (y, w), offsets (i, j) to ((y, S^i y), (w, T^j w));
    the check confirms it is a bijection, that the four quadruple transforms
    act as side/diagonal moves on the factor pairs, and that the quadruple
    measure pushes forward to the product of the two pair measures.
    """
    if any(second_gen != k for k, second_gen in enumerate(first.T)):
        raise PreconditionError("first factor must have T = identity")
    if any(first_gen != k for k, first_gen in enumerate(second.S)):
        raise PreconditionError("second factor must have S = identity")
    if not is_ergodic(first):
        raise PreconditionError("first factor must be ergodic")
    if not is_ergodic(second):
        raise PreconditionError("second factor must be ergodic")
    prod = product_system(first, second)
    space = cube_space(prod)
    m = second.n

    def split(p: int) -> Tuple[int, int]:
        return divmod(p, m)

    def phi(quad: Tuple[int, ...]) -> PairKey:
        y0, w0 = split(quad[0])
        y1, w1 = split(quad[1])
        y2, w2 = split(quad[2])
        y3, w3 = split(quad[3])
        if (w1, y2, y3, w3) != (w0, y0, y1, w2):
            raise ValueError(f"quadruple {quad} lacks product structure")
        return ((y0, y1), (w0, w2))

    y_pairs = two_sided_cube(first, S_GEN)
    w_pairs = two_sided_cube(second, T_GEN)
    images = {}
    bijective = True
    for quad in space.points:
        key = phi(quad)
        if key in images or key[0] not in y_pairs.index_of or key[1] not in w_pairs.index_of:
            bijective = False
            break
        images[quad] = key
    expected = y_pairs.size * w_pairs.size
    bijective = bijective and len(images) == space.size == expected

    # side_s on quadruples should advance the first factor's pair side, etc.
    pair_moves = {
        "side_s": (("side",), ()),
        "side_t": ((), ("side",)),
        "diag_s": (("diag_s",), ()),
        "diag_t": ((), ("diag_t",)),
    }
    intertwines = bijective
    if intertwines:
        for t in space.transforms:
            y_moves, w_moves = pair_moves[t.name]
            for quad in space.points:
                moved = apply_rule(prod, t.rule, quad)
                y_key, w_key = images[quad]
                for name in y_moves:
                    y_key = y_pairs.apply(name, y_key)
                for name in w_moves:
                    w_key = w_pairs.apply(name, w_key)
                if images[moved] != (y_key, w_key):
                    intertwines = False
                    break
            if not intertwines:
                break

    measure_matches = False
    if bijective:
        pushed: Dict[PairKey, Fraction] = {}
        for quad, mass in host_measure(prod).mu_st.entries.items():
            key = images[quad]
            pushed[key] = pushed.get(key, Fraction(0)) + mass
        y_measure = rel_indep_square(first)
        w_measure = rel_indep_square(_transpose(second))
        tensor = {
            (yp, wp): y_mass * w_mass
            for yp, y_mass in y_measure.entries.items()
            for wp, w_mass in w_measure.entries.items()
        }
        measure_matches = pushed == tensor

    return ProductCubeReport(
        product=prod,
        cube_size=space.size,
        first_pair_size=y_pairs.size,
        second_pair_size=w_pairs.size,
        bijective=bijective,
        intertwines=intertwines,
        measure_matches=measure_matches,
    )


def _check_commuting_perms(perms: Sequence[Tuple[int, ...]], m: int):
    for k, perm in enumerate(perms):
        if sorted(perm) != list(range(m)):
            raise ValueError(f"generator {k} is not a permutation of 0..{m - 1}")
    for a in range(len(perms)):
        for b in range(a + 1, len(perms)):
            pa, pb = perms[a], perms[b]
            if any(pa[pb[x]] != pb[pa[x]] for x in range(m)):
                raise ValueError(f"generators {a} and {b} do not commute")


def _perm_cycle_length(perm: Tuple[int, ...], x: int) -> int:
    length, cur = 1, perm[x]
    while cur != x:
        cur = perm[cur]
        length += 1
    return length


def empirical_unique_ergodicity(
    perms: Sequence[Tuple[int, ...]],
    reference: SparseMeasure,
    starts: Union[str, Sequence[int]],
    schedule: Sequence[int],
) -> ConvergenceReport:
    """Deviation of box-averaged point masses from a reference measure.

    For each start x and window size N the empirical measure puts mass
    1/N^d on g_1^{i_1} ... g_d^{i_d} x for every exponent tuple in [0, N)^d;
    the reported value is the worst (over starts) total-variation distance to
    the reference.  Everything is exact: the orbit point depends only on the
    exponents modulo the generator cycle lengths, which are constant along a
    joint orbit because the generators commute.
    """
    if reference.arity != 1:
        raise DimensionError(f"reference must have arity 1, got {reference.arity}")
    m = reference.n
    if not perms:
        raise ValueError("need at least one generator")
    perms = [tuple(p) for p in perms]
    _check_commuting_perms(perms, m)
    if isinstance(starts, str):
        if starts != "all":
            raise ValueError(f"starts must be 'all' or a list of points, got {starts!r}")
        start_list = list(range(m))
    else:
        start_list = list(starts)
        for x in start_list:
            if not (0 <= x < m):
                raise DimensionError(f"start point {x} outside 0..{m - 1}")
    if not start_list:
        raise ValueError("need at least one start point")
    if not schedule or any(n < 1 for n in schedule):
        raise ValueError("schedule must be a nonempty list of positive window sizes")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")

    d = len(perms)
    # Residue boxes per start: the orbit point for each residue tuple, computed once.
    boxes = []
    for x in start_list:
        lengths = [_perm_cycle_length(p, x) for p in perms]
        cells = [(x, ())]
        for perm, length in zip(perms, lengths):
            grown = []
            for point, residues in cells:
                cur = point
                for r in range(length):
                    grown.append((cur, residues + (r,)))
                    cur = perm[cur]
            cells = grown
        boxes.append((lengths, cells))

    rows = []
    for N in schedule:
        worst = Fraction(0)
        denom = Fraction(N) ** d
        for x, (lengths, cells) in zip(start_list, boxes):
            counts = [window_counts(N, length) for length in lengths]
            hits: Dict[int, int] = {}
            for point, residues in cells:
                weight = 1
                for c, r in zip(counts, residues):
                    weight *= c[r]
                if weight:
                    hits[point] = hits.get(point, 0) + weight
            keys = set(hits)
            keys.update(p for (p,) in reference.entries)
            deviation = sum(
                (abs(Fraction(hits.get(p, 0)) / denom - reference.entries.get((p,), Fraction(0))) for p in keys),
                Fraction(0),
            ) / 2
            if deviation > worst:
                worst = deviation
        rows.append(ReportRow(N=N, value=worst, reference=Fraction(0), abs_error=worst))
    return ConvergenceReport(
        rows=tuple(rows),
        metadata={"kind": "empirical_unique_ergodicity", "points": m, "generators": d, "starts": len(start_list)},
    )
