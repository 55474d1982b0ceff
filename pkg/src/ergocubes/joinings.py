"""Self-joinings of a finite system along its invariant algebras.

The central objects: the relative independent square of mu over the algebra
of S-invariant sets, the four-fold measure obtained by repeating that
construction over the (T x T)-invariant algebra, the quartic seminorm that
measure induces, and the extension-by-components construction that turns any
ergodic system into one where the seminorm characterizes conditional
expectation on the joint invariant algebra ("magic" systems).

On finite systems invariant algebras are orbit partitions and conditional
expectations are block averages, so every identity here is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Tuple

from .core import (
    Observable,
    Partition,
    PreconditionError,
    SparseMeasure,
    common_refinement,
    integrate,
)
from .finite import (
    ErgodicComponent,
    FiniteMPS,
    GroupElement,
    ergodic_decomposition,
    is_ergodic,
    is_free,
    partition_s,
    partition_t,
)
from .linalg import exact_null_space

Quad = Tuple[int, int, int, int]

# Coordinate-wise transformation rules on quadruples: entry k is the group
# element applied to coordinate k.  These are the maps the four-fold measure
# is invariant under.
_ID = GroupElement(0, 0)
_S = GroupElement(1, 0)
_T = GroupElement(0, 1)
S_STAR: Tuple[GroupElement, ...] = (_ID, _S, _ID, _S)
T_STAR: Tuple[GroupElement, ...] = (_ID, _ID, _T, _T)


def diagonal_rule(g: GroupElement) -> Tuple[GroupElement, ...]:
    return (g, g, g, g)


def apply_rule(sys: FiniteMPS, rule: Tuple[GroupElement, ...], point: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(sys.apply(g, x) for g, x in zip(rule, point))


def cond_exp(sys: FiniteMPS, f: Observable, part: Partition) -> Observable:
    """Conditional expectation onto a partition: the weighted block average."""
    if f.n != sys.n or part.n != sys.n:
        raise PreconditionError(f"size mismatch: system {sys.n}, observable {f.n}, partition {part.n}")
    num = [Fraction(0)] * part.num_blocks
    den = [Fraction(0)] * part.num_blocks
    for x in range(sys.n):
        b = part.block_of[x]
        num[b] += sys.weights[x] * f.values[x]
        den[b] += sys.weights[x]
    per_block = [num[b] / den[b] for b in range(part.num_blocks)]
    return Observable(tuple(per_block[part.block_of[x]] for x in range(sys.n)))


def invariant_w(sys: FiniteMPS) -> Partition:
    """The joint invariant partition W: common refinement of the S- and T-orbits."""
    return common_refinement(partition_s(sys), partition_t(sys))


def rel_indep_square(sys: FiniteMPS) -> SparseMeasure:
    """Relative independent square of mu over the S-invariant algebra.

    Supported on pairs within a common S-orbit B, with weight
    w(x0) w(x1) / w(B); its defining property
    integral of f0 x f1 = integral of E(f0|I_S) E(f1|I_S) d mu
    is asserted in tests.
    """
    part = partition_s(sys)
    block_mass = [Fraction(0)] * part.num_blocks
    for x in range(sys.n):
        block_mass[part.block_of[x]] += sys.weights[x]
    entries: Dict[Tuple[int, ...], Fraction] = {}
    for block in part.blocks():
        mass = block_mass[part.block_of[block[0]]]
        for x0 in block:
            for x1 in block:
                entries[(x0, x1)] = sys.weights[x0] * sys.weights[x1] / mass
    return SparseMeasure(2, sys.n, entries)


@dataclass(frozen=True)
class HostMeasure:
    """The four-fold joining mu_{S,T} with its supporting structure.

    `pairs` lists the support of mu_S; `pair_block_of` labels each pair with
    its (T x T)-orbit, and `block_mass` gives the mu_S-mass of each orbit.
    Those three fields are exactly what the seminorm and magic test need, so
    they are kept rather than recomputed.
    """

    base: FiniteMPS
    mu_s: SparseMeasure
    mu_st: SparseMeasure
    pairs: Tuple[Tuple[int, int], ...]
    pair_block_of: Dict[Tuple[int, int], int]
    block_mass: Tuple[Fraction, ...]


def host_measure(sys: FiniteMPS) -> HostMeasure:
    """Relative independent square of mu_S over the (T x T)-invariant algebra.

    mu_{S,T}((a,b),(c,d)) = mu_S(a,b) mu_S(c,d) / mu_S(C) for pairs (a,b) and
    (c,d) in a common (T x T)-orbit C on the support of mu_S.
    """
    mu_s = rel_indep_square(sys)
    pairs = tuple(mu_s.support())
    pair_block_of: Dict[Tuple[int, int], int] = {}
    block_mass: List[Fraction] = []
    blocks: List[List[Tuple[int, int]]] = []
    for pair in pairs:
        if pair in pair_block_of:
            continue
        block_id = len(blocks)
        orbit = []
        cur = pair
        while cur not in pair_block_of:
            pair_block_of[cur] = block_id
            orbit.append(cur)
            cur = (sys.T[cur[0]], sys.T[cur[1]])
        blocks.append(orbit)
        block_mass.append(sum((mu_s.entries[p] for p in orbit), Fraction(0)))
    entries: Dict[Tuple[int, ...], Fraction] = {}
    for orbit, mass in zip(blocks, block_mass):
        for p in orbit:
            wp = mu_s.entries[p]
            for q in orbit:
                entries[p + q] = wp * mu_s.entries[q] / mass
    return HostMeasure(
        base=sys,
        mu_s=mu_s,
        mu_st=SparseMeasure(4, sys.n, entries),
        pairs=pairs,
        pair_block_of=pair_block_of,
        block_mass=tuple(block_mass),
    )


class SeminormValue(NamedTuple):
    fourth_power: Fraction  # exact
    fourth_root: float      # diagnostic only

    @staticmethod
    def of(fourth_power: Fraction) -> "SeminormValue":
        return SeminormValue(fourth_power, float(fourth_power) ** 0.25)


def host_seminorm(hm: HostMeasure, f: Observable) -> SeminormValue:
    """|||f|||^4 = integral of f x f x f x f against mu_{S,T} (exact)."""
    return SeminormValue.of(integrate(hm.mu_st, (f, f, f, f)))


def _mean_zero_basis(sys: FiniteMPS, part: Partition) -> List[Observable]:
    """Basis of {f : E(f|part) = 0}: weight-normalized indicator differences.

    Within a block, e_x / w(x) - e_y / w(y) has zero block average for any
    weights; plain differences would only work in the uniform case.
    """
    basis = []
    for block in part.blocks():
        anchor = block[0]
        for x in block[1:]:
            vals = [Fraction(0)] * sys.n
            vals[x] = 1 / sys.weights[x]
            vals[anchor] = -1 / sys.weights[anchor]
            basis.append(Observable(tuple(vals)))
    return basis


def seminorm_kernel_basis(hm: HostMeasure) -> List[Observable]:
    """Exact basis of {f : |||f||| = 0}.

    The kernel is the null space of the linear slice map
    f -> (sum_x f(x) mu_{S,T}(x, y1, y2, y3)) indexed by (y1, y2, y3):
    membership makes the defining integral vanish by expanding the last three
    slots, and the reverse containment is the quartic Cauchy-Schwarz
    inequality applied with indicators (tested separately).
    """
    n = hm.base.n
    row_map: Dict[Tuple[int, int, int], List[Fraction]] = {}
    for quad, w in hm.mu_st.entries.items():
        key = quad[1:]
        row = row_map.get(key)
        if row is None:
            row = [Fraction(0)] * n
            row_map[key] = row
        row[quad[0]] += w
    rows = [row_map[k] for k in sorted(row_map)]
    return [Observable(vec) for vec in exact_null_space(rows, n)]


@dataclass(frozen=True)
class MagicReport:
    is_magic: bool
    counterexample: Optional[Observable]
    direction: Optional[str]
    seminorm_kernel_dim: int
    mean_zero_dim: int


def is_magic(sys: FiniteMPS) -> MagicReport:
    """Decide whether |||f||| = 0 exactly characterizes E(f|W) = 0.

    Both directions are checked on finite bases: the mean-zero space is
    spanned by per-block indicator differences, and vanishing of a seminorm
    is a subspace condition, so basis checks decide the inclusions.
    """
    hm = host_measure(sys)
    w_part = invariant_w(sys)
    mean_zero = _mean_zero_basis(sys, w_part)
    kernel = seminorm_kernel_basis(hm)
    verdict = True
    counterexample = None
    direction = None
    for g in mean_zero:
        if host_seminorm(hm, g).fourth_power != 0:
            verdict, counterexample = False, g
            direction = "mean-zero observable with positive seminorm"
            break
    if verdict:
        for h in kernel:
            if any(v != 0 for v in cond_exp(sys, h, w_part).values):
                verdict, counterexample = False, h
                direction = "seminorm-kernel observable with nonzero conditional expectation"
                break
    return MagicReport(
        is_magic=verdict,
        counterexample=counterexample,
        direction=direction,
        seminorm_kernel_dim=len(kernel),
        mean_zero_dim=len(mean_zero),
    )


class ExtensionConstructionError(RuntimeError):
    """No component of the four-fold system passed the required checks.

    This should never fire on a valid ergodic input; if it does, the
    per-component reasons carried in the message are the bug report.
    """


@dataclass(frozen=True)
class ComponentSummary:
    size: int
    mass: Fraction
    magic: Optional[bool]       # None when selection stopped before evaluating
    free: Optional[bool]
    selected: bool
    rejection: Optional[str]


@dataclass(frozen=True)
class MagicExtension:
    base: FiniteMPS
    system: FiniteMPS                       # the selected component
    quadruples: Tuple[Quad, ...]            # extension point k sits over quadruples[k]
    factor: Tuple[int, ...]                 # factor map pi = last coordinate
    mass: Fraction                          # mass of the component inside mu_{S,T}
    components: Tuple[ComponentSummary, ...]


def magic_extension(sys: FiniteMPS) -> MagicExtension:
    """Build a magic, ergodic extension of an ergodic system.

    The four-fold measure with the coordinate maps (S*, T*) = (id x S x id x S,
    id x id x T x T) is an extension of the base via the last coordinate;
    decomposing it into components of the (S*, T*) action and selecting a
    component that is magic (and free, whenever the base has nontrivial S and
    T) yields the required system.  Components are tried by decreasing mass,
    ties broken by lexicographically smallest support.
    """
    if not is_ergodic(sys):
        raise PreconditionError("magic_extension requires an ergodic base system")
    hm = host_measure(sys)
    quads: List[Quad] = sorted(hm.mu_st.entries)
    index = {q: k for k, q in enumerate(quads)}
    weights = [hm.mu_st.entries[q] for q in quads]
    s_perm = [index[apply_rule(sys, S_STAR, q)] for q in quads]
    t_perm = [index[apply_rule(sys, T_STAR, q)] for q in quads]
    big = FiniteMPS(weights, s_perm, t_perm)

    identity = tuple(range(sys.n))
    freeness_required = sys.S != identity and sys.T != identity

    components = ergodic_decomposition(big)
    order = sorted(range(len(components)), key=lambda k: (-components[k].mass, components[k].support))
    summaries: List[Optional[ComponentSummary]] = [None] * len(components)
    chosen: Optional[Tuple[int, FiniteMPS]] = None
    for k in order:
        comp = components[k]
        if chosen is not None:
            summaries[k] = ComponentSummary(len(comp.support), comp.mass, None, None, False, "not evaluated")
            continue
        sub = comp.subsystem(big)
        magic_report = is_magic(sub)
        free_result = is_free(sub)
        ok = magic_report.is_magic and (free_result.free or not freeness_required)
        if ok:
            chosen = (k, sub)
            summaries[k] = ComponentSummary(len(comp.support), comp.mass, magic_report.is_magic, free_result.free, True, None)
        else:
            reasons = []
            if not magic_report.is_magic:
                reasons.append("not magic")
            if freeness_required and not free_result.free:
                reasons.append(f"not free (witness {free_result.witness})")
            summaries[k] = ComponentSummary(
                len(comp.support), comp.mass, magic_report.is_magic, free_result.free, False, ", ".join(reasons)
            )
    if chosen is None:
        lines = [
            f"component size={s.size} mass={s.mass}: {s.rejection}"
            for s in summaries
            if s is not None
        ]
        raise ExtensionConstructionError(
            "no component is simultaneously magic and free; a valid component "
            "should always exist for an ergodic base -- details: " + "; ".join(lines)
        )
    k, sub = chosen
    comp = components[k]
    comp_quads = tuple(quads[x] for x in comp.support)
    return MagicExtension(
        base=sys,
        system=sub,
        quadruples=comp_quads,
        factor=tuple(q[3] for q in comp_quads),
        mass=comp.mass,
        components=tuple(s for s in summaries if s is not None),
    )


def measurability_check(sys: FiniteMPS) -> bool:
    """Verify E(f0 x f1 | I_{TxT}) = E(E(f0|W) x E(f1|W) | I_{TxT}) exactly.

    Checking the identity for all pairs of indicator observables (a spanning
    family, by bilinearity) is the same as checking, per (T x T)-orbit C, that
    spreading mu_S|_C over W-block products leaves it fixed; the latter is a
    single exact measure comparison per orbit.
    """
    hm = host_measure(sys)
    w_part = invariant_w(sys)
    w_blocks = w_part.blocks()
    w_mass = [sum((sys.weights[x] for x in block), Fraction(0)) for block in w_blocks]
    orbits: Dict[int, List[Tuple[int, int]]] = {}
    for pair, block_id in hm.pair_block_of.items():
        orbits.setdefault(block_id, []).append(pair)
    for orbit in orbits.values():
        spread: Dict[Tuple[int, int], Fraction] = {}
        for (a, b) in orbit:
            w_ab = hm.mu_s.entries[(a, b)]
            ba, bb = w_part.block_of[a], w_part.block_of[b]
            scale = w_ab / (w_mass[ba] * w_mass[bb])
            for x in w_blocks[ba]:
                wx = sys.weights[x] * scale
                for y in w_blocks[bb]:
                    key = (x, y)
                    spread[key] = spread.get(key, Fraction(0)) + wx * sys.weights[y]
        original = {pair: hm.mu_s.entries[pair] for pair in orbit}
        if spread != original:
            return False
    return True
