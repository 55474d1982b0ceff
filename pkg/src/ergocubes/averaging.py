"""Exact window averages along the two-generator action.

Every average here is a finite sum over a box [0, N-1]^d of generator
exponents.  On a finite system the point S^i T^j x depends only on
(i mod a, j mod b), where a and b are the cycle lengths of S and T on the
orbit of x, and the number of window indices in each residue class has a
closed form; so each average collapses to a residue-weighted sum whose cost
does not grow with N.  Literal-loop references (`*_naive`) are kept for
equality testing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from .core import (
    DimensionError,
    Observable,
    PreconditionError,
    format_fraction,
    integrate,
)
from .finite import (
    FiniteMPS,
    GroupElement,
    S_GEN,
    T_GEN,
    is_ergodic,
    is_free,
    partition_s,
    partition_t,
)
from .joinings import cond_exp, host_measure, host_seminorm, invariant_w, is_magic

Value = Union[Fraction, float]


def _format_value(v: Optional[Value]) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return format_fraction(v)
    return repr(v)


@dataclass(frozen=True)
class ReportRow:
    N: int
    value: Value
    reference: Optional[Value]
    abs_error: Optional[Value]
    wall_time: float = 0.0


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-N values against an optional oracle; serializes to a fixed CSV schema.

    Wall times live only in the rows/metadata, never in the CSV, so identical
    configurations produce byte-identical files.
    """

    rows: Tuple[ReportRow, ...]
    metadata: Dict[str, object] = field(default_factory=dict, compare=False)

    def to_csv(self) -> str:
        lines = ["N,value,reference,abs_error"]
        for row in self.rows:
            lines.append(
                f"{row.N},{_format_value(row.value)},{_format_value(row.reference)},{_format_value(row.abs_error)}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.metadata):
            lines.append(f"# {key}: {self.metadata[key]}")
        widths = ("N", "value", "reference", "abs_error")
        lines.append("  ".join(widths))
        for row in self.rows:
            lines.append(
                f"{row.N}  {_format_value(row.value)}  {_format_value(row.reference)}  {_format_value(row.abs_error)}"
            )
        return "\n".join(lines) + "\n"


AVERAGE_KINDS = {
    "cubic": 3,
    "fourfold": 4,
    "windowed_sn": 1,
    "birkhoff_1d": 1,
    "birkhoff_2d": 1,
}


@dataclass(frozen=True)
class AverageSpec:
    kind: str
    observables: Tuple[Observable, ...]
    start: int
    schedule: Tuple[int, ...]

    def __post_init__(self):
        if self.kind not in AVERAGE_KINDS:
            raise ValueError(f"unknown average kind: {self.kind!r}")
        need = AVERAGE_KINDS[self.kind]
        if len(self.observables) != need:
            raise DimensionError(f"kind {self.kind} needs {need} observables, got {len(self.observables)}")
        if not self.schedule or any(n < 1 for n in self.schedule):
            raise ValueError("schedule must be a nonempty list of positive window sizes")
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("schedule must be strictly increasing")


def window_counts(N: int, period: int) -> List[int]:
    """counts[r] = #{ i in [0, N) : i = r mod period }."""
    return [(N - 1 - r) // period + 1 if r < N else 0 for r in range(period)]


def _orbit_grid(sys: FiniteMPS, x: int) -> Tuple[int, int, List[List[int]]]:
    """grid[r][s] = S^r T^s x for r < a, s < b (cycle lengths at x), cached."""
    cached = sys._grid_cache.get(x)
    if cached is not None:
        return cached
    a = sys.cycle_length(S_GEN, x)
    b = sys.cycle_length(T_GEN, x)
    row = [x]
    for _ in range(b - 1):
        row.append(sys.T[row[-1]])
    grid = [row]
    for _ in range(a - 1):
        grid.append([sys.S[p] for p in grid[-1]])
    sys._grid_cache[x] = (a, b, grid)
    return a, b, grid


def _check_average_args(sys: FiniteMPS, observables: Sequence[Observable], x: int, N: int):
    if not (0 <= x < sys.n):
        raise DimensionError(f"start point {x} outside 0..{sys.n - 1}")
    if N < 1:
        raise ValueError(f"window size must be positive, got {N}")
    for f in observables:
        if f.n != sys.n:
            raise DimensionError(f"observable on {f.n} points vs system on {sys.n}")


def cubic_average(sys: FiniteMPS, f1: Observable, f2: Observable, f3: Observable, x: int, N: int) -> Fraction:
    """(1/N^2) sum_{i,j<N} f1(S^i x) f2(T^j x) f3(S^i T^j x), exactly."""
    _check_average_args(sys, (f1, f2, f3), x, N)
    a, b, grid = _orbit_grid(sys, x)
    cs, ct = window_counts(N, a), window_counts(N, b)
    total = Fraction(0)
    for r in range(a):
        if not cs[r]:
            continue
        v1 = f1.values[grid[r][0]]
        if v1 == 0:
            continue
        inner = sum(
            (ct[s] * f2.values[grid[0][s]] * f3.values[grid[r][s]] for s in range(b) if ct[s]),
            Fraction(0),
        )
        total += cs[r] * v1 * inner
    return total / N**2


def fourfold_average(
    sys: FiniteMPS, f0: Observable, f1: Observable, f2: Observable, f3: Observable, x: int, N: int
) -> Fraction:
    """(1/N^4) sum over i,j,k,p in [0,N)^4 of
    f0(S^i T^j x) f1(S^{i+k} T^j x) f2(S^i T^{j+p} x) f3(S^{i+k} T^{j+p} x).

    The residue pair (i mod a, (i+k) mod a) occurs cs[r] * cs[(r'-r) mod a]
    times because k itself ranges over a full window; likewise in j, p.
    """
    _check_average_args(sys, (f0, f1, f2, f3), x, N)
    a, b, grid = _orbit_grid(sys, x)
    cs, ct = window_counts(N, a), window_counts(N, b)
    F = [
        [[f.values[grid[r][s]] for s in range(b)] for r in range(a)]
        for f in (f0, f1, f2, f3)
    ]
    total = Fraction(0)
    for r in range(a):
        if not cs[r]:
            continue
        for r2 in range(a):
            shift = cs[(r2 - r) % a]
            if not shift:
                continue
            left = [F[0][r][s] * F[1][r2][s] for s in range(b)]
            right = [F[2][r][s] * F[3][r2][s] for s in range(b)]
            inner = Fraction(0)
            for s in range(b):
                if not ct[s] or left[s] == 0:
                    continue
                acc = sum(
                    (ct[(s2 - s) % b] * right[s2] for s2 in range(b) if ct[(s2 - s) % b]),
                    Fraction(0),
                )
                inner += ct[s] * left[s] * acc
            total += cs[r] * shift * inner
    return total / N**4


def fourfold_average_naive(
    sys: FiniteMPS, f0: Observable, f1: Observable, f2: Observable, f3: Observable, x: int, N: int
) -> Fraction:
    """Literal quadruple loop; reference implementation for equality tests."""
    _check_average_args(sys, (f0, f1, f2, f3), x, N)
    a, b, grid = _orbit_grid(sys, x)
    total = Fraction(0)
    for i in range(N):
        for j in range(N):
            for k in range(N):
                for p in range(N):
                    total += (
                        f0.values[grid[i % a][j % b]]
                        * f1.values[grid[(i + k) % a][j % b]]
                        * f2.values[grid[i % a][(j + p) % b]]
                        * f3.values[grid[(i + k) % a][(j + p) % b]]
                    )
    return total / N**4


def windowed_sn(sys: FiniteMPS, f: Observable, x: int, N: int) -> Fraction:
    """S_N(f, x): the A_N-window average |(1/N^4) sum f f f f|.

    Over A_N = {i, j in [0,N), k in [-i, N-1-i], p in [-j, N-1-j]} the sums
    i+k and j+p range over full windows independently, so the average equals
    (1/N^4) sum_{i,i'} (sum_j f(S^i T^j x) f(S^{i'} T^j x))^2 -- a sum of
    squares, hence nonnegative before the absolute value.
    """
    _check_average_args(sys, (f,), x, N)
    a, b, grid = _orbit_grid(sys, x)
    cs, ct = window_counts(N, a), window_counts(N, b)
    F = [[f.values[grid[r][s]] for s in range(b)] for r in range(a)]
    total = Fraction(0)
    for r in range(a):
        if not cs[r]:
            continue
        for r2 in range(a):
            if not cs[r2]:
                continue
            corr = sum((ct[s] * F[r][s] * F[r2][s] for s in range(b) if ct[s]), Fraction(0))
            total += cs[r] * cs[r2] * corr * corr
    return abs(total) / N**4


def windowed_sn_naive(sys: FiniteMPS, f: Observable, x: int, N: int) -> Fraction:
    """Literal A_N loop; reference implementation for equality tests."""
    _check_average_args(sys, (f,), x, N)
    a, b, grid = _orbit_grid(sys, x)
    total = Fraction(0)
    for i in range(N):
        for j in range(N):
            for k in range(-i, N - i):
                for p in range(-j, N - j):
                    total += (
                        f.values[grid[i % a][j % b]]
                        * f.values[grid[(i + k) % a][j % b]]
                        * f.values[grid[i % a][(j + p) % b]]
                        * f.values[grid[(i + k) % a][(j + p) % b]]
                    )
    return abs(total) / N**4


def birkhoff_average(
    sys: FiniteMPS, f: Observable, x: int, gens: Sequence[GroupElement], N: int
) -> Fraction:
    """d-dimensional Birkhoff average over the box [0, N-1]^len(gens)."""
    _check_average_args(sys, (f,), x, N)
    if not gens:
        raise ValueError("need at least one generator")
    points = [x]
    count_weights = [1]
    for g in gens:
        period = sys.cycle_length(g, x)
        counts = window_counts(N, period)
        new_points, new_weights = [], []
        for p, w in zip(points, count_weights):
            cur = p
            for r in range(period):
                if counts[r]:
                    new_points.append(cur)
                    new_weights.append(w * counts[r])
                cur = sys.apply(g, cur)
        points, count_weights = new_points, new_weights
    total = sum((w * f.values[p] for p, w in zip(points, count_weights)), Fraction(0))
    return total / Fraction(N) ** len(gens)


class BoundCheck(NamedTuple):
    lhs: Fraction   # fourth power of the cubic average
    rhs: Fraction   # c * S_N(f3, x)
    holds: bool


def check_bound_average(
    sys: FiniteMPS,
    f1: Observable,
    f2: Observable,
    f3: Observable,
    x: int,
    N: int,
    c: Fraction = Fraction(1),
) -> BoundCheck:
    """Check (cubic average)^4 <= c * S_N(f3, x) for sup-norm-1 observables.

    The inequality with c = 1 is what two Cauchy-Schwarz passes give; smaller
    c is accepted so adversarial verification runs can demonstrate failures.
    """
    for name, f in (("f1", f1), ("f2", f2), ("f3", f3)):
        if f.sup_norm > 1:
            raise PreconditionError(f"{name} has sup norm {f.sup_norm} > 1")
    lhs = cubic_average(sys, f1, f2, f3, x, N) ** 4
    rhs = c * windowed_sn(sys, f3, x, N)
    return BoundCheck(lhs, rhs, lhs <= rhs)


class TelescopingCheck(NamedTuple):
    identity: bool              # product difference equals the telescoping sum
    bound: Optional[bool]       # |difference| <= sum |a_i - b_i| (when all |.| <= 1)


def check_telescoping(a: Sequence, b: Sequence) -> TelescopingCheck:
    """Verify prod a - prod b = sum_i a_1..a_{i-1} (a_i - b_i) b_{i+1}..b_n."""
    a = [Fraction(v) if not isinstance(v, Fraction) else v for v in a]
    b = [Fraction(v) if not isinstance(v, Fraction) else v for v in b]
    if len(a) != len(b):
        raise DimensionError(f"sequence lengths differ: {len(a)} != {len(b)}")
    prod_a = Fraction(1)
    for v in a:
        prod_a *= v
    prod_b = Fraction(1)
    for v in b:
        prod_b *= v
    lhs = prod_a - prod_b
    rhs = Fraction(0)
    for i in range(len(a)):
        term = a[i] - b[i]
        for v in a[:i]:
            term *= v
        for v in b[i + 1:]:
            term *= v
        rhs += term
    identity = lhs == rhs
    bound = None
    if all(abs(v) <= 1 for v in a) and all(abs(v) <= 1 for v in b):
        bound = abs(lhs) <= sum(abs(u - v) for u, v in zip(a, b))
    return TelescopingCheck(identity, bound)


@dataclass(frozen=True)
class DecompositionRow:
    N: int
    track_a: Fraction    # cubic average against E(f3 | W)
    track_b: Fraction    # cubic average against f3 - E(f3 | W)
    direct: Fraction     # cubic average against f3
    sn_bound: Fraction   # S_N of the mean-zero part (bounds track_b^4)


@dataclass(frozen=True)
class DecompositionResult:
    limit: Fraction                      # exact limit of the structured track
    rows: Tuple[DecompositionRow, ...]
    exact_sum: bool                      # track_a + track_b == direct at every N


def decompose_and_converge(
    sys: FiniteMPS, f1: Observable, f2: Observable, f3: Observable, x: int, schedule: Sequence[int]
) -> DecompositionResult:
    """Split f3 into its W-part and mean-zero part and track both averages.

    Requires a magic, ergodic, free system: there the W-part is a sum of
    products (S-invariant block) x (T-invariant block), each contributing a
    product of two one-dimensional cycle averages, which gives the exact
    limit; the mean-zero part has vanishing seminorm, so its S_N bound
    squeezes the second track to zero.
    """
    if not schedule or any(n < 1 for n in schedule):
        raise ValueError("schedule must be a nonempty list of positive window sizes")
    failures = []
    if not is_magic(sys).is_magic:
        failures.append("not magic")
    if not is_ergodic(sys):
        failures.append("not ergodic")
    if not is_free(sys).free:
        failures.append("not free")
    if failures:
        raise PreconditionError("decompose_and_converge requires a magic ergodic free system; this one is " + ", ".join(failures))
    _check_average_args(sys, (f1, f2, f3), x, max(schedule))

    w_part = invariant_w(sys)
    structured = cond_exp(sys, f3, w_part)
    mean_zero = f3 - structured

    p_s = partition_s(sys)
    p_t = partition_t(sys)
    a = sys.cycle_length(S_GEN, x)
    b = sys.cycle_length(T_GEN, x)
    s_cycle = [x]
    for _ in range(a - 1):
        s_cycle.append(sys.S[s_cycle[-1]])
    t_cycle = [x]
    for _ in range(b - 1):
        t_cycle.append(sys.T[t_cycle[-1]])
    limit = Fraction(0)
    for block in w_part.blocks():
        anchor = block[0]
        value = structured.values[anchor]
        if value == 0:
            continue
        s_block = p_s.block_of[anchor]   # the S-invariant block containing D
        t_block = p_t.block_of[anchor]   # the T-invariant block containing D
        avg_s = sum((f1.values[p] for p in s_cycle if p_t.block_of[p] == t_block), Fraction(0)) / a
        avg_t = sum((f2.values[p] for p in t_cycle if p_s.block_of[p] == s_block), Fraction(0)) / b
        limit += value * avg_s * avg_t
    rows = []
    exact = True
    for N in schedule:
        track_a = cubic_average(sys, f1, f2, structured, x, N)
        track_b = cubic_average(sys, f1, f2, mean_zero, x, N)
        direct = cubic_average(sys, f1, f2, f3, x, N)
        exact = exact and (track_a + track_b == direct)
        rows.append(DecompositionRow(N, track_a, track_b, direct, windowed_sn(sys, mean_zero, x, N)))
    return DecompositionResult(limit=limit, rows=tuple(rows), exact_sum=exact)


def run_average(sys: FiniteMPS, spec: AverageSpec) -> ConvergenceReport:
    """Drive one average kind over a schedule, wiring in the exact oracle
    reference where one exists (the four-fold joining integral)."""
    reference: Optional[Fraction] = None
    if spec.kind == "fourfold":
        reference = integrate(host_measure(sys).mu_st, spec.observables)
    elif spec.kind == "windowed_sn":
        reference = host_seminorm(host_measure(sys), spec.observables[0]).fourth_power
    elif spec.kind == "birkhoff_1d":
        period = sys.cycle_length(S_GEN, spec.start)
        reference = birkhoff_average(sys, spec.observables[0], spec.start, [S_GEN], period)
    elif spec.kind == "birkhoff_2d":
        period_s = sys.cycle_length(S_GEN, spec.start)
        period_t = sys.cycle_length(T_GEN, spec.start)
        period = math.lcm(period_s, period_t)
        reference = birkhoff_average(sys, spec.observables[0], spec.start, [S_GEN, T_GEN], period)
    rows = []
    for N in spec.schedule:
        begin = time.perf_counter()
        if spec.kind == "cubic":
            value = cubic_average(sys, *spec.observables, spec.start, N)
        elif spec.kind == "fourfold":
            value = fourfold_average(sys, *spec.observables, spec.start, N)
        elif spec.kind == "windowed_sn":
            value = windowed_sn(sys, spec.observables[0], spec.start, N)
        elif spec.kind == "birkhoff_1d":
            value = birkhoff_average(sys, spec.observables[0], spec.start, [S_GEN], N)
        else:
            value = birkhoff_average(sys, spec.observables[0], spec.start, [S_GEN, T_GEN], N)
        elapsed = time.perf_counter() - begin
        err = abs(value - reference) if reference is not None else None
        rows.append(ReportRow(N, value, reference, err, elapsed))
    return ConvergenceReport(
        rows=tuple(rows),
        metadata={"kind": spec.kind, "start": spec.start, "n": sys.n},
    )
