"""Circle rotations with trigonometric-polynomial observables.

The continuous companion to the finite systems: S and T rotate the circle by
fixed amounts alpha and beta.  For a rotation pair with no rational relations
the limits of every average have closed Fourier forms, so this module provides
those analytic oracles next to a numerical engine that evaluates the averages
at finite N.  Rotation amounts are stored as high-precision Fractions so that
phases like (x + i*alpha) mod 1 reduce exactly before any float rounding.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence

import numpy as np

from .core import DimensionError, PreconditionError, as_fraction
from .averaging import ConvergenceReport, ReportRow

DEFAULT_PRECISION_BITS = 128


def sqrt_fraction(k: int, bits: int = DEFAULT_PRECISION_BITS) -> Fraction:
    """A Fraction within 2**-bits of sqrt(k) (floor of the scaled integer root)."""
    if k < 0:
        raise ValueError(f"square root of negative integer: {k}")
    return Fraction(math.isqrt(k << (2 * bits)), 1 << bits)


@dataclass(frozen=True)
class TorusSystem:
    """Two commuting circle rotations x -> x + alpha and x -> x + beta.

    `generic` declares that (alpha, beta, 1) satisfy no rational relation.
    The stored amounts are rational approximants, so genericity is a
    declaration about the numbers they stand for, not a checkable property;
    the analytic oracles require it.
    """

    alpha: Fraction
    beta: Fraction
    generic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_fraction(self.alpha) % 1)
        object.__setattr__(self, "beta", as_fraction(self.beta) % 1)


def sqrt23_system(bits: int = DEFAULT_PRECISION_BITS) -> TorusSystem:
    """Rotations by sqrt(2)-1 and sqrt(3)-1: the stock generic pair."""
    return TorusSystem(sqrt_fraction(2, bits) - 1, sqrt_fraction(3, bits) - 1, generic=True)


class TrigPoly:
    """A real-valued trigonometric polynomial sum_n c_n e^{2 pi i n x}.

    Coefficients must satisfy c_{-n} = conj(c_n) (that is what real-valued
    means); the constructor checks this exactly.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Dict[int, complex]):
        cleaned = {int(n): complex(c) for n, c in coeffs.items() if complex(c) != 0}
        for n, c in cleaned.items():
            if cleaned.get(-n, 0j) != c.conjugate():
                raise ValueError(f"coefficients are not conjugate-symmetric at frequency {n}")
        self.coeffs = cleaned

    @classmethod
    def constant(cls, value: float) -> "TrigPoly":
        return cls({0: complex(value)})

    @classmethod
    def cosine(cls, n: int, amplitude: float = 1.0) -> "TrigPoly":
        if n == 0:
            return cls.constant(amplitude)
        return cls({n: amplitude / 2, -n: amplitude / 2})

    @classmethod
    def sine(cls, n: int, amplitude: float = 1.0) -> "TrigPoly":
        if n == 0:
            return cls({})
        return cls({n: complex(0, -amplitude / 2), -n: complex(0, amplitude / 2)})

    def coeff(self, n: int) -> complex:
        return self.coeffs.get(n, 0j)

    @property
    def degree(self) -> int:
        return max((abs(n) for n in self.coeffs), default=0)

    @property
    def sup_bound(self) -> float:
        """sum |c_n|, an upper bound for the sup norm."""
        return math.fsum(abs(c) for c in self.coeffs.values())

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        merged = dict(self.coeffs)
        for n, c in other.coeffs.items():
            merged[n] = merged.get(n, 0j) + c
        return TrigPoly(merged)

    def __mul__(self, scalar) -> "TrigPoly":
        if isinstance(scalar, TrigPoly):
            out: Dict[int, complex] = {}
            for n, c in self.coeffs.items():
                for m, d in scalar.coeffs.items():
                    out[n + m] = out.get(n + m, 0j) + c * d
            return TrigPoly(out)
        return TrigPoly({n: c * scalar for n, c in self.coeffs.items()})

    __rmul__ = __mul__

    def value(self, x: float) -> float:
        """Evaluate at a point (x taken mod 1 implicitly by periodicity)."""
        x = float(x)
        terms = [self.coeff(0).real]
        for n, c in self.coeffs.items():
            if n > 0:
                angle = 2.0 * math.pi * n * x
                terms.append(2.0 * (c.real * math.cos(angle) - c.imag * math.sin(angle)))
        return math.fsum(terms)

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on a float array."""
        out = np.full(np.shape(xs), self.coeff(0).real, dtype=np.float64)
        for n, c in sorted(self.coeffs.items()):
            if n > 0:
                angle = (2.0 * math.pi * n) * np.asarray(xs, dtype=np.float64)
                out += (2.0 * c.real) * np.cos(angle)
                out -= (2.0 * c.imag) * np.sin(angle)
        return out


def _require_generic(system: TorusSystem, what: str):
    if not system.generic:
        raise PreconditionError(f"{what} assumes a generic rotation pair; this system does not declare one")


def fourier_host_integral(system: TorusSystem, f0: TrigPoly, f1: TrigPoly, f2: TrigPoly, f3: TrigPoly) -> float:
    """Exact limit of the four-fold average: sum_n c0(n) c1(-n) c2(-n) c3(n).

    For a generic pair the four-fold self-joining is the image of three
    independent uniform coordinates (x0, x1, x2, x1 + x2 - x0), and matching
    frequencies kills everything except the diagonal above.
    """
    _require_generic(system, "the four-fold integral formula")
    terms = [
        (f0.coeff(n) * f1.coeff(-n) * f2.coeff(-n) * f3.coeff(n)).real
        for n in sorted(f0.coeffs)
    ]
    return math.fsum(terms)


def fourier_cubic_limit(system: TorusSystem, f1: TrigPoly, f2: TrigPoly, f3: TrigPoly, x) -> float:
    """Exact pointwise limit of the cubic average at start x:
    sum_n c1(n) c2(n) c3(-n) e^{2 pi i n x}."""
    _require_generic(system, "the cubic limit formula")
    x = float(as_fraction(x) % 1)
    terms = []
    for n in sorted(f1.coeffs):
        c = f1.coeff(n) * f2.coeff(n) * f3.coeff(-n)
        if c != 0:
            angle = 2.0 * math.pi * n * x
            terms.append(c.real * math.cos(angle) - c.imag * math.sin(angle))
    return math.fsum(terms)


TORUS_KINDS = {
    "cubic": 3,
    "fourfold": 4,
    "windowed_sn": 1,
    "birkhoff_1d": 1,
    "birkhoff_2d": 1,
}


def _phase_array(x: Fraction, step: Fraction, N: int) -> np.ndarray:
    """floats of (x + i*step) mod 1 for i < N, with the reduction done exactly."""
    out = np.empty(N, dtype=np.float64)
    cur = x % 1
    for i in range(N):
        out[i] = float(cur)
        cur = (cur + step) % 1
    return out


def _geometric_sum(theta: Fraction, N: int) -> complex:
    """sum_{t<N} e^{2 pi i t theta}, with the closed form's phases reduced mod 1
    exactly before evaluation."""
    frac = theta % 1
    if frac == 0:
        return complex(N)
    angle_one = 2.0 * math.pi * float(frac)
    angle_n = 2.0 * math.pi * float((theta * N) % 1)
    num = complex(math.cos(angle_n) - 1.0, math.sin(angle_n))
    den = complex(math.cos(angle_one) - 1.0, math.sin(angle_one))
    return num / den


def _check_torus_args(kind: str, observables: Sequence[TrigPoly], N: int):
    if kind not in TORUS_KINDS:
        raise ValueError(f"unknown average kind: {kind!r}")
    if len(observables) != TORUS_KINDS[kind]:
        raise DimensionError(f"kind {kind} needs {TORUS_KINDS[kind]} observables, got {len(observables)}")
    if N < 1:
        raise ValueError(f"window size must be positive, got {N}")


def torus_average(
    system: TorusSystem,
    kind: str,
    observables: Sequence[TrigPoly],
    x,
    N: int,
    block_size: int = 256,
) -> float:
    """Evaluate one window average at size N.

    cubic and windowed_sn stream the N x N grid of orbit values through
    numpy in row blocks (each row is always reduced over the full width, so
    the result does not depend on block_size); fourfold expands the box sum
    into per-frequency geometric sums, which is the same finite sum
    reorganized term by term.
    """
    _check_torus_args(kind, observables, N)
    if block_size < 1:
        raise ValueError(f"block size must be positive, got {block_size}")
    x = as_fraction(x) % 1
    u = _phase_array(x, system.alpha, N)          # x + i*alpha
    v = _phase_array(Fraction(0), system.beta, N)  # j*beta

    if kind == "birkhoff_1d":
        f = observables[0]
        return math.fsum(f.values(u).tolist()) / N

    if kind == "birkhoff_2d":
        f = observables[0]
        rows = []
        for lo in range(0, N, block_size):
            vals = f.values(u[lo:lo + block_size, None] + v[None, :])
            rows.extend(math.fsum(row.tolist()) for row in vals)
        return math.fsum(rows) / N**2

    if kind == "cubic":
        f1, f2, f3 = observables
        w = _phase_array(x, system.beta, N)        # x + j*beta
        f1u = f1.values(u)
        f2w = f2.values(w)
        rows = []
        for lo in range(0, N, block_size):
            vals = f3.values(u[lo:lo + block_size, None] + v[None, :])
            # one fixed-length dot per row: the reduction never sees the block
            # shape, so results are bitwise independent of block_size
            for r in range(vals.shape[0]):
                rows.append(f1u[lo + r] * float(np.dot(vals[r], f2w)))
        return math.fsum(rows) / N**2

    if kind == "windowed_sn":
        f = observables[0]
        m = np.empty((N, N), dtype=np.float64)
        for lo in range(0, N, block_size):
            m[lo:lo + block_size] = f.values(u[lo:lo + block_size, None] + v[None, :])
        gram = m @ m.T
        return abs(float(np.dot(gram.ravel(), gram.ravel()))) / float(N) ** 4

    # fourfold: sum over i,j,k,p in [0,N)^4 of
    #   f0(x+ia+jb) f1(x+(i+k)a+jb) f2(x+ia+(j+p)b) f3(x+(i+k)a+(j+p)b).
    # Expanding every observable in frequencies (n0,n1,n2,n3) factors the box
    # sum into four geometric sums with total frequency M = n0+n1+n2+n3:
    f0, f1, f2, f3 = observables
    alpha, beta = system.alpha, system.beta
    terms = []
    for n0, c0 in sorted(f0.coeffs.items()):
        for n1, c1 in sorted(f1.coeffs.items()):
            for n2, c2 in sorted(f2.coeffs.items()):
                for n3, c3 in sorted(f3.coeffs.items()):
                    total = n0 + n1 + n2 + n3
                    coeff = c0 * c1 * c2 * c3
                    angle = 2.0 * math.pi * float((total * x) % 1)
                    phase = complex(math.cos(angle), math.sin(angle))
                    value = (
                        coeff
                        * phase
                        * _geometric_sum(total * alpha, N)
                        * _geometric_sum((n1 + n3) * alpha, N)
                        * _geometric_sum(total * beta, N)
                        * _geometric_sum((n2 + n3) * beta, N)
                    )
                    terms.append(value.real)
    return math.fsum(terms) / float(N) ** 4


def torus_average_naive(system: TorusSystem, kind: str, observables: Sequence[TrigPoly], x, N: int) -> float:
    """Literal loops over the defining box sums; reference for small N."""
    _check_torus_args(kind, observables, N)
    x = as_fraction(x) % 1
    a, b = system.alpha, system.beta

    def at(i: int, j: int, f: TrigPoly) -> float:
        return f.value(float((x + i * a + j * b) % 1))

    if kind == "birkhoff_1d":
        f = observables[0]
        return math.fsum(at(i, 0, f) for i in range(N)) / N
    if kind == "birkhoff_2d":
        f = observables[0]
        return math.fsum(at(i, j, f) for i in range(N) for j in range(N)) / N**2
    if kind == "cubic":
        f1, f2, f3 = observables
        total = math.fsum(
            f1.value(float((x + i * a) % 1)) * f2.value(float((x + j * b) % 1)) * at(i, j, f3)
            for i in range(N)
            for j in range(N)
        )
        return total / N**2
    if kind == "windowed_sn":
        f = observables[0]
        total = math.fsum(
            at(i, j, f) * at(i + k, j, f) * at(i, j + p, f) * at(i + k, j + p, f)
            for i in range(N)
            for j in range(N)
            for k in range(-i, N - i)
            for p in range(-j, N - j)
        )
        return abs(total) / N**4
    f0, f1, f2, f3 = observables
    total = math.fsum(
        at(i, j, f0) * at(i + k, j, f1) * at(i, j + p, f2) * at(i + k, j + p, f3)
        for i in range(N)
        for j in range(N)
        for k in range(N)
        for p in range(N)
    )
    return total / N**4


def torus_report(
    system: TorusSystem,
    kind: str,
    observables: Sequence[TrigPoly],
    x,
    schedule: Sequence[int],
    block_size: int = 256,
) -> ConvergenceReport:
    """Run one kind over a schedule against its analytic limit (when the
    system is generic; otherwise values are reported without a reference)."""
    if not schedule or any(n < 1 for n in schedule):
        raise ValueError("schedule must be a nonempty list of positive window sizes")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    observables = list(observables)
    _check_torus_args(kind, observables, schedule[0])
    reference: Optional[float] = None
    if system.generic:
        if kind == "cubic":
            reference = fourier_cubic_limit(system, *observables, x)
        elif kind == "fourfold":
            reference = fourier_host_integral(system, *observables)
        elif kind == "windowed_sn":
            f = observables[0]
            reference = abs(fourier_host_integral(system, f, f, f, f))
        else:
            reference = observables[0].coeff(0).real
    rows = []
    for N in schedule:
        begin = time.perf_counter()
        value = torus_average(system, kind, observables, x, N, block_size=block_size)
        elapsed = time.perf_counter() - begin
        err = abs(value - reference) if reference is not None else None
        rows.append(ReportRow(N, value, reference, err, elapsed))
    return ConvergenceReport(
        rows=tuple(rows),
        metadata={"kind": kind, "start": str(as_fraction(x) % 1), "alpha": str(system.alpha), "beta": str(system.beta)},
    )
