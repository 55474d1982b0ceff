"""Exact rational null spaces via fraction-free elimination.

Rows are cleared to integers and reduced with cross-multiplication, so the
inner loop is pure int arithmetic; the null-space basis is back-substituted
in Fractions at the end.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Sequence, Tuple


def _integer_row(row: Sequence[Fraction]) -> List[int]:
    denom = 1
    for v in row:
        denom = denom * v.denominator // math.gcd(denom, v.denominator)
    ints = [int(v * denom) for v in row]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    return ints


def _normalize(row: List[int]) -> List[int]:
    g = 0
    for v in row:
        g = math.gcd(g, v)
    if g > 1:
        row = [v // g for v in row]
    return row


def exact_null_space(rows: Sequence[Sequence[Fraction]], ncols: int) -> List[Tuple[Fraction, ...]]:
    """Basis of {v : A v = 0} over the rationals.

    Returns one basis vector per free column, each with a 1 in its free
    coordinate — a deterministic echelon-form basis.
    """
    pivots: dict[int, List[int]] = {}  # leading column -> echelon row
    for raw in rows:
        row = _integer_row(raw)
        for col in sorted(pivots):
            if row[col]:
                piv = pivots[col]
                lead = piv[col]
                factor = row[col]
                row = _normalize([lead * a - factor * b for a, b in zip(row, piv)])
        lead_col = next((c for c in range(ncols) if row[c]), None)
        if lead_col is not None:
            pivots[lead_col] = row
    free_cols = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free_cols:
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for col in sorted(pivots, reverse=True):
            row = pivots[col]
            acc = sum((Fraction(row[c]) * vec[c] for c in range(col + 1, ncols) if row[c]), Fraction(0))
            vec[col] = -acc / row[col]
        basis.append(tuple(vec))
    return basis
