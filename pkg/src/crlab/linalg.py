"""Exact Gauss-Jordan elimination over the rationals."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .errors import PreconditionError


def solve(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list:
    """Solve A x = b exactly; raises on a singular matrix."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(b[i])] for i, row in enumerate(A)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise PreconditionError("singular linear system")
        M[col], M[pivot] = M[pivot], M[col]
        pr = M[col]
        inv = 1 / pr[col]
        if inv != 1:
            for c in range(col, n + 1):
                pr[c] *= inv
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if f:
                row = M[r]
                for c in range(col, n + 1):
                    if pr[c]:
                        row[c] -= f * pr[c]
    return [M[i][n] for i in range(n)]


def solve_discounted(P: Sequence[dict], r: Sequence[Fraction], gamma: Fraction) -> list:
    """Solve v = r + gamma * P v for a sparse row-stochastic P (rows as {col: prob})."""
    n = len(r)
    A = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        A[i][i] += 1
        for j, p in P[i].items():
            A[i][j] -= gamma * p
    return solve(A, r)
