"""Dense tableau simplex for small inequality-form linear programs.

Solves max c.x subject to A x <= b, x >= 0, with b >= 0 so the slack
basis is immediately feasible and no phase-one is needed. Instances here
are tiny (tens of variables, at most a few thousand rows), so a dense
tableau is simpler and plenty fast. Dantzig pricing by default, with a
permanent switch to Bland's rule once the objective stalls, which rules
out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
STALL_LIMIT = 64  # consecutive non-improving pivots before Bland's rule


class LpError(RuntimeError):
    pass


@dataclass
class LpSolution:
    status: str  # "optimal" or "unbounded"
    x: np.ndarray
    value: float
    iterations: int
    ray: np.ndarray | None = None  # improving direction when unbounded


def solve_lp(c, A, b, max_iters: int | None = None) -> LpSolution:
    c = np.asarray(c, dtype=np.float64).ravel()
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).ravel()
    if A.ndim != 2 or A.shape != (b.size, c.size):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}")
    if b.size and b.min() < -1e-12:
        raise ValueError("b must be nonnegative (slack basis must be feasible)")
    b = np.maximum(b, 0.0)

    n, m = c.size, b.size
    if max_iters is None:
        max_iters = 200 * (n + m + 1)

    # rows 0..m-1: [A | I | b]; row m: [-c | 0 | 0]
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m)

    bland = False
    stall = 0
    last_value = 0.0
    for it in range(max_iters):
        red = T[m, : n + m]
        if bland:
            neg = np.nonzero(red < -PIVOT_TOL)[0]
            if neg.size == 0:
                return _extract(T, basis, n, m, it)
            col = int(neg[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -PIVOT_TOL:
                return _extract(T, basis, n, m, it)

        pos = T[:m, col] > PIVOT_TOL
        if not pos.any():
            return _unbounded_ray(T, basis, n, m, col, it)
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + PIVOT_TOL)[0]
        # smallest basis index among ties: exact Bland tie-break, and a
        # deterministic choice under Dantzig pricing too
        row = int(ties[np.argmin(basis[ties])])

        piv = T[row, col]
        T[row] /= piv
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col

        value = T[m, -1]
        if value <= last_value + PIVOT_TOL:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
        else:
            stall = 0
        last_value = value
    raise LpError(f"simplex failed to converge in {max_iters} iterations")


def _extract(T, basis, n, m, it) -> LpSolution:
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    return LpSolution(status="optimal", x=x, value=float(T[m, -1]), iterations=it)


def _unbounded_ray(T, basis, n, m, col, it) -> LpSolution:
    # direction: entering variable +1, basic variables move by -column
    ray_full = np.zeros(n + m)
    ray_full[col] = 1.0
    for i in range(m):
        ray_full[basis[i]] = -T[i, col]
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    return LpSolution(
        status="unbounded",
        x=x,
        value=float("inf"),
        iterations=it,
        ray=ray_full[:n],
    )
