"""Exact rectangular linear assignment with gating.

The core is a shortest-augmenting-path Hungarian method that also returns
dual potentials. Duals let us detect when the optimum is not unique; only then
do we pay for the lexicographic tie-break refinement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class AssignmentResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    def total_cost(self, costs: np.ndarray) -> float:
        return float(sum(costs[r, c] for r, c in self.matches))


def _hungarian(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-cost assignment of every row of an n x m matrix, n <= m.

    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are optimal row/column
    potentials: ``u[i] + v[j] <= cost[i, j]`` with equality on matched pairs,
    ``v[j] <= 0`` and ``v[j] == 0`` for unmatched columns.
    """
    n, m = cost.shape
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # row_of[j]: 1-based row assigned to 1-based column j; 0 = free
    row_of = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    c = np.zeros((n + 1, m + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, INF)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[row_of[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    col_of_row = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if row_of[j]:
            col_of_row[row_of[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _solve_raw(work: np.ndarray) -> list[tuple[int, int]]:
    """One optimal full matching of ``work`` (size min(n, m)), no tie handling."""
    n, m = work.shape
    if n == 0 or m == 0:
        return []
    if n <= m:
        cols, _, _ = _hungarian(work)
        return [(i, int(j)) for i, j in enumerate(cols)]
    rows, _, _ = _hungarian(work.T)
    return [(int(i), j) for j, i in enumerate(rows)]


def _open_value(costs: np.ndarray, work: np.ndarray, gate: np.ndarray,
                rows: list[int], cols: list[int]) -> tuple[int, float]:
    """(number of ungated pairs, their cost) of an optimum on a sub-problem."""
    if not rows or not cols:
        return 0, 0.0
    sub = np.ix_(rows, cols)
    g = gate[sub]
    c = costs[sub]
    pairs = [(r, k) for r, k in _solve_raw(work[sub]) if not g[r, k]]
    return len(pairs), float(sum(c[r, k] for r, k in pairs))


def _lexicographic_refine(costs: np.ndarray, work: np.ndarray, gate: np.ndarray,
                          tight: np.ndarray, target: tuple[int, float], tol: float) -> list[tuple[int, int]]:
    """Smallest sorted list of ungated pairs among all optimal assignments.

    Rows are decided in order. A row takes the smallest column for which the
    remaining rows can still reach the optimum, or stays unmatched if none
    can. Only tight ungated pairs can be part of an optimum.
    """
    n, m = costs.shape
    card, total = target
    free_cols = list(range(m))
    fixed: list[tuple[int, int]] = []
    fixed_cost = 0.0
    for r in range(n):
        later = list(range(r + 1, n))
        for c in [c for c in free_cols if tight[r, c] and not gate[r, c]]:
            rest_cols = [x for x in free_cols if x != c]
            k, v = _open_value(costs, work, gate, later, rest_cols)
            if len(fixed) + 1 + k == card and abs(fixed_cost + costs[r, c] + v - total) <= tol:
                fixed.append((r, c))
                fixed_cost += costs[r, c]
                free_cols.remove(c)
                break
        if len(fixed) == card:
            break
    return fixed


def _solve(costs: np.ndarray, work: np.ndarray, gate: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """Ungated pairs of an optimum of ``work``, made canonical when ties exist."""
    n, m = work.shape
    transposed = n > m
    t = work.T if transposed else work
    cols, u, v = _hungarian(t)
    own = np.zeros(t.shape, dtype=bool)
    own[np.arange(t.shape[0]), cols] = True
    tight = np.abs(t - u[:, None] - v[None, :]) <= tol
    pairs = [(i, int(j)) for i, j in enumerate(cols)]
    if transposed:
        pairs = [(j, i) for i, j in pairs]
        tight = tight.T
    matches = sorted((r, c) for r, c in pairs if not gate[r, c])
    # Every optimum is tight under these duals, so a different set of ungated
    # pairs needs a tight ungated edge that the current matching does not use.
    if not np.any(tight & ~(own.T if transposed else own) & ~gate):
        return matches
    target = (len(matches), float(sum(costs[r, c] for r, c in matches)))
    return _lexicographic_refine(costs, work, gate, tight, target, tol * max(1, min(n, m)))


def gate_penalty(costs: np.ndarray, gate: np.ndarray) -> float:
    """A finite cost that no optimal assignment pays while an ungated swap exists."""
    open_costs = costs[~gate]
    if open_costs.size == 0:
        return 1.0
    hi = float(open_costs.max())
    lo = float(open_costs.min())
    k = min(costs.shape)
    return hi + (k + 1) * (hi - lo) + 1.0


def solve(costs, gate: Optional[np.ndarray] = None, tol: float = 1e-9) -> AssignmentResult:
    """Minimum-cost assignment between rows (tracks) and columns (detections).

    ``gate`` marks forbidden pairs. Among assignments that use the largest
    possible number of ungated pairs, the total cost is minimal; gated pairs
    are never returned. Ties are broken towards the lexicographically smallest
    sorted list of returned ``(row, col)`` pairs.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:
        costs = costs.reshape(0, 0) if costs.size == 0 else costs.reshape(costs.shape[0], -1)
    n, m = costs.shape
    if gate is None:
        gate = np.zeros((n, m), dtype=bool)
    else:
        gate = np.asarray(gate, dtype=bool)
        if gate.shape != costs.shape:
            raise ValueError(f"gate shape {gate.shape} != cost shape {costs.shape}")
    if not np.all(np.isfinite(costs[~gate])):
        raise ValueError("non-finite cost on an ungated entry")
    if n == 0 or m == 0 or gate.all():
        return AssignmentResult([], list(range(n)), list(range(m)))
    work = np.where(gate, gate_penalty(costs, gate), costs)
    scale = max(1.0, float(np.abs(work).max()))
    matches = _solve(np.where(gate, 0.0, costs), work, gate, tol * scale)
    mr = {r for r, _ in matches}
    mc = {c for _, c in matches}
    return AssignmentResult(
        matches=matches,
        unmatched_rows=[r for r in range(n) if r not in mr],
        unmatched_cols=[c for c in range(m) if c not in mc],
    )
