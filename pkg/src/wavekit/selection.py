"""Stream selection: max-weight one-to-one pairing of harmonic indices.

The exact solver is a shortest-augmenting-path assignment algorithm with
dual potentials, O(K^3).  Ties are resolved toward the lexicographically
smallest pair list by a second pass that walks the tight subgraph, so equal
inputs always produce identical selections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError
from .wavenumber import WavenumberChannel


@dataclass(frozen=True)
class StreamAssignment:
    """Selected (receive, transmit) index pairs and their summed gain."""

    pairs: tuple
    objective_value: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(r), int(c)) for r, c in self.pairs))
        object.__setattr__(self, "objective_value", float(self.objective_value))

    @property
    def num_streams(self) -> int:
        return len(self.pairs)


def gain_matrix(h_a) -> np.ndarray:
    """Entrywise squared magnitude of a harmonic-domain channel."""
    if isinstance(h_a, WavenumberChannel):
        h_a = h_a.entries
    h_a = np.asarray(h_a, dtype=np.complex128)
    return (h_a.real * h_a.real + h_a.imag * h_a.imag).astype(np.float64)


def _validated(gains) -> np.ndarray:
    g = np.asarray(gains, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0 or g.shape[1] == 0:
        raise ValueError(f"gains must be a non-empty 2-D matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("gains contain NaN or infinity")
    if np.any(g < 0):
        raise ValueError("gains must be non-negative")
    return g


def _solve_min_cost_square(cost: np.ndarray):
    """Shortest-augmenting-path assignment on a square cost matrix.

    Returns (row_at_col, u, v) where the potentials satisfy
    u[i] + v[j] <= cost[i, j] with equality on matched edges, so the optimal
    assignments are exactly the perfect matchings of the tight subgraph.
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n + 1)  # index n is the virtual root column
    row_at_col = np.full(n + 1, -1, dtype=int)
    way = np.zeros(n + 1, dtype=int)
    for root in range(n):
        row_at_col[n] = root
        j0 = n
        minv = np.full(n, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_at_col[j0]
            cur = cost[i0, :] - u[i0] - v[:n]
            free = ~used[:n]
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[:n][better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            touched = used[:n]
            u[row_at_col[:n][touched]] += delta
            u[root] += delta
            v[:n][touched] -= delta
            minv[~touched] -= delta
            j0 = j1
            if row_at_col[j0] == -1:
                break
        # augment along the predecessor chain back to the virtual column
        while j0 != n:
            j1 = way[j0]
            row_at_col[j0] = row_at_col[j1]
            j0 = j1
    return row_at_col[:n], u, v[:n]


def _reroute(displaced: int, free_col: int, tight, row_at_col, col_at_row, fixed_cols):
    """Try to rematch ``displaced`` via alternating tight edges.

    Breadth-first search over rows; only ``free_col`` is unowned.  Commits
    the augmenting path and returns True on success, touches nothing on
    failure.
    """
    pred_row_of_col = {}
    visited_rows = {displaced}
    frontier = [displaced]
    target = None
    while frontier and target is None:
        next_frontier = []
        for x in frontier:
            for c in np.flatnonzero(tight[x]):
                c = int(c)
                if c in fixed_cols or c in pred_row_of_col:
                    continue
                pred_row_of_col[c] = x
                if c == free_col:
                    target = c
                    break
                owner = int(row_at_col[c])
                if owner not in visited_rows:
                    visited_rows.add(owner)
                    next_frontier.append(owner)
            if target is not None:
                break
        frontier = next_frontier
    if target is None:
        return False
    # flip matched edges along the path back to the displaced row
    c = target
    while True:
        x = pred_row_of_col[c]
        released = int(col_at_row[x])
        row_at_col[c] = x
        col_at_row[x] = c
        if x == displaced:
            break
        c = released
    return True


def _canonicalize(tight: np.ndarray, row_at_col: np.ndarray, num_real_rows: int,
                  num_real_cols: int) -> np.ndarray:
    """Rewrite a perfect tight matching into the lexicographically smallest one.

    Rows are fixed in index order; each prefers real columns ascending, then
    padding columns.  A candidate column is kept only when the displaced row
    can be rerouted through unfixed tight edges, so the matching stays
    perfect after every step.
    """
    n = tight.shape[0]
    col_at_row = np.full(n, -1, dtype=int)
    for c in range(n):
        col_at_row[row_at_col[c]] = c
    fixed_cols = set()
    for r in range(min(num_real_rows, n)):
        current = col_at_row[r]
        free = [int(c) for c in np.flatnonzero(tight[r]) if c not in fixed_cols]
        order = [c for c in free if c < num_real_cols]
        order += [c for c in free if c >= num_real_cols]
        for c in order:
            if c == current:
                break
            displaced = row_at_col[c]
            row_at_col[c] = r
            col_at_row[r] = c
            if _reroute(int(displaced), int(current), tight, row_at_col, col_at_row,
                        fixed_cols | {c}):
                break
            row_at_col[c] = displaced
            col_at_row[r] = current
        fixed_cols.add(int(col_at_row[r]))
    return col_at_row


def _truncate(pairs, gains, max_streams):
    if max_streams is None or max_streams >= len(pairs):
        return tuple(pairs)
    if max_streams < 0:
        raise ValueError("max_streams must be non-negative")
    ranked = sorted(pairs, key=lambda p: (-gains[p[0], p[1]], p[0], p[1]))
    return tuple(sorted(ranked[:max_streams]))


def select_hungarian(gains, max_streams: int | None = None) -> StreamAssignment:
    """Optimal stream selection: maximum-weight one-to-one matching.

    Solves the rectangular assignment exactly for K = min(rows, cols) pairs;
    among all optima returns the lexicographically smallest pair list.  An
    optional ``max_streams`` keeps only the strongest pairs of that optimum.
    """
    g = _validated(gains)
    rows, cols = g.shape
    n = max(rows, cols)
    padded = np.zeros((n, n))
    padded[:rows, :cols] = g
    cost = -padded
    row_at_col, u, v = _solve_min_cost_square(cost)
    slack = cost - u[:, None] - v[None, :]
    tol = 1e-12 * max(1.0, float(np.max(g)))
    tight = slack <= tol
    tight[row_at_col, np.arange(n)] = True  # matched edges are tight by invariant
    if int(tight.sum()) > n:
        col_at_row = _canonicalize(tight, row_at_col, rows, cols)
    else:
        col_at_row = np.full(n, -1, dtype=int)
        for c in range(n):
            col_at_row[row_at_col[c]] = c
    pairs = [(r, int(col_at_row[r])) for r in range(rows) if col_at_row[r] < cols]
    pairs = _truncate(sorted(pairs), g, max_streams)
    objective = float(sum(g[r, c] for r, c in pairs))
    return StreamAssignment(pairs=pairs, objective_value=objective)


def select_greedy(gains, max_streams: int | None = None) -> StreamAssignment:
    """Fast heuristic selection: repeatedly take the largest remaining gain.

    Strikes the chosen row and column after each pick.  Never exceeds the
    optimal objective; ties fall to the first entry in row-major order.
    """
    g = _validated(gains)
    work = g.copy()
    k = min(g.shape)
    pairs = []
    for _ in range(k):
        flat = int(np.argmax(work))
        r, c = divmod(flat, work.shape[1])
        pairs.append((r, c))
        work[r, :] = -1.0
        work[:, c] = -1.0
    pairs = _truncate(sorted(pairs), g, max_streams)
    objective = float(sum(g[r, c] for r, c in pairs))
    return StreamAssignment(pairs=pairs, objective_value=objective)
