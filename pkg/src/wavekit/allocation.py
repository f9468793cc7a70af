"""Power allocation across selected streams under cross-stream interference.

The objective treats interference as noise:

    C(p) = sum_k log2(1 + a_k p_k / (sum_{m != k} b_{k,m} p_m + sigma^2)),

maximized over the budget simplex {p >= 0, sum p <= P_T}.  The main solver
rewrites C as a difference of two concave terms and ascends a linearized
surrogate; classical water-filling, iterative water-filling, and a particle
swarm serve as baselines and warm starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, NonFiniteError
from .selection import StreamAssignment
from .wavenumber import WavenumberChannel

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class CouplingMatrix:
    """Direct and cross gains of the selected streams, with noise and budget."""

    direct_gains: np.ndarray
    cross_gains: np.ndarray
    noise_power_w: float
    budget_w: float

    def __post_init__(self):
        a = np.asarray(self.direct_gains, dtype=np.float64).copy()
        b = np.asarray(self.cross_gains, dtype=np.float64).copy()
        if a.ndim != 1 or a.size == 0:
            raise ValueError(f"direct_gains must be a nonempty vector, got shape {a.shape}")
        if b.shape != (a.size, a.size):
            raise ValueError(f"cross_gains shape {b.shape} does not match {a.size} streams")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteError("coupling contains NaN or infinity")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("coupling gains must be non-negative")
        if np.any(np.diagonal(b) != 0):
            raise ValueError("cross_gains diagonal must be zero")
        if not (np.isfinite(self.noise_power_w) and self.noise_power_w > 0):
            raise ValueError("noise_power_w must be positive")
        if not (np.isfinite(self.budget_w) and self.budget_w > 0):
            raise ValueError("budget_w must be positive")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "direct_gains", a)
        object.__setattr__(self, "cross_gains", b)
        object.__setattr__(self, "noise_power_w", float(self.noise_power_w))
        object.__setattr__(self, "budget_w", float(self.budget_w))

    @property
    def num_streams(self) -> int:
        return self.direct_gains.size


@dataclass(frozen=True)
class PowerAllocation:
    """A feasible power vector with its interference slacks and capacity."""

    powers_w: np.ndarray
    slacks: np.ndarray
    achieved_capacity_bits: float
    converged: bool = True
    histories: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.powers_w, dtype=np.float64).copy()
        s = np.asarray(self.slacks, dtype=np.float64).copy()
        p.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "powers_w", p)
        object.__setattr__(self, "slacks", s)
        object.__setattr__(self, "achieved_capacity_bits", float(self.achieved_capacity_bits))
        object.__setattr__(self, "histories", tuple(tuple(h) for h in self.histories))


@dataclass(frozen=True)
class DcOptions:
    tol_rel: float = 1e-8
    max_iterations: int = 500
    inner_tol: float = 1e-10
    # the outer loop relinearizes anyway, so inexact inner solves trade
    # almost no final accuracy for a large speedup
    max_inner_iterations: int = 40
    num_random_restarts: int = 6
    seed: int = 0


@dataclass(frozen=True)
class IwfOptions:
    tol: float = 1e-8
    max_sweeps: int = 200


@dataclass(frozen=True)
class PsoOptions:
    num_particles: int = 50
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    max_iterations: int = 300
    seed: int = 0


def coupling_from_assignment(h_a, assignment: StreamAssignment, noise_power_w: float,
                             budget_w: float) -> CouplingMatrix:
    """Build stream coupling gains from the selected harmonic entries.

    a_k = |H_a[r_k, c_k]|^2 and b_{k,m} = |H_a[r_k, c_m]|^2 for m != k: the
    interference stream m causes at receive harmonic r_k.
    """
    entries = h_a.entries if isinstance(h_a, WavenumberChannel) else np.asarray(
        h_a, dtype=np.complex128)
    rows = [r for r, _ in assignment.pairs]
    cols = [c for _, c in assignment.pairs]
    n_r, n_t = entries.shape
    if any(not (0 <= r < n_r) for r in rows) or any(not (0 <= c < n_t) for c in cols):
        raise IndexOutOfRangeError(
            f"assignment pairs exceed channel shape {entries.shape}"
        )
    sub = entries[np.ix_(rows, cols)]
    g = sub.real ** 2 + sub.imag ** 2
    a = np.diagonal(g).copy()
    b = g.copy()
    np.fill_diagonal(b, 0.0)
    return CouplingMatrix(direct_gains=a, cross_gains=b,
                          noise_power_w=noise_power_w, budget_w=budget_w)


def _validated_powers(coupling: CouplingMatrix, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (coupling.num_streams,):
        raise ValueError(f"power vector shape {p.shape} does not match "
                         f"{coupling.num_streams} streams")
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("power vector contains NaN or infinity")
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    return p


def capacity_objective(coupling: CouplingMatrix, p) -> float:
    """Sum rate in bits with interference treated as noise."""
    p = _validated_powers(coupling, p)
    return _objective_unchecked(coupling, p)


def _objective_unchecked(coupling: CouplingMatrix, p: np.ndarray) -> float:
    # hot-loop twin of capacity_objective: iterates are already feasible
    sinr = coupling.direct_gains * p / (
        coupling.cross_gains @ p + coupling.noise_power_w)
    return float(np.log2(1.0 + sinr).sum())


def waterfill(gains, budget: float, noise) -> np.ndarray:
    """Classical water-filling: p_k = max(0, mu - noise_k/gains_k).

    The level mu is found in closed form after sorting the per-channel
    floors; the budget is exhausted exactly.  ``noise`` may be a scalar or a
    per-channel vector; zero-gain channels receive nothing.
    """
    g = np.asarray(gains, dtype=np.float64)
    if budget <= 0:
        raise ValueError("budget must be positive")
    noise_vec = np.broadcast_to(np.asarray(noise, dtype=np.float64), g.shape)
    if np.any(noise_vec <= 0):
        raise ValueError("noise must be positive")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(noise_vec))):
        raise NonFiniteError("waterfill inputs contain NaN or infinity")
    if np.any(g < 0):
        raise ValueError("gains must be non-negative")
    p = np.zeros_like(g)
    active = np.flatnonzero(g > 0)
    if active.size == 0:
        return p
    floors = noise_vec[active] / g[active]
    order = np.argsort(floors, kind="stable")
    sorted_floors = floors[order]
    prefix = np.cumsum(sorted_floors)
    m = active.size
    # largest m whose water level clears the m-th floor
    while m > 1 and (budget + prefix[m - 1]) / m <= sorted_floors[m - 1]:
        m -= 1
    level = (budget + prefix[m - 1]) / m
    filled = np.maximum(0.0, level - floors)
    p[active] = filled
    return p


_KS_CACHE: dict = {}


def project_budget(x, budget: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p <= budget}.

    Clipping suffices when the clipped point fits the budget; otherwise the
    projection lands on the equality face, found by the sorted-threshold
    method.  Small vectors take a scalar path: below numpy's unrolling
    threshold its reductions are the same left-to-right folds, so the two
    paths agree bit for bit while the scalar one skips the dispatch
    overhead that dominates at this size.
    """
    if not (isinstance(x, np.ndarray) and x.dtype == np.float64):
        x = np.asarray(x, dtype=np.float64)
    if x.size <= 6:
        xs = x.tolist()
        if not any(xi != xi for xi in xs):    # NaN falls through to numpy
            total = 0.0
            clipped = []
            for xi in xs:
                ci = xi if xi > 0.0 else 0.0
                clipped.append(ci)
                total += ci
            if total <= budget:
                return np.array(clipped)
            acc = 0.0
            rho_css = 0.0
            rho = 0
            for i, ui in enumerate(sorted(xs, reverse=True)):
                acc += ui
                c = acc - budget
                if ui - c / (i + 1.0) > 0.0:
                    rho = i
                    rho_css = c
            theta = rho_css / (rho + 1)
            return np.array([xi - theta if xi - theta > 0.0 else 0.0
                             for xi in xs])
    clipped = np.maximum(x, 0.0)
    if clipped.sum() <= budget:
        return clipped
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    css -= budget
    ks = _KS_CACHE.get(x.size)
    if ks is None:
        ks = _KS_CACHE.setdefault(x.size,
                                  np.arange(1, x.size + 1, dtype=np.float64))
    rho = int((u - css / ks > 0).nonzero()[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(x - theta, 0.0)


def _signal_terms(coupling: CouplingMatrix, p: np.ndarray) -> np.ndarray:
    return coupling.direct_gains * p + coupling.cross_gains @ p + coupling.noise_power_w


def _interference_terms(coupling: CouplingMatrix, p: np.ndarray) -> np.ndarray:
    return coupling.cross_gains @ p + coupling.noise_power_w


def _concave_part(coupling: CouplingMatrix, p: np.ndarray) -> float:
    return float(np.log2(_signal_terms(coupling, p)).sum())


def _concave_part_grad(coupling: CouplingMatrix, p: np.ndarray) -> np.ndarray:
    inv = 1.0 / (_signal_terms(coupling, p) * _LN2)
    return coupling.direct_gains * inv + coupling.cross_gains.T @ inv


def _subtracted_part_grad(coupling: CouplingMatrix, p: np.ndarray) -> np.ndarray:
    inv = 1.0 / (_interference_terms(coupling, p) * _LN2)
    return coupling.cross_gains.T @ inv


def _maximize_surrogate(coupling: CouplingMatrix, p_t: np.ndarray,
                        opts: DcOptions) -> np.ndarray:
    """Projected-gradient ascent on the linearized lower bound at p_t.

    The surrogate phi(p) = g(p) - <grad_h(p_t), p> (constants dropped) is
    concave.  Armijo backtracking with step-size memory: the first trial
    step moves about one budget length (gradients scale like 1/noise, so a
    unit step would overshoot by many orders), and each later search starts
    from double the last accepted step.  Every accepted move raises the
    surrogate, which is all the outer ascent guarantee needs.
    """
    budget = coupling.budget_w
    a = coupling.direct_gains
    b = coupling.cross_gains
    b_t = b.T
    noise = coupling.noise_power_w
    lin = _subtracted_part_grad(coupling, p_t)
    p = p_t
    # the loop bodies below are _concave_part / _concave_part_grad spelled
    # out inline; at small stream counts the call overhead dominates
    value = float(np.log2(a * p + b @ p + noise).sum()) - float(lin @ p)
    step = 0.0
    shift_tol = opts.inner_tol * max(1.0, budget)
    for _ in range(opts.max_inner_iterations):
        inv = 1.0 / ((a * p + b @ p + noise) * _LN2)
        grad = a * inv + b_t @ inv - lin
        gnorm = math.sqrt(grad.dot(grad))
        if gnorm == 0.0:
            break
        step = budget / gnorm if step == 0.0 else 2.0 * step
        moved = False
        for _ in range(60):
            cand = project_budget(p + step * grad, budget)
            shift = cand - p
            if math.sqrt(shift.dot(shift)) <= shift_tol:
                break
            cand_value = (float(np.log2(a * cand + b @ cand + noise).sum())
                          - float(lin @ cand))
            if cand_value >= value + 1e-4 * float(grad @ shift):
                if cand_value > value:
                    p, value, moved = cand, cand_value, True
                break
            step *= 0.5
        if not moved:
            break
    return p


_GREEDY_SNAPSHOT_SIZES = (2, 3, 4, 6, 8, 12, 16, 24, 32)
# below this stream count the subset space is small enough that the other
# start families already cover it, and the extra solves dominate runtime
_GREEDY_MIN_STREAMS = 8


def _greedy_prefix_starts(coupling: CouplingMatrix, sizes=_GREEDY_SNAPSHOT_SIZES) -> list:
    """Equal-power starts over greedily grown interference-aware subsets.

    Grows an active set from the strongest direct gain, each step inserting
    the stream that maximizes the true objective under an equal split over
    the enlarged set, and snapshots the split at the requested sizes.  Unlike
    ranking by direct gain alone, this keeps mutually interfering streams out
    of the same start.
    """
    k = coupling.num_streams
    budget = coupling.budget_w
    a = coupling.direct_gains
    b = coupling.cross_gains
    noise = coupling.noise_power_w
    targets = sorted({min(s, k) for s in sizes})
    if targets[-1] < 2:
        return []
    active = [int(np.argmax(a))]
    starts = []
    while len(active) < targets[-1]:
        s = len(active)
        q = budget / (s + 1.0)
        # interference each stream receives from the current active set
        base = q * b[:, active].sum(axis=1)
        # candidate m joins: members k in active see base_k + q*b[k, m],
        # m itself sees base_m (cross gains have a zero diagonal)
        member_i = base[active][:, None] + q * b[np.ix_(active, range(k))]
        member_rate = (np.log2(a[active][:, None] * q + member_i + noise)
                       - np.log2(member_i + noise)).sum(axis=0)
        cand_rate = np.log2(a * q + base + noise) - np.log2(base + noise)
        score = member_rate + cand_rate
        score[active] = -np.inf
        active.append(int(np.argmax(score)))
        if len(active) in targets:
            p = np.zeros(k)
            p[active] = budget / len(active)
            starts.append(p)
    return starts


def _dc_starts(coupling: CouplingMatrix, opts: DcOptions) -> list:
    """Restart points for the surrogate ascent.

    Dense starts (equal split, water-filling, random simplex draws) tend to
    settle into many-stream optima that interference keeps mediocre, while
    sparse starts explore the opposite regime, so both families are included:
    the classic equal/water-filling/random set first, then the iterative
    water-filling point, equal splits over the j strongest direct gains for
    doubling j, and — at stream counts large enough for subset choice to
    bind — equal splits over greedily grown interference-aware subsets.
    """
    k = coupling.num_streams
    budget = coupling.budget_w
    starts = [np.full(k, budget / k)]
    starts.append(waterfill(coupling.direct_gains, budget, coupling.noise_power_w))
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.num_random_restarts):
        starts.append(budget * rng.dirichlet(np.ones(k)))
    starts.append(allocate_iwf(coupling).powers_w)
    order = np.argsort(-coupling.direct_gains, kind="stable")
    j = 1
    while j < k:
        p = np.zeros(k)
        p[order[:j]] = budget / j
        starts.append(p)
        j *= 2
    if k >= _GREEDY_MIN_STREAMS:
        starts.extend(_greedy_prefix_starts(coupling))
    return starts


def allocate_dc(coupling: CouplingMatrix, opts: DcOptions = DcOptions()) -> PowerAllocation:
    """Interference-aware allocation by successive concave surrogates.

    Writes the rate as g(p) - h(p) with both parts concave, linearizes h at
    the current iterate, and maximizes the resulting concave lower bound
    over the budget simplex.  The true objective is nondecreasing across
    iterations by construction.  Runs from several structured and random
    starts and returns the best, first index winning ties.
    """
    starts = _dc_starts(coupling, opts)
    best_f, best_p, best_converged = -np.inf, None, False
    histories = []
    seen_starts = set()
    for p0 in starts:
        p = project_budget(p0, coupling.budget_w)
        key = p.tobytes()
        if key in seen_starts:
            continue  # identical start, identical deterministic trajectory
        seen_starts.add(key)
        f = _objective_unchecked(coupling, p)
        history = [f]
        converged = False
        for _ in range(opts.max_iterations):
            p_new = _maximize_surrogate(coupling, p, opts)
            f_new = _objective_unchecked(coupling, p_new)
            if f_new < f:
                break  # finite-precision regression: keep the better iterate
            history.append(f_new)
            gain = f_new - f
            p, f = p_new, f_new
            if gain < opts.tol_rel * max(1.0, abs(f)):
                converged = True
                break
        histories.append(tuple(history))
        if f > best_f:
            best_f, best_p, best_converged = f, p, converged
    return PowerAllocation(
        powers_w=best_p,
        slacks=coupling.cross_gains @ best_p,
        achieved_capacity_bits=best_f,
        converged=best_converged,
        histories=tuple(histories),
    )


def allocate_iwf(coupling: CouplingMatrix, opts: IwfOptions = IwfOptions()) -> PowerAllocation:
    """Iterative water-filling: refill against the current interference.

    Each sweep freezes per-stream interference as extra noise and re-solves
    the joint water-fill over the full budget.  Returns the best iterate
    seen (the equal split included), with a convergence flag instead of an
    error when the sweep cap is hit.
    """
    k = coupling.num_streams
    budget = coupling.budget_w
    p = np.full(k, budget / k)
    f = _objective_unchecked(coupling, p)
    best_p, best_f = p, f
    history = [f]
    converged = False
    for _ in range(opts.max_sweeps):
        noise_vec = coupling.cross_gains @ p + coupling.noise_power_w
        p_new = waterfill(coupling.direct_gains, budget, noise_vec)
        f_new = _objective_unchecked(coupling, p_new)
        history.append(f_new)
        if f_new > best_f:
            best_f, best_p = f_new, p_new
        if np.max(np.abs(p_new - p)) <= opts.tol:
            converged = True
            break
        p = p_new
    return PowerAllocation(
        powers_w=best_p,
        slacks=coupling.cross_gains @ best_p,
        achieved_capacity_bits=best_f,
        converged=converged,
        histories=(tuple(history),),
    )


def _project_rows(x: np.ndarray, budget: float) -> np.ndarray:
    """Row-wise budget-simplex projection (vectorized project_budget)."""
    clipped = np.maximum(x, 0.0)
    over = clipped.sum(axis=1) > budget
    if not np.any(over):
        return clipped
    xo = x[over]
    u = np.sort(xo, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - budget
    ks = np.arange(1, x.shape[1] + 1)
    positive = u - css / ks > 0
    rho = x.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    theta = css[np.arange(xo.shape[0]), rho] / (rho + 1)
    clipped[over] = np.maximum(xo - theta[:, None], 0.0)
    return clipped


def _swarm_objective(coupling: CouplingMatrix, positions: np.ndarray) -> np.ndarray:
    interference = positions @ coupling.cross_gains.T
    sinr = coupling.direct_gains[None, :] * positions / (
        interference + coupling.noise_power_w)
    return np.sum(np.log2(1.0 + sinr), axis=1)


def allocate_pso(coupling: CouplingMatrix, opts: PsoOptions = PsoOptions()) -> PowerAllocation:
    """Global-best particle swarm over the budget simplex.

    Positions are re-projected after every move, so all evaluations are
    feasible; the returned point is the best ever evaluated.
    """
    k = coupling.num_streams
    budget = coupling.budget_w
    rng = np.random.default_rng(opts.seed)
    positions = _project_rows(rng.uniform(0.0, budget, size=(opts.num_particles, k)), budget)
    velocities = np.zeros_like(positions)
    values = _swarm_objective(coupling, positions)
    pbest_pos = positions.copy()
    pbest_val = values.copy()
    g_idx = int(np.argmax(values))
    gbest_pos = positions[g_idx].copy()
    gbest_val = float(values[g_idx])
    for _ in range(opts.max_iterations):
        r1 = rng.uniform(size=(opts.num_particles, k))
        r2 = rng.uniform(size=(opts.num_particles, k))
        velocities = (opts.inertia * velocities
                      + opts.cognitive * r1 * (pbest_pos - positions)
                      + opts.social * r2 * (gbest_pos[None, :] - positions))
        positions = _project_rows(positions + velocities, budget)
        values = _swarm_objective(coupling, positions)
        improved = values > pbest_val
        pbest_pos[improved] = positions[improved]
        pbest_val[improved] = values[improved]
        cand = int(np.argmax(values))
        if values[cand] > gbest_val:
            gbest_val = float(values[cand])
            gbest_pos = positions[cand].copy()
    return PowerAllocation(
        powers_w=gbest_pos,
        slacks=coupling.cross_gains @ gbest_pos,
        achieved_capacity_bits=gbest_val,
        converged=True,
        histories=(),
    )
