"""Discrete optimal transport with an L1 ground metric.

Distributions are non-parametric: probability masses on a shared set of
real-vector atoms.  The exact solver is a network simplex for the balanced
transportation problem and returns optimal dual potentials, which drive the
weight gradient used by the bound-minimizing estimators.  A log-domain
Sinkhorn solver is provided as a smooth alternative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalFailureError, SchemaViolationError

__all__ = [
    "AtomSet",
    "DiscreteDistribution",
    "CostMatrix",
    "TransportSolution",
    "l1_cost_matrix",
    "w1_exact",
    "w1_entropic",
    "mixture",
    "w1_weight_gradient",
    "align_to_union",
]

# Mass-balance slack accepted by the exact solver.
BALANCE_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


class AtomSet:
    """Ordered collection of distinct atoms (real vectors of equal dimension).

    Atoms carry the cause coordinates; they may mix units (years, half-hot
    categorical coordinates).  Duplicate coordinates are not representable:
    merge masses before construction (see DiscreteDistribution.from_points).
    """

    def __init__(self, points) -> None:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("atoms must form a non-empty (n, d) array with d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atoms must be finite")
        pts = pts + 0.0  # canonicalize -0.0 so atom identity is bytewise
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] != pts.shape[0]:
            raise ValueError(
                "duplicate atoms; merge masses first (DiscreteDistribution.from_points)"
            )
        self.points = _readonly(pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def same_as(self, other: "AtomSet") -> bool:
        """True when both sets hold identical atoms in identical order."""
        return self is other or np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"AtomSet(n={len(self)}, d={self.dimension})"


class DiscreteDistribution:
    """Probability masses on the atoms of an AtomSet.

    Masses are renormalized on construction; they must be non-negative and
    sum to a positive total.
    """

    def __init__(self, atom_set: AtomSet, probs) -> None:
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != (len(atom_set),):
            raise ValueError(
                f"probs has length {p.size}, atom set has {len(atom_set)} atoms"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("probs must be finite")
        if np.any(p < 0):
            raise ValueError("probs must be non-negative")
        total = float(p.sum())
        if total <= 0:
            raise ValueError("probs must have positive total mass")
        if abs(total - 1.0) > 1e-12:
            p = p / total
        self.atom_set = atom_set
        self.probs = _readonly(p)

    @classmethod
    def from_points(cls, points, masses) -> "DiscreteDistribution":
        """Build from raw (point, mass) pairs, merging duplicate points.

        Duplicates keep the position of their first occurrence and their
        masses are summed.
        """
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        m = np.asarray(masses, dtype=np.float64)
        if pts.shape[0] != m.size:
            raise ValueError("points and masses must have equal length")
        _, first, inverse = np.unique(
            pts, axis=0, return_index=True, return_inverse=True
        )
        order = np.argsort(first)  # unique rows in first-occurrence order
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        merged = np.zeros(order.size, dtype=np.float64)
        np.add.at(merged, rank[inverse], m)
        return cls(AtomSet(pts[np.sort(first)]), merged)

    def __len__(self) -> int:
        return len(self.atom_set)

    @property
    def dimension(self) -> int:
        return self.atom_set.dimension

    def __repr__(self) -> str:
        return f"DiscreteDistribution(n={len(self)}, d={self.dimension})"


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise ground costs between a source and a target atom set."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _readonly(self.entries))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def l1_cost_matrix(source: AtomSet, target: AtomSet) -> CostMatrix:
    """L1 distances between every source atom and every target atom."""
    if source.dimension != target.dimension:
        raise SchemaViolationError(
            f"atom dimension mismatch: source d={source.dimension}, "
            f"target d={target.dimension}"
        )
    diff = source.points[:, None, :] - target.points[None, :, :]
    return CostMatrix(np.abs(diff).sum(axis=2))


@dataclass(frozen=True)
class TransportSolution:
    """Optimal (or entropically regularized) transport between two distributions.

    value is the transported cost sum(plan * cost).  dual_source/dual_target
    are the potentials (phi, psi); psi is normalized to 0 at the first target
    atom with positive mass.  For the entropic solver, regularized_value holds
    the converged smooth objective <phi, p> + <psi, q>, whose exact weight
    gradient the dual potentials are.
    """

    value: float
    plan: np.ndarray
    dual_source: np.ndarray
    dual_target: np.ndarray
    method: str = "exact"
    marginal_error: float = 0.0
    iterations: int = 0
    converged: bool = True
    regularized_value: float | None = None

    def __post_init__(self) -> None:
        for name in ("plan", "dual_source", "dual_target"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


def _validate_pair(
    p: DiscreteDistribution, q: DiscreteDistribution, cost: CostMatrix
) -> None:
    if cost.shape != (len(p), len(q)):
        raise ValueError(
            f"cost matrix shape {cost.shape} does not match "
            f"distribution sizes ({len(p)}, {len(q)})"
        )


# ---------------------------------------------------------------------------
# Exact solver: network simplex for the balanced transportation problem.
# ---------------------------------------------------------------------------


def _northwest_corner(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Initial basic feasible solution plus its tree duals (vectorized).

    The northwest-corner staircase is the merge of the two cumulative-mass
    sequences: every interior partial sum is an event advancing either the
    row or the column, giving exactly m+n-1 basic cells forming a spanning
    tree (ties advance the row first; zero masses yield zero-flow cells).
    Because each new cell shares its row or column with the previous one,
    the dual equations u_i + v_k = c_ik solve along the walk with u_0 = 0.
    """
    m, n = a.size, b.size
    ca = np.cumsum(a)[:-1] if m > 1 else np.empty(0)
    cb = np.cumsum(b)[:-1] if n > 1 else np.empty(0)
    vals = np.concatenate([ca, cb])
    side = np.concatenate(
        [np.zeros(m - 1, dtype=np.int8), np.ones(n - 1, dtype=np.int8)]
    )
    order = np.lexsort((side, vals))
    is_row_event = order < m - 1
    bounds = np.concatenate([[0.0], vals[order], [float(a.sum())]])
    flows = np.maximum(np.diff(bounds), 0.0)
    rows = np.zeros(m + n - 1, dtype=np.int64)
    cols = np.zeros(m + n - 1, dtype=np.int64)
    rows[1:] = np.cumsum(is_row_event)
    cols[1:] = np.cumsum(~is_row_event)
    u = np.empty(m, dtype=np.float64)
    v = np.empty(n, dtype=np.float64)
    u[0] = 0.0
    if m > 1:
        handover = np.flatnonzero(is_row_event)  # cell left when the row advances
        hr = rows[handover]
        hc = cols[handover]
        u[1:] = np.cumsum(C[hr + 1, hc] - C[hr, hc])
    first_col_cell = np.concatenate(
        [[0], np.flatnonzero(~is_row_event) + 1]
    ).astype(np.int64)
    fr = rows[first_col_cell]
    fc = cols[first_col_cell]
    v[fc] = C[fr, fc] - u[fr]
    return rows, cols, flows, u, v


def _tree_duals(rows, cols, flows, m: int, n: int, C: np.ndarray):
    """Dual potentials of an arbitrary basis tree (u at node 0 fixed to 0)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(m + n)]
    for idx in range(rows.size):
        src = int(rows[idx])
        snk = m + int(cols[idx])
        adj[src].append((snk, idx))
        adj[snk].append((src, idx))
    u = np.empty(m, dtype=np.float64)
    v = np.empty(n, dtype=np.float64)
    seen = np.zeros(m + n, dtype=bool)
    u[0] = 0.0
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        for other, idx in adj[node]:
            if seen[other]:
                continue
            seen[other] = True
            i, k = int(rows[idx]), int(cols[idx])
            if other >= m:
                v[other - m] = C[i, k] - u[i]
            else:
                u[other] = C[i, k] - v[k]
            stack.append(other)
    if not seen.all():
        raise NumericalFailureError("transportation basis is not a spanning tree")
    return u, v, adj


def _tree_path(adj, start: int, goal: int, nnodes: int):
    """Node path from start to goal in the basis tree, with the arc indices."""
    parent = np.full(nnodes, -1, dtype=np.int64)
    parent_arc = np.full(nnodes, -1, dtype=np.int64)
    seen = np.zeros(nnodes, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for other, idx in adj[node]:
            if not seen[other]:
                seen[other] = True
                parent[other] = node
                parent_arc[other] = idx
                stack.append(other)
    arcs = []
    node = goal
    while node != start:
        arcs.append(int(parent_arc[node]))
        node = int(parent[node])
    arcs.reverse()  # ordered from start towards goal
    return arcs


def _network_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Solve min <pi, C> s.t. pi >= 0, row sums a, column sums b.

    Returns (rows, cols, flows, u, v): the optimal basis and dual potentials.
    Deterministic: entering arc is the most negative reduced cost with
    row-major tie-breaking, falling back to Bland's rule (first negative
    arc) whenever degenerate pivots stall progress.
    """
    m, n = a.size, b.size
    rows, cols, flows, u, v = _northwest_corner(a, b, C)
    opt_tol = min(1e-8, 1e-10 * max(1.0, float(C.max()) if C.size else 1.0))
    adj = None
    max_pivots = 200 * (m + n) ** 2 + 1000
    degen_limit = 4 * (m + n)
    degen_streak = 0
    bland = False
    for _pivot in range(max_pivots):
        R = C - u[:, None] - v[None, :]
        if bland:
            negative = np.flatnonzero(R.ravel() < -opt_tol)
            if negative.size == 0:
                return rows, cols, flows, u, v
            ie, ke = divmod(int(negative[0]), n)
        else:
            flat = int(np.argmin(R))
            ie, ke = divmod(flat, n)
            if R[ie, ke] >= -opt_tol:
                return rows, cols, flows, u, v
        if adj is None:
            adj = [[] for _ in range(m + n)]
            for idx in range(rows.size):
                adj[int(rows[idx])].append((m + int(cols[idx]), idx))
                adj[m + int(cols[idx])].append((int(rows[idx]), idx))
        path = _tree_path(adj, ie, m + ke, m + n)
        # Around the cycle (entering arc gets +theta) the path arcs starting
        # at the entering row alternate -, +, -, ... ending on - at the
        # entering column.
        minus = path[0::2]
        theta = np.inf
        leave = -1
        for idx in minus:
            fl = flows[idx]
            if fl < theta or (
                fl == theta
                and (rows[idx], cols[idx]) < (rows[leave], cols[leave])
            ):
                theta = fl
                leave = idx
        flows[minus] -= theta
        flows[path[1::2]] += theta
        rows[leave] = ie
        cols[leave] = ke
        flows[leave] = theta
        if theta <= 1e-15:
            degen_streak += 1
            if degen_streak > degen_limit:
                bland = True
        else:
            degen_streak = 0
            bland = False
        u, v, adj = _tree_duals(rows, cols, flows, m, n, C)
    raise NumericalFailureError(
        "transportation network simplex did not converge "
        f"within {max_pivots} pivots"
    )


def _normalize_duals(u: np.ndarray, v: np.ndarray, b: np.ndarray):
    """Shift duals so psi is 0 at the first target atom with positive mass."""
    positive = np.flatnonzero(b > 0)
    anchor = int(positive[0]) if positive.size else 0
    shift = v[anchor]
    return u + shift, v - shift


class _WarmTransport:
    """Repeated exact solves against a fixed source and cost as the target
    marginal moves.

    Caches recent optimal basis trees: flows on a spanning tree are linear
    in the marginals, so whenever a cached tree's recomputed flows stay
    non-negative it is still an optimal basis (costs, duals, and reduced
    costs are unchanged) and the solve is a single small matvec.  A
    subgradient descent oscillating near a kink revisits few bases, so the
    cache converts almost every epoch into the cheap path.
    """

    CACHE_SIZE = 8
    EAGER_BUILDS = 3  # flow maps built on first sight before gating kicks in
    MAX_FAILURES = 100  # consecutive infeasibilities before a map is dropped

    def __init__(self, p: np.ndarray, C: np.ndarray) -> None:
        self._p = np.asarray(p, dtype=np.float64)
        self._C = np.asarray(C, dtype=np.float64)
        # signature -> None (basis seen once, no map yet) or a mutable
        # [base_flows, q_map, arc_costs, psi, consecutive_failures] entry;
        # most recently used first.  Degenerate problems keep hitting an old
        # feasible tree, while drifting descents shed maps that stop
        # helping and fall back to plain cold solves.
        self._cache: dict[bytes, Optional[list]] = {}
        self._eager_left = self.EAGER_BUILDS

    def solve(self, q: np.ndarray) -> tuple[float, np.ndarray]:
        """Exact W1 value and normalized target-side dual potential."""
        stale: list[bytes] = []
        for sig, entry in self._cache.items():
            if entry is None:
                continue
            flows = entry[0] + entry[1] @ q
            if flows.min() >= -1e-12:
                np.maximum(flows, 0.0, out=flows)
                entry[4] = 0
                self._touch(sig)
                return float(np.dot(flows, entry[2])), entry[3]
            entry[4] += 1
            if entry[4] > self.MAX_FAILURES:
                stale.append(sig)
        for sig in stale:
            del self._cache[sig]
        value, rows, cols, flows, _, v = _w1_exact_core(self._p, q, self._C)
        sig = rows.tobytes() + cols.tobytes()
        entry = self._cache.get(sig)
        if entry is None:
            # Invest in the flow map when the basis recurs (or while the
            # eager budget lasts); otherwise just mark the signature.
            if sig in self._cache or self._eager_left > 0:
                if sig not in self._cache:
                    self._eager_left -= 1
                self._cache[sig] = self._basis_entry(rows, cols, v)
            else:
                self._cache[sig] = None
        self._touch(sig)
        while len(self._cache) > self.CACHE_SIZE:
            self._cache.pop(next(reversed(self._cache)))
        return value, v

    def _touch(self, sig: bytes) -> None:
        if next(iter(self._cache)) == sig:
            return
        entry = self._cache.pop(sig)
        self._cache = {sig: entry, **self._cache}

    def _basis_entry(self, rows, cols, psi) -> tuple:
        m = self._p.size
        nnodes = m + psi.size
        n_arcs = rows.size
        deg = np.zeros(nnodes, dtype=np.int64)
        arc_of: list[list[int]] = [[] for _ in range(nnodes)]
        endpoints = []
        for idx in range(n_arcs):
            s, t = int(rows[idx]), m + int(cols[idx])
            deg[s] += 1
            deg[t] += 1
            arc_of[s].append(idx)
            arc_of[t].append(idx)
            endpoints.append((s, t))
        # Leaf elimination expresses every arc flow as a fixed signed sum of
        # node budgets; record the combinations as one matrix.
        acc = np.eye(nnodes)
        flow_map = np.empty((n_arcs, nnodes))
        alive = np.ones(n_arcs, dtype=bool)
        queue = [x for x in range(nnodes) if deg[x] == 1]
        while queue:
            x = queue.pop()
            arc = next((i for i in arc_of[x] if alive[i]), None)
            if arc is None:
                continue
            flow_map[arc] = acc[x]
            alive[arc] = False
            s, t = endpoints[arc]
            other = t if x == s else s
            acc[other] -= acc[x]
            deg[other] -= 1
            deg[x] -= 1
            if deg[other] == 1:
                queue.append(other)
        base_flows = flow_map[:, :m] @ self._p
        q_map = np.ascontiguousarray(flow_map[:, m:])
        return [base_flows, q_map, self._C[rows, cols], psi.copy(), 0]


def _w1_exact_core(p: np.ndarray, q: np.ndarray, C: np.ndarray):
    """Exact W1 and normalized duals without materializing the plan."""
    mass_gap = abs(float(p.sum()) - float(q.sum()))
    if mass_gap > BALANCE_TOL:
        raise ValueError(
            f"unbalanced masses: totals differ by {mass_gap:.3e} (> {BALANCE_TOL})"
        )
    rows, cols, flows, u, v = _network_simplex(p, q, C)
    value = float(np.dot(flows, C[rows, cols]))
    u, v = _normalize_duals(u, v, q)
    return value, rows, cols, flows, u, v


def w1_exact(
    p: DiscreteDistribution, q: DiscreteDistribution, cost: CostMatrix
) -> TransportSolution:
    """Exact L1-ground-metric Wasserstein distance between p and q.

    Solves the balanced transportation problem to optimality and returns the
    plan together with optimal dual potentials.  Deterministic for fixed
    input.
    """
    _validate_pair(p, q, cost)
    value, rows, cols, flows, u, v = _w1_exact_core(
        p.probs, q.probs, cost.entries
    )
    plan = np.zeros(cost.shape, dtype=np.float64)
    plan[rows, cols] = flows
    err = max(
        float(np.abs(plan.sum(axis=1) - p.probs).max()),
        float(np.abs(plan.sum(axis=0) - q.probs).max()),
    )
    return TransportSolution(
        value=value,
        plan=plan,
        dual_source=u,
        dual_target=v,
        method="exact",
        marginal_error=err,
    )


# ---------------------------------------------------------------------------
# Entropic solver: log-domain Sinkhorn.
# ---------------------------------------------------------------------------


def _logsumexp(A: np.ndarray, axis: int) -> np.ndarray:
    M = np.max(A, axis=axis, keepdims=True)
    M = np.where(np.isfinite(M), M, 0.0)
    with np.errstate(over="ignore", divide="ignore"):
        out = np.log(np.sum(np.exp(A - M), axis=axis))
    return out + np.squeeze(M, axis=axis)


def w1_entropic(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    cost: CostMatrix,
    epsilon: float,
    max_iter: int = 10000,
    tol: float = 1e-9,
) -> TransportSolution:
    """Entropically regularized transport via log-domain Sinkhorn scaling.

    Iterates the alternating potential updates until the worst marginal
    violation drops below tol or max_iter is reached (reported through
    marginal_error / iterations / converged).  The log-domain form cannot
    underflow, so any epsilon > 0 is admissible.  value is the transported
    cost of the returned plan; regularized_value is the converged smooth
    objective whose gradient in the target masses equals dual_target.
    """
    _validate_pair(p, q, cost)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a, b, C = p.probs, q.probs, cost.entries
    with np.errstate(divide="ignore"):
        loga = np.log(a)
        logb = np.log(b)
    f = np.where(a > 0, 0.0, -np.inf)
    g = np.where(b > 0, 0.0, -np.inf)
    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = epsilon * (loga - _logsumexp((g[None, :] - C) / epsilon, axis=1))
        g = epsilon * (logb - _logsumexp((f[:, None] - C) / epsilon, axis=0))
        plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
        err = max(
            float(np.abs(plan.sum(axis=1) - a).max()),
            float(np.abs(plan.sum(axis=0) - b).max()),
        )
        if err <= tol:
            break
    plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    value = float((plan * C).sum())
    sup_a, sup_b = a > 0, b > 0
    reg_value = float(f[sup_a] @ a[sup_a] + g[sup_b] @ b[sup_b])
    # Zero-mass atoms get the soft c-transform of the opposite potential so
    # that the reported duals stay finite (and dual-feasible).
    if np.any(b <= 0):
        g_soft = -epsilon * _logsumexp((f[:, None] - C) / epsilon, axis=0)
        g = np.where(b > 0, g, g_soft)
    if np.any(a <= 0):
        f_soft = -epsilon * _logsumexp((g[None, :] - C) / epsilon, axis=1)
        f = np.where(a > 0, f, f_soft)
    f, g = _normalize_duals(f, g, b)
    return TransportSolution(
        value=value,
        plan=plan,
        dual_source=f,
        dual_target=g,
        method="entropic",
        marginal_error=err,
        iterations=it,
        converged=bool(err <= tol),
        regularized_value=reg_value,
    )


# ---------------------------------------------------------------------------
# Mixtures and the weight gradient.
# ---------------------------------------------------------------------------


def _donor_matrix(donors: Sequence[DiscreteDistribution]) -> np.ndarray:
    if len(donors) == 0:
        raise ValueError("donor list must be non-empty")
    base = donors[0].atom_set
    for j, d in enumerate(donors[1:], start=1):
        if not d.atom_set.same_as(base):
            raise SchemaViolationError(
                f"donor {j} uses a different atom set; re-index donors onto "
                "a shared atom set first"
            )
    return np.stack([d.probs for d in donors])


def mixture(donors: Sequence[DiscreteDistribution], w) -> DiscreteDistribution:
    """Convex mixture of donor distributions on their shared atom set."""
    P = _donor_matrix(donors)
    wv = np.asarray(getattr(w, "values", w), dtype=np.float64)
    if wv.shape != (len(donors),):
        raise ValueError(
            f"weight length {wv.size} does not match donor count {len(donors)}"
        )
    return DiscreteDistribution(donors[0].atom_set, wv @ P)


def align_to_union(dists: Sequence[DiscreteDistribution]) -> list[DiscreteDistribution]:
    """Re-index distributions onto the union of their atom sets.

    Atoms absent from a distribution get probability 0.  When the inputs
    already share one atom set they are returned unchanged; otherwise the
    union is ordered lexicographically by coordinates, so the result does
    not depend on input order.
    """
    if len(dists) == 0:
        raise ValueError("need at least one distribution")
    base = dists[0].atom_set
    if all(d.atom_set.same_as(base) for d in dists):
        return list(dists)
    dim = base.dimension
    for d in dists:
        if d.dimension != dim:
            raise SchemaViolationError(
                f"cannot merge atom sets of dimension {d.dimension} and {dim}"
            )
    union_pts = np.unique(
        np.vstack([d.atom_set.points for d in dists]), axis=0
    )
    union = AtomSet(union_pts)
    index = {pt.tobytes(): i for i, pt in enumerate(union_pts)}
    out = []
    for d in dists:
        probs = np.zeros(len(union), dtype=np.float64)
        for pt, mass in zip(d.atom_set.points, d.probs):
            probs[index[pt.tobytes()]] = mass
        out.append(DiscreteDistribution(union, probs))
    return out


def w1_weight_gradient(
    p0: DiscreteDistribution,
    donors: Sequence[DiscreteDistribution],
    w,
    solution: TransportSolution,
) -> np.ndarray:
    """Subgradient of w -> W1(p0, sum_j w_j p_j) from the dual potentials.

    g_j = <psi, donor_j masses> with psi the target-side potential of the
    supplied solution, which must be the transport between p0 and the mixture
    at w.  Uniform shifts of psi move every g_j by the same constant and do
    not change the projected-descent trajectory.
    """
    P = _donor_matrix(donors)
    mix = mixture(donors, w)
    stale = max(
        float(np.abs(solution.plan.sum(axis=1) - p0.probs).max()),
        float(np.abs(solution.plan.sum(axis=0) - mix.probs).max()),
    )
    budget = 1e-6 if solution.method == "exact" else max(1e-6, 10.0 * solution.marginal_error)
    if stale > budget:
        raise ValueError(
            f"stale transport solution: plan marginals deviate from the "
            f"mixture at w by {stale:.3e}"
        )
    return P @ solution.dual_target
