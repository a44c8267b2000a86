"""Reachable sets of resistance forces as vector-valued transport problems.

For fixed ``lam`` the set of forces ``(R_T, R_L)`` over all admissible
scattering measures is convex.  Discretizing the angle interval into ``N``
bins turns each support value ``min <R, e>`` into a balanced ``N x N``
transportation problem with both marginals equal to the bin masses of
``cos(phi) dphi``; intersecting the half-planes ``<r, e> >= min <R, e>`` over
many directions ``e`` gives a polygon approximating the set.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptyIntersection, InfeasibleLevel, NumericalFailure
from .measures import bin_centers, gamma_masses
from .resistance import cost_ci_symm, cost_symm

log = logging.getLogger(__name__)

DEFAULT_BINS = 200
DEFAULT_DIRECTIONS = 100
# tolerance of the dual search near the ends of the torque range
LEVEL_SLACK = 1e-7


def discretize_gamma(n_bins: int) -> np.ndarray:
    """Bin masses ``sin(b_{i+1}) - sin(b_i)`` of a uniform partition."""
    if n_bins < 2:
        raise ValueError("need at least two bins")
    return gamma_masses(n_bins)


@dataclass(frozen=True)
class TransportInstance:
    marginal: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.marginal, dtype=float)
        c = np.asarray(self.cost, dtype=float)
        if c.shape != (m.size, m.size):
            raise ValueError("cost must be N x N for a marginal of length N")
        if (m <= 0).any():
            raise ValueError("marginal masses must be positive")
        if not np.isfinite(c).all():
            raise ValueError("cost must be finite")
        object.__setattr__(self, "marginal", m)
        object.__setattr__(self, "cost", c)

    @property
    def n_bins(self) -> int:
        return self.marginal.size


@dataclass(frozen=True)
class TransportPlan:
    plan: np.ndarray
    objective: float
    u: np.ndarray  # row potentials
    v: np.ndarray  # column potentials
    basis: tuple[np.ndarray, np.ndarray]  # basic cells (rows, cols)
    iterations: int = 0

    def duality_gap(self, instance: TransportInstance) -> float:
        dual = float(instance.marginal @ self.u + instance.marginal @ self.v)
        return abs(self.objective - dual)

    def min_reduced_cost(self, instance: TransportInstance) -> float:
        return float((instance.cost - self.u[:, None] - self.v[None, :]).min())


# ---------------------------------------------------------------------------
# network simplex on the bipartite transportation graph
#
# Nodes 0..N-1 are rows (supplies), N..2N-1 columns (demands).  The basis is a
# spanning tree of 2N-1 cells; cells are stored in parallel arrays.


def _northwest_corner(m):
    n = m.size
    rows, cols, flows = [], [], []
    supply, demand = m.copy(), m.copy()
    i = j = 0
    while True:
        q = min(supply[i], demand[j])
        rows.append(i)
        cols.append(j)
        flows.append(q)
        supply[i] -= q
        demand[j] -= q
        if i == n - 1 and j == n - 1:
            break
        # advance exactly one index so the tree stays spanning when both empty
        if j == n - 1 or (i < n - 1 and supply[i] <= demand[j]):
            i += 1
        else:
            j += 1
    return np.array(rows), np.array(cols), np.array(flows)


def _tree_flows(m, rows, cols):
    """Flows on a spanning-tree basis, by repeated leaf elimination."""
    n = m.size
    excess = np.concatenate([m, -m])  # rows supply, columns absorb
    deg = np.zeros(2 * n, dtype=int)
    adj: list[list[int]] = [[] for _ in range(2 * n)]
    for a, (i, j) in enumerate(zip(rows, cols)):
        adj[i].append(a)
        adj[n + j].append(a)
        deg[i] += 1
        deg[n + j] += 1
    flows = np.zeros(len(rows))
    done = np.zeros(len(rows), dtype=bool)
    leaves = deque(k for k in range(2 * n) if deg[k] == 1)
    while leaves:
        k = leaves.popleft()
        if deg[k] != 1:
            continue
        a = next(a for a in adj[k] if not done[a])
        other = n + cols[a] if k < n else rows[a]
        f = excess[k] if k < n else -excess[k]
        flows[a] = f
        done[a] = True
        excess[k] = 0.0
        excess[other] += f if other >= n else -f
        deg[k] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            leaves.append(other)
    return flows


@njit(cache=True)
def _simplex_core(cost, rows, cols, flows, max_iter, stall, tol):
    """Pivot loop; updates the basis in place.

    Returns ``(status, iterations, potentials)`` with status 0 optimal,
    1 iteration budget exhausted, 2 basis not spanning.
    """
    n = cost.shape[0]
    nn = 2 * n
    n_arcs = rows.size
    pot = np.zeros(nn)
    parent = np.full(nn, -1, np.int64)
    depth = np.full(nn, -1, np.int64)
    head = np.zeros(nn + 1, np.int64)
    fill = np.zeros(nn, np.int64)
    adj = np.zeros(2 * n_arcs, np.int64)
    queue = np.zeros(nn, np.int64)
    minus = np.zeros(nn, np.int64)
    plus = np.zeros(nn, np.int64)
    block = max(n, 16)
    cursor = 0
    degenerate_run = 0
    it = 0
    while True:
        # adjacency of the current tree in CSR form
        head[:] = 0
        for a in range(n_arcs):
            head[rows[a] + 1] += 1
            head[n + cols[a] + 1] += 1
        for k in range(nn):
            head[k + 1] += head[k]
        fill[:] = head[:nn]
        for a in range(n_arcs):
            adj[fill[rows[a]]] = a
            fill[rows[a]] += 1
            adj[fill[n + cols[a]]] = a
            fill[n + cols[a]] += 1
        # potentials by breadth-first search from row 0
        depth[:] = -1
        depth[0] = 0
        pot[0] = 0.0
        queue[0] = 0
        qh, qt = 0, 1
        while qh < qt:
            k = queue[qh]
            qh += 1
            for p in range(head[k], head[k + 1]):
                a = adj[p]
                other = n + cols[a] if k < n else rows[a]
                if depth[other] >= 0:
                    continue
                depth[other] = depth[k] + 1
                parent[other] = a
                pot[other] = cost[rows[a], cols[a]] - pot[k]
                queue[qt] = other
                qt += 1
        if qt < nn:
            return 2, it, pot
        # pricing: best cell of the first improving block after a rotating
        # cursor, or the first improving cell under Bland's rule
        bland = degenerate_run >= stall
        best = -tol
        bi = -1
        bj = -1
        if bland:
            for flat in range(n * n):
                i = flat // n
                j = flat - i * n
                if cost[i, j] - pot[i] - pot[n + j] < -tol:
                    bi = i
                    bj = j
                    break
        else:
            scanned = 0
            while scanned < n * n:
                stop = min(scanned + block, n * n)
                while scanned < stop:
                    flat = cursor
                    i = flat // n
                    j = flat - i * n
                    r = cost[i, j] - pot[i] - pot[n + j]
                    if r < best:
                        best = r
                        bi = i
                        bj = j
                    cursor += 1
                    if cursor == n * n:
                        cursor = 0
                    scanned += 1
                if bi >= 0:
                    break
        if bi < 0:
            return 0, it, pot
        it += 1
        if it > max_iter:
            return 1, it, pot
        # cycle through the tree; arcs alternate -, + from both endpoints
        a_node = bi
        b_node = n + bj
        ka = 0
        kb = 0
        n_minus = 0
        n_plus = 0
        while a_node != b_node:
            if depth[a_node] >= depth[b_node]:
                arc = parent[a_node]
                if ka % 2 == 0:
                    minus[n_minus] = arc
                    n_minus += 1
                else:
                    plus[n_plus] = arc
                    n_plus += 1
                ka += 1
                a_node = n + cols[arc] if a_node < n else rows[arc]
            else:
                arc = parent[b_node]
                if kb % 2 == 0:
                    minus[n_minus] = arc
                    n_minus += 1
                else:
                    plus[n_plus] = arc
                    n_plus += 1
                kb += 1
                b_node = n + cols[arc] if b_node < n else rows[arc]
        theta = np.inf
        for q in range(n_minus):
            if flows[minus[q]] < theta:
                theta = flows[minus[q]]
        leave = -1
        for q in range(n_minus):
            a = minus[q]
            if flows[a] <= theta:
                if not bland or leave < 0 or rows[a] * n + cols[a] < rows[leave] * n + cols[leave]:
                    leave = a
        for q in range(n_minus):
            flows[minus[q]] -= theta
        for q in range(n_plus):
            flows[plus[q]] += theta
        if theta <= 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0
        rows[leave] = bi
        cols[leave] = bj
        flows[leave] = theta


def solve_transport(instance: TransportInstance, warm_start: TransportPlan | None = None,
                    max_iter: int | None = None, stall: int | None = None) -> TransportPlan:
    """Minimize ``<cost, plan>`` over plans with both marginals ``m``.

    Network simplex with block-search pricing.  After ``stall`` consecutive
    degenerate pivots the entering/leaving choice switches to Bland's rule
    until the objective moves again, which rules out cycling.  A previous
    optimal plan for the same marginal may be passed as a feasible start.
    """
    m, cost = instance.marginal, instance.cost
    n = m.size
    if max_iter is None:
        max_iter = 50 * n * n
    if stall is None:
        stall = 2 * n
    if warm_start is not None:
        rows, cols = (np.array(a, dtype=np.int64) for a in warm_start.basis)
        flows = _tree_flows(m, rows, cols)
        if (flows < -1e-12).any():
            raise ValueError("warm-start basis is not feasible for this marginal")
    else:
        rows, cols, flows = _northwest_corner(m)
        rows, cols = rows.astype(np.int64), cols.astype(np.int64)
    flows = np.maximum(flows, 0.0)
    tol = 1e-12 * (1.0 + float(np.abs(cost).max()))
    status, it, pot = _simplex_core(np.ascontiguousarray(cost), rows, cols, flows,
                                    max_iter, stall, tol)
    if status == 1:
        raise NumericalFailure(f"transport simplex exceeded {max_iter} pivots")
    if status == 2:
        raise NumericalFailure("basis is not a spanning tree")
    flows = np.maximum(_tree_flows(m, rows, cols), 0.0)
    plan = np.zeros((n, n))
    np.add.at(plan, (rows, cols), flows)
    objective = float(np.sum(cost[rows, cols] * flows))
    return TransportPlan(plan, objective, pot[:n].copy(), pot[n:].copy(),
                         (rows.copy(), cols.copy()), int(it))


# ---------------------------------------------------------------------------
# cost matrices


@dataclass(frozen=True)
class CostGrid:
    """Symmetrized kernels at bin centres for one ``lam``."""

    lam: float
    marginal: np.ndarray
    c_t: np.ndarray
    c_l: np.ndarray
    c_i: np.ndarray

    @classmethod
    def build(cls, lam: float, n_bins: int = DEFAULT_BINS) -> "CostGrid":
        x = bin_centers(n_bins)
        X, Y = np.meshgrid(x, x, indexing="ij")
        c = cost_symm(X, Y, lam)
        ci = cost_ci_symm(X, Y, lam)
        return cls(lam, discretize_gamma(n_bins), c[..., 0], c[..., 1], ci)

    def directional(self, direction) -> np.ndarray:
        e = np.asarray(direction, dtype=float)
        return e[0] * self.c_t + e[1] * self.c_l

    def point(self, plan: np.ndarray) -> tuple[float, float]:
        return float(np.sum(self.c_t * plan)), float(np.sum(self.c_l * plan))


def _unit(direction) -> np.ndarray:
    e = np.asarray(direction, dtype=float)
    norm = float(np.hypot(e[0], e[1]))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return e / norm


def support_value(lam: float, direction, n_bins: int = DEFAULT_BINS) -> float:
    """``min <R, e>`` over the discretized admissible measures."""
    grid = CostGrid.build(lam, n_bins)
    inst = TransportInstance(grid.marginal, grid.directional(_unit(direction)))
    return solve_transport(inst).objective


def unit_directions(n: int) -> np.ndarray:
    t = 2.0 * math.pi * np.arange(n) / n
    return np.stack([np.cos(t), np.sin(t)], axis=1)


# ---------------------------------------------------------------------------
# polygons


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise vertices; may degenerate to a segment or a point."""

    vertices: np.ndarray

    @property
    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def distance(self, point) -> float:
        """Euclidean distance from ``point`` to the polygon (0 inside)."""
        p = np.asarray(point, dtype=float)
        v = self.vertices
        if len(v) >= 3:
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
            if (cross >= 0).all():
                return 0.0
        if len(v) == 1:
            return float(np.hypot(*(p - v[0])))
        a = v
        b = np.roll(v, -1, axis=0) if len(v) >= 3 else v[::-1]
        ab = b - a
        t = np.clip(np.sum((p - a) * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300),
                    0.0, 1.0)
        closest = a + t[:, None] * ab
        return float(np.hypot(*(closest - p).T).min())


def _clip(poly: np.ndarray, e: np.ndarray, r: float) -> np.ndarray:
    """Sutherland-Hodgman clip of ``poly`` against ``<x, e> >= r``."""
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp, fq = p @ e - r, q @ e - r
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _tidy(v: np.ndarray, eps: float) -> np.ndarray:
    """Merge vertices closer than ``eps`` and drop collinear ones."""
    out: list[np.ndarray] = []
    for p in v:
        if not out or np.hypot(*(p - out[-1])) > eps:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= eps:
        out.pop()
    changed = True
    while changed and len(out) > 2:
        changed = False
        for k in range(len(out)):
            a, b, c = out[k - 1], out[k], out[(k + 1) % len(out)]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(cross) <= eps * max(np.hypot(*(c - a)), eps):
                del out[k]
                changed = True
                break
    if len(out) == 2 or len(out) == 0:
        return np.array(out).reshape(-1, 2)
    return np.array(out)


def halfplane_intersection(directions: np.ndarray, values: np.ndarray,
                           box: float = 1e3, slack: float = 0.0) -> ConvexPolygon:
    """Polygon ``{r : <r, e_k> >= values_k for all k}`` (inside a large box).

    Each support value may be lowered by ``slack`` to absorb solver error;
    vertices closer than a few times ``slack`` are then merged, so a set that
    is truly a point or a segment comes back as one.
    """
    poly = np.array([[-box, -box], [box, -box], [box, box], [-box, box]], dtype=float)
    order = np.argsort(np.arctan2(directions[:, 1], directions[:, 0]))
    for k in order:
        poly = _clip(poly, directions[k], float(values[k]) - slack)
        if len(poly) == 0:
            raise EmptyIntersection("support values are inconsistent: empty intersection")
    scale = float(np.abs(poly).max())
    poly = _tidy(poly, max(1e-12 * max(scale, 1.0), 10.0 * slack))
    if len(poly) >= 3 and ConvexPolygon(poly).area < 0:
        poly = poly[::-1]
    if len(poly) == 2:
        # a segment: order bottom-to-top then left-to-right
        poly = poly[np.lexsort((poly[:, 0], poly[:, 1]))]
    return ConvexPolygon(poly)


@dataclass(frozen=True)
class SupportSweep:
    directions: np.ndarray
    values: np.ndarray
    points: np.ndarray  # force attained by each optimal plan
    polygon: ConvexPolygon


def support_sweep(grid: CostGrid, n_directions: int = DEFAULT_DIRECTIONS) -> SupportSweep:
    if n_directions < 3:
        raise ValueError("need at least three directions")
    dirs = unit_directions(n_directions)
    values = np.empty(n_directions)
    points = np.empty((n_directions, 2))
    prev = None
    for k, e in enumerate(dirs):
        inst = TransportInstance(grid.marginal, grid.directional(e))
        prev = solve_transport(inst, warm_start=prev)
        values[k] = prev.objective
        points[k] = grid.point(prev.plan)
    return SupportSweep(dirs, values, points, halfplane_intersection(dirs, values))


def reachable_set(lam: float, n_directions: int = DEFAULT_DIRECTIONS,
                  n_bins: int = DEFAULT_BINS) -> ConvexPolygon:
    return support_sweep(CostGrid.build(lam, n_bins), n_directions).polygon


def polygon_area_split(polygon: ConvexPolygon) -> tuple[float, float]:
    """Areas of the parts with ``R_T < 0`` and ``R_T > 0``."""
    v = polygon.vertices
    if len(v) < 3:
        return 0.0, 0.0
    left = _clip(v, np.array([-1.0, 0.0]), 0.0)
    right = _clip(v, np.array([1.0, 0.0]), 0.0)
    a_left = ConvexPolygon(left).area if len(left) >= 3 else 0.0
    a_right = ConvexPolygon(right).area if len(right) >= 3 else 0.0
    return a_left, a_right


# ---------------------------------------------------------------------------
# torque-constrained level sets


def torque_range(grid: CostGrid) -> tuple[float, float]:
    """Smallest and largest ``R_I`` over the discretized admissible measures."""
    lo = solve_transport(TransportInstance(grid.marginal, grid.c_i)).objective
    hi = -solve_transport(TransportInstance(grid.marginal, -grid.c_i)).objective
    return lo, hi


@dataclass
class _DualProbe:
    mu: float
    h: float  # dual function value
    s: float  # its slope, <c_I, plan> - level


def constrained_support(grid: CostGrid, cost: np.ndarray, level: float,
                        warm: TransportPlan | None = None, max_probes: int = 200,
                        mu_max: float = 1e9) -> tuple[float, TransportPlan]:
    """``min <cost, P>`` over transport plans with ``<c_I, P> = level``.

    The single side constraint is dualized: ``h(mu) = min_P <cost + mu c_I, P>
    - mu level`` is concave and piecewise linear, and its maximum equals the
    constrained minimum by LP duality.  The maximum is located exactly by
    intersecting supporting lines (finitely many breakpoints); every probe is
    a warm-started transport solve.
    """
    scale = 1.0 + float(np.abs(cost).max()) + float(np.abs(grid.c_i).max())
    tol = 1e-11 * scale

    def probe(mu):
        nonlocal warm
        warm = solve_transport(TransportInstance(grid.marginal, cost + mu * grid.c_i), warm)
        s = float(np.sum(grid.c_i * warm.plan)) - level
        return _DualProbe(mu, warm.objective - mu * level, s)

    p = probe(0.0)
    if abs(p.s) <= tol:
        return p.h, warm
    # bracket the maximizer: slope positive at a, negative at b
    step = 1.0
    q = probe(step if p.s > 0 else -step)
    n = 2
    while q.s * p.s > 0 and abs(q.s) > tol:
        if abs(q.mu) >= mu_max:
            # level sits on a face of the attainable torque range
            return q.h, warm
        p = q
        step *= 4.0
        q = probe(step if p.s > 0 else -step)
        n += 1
    if abs(q.s) <= tol:
        return q.h, warm
    a, b = (p, q) if p.s > 0 else (q, p)
    while n < max_probes:
        mu = (b.h - a.h + a.s * a.mu - b.s * b.mu) / (a.s - b.s)
        top = a.h + a.s * (mu - a.mu)
        x = probe(mu)
        n += 1
        if x.h >= top - tol or abs(x.s) <= tol:
            return x.h, warm
        if x.s > 0:
            a = x
        else:
            b = x
    raise NumericalFailure("dual search for the level-set support did not terminate")


def level_set(lam: float, level: float, n_directions: int = DEFAULT_DIRECTIONS,
              n_bins: int = DEFAULT_BINS, slack: float = 1e-6) -> ConvexPolygon:
    """Forces attainable with torque coefficient exactly ``level``."""
    grid = CostGrid.build(lam, n_bins)
    lo, hi = torque_range(grid)
    if not lo - slack <= level <= hi + slack:
        raise InfeasibleLevel(f"R_I = {level} outside attainable range [{lo}, {hi}]")
    level = min(max(level, lo), hi)
    dirs = unit_directions(n_directions)
    values = np.empty(n_directions)
    warm = None
    for k, e in enumerate(dirs):
        values[k], warm = constrained_support(grid, grid.directional(e), level, warm)
    return halfplane_intersection(dirs, values, slack=LEVEL_SLACK)


def level_feasible(grid: CostGrid, level: float, slack: float = 1e-6) -> bool:
    lo, hi = torque_range(grid)
    return lo - slack <= level <= hi + slack
