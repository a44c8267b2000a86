"""Billiard scattering inside a single polygonal cavity.

Local frame: the opening is the segment from (0, 0) to (1, 0), the outward
normal is (0, 1) and the cavity lies below.  A particle entering at ``xi``
with incidence angle ``phi`` moves along ``(sin phi, -cos phi)``; it leaves
along ``(-sin phi_out, cos phi_out)``.  With this convention a flat bottom
gives ``phi_out = -phi`` and a retroreflector ``phi_out = phi``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import BounceLimitExceeded, DegenerateHit, InvalidShape, TooManyDiscards
from .measures import Histogram, bin_edges, gamma_masses

log = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
VERTEX_TOL = 1e-12
TANGENT_TOL = 1e-12
MAX_BOUNCES = 10_000
MAX_DISCARD_RATE = 0.01

# trace status codes
OK, BOUNCE_LIMIT, DEGENERATE = 0, 1, 2


def reflect(direction, normal) -> np.ndarray:
    """Specular reflection ``d - 2 <d, n> n`` (works row-wise on arrays)."""
    d = np.asarray(direction, dtype=float)
    n = np.asarray(normal, dtype=float)
    return d - 2.0 * np.sum(d * n, axis=-1, keepdims=True) * n


@dataclass(frozen=True)
class CavityShape:
    vertices: np.ndarray
    convex_fraction: float = 0.0
    depth: float | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        _validate(v, self.convex_fraction, self.depth)
        v.setflags(write=False)

    @property
    def walls(self) -> tuple[np.ndarray, np.ndarray]:
        """Wall segment start and end points, shape (k, 2) each."""
        return self.vertices[:-1], self.vertices[1:]

    @classmethod
    def from_json(cls, path) -> "CavityShape":
        doc = json.loads(Path(path).read_text())
        try:
            return cls(doc["vertices"], float(doc.get("convex_fraction", 0.0)),
                       doc.get("depth"))
        except KeyError as exc:
            raise InvalidShape(f"{path}: missing key {exc}") from None

    def to_json(self) -> str:
        doc = {"vertices": self.vertices.tolist(), "convex_fraction": self.convex_fraction}
        if self.depth is not None:
            doc["depth"] = self.depth
        return json.dumps(doc)


def _validate(v, convex_fraction, depth):
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
        raise InvalidShape("vertices must be a list of at least two 2-D points")
    if not np.allclose(v[0], (0.0, 0.0)) or not np.allclose(v[-1], (1.0, 0.0)):
        raise InvalidShape("polyline must start at (0, 0) and end at (1, 0)")
    if not 0.0 <= convex_fraction < 1.0:
        raise InvalidShape("convex_fraction must lie in [0, 1)")
    inner = v[1:-1]
    if len(inner):
        if (inner[:, 1] >= 0).any():
            raise InvalidShape("interior vertices must lie strictly below the opening")
        if (inner[:, 0] < 0).any() or (inner[:, 0] > 1).any():
            raise InvalidShape("cavity must stay within the strip 0 <= x <= 1")
        if depth is not None and (inner[:, 1] < -depth).any():
            raise InvalidShape(f"cavity deeper than the declared depth {depth}")
    elif len(v) != 2:
        raise InvalidShape("degenerate polyline")
    seg = np.diff(v, axis=0)
    if (np.hypot(seg[:, 0], seg[:, 1]) == 0).any():
        raise InvalidShape("repeated vertex")
    k = len(seg)
    for i in range(k):
        for j in range(i + 2, k):
            if _segments_cross(v[i], v[i + 1], v[j], v[j + 1]):
                raise InvalidShape(f"segments {i} and {j} intersect")


def _segments_cross(p, p2, q, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p, p2, q), orient(p, p2, q2)
    o3, o4 = orient(q, q2, p), orient(q, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return bool(o1 == 0 and o2 == 0 and max(min(p[0], p2[0]), min(q[0], q2[0]))
                <= min(max(p[0], p2[0]), max(q[0], q2[0]))
                and max(min(p[1], p2[1]), min(q[1], q2[1]))
                <= min(max(p[1], p2[1]), max(q[1], q2[1])))


def flat_cavity(convex_fraction: float = 0.0) -> CavityShape:
    return CavityShape([(0.0, 0.0), (1.0, 0.0)], convex_fraction)


def isosceles_triangle(base_angle_deg: float, convex_fraction: float = 0.0) -> CavityShape:
    """Triangular dimple whose two sides meet the opening at ``base_angle_deg``."""
    h = 0.5 * math.tan(math.radians(base_angle_deg))
    return CavityShape([(0.0, 0.0), (0.5, -h), (1.0, 0.0)], convex_fraction, h)


def rectangle(aspect: float, convex_fraction: float = 0.0) -> CavityShape:
    """Rectangular slot with ``width / depth == aspect`` and unit width."""
    d = 1.0 / aspect
    return CavityShape([(0.0, 0.0), (0.0, -d), (1.0, -d), (1.0, 0.0)], convex_fraction, d)


@dataclass(frozen=True)
class ScatterEvent:
    xi_in: float
    phi_in: float
    xi_out: float
    phi_out: float
    n_reflections: int


@njit(cache=True)
def _trace_kernel(ax, ay, ex, ey, nx, ny, xi, phi, max_bounces,
                  xi_out, phi_out, count, status):
    n_walls = ax.size
    for r in range(xi.size):
        px, py = xi[r], 0.0
        dx, dy = math.sin(phi[r]), -math.cos(phi[r])
        last = -1
        bounces = 0
        code = DEGENERATE
        while True:
            t_best = math.inf
            s_best = 0.0
            k_best = -1
            for k in range(n_walls):
                if k == last:
                    continue
                den = dx * ey[k] - dy * ex[k]
                if den == 0.0:
                    continue
                wx = ax[k] - px
                wy = ay[k] - py
                t = (wx * ey[k] - wy * ex[k]) / den
                s = (wx * dy - wy * dx) / den
                if t > 0.0 and -VERTEX_TOL <= s <= 1.0 + VERTEX_TOL and t < t_best:
                    t_best, s_best, k_best = t, s, k
            t_open = -py / dy if dy > 0.0 else math.inf
            if t_open < t_best:
                x_cross = px + t_open * dx
                if VERTEX_TOL < x_cross < 1.0 - VERTEX_TOL:
                    xi_out[r] = x_cross
                    phi_out[r] = math.atan2(-dx, dy)
                    code = OK
                break
            if k_best < 0 or s_best <= VERTEX_TOL or s_best >= 1.0 - VERTEX_TOL:
                break
            dot = dx * nx[k_best] + dy * ny[k_best]
            if abs(dot) < TANGENT_TOL:
                break
            px += t_best * dx
            py += t_best * dy
            dx -= 2.0 * dot * nx[k_best]
            dy -= 2.0 * dot * ny[k_best]
            norm = math.hypot(dx, dy)
            dx /= norm
            dy /= norm
            last = k_best
            bounces += 1
            if bounces > max_bounces:
                code = BOUNCE_LIMIT
                break
        count[r] = bounces
        status[r] = code
        if code != OK:
            xi_out[r] = math.nan
            phi_out[r] = math.nan


def trace_batch(shape: CavityShape, xi, phi, max_bounces: int = MAX_BOUNCES):
    """Trace many rays at once.

    Returns ``(xi_out, phi_out, n_reflections, status)`` arrays; ``status`` is
    OK, BOUNCE_LIMIT or DEGENERATE.  Outputs of non-OK rays are NaN.
    """
    xi, phi = np.broadcast_arrays(np.atleast_1d(np.asarray(xi, dtype=float)),
                                  np.atleast_1d(np.asarray(phi, dtype=float)))
    xi = np.ascontiguousarray(xi.ravel())
    phi = np.ascontiguousarray(phi.ravel())
    n = xi.size
    xi_out = np.full(n, np.nan)
    phi_out = np.full(n, np.nan)
    count = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    a, b = shape.walls
    if len(a) == 1:  # flat opening: specular bounce off the convex part
        return xi.copy(), -phi, count, status
    e = b - a
    nrm = np.stack([-e[:, 1], e[:, 0]], axis=1)
    nrm /= np.hypot(nrm[:, 0], nrm[:, 1])[:, None]
    _trace_kernel(np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1]),
                  np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1]),
                  np.ascontiguousarray(nrm[:, 0]), np.ascontiguousarray(nrm[:, 1]),
                  xi, phi, max_bounces, xi_out, phi_out, count, status)
    return xi_out, phi_out, count, status


def trace_cavity(shape: CavityShape, xi: float, phi: float,
                 max_bounces: int = MAX_BOUNCES) -> ScatterEvent:
    if not (0.0 < xi < 1.0 and -HALF_PI < phi < HALF_PI):
        raise ValueError(f"entry (xi={xi}, phi={phi}) outside (0,1) x (-pi/2, pi/2)")
    xo, po, cnt, st = trace_batch(shape, xi, phi, max_bounces)
    if st[0] == BOUNCE_LIMIT:
        raise BounceLimitExceeded(f"more than {max_bounces} reflections at xi={xi}, phi={phi}")
    if st[0] == DEGENERATE:
        raise DegenerateHit(f"ray (xi={xi}, phi={phi}) meets a vertex or grazes a wall")
    return ScatterEvent(float(xi), float(phi), float(xo[0]), float(po[0]), int(cnt[0]))


@dataclass(frozen=True)
class SampleSet:
    """Deterministic tensor-grid samples of the cavity map."""

    xi: np.ndarray
    phi: np.ndarray
    xi_out: np.ndarray
    phi_out: np.ndarray
    weight: np.ndarray  # gamma-mass of the (xi, phi) sub-cell; sums to 2
    ok: np.ndarray

    @property
    def discard_rate(self) -> float:
        return float(self.weight[~self.ok].sum() / self.weight.sum())


def sample_grid(n_xi: int, n_phi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n_xi < 2 or n_phi < 2:
        raise ValueError("n_xi and n_phi must be at least 2")
    xi = (np.arange(n_xi) + 0.5) / n_xi
    e = np.linspace(-HALF_PI, HALF_PI, n_phi + 1)
    phi = 0.5 * (e[:-1] + e[1:])
    w_phi = np.diff(np.sin(e))
    XI, PHI = np.meshgrid(xi, phi, indexing="ij")
    W = np.broadcast_to(w_phi[None, :] / n_xi, XI.shape)
    return XI.ravel(), PHI.ravel(), W.ravel().copy()


def scatter_samples(shape: CavityShape, n_xi: int, n_phi: int,
                    max_bounces: int = MAX_BOUNCES, chunk: int = 200_000) -> SampleSet:
    xi, phi, w = sample_grid(n_xi, n_phi)
    xo = np.empty_like(xi)
    po = np.empty_like(xi)
    st = np.empty(xi.size, dtype=np.int8)
    for lo in range(0, xi.size, chunk):
        sl = slice(lo, lo + chunk)
        xo[sl], po[sl], _, st[sl] = trace_batch(shape, xi[sl], phi[sl], max_bounces)
    return SampleSet(xi, phi, xo, po, w, st == OK)


def empirical_measure(shape: CavityShape, n_xi: int, n_phi: int, bins: int,
                      max_bounces: int = MAX_BOUNCES) -> Histogram:
    """Histogram of (incidence, exit) angle pairs, total mass 2.

    Cavity samples carry ``2 (1 - convex_fraction)``; the cavity-free part of
    the boundary adds ``convex_fraction`` times the specular measure on the
    anti-diagonal cells.  Discarded samples are dropped and the remaining
    cavity mass is rescaled; the discarded fraction is kept on the result.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    samples = scatter_samples(shape, n_xi, n_phi, max_bounces)
    rate = samples.discard_rate
    if rate > MAX_DISCARD_RATE:
        raise TooManyDiscards(f"{rate:.2%} of the sample mass was discarded")
    if rate > 0:
        log.info("discarded %.3g%% of sample mass", 100 * rate)
    edges = bin_edges(bins)
    ok = samples.ok
    h, _, _ = np.histogram2d(samples.phi[ok], samples.phi_out[ok], bins=[edges, edges],
                             weights=samples.weight[ok])
    f = shape.convex_fraction
    h *= 2.0 * (1.0 - f) / h.sum()
    h[np.arange(bins), bins - 1 - np.arange(bins)] += f * gamma_masses(bins)
    return Histogram(h, discarded=rate)
