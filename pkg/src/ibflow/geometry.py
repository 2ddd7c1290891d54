"""Metric computations on discretized planar paths.

Distances live in path space under the supremum norm over a shared time
grid.  The central routine, :func:`dist_to_lip`, measures how far a
sampled path strays from the cone of speed-``K`` Lipschitz paths pinned
to the origin at time zero.  Feasibility at a trial tolerance ``eps`` is
decided by forward reachability: propagate the convex set of admissible
path values through the chain of per-step speed discs intersected with
per-sample ``eps``-discs.  Chain constraints make forward propagation
complete, so no backtracking is needed.

All discs are replaced by inscribed regular polygons — an inner
approximation — so "feasible" verdicts are certificates and the
bisection output is a rigorous upper bound up to the polygon defect
``K*dt*(1 - cos(pi/V))`` per step plus the bisection tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

__all__ = [
    "DiscretePath",
    "ConvexRegion",
    "LipNet",
    "HausdorffEstimate",
    "diameter",
    "sup_distance",
    "dist_to_lip",
    "dist_to_lip_1d",
    "build_lip_net",
    "hausdorff_estimate",
]


# --------------------------------------------------------------------------
# paths

@dataclass
class DiscretePath:
    """A planar path sampled on a scaled-time grid starting at t = 0."""

    times: np.ndarray      # (m,)
    values: np.ndarray     # (m, 2)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a non-empty 1-d array")
        if self.times[0] != 0.0:
            raise ValueError("the time grid must start at 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.values.shape != (self.times.size, 2):
            raise ValueError("values must have shape (len(times), 2)")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.values))):
            raise ValueError("times and values must be finite")


def sup_distance(g: DiscretePath, f: DiscretePath) -> float:
    """Supremum over the shared grid of the Euclidean distance per time."""
    if not np.array_equal(g.times, f.times):
        raise ValueError("paths are sampled on different time grids")
    return float(np.sqrt(((g.values - f.values) ** 2).sum(axis=-1)).max())


def diameter(points) -> float:
    """Maximum pairwise Euclidean distance of a non-empty point set.

    Direct O(n^2) scan for n <= 500; larger inputs are first reduced to
    their convex hull (the farthest pair is hull-extreme), evaluated
    with the identical distance kernel so both routes agree exactly.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("diameter requires at least one point")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    n = len(pts)
    if n == 1:
        return 0.0
    if n > 500:
        pts = _convex_hull(pts)
        n = len(pts)
    best = 0.0
    for lo in range(0, n, 512):
        blk = pts[lo:lo + 512]
        d2 = (blk[:, None, 0] - pts[None, :, 0]) ** 2 + (blk[:, None, 1] - pts[None, :, 1]) ** 2
        best = max(best, float(d2.max()))
    return math.sqrt(best)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Strict convex hull (monotone chain); collinear interiors dropped."""
    P = np.unique(pts, axis=0)
    if len(P) <= 2:
        return P

    def half(seq):
        out: list[tuple[float, float]] = []
        for x, y in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) <= 0:
                    out.pop()
                else:
                    break
            out.append((x, y))
        return out

    rows = P.tolist()
    lower = half(rows)
    upper = half(reversed(rows))
    return np.asarray(lower[:-1] + upper[:-1])


# --------------------------------------------------------------------------
# convex polygon kernels (counterclockwise vertex arrays, possibly degenerate)

_EMPTY = np.empty((0, 2))


def _gon_vertices(center, radius: float, n: int) -> np.ndarray:
    """Regular n-gon inscribed in the disc (vertices on the circle)."""
    a = np.arange(n) * (2.0 * np.pi / n)
    return np.asarray(center, dtype=float) + radius * np.stack([np.cos(a), np.sin(a)], axis=1)


def _lowest_first(V: np.ndarray) -> np.ndarray:
    i = np.lexsort((V[:, 0], V[:, 1]))[0]
    return np.roll(V, -i, axis=0)


def _minkowski_sum(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Minkowski sum of two convex CCW polygons by sorted edge merge."""
    if len(P) == 0 or len(Q) == 0:
        return _EMPTY
    P = _lowest_first(P)
    Q = _lowest_first(Q)
    edges = np.vstack([np.roll(P, -1, axis=0) - P, np.roll(Q, -1, axis=0) - Q])
    edges = edges[np.hypot(edges[:, 0], edges[:, 1]) > 0.0]
    start = P[0] + Q[0]
    if len(edges) == 0:
        return start[None, :]
    ang = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), 2.0 * np.pi)
    edges = edges[np.argsort(ang, kind="stable")]
    verts = np.empty((len(edges), 2))
    verts[0] = start
    np.cumsum(edges[:-1], axis=0, out=verts[1:])
    verts[1:] += start
    return verts


def _clip_halfplane(V: np.ndarray, n_hat: np.ndarray, c: float) -> np.ndarray:
    """Intersect polygon V with the halfplane {x : <x, n_hat> <= c}."""
    if len(V) == 0:
        return V
    s = V @ n_hat - c
    inside = s <= 0.0
    if inside.all():
        return V
    if not inside.any():
        return _EMPTY
    Vn = np.roll(V, -1, axis=0)
    sn = np.roll(s, -1)
    crossing = inside != np.roll(inside, -1)
    denom = np.where(crossing, s - sn, 1.0)
    t = np.where(crossing, s / denom, 0.0)
    X = V + t[:, None] * (Vn - V)
    buf = np.empty((len(V), 2, 2))
    valid = np.empty((len(V), 2), dtype=bool)
    buf[:, 0] = V
    valid[:, 0] = inside
    buf[:, 1] = X
    valid[:, 1] = crossing
    return buf.reshape(-1, 2)[valid.reshape(-1)]


def _clip_to_gon(V: np.ndarray, center, radius: float, n_gon: int) -> np.ndarray:
    """Intersect polygon V with the inscribed n-gon of disc(center, radius)."""
    if len(V) == 0:
        return V
    center = np.asarray(center, dtype=float)
    ang = (np.arange(n_gon) + 0.5) * (2.0 * np.pi / n_gon)
    apothem = radius * math.cos(math.pi / n_gon)
    for ca, sa in zip(np.cos(ang), np.sin(ang)):
        n_hat = np.array([ca, sa])
        V = _clip_halfplane(V, n_hat, float(n_hat @ center) + apothem)
        if len(V) == 0:
            return V
    return V


@dataclass
class ConvexRegion:
    """Convex CCW polygon with a distinguished empty value.

    Used as the reachable set of admissible path values during the
    Lipschitz feasibility propagation; degenerate polygons (single
    points, segments) are valid regions.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.size == 0:
            v = v.reshape(0, 2)
        v = np.atleast_2d(v)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if len(v) >= 3:
            e = np.roll(v, -1, axis=0) - v
            e_next = np.roll(e, -1, axis=0)
            cross = e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]
            scale = float(np.abs(v).max()) + 1.0
            if np.any(cross < -1e-9 * scale * scale):
                raise ValueError("vertices must trace a convex counterclockwise polygon")
            w = np.roll(v, -1, axis=0)
            signed_area = 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))
            if signed_area < -1e-9 * scale * scale:
                raise ValueError("vertices must wind counterclockwise")
        self.vertices = v

    @classmethod
    def empty(cls) -> "ConvexRegion":
        return cls(vertices=_EMPTY.copy())

    @classmethod
    def point(cls, p) -> "ConvexRegion":
        return cls(vertices=np.asarray(p, dtype=float)[None, :])

    @classmethod
    def disc_polygon(cls, center, radius: float, n_vertices: int = 64) -> "ConvexRegion":
        return cls(vertices=_gon_vertices(center, radius, n_vertices))

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def minkowski_disc(self, radius: float, n_vertices: int = 64) -> "ConvexRegion":
        if self.is_empty:
            return ConvexRegion.empty()
        if radius == 0.0:
            return ConvexRegion(vertices=self.vertices.copy())
        return ConvexRegion(
            vertices=_minkowski_sum(self.vertices, _gon_vertices((0.0, 0.0), radius, n_vertices)))

    def intersect_disc(self, center, radius: float, n_vertices: int = 64) -> "ConvexRegion":
        return ConvexRegion(vertices=_clip_to_gon(self.vertices, center, radius, n_vertices))

    def contains(self, p, tol: float = 1e-9) -> bool:
        if self.is_empty:
            return False
        p = np.asarray(p, dtype=float)
        v = self.vertices
        if len(v) == 1:
            return bool(np.hypot(*(p - v[0])) <= tol)
        e = np.roll(v, -1, axis=0) - v
        rel = p[None, :] - v
        cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
        if len(v) == 2:
            # Degenerate segment: both traversal directions give opposite signs.
            along = np.clip(np.dot(p - v[0], e[0]) / max(float(e[0] @ e[0]), 1e-300), 0.0, 1.0)
            return bool(np.hypot(*(p - (v[0] + along * e[0]))) <= tol)
        scale = float(np.abs(v).max()) + 1.0
        return bool(np.all(cross >= -tol * scale))


# --------------------------------------------------------------------------
# distance to the speed-K Lipschitz cone

def _rotation_to_axis(values: np.ndarray) -> np.ndarray:
    """Rotate samples so the farthest one lies on the positive x-axis.

    A global rotation is an isometry of the feasibility problem but
    aligns collinear instances with the polygon symmetry axis, where the
    inner polygon approximation is exact along the axis.
    """
    r2 = (values ** 2).sum(axis=1)
    i = int(np.argmax(r2))
    if r2[i] == 0.0:
        return values
    c, s = values[i] / math.sqrt(r2[i])
    rot = np.array([[c, s], [-s, c]])
    return values @ rot.T


def lip_feasible(times, values, K: float, eps: float, poly_verts: int = 64) -> bool:
    """Certified feasibility of the eps-tube Lipschitz interpolation.

    True means a grid path f with f(0) = 0, per-step speed at most K and
    ``|f_i - g_i| <= eps`` provably exists (inner polygon certificate);
    False verdicts may over-reject by at most the polygon defect.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    region = np.zeros((1, 2))
    t_prev = 0.0
    for ti, gi in zip(times, values):
        gap = float(ti) - t_prev
        if gap > 0.0:
            region = _minkowski_sum(region, _gon_vertices((0.0, 0.0), K * gap, poly_verts))
        region = _clip_to_gon(region, gi, eps, poly_verts)
        if len(region) == 0:
            return False
        t_prev = float(ti)
    return True


def dist_to_lip(
    g: DiscretePath,
    K: float,
    eps_tol: float = 1e-4,
    poly_verts: int = 64,
) -> float:
    """Distance from a sampled path to the speed-K Lipschitz cone.

    Bisection on the tube radius eps of the reachability feasibility
    predicate.  The returned value is a certified-feasible upper bound:
    within ``eps_tol`` of the smallest eps the polygonal relaxation
    accepts, which itself overshoots the exact grid distance by at most
    the accumulated inner-approximation defect
    ``sum_i K*dt_i*(1 - cos(pi/poly_verts))``.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if eps_tol <= 0:
        raise ValueError("eps_tol must be positive")
    if poly_verts < 16:
        raise ValueError("poly_verts must be at least 16")
    values = _rotation_to_axis(g.values)
    times = g.times
    max_r = float(np.sqrt((values ** 2).sum(axis=1)).max())
    if max_r == 0.0:
        return 0.0
    hi = max_r / math.cos(math.pi / poly_verts) + eps_tol
    for _ in range(64):
        if lip_feasible(times, values, K, hi, poly_verts):
            break
        hi *= 2.0
    else:
        raise AssertionError("no feasible upper bound found")
    lo = 0.0
    for _ in range(200):
        if hi - lo <= eps_tol:
            break
        mid = 0.5 * (lo + hi)
        if lip_feasible(times, values, K, mid, poly_verts):
            hi = mid
        else:
            lo = mid
        assert lo < hi, "bisection bracket must stay ordered (feasibility monotone in eps)"
    return hi


def dist_to_lip_1d(times, values, K: float) -> float:
    """Exact scalar-path distance to the speed-K Lipschitz cone.

    Closed form
    ``max(0, max_i(|g_i| - K t_i), max_{i<j}((|g_i - g_j| - K(t_j - t_i))/2))``:
    the anchor terms come from f(0) = 0, the pair terms from mutual
    reachability, and in one dimension these necessary conditions are
    sufficient (envelope interpolation between the binding constraints).
    """
    if K <= 0:
        raise ValueError("K must be positive")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("times and values must be matching non-empty 1-d arrays")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be nonnegative and strictly increasing")
    anchor = float(np.max(np.abs(v) - K * t))
    pair = float(np.max(np.abs(v[:, None] - v[None, :]) - K * np.abs(t[:, None] - t[None, :]))) / 2.0
    return max(0.0, anchor, pair)


# --------------------------------------------------------------------------
# finite nets of the Lipschitz cone

@dataclass
class LipNet:
    """Finite family of grid paths inside the speed-K Lipschitz cone.

    ``values[n, i]`` is path n at ``times[i]``; every path starts at the
    origin and obeys the per-step speed bound.  The resolution
    descriptor is (mesh, directions, levels, sample count); the nominal
    coverage radius combines the three discretization errors.
    """

    K: float
    times: np.ndarray        # (m,)
    values: np.ndarray       # (n_paths, m, 2)
    directions: int
    levels: int
    exhaustive: bool

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[1:] != (self.times.size, 2):
            raise ValueError("values must have shape (n_paths, len(times), 2)")
        if len(self.values) == 0:
            raise ValueError("a net must contain at least one path")
        if np.any(np.abs(self.values[:, 0, :]) > 0):
            raise ValueError("every net path must start at the origin")
        steps = np.sqrt((np.diff(self.values, axis=1) ** 2).sum(axis=-1))
        bound = self.K * np.diff(self.times)
        if np.any(steps > bound[None, :] + 1e-9):
            raise ValueError("net paths must obey the per-step speed bound")

    @cached_property
    def paths(self) -> list[DiscretePath]:
        return [DiscretePath(self.times, v) for v in self.values]

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    @property
    def sample_count(self) -> int:
        return len(self.values)

    @property
    def coverage_radius(self) -> float:
        """Nominal worst-case sup-distance from the cone to the net."""
        return self.K * (self.mesh + math.pi / self.directions + 0.5 / self.levels)


def build_lip_net(
    K: float,
    m: int,
    D: int,
    levels: int,
    cap: int = 200_000,
    rng: np.random.Generator | None = None,
) -> LipNet:
    """Build a net of speed-K paths on the uniform m-point grid on [0, 1].

    Per-interval increments are ``K*dt*(l/levels)`` long in direction
    ``2*pi*d/D``, plus the zero increment — an alphabet of
    ``D*levels + 1`` symbols.  The net enumerates all
    ``(D*levels+1)**(m-1)`` symbol strings when that count is within
    ``cap``, otherwise it draws ``cap`` uniform strings from the same
    alphabet (an rng is then required).
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if D < 4:
        raise ValueError("D must be at least 4")
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if K <= 0:
        raise ValueError("K must be positive")
    if cap < 1:
        raise ValueError("cap must be positive")
    times = np.linspace(0.0, 1.0, m)
    dts = np.diff(times)
    alphabet = D * levels + 1
    n_steps = m - 1
    total = alphabet ** n_steps
    if total <= cap:
        codes = np.stack(
            np.unravel_index(np.arange(total), (alphabet,) * n_steps), axis=1)
        exhaustive = True
    else:
        if rng is None:
            raise ValueError(
                f"alphabet^(m-1) = {total} exceeds cap = {cap}: an rng is required to sample")
        codes = rng.integers(0, alphabet, size=(cap, n_steps))
        exhaustive = False
    nonzero = codes > 0
    level = np.where(nonzero, (codes - 1) // D + 1, 0)
    direction = np.where(nonzero, (codes - 1) % D, 0)
    phi = direction * (2.0 * np.pi / D)
    mag = K * dts[None, :] * (level / levels)
    inc = mag[..., None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    inc[~nonzero] = 0.0
    vals = np.concatenate(
        [np.zeros((len(codes), 1, 2)), np.cumsum(inc, axis=1)], axis=1)
    return LipNet(K=float(K), times=times, values=vals,
                  directions=D, levels=levels, exhaustive=exhaustive)


# --------------------------------------------------------------------------
# Hausdorff distance between the sampled path set and the cone

class HausdorffEstimate(NamedTuple):
    """Two one-sided components and their max.

    ``d_upper`` (observed paths -> cone) is upper-bound flavored:
    certified distances maximized over the sampled paths.  ``d_lower``
    (cone -> observed paths) is lower-bound biased because the cone is
    replaced by a finite net.
    """

    d_upper: float
    d_lower: float
    d_h: float


def hausdorff_estimate(
    bundle,
    K: float,
    net: LipNet,
    eps_tol: float = 1e-4,
    poly_verts: int = 64,
) -> HausdorffEstimate:
    """Hausdorff distance between scaled trajectories and the Lipschitz cone.

    First component: max over bundle paths of :func:`dist_to_lip`.
    Second: max over net paths of the min over bundle paths of
    :func:`sup_distance`.  Reductions run in fixed index order; the
    vectorized inner loop uses the identical distance kernel as
    :func:`sup_distance`, so a double-loop evaluation agrees exactly.
    """
    times = np.asarray(bundle.save_times, dtype=float)
    if not np.array_equal(times, net.times):
        raise ValueError("bundle and net are sampled on different time grids")
    scaled = np.asarray(bundle.scaled, dtype=float)
    if scaled.ndim != 3 or scaled.shape[1:] != (times.size, 2):
        raise ValueError("bundle.scaled must have shape (n_paths, len(save_times), 2)")
    if len(scaled) == 0:
        raise ValueError("bundle must contain at least one path")
    d_upper = 0.0
    for row in scaled:
        d_upper = max(d_upper, dist_to_lip(DiscretePath(times, row), K, eps_tol, poly_verts))
    d_lower = 0.0
    m = times.size
    chunk = max(1, 4_000_000 // max(1, len(scaled) * m))
    for lo in range(0, len(net.values), chunk):
        blk = net.values[lo:lo + chunk]
        sup = np.sqrt(((blk[:, None] - scaled[None]) ** 2).sum(axis=-1)).max(axis=-1)
        d_lower = max(d_lower, float(sup.min(axis=1).max()))
    return HausdorffEstimate(d_upper=d_upper, d_lower=d_lower, d_h=max(d_upper, d_lower))
