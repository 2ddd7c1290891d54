"""Euler-Maruyama integration of ensembles, Jacobians and material curves.

One integration step draws a single pair of standard normal vectors
``(xi, xi')`` indexed by mode and applies it to every tracked point.
Sharing the draw is what couples the motion of different points: the
increment covariance between two points separated by ``x - y`` is
``dt * b(x - y)`` by the cosine addition formula, while each single
point performs an exact Brownian step of covariance ``dt * Id``.

Per-point increments are accumulated with fixed-order reductions over
the mode axis, so a given point's trajectory is bit-identical no matter
which other points are integrated alongside it (shared-noise coupling is
exact, not just statistical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import ModeSet
from .geometry import diameter

__all__ = [
    "ResolutionError",
    "Ensemble",
    "NoiseDraw",
    "CurveImage",
    "PathBundle",
    "HitResult",
    "CurveReport",
    "velocity_increment",
    "jacobian_increment",
    "step",
    "simulate_paths",
    "evolve_curve",
    "run_until_hit",
]


class ResolutionError(RuntimeError):
    """A material curve needed more vertices than the configured cap."""


@dataclass
class Ensemble:
    """Positions (and optionally Jacobians) of tracked points at time t."""

    t: float
    positions: np.ndarray                  # (N, 2)
    jacobians: np.ndarray | None = None    # (N, 2, 2)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        if self.jacobians is not None:
            self.jacobians = np.asarray(self.jacobians, dtype=float)
            if self.jacobians.shape != (len(self.positions), 2, 2):
                raise ValueError("jacobians must have shape (N, 2, 2)")

    @classmethod
    def from_points(cls, points, with_jacobians: bool = False) -> "Ensemble":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        jac = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy() if with_jacobians else None
        return cls(t=0.0, positions=pts, jacobians=jac)


@dataclass
class NoiseDraw:
    """One step's shared mode noise: two iid standard normal vectors."""

    xi: np.ndarray
    xi_prime: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.xi_prime = np.asarray(self.xi_prime, dtype=float)
        if self.xi.shape != self.xi_prime.shape or self.xi.ndim != 1:
            raise ValueError("xi and xi_prime must be 1-d arrays of equal length")

    @classmethod
    def draw(cls, ms: ModeSet, rng: np.random.Generator) -> "NoiseDraw":
        n = len(ms)
        return cls(xi=rng.standard_normal(n), xi_prime=rng.standard_normal(n))


@dataclass
class CurveImage:
    """Polyline approximation of a material curve.

    ``h_max`` is the refinement threshold: after every step, any gap
    between consecutive vertices larger than ``h_max`` is split at its
    midpoint (on the current image) until all gaps comply.
    """

    vertices: np.ndarray                   # (N, 2)
    h_max: float

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 2:
            raise ValueError("vertices must have shape (N >= 2, 2)")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")

    @classmethod
    def segment(cls, a, b, h_max: float = 0.05) -> "CurveImage":
        return cls(vertices=np.array([a, b], dtype=float), h_max=h_max)


@dataclass
class PathBundle:
    """Saved trajectories of an ensemble, raw and time-rescaled.

    ``scaled[p, i] = raw[p, i] / horizon`` holds the trajectory of point
    ``p`` at scaled time ``save_times[i]``; index 0 is the (scaled)
    initial condition.
    """

    horizon: float
    save_times: np.ndarray                 # (m,)
    raw: np.ndarray                        # (P, m, 2)
    scaled: np.ndarray                     # (P, m, 2)


@dataclass
class HitResult:
    """Outcome of a first-passage run; ``tau``/``diam_at_hit`` are NaN on timeout."""

    hit: bool
    tau: float = math.nan
    diam_at_hit: float = math.nan


@dataclass
class CurveReport:
    """Bookkeeping from a curve evolution."""

    steps: int = 0
    insertions: int = 0
    max_gap: float = 0.0
    n_vertices: int = 0


def _check_noise(ms: ModeSet, noise: NoiseDraw) -> None:
    if len(noise.xi) != len(ms):
        raise ValueError(
            f"noise length {len(noise.xi)} does not match mode count {len(ms)}")


def _mode_weights(ms: ModeSet, positions: np.ndarray, noise: NoiseDraw):
    """cos/sin phase mix of the shared draw at each position, shape (N, J)."""
    # Elementwise phases (not a matmul): keeps every row bit-identical
    # no matter how many other points share the batch, so per-point
    # trajectories do not depend on ensemble composition.
    theta = (positions[:, 0, None] * ms.k[:, 0]
             + positions[:, 1, None] * ms.k[:, 1])
    co = np.cos(theta)
    si = np.sin(theta)
    w_vel = co * noise.xi + si * noise.xi_prime
    w_jac = co * noise.xi_prime - si * noise.xi
    return w_vel, w_jac


def velocity_increment(ms: ModeSet, x, noise: NoiseDraw, dt: float) -> np.ndarray:
    """Velocity-field increment ``sqrt(dt) * sum_j a_j e_j (cos<k_j,x> xi_j + sin<k_j,x> xi'_j)``.

    ``x`` may be a single 2-vector or an (N, 2) array; the result matches
    its shape.  Over the noise, the increment at a single point has
    covariance ``dt * Id`` and the cross-covariance between two points is
    ``dt * b(x - y)``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_noise(ms, noise)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pos = np.atleast_2d(x)
    w_vel, _ = _mode_weights(ms, pos, noise)
    ax = ms.amplitude * ms.e[:, 0]
    ay = ms.amplitude * ms.e[:, 1]
    root_dt = math.sqrt(dt)
    inc = np.empty_like(pos)
    inc[:, 0] = root_dt * (w_vel * ax).sum(axis=1)
    inc[:, 1] = root_dt * (w_vel * ay).sum(axis=1)
    return inc[0] if single else inc


def jacobian_increment(ms: ModeSet, x, noise: NoiseDraw, dt: float) -> np.ndarray:
    """Spatial gradient of the velocity increment at ``x``.

    Equals ``sqrt(dt) * sum_j a_j e_j k_j^T (cos<k_j,x> xi'_j - sin<k_j,x> xi_j)``,
    the exact derivative of :func:`velocity_increment` with respect to
    ``x``.  Shape (2, 2) for a single point, (N, 2, 2) for an array.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_noise(ms, noise)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pos = np.atleast_2d(x)
    _, w_jac = _mode_weights(ms, pos, noise)
    root_dt = math.sqrt(dt)
    out = np.empty((len(pos), 2, 2))
    for p in range(2):
        for q in range(2):
            coeff = ms.amplitude * ms.e[:, p] * ms.k[:, q]
            out[:, p, q] = root_dt * (w_jac * coeff).sum(axis=1)
    return out[0] if single else out


def step(ens: Ensemble, ms: ModeSet, dt: float, rng: np.random.Generator) -> Ensemble:
    """Advance an ensemble by one shared-noise Euler-Maruyama step.

    Position and Jacobian increments are both evaluated at the pre-step
    positions; Jacobians update as ``J <- (Id + grad_increment) J``.
    """
    noise = NoiseDraw.draw(ms, rng)
    new_pos = ens.positions + velocity_increment(ms, ens.positions, noise, dt)
    new_jac = None
    if ens.jacobians is not None:
        dj = jacobian_increment(ms, ens.positions, noise, dt)
        dj[:, 0, 0] += 1.0
        dj[:, 1, 1] += 1.0
        new_jac = np.matmul(dj, ens.jacobians)
    return Ensemble(t=ens.t + dt, positions=new_pos, jacobians=new_jac)


def _substeps(interval: float, dt: float) -> tuple[int, float]:
    """Number and size of equal substeps covering ``interval`` with step <= dt."""
    n = max(1, math.ceil(interval / dt - 1e-9))
    return n, interval / n


def simulate_paths(
    initial,
    ms: ModeSet,
    T: float,
    dt: float,
    save_times,
    rng: np.random.Generator,
) -> PathBundle:
    """Integrate an ensemble to horizon ``T`` recording scaled save times.

    ``save_times`` is an increasing grid in [0, 1] starting at 0 and
    ending at 1; positions are recorded at ``t_i * T``.  Each inter-save
    interval is covered by equal substeps of size at most ``dt``, so
    every save time is hit exactly.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > T:
        raise ValueError("dt must not exceed the horizon T")
    ts = np.asarray(save_times, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("save_times must contain at least [0, 1]")
    if ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
        raise ValueError("save_times must increase from 0 to 1")
    min_gap = float(np.min(np.diff(ts)))
    if dt > T * min_gap + 1e-12:
        raise ValueError(
            f"dt={dt} exceeds the smallest save interval {T * min_gap}")
    pts = np.atleast_2d(np.asarray(initial, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("initial must have shape (P, 2)")
    P, m = len(pts), len(ts)
    raw = np.empty((P, m, 2))
    raw[:, 0] = pts
    pos = pts.copy()
    for i in range(1, m):
        n_sub, h = _substeps((ts[i] - ts[i - 1]) * T, dt)
        for _ in range(n_sub):
            noise = NoiseDraw.draw(ms, rng)
            pos = pos + velocity_increment(ms, pos, noise, h)
        raw[:, i] = pos
    return PathBundle(horizon=float(T), save_times=ts.copy(), raw=raw, scaled=raw / T)


def _refine_gaps(verts: np.ndarray, h: float, cap: int) -> tuple[np.ndarray, int]:
    """Subdivide every gap longer than ``h`` into equal pieces <= h."""
    gaps = np.hypot(*(verts[1:] - verts[:-1]).T)
    if not np.any(gaps > h):
        return verts, 0
    pieces = np.maximum(1, np.ceil(gaps / h - 1e-12).astype(int))
    total = int(pieces.sum()) + 1
    if total > cap:
        raise ResolutionError(
            f"curve needs {total} vertices, exceeding the cap of {cap}")
    out = np.empty((total, 2))
    pos = 0
    for i, n in enumerate(pieces):
        a, b = verts[i], verts[i + 1]
        if n == 1:
            out[pos] = a
            pos += 1
        else:
            frac = np.arange(n) / n
            out[pos:pos + n] = a + frac[:, None] * (b - a)
            pos += n
    out[pos] = verts[-1]
    return out, total - len(verts)


def _insert_midpoints(verts: np.ndarray, h_max: float, cap: int) -> tuple[np.ndarray, int]:
    """Midpoint-split every gap > h_max on the current image, repeatedly."""
    inserted = 0
    while True:
        gaps = np.hypot(*(verts[1:] - verts[:-1]).T)
        bad = gaps > h_max
        if not np.any(bad):
            return verts, inserted
        n_new = int(bad.sum())
        if len(verts) + n_new > cap:
            raise ResolutionError(
                f"curve needs {len(verts) + n_new} vertices, exceeding the cap of {cap}")
        mids = 0.5 * (verts[:-1][bad] + verts[1:][bad])
        idx = np.flatnonzero(bad) + 1
        verts = np.insert(verts, idx, mids, axis=0)
        inserted += n_new


def _curve_step(
    verts: np.ndarray,
    ms: ModeSet,
    dt: float,
    rng: np.random.Generator,
    h_max: float,
    cap: int,
) -> tuple[np.ndarray, int]:
    noise = NoiseDraw.draw(ms, rng)
    verts = verts + velocity_increment(ms, verts, noise, dt)
    return _insert_midpoints(verts, h_max, cap)


def evolve_curve(
    curve: CurveImage,
    ms: ModeSet,
    dt: float,
    t_end: float,
    rng: np.random.Generator,
    *,
    pre_refine_to: float = 0.02,
    vertex_cap: int = 200_000,
) -> tuple[CurveImage, CurveReport]:
    """Advect a polyline to time ``t_end`` with per-step midpoint refinement.

    The input polyline is first refined to spacing ``pre_refine_to``;
    thereafter every step advances all vertices with the shared draw and
    splits any gap exceeding ``curve.h_max`` at its midpoint on the
    current image.  Inserted points are not exact flow images of the
    initial curve, which can only make the tracked set smaller, so
    downstream hit detection under-reports rather than over-reports.

    Raises :class:`ResolutionError` when the vertex cap is exceeded;
    ``t_end <= 0`` returns the input unchanged.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        return curve, CurveReport(n_vertices=len(curve.vertices))
    verts, _ = _refine_gaps(curve.vertices, min(pre_refine_to, curve.h_max), vertex_cap)
    n_steps, h = _substeps(t_end, dt)
    report = CurveReport()
    for _ in range(n_steps):
        verts, ins = _curve_step(verts, ms, h, rng, curve.h_max, vertex_cap)
        report.steps += 1
        report.insertions += ins
    gaps = np.hypot(*(verts[1:] - verts[:-1]).T)
    report.max_gap = float(gaps.max())
    report.n_vertices = len(verts)
    return CurveImage(vertices=verts, h_max=curve.h_max), report


def _diam_at_least(verts: np.ndarray, threshold: float) -> bool:
    """Exact predicate ``diameter(verts) >= threshold`` with cheap bounds."""
    x, y = verts[:, 0], verts[:, 1]
    dx = x.max() - x.min()
    dy = y.max() - y.min()
    # Lower bound: axis widths and diagonal widths are attained distances.
    s, d = x + y, x - y
    lower = max(dx, dy, (s.max() - s.min()) / math.sqrt(2.0), (d.max() - d.min()) / math.sqrt(2.0))
    if lower >= threshold:
        return True
    if math.hypot(dx, dy) < threshold:   # bounding-box diagonal upper bound
        return False
    return diameter(verts) >= threshold


def run_until_hit(
    curve: CurveImage,
    ms: ModeSet,
    v,
    R: float,
    dt: float,
    t_max: float,
    rng: np.random.Generator,
    *,
    pre_refine_to: float = 0.02,
    vertex_cap: int = 200_000,
    diam_threshold: float = 1.0,
) -> HitResult:
    """First time the advected curve meets ``B_R(v)`` while having diameter >= 1.

    Both conditions are checked at step boundaries (tau resolution is
    ``dt``), including at ``t = 0``.  Timing out at ``t_max`` is a
    regular result with ``hit=False``; exceeding the vertex cap raises
    :class:`ResolutionError`.
    """
    if R < 1:
        raise ValueError("R must be at least 1 (the hit target is an R-neighbourhood)")
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise ValueError("v must be a 2-vector")
    verts, _ = _refine_gaps(curve.vertices, min(pre_refine_to, curve.h_max), vertex_cap)

    def check(verts: np.ndarray) -> bool:
        if np.min(np.hypot(verts[:, 0] - v[0], verts[:, 1] - v[1])) > R:
            return False
        return _diam_at_least(verts, diam_threshold)

    if check(verts):
        return HitResult(hit=True, tau=0.0, diam_at_hit=float(diameter(verts)))
    n_steps = max(1, int(round(t_max / dt)))
    for n in range(1, n_steps + 1):
        verts, _ = _curve_step(verts, ms, dt, rng, curve.h_max, vertex_cap)
        if check(verts):
            return HitResult(hit=True, tau=n * dt, diam_at_hit=float(diameter(verts)))
    return HitResult(hit=False)
