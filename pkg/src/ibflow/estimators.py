"""Monte Carlo estimators and experiments built on the flow integrator.

Replica seeding contract: every estimator accepts ``rng`` as either an
integer master seed or a ``numpy.random.Generator``.  With a master
seed, replica i of estimator "name" draws from the substream
``(stream_id(name), i)`` — runs are reproducible and replica-addressable.
With a Generator, substreams are spawned from it in a fixed order.
Aggregation always runs in ascending replica order, so results do not
depend on worker scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .covariance import Mode, ModeSet, moduli
from .flow import (
    CurveImage,
    NoiseDraw,
    ResolutionError,
    _curve_step,
    _diam_at_least,
    _refine_gaps,
    _substeps,
    jacobian_increment,
    run_until_hit,
    simulate_paths,
    velocity_increment,
)
from .geometry import build_lip_net, diameter, hausdorff_estimate
from .rng import replica_rng, stream_id

__all__ = [
    "EstimateResult",
    "LyapunovEstimate",
    "StableNormEstimate",
    "ShapeReport",
    "PersistenceResult",
    "SupportReport",
    "ScalingReport",
    "one_point_diffusivity",
    "estimate_lyapunov",
    "estimate_stable_norm",
    "shape_experiment",
    "diameter_persistence",
    "support_experiment",
    "scaling_check",
]


# --------------------------------------------------------------------------
# plumbing

def _stream_generators(rng, stream_name: str, n: int) -> list[np.random.Generator]:
    """n replica generators from a master seed (named stream) or a Generator."""
    if isinstance(rng, (int, np.integer)):
        sid = stream_id(stream_name)
        return [replica_rng(int(rng), i, stream=sid) for i in range(n)]
    if isinstance(rng, np.random.Generator):
        return rng.spawn(n)
    raise TypeError("rng must be an integer master seed or a numpy.random.Generator")


def _map_ordered(fn, items, threads: int):
    """Map preserving input order; thread pool only when threads > 1."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class EstimateResult:
    """Sample mean with its standard error and normal 95% interval."""

    value: float
    std_error: float
    n_replicas: int
    ci95: tuple[float, float]

    @classmethod
    def from_samples(cls, samples) -> "EstimateResult":
        s = np.asarray(samples, dtype=float)
        if s.size < 2:
            raise ValueError(
                "at least two samples are required: std_error is undefined otherwise")
        value = float(s.mean())
        std_error = float(s.std(ddof=1) / math.sqrt(s.size))
        return cls(value=value, std_error=std_error, n_replicas=int(s.size),
                   ci95=(value - 1.96 * std_error, value + 1.96 * std_error))

    @classmethod
    def undefined(cls, n: int) -> "EstimateResult":
        return cls(value=math.nan, std_error=math.nan, n_replicas=int(n),
                   ci95=(math.nan, math.nan))


# --------------------------------------------------------------------------
# single-point diffusivity

def one_point_diffusivity(
    ms: ModeSet,
    T: float,
    dt: float,
    N: int,
    rng,
    *,
    threads: int = 1,
) -> EstimateResult:
    """Estimate ``E|x_T - x_0|^2 / (2 T)`` for one tracked point.

    Each replica integrates an independent single-point trajectory; the
    exact one-point step law makes the estimate consistent with 1 for
    any properly normalized model, at every dt.
    """
    if T <= 0 or dt <= 0 or dt > T:
        raise ValueError("need 0 < dt <= T")
    if N < 2:
        raise ValueError("at least two replicas are required: std_error is undefined otherwise")
    if N < 100:
        raise ValueError("N must be at least 100 for a meaningful diffusivity estimate")
    n_steps, h = _substeps(T, dt)
    gens = _stream_generators(rng, "diffusivity", N)

    def one(gen: np.random.Generator) -> float:
        x = np.zeros(2)
        for _ in range(n_steps):
            x = x + velocity_increment(ms, x, NoiseDraw.draw(ms, gen), h)
        return float(x @ x) / (2.0 * T)

    return EstimateResult.from_samples(_map_ordered(one, gens, threads))


# --------------------------------------------------------------------------
# Lyapunov exponents via QR renormalization

@dataclass
class LyapunovEstimate:
    """Both exponents plus the per-replica bookkeeping behind them."""

    mu1: EstimateResult
    mu2: EstimateResult
    per_replica_mu1: np.ndarray
    per_replica_mu2: np.ndarray
    per_replica_logdet_rate: np.ndarray
    T: float
    dt: float
    renorm_every: int

    def __iter__(self):
        return iter((self.mu1, self.mu2))


def _lyapunov_replica(
    ms: ModeSet, n_steps: int, h: float, renorm_every: int, gen: np.random.Generator,
) -> tuple[float, float, float]:
    x = np.zeros(2)
    frame = np.eye(2)
    acc = np.zeros(2)
    logdet = 0.0

    def renormalize(J: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(J)) or np.abs(J).max() > 1e300:
            raise RuntimeError(
                f"Jacobian overflowed before renormalization; use a smaller "
                f"renorm_every than {renorm_every}")
        q, r = np.linalg.qr(J)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        r = signs[:, None] * r
        q = q * signs[None, :]
        acc[:] += np.log(np.diag(r))
        return q

    pending = 0
    for k in range(n_steps):
        noise = NoiseDraw.draw(ms, gen)
        dx = velocity_increment(ms, x, noise, h)
        dj = jacobian_increment(ms, x, noise, h)
        dj[0, 0] += 1.0
        dj[1, 1] += 1.0
        logdet += math.log(abs(dj[0, 0] * dj[1, 1] - dj[0, 1] * dj[1, 0]))
        frame = dj @ frame
        x = x + dx
        pending += 1
        if pending == renorm_every:
            frame = renormalize(frame)
            pending = 0
    if pending:
        renormalize(frame)
    total_t = n_steps * h
    return float(acc[0] / total_t), float(acc[1] / total_t), logdet / total_t


def estimate_lyapunov(
    ms: ModeSet,
    T: float,
    dt: float,
    N: int,
    renorm_every: int,
    rng,
    *,
    threads: int = 1,
) -> LyapunovEstimate:
    """Both Lyapunov exponents from N single-trajectory Jacobian runs.

    The Jacobian is QR-renormalized every ``renorm_every`` steps with a
    positive-diagonal convention; the accumulated log-diagonals are pure
    bookkeeping, so the estimates are independent of the renormalization
    cadence up to rounding.  ``per_replica_logdet_rate`` accumulates
    ``log|det|`` of every single-step factor independently, giving the
    cross-check ``mu1 + mu2 = logdet rate`` per replica.
    """
    if T <= 0 or dt <= 0 or dt > T:
        raise ValueError("need 0 < dt <= T")
    if N < 2:
        raise ValueError("at least two replicas are required")
    if renorm_every < 1:
        raise ValueError("renorm_every must be at least 1")
    n_steps, h = _substeps(T, dt)
    gens = _stream_generators(rng, "lyapunov", N)
    rows = _map_ordered(
        lambda gen: _lyapunov_replica(ms, n_steps, h, renorm_every, gen), gens, threads)
    mu1 = np.array([r[0] for r in rows])
    mu2 = np.array([r[1] for r in rows])
    rate = np.array([r[2] for r in rows])
    return LyapunovEstimate(
        mu1=EstimateResult.from_samples(mu1),
        mu2=EstimateResult.from_samples(mu2),
        per_replica_mu1=mu1,
        per_replica_mu2=mu2,
        per_replica_logdet_rate=rate,
        T=float(T), dt=float(dt), renorm_every=int(renorm_every))


# --------------------------------------------------------------------------
# stable norm from first-passage times

@dataclass
class StableNormEstimate:
    """Hitting-time norm estimates per target distance, plus the growth rate.

    ``tau_over_t[i]`` estimates (hitting time)/|v| at ``distances[i]``;
    the largest distance's value is the extrapolated norm and its
    reciprocal the linear growth rate ``k_hat``.  Censored runs
    (timeouts and resolution aborts) are counted per distance and the
    whole estimate is flagged unreliable when more than 20% of runs were
    censored.
    """

    direction: np.ndarray
    distances: np.ndarray
    tau_over_t: list[EstimateResult]
    samples: list[np.ndarray]
    extrapolated_norm: float
    k_hat: float
    n_rep: int
    t_max: np.ndarray
    k_rough: float
    n_timeout: np.ndarray
    n_aborted: np.ndarray
    censored_fraction: float
    reliable: bool


def _unit_segment_curve(direction: np.ndarray, h_max: float) -> CurveImage:
    return CurveImage.segment((0.0, 0.0), tuple(direction), h_max=h_max)


def estimate_stable_norm(
    ms: ModeSet,
    direction,
    distances,
    R: float,
    dt: float,
    n_rep: int,
    t_max_factor: float,
    rng,
    *,
    h_max: float = 0.05,
    vertex_cap: int = 200_000,
    pilot_reps: int = 8,
    k_rough: float | None = None,
    threads: int = 1,
) -> StableNormEstimate:
    """First-passage estimate of the stable norm along one direction.

    For each target distance, ``n_rep`` independent runs advect a unit
    segment anchored at the origin and aligned with ``direction`` until
    it meets the R-neighbourhood of ``|v| * direction`` as a large set.
    Budgets: a pilot at the smallest distance calibrates a rough speed
    ``k_rough`` (seeded from the analytic stretching modulus), and each
    distance then gets ``t_max = t_max_factor * |v| / k_rough``.  Pass
    ``k_rough`` explicitly to skip the pilot — e.g. to give several
    directions identical time budgets for a fair comparison.
    """
    dists = np.asarray(distances, dtype=float)
    if dists.ndim != 1 or dists.size == 0:
        raise ValueError("distances must be a non-empty 1-d array")
    if np.any(np.diff(dists) <= 0):
        raise ValueError("distances must be strictly increasing")
    if dists[0] < 10.0:
        raise ValueError("distances must all be at least 10 (asymptotic regime)")
    if R < 1:
        raise ValueError("R must be at least 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_rep < 2:
        raise ValueError("n_rep must be at least 2")
    if t_max_factor <= 0:
        raise ValueError("t_max_factor must be positive")
    u = np.asarray(direction, dtype=float)
    norm = float(np.hypot(*u))
    if norm == 0.0 or u.shape != (2,):
        raise ValueError("direction must be a nonzero 2-vector")
    u = u / norm
    mm = moduli(ms)
    if mm.mu1 <= 0:
        raise ValueError(
            "stable-norm estimation requires a model with positive top "
            "stretching modulus (beta_n > beta_l)")
    # Extreme-value heuristic for the linear spreading speed; pilot prior only.
    k_prior = 2.0 * math.sqrt(mm.mu1)
    curve = _unit_segment_curve(u, h_max)

    def one_run(args) -> tuple[str, float]:
        gen, v, t_max = args
        try:
            res = run_until_hit(curve, ms, v, R, dt, t_max, gen, vertex_cap=vertex_cap)
        except ResolutionError:
            return ("aborted", math.nan)
        if res.hit:
            return ("hit", res.tau)
        return ("timeout", math.nan)

    if k_rough is None:
        # Pilot: calibrate a rough speed at the smallest distance.  The
        # analytic prior can overshoot the true front speed badly, so the
        # pilot budget doubles (fresh substreams each try) until nearly
        # every run hits: a median taken over a half-censored sample sees
        # only the fast tail and would overstate the speed, starving the
        # main phase of time budget.
        n_pilot = min(pilot_reps, n_rep)
        pilot_v = dists[0] * u
        accepted = None
        fallback = None
        for attempt in range(5):
            pilot_tmax = t_max_factor * dists[0] / (k_prior / 2.0 ** attempt)
            pilot_gens = _stream_generators(rng, f"stable-norm-pilot{attempt}", n_pilot)
            pilot = _map_ordered(one_run, [(g, pilot_v, pilot_tmax) for g in pilot_gens],
                                 threads)
            pilot_taus = [tau for kind, tau in pilot if kind == "hit"]
            if len(pilot_taus) >= max(2, n_pilot - 1):
                accepted = dists[0] / float(np.median(pilot_taus))
                break
            if len(pilot_taus) >= (n_pilot + 1) // 2:
                fallback = dists[0] / float(np.median(pilot_taus))
        if accepted is not None:
            k_rough = accepted
        elif fallback is not None:
            k_rough = fallback
        else:
            k_rough = k_prior
    elif not k_rough > 0:
        raise ValueError("k_rough must be positive when given")

    tau_over_t: list[EstimateResult] = []
    samples: list[np.ndarray] = []
    t_maxes = np.empty(len(dists))
    n_timeout = np.zeros(len(dists), dtype=int)
    n_aborted = np.zeros(len(dists), dtype=int)
    for i, d in enumerate(dists):
        t_maxes[i] = t_max_factor * d / k_rough
        # Replica j draws the same substream at every distance: the run to a
        # farther target is then the same flow realization watched longer, so
        # distance-to-distance comparisons are paired and their independent-SE
        # bounds are conservative.
        gens = _stream_generators(rng, "stable-norm-main", n_rep)
        outcomes = _map_ordered(one_run, [(g, d * u, t_maxes[i]) for g in gens], threads)
        taus = np.array([tau for kind, tau in outcomes if kind == "hit"])
        n_timeout[i] = sum(1 for kind, _ in outcomes if kind == "timeout")
        n_aborted[i] = sum(1 for kind, _ in outcomes if kind == "aborted")
        ratio = taus / d
        samples.append(ratio)
        tau_over_t.append(
            EstimateResult.from_samples(ratio) if ratio.size >= 2
            else EstimateResult.undefined(ratio.size))
    extrapolated = tau_over_t[-1].value
    k_hat = 1.0 / extrapolated if extrapolated > 0 else math.nan
    censored = float((n_timeout.sum() + n_aborted.sum()) / (n_rep * len(dists)))
    reliable = censored <= 0.2 and math.isfinite(k_hat)
    return StableNormEstimate(
        direction=u, distances=dists, tau_over_t=tau_over_t, samples=samples,
        extrapolated_norm=extrapolated, k_hat=k_hat, n_rep=int(n_rep),
        t_max=t_maxes, k_rough=float(k_rough), n_timeout=n_timeout,
        n_aborted=n_aborted, censored_fraction=censored, reliable=reliable)


# --------------------------------------------------------------------------
# shape of the swept set

@dataclass
class ShapeReport:
    """Empirical check of the swept set against the growth ball."""

    T: float
    eps: float
    k_hat: float
    n_directions: int
    n_rep: int
    double_inclusion_fraction: float
    outer_fraction: float
    inner_fraction: float
    std_error: float


def shape_experiment(
    ms: ModeSet,
    T: float,
    eps: float,
    n_directions: int,
    dt: float,
    n_rep: int,
    rng,
    *,
    k_hat: float,
    R: float = 1.0,
    h_max: float = 0.05,
    vertex_cap: int = 200_000,
    threads: int = 1,
) -> ShapeReport:
    """Probability that the swept curve image fits the scaled growth ball.

    Outer event: every swept vertex up to time T stays inside radius
    ``(1+eps) * T * k_hat``.  Inner event: for each probe direction, the
    point at radius ``(1-eps) * T * k_hat`` is approached within R by
    some swept vertex.  Reports the frequency of the double inclusion.
    """
    if T <= 0 or dt <= 0 or dt > T:
        raise ValueError("need 0 < dt <= T")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if n_directions < 1 or n_rep < 1:
        raise ValueError("n_directions and n_rep must be positive")
    if not k_hat > 0:
        raise ValueError("k_hat must be positive (estimate it first)")
    outer_radius = (1.0 + eps) * T * k_hat
    inner_radius = max((1.0 - eps), 0.0) * T * k_hat
    angles = np.arange(n_directions) * (2.0 * np.pi / n_directions)
    targets = inner_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    n_steps, h = _substeps(T, dt)
    gens = _stream_generators(rng, "shape", n_rep)
    base = _unit_segment_curve(np.array([1.0, 0.0]), h_max)

    def one(gen: np.random.Generator) -> tuple[bool, bool]:
        verts, _ = _refine_gaps(base.vertices, min(0.02, h_max), vertex_cap)

        def update(verts, max_rad, min_d):
            radii = np.hypot(verts[:, 0], verts[:, 1])
            max_rad = max(max_rad, float(radii.max()))
            for j, tgt in enumerate(targets):
                d = float(np.hypot(verts[:, 0] - tgt[0], verts[:, 1] - tgt[1]).min())
                min_d[j] = min(min_d[j], d)
            return max_rad

        min_d = np.full(n_directions, np.inf)
        max_rad = update(verts, 0.0, min_d)
        for _ in range(n_steps):
            verts, _ = _curve_step(verts, ms, h, gen, h_max, vertex_cap)
            max_rad = update(verts, max_rad, min_d)
        return max_rad <= outer_radius, bool(np.all(min_d <= R))

    results = _map_ordered(one, gens, threads)
    outer = np.array([a for a, _ in results])
    inner = np.array([b for _, b in results])
    both = outer & inner
    p = float(both.mean())
    return ShapeReport(
        T=float(T), eps=float(eps), k_hat=float(k_hat),
        n_directions=int(n_directions), n_rep=int(n_rep),
        double_inclusion_fraction=p,
        outer_fraction=float(outer.mean()),
        inner_fraction=float(inner.mean()),
        std_error=_binomial_se(p, n_rep))


# --------------------------------------------------------------------------
# diameter persistence

@dataclass
class PersistenceResult:
    """Fraction of replicas whose tracked diameter dipped below 1."""

    drop_fraction: float
    std_error: float
    n_rep: int
    T: float
    dt: float


def diameter_persistence(
    ms: ModeSet,
    gamma: CurveImage,
    T: float,
    dt: float,
    n_rep: int,
    rng,
    *,
    vertex_cap: int = 200_000,
    threads: int = 1,
) -> PersistenceResult:
    """Probability that a large curve stops being large late in the run.

    Each replica advects ``gamma`` to time T and records whether the
    tracked diameter fell below 1 at any step boundary in
    ``[sqrt(T), T]``.  The initial curve must itself be large
    (diameter >= 1).
    """
    if n_rep < 1:
        raise ValueError("n_rep must be positive")
    if T < 1 or dt <= 0 or dt > T:
        raise ValueError("need T >= 1 and 0 < dt <= T")
    if diameter(gamma.vertices) < 1.0:
        raise ValueError("the initial curve must have diameter at least 1")
    n_steps, h = _substeps(T, dt)
    t_low = math.sqrt(T) - 1e-9
    gens = _stream_generators(rng, "persistence", n_rep)

    def one(gen: np.random.Generator) -> bool:
        verts, _ = _refine_gaps(gamma.vertices, min(0.02, gamma.h_max), vertex_cap)
        for k in range(1, n_steps + 1):
            verts, _ = _curve_step(verts, ms, h, gen, gamma.h_max, vertex_cap)
            if k * h >= t_low and not _diam_at_least(verts, 1.0):
                return True
        return False

    drops = np.array(_map_ordered(one, gens, threads))
    p = float(drops.mean())
    return PersistenceResult(drop_fraction=p, std_error=_binomial_se(p, n_rep),
                             n_rep=int(n_rep), T=float(T), dt=float(dt))


# --------------------------------------------------------------------------
# support experiment: scaled trajectories vs the Lipschitz cone

@dataclass
class SupportReport:
    """Per-(horizon, replica) Hausdorff components and per-horizon medians."""

    k_hat: float
    t_list: np.ndarray
    m_t: int
    n_rep: int
    rows: list[tuple]                       # (T, replica, d_upper, d_lower, d_h)
    median_d_h: dict
    iqr_d_h: dict
    median_d_upper: dict
    median_d_lower: dict
    net_size: int
    net_exhaustive: bool
    net_coverage_radius: float


def support_experiment(
    ms: ModeSet,
    X_sample,
    T_list,
    m_t: int,
    net_directions: int,
    net_levels: int,
    net_cap: int,
    eps_tol: float,
    n_rep: int,
    rng,
    *,
    k_hat: float,
    dt: float = 0.05,
    poly_verts: int = 64,
    threads: int = 1,
) -> SupportReport:
    """Hausdorff distance between scaled trajectory samples and the speed cone.

    Per horizon T and replica: integrate the sample points to horizon T
    on the uniform ``m_t``-point scaled grid, then compare the scaled
    bundle against a shared net of the speed-``k_hat`` cone.  Reports
    every row plus per-horizon medians and interquartile ranges.
    ``X_sample=None`` uses the default sample: 50 evenly spaced points
    on the unit segment from the origin.
    """
    if X_sample is None:
        X_sample = np.stack(
            [np.linspace(0.0, 1.0, 50), np.zeros(50)], axis=1)
    pts = np.atleast_2d(np.asarray(X_sample, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ValueError("X_sample must be a non-empty (P, 2) point array")
    t_arr = np.asarray(T_list, dtype=float)
    if t_arr.ndim != 1 or t_arr.size == 0 or np.any(t_arr <= 0):
        raise ValueError("T_list must be a non-empty array of positive horizons")
    if m_t < 2:
        raise ValueError("m_t must be at least 2")
    if n_rep < 1:
        raise ValueError("n_rep must be positive")
    if not k_hat > 0:
        raise ValueError("k_hat must be positive (estimate it first)")
    save_times = np.linspace(0.0, 1.0, m_t)
    net_rng = _stream_generators(rng, "support-net", 1)[0]
    net = build_lip_net(k_hat, m_t, net_directions, net_levels, net_cap, net_rng)

    rows: list[tuple] = []
    for ti, T in enumerate(t_arr):
        gens = _stream_generators(rng, f"support-T{ti}", n_rep)

        def one(args):
            rep, gen = args
            bundle = simulate_paths(pts, ms, T, dt, save_times, gen)
            est = hausdorff_estimate(bundle, k_hat, net, eps_tol, poly_verts)
            return (float(T), rep, est.d_upper, est.d_lower, est.d_h)

        rows.extend(_map_ordered(one, list(enumerate(gens)), threads))

    def per_t(col: int, fn) -> dict:
        out = {}
        for T in t_arr:
            vals = np.array([r[col] for r in rows if r[0] == float(T)])
            out[float(T)] = float(fn(vals))
        return out

    iqr = lambda v: np.percentile(v, 75) - np.percentile(v, 25)
    return SupportReport(
        k_hat=float(k_hat), t_list=t_arr, m_t=int(m_t), n_rep=int(n_rep),
        rows=rows,
        median_d_h=per_t(4, np.median), iqr_d_h=per_t(4, iqr),
        median_d_upper=per_t(2, np.median), median_d_lower=per_t(3, np.median),
        net_size=net.sample_count, net_exhaustive=net.exhaustive,
        net_coverage_radius=net.coverage_radius)


# --------------------------------------------------------------------------
# spatial-scaling identity

@dataclass
class ScalingReport:
    """Speed of the spatially scaled model against the predicted multiple."""

    r: float
    k_hat_base: float
    k_hat_scaled: float
    ratio: float
    ratio_ci95: tuple[float, float]
    mu1_base: float
    mu1_scaled: float
    base: StableNormEstimate
    scaled: StableNormEstimate


def scaled_mode_set(ms: ModeSet, r: float) -> ModeSet:
    """Model with every wavevector multiplied by r (covariance x -> r x)."""
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    modes = tuple(Mode(k=(r * m.k[0], r * m.k[1]), e=m.e, sigma2=m.sigma2)
                  for m in ms.modes)
    return ModeSet(modes=modes, angular_order=ms.angular_order)


def scaling_check(
    ms: ModeSet,
    r: float,
    distances,
    R: float,
    dt: float,
    n_rep: int,
    t_max_factor: float,
    rng,
    *,
    k_rough: float | None = None,
    h_max: float = 0.05,
    vertex_cap: int = 200_000,
    threads: int = 1,
) -> ScalingReport:
    """Check that shrinking all wavevectors by r shrinks the speed by r.

    Estimates the growth rate on the base model and on the spatially
    scaled model, and reports ``k_scaled / (r * k_base)`` with a
    propagated 95% interval; the analytic stretching moduli (which scale
    exactly by r^2) are included for the exact half of the check.  An
    explicit ``k_rough`` skips both pilots: the base arm uses it as-is
    and the scaled arm uses ``r * k_rough``, the speed the scaling
    hypothesis itself predicts, so both arms get equivalent budgets.
    """
    sms = scaled_mode_set(ms, r)
    e1 = np.array([1.0, 0.0])
    gens = _stream_generators(rng, "scaling", 2)
    base = estimate_stable_norm(ms, e1, distances, R, dt, n_rep, t_max_factor,
                                gens[0], k_rough=k_rough, h_max=h_max,
                                vertex_cap=vertex_cap, threads=threads)
    scaled = estimate_stable_norm(sms, e1, distances, R, dt, n_rep, t_max_factor,
                                  gens[1],
                                  k_rough=None if k_rough is None else r * k_rough,
                                  h_max=h_max, vertex_cap=vertex_cap,
                                  threads=threads)
    ratio = scaled.k_hat / (r * base.k_hat)
    rel_b = base.tau_over_t[-1].std_error / base.tau_over_t[-1].value
    rel_s = scaled.tau_over_t[-1].std_error / scaled.tau_over_t[-1].value
    rel = math.sqrt(rel_b * rel_b + rel_s * rel_s)
    half = 1.96 * abs(ratio) * rel
    return ScalingReport(
        r=float(r), k_hat_base=base.k_hat, k_hat_scaled=scaled.k_hat,
        ratio=float(ratio), ratio_ci95=(ratio - half, ratio + half),
        mu1_base=moduli(ms).mu1, mu1_scaled=moduli(sms).mu1,
        base=base, scaled=scaled)
