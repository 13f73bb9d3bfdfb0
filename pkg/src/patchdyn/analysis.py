"""Diagnostics computed from trajectories.

Occupation of the boundary layer, per-patch extinction slopes, persistence
verdicts, convergence of ensembles started far apart, synchronization of the
two-patch degenerate slice and the fast-dispersal limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .lyapunov import LyapunovEstimate, r_best, r_timeavg
from .model import Linear, ModelSpec, effective_sigma, is_irreducible
from .rng import generator
from .sde import Path, SimConfig, simulate_logistic_1d, simulate_x, simulate_x_ensemble
from .stats import batch_means, stderr_of

BAND_FLOOR = 1e-3
SLOPE_BATCHES = 10
SYNC_FLOOR = 1e-10
EXACT_SYNC_TOL = 1e-14


# ---------------------------------------------------------------------------
# occupation
# ---------------------------------------------------------------------------


@dataclass
class OccupationStats:
    eta: float
    fraction: float
    horizon: float

    def to_dict(self) -> dict:
        return {"eta": self.eta, "fraction": self.fraction, "horizon": self.horizon}


def occupation_fraction(path: Path, eta: float, t_min: float = 0.0) -> OccupationStats:
    """Time-weighted fraction of ``[t_min, t_end]`` with some ``X_i <= eta``."""
    if len(path) == 0:
        raise ValueError("empty path")
    t = path.times
    keep = t >= t_min
    t = t[keep]
    if path.log_states is not None:
        inside = (path.log_states[keep] <= math.log(eta)).any(axis=1)
    else:
        inside = (path.states[keep] <= eta).any(axis=1)
    if t.size < 2:
        return OccupationStats(eta, float(inside[0]) if t.size else 0.0, 0.0)
    dt = np.diff(t)
    w = 0.5 * (inside[1:].astype(float) + inside[:-1])
    frac = float(np.sum(w * dt) / (t[-1] - t[0]))
    return OccupationStats(eta, min(max(frac, 0.0), 1.0), float(t[-1] - t[0]))


# ---------------------------------------------------------------------------
# extinction slopes
# ---------------------------------------------------------------------------


@dataclass
class SlopeEstimate:
    patch: int
    slope: float
    stderr: float


def _ols_slope(t, y):
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def extinction_slopes(path: Path, window=None, n_batches: int = SLOPE_BATCHES) -> list:
    """Least-squares slope of ``ln X_i`` against ``t`` for every patch.

    ``window`` is ``(t0, t1)``; by default the part after the configured
    burn-in.  The stderr comes from the spread of the slopes fitted on
    ``n_batches`` consecutive sub-windows.
    """
    t = path.times
    lx = path.log_states if path.log_states is not None else np.log(path.states)
    if window is None:
        burn = path.cfg.burn_in if path.cfg is not None else 0.0
        window = (burn * t[-1], t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    t, lx = t[sel], lx[sel]
    if t.size < 2 * n_batches:
        raise ValueError("fit window holds too few samples")
    if not np.all(np.isfinite(lx)):
        bad = int(np.flatnonzero(~np.isfinite(lx).all(axis=0))[0])
        raise ValueError(f"patch hit numerical zero: patch {bad + 1}")
    size = t.size // n_batches
    out = []
    for i in range(lx.shape[1]):
        slope = _ols_slope(t, lx[:, i])
        sub = [
            _ols_slope(t[j * size : (j + 1) * size], lx[j * size : (j + 1) * size, i])
            for j in range(n_batches)
        ]
        out.append(SlopeEstimate(i, slope, stderr_of(sub)))
    return out


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    label: str
    r_estimate: LyapunovEstimate
    band: float

    def to_dict(self) -> dict:
        return {"label": self.label, "band": self.band, "r": self.r_estimate.to_dict()}


def verdict_from(est: LyapunovEstimate, band: Optional[float] = None) -> Verdict:
    width = max(3.0 * est.stderr, BAND_FLOOR if band is None else band)
    if est.value > width:
        label = "Persistent"
    elif est.value < -width:
        label = "Extinct"
    else:
        label = "Inconclusive"
    return Verdict(label, est, width)


def classify(spec: ModelSpec, cfg: Optional[SimConfig] = None, band: Optional[float] = None) -> Verdict:
    """Persistent / Extinct / Inconclusive from the sign of ``r``.

    ``band`` replaces the 1e-3 floor of the decision half-width; the
    half-width is never below three standard errors.
    """
    return verdict_from(r_best(spec, cfg), band)


# ---------------------------------------------------------------------------
# convergence of ensembles
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    times: np.ndarray
    distance: np.ndarray
    null_threshold: np.ndarray
    kendall_tau: float
    trend_pvalue: float
    n_replicates: int

    @property
    def ratio(self) -> float:
        """Distance at the last checkpoint over distance at the first."""
        return float(self.distance[-1] / self.distance[0]) if self.distance[0] > 0 else math.nan

    def rows(self) -> list:
        return [
            {"t": float(t), "w1": float(d), "null95": float(q)}
            for t, d, q in zip(self.times, self.distance, self.null_threshold)
        ]


def _null_quantile(a, b, n_splits, rng, q=0.95):
    pool = np.concatenate([a, b])
    m = a.size
    d = np.empty(n_splits)
    for i in range(n_splits):
        perm = rng.permutation(pool.size)
        d[i] = stats.wasserstein_distance(pool[perm[:m]], pool[perm[m:]])
    return float(np.quantile(d, q))


def convergence_distance(
    spec: ModelSpec,
    cfg: SimConfig,
    x0_a,
    x0_b,
    checkpoints: Sequence[float],
    n_replicates: int = 500,
    n_null: int = 200,
) -> ConvergenceReport:
    """W1 distance between the laws of ``S(t)`` from two initial states.

    The two ensembles use disjoint replicate seeds, so equal initial states
    give pure sampling noise.  ``null_threshold`` is the 95th percentile of
    W1 under random relabelling of the pooled samples.
    """
    times = np.asarray(checkpoints, dtype=float)
    cfg = cfg.with_(t_end=float(times[-1]))
    xa = simulate_x_ensemble(spec, cfg, x0_a, n_replicates, times).sum(axis=2)
    xb = simulate_x_ensemble(spec, cfg, x0_b, n_replicates, times, offset=n_replicates).sum(axis=2)
    rng = generator(cfg.seed)
    dist = np.array([stats.wasserstein_distance(xa[:, j], xb[:, j]) for j in range(times.size)])
    null = np.array([_null_quantile(xa[:, j], xb[:, j], n_null, rng) for j in range(times.size)])
    if times.size > 1:
        tau, p = stats.kendalltau(times, dist)
    else:
        tau, p = math.nan, math.nan
    return ConvergenceReport(times, dist, null, float(tau), float(p), n_replicates)


# ---------------------------------------------------------------------------
# synchronization in the degenerate equal-volatility slice
# ---------------------------------------------------------------------------


@dataclass
class SyncReport:
    times: np.ndarray
    z: np.ndarray
    z_final_dev: float
    ratios: np.ndarray
    slope: float
    slope_bound: float
    exact_sync: bool
    u_path: Path = field(repr=False)

    @property
    def slope_ok(self) -> bool:
        return self.exact_sync or self.slope <= self.slope_bound

    def to_dict(self) -> dict:
        return {
            "z_final_dev": self.z_final_dev,
            "ratio_x1_u": float(self.ratios[0]),
            "ratio_x2_u": float(self.ratios[1]),
            "slope": self.slope,
            "slope_bound": self.slope_bound,
            "exact_sync": self.exact_sync,
        }


def comparison_logistic(spec: ModelSpec) -> tuple:
    """``(kappa, b, sigma)`` of the scalar logistic diffusion the synchronized system follows."""
    if spec.n != 2 or spec.gamma.shape[1] != 1:
        raise ValueError("synchronization needs two patches driven by a single noise")
    if not all(isinstance(f, Linear) for f in spec.competition):
        raise ValueError("synchronization needs linear competition")
    alpha, beta = spec.D[0, 1], spec.D[1, 0]
    return spec.a[0] - alpha + beta, spec.competition[1].kappa, float(spec.gamma[1, 0])


def sync_diagnostics(path: Path) -> SyncReport:
    """Ratio ``Z = X1/X2`` and comparison with the logistic ``U`` under common noise.

    ``U`` starts at ``X2(0)`` and is driven by the same Gaussian increments,
    which holds when the path's noise has a single driver.
    """
    spec, cfg = path.spec, path.cfg
    if spec is None or cfg is None or path.coords != "x":
        raise ValueError("need an x path that carries its spec and config")
    lx = path.log_states
    if not np.all(np.isfinite(lx)):
        raise ValueError("both patches must stay positive")
    kappa, b, sig = comparison_logistic(spec)
    alpha, beta = spec.D[0, 1], spec.D[1, 0]
    u = simulate_logistic_1d(kappa, b, sig, cfg, float(path.states[0, 1]))
    z = np.exp(lx[:, 0] - lx[:, 1])
    dev = np.abs(z - 1.0)
    ratios = np.exp(lx[-1] - u.log_states[-1, 0])
    exact = bool(dev[0] <= EXACT_SYNC_TOL)
    if exact:
        slope, bound = math.nan, math.nan
    else:
        hit = np.flatnonzero(dev < SYNC_FLOOR)
        stop = int(hit[0]) if hit.size else z.size
        t = path.times[:stop]
        slope = _ols_slope(t, np.log(dev[:stop])) if stop >= 2 else math.nan
        bound = -float(np.mean(alpha * z[:stop] + beta))
    return SyncReport(path.times, z, float(dev[-1]), ratios, slope, bound, exact, u)


def time_average(path: Path, i: int, t_min: float = 0.0, n_batches: int = 50) -> tuple:
    """Batch-means average of coordinate ``i`` over recorded times ``>= t_min``."""
    x = path.states[path.times >= t_min, i]
    mean, se, _ = batch_means(x, n_batches)
    return mean, se


# ---------------------------------------------------------------------------
# fast dispersal
# ---------------------------------------------------------------------------


def dominant_left_eigvec(D, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Stationary law of the patch-switching chain by power iteration on ``exp(D h)``."""
    D = np.asarray(D, dtype=float)
    if not is_irreducible(D):
        raise ValueError("dispersal matrix is reducible: no unique stationary law")
    h = 1.0 / max(np.max(np.abs(np.diag(D))), 1e-300)
    P = linalg.expm(D * h)
    v = np.full(D.shape[0], 1.0 / D.shape[0])
    for _ in range(max_iter):
        nxt = v @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - v)) < tol:
            return nxt
        v = nxt
    return v


def dispersal_limit_table(
    spec: ModelSpec, deltas: Sequence[float], cfg: SimConfig, x0=None
) -> list:
    """Proportions and growth rates as dispersal is sped up by ``delta``.

    Each row holds the time-averaged patch proportions of the full system,
    their sup-distance to the stationary law ``pi`` of the dispersal chain,
    ``r`` by time average and the aggregated single-patch analogue
    ``pi.a - pi.Sigma.pi / 2``.
    """
    if not all(isinstance(f, Linear) for f in spec.competition):
        raise ValueError("fast-dispersal table needs linear competition")
    pi = dominant_left_eigvec(spec.D)
    S = effective_sigma(spec)
    r_agg = float(pi @ spec.a - 0.5 * pi @ S @ pi)
    x0 = np.ones(spec.n) if x0 is None else x0
    dmax = float(np.max(np.abs(np.diag(spec.D))))
    rows = []
    for delta in deltas:
        dt = min(cfg.dt, 0.05 / (delta * dmax))
        c = cfg.with_(dt=dt)
        sd = spec.replace(D=delta * spec.D)
        ys = simulate_x(sd, c, x0).to_ys()
        keep = ys.times >= c.burn_in * c.t_end
        props = ys.states[keep, : spec.n].mean(axis=0)
        est = r_timeavg(sd, c)
        rows.append(
            {
                "delta": float(delta),
                "dt": dt,
                "proportions": props,
                "eigvec": pi,
                "prop_error": float(np.max(np.abs(props - pi))),
                "r_timeavg": est.value,
                "r_stderr": est.stderr,
                "r_aggregated": r_agg,
            }
        )
    return rows
