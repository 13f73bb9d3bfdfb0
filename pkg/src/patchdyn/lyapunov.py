"""Stochastic growth rate ``r`` by three independent routes.

* :func:`r_timeavg`: ergodic average of ``phi(y) = a.y - y.Sigma.y / 2`` along
  the simulated boundary simplex process.
* :func:`r_logslope`: long-run slope of ``ln S`` for the competition-free
  system, driven by the same increments.
* :func:`r_closedform_2patch`: quadrature of ``phi`` against the stationary
  density of the two-patch reduction, or the equilibrium root when that
  reduction is deterministic.

Expanded closed-form formulas for ``r`` are kept in :func:`expanded_r`
for comparison only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate

from .model import ModelSpec, effective_sigma
from .reduce1d import (
    density_moment,
    explicit_log_rho_degenerate,
    explicit_log_rho_nondegenerate,
    reduce_2patch,
    stationary_density,
    ystar,
)
from .sde import SimConfig, iter_simplex_blocks
from .stats import halves_disagree, stderr_of

TIMEAVG_BATCHES = 50
LOGSLOPE_WINDOWS = 20


class Method(str, Enum):
    TIME_AVERAGE = "timeavg"
    LOG_SLOPE = "logslope"
    CLOSED_FORM = "closedform"


@dataclass
class LyapunovEstimate:
    value: float
    stderr: float
    method: Method
    horizon: Optional[float] = None
    dt: Optional[float] = None
    seed: Optional[int] = None
    batch_means: Optional[np.ndarray] = None
    converged: bool = True
    details: dict = field(default_factory=dict)

    @property
    def n_batches(self) -> int:
        return 0 if self.batch_means is None else len(self.batch_means)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "method": Method(self.method).value,
            "horizon": self.horizon,
            "dt": self.dt,
            "seed": self.seed,
        }


def _default_y0(n):
    return np.full(n, 1.0 / n)


def r_timeavg(
    spec: ModelSpec, cfg: SimConfig, y0=None, n_batches: int = TIMEAVG_BATCHES
) -> LyapunovEstimate:
    """Time average of ``phi`` along the simplex path after burn-in."""
    y0 = _default_y0(spec.n) if y0 is None else y0
    N = cfg.n_steps
    burn = cfg.burn_steps
    size = (N - burn) // n_batches
    if size < 1:
        raise ValueError("horizon too short for the requested number of batches")
    start = N - size * n_batches
    sums = np.zeros(n_batches)
    for first, _, _, phi in iter_simplex_blocks(spec, cfg, y0):
        # phi[j] is evaluated at the state after first - 1 + j steps
        k = np.arange(first - 1, first - 1 + phi.size)
        use = k >= start
        if use.any():
            sums += np.bincount((k[use] - start) // size, weights=phi[use], minlength=n_batches)
    means = sums / size
    value = float(means.mean())
    return LyapunovEstimate(
        value=value,
        stderr=stderr_of(means),
        method=Method.TIME_AVERAGE,
        horizon=cfg.t_end,
        dt=cfg.dt,
        seed=cfg.seed,
        batch_means=means,
        converged=not halves_disagree(means),
    )


def r_logslope(
    spec: ModelSpec, cfg: SimConfig, y0=None, n_windows: int = LOGSLOPE_WINDOWS
) -> LyapunovEstimate:
    """Slope of ``ln S`` over ``n_windows`` equal windows after burn-in."""
    y0 = _default_y0(spec.n) if y0 is None else y0
    N = cfg.n_steps
    burn = cfg.burn_steps
    size = (N - burn) // n_windows
    if size < 1:
        raise ValueError("horizon too short for the requested number of windows")
    start = N - size * n_windows
    bounds = start + size * np.arange(n_windows + 1)
    lns_at = np.zeros(n_windows + 1)
    for first, _, lns, _ in iter_simplex_blocks(spec, cfg, y0):
        sel = (bounds >= first) & (bounds < first + lns.size)
        lns_at[sel] = lns[bounds[sel] - first]
    # bounds[0] may be step 0, where ln S = 0 already
    slopes = np.diff(lns_at) / (size * cfg.dt)
    value = float((lns_at[-1] - lns_at[0]) / (size * n_windows * cfg.dt))
    return LyapunovEstimate(
        value=value,
        stderr=stderr_of(slopes),
        method=Method.LOG_SLOPE,
        horizon=cfg.t_end,
        dt=cfg.dt,
        seed=cfg.seed,
        batch_means=slopes,
        converged=not halves_disagree(slopes),
    )


def _same_competition(spec: ModelSpec) -> bool:
    return spec.competition[0] == spec.competition[1]


def r_closedform_2patch(spec: ModelSpec, m: int = 4096) -> LyapunovEstimate:
    """Semi-analytic ``r`` for two patches.

    Noisy reductions integrate ``phi`` against the speed-measure density;
    the reported stderr is the change when the panel count is halved plus
    a bound on the truncated tails.
    Deterministic reductions (one shared driver, equal volatilities) put all
    the mass on the equilibrium root.
    """
    d = reduce_2patch(spec)
    if d.is_deterministic:
        var = 0.5 * (d.s11 + d.s22)
        y = ystar(d.a1, d.a2, d.alpha, d.beta)
        nohorm = _same_competition(spec) and 2.0 * (d.beta - d.alpha) == d.a2 - d.a1
        if nohorm:
            value = d.a1 - d.alpha + d.beta - 0.5 * var
            case = "nohorm"
        else:
            value = d.a1 * y + d.a2 * (1.0 - y) - 0.5 * var
            case = "deterministic"
        return LyapunovEstimate(
            value=float(value),
            stderr=0.0,
            method=Method.CLOSED_FORM,
            details={"case": case, "ystar": y},
        )
    dens = stationary_density(d, m=m)
    value = dens.expect(d.phi)
    coarse = stationary_density(d, eps=dens.eps, m=max(m // 2, 16)).expect(d.phi)
    # discretization change plus the largest contribution the truncated tails could make
    phi_max = float(np.max(np.abs(d.phi(np.linspace(0.0, 1.0, 101)))))
    err = max(abs(value - coarse) + dens.tail_mass * phi_max, 1e-15 * max(1.0, abs(value)))
    return LyapunovEstimate(
        value=float(value),
        stderr=float(err),
        method=Method.CLOSED_FORM,
        details={"case": "density", "eps": dens.eps, "mean_y": density_moment(dens, 1)},
    )


def r_best(spec: ModelSpec, cfg: Optional[SimConfig] = None) -> LyapunovEstimate:
    """Closed form for two patches, time average otherwise."""
    if spec.n == 2:
        return r_closedform_2patch(spec)
    if spec.n == 1:
        S = effective_sigma(spec)
        return LyapunovEstimate(
            value=float(spec.a[0] - 0.5 * S[0, 0]), stderr=0.0, method=Method.CLOSED_FORM,
            details={"case": "single"},
        )
    return r_timeavg(spec, cfg or SimConfig(t_end=1e4))


def multistart_agreement(spec: ModelSpec, cfg: SimConfig, starts) -> dict:
    """Time averages from several initial proportions and whether they agree.

    A heuristic check of uniqueness of the invariant law of the simplex
    process when the noise is degenerate.
    """
    ests = [r_timeavg(spec, cfg, y0=s) for s in starts]
    vals = np.array([e.value for e in ests])
    ses = np.array([e.stderr for e in ests])
    ok = all(
        abs(vals[i] - vals[j]) <= 3 * math.hypot(ses[i], ses[j]) + 1e-12
        for i in range(len(ests))
        for j in range(i)
    )
    return {"estimates": ests, "agree": ok}


# ---------------------------------------------------------------------------
# expanded formulas, for discrepancy checks only
# ---------------------------------------------------------------------------


def _moments_from_log(logf, ks=(1, 2)):
    grid = np.linspace(1e-6, 1 - 1e-6, 20001)
    lmax = float(np.max(logf(grid)))

    def f(y, k):
        return math.exp(float(logf(np.array(y))) - lmax) * y**k

    peak = float(grid[np.argmax(logf(grid))])
    out = []
    for k in (0,) + tuple(ks):
        val, _ = integrate.quad(f, 0.0, 1.0, args=(k,), points=[peak], epsabs=0, epsrel=1e-11, limit=500)
        out.append(val)
    return [o / out[0] for o in out[1:]]


def _rank1_sigmas(spec: ModelSpec):
    g = spec.gamma
    if g.shape[1] != 1:
        # collapse to a single driver when Sigma has rank one
        S = effective_sigma(spec)
        w, V = np.linalg.eigh(S)
        g = V[:, -1:] * math.sqrt(max(w[-1], 0.0))
        if g[0, 0] < 0:
            g = -g
    return float(g[0, 0]), float(g[1, 0])


def expanded_r(spec: ModelSpec, formula: str, density: str = "explicit") -> float:
    """Evaluate an expanded two-patch formula for ``r`` in terms of moments of ``y``.

    ``formula`` is ``"independent"`` (independent noise), ``"shared"`` (one
    driver, unequal volatilities) or ``"equal_vol"`` (one driver, equal
    volatilities).  For ``"shared"``, ``density`` picks whether the moments come
    from :func:`explicit_log_rho_degenerate` (``"explicit"``) or the
    speed-measure density (``"speed"``).  Not used on any default path.
    """
    d = reduce_2patch(spec)
    a1, a2, al, be = d.a1, d.a2, d.alpha, d.beta
    if formula == "equal_vol":
        var = 0.5 * (d.s11 + d.s22)
        y = ystar(a1, a2, al, be)
        return a2 - var / 2 + (a1 - a2 + var) * y
    if formula == "independent":
        v1, v2 = d.s11, d.s22
        m1, m2 = _moments_from_log(lambda y: explicit_log_rho_nondegenerate(y, a1, a2, al, be, v1, v2))
        return a2 - v2 / 2 + (a1 - a2 + v2) * m1 - (v1 + v2) / 2 * m2
    if formula == "shared":
        s1, s2 = _rank1_sigmas(spec)
        if density == "explicit":
            m1, m2 = _moments_from_log(
                lambda y: explicit_log_rho_degenerate(y, a1, a2, al, be, s1, s2)
            )
        else:
            dens = stationary_density(d)
            m1, m2 = density_moment(dens, 1), density_moment(dens, 2)
        return a2 - s2**2 / 2 + (a1 - a2 + s2**2) * m1 - (s1 - s2) ** 2 / 2 * m2
    raise ValueError(f"unknown formula {formula!r}")


def discrepancy_report(spec: ModelSpec, cfg: SimConfig) -> dict:
    """Compare the quadrature route and the expanded formula against Monte Carlo.

    Returns the three values, the Monte Carlo stderr and, for each
    deterministic route, whether it lies within 3 stderr of the simulation.
    """
    a = r_closedform_2patch(spec).value
    b = expanded_r(spec, "shared", density="speed")
    b_explicit_density = expanded_r(spec, "shared", density="explicit")
    c = r_timeavg(spec, cfg)
    tol = 3 * c.stderr
    return {
        "quadrature": a,
        "expansion": b,
        "expansion_explicit_density": b_explicit_density,
        "monte_carlo": c.value,
        "monte_carlo_stderr": c.stderr,
        "quadrature_within_3se": abs(a - c.value) <= tol,
        "expansion_within_3se": abs(b - c.value) <= tol,
        "explicit_density_within_3se": abs(b_explicit_density - c.value) <= tol,
    }
