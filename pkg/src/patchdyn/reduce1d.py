"""Two-patch reduction to a scalar diffusion on (0, 1) and its stationary law.

With two patches the boundary proportion ``Y~_1 = y`` is an autonomous
diffusion with drift ``mu(y)`` and squared diffusion
``v(y) = w y^2 (1-y)^2`` where ``w = s11 - 2 s12 + s22``.  When ``w > 0`` its
stationary density is given by the speed measure

    p(y) ~ exp(int_{1/2}^y 2 mu / v) / v(y),

which is evaluated here in log space by composite Gauss-Legendre quadrature.
When ``w == 0`` the reduction is a deterministic ODE whose stable root
``ystar`` carries all the mass.

Everything is written in terms of the pair ``(y, 1 - y)`` so that both
endpoints are resolved without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.special import logsumexp

from .model import ModelSpec, effective_sigma

TAIL_MASS = 1e-10
EPS_TAIL = 1e-15
DEFAULT_M = 4096
GL_ORDER = 12
_PROBE_T = 36.0
_PROBE_N = 4096
_BRACKET_NATS = 60.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class DeterministicReduction(ValueError):
    """Raised when the reduced diffusion has no noise (``v == 0``)."""


@dataclass(frozen=True)
class ScalarDiffusion:
    """Coefficients of the reduced two-patch diffusion for ``y = Y~_1``.

    ``mu(y) = y (1-y) [A + (s12 - s11) y + (s22 - s12)(1-y)] + beta (1-y) - alpha y``
    with ``A = a1 - a2``; ``v(y) = w y^2 (1-y)^2``.
    """

    a1: float
    a2: float
    alpha: float
    beta: float
    s11: float
    s12: float
    s22: float

    @property
    def w(self) -> float:
        return self.s11 - 2.0 * self.s12 + self.s22

    @property
    def is_deterministic(self) -> bool:
        scale = max(abs(self.s11), abs(self.s22), abs(self.s12))
        return self.w <= 1e-12 * scale or self.w <= 0.0

    def mu(self, y, ybar=None):
        y = np.asarray(y, dtype=float)
        ybar = 1.0 - y if ybar is None else np.asarray(ybar, dtype=float)
        A = self.a1 - self.a2
        bracket = A + (self.s12 - self.s11) * y + (self.s22 - self.s12) * ybar
        return y * ybar * bracket + self.beta * ybar - self.alpha * y

    def v(self, y, ybar=None):
        y = np.asarray(y, dtype=float)
        ybar = 1.0 - y if ybar is None else np.asarray(ybar, dtype=float)
        return max(self.w, 0.0) * (y * ybar) ** 2

    def phi(self, y, ybar=None):
        """Growth integrand ``a.y - y.Sigma.y / 2`` on the point ``(y, 1-y)``."""
        y = np.asarray(y, dtype=float)
        ybar = 1.0 - y if ybar is None else np.asarray(ybar, dtype=float)
        quad = self.s11 * y * y + 2.0 * self.s12 * y * ybar + self.s22 * ybar * ybar
        return self.a1 * y + self.a2 * ybar - 0.5 * quad

    @property
    def drift_poly(self) -> Polynomial:
        y = Polynomial([0.0, 1.0])
        one = Polynomial([1.0])
        A = self.a1 - self.a2
        bracket = A + (self.s12 - self.s11) * y + (self.s22 - self.s12) * (one - y)
        return y * (one - y) * bracket + self.beta * (one - y) - self.alpha * y

    @property
    def var_poly(self) -> Polynomial:
        y = Polynomial([0.0, 1.0])
        return self.w * (y * (1 - y)) ** 2

    def log_speed_integrand(self, y, ybar=None):
        """``2 mu / v``."""
        y = np.asarray(y, dtype=float)
        ybar = 1.0 - y if ybar is None else np.asarray(ybar, dtype=float)
        return 2.0 * self.mu(y, ybar) / self.v(y, ybar)


def reduce_2patch(spec: ModelSpec) -> ScalarDiffusion:
    """Extract the scalar diffusion of ``Y~_1`` from a two-patch spec."""
    if spec.n != 2:
        raise ValueError(f"reduce_2patch needs n = 2, got n = {spec.n}")
    S = effective_sigma(spec)
    return ScalarDiffusion(
        a1=float(spec.a[0]),
        a2=float(spec.a[1]),
        alpha=float(spec.D[0, 1]),
        beta=float(spec.D[1, 0]),
        s11=float(S[0, 0]),
        s12=float(S[0, 1]),
        s22=float(S[1, 1]),
    )


def ystar(a1: float, a2: float, alpha: float, beta: float) -> float:
    """Root in [0, 1] of ``(a1 - a2)(1 - y) y + beta - (alpha + beta) y``.

    Uses ``2 beta / (sqrt(disc) - (A - alpha - beta))`` which is free of
    cancellation and reduces to ``beta / (alpha + beta)`` when ``a1 == a2``.
    """
    A = a1 - a2
    if alpha + beta <= 0 and A == 0:
        raise ValueError("ystar undefined: no dispersal and equal growth rates")
    c = A - alpha - beta
    disc = c * c + 4.0 * A * beta
    if disc < 0:
        raise ValueError("no root of the equilibrium quadratic in [0, 1]")
    den = math.sqrt(disc) - c
    if den > 0:
        y = 2.0 * beta / den
    else:
        # beta == 0 with A > alpha: the interior root
        y = (c + math.sqrt(disc)) / (2.0 * A)
    if not (-1e-12 <= y <= 1 + 1e-12):
        raise ValueError(f"equilibrium root {y} outside [0, 1]")
    return min(max(y, 0.0), 1.0)


# ---------------------------------------------------------------------------
# stationary density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationaryDensity1D:
    """Normalized stationary density of a reduced diffusion.

    ``grid`` holds panel edges spanning the effective support inside
    ``[eps, 1 - eps]``; ``nodes``/``weights`` are the composite Gauss-Legendre
    rule on those panels and ``log_density_nodes`` the normalized log density
    there.  ``log_norm`` is the log of the normalization constant of the
    unnormalized speed density (anchored at ``y = 1/2``).
    """

    diffusion: ScalarDiffusion
    eps: float
    grid: np.ndarray
    log_density: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    log_density_nodes: np.ndarray
    log_norm: float
    tail_mass: float

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    def expect(self, f: Callable) -> float:
        p = np.exp(self.log_density_nodes)
        return float(np.sum(self.weights * p * f(self.nodes)))

    def mass(self) -> float:
        return float(np.sum(self.weights * np.exp(self.log_density_nodes)))

    def log_pdf(self, y) -> np.ndarray:
        """Normalized log density at arbitrary points of (0, 1)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        F = _antiderivative(self.diffusion, y)
        return F - np.log(self.diffusion.v(y)) - self.log_norm

    def pdf(self, y) -> np.ndarray:
        return np.exp(self.log_pdf(y))


def density_moment(d: StationaryDensity1D, k: int) -> float:
    """``int y^k p(y) dy``."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    return d.expect(lambda y: y**k)


def _gl_integral(f, lo, hi, lo_bar=None, hi_bar=None):
    """Vectorized GL integral of ``f(y, ybar)`` over ``[lo, hi]`` (broadcast arrays)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo_bar = 1.0 - lo if lo_bar is None else np.asarray(lo_bar, dtype=float)
    h = hi - lo
    y = lo[..., None] + h[..., None] * _GL_X
    ybar = lo_bar[..., None] - h[..., None] * _GL_X
    return np.sum(f(y, ybar) * _GL_W, axis=-1) * h


def _antiderivative(diff: ScalarDiffusion, y) -> np.ndarray:
    """``int_{1/2}^y 2 mu / v`` by adaptive quadrature, one point at a time."""
    g = diff.log_speed_integrand
    out = np.empty_like(np.asarray(y, dtype=float))
    for idx, yi in np.ndenumerate(y):
        val, _ = integrate.quad(lambda s: float(g(s)), 0.5, float(yi), epsabs=0.0, epsrel=1e-13, limit=500)
        out[idx] = val
    return out


def _cumulative_F(diff, edges, edges_bar, anchor_F):
    """``F`` at panel edges given ``F(edges[0]) = anchor_F``."""
    g = diff.log_speed_integrand
    panel = _gl_integral(g, edges[:-1], edges[1:], edges_bar[:-1])
    return anchor_F + np.concatenate([[0.0], np.cumsum(panel)])


def _probe(diff: ScalarDiffusion):
    """Log density on a logistic grid ``y = 1/(1+e^-t)`` that resolves both endpoints.

    Returns ``(y, ybar, log_h, log_p)`` where ``h`` is the density with
    respect to ``t``.
    """
    t = np.linspace(-_PROBE_T, _PROBE_T, _PROBE_N + 1)
    y = 1.0 / (1.0 + np.exp(-t))
    ybar = 1.0 / (1.0 + np.exp(t))
    g = diff.log_speed_integrand

    def gt(tt):
        yy = 1.0 / (1.0 + np.exp(-tt))
        yb = 1.0 / (1.0 + np.exp(tt))
        return g(yy, yb) * yy * yb

    # integrate in t; F anchored at t = 0 (y = 1/2), the middle node
    h = t[1] - t[0]
    tt = t[:-1, None] + h * _GL_X
    panel = np.sum(gt(tt) * _GL_W, axis=1) * h
    F = np.concatenate([[0.0], np.cumsum(panel)])
    F -= F[_PROBE_N // 2]
    log_p = F - np.log(diff.v(y, ybar))
    log_h = log_p + np.log(y) + np.log(ybar)
    return t, y, ybar, log_h, log_p


def _tail_masses(t, log_h):
    """Upper-ish estimates of the normalized mass beyond each probe node.

    Left tails are cumulative trapezoid sums plus an exponential tail beyond
    the first node; right tails mirror this.
    """
    dt = t[1] - t[0]
    m = log_h.max()
    h = np.exp(log_h - m)
    Z = integrate.trapezoid(h, dx=dt)

    def end_tail(lh0, lh1):
        kappa = (lh1 - lh0) / dt
        if not np.isfinite(kappa) or kappa <= 0:
            return np.inf
        return math.exp(lh0 - m) / kappa

    left_extra = end_tail(log_h[0], log_h[1])
    right_extra = end_tail(log_h[-1], log_h[-2])
    seg = 0.5 * (h[1:] + h[:-1]) * dt
    left = left_extra + np.concatenate([[0.0], np.cumsum(seg)])
    right = right_extra + np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return left / Z, right / Z, left_extra / Z, right_extra / Z


def default_eps(diff: ScalarDiffusion) -> float:
    """Largest ``eps`` whose truncated mass on both sides is below ``1e-15``."""
    t, y, ybar, log_h, _ = _probe(diff)
    left, right, lx, rx = _tail_masses(t, log_h)
    _check_tails(lx, rx)
    iL = np.flatnonzero(left < EPS_TAIL / 2)
    iR = np.flatnonzero(right < EPS_TAIL / 2)
    eL = y[iL[-1]] if iL.size else y[0]
    eR = ybar[iR[0]] if iR.size else ybar[-1]
    return float(min(eL, eR, 0.25))


def _check_tails(left_extra, right_extra):
    if not np.isfinite(left_extra) or not np.isfinite(right_extra):
        raise ValueError("non-integrable stationary density: mass diverges at an endpoint")
    if left_extra > TAIL_MASS or right_extra > TAIL_MASS:
        raise ValueError("truncated mass near an endpoint cannot be certified below 1e-10")


def _bracket(diff, lo, hi, levels=_BRACKET_NATS, max_zoom=12):
    """Shrink ``[lo, hi]`` to where ``log p`` is within ``levels`` nats of its max."""
    for _ in range(max_zoom):
        edges = np.linspace(lo, hi, _PROBE_N + 1)
        edges_bar = np.linspace(1.0 - lo, 1.0 - hi, _PROBE_N + 1)
        F = _cumulative_F(diff, edges, edges_bar, 0.0)
        lp = F - np.log(diff.v(edges, edges_bar))
        keep = np.flatnonzero(lp >= lp.max() - levels)
        i0 = max(keep[0] - 1, 0)
        i1 = min(keep[-1] + 1, _PROBE_N)
        if i1 - i0 >= 256:
            return lo, hi
        lo, hi = edges[i0], edges[i1]
    return lo, hi


def stationary_density(
    diff: ScalarDiffusion, eps: Optional[float] = None, m: int = DEFAULT_M
) -> StationaryDensity1D:
    """Stationary density of ``diff`` by the speed-measure formula.

    Args:
        diff: reduced two-patch diffusion with ``v > 0`` on (0, 1).
        eps: truncation; by default the largest value with truncated mass
            below ``1e-15``.
        m: number of quadrature panels.

    Raises:
        DeterministicReduction: ``v`` vanishes identically (use :func:`ystar`).
        ValueError: the density is not integrable near an endpoint.
    """
    if diff.is_deterministic:
        raise DeterministicReduction("deterministic reduction: use ystar")
    t, y, ybar, log_h, _ = _probe(diff)
    left, right, lx, rx = _tail_masses(t, log_h)
    _check_tails(lx, rx)
    if eps is None:
        eps = default_eps(diff)
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    # mass outside [eps, 1 - eps] from the probe (monotone interpolation in y)
    tail = float(np.interp(eps, y, left) + np.interp(-eps, -ybar, right))

    lo, hi = _bracket(diff, eps, 1.0 - eps)
    edges = np.linspace(lo, hi, m + 1)
    edges_bar = np.linspace(1.0 - lo, 1.0 - hi, m + 1)
    F0 = float(_antiderivative(diff, np.array([lo]))[0])
    F = _cumulative_F(diff, edges, edges_bar, F0)

    h = (hi - lo) / m
    nodes = edges[:-1, None] + h * _GL_X
    nodes_bar = edges_bar[:-1, None] - h * _GL_X
    g = diff.log_speed_integrand
    # F at every node: edge value plus a GL integral from the panel's left edge
    sub = _gl_integral(g, np.broadcast_to(edges[:-1, None], nodes.shape), nodes,
                       np.broadcast_to(edges_bar[:-1, None], nodes.shape))
    F_nodes = F[:-1, None] + sub
    log_p_nodes = F_nodes - np.log(diff.v(nodes, nodes_bar))
    weights = np.broadcast_to(h * _GL_W, nodes.shape)
    log_norm = float(logsumexp(log_p_nodes, b=weights))

    log_p_edges = F - np.log(diff.v(edges, edges_bar)) - log_norm
    return StationaryDensity1D(
        diffusion=diff,
        eps=float(eps),
        grid=edges,
        log_density=log_p_edges,
        nodes=nodes.ravel(),
        weights=np.ascontiguousarray(weights).ravel(),
        log_density_nodes=(log_p_nodes - log_norm).ravel(),
        log_norm=log_norm,
        tail_mass=tail,
    )


# ---------------------------------------------------------------------------
# explicit closed-form densities, kept for cross-checks
# ---------------------------------------------------------------------------


def explicit_log_rho_nondegenerate(y, a1, a2, alpha, beta, var1, var2):
    """Unnormalized log of the independent-noise density (diagonal covariance)."""
    y = np.asarray(y, dtype=float)
    s = var1 + var2
    al1 = 2.0 * var1 / s
    al2 = 2.0 * var2 / s
    bh = 2.0 / s * (a1 - a2 + beta - alpha)
    return (
        (bh - al1) * np.log(y)
        + (-bh - al2) * np.log1p(-y)
        - 2.0 / s * (beta / y + alpha / (1.0 - y))
    )


def explicit_log_rho_degenerate(y, a1, a2, alpha, beta, sigma1, sigma2):
    """Unnormalized log of the explicit single-driver density.

    Its boundary exponents differ in sign from the speed-measure density, so
    it is kept only as a cross-check.
    """
    y = np.asarray(y, dtype=float)
    d = sigma1 - sigma2
    ah1 = -2.0 * sigma1 / d
    ah2 = 2.0 * sigma2 / d
    bh = 2.0 / d**2 * (a1 - a2 + beta - alpha)
    return (
        (bh - ah1) * np.log(y)
        + (-bh - ah2) * np.log1p(-y)
        - 2.0 / d**2 * (beta / y + alpha / (1.0 - y))
    )


def density_gap(d: StationaryDensity1D, log_rho: Callable) -> float:
    """Relative sup-norm gap between ``d`` and another density on ``d``'s nodes.

    ``log_rho`` is an unnormalized log density; it is normalized with the same
    quadrature rule before comparison.  Returns ``max |p - q| / max p``.
    """
    lq = log_rho(d.nodes)
    lq = lq - logsumexp(lq, b=d.weights)
    p = np.exp(d.log_density_nodes)
    q = np.exp(lq)
    return float(np.max(np.abs(p - q)) / np.max(p))


def logistic_stationary_mean(kappa: float, b: float, sigma: float) -> float:
    """Mean of the stationary law of ``dU = U (kappa - b U) dt + sigma U dW``.

    Integrates the speed density ``u^(2 kappa / sigma^2 - 2) exp(-2 b u / sigma^2)``
    numerically; requires ``kappa > sigma^2 / 2``.
    """
    s2 = sigma * sigma
    if kappa <= 0.5 * s2:
        raise ValueError("no stationary law: kappa <= sigma^2 / 2")
    k = 2.0 * kappa / s2 - 2.0
    lam = 2.0 * b / s2

    def dens(u, power):
        return math.exp((k + power) * math.log(u) - lam * u) if u > 0 else 0.0

    scale = 1.0 / lam
    moments = []
    for power in (0, 1):
        head, _ = integrate.quad(dens, 0, scale, args=(power,), epsabs=0, epsrel=1e-12, limit=400)
        tail, _ = integrate.quad(dens, scale, np.inf, args=(power,), epsabs=0, epsrel=1e-12, limit=400)
        moments.append(head + tail)
    return moments[1] / moments[0]
