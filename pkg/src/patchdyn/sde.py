"""Euler-Maruyama simulation of the patch model in its coordinate systems.

* ``simulate_x``: abundances ``X`` of the full nonlinear system.
* ``simulate_simplex``: the boundary proportion process ``Y~`` (total set to 0).
* ``simulate_linearized_logS``: ``Y~`` jointly with ``ln S`` of the
  competition-free system, driven by the same increments.
* ``simulate_logistic_1d``: the scalar stochastic logistic diffusion ``U``.

All runs are deterministic functions of ``(spec, cfg, initial state)``; the
increments come from :func:`patchdyn.rng.normal_blocks` keyed by ``cfg.seed``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Optional

import numpy as np

from . import _kernels as K
from .model import ModelSpec, effective_sigma
from .rng import n_threads, normal_blocks, split_seed

MAX_ROWS = 1_000_000
SIMPLEX_TOL = 1e-9


class SimulationError(RuntimeError):
    """Numerical failure during integration."""


class Scheme(str, Enum):
    EULER_LOG = "euler_log"
    EULER_CLAMP = "euler_clamp"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 100.0
    burn_in: float = 0.1
    seed: int = 0
    scheme: Scheme = Scheme.EULER_LOG
    record_stride: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.dt <= self.t_end):
            raise ValueError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if not (0 <= self.burn_in < 1):
            raise ValueError(f"burn_in must lie in [0, 1), got {self.burn_in}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be positive")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return int(self.record_stride)
        return max(1, math.ceil(self.n_steps / MAX_ROWS))

    @property
    def burn_steps(self) -> int:
        return int(self.burn_in * self.n_steps)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class Path:
    """A recorded trajectory.

    ``coords`` is one of ``"x"``, ``"ys"``, ``"simplex"``, ``"scalar"``.
    ``log_states`` is kept for ``x`` and ``scalar`` paths so that abundances
    far below the floating point range stay usable.
    """

    coords: str
    times: np.ndarray
    states: np.ndarray
    seed: int
    log_states: Optional[np.ndarray] = None
    spec: Optional[ModelSpec] = None
    cfg: Optional[SimConfig] = None
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    def columns(self) -> list:
        n = self.states.shape[1]
        if self.coords == "x":
            return ["t"] + [f"x{i + 1}" for i in range(n)]
        if self.coords == "ys":
            return ["t"] + [f"y{i + 1}" for i in range(n - 1)] + ["s"]
        if self.coords == "simplex":
            return ["t"] + [f"y{i + 1}" for i in range(n)]
        return ["t", "u"]

    def to_ys(self) -> "Path":
        """Proportions and total abundance of an ``x`` path."""
        if self.coords != "x":
            raise ValueError("to_ys needs an x path")
        lx = self.log_states
        m = lx.max(axis=1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        w = np.exp(lx - m)
        tot = w.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            y = np.where(tot > 0, w / tot, 0.0)
        s = self.states.sum(axis=1, keepdims=True)
        return Path("ys", self.times, np.hstack([y, s]), self.seed, spec=self.spec, cfg=self.cfg)


def _record_mask(first_step: int, m: int, stride: int, n_steps: int) -> np.ndarray:
    idx = np.arange(first_step, first_step + m)
    return (idx % stride == 0) | (idx == n_steps)


def _collect(times, rows, t0_row, dt):
    times = np.concatenate([[0.0]] + times) if times else np.array([0.0])
    states = np.vstack([t0_row[None, :]] + rows) if rows else t0_row[None, :]
    return times, states


# ---------------------------------------------------------------------------
# full system
# ---------------------------------------------------------------------------


def _x_params(spec: ModelSpec):
    gamma = np.ascontiguousarray(spec.gamma, dtype=float)
    if gamma.shape[1] == 0:
        gamma = np.zeros((spec.n, 0))
    sig_diag = np.einsum("ij,ij->i", gamma, gamma)
    D = np.ascontiguousarray(spec.D)
    c = spec.a + np.diag(D) - 0.5 * sig_diag
    return gamma, D, c, K.pack_competition(spec.competition)


def iter_x_blocks(spec: ModelSpec, cfg: SimConfig, x0, n_steps: Optional[int] = None):
    """Yield ``(first_step, log_states, normals)`` blocks of the full system."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n,):
        raise ValueError(f"x0 must have shape ({spec.n},)")
    if np.any(x0 < 0) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite and non-negative")
    gamma, D, c, comp = _x_params(spec)
    n_steps = cfg.n_steps if n_steps is None else n_steps
    k = gamma.shape[1]
    log_scheme = cfg.scheme is Scheme.EULER_LOG
    with np.errstate(divide="ignore"):
        state = np.log(x0) if log_scheme else x0.copy()
    first = 1
    for z in normal_blocks(cfg.seed, n_steps, k):
        out = np.empty((z.shape[0], spec.n))
        if log_scheme:
            bad = K.x_log_steps(state, z, cfg.dt, c, gamma, D, *comp, out)
        else:
            bad = K.x_clamp_steps(state, z, cfg.dt, spec.a, gamma, D, *comp, out)
        if bad >= 0:
            raise SimulationError(
                f"explosion at t={(first + bad) * cfg.dt:.6g}: competition may be too weak to bound growth"
            )
        yield first, out, z
        first += z.shape[0]


def simulate_x(spec: ModelSpec, cfg: SimConfig, x0, record_noise: bool = False) -> Path:
    """Simulate the abundances of every patch.

    With ``record_noise`` the per-patch increments ``dE`` of each recorded
    step are stored in ``path.extra["dE"]``.
    """
    x0 = np.asarray(x0, dtype=float)
    stride, n_steps = cfg.stride, cfg.n_steps
    times, rows, noise = [], [], []
    gamma = spec.gamma
    for first, out, z in iter_x_blocks(spec, cfg, x0):
        mask = _record_mask(first, out.shape[0], stride, n_steps)
        if mask.any():
            times.append((np.flatnonzero(mask) + first) * cfg.dt)
            rows.append(out[mask])
            if record_noise:
                noise.append((z[mask] @ gamma.T) * math.sqrt(cfg.dt))
    with np.errstate(divide="ignore"):
        t, lx = _collect(times, rows, np.log(x0), cfg.dt)
    path = Path("x", t, np.exp(lx), cfg.seed, log_states=lx, spec=spec, cfg=cfg)
    if record_noise:
        path.extra["dE"] = np.vstack(noise) if noise else np.zeros((0, spec.n))
    return path


def x_states_at(spec: ModelSpec, cfg: SimConfig, x0, times) -> np.ndarray:
    """Abundances at increasing ``times`` (rounded to the step grid)."""
    steps = np.maximum(1, np.round(np.asarray(times, dtype=float) / cfg.dt).astype(np.int64))
    if np.any(np.diff(steps) < 0):
        raise ValueError("times must be increasing")
    out = np.empty((steps.size, spec.n))
    for first, block, _ in iter_x_blocks(spec, cfg, x0, n_steps=int(steps[-1])):
        sel = (steps >= first) & (steps < first + block.shape[0])
        out[sel] = np.exp(block[steps[sel] - first])
    return out


def simulate_x_ensemble(
    spec: ModelSpec, cfg: SimConfig, x0, n_replicates: int, times, offset: int = 0
) -> np.ndarray:
    """States at ``times`` for replicates seeded ``split_seed(cfg.seed, offset + i)``.

    Returns an array of shape ``(n_replicates, len(times), n)``.
    """

    def one(i):
        return x_states_at(spec, cfg.with_(seed=split_seed(cfg.seed, offset + i)), x0, times)

    with ThreadPoolExecutor(max_workers=n_threads()) as pool:
        res = list(pool.map(one, range(n_replicates)))
    return np.stack(res)


# ---------------------------------------------------------------------------
# simplex / linearized total
# ---------------------------------------------------------------------------


def _check_simplex(y0, n):
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (n,):
        raise ValueError(f"y0 must have shape ({n},)")
    if np.any(y0 < -SIMPLEX_TOL) or abs(y0.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("y0 must lie on the simplex")
    y0 = np.clip(y0, 0.0, None)
    return y0 / y0.sum()


def iter_simplex_blocks(spec: ModelSpec, cfg: SimConfig, y0) -> Iterator[tuple]:
    """Yield ``(first_step, y, lns, phi)`` blocks of the joint simplex/log-total run."""
    y = _check_simplex(y0, spec.n).copy()
    gamma = np.ascontiguousarray(spec.gamma, dtype=float)
    if gamma.shape[1] == 0:
        gamma = np.zeros((spec.n, 0))
    Sigma = np.ascontiguousarray(effective_sigma(spec))
    D = np.ascontiguousarray(spec.D)
    a = np.ascontiguousarray(spec.a)
    lns = np.zeros(1)
    first = 1
    for z in normal_blocks(cfg.seed, cfg.n_steps, gamma.shape[1]):
        m = z.shape[0]
        out_y = np.empty((m, spec.n))
        out_l = np.empty(m)
        out_p = np.empty(m)
        K.simplex_steps(y, lns, z, cfg.dt, a, gamma, D, Sigma, out_y, out_l, out_p)
        if not np.all(np.isfinite(out_l[-1:])):
            raise SimulationError("non-finite state in simplex integration")
        yield first, out_y, out_l, out_p
        first += m


def simulate_linearized_logS(spec: ModelSpec, cfg: SimConfig, y0):
    """Simplex path and the recorded ``ln S`` series of the linearized system.

    ``ln S(0) = 0``.  Both outputs share the recorded time grid.
    """
    y0 = _check_simplex(y0, spec.n)
    stride, n_steps = cfg.stride, cfg.n_steps
    times, rows, lns = [], [], []
    for first, out_y, out_l, _ in iter_simplex_blocks(spec, cfg, y0):
        mask = _record_mask(first, out_y.shape[0], stride, n_steps)
        if mask.any():
            times.append((np.flatnonzero(mask) + first) * cfg.dt)
            rows.append(out_y[mask])
            lns.append(out_l[mask])
    t, states = _collect(times, rows, y0, cfg.dt)
    log_s = np.concatenate([[0.0]] + lns)
    path = Path("simplex", t, states, cfg.seed, spec=spec, cfg=cfg)
    path.extra["log_s"] = log_s
    return path, log_s


def simulate_simplex(spec: ModelSpec, cfg: SimConfig, y0) -> Path:
    """Boundary proportion process; rows are projected back onto the simplex."""
    path, _ = simulate_linearized_logS(spec, cfg, y0)
    return path


# ---------------------------------------------------------------------------
# scalar logistic diffusion
# ---------------------------------------------------------------------------


def simulate_logistic_1d(kappa: float, b: float, sigma: float, cfg: SimConfig, u0: float) -> Path:
    """``dU = U (kappa - b U) dt + sigma U dW`` in log coordinates.

    Uses one noise driver, so a two-patch run with a single shared driver and
    the same seed sees the identical Gaussian sequence.
    """
    if u0 < 0:
        raise ValueError("u0 must be non-negative")
    with np.errstate(divide="ignore"):
        lu = np.array([math.log(u0) if u0 > 0 else -np.inf])
    stride, n_steps = cfg.stride, cfg.n_steps
    times, rows = [], []
    first = 1
    for z in normal_blocks(cfg.seed, n_steps, 1):
        out = np.empty(z.shape[0])
        K.logistic_steps(lu, z, cfg.dt, float(kappa), float(b), float(sigma), out)
        mask = _record_mask(first, z.shape[0], stride, n_steps)
        if mask.any():
            times.append((np.flatnonzero(mask) + first) * cfg.dt)
            rows.append(out[mask][:, None])
        first += z.shape[0]
    with np.errstate(divide="ignore"):
        t, lus = _collect(times, rows, np.array([math.log(u0) if u0 > 0 else -np.inf]), cfg.dt)
    return Path("scalar", t, np.exp(lus), cfg.seed, log_states=lus, cfg=cfg)
