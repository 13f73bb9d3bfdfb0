"""Model parameterization for the n-patch stochastic population model.

A :class:`ModelSpec` bundles the per-patch growth rates ``a``, the
intraspecific competition functions ``b_i``, the dispersal matrix ``D`` and
the environmental noise.  Noise is stored as a loading matrix ``gamma`` of
shape ``(n, k)``: patch ``i`` receives the increment ``gamma[i] @ dW`` where
``W`` is a ``k``-dimensional standard Brownian motion, so the infinitesimal
covariance is ``Sigma = gamma @ gamma.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import lapack

ROW_SUM_TOL = 1e-10
EDGE_TOL = 1e-12
RANK_RTOL = 1e-10


# ---------------------------------------------------------------------------
# competition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """``b(x) = kappa * x``.  ``kappa = 0`` gives the competition-free model."""

    kappa: float

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError(f"Linear competition needs kappa >= 0, got {self.kappa}")

    def __call__(self, x):
        return self.kappa * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class PowerLaw:
    """``b(x) = kappa * x**p`` with ``p >= 1``."""

    kappa: float
    p: float

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise ValueError(f"PowerLaw competition needs kappa > 0, got {self.kappa}")
        if not self.p >= 1:
            raise ValueError(f"PowerLaw competition needs p >= 1, got {self.p}")

    def __call__(self, x):
        return self.kappa * np.asarray(x, dtype=float) ** self.p


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear competition through sample points.

    The table must start at ``(0, 0)``.  Beyond the last sample the final
    segment's slope is continued.
    """

    x: tuple
    y: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("Tabulated competition needs two equal-length tables of >= 2 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("Tabulated competition entries must be finite")
        if x[0] != 0.0 or y[0] != 0.0:
            raise ValueError("Tabulated competition must start at (0, 0)")
        if np.any(np.diff(x) <= 0):
            raise ValueError("Tabulated competition abscissae must be strictly increasing")
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "y", tuple(float(v) for v in y))

    def __call__(self, x):
        xs = np.asarray(self.x)
        ys = np.asarray(self.y)
        x = np.asarray(x, dtype=float)
        out = np.interp(x, xs, ys)
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        beyond = x > xs[-1]
        return np.where(beyond, ys[-1] + slope * (x - xs[-1]), out)


CompetitionSpec = Union[Linear, PowerLaw, Tabulated]


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExplicitGamma:
    """Noise given directly by its ``(n, k)`` loading matrix."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float, ndmin=2)
        if g.ndim != 2:
            raise ValueError("gamma must be a 2-D array")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def loadings(self) -> np.ndarray:
        return self.gamma


@dataclass(frozen=True, eq=False)
class SigmaCorrelation:
    """Noise given by per-patch volatilities and a correlation matrix."""

    sigma: np.ndarray
    R: np.ndarray
    _gamma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.array(self.sigma, dtype=float, ndmin=1)
        R = np.array(self.R, dtype=float, ndmin=2)
        if R.shape != (s.size, s.size):
            raise ValueError(f"R has shape {R.shape}, expected {(s.size, s.size)}")
        s.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "_gamma", build_gamma(s, R))

    @property
    def loadings(self) -> np.ndarray:
        return self._gamma


NoiseSpec = Union[ExplicitGamma, SigmaCorrelation]


def check_correlation(R: np.ndarray, tol: float = 1e-8) -> None:
    """Raise ``ValueError`` unless ``R`` is a valid correlation matrix."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("not a correlation matrix: must be square")
    if not np.allclose(R, R.T, atol=1e-12, rtol=0):
        raise ValueError("not a correlation matrix: not symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-12, rtol=0):
        raise ValueError("not a correlation matrix: diagonal must be 1")
    if np.any(np.abs(R) > 1 + 1e-12):
        raise ValueError("not a correlation matrix: entries outside [-1, 1]")
    if np.linalg.eigvalsh(R).min() < -tol:
        raise ValueError("not a correlation matrix: not positive semi-definite")


def build_gamma(sigma, R) -> np.ndarray:
    """Factor ``diag(sigma) R diag(sigma)`` as ``G @ G.T`` with ``G`` of shape (n, k).

    Uses a pivoted Cholesky factorization of ``R`` and keeps only the first
    ``k = rank(R)`` columns, so a perfectly correlated pair yields a single
    shared driver.
    """
    sigma = np.asarray(sigma, dtype=float).ravel()
    R = np.asarray(R, dtype=float)
    check_correlation(R)
    n = sigma.size
    if R.shape != (n, n):
        raise ValueError(f"R has shape {R.shape}, expected {(n, n)}")
    Rs = 0.5 * (R + R.T)
    c, piv, rank, info = lapack.dpstrf(Rs, tol=1e-12, lower=1)
    if info < 0:
        raise ValueError("pivoted Cholesky failed")
    # the trailing (n - rank) block of c is left unfactored by dpstrf
    L = np.tril(c)[:, :rank]
    G = np.empty((n, rank))
    G[piv - 1] = L
    return sigma[:, None] * G


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Full parameterization of the patch model.

    Only dimensions are enforced here; modelling assumptions (zero row sums,
    irreducibility, competition growth) are reported by :func:`validate_spec`.
    """

    a: np.ndarray
    competition: tuple
    D: np.ndarray
    noise: NoiseSpec

    def __post_init__(self):
        a = np.array(self.a, dtype=float, ndmin=1)
        D = np.array(self.D, dtype=float, ndmin=2)
        n = a.size
        if a.ndim != 1 or n < 1:
            raise ValueError("a must be a non-empty vector")
        if D.shape != (n, n):
            raise ValueError(f"D has shape {D.shape}, expected {(n, n)}")
        comp = self.competition
        if isinstance(comp, (Linear, PowerLaw, Tabulated)):
            comp = (comp,) * n
        comp = tuple(comp)
        if len(comp) != n:
            raise ValueError(f"got {len(comp)} competition entries for {n} patches")
        if self.noise.loadings.shape[0] != n:
            raise ValueError(
                f"noise has {self.noise.loadings.shape[0]} rows, expected {n}"
            )
        a.setflags(write=False)
        D.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "competition", comp)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def gamma(self) -> np.ndarray:
        return self.noise.loadings

    @property
    def sigma(self) -> np.ndarray:
        return effective_sigma(self)

    def b(self, x) -> np.ndarray:
        """Evaluate every competition function at the matching entry of ``x``."""
        x = np.asarray(x, dtype=float)
        return np.array([f(xi) for f, xi in zip(self.competition, x)])

    def replace(self, **changes) -> "ModelSpec":
        fields = dict(a=self.a, competition=self.competition, D=self.D, noise=self.noise)
        fields.update(changes)
        return ModelSpec(**fields)


def effective_sigma(spec: ModelSpec) -> np.ndarray:
    """Infinitesimal covariance ``Sigma = gamma @ gamma.T``."""
    g = spec.gamma
    S = g @ g.T
    return 0.5 * (S + S.T)


def dispersal(alpha: float, beta: float) -> np.ndarray:
    """Two-patch dispersal matrix with rates 1->2 = alpha and 2->1 = beta."""
    return np.array([[-alpha, alpha], [beta, -beta]], dtype=float)


def two_patch(
    a1: float,
    a2: float,
    alpha: float,
    beta: float,
    sigma1: float,
    sigma2: float,
    rho: float = 0.0,
    kappa: Union[float, Sequence[float]] = 1.0,
) -> ModelSpec:
    """Convenience constructor for the two-patch model with correlation ``rho``."""
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (2,))
    noise = SigmaCorrelation([sigma1, sigma2], [[1.0, rho], [rho, 1.0]])
    return ModelSpec(
        a=[a1, a2],
        competition=tuple(Linear(float(k)) for k in kappa),
        D=dispersal(alpha, beta),
        noise=noise,
    )


def single_patch(a: float, sigma: float, kappa: float = 1.0) -> ModelSpec:
    return ModelSpec(
        a=[a], competition=(Linear(kappa),), D=[[0.0]], noise=ExplicitGamma([[sigma]])
    )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    irreducible: bool
    sigma_rank: int
    degenerate: bool
    competition_ok: bool
    witness: Optional[tuple]
    warnings: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "irreducible": self.irreducible,
            "sigma_rank": self.sigma_rank,
            "degenerate": self.degenerate,
            "competition_ok": self.competition_ok,
            "witness": None
            if self.witness is None
            else {"gamma_b": self.witness[0], "M_b": self.witness[1]},
            "warnings": list(self.warnings),
            "errors": list(self.errors),
        }


def is_irreducible(D, tol: float = EDGE_TOL) -> bool:
    """Strong connectivity of the graph ``i -> j`` for ``D[i, j] > tol``, ``i != j``."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    adj = (D > tol) & ~np.eye(n, dtype=bool)

    def reaches_all(A):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(A[i] & ~seen):
                seen[j] = True
                stack.append(j)
        return seen.all()

    return bool(reaches_all(adj) and reaches_all(adj.T))


def sigma_rank(S: np.ndarray) -> int:
    sv = np.linalg.svd(S, compute_uv=False)
    if sv.size == 0 or sv.max() == 0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv.max()))


def _competition_witness(spec: ModelSpec, warnings: list):
    """Return ``(gamma_b, M_b)`` for the per-patch sufficient condition, or None."""
    gamma_b = 1.0
    thresholds = []
    for i, (f, ai) in enumerate(zip(spec.competition, spec.a)):
        if isinstance(f, Linear):
            if f.kappa == 0:
                warnings.append(f"patch {i}: zero competition, growth is unbounded")
                return None
            thresholds.append((ai + gamma_b) / f.kappa)
        elif isinstance(f, PowerLaw):
            thresholds.append((max(ai + gamma_b, 0.0) / f.kappa) ** (1.0 / f.p))
        else:
            xs = np.asarray(f.x)
            ys = np.asarray(f.y)
            slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            guess = max(xs[-1], 1.0)
            if slope > 0:
                guess = max(guess, xs[-1] + (ai + gamma_b - ys[-1]) / slope)
            grid = np.linspace(0.0, 10.0 * guess, 4001)
            good = f(grid) - ai > gamma_b
            if slope < 0 or not good[-1]:
                warnings.append(f"patch {i}: tabulated competition never exceeds a_i + 1")
                return None
            bad = np.flatnonzero(~good)
            thresholds.append(grid[bad[-1] + 1] if bad.size else 0.0)
            warnings.append(
                f"patch {i}: tabulated competition checked by grid sampling; "
                "only the per-patch sufficient condition was verified"
            )
    M_b = max(thresholds)
    if M_b <= 0:
        M_b = 1.0
    return gamma_b, float(M_b)


def validate_spec(spec: ModelSpec) -> ValidationReport:
    """Check the modelling assumptions of ``spec`` and report, never raise."""
    n = spec.n
    D = spec.D
    errors: list = []
    warnings: list = []

    off = D[~np.eye(n, dtype=bool)]
    if np.any(off < 0):
        for i, j in zip(*np.nonzero((D < 0) & ~np.eye(n, dtype=bool))):
            errors.append(f"D[{i},{j}] = {D[i, j]:.17g} is negative")
    rows = D.sum(axis=1)
    for i in np.flatnonzero(np.abs(rows) > ROW_SUM_TOL):
        errors.append(f"row {i} of D sums to {rows[i]:.17g}, expected 0")

    for i, f in enumerate(spec.competition):
        b0 = float(f(0.0))
        if b0 != 0.0:
            errors.append(f"competition of patch {i} has b(0) = {b0}")

    S = effective_sigma(spec)
    if n and np.linalg.eigvalsh(S).min() < -ROW_SUM_TOL:
        errors.append("Sigma is not positive semi-definite")
    rank = sigma_rank(S)
    degenerate = rank < n
    if degenerate:
        warnings.append(f"noise is degenerate: rank(Sigma) = {rank} < n = {n}")

    irreducible = True if n == 1 else is_irreducible(D)
    if not irreducible:
        warnings.append("dispersal matrix is reducible")

    witness = _competition_witness(spec, warnings)
    return ValidationReport(
        irreducible=irreducible,
        sigma_rank=rank,
        degenerate=degenerate,
        competition_ok=witness is not None,
        witness=witness,
        warnings=warnings,
        errors=errors,
    )
