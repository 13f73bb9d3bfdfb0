"""Compiled inner loops for the Euler-Maruyama schemes.

Each kernel advances a state in place over one block of pre-drawn standard
normals and writes the state after every step into the output buffers.
Competition functions are passed in packed form (see ``pack_competition``).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .model import Linear, PowerLaw

LOG_OVERFLOW = math.log(1e300)

KIND_LINEAR = 0
KIND_POWER = 1
KIND_TABLE = 2


def pack_competition(competition):
    kind = np.empty(len(competition), dtype=np.int64)
    kappa = np.zeros(len(competition))
    power = np.ones(len(competition))
    offsets = [0]
    tx: list = []
    ty: list = []
    for i, f in enumerate(competition):
        if isinstance(f, Linear):
            kind[i] = KIND_LINEAR
            kappa[i] = f.kappa
        elif isinstance(f, PowerLaw):
            kind[i] = KIND_POWER
            kappa[i] = f.kappa
            power[i] = f.p
        else:
            kind[i] = KIND_TABLE
            tx.extend(f.x)
            ty.extend(f.y)
        offsets.append(len(tx))
    return (
        kind,
        kappa,
        power,
        np.asarray(offsets, dtype=np.int64),
        np.asarray(tx, dtype=float),
        np.asarray(ty, dtype=float),
    )


@njit(cache=True, nogil=True)
def competition_at(i, x, kind, kappa, power, offsets, tx, ty):
    k = kind[i]
    if k == KIND_LINEAR:
        return kappa[i] * x
    if k == KIND_POWER:
        return kappa[i] * x ** power[i]
    lo = offsets[i]
    hi = offsets[i + 1]
    if x >= tx[hi - 1]:
        slope = (ty[hi - 1] - ty[hi - 2]) / (tx[hi - 1] - tx[hi - 2])
        return ty[hi - 1] + (x - tx[hi - 1]) * slope
    a = lo
    b = hi - 1
    while b - a > 1:
        mid = (a + b) // 2
        if tx[mid] <= x:
            a = mid
        else:
            b = mid
    w = (x - tx[a]) / (tx[b] - tx[a])
    return ty[a] + w * (ty[b] - ty[a])


@njit(cache=True, nogil=True)
def x_log_steps(lx, z, dt, c, gamma, D, kind, kappa, power, offsets, tx, ty, out):
    """Log-coordinate Euler for the full system.

    ``lx`` holds log abundances (``-inf`` for an empty patch) and ``c`` the
    constant log drift ``a_i + D_ii - Sigma_ii / 2``.  Returns the index of
    the step that overflowed, or -1.
    """
    n = lx.size
    k = gamma.shape[1]
    sq = math.sqrt(dt)
    new = np.empty(n)
    for s in range(z.shape[0]):
        for i in range(n):
            dE = 0.0
            for l in range(k):
                dE += gamma[i, l] * z[s, l]
            dE *= sq
            if lx[i] > -np.inf:
                inflow = 0.0
                for j in range(n):
                    if j != i and D[j, i] != 0.0 and lx[j] > -np.inf:
                        inflow += D[j, i] * math.exp(lx[j] - lx[i])
                xi = math.exp(lx[i])
                drift = c[i] + inflow - competition_at(i, xi, kind, kappa, power, offsets, tx, ty)
                new[i] = lx[i] + drift * dt + dE
            else:
                inflow = 0.0
                for j in range(n):
                    if j != i and lx[j] > -np.inf:
                        inflow += D[j, i] * math.exp(lx[j])
                if inflow > 0.0:
                    new[i] = math.log(inflow * dt)
                else:
                    new[i] = -np.inf
        for i in range(n):
            if new[i] > LOG_OVERFLOW or math.isnan(new[i]):
                return s
            lx[i] = new[i]
            out[s, i] = new[i]
    return -1


@njit(cache=True, nogil=True)
def x_clamp_steps(x, z, dt, a, gamma, D, kind, kappa, power, offsets, tx, ty, out):
    """Natural-coordinate Euler with clamping at zero; ``out`` gets log states."""
    n = x.size
    k = gamma.shape[1]
    sq = math.sqrt(dt)
    new = np.empty(n)
    for s in range(z.shape[0]):
        for i in range(n):
            dE = 0.0
            for l in range(k):
                dE += gamma[i, l] * z[s, l]
            dE *= sq
            inflow = 0.0
            for j in range(n):
                inflow += D[j, i] * x[j]
            b = competition_at(i, x[i], kind, kappa, power, offsets, tx, ty)
            v = x[i] + (x[i] * (a[i] - b) + inflow) * dt + x[i] * dE
            new[i] = v if v > 0.0 else 0.0
        for i in range(n):
            if new[i] > 1e300 or math.isnan(new[i]):
                return s
            x[i] = new[i]
            out[s, i] = math.log(new[i]) if new[i] > 0.0 else -np.inf
    return -1


@njit(cache=True, nogil=True)
def simplex_steps(y, lns, z, dt, a, gamma, D, Sigma, out_y, out_lns, out_phi):
    """Euler step of the boundary simplex process plus the linearized log total.

    ``out_phi[s]`` is the growth integrand evaluated at the state *before*
    step ``s``, so ``lns`` accumulates ``phi * dt + y . dE``.
    """
    n = y.size
    k = gamma.shape[1]
    sq = math.sqrt(dt)
    dE = np.empty(n)
    g = np.empty(n)
    dy = np.empty(n)
    for s in range(z.shape[0]):
        for i in range(n):
            acc = 0.0
            for l in range(k):
                acc += gamma[i, l] * z[s, l]
            dE[i] = acc * sq
        phi = 0.0
        yg = 0.0
        ydE = 0.0
        for i in range(n):
            sy = 0.0
            for j in range(n):
                sy += Sigma[i, j] * y[j]
            g[i] = a[i] - sy
            phi += y[i] * (a[i] - 0.5 * sy)
            yg += y[i] * g[i]
            ydE += y[i] * dE[i]
        for i in range(n):
            mig = 0.0
            for j in range(n):
                mig += D[j, i] * y[j]
            dy[i] = (mig + y[i] * (g[i] - yg)) * dt + y[i] * (dE[i] - ydE)
        lns[0] += phi * dt + ydE
        total = 0.0
        for i in range(n):
            v = y[i] + dy[i]
            if v < 0.0:
                v = 0.0
            y[i] = v
            total += v
        for i in range(n):
            y[i] /= total
            out_y[s, i] = y[i]
        out_lns[s] = lns[0]
        out_phi[s] = phi
    return -1


@njit(cache=True, nogil=True)
def logistic_steps(lu, z, dt, kappa, b, sigma, out):
    """Log-coordinate Euler for ``dU = U (kappa - b U) dt + sigma U dW``."""
    sq = math.sqrt(dt)
    c = kappa - 0.5 * sigma * sigma
    for s in range(z.shape[0]):
        if lu[0] > -np.inf:
            lu[0] = lu[0] + (c - b * math.exp(lu[0])) * dt + sigma * sq * z[s, 0]
        out[s] = lu[0]
    return -1
