"""Compiled inner loops for the fixed-step integrator.

Numba is optional: when it is missing the decorated functions run as plain
Python on numpy scalars, which keeps results identical but slow. Kernels are
kept free of Python objects; the dispatch layer packs each system into a
small parameter vector plus the saturation code and the cached value table
of the averaged nonlinearity.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly by every jitted call
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - fallback for missing numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


TWO_PI = 2.0 * math.pi

# system kind codes shared with systems.kernel_payload
KIND_T_EPS = 0
KIND_T0 = 1
KIND_S1 = 2
KIND_S_EPS = 3
KIND_DI = 4
KIND_FN = 5

DIVERGENCE_NORM_SQ = 1e24  # (1e12)^2


@njit(cache=True, nogil=True)
def _sigma(code: int, k1: float, k2: float, u: float) -> float:
    x = k1 * u
    if code == 0:
        if x > 1.0:
            v = 1.0
        elif x < -1.0:
            v = -1.0
        else:
            v = x
    elif code == 1:
        v = math.tanh(x)
    else:
        v = math.atan(x)
    return v / k2


@njit(cache=True, nogil=True)
def _table_eval(tx: np.ndarray, tv: np.ndarray, td: np.ndarray, x: float) -> float:
    """Cubic Hermite lookup of an odd function tabulated on x >= 0."""
    ax = abs(x)
    n = tx.shape[0]
    if ax >= tx[n - 1]:
        v = tv[n - 1]
    else:
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tx[mid] <= ax:
                lo = mid
            else:
                hi = mid
        h = tx[lo + 1] - tx[lo]
        s = (ax - tx[lo]) / h
        s2 = s * s
        s3 = s2 * s
        v = (
            (2.0 * s3 - 3.0 * s2 + 1.0) * tv[lo]
            + (s3 - 2.0 * s2 + s) * h * td[lo]
            + (-2.0 * s3 + 3.0 * s2) * tv[lo + 1]
            + (s3 - s2) * h * td[lo + 1]
        )
    return v if x >= 0.0 else -v


@njit(cache=True, nogil=True)
def _rhs(kind: int, t: float, y: np.ndarray, out: np.ndarray, p: np.ndarray,
         sat_code: int, k1: float, k2: float,
         tx: np.ndarray, tv: np.ndarray, td: np.ndarray) -> None:
    if kind == KIND_T_EPS:
        eps = p[0]
        phi = TWO_PI * ((t / eps) % 1.0)
        bx = math.sin(phi)
        by = math.cos(phi)
        s = _sigma(sat_code, k1, k2, bx * y[0] + by * y[1])
        out[0] = y[2] - bx * s
        out[1] = y[3] - by * s
        out[2] = -bx * s
        out[3] = -by * s
    elif kind == KIND_T0 or kind == KIND_FN:
        n = y.shape[0] // 2
        nz = 0.0
        for j in range(n):
            nz += y[j] * y[j]
        nz = math.sqrt(nz)
        if nz > 0.0:
            scale = _table_eval(tx, tv, td, nz) / nz
        else:
            scale = 0.0
        for j in range(n):
            fz = scale * y[j]
            out[j] = y[n + j] - fz
            out[n + j] = -fz
    elif kind == KIND_S1 or kind == KIND_S_EPS:
        om = TWO_PI if kind == KIND_S1 else TWO_PI / p[0]
        u = p[1] * y[0] + p[2] * y[1] + p[3] * y[2] + p[4] * y[3]
        s = _sigma(sat_code, k1, k2, u)
        out[0] = -om * y[1] + y[2]
        out[1] = om * y[0] + y[3]
        out[2] = -om * y[3]
        out[3] = om * y[2] - s
    else:  # KIND_DI
        s = _sigma(sat_code, k1, k2, y[0])
        out[0] = y[1] - s
        out[1] = -s


@njit(cache=True, nogil=True)
def run_rk4_chunk(kind: int, t0: float, state: np.ndarray, sample_dt: float,
                  n_sub: int, n_samples: int, p: np.ndarray,
                  sat_code: int, k1: float, k2: float,
                  tx: np.ndarray, tv: np.ndarray, td: np.ndarray,
                  out: np.ndarray):
    """Advance ``n_samples`` sample intervals of ``n_sub`` RK4 steps each.

    ``state`` is updated in place; ``out`` receives one row per completed
    sample. Returns (samples_filled, diverged). On divergence the offending
    sample is not stored and integration stops.
    """
    dim = state.shape[0]
    ka = np.empty(dim)
    kb = np.empty(dim)
    kc = np.empty(dim)
    kd = np.empty(dim)
    tmp = np.empty(dim)
    h = sample_dt / n_sub
    for m in range(n_samples):
        t_base = t0 + m * sample_dt
        for i in range(n_sub):
            t = t_base + i * h
            _rhs(kind, t, state, ka, p, sat_code, k1, k2, tx, tv, td)
            for j in range(dim):
                tmp[j] = state[j] + 0.5 * h * ka[j]
            _rhs(kind, t + 0.5 * h, tmp, kb, p, sat_code, k1, k2, tx, tv, td)
            for j in range(dim):
                tmp[j] = state[j] + 0.5 * h * kb[j]
            _rhs(kind, t + 0.5 * h, tmp, kc, p, sat_code, k1, k2, tx, tv, td)
            for j in range(dim):
                tmp[j] = state[j] + h * kc[j]
            _rhs(kind, t + h, tmp, kd, p, sat_code, k1, k2, tx, tv, td)
            for j in range(dim):
                state[j] += h / 6.0 * (ka[j] + 2.0 * kb[j] + 2.0 * kc[j] + kd[j])
        ss = 0.0
        for j in range(dim):
            ss += state[j] * state[j]
        if ss > DIVERGENCE_NORM_SQ or not math.isfinite(ss):
            return m, True
        for j in range(dim):
            out[m, j] = state[j]
    return n_samples, False
