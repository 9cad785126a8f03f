"""Scalar quadrature and small interpolation utilities shared across modules.

The adaptive routine is a recursive Simpson rule with Richardson correction,
kept dependency-free because it sits under the saturation primitives and the
build of their cached tables.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import QuadratureError, UsageError


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 30,
) -> tuple[float, float]:
    """Integrate ``f`` over [a, b] adaptively.

    Returns (value, error_estimate). Subintervals that hit ``max_depth`` are
    accepted with their current Richardson estimate; the returned error is the
    accumulated estimate, so callers can decide whether it is good enough.
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        val, err = adaptive_simpson(f, b, a, tol, max_depth)
        return -val, err

    def simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = f(lm)
        frm = f(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        delta = (left + right - whole) / 15.0
        if depth >= max_depth or abs(delta) <= eps:
            return left + right + delta, abs(delta)
        lval, lerr = recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1)
        rval, rerr = recurse(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1)
        return lval + rval, lerr + rerr

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(fa, fm, fb, b - a)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def quad_strict(f, a, b, tol=1e-10, max_depth=30, what="integrand") -> float:
    """Adaptive Simpson that raises when the error estimate is far off target."""
    val, err = adaptive_simpson(f, a, b, tol, max_depth)
    if err > 100.0 * tol:
        raise QuadratureError(f"quadrature of {what} did not converge", err)
    return val


def composite_simpson(ys: np.ndarray, dx: float) -> float:
    """Composite Simpson rule on uniformly spaced samples.

    An odd panel count is handled by the standard 3/8 rule on the last three
    panels. Needs at least three samples.
    """
    ys = np.asarray(ys, dtype=float)
    n = ys.size - 1
    if n < 2:
        raise UsageError("composite Simpson needs at least 3 samples")
    if n % 2 == 0:
        body, tail = n, 0.0
    elif n >= 3:
        body = n - 3
        tail = 3.0 * dx / 8.0 * (ys[-4] + 3.0 * ys[-3] + 3.0 * ys[-2] + ys[-1])
    total = tail
    if body >= 2:
        w = np.ones(body + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        total += dx / 3.0 * float(np.dot(w, ys[: body + 1]))
    return total


class HermiteTable:
    """Monotone sampled function stored as (node, value, derivative) triples.

    Evaluation is piecewise cubic Hermite; the antiderivative of the cubic is
    available in closed form, which keeps the cached integral consistent with
    the cached values to machine precision.
    """

    def __init__(self, x: np.ndarray, val: np.ndarray, der: np.ndarray,
                 anti: np.ndarray | None = None):
        self.x = np.asarray(x, dtype=float)
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)
        self.anti = None if anti is None else np.asarray(anti, dtype=float)
        if not np.all(np.diff(self.x) > 0):
            raise UsageError("table nodes must be strictly increasing")
        for arr in (self.val, self.der, self.anti):
            if arr is not None and arr.shape != self.x.shape:
                raise UsageError("table columns must match the node count")

    def _locate(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = np.searchsorted(self.x, xq, side="right") - 1
        idx = np.clip(idx, 0, self.x.size - 2)
        h = self.x[idx + 1] - self.x[idx]
        s = (xq - self.x[idx]) / h
        return idx, h, s

    def __call__(self, xq):
        xq_arr = np.atleast_1d(np.asarray(xq, dtype=float))
        out = np.empty_like(xq_arr)
        inside = (xq_arr >= self.x[0]) & (xq_arr <= self.x[-1])
        below = xq_arr < self.x[0]
        above = xq_arr > self.x[-1]
        out[below] = self.val[0]
        out[above] = self.val[-1]
        xi = xq_arr[inside]
        if xi.size:
            idx, h, s = self._locate(xi)
            v0, v1 = self.val[idx], self.val[idx + 1]
            d0, d1 = self.der[idx] * h, self.der[idx + 1] * h
            s2 = s * s
            s3 = s2 * s
            out[inside] = (
                (2 * s3 - 3 * s2 + 1) * v0
                + (s3 - 2 * s2 + s) * d0
                + (-2 * s3 + 3 * s2) * v1
                + (s3 - s2) * d1
            )
        return out if np.ndim(xq) else float(out[0])

    def integral_from_node(self, xq):
        """Integral of the interpolant from the cell's left node to xq.

        Returns (node_index, partial_integral). Valid only inside the table.
        """
        xq_arr = np.atleast_1d(np.asarray(xq, dtype=float))
        idx, h, s = self._locate(xq_arr)
        v0, v1 = self.val[idx], self.val[idx + 1]
        d0, d1 = self.der[idx] * h, self.der[idx + 1] * h
        s2 = s * s
        s3 = s2 * s
        s4 = s2 * s2
        part = h * (
            (0.5 * s4 - s3 + s) * v0
            + (0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2) * d0
            + (-0.5 * s4 + s3) * v1
            + (0.25 * s4 - s3 / 3.0) * d1
        )
        return idx, part
