"""Radially averaged saturation and its cached evaluation tables.

Averaging a scalar saturation sigma over one turn of a rotating drive yields
a new scalar nonlinearity S. It is again a saturation function, with slope at
zero exactly half of sigma's and a limit value measured here by quadrature.
S sits in the inner loop of every simulation, so alongside the defining
quadratures this module maintains a Hermite table of (S, S') samples plus the
running integral of S, refined until each cell meets a fixed error budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .errors import QuadratureError
from .quadrature import HermiteTable, adaptive_simpson
from .saturation import SaturationFn

_HALF_PI = 0.5 * math.pi
_XI_BIG = 1e8  # abscissa used to measure the limit value
_CELL_TOL = 1e-9  # per-cell budget for the cached tables


def _weight_h(v: float) -> float:
    """Weight of the difference-quotient derivative formula.

    Algebraically equal to (1-sin v)/cos^2 v * sin v * (1+cos^2 v); written
    with the removable factor cancelled so it is regular at v = pi/2, where
    its value is 1/2.
    """
    s = math.sin(v)
    c2 = 1.0 - s * s
    return s * (1.0 + c2) / (1.0 + s)


class ModifiedSaturation:
    """Rotation average of a saturation function, with cached tables.

    Parameters
    ----------
    sat:
        The underlying scalar saturation.
    quad_tol:
        Absolute tolerance of the adaptive quadratures (default 1e-10).
    table_max:
        Upper end of the cached range; beyond it evaluations fall back to
        direct quadrature.
    """

    def __init__(self, sat: SaturationFn, quad_tol: float = 1e-10,
                 table_max: float = 16384.0):
        self.sat = sat
        self.quad_tol = quad_tol
        self.table_max = table_max
        self._build_table()

    # ---- defining quadratures -------------------------------------------

    def _quad_v(self, integrand, ax: float, tol: float, what: str) -> float:
        """Integrate over [0, pi/2], splitting where sigma's derivative jumps.

        Splitting exactly at v with ax*sin(v) on a kink keeps the adaptive
        error estimate honest; a hidden kink can otherwise fool it.
        """
        cuts = {0.0, _HALF_PI}
        for c in self.sat.kink_points:
            if 0.0 < c < ax:
                cuts.add(math.asin(c / ax))
        # panel seeds at the knee scale isolate the boundary layer of a
        # saturating integrand so the error estimate cannot overlook it
        knee = self.sat.sigma_inf / self.sat.sigma_prime0
        for mult in (1.0, 4.0):
            if ax > mult * knee:
                cuts.add(math.asin(mult * knee / ax))
        cuts = sorted(cuts)
        total = 0.0
        err = 0.0
        seg_tol = tol / (len(cuts) - 1)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, e = adaptive_simpson(integrand, lo, hi, tol=seg_tol)
            total += val
            err += e
        if err > 100.0 * tol:
            raise QuadratureError(f"quadrature of {what} did not converge", err)
        return total

    def eval(self, xi: float) -> float:
        """Value of the averaged nonlinearity, by adaptive quadrature."""
        xi = float(xi)
        if xi == 0.0:
            return 0.0
        ax = abs(xi)
        sat = self.sat
        val = self._quad_v(
            lambda v: math.sin(v) * sat.scalar(ax * math.sin(v)),
            ax, self.quad_tol, "averaged saturation",
        )
        val *= 2.0 / math.pi
        return val if xi > 0 else -val

    def prime(self, xi: float) -> float:
        """Derivative, by quadrature of the weighted-derivative form."""
        ax = abs(float(xi))
        sat = self.sat
        val = self._quad_v(
            lambda v: sat.scalar_prime(ax * math.sin(v)) * math.sin(v) ** 2,
            ax, self.quad_tol, "averaged saturation slope",
        )
        return 2.0 / math.pi * val

    def prime_alt(self, xi: float) -> float:
        """Derivative by the difference-quotient form; needs xi != 0."""
        xi = float(xi)
        if xi == 0.0:
            raise DomainError("the difference-quotient form requires xi != 0")
        sat = self.sat
        sig_xi = sat.scalar(xi)

        def integrand(v: float) -> float:
            s = math.sin(v)
            w = xi * (1.0 - s)
            if abs(w) < 1e-6 * max(1.0, abs(xi)):
                # removable 0/0: midpoint derivative, second-order accurate
                q = sat.scalar_prime(xi - 0.5 * w)
            else:
                q = (sig_xi - sat.scalar(xi * s)) / w
            return q * _weight_h(v)

        val = self._quad_v(integrand, abs(xi), self.quad_tol,
                           "averaged saturation slope (quotient form)")
        return 2.0 / math.pi * val

    def _antideriv_quad(self, r: float) -> float:
        """Integral of S from 0 to r with the order of integration exchanged.

        Exchanging integrals turns the double integral into a single one over
        the antiderivative of sigma, so each call is one quadrature and the
        error does not accumulate across table cells.
        """
        if r == 0.0:
            return 0.0
        tol = self.quad_tol * max(1.0, 1e-3 * r)
        sat = self.sat
        val = self._quad_v(
            lambda v: sat.scalar_antideriv(r * math.sin(v)),
            r, tol, "integral of averaged saturation",
        )
        return 2.0 / math.pi * val

    # ---- cached fast path -------------------------------------------------

    def _build_table(self) -> None:
        core = np.concatenate([
            np.arange(0.0, 0.25, 1.0 / 256.0),
            np.arange(0.25, 4.0, 1.0 / 128.0),
        ])
        geo = [4.0]
        while geo[-1] < self.table_max:
            geo.append(geo[-1] * (1.0 + 1.0 / 32.0))
        nodes = np.concatenate([core, np.array(geo)])
        nodes[-1] = max(nodes[-1], self.table_max)

        s_cache: dict[float, float] = {}
        d_cache: dict[float, float] = {}

        def s_of(x: float) -> float:
            if x not in s_cache:
                s_cache[x] = 0.0 if x == 0.0 else self.eval(x)
            return s_cache[x]

        def d_of(x: float) -> float:
            if x not in d_cache:
                d_cache[x] = 0.5 * self.sat.sigma_prime0 if x == 0.0 else self.prime(x)
            return d_cache[x]

        # split cells where the interpolant misses the quadrature value; cells
        # whose midpoint is merely close to the budget get quarter-point probes
        # too (a curvature cusp of S concentrates its error off-center)
        for round_idx in range(16):
            svals = np.array([s_of(float(x)) for x in nodes])
            dvals = np.array([d_of(float(x)) for x in nodes])
            table = HermiteTable(nodes, svals, dvals)
            widths = nodes[1:] - nodes[:-1]
            mids = nodes[:-1] + 0.5 * widths
            approx = table(mids)
            bad = set()
            suspicious = []
            for i, m in enumerate(mids):
                err = abs(approx[i] - s_of(float(m)))
                if err > _CELL_TOL:
                    bad.add(i)
                elif err > _CELL_TOL / 16.0:
                    suspicious.append(i)
            for frac in (0.25, 0.75):
                for i in suspicious:
                    probe = float(nodes[i] + frac * widths[i])
                    if abs(float(table(probe)) - s_of(probe)) > _CELL_TOL:
                        bad.add(i)
            if not bad or round_idx == 15:
                break
            nodes = np.sort(np.concatenate([nodes, mids[sorted(bad)]]))
        avals = np.array([self._antideriv_quad(float(x)) for x in nodes])
        self._table = HermiteTable(nodes, svals, dvals, avals)

    def eval_cached(self, xi):
        """Table-backed value, accurate to about the per-cell budget."""
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        ax = np.abs(arr)
        out = np.asarray(self._table(np.minimum(ax, self.table_max)))
        for i in np.nonzero(ax > self.table_max)[0]:
            out[i] = self.eval(float(ax[i]))
        out = np.sign(arr) * out
        return out if np.ndim(xi) else float(out[0])

    def antideriv(self, r):
        """Integral of S from 0 to r, for r >= 0.

        Cached-table lookup with an exact in-cell integral of the Hermite
        interpolant; falls back to direct quadrature beyond the table.
        """
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r_arr < 0):
            raise DomainError("antiderivative of S is defined for r >= 0")
        out = np.zeros_like(r_arr)
        inside = r_arr <= self.table_max
        if np.any(inside):
            idx, part = self._table.integral_from_node(r_arr[inside])
            out[inside] = self._table.anti[idx] + part
        for i in np.nonzero(~inside)[0]:
            out[i] = self._antideriv_quad(float(r_arr[i]))
        return out if np.ndim(r) else float(out[0])

    # ---- reported constants ----------------------------------------------

    @property
    def prime0(self) -> float:
        """Slope at zero: exactly half the slope of the underlying sigma."""
        return 0.5 * self.sat.sigma_prime0

    def measured_sinf(self) -> float:
        """Limit value measured by quadrature at a large abscissa."""
        return self.eval(_XI_BIG)

    @property
    def kernel_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(nodes, values, derivatives) arrays for the compiled kernels."""
        return self._table.x, self._table.val, self._table.der


@dataclass
class BoundReport:
    """Empirical lower bound for the cubic-in-scale slope comparison."""

    inf_ratio: float
    worst_xi: float
    worst_m: float
    passed: bool

    @property
    def c2_estimate(self) -> float:
        return self.inf_ratio

    def to_dict(self) -> dict:
        return {
            "inf_ratio": self.inf_ratio,
            "worst_xi": self.worst_xi,
            "worst_m": self.worst_m,
            "c2_estimate": self.c2_estimate,
            "passed": self.passed,
        }


def check_scaling_bound(
    modsat: ModifiedSaturation, xi_grid: np.ndarray, m_grid: np.ndarray
) -> BoundReport:
    """Measure inf over the grids of M^3 S'(M xi) / S'(xi).

    The comparison requires M >= 1 and positive xi. Passing means the
    measured infimum is strictly positive; its value estimates the constant
    in the scaling inequality.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    m_grid = np.asarray(m_grid, dtype=float)
    if np.any(m_grid < 1.0):
        raise DomainError("scale grid must lie in [1, inf)")
    if np.any(xi_grid <= 0.0):
        raise DomainError("xi grid must be positive")
    best = math.inf
    wxi = wm = math.nan
    sp = {float(x): modsat.prime(x) for x in xi_grid}
    for m in m_grid:
        for x in xi_grid:
            ratio = m ** 3 * modsat.prime(m * x) / sp[float(x)]
            if ratio < best:
                best, wxi, wm = ratio, float(x), float(m)
    return BoundReport(inf_ratio=best, worst_xi=wxi, worst_m=wm, passed=best > 0.0)
