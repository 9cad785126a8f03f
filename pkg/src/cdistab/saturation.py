"""Scalar saturation functions and their axiom checks.

A saturation function is an odd, globally Lipschitz, bounded nonlinearity
that is nondecreasing with a nonincreasing derivative on the positive axis.
Built-ins are the hard clip, tanh, and arctan; custom functions can be loaded
from a two-column CSV table and are interpolated monotonically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidSaturationError, UsageError

_BUILTIN_KINDS = ("standard", "tanh", "arctan")


@dataclass(frozen=True)
class CustomTable:
    """Tabulated nonlinearity on xi >= 0, extended oddly and clamped above."""

    xi: np.ndarray
    values: np.ndarray
    interp: PchipInterpolator = field(repr=False)
    deriv: PchipInterpolator = field(repr=False)
    anti: PchipInterpolator = field(repr=False)


def _base_eval(kind: str, table: Optional[CustomTable], xi):
    if kind == "standard":
        return np.clip(xi, -1.0, 1.0)
    if kind == "tanh":
        return np.tanh(xi)
    if kind == "arctan":
        return np.arctan(xi)
    ax = np.abs(xi)
    out = np.sign(xi) * np.where(
        ax >= table.xi[-1], table.values[-1], table.interp(np.minimum(ax, table.xi[-1]))
    )
    return out


def _base_prime(kind: str, table: Optional[CustomTable], xi):
    if kind == "standard":
        # flat-side convention at the kink: derivative 0 at |xi| == 1
        return np.where(np.abs(xi) < 1.0, 1.0, 0.0)
    if kind == "tanh":
        t = np.tanh(xi)
        return 1.0 - t * t
    if kind == "arctan":
        return 1.0 / (1.0 + np.asarray(xi) ** 2)
    ax = np.abs(xi)
    return np.where(ax >= table.xi[-1], 0.0, table.deriv(np.minimum(ax, table.xi[-1])))


def _base_antideriv(kind: str, table: Optional[CustomTable], xi):
    ax = np.abs(xi)
    if kind == "standard":
        return np.where(ax <= 1.0, 0.5 * ax * ax, ax - 0.5)
    if kind == "tanh":
        # log(cosh x) written to avoid overflow for large |x|
        return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)
    if kind == "arctan":
        return ax * np.arctan(ax) - 0.5 * np.log1p(ax * ax)
    inside = np.minimum(ax, table.xi[-1])
    out = table.anti(inside)
    out = out + np.where(ax > table.xi[-1], (ax - table.xi[-1]) * table.values[-1], 0.0)
    return out


@dataclass(frozen=True)
class SaturationFn:
    """A saturation nonlinearity, possibly rescaled as sigma(k1*u)/k2.

    ``sigma_inf`` and ``sigma_prime0`` are the reported limit value and the
    slope at zero of the rescaled function.
    """

    kind: str
    k1: float = 1.0
    k2: float = 1.0
    table: Optional[CustomTable] = None
    sigma_inf: float = 1.0
    sigma_prime0: float = 1.0

    def __call__(self, xi):
        if isinstance(xi, float):
            return self.scalar(xi)
        return _base_eval(self.kind, self.table, np.multiply(xi, self.k1)) / self.k2

    def prime(self, xi):
        if isinstance(xi, float):
            return self.scalar_prime(xi)
        return self.k1 / self.k2 * _base_prime(self.kind, self.table, np.multiply(xi, self.k1))

    def antideriv(self, xi):
        """Running integral from zero; even and nonnegative."""
        if isinstance(xi, float):
            return self.scalar_antideriv(xi)
        return _base_antideriv(self.kind, self.table, np.multiply(xi, self.k1)) / (
            self.k1 * self.k2
        )

    # scalar fast paths: quadrature loops live on these
    def scalar(self, xi: float) -> float:
        x = self.k1 * xi
        if self.kind == "standard":
            v = x if -1.0 <= x <= 1.0 else math.copysign(1.0, x)
        elif self.kind == "tanh":
            v = math.tanh(x)
        elif self.kind == "arctan":
            v = math.atan(x)
        else:
            v = float(_base_eval(self.kind, self.table, x))
            return v / self.k2
        return v / self.k2

    def scalar_prime(self, xi: float) -> float:
        x = self.k1 * xi
        if self.kind == "standard":
            v = 1.0 if -1.0 < x < 1.0 else 0.0
        elif self.kind == "tanh":
            t = math.tanh(x)
            v = 1.0 - t * t
        elif self.kind == "arctan":
            v = 1.0 / (1.0 + x * x)
        else:
            v = float(_base_prime(self.kind, self.table, x))
        return self.k1 * v / self.k2

    def scalar_antideriv(self, xi: float) -> float:
        x = abs(self.k1 * xi)
        if self.kind == "standard":
            v = 0.5 * x * x if x <= 1.0 else x - 0.5
        elif self.kind == "tanh":
            v = x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)
        elif self.kind == "arctan":
            v = x * math.atan(x) - 0.5 * math.log1p(x * x)
        else:
            v = float(_base_antideriv(self.kind, self.table, x))
        return v / (self.k1 * self.k2)

    def normalized(self) -> "SaturationFn":
        """Rescale so that the limit value and the slope at zero are both one."""
        s = self.sigma_inf / self.sigma_prime0
        m = self.sigma_inf
        return SaturationFn(
            kind=self.kind,
            k1=self.k1 * s,
            k2=self.k2 * m,
            table=self.table,
            sigma_inf=1.0,
            sigma_prime0=1.0,
        )

    @property
    def kernel_code(self) -> int:
        """Integer tag used by the compiled right-hand sides (-1: unsupported)."""
        return {"standard": 0, "tanh": 1, "arctan": 2}.get(self.kind, -1)

    @property
    def kink_points(self) -> tuple[float, ...]:
        """Positive abscissae where the derivative jumps (quadrature split points)."""
        if self.kind == "standard":
            return (1.0 / self.k1,)
        return ()


def standard_saturation() -> SaturationFn:
    return SaturationFn("standard", sigma_inf=1.0, sigma_prime0=1.0)


def tanh_saturation() -> SaturationFn:
    return SaturationFn("tanh", sigma_inf=1.0, sigma_prime0=1.0)


def arctan_saturation() -> SaturationFn:
    return SaturationFn("arctan", sigma_inf=math.pi / 2.0, sigma_prime0=1.0)


def custom_saturation(xi: np.ndarray, values: np.ndarray) -> SaturationFn:
    """Build a saturation from tabulated (xi, sigma) samples.

    The table must have strictly increasing xi. Negative abscissae are
    accepted but only the nonnegative part is kept; the function is extended
    oddly and held constant beyond the last node.
    """
    xi = np.asarray(xi, dtype=float)
    values = np.asarray(values, dtype=float)
    if xi.ndim != 1 or xi.shape != values.shape:
        raise UsageError("table must be two equal-length 1-d columns")
    if not np.all(np.diff(xi) > 0):
        raise UsageError("table xi column must be strictly increasing")
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(values))):
        raise InvalidSaturationError("table contains non-finite entries")
    mask = xi >= 0
    xip, vp = xi[mask], values[mask]
    if xip.size < 4:
        raise UsageError("need at least 4 nodes with xi >= 0")
    if xip[0] > 0:
        xip = np.concatenate([[0.0], xip])
        vp = np.concatenate([[0.0], vp])
    if abs(vp[0]) > 0:
        raise InvalidSaturationError("table value at xi=0 must be 0")
    interp = PchipInterpolator(xip, vp)
    tab = CustomTable(xip, vp, interp, interp.derivative(), interp.antiderivative())
    inf = float(vp[-1])
    prime0 = float(tab.deriv(0.0))
    if inf <= 0 or prime0 <= 0:
        raise InvalidSaturationError("table limit value and slope at 0 must be positive")
    return SaturationFn("custom", table=tab, sigma_inf=inf, sigma_prime0=prime0)


def load_custom_saturation_csv(path: str | Path) -> SaturationFn:
    """Read a (xi, sigma) table from CSV. A header row is required."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UsageError(f"{path}: expected a header row plus data rows")
    header = [c.strip().lower() for c in rows[0]]
    if len(header) < 2 or any(_is_number(c) for c in header[:2]):
        raise UsageError(f"{path}: first row must be a header, e.g. 'xi,sigma'")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r])
    return custom_saturation(data[:, 0], data[:, 1])


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


@dataclass
class ValidationReport:
    """Per-axiom outcome of a saturation validation sweep."""

    odd_ok: bool
    lipschitz_ok: bool
    lipschitz_const: float
    sign_ok: bool
    limit_inf_ok: bool
    limit_slope_ok: bool
    monotone_ok: bool
    prime_monotone_ok: bool
    secant_bound_ok: bool
    secant_decreasing_ok: bool
    antideriv_ok: bool
    prime_floor_ok: bool
    xi0: float
    grid_max: float
    grid_points: int

    @property
    def passed(self) -> bool:
        return all(
            (
                self.odd_ok,
                self.lipschitz_ok,
                self.sign_ok,
                self.limit_inf_ok,
                self.limit_slope_ok,
                self.monotone_ok,
                self.prime_monotone_ok,
                self.secant_bound_ok,
                self.secant_decreasing_ok,
                self.antideriv_ok,
                self.prime_floor_ok,
            )
        )

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def validate_saturation(
    f: SaturationFn, x_max: float = 100.0, n_points: int = 10_001, tol: float = 1e-9
) -> ValidationReport:
    """Check the saturation axioms and their consequences on a symmetric grid.

    The grid covers [-x_max, x_max]; x_max must be at least 100 and the grid
    needs at least 1e4 points so the limit checks are meaningful.
    """
    if x_max < 100.0 or n_points < 10_000:
        raise UsageError("grid must cover at least [-100, 100] with >= 1e4 points")
    xs = np.linspace(-x_max, x_max, n_points)
    vals = np.asarray(f(xs), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InvalidSaturationError("function produced non-finite values on the grid")
    primes = np.asarray(f.prime(xs), dtype=float)
    if not np.all(np.isfinite(primes)):
        raise InvalidSaturationError("derivative produced non-finite values on the grid")

    odd_ok = bool(np.max(np.abs(vals + vals[::-1])) <= tol * max(1.0, f.sigma_inf))

    secants = np.abs(np.diff(vals)) / np.diff(xs)
    lipschitz_const = float(np.max(secants))
    # the slope at zero dominates all secants when the derivative decays;
    # tabulated functions get a little interpolation slack
    lipschitz_ok = bool(lipschitz_const <= f.sigma_prime0 * (1.0 + 1e-3))

    nz = xs != 0.0
    sign_ok = bool(np.all(vals[nz] * xs[nz] > 0.0))
    limit_inf_ok = bool(abs(vals[-1] - f.sigma_inf) <= 0.05 * f.sigma_inf)
    pos = xs > 0
    small = xs[pos][0]
    limit_slope_ok = bool(
        abs(float(f(small)) / small - f.sigma_prime0) <= 0.05 * f.sigma_prime0
    )

    monotone_ok = bool(np.all(np.diff(vals) >= -tol))
    pr = primes[xs >= 0]
    prime_monotone_ok = bool(np.all(np.diff(pr) <= tol))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(nz, vals / np.where(nz, xs, 1.0), f.sigma_prime0)
    secant_bound_ok = bool(np.all(primes[nz] <= ratio[nz] + tol))
    rp = ratio[xs > 0]
    secant_decreasing_ok = bool(np.all(np.diff(rp) <= 100.0 * tol))

    anti = np.asarray(f.antideriv(xs), dtype=float)
    antideriv_ok = bool(
        np.max(np.abs(anti - anti[::-1])) <= tol * max(1.0, float(anti[-1]))
        and np.all(anti[nz] > 0)
        and anti[-1] > 0.5 * f.sigma_inf * x_max
    )

    floor = 0.5 * f.sigma_prime0
    xpos = xs[xs >= 0]
    ppos = primes[xs >= 0]
    bad = np.nonzero(ppos < floor - tol)[0]
    # xi0 is the exclusive supremum: the first grid point where the bound fails
    xi0 = float(xpos[bad[0]]) if bad.size else float(xpos[-1])
    prime_floor_ok = bool(xi0 > 0.0)

    return ValidationReport(
        odd_ok=odd_ok,
        lipschitz_ok=lipschitz_ok,
        lipschitz_const=lipschitz_const,
        sign_ok=sign_ok,
        limit_inf_ok=limit_inf_ok,
        limit_slope_ok=limit_slope_ok,
        monotone_ok=monotone_ok,
        prime_monotone_ok=prime_monotone_ok,
        secant_bound_ok=secant_bound_ok,
        secant_decreasing_ok=secant_decreasing_ok,
        antideriv_ok=antideriv_ok,
        prime_floor_ok=prime_floor_ok,
        xi0=xi0,
        grid_max=x_max,
        grid_points=n_points,
    )
