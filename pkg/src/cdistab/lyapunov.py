"""Energy function of the averaged system and the decrease/capture checkers.

The energy function combines the squared velocity-like block with running
integrals of the averaged nonlinearity along two radii. Along the autonomous
averaged flow it decreases strictly; along the rotating-frame flow its
derivative splits into two nonpositive terms plus an oscillatory remainder,
so decrease is certified over windows rather than pointwise, with capture
into a sublevel set and a quadratic dissipation estimate afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PreconditionError, RangeError, UsageError
from .geometry import TWO_PI
from .integrator import StepControl, Trajectory, integrate
from .modified import ModifiedSaturation
from .quadrature import composite_simpson
from .systems import SystemSpec, averaged_field

DEFAULT_RHO = 0.1
DEFAULT_R = 50.0
CAPTURE_SLACK = 1e-3  # relative slack on the post-capture bound
WINDOW_GRID = 16  # number of window lengths scanned per start


@dataclass(frozen=True)
class LyapunovContext:
    """Bundles the averaged nonlinearity used by the energy function."""

    modsat: ModifiedSaturation


def _split(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    state = np.asarray(state, dtype=float)
    n = state.size // 2
    return state[:n], state[n:]


def v0(ctx: LyapunovContext, z: np.ndarray, y: np.ndarray) -> float:
    """Energy value at (z, y); zero only at the origin."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    ms = ctx.modsat
    return float(
        y @ y + ms.antideriv(np.linalg.norm(z)) + ms.antideriv(np.linalg.norm(z - y))
    )


def v0_batch(ctx: LyapunovContext, states: np.ndarray) -> np.ndarray:
    """Energy along sampled states of shape (m, 2n)."""
    states = np.asarray(states, dtype=float)
    n = states.shape[1] // 2
    z, y = states[:, :n], states[:, n:]
    ms = ctx.modsat
    return (
        np.sum(y * y, axis=1)
        + ms.antideriv(np.linalg.norm(z, axis=1))
        + ms.antideriv(np.linalg.norm(z - y, axis=1))
    )


def _field_batch(ctx: LyapunovContext, pts: np.ndarray) -> np.ndarray:
    """Averaged field at many points, using the cached nonlinearity."""
    nrm = np.linalg.norm(pts, axis=1)
    scale = np.zeros_like(nrm)
    pos = nrm > 0
    scale[pos] = np.asarray(ctx.modsat.eval_cached(nrm[pos])) / nrm[pos]
    return scale[:, None] * pts


def v0_dot_t0(ctx: LyapunovContext, z: np.ndarray, y: np.ndarray) -> float:
    """Energy derivative along the autonomous averaged flow; <= 0, strict off 0."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    ms = ctx.modsat
    s = float(ms.eval_cached(np.linalg.norm(z)))
    gap = float(y @ (averaged_field(ms, z) - averaged_field(ms, z - y)))
    return -s * s - gap


def v0_dot_t0_batch(ctx: LyapunovContext, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    n = states.shape[1] // 2
    z, y = states[:, :n], states[:, n:]
    s = np.asarray(ctx.modsat.eval_cached(np.linalg.norm(z, axis=1)))
    gap = np.sum(y * (_field_batch(ctx, z) - _field_batch(ctx, z - y)), axis=1)
    return -s * s - gap


def _drive(ts: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    phi = TWO_PI * np.mod(np.asarray(ts, dtype=float) / eps, 1.0)
    return np.sin(phi), np.cos(phi)


def drive_component(ts, eps: float, zs: np.ndarray) -> np.ndarray:
    """Projection of z onto the rotating drive direction at each sample."""
    bx, by = _drive(np.atleast_1d(ts), eps)
    zs = np.atleast_2d(zs)
    out = bx * zs[:, 0] + by * zs[:, 1]
    return out if np.ndim(ts) else float(out[0])


def v0_dot_teps_terms(ctx: LyapunovContext, t: float, eps: float,
                      z: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Three-way split of the energy derivative along the rotating-frame flow.

    The first two terms are nonpositive everywhere; the third is the
    oscillatory remainder and can make the sum positive. At z = 0 the first
    term is extended continuously by zero.
    """
    arr = np.concatenate([np.asarray(z, dtype=float), np.asarray(y, dtype=float)])
    t1, t2, t3 = v0_dot_teps_terms_batch(ctx, np.array([t]), eps, arr[None, :])
    return float(t1[0]), float(t2[0]), float(t3[0])


def v0_dot_teps_terms_batch(ctx: LyapunovContext, ts: np.ndarray, eps: float,
                            states: np.ndarray):
    states = np.asarray(states, dtype=float)
    z, y = states[:, :2], states[:, 2:]
    ms = ctx.modsat
    bx, by = _drive(ts, eps)
    bz = bx * z[:, 0] + by * z[:, 1]
    sig = np.asarray(ms.sat(bz), dtype=float)
    nz = np.linalg.norm(z, axis=1)
    s_nz = np.asarray(ms.eval_cached(nz))
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.where(nz > 0, bz / np.where(nz > 0, nz, 1.0), 0.0)
    term1 = -s_nz * cosang * sig
    fz = _field_batch(ctx, z)
    fzy = _field_batch(ctx, z - y)
    term2 = -np.sum(y * (fz - fzy), axis=1)
    yb = bx * y[:, 0] + by * y[:, 1]
    term3 = 2.0 * (np.sum(y * fz, axis=1) - yb * sig)
    return term1, term2, term3


def teps_trajectory(ctx: LyapunovContext, eps: float, z0, y0, t_span,
                    sample_dt: float, control: Optional[StepControl] = None,
                    with_diagnostics: bool = True) -> Trajectory:
    """Integrate the rotating-frame system and attach the standard channels.

    Channels: energy ``v0``, drive projection ``bz``, and the three
    derivative terms ``term1``/``term2``/``term3``.
    """
    spec = SystemSpec.t_eps(eps, ctx.modsat.sat)
    if control is None:
        control = StepControl.fixed(eps / 50.0, eps_cap=eps)
    state0 = np.concatenate([np.asarray(z0, float), np.asarray(y0, float)])
    traj = integrate(spec, state0, t_span, control, sample_dt)
    if with_diagnostics:
        attach_teps_diagnostics(ctx, traj, eps)
    return traj


def attach_teps_diagnostics(ctx: LyapunovContext, traj: Trajectory, eps: float) -> None:
    traj.diagnostics["v0"] = v0_batch(ctx, traj.states)
    traj.diagnostics["bz"] = drive_component(traj.times, eps, traj.states[:, :2])
    t1, t2, t3 = v0_dot_teps_terms_batch(ctx, traj.times, eps, traj.states)
    traj.diagnostics["term1"] = t1
    traj.diagnostics["term2"] = t2
    traj.diagnostics["term3"] = t3


def window_integrals(ctx: LyapunovContext, traj: Trajectory, eps: float
                     ) -> tuple[float, float, float]:
    """Time integrals of the three derivative terms over a sampled segment.

    Their sum reproduces the energy change across the segment up to the
    sampling quadrature error, which ties the split to the actual flow.
    """
    if traj.times.size < 5:
        raise UsageError("window integrals need at least 5 samples")
    dts = np.diff(traj.times)
    dt = float(dts[0])
    if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1.0):
        raise UsageError("window integrals require uniform sampling")
    if "term1" in traj.diagnostics:
        t1 = traj.diagnostics["term1"]
        t2 = traj.diagnostics["term2"]
        t3 = traj.diagnostics["term3"]
    else:
        t1, t2, t3 = v0_dot_teps_terms_batch(ctx, traj.times, eps, traj.states)
    return (
        composite_simpson(t1, dt),
        composite_simpson(t2, dt),
        composite_simpson(t3, dt),
    )


@dataclass
class WindowReport:
    """Outcome of one window-decrease check."""

    z0: np.ndarray
    y0: np.ndarray
    eps: float
    rho: float
    R: float
    T: float
    dv0: float
    rate: float
    L_eps: float
    K1_eps: float
    K2_eps: float
    rates: np.ndarray = field(repr=False, default=None)
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "z0": list(map(float, self.z0)),
            "y0": list(map(float, self.y0)),
            "eps": self.eps,
            "rho": self.rho,
            "R": self.R,
            "T": self.T,
            "dv0": self.dv0,
            "rate": self.rate,
            "L_eps": self.L_eps,
            "K1_eps": self.K1_eps,
            "K2_eps": self.K2_eps,
            "passed": self.passed,
        }


def window_decrease_check(ctx: LyapunovContext, eps: float, z0, y0,
                          rho: float = DEFAULT_RHO, R: float = DEFAULT_R,
                          steps_per_period: int = 80) -> WindowReport:
    """Scan window lengths for a certified energy drop from one start.

    The start must satisfy v0 >= R. Windows T are a 16-point grid in
    [rho*max(1,|y0|), 2*rho*max(1,|y0|)]; the check passes when the best
    measured rate -dv0/T over the grid is strictly positive. The grid points
    are aligned exactly onto the sample grid so no interpolation enters the
    measured drop.
    """
    z0 = np.asarray(z0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    v00 = v0(ctx, z0, y0)
    if v00 < R:
        raise PreconditionError(f"start has v0={v00:.3f} < R={R}")
    t_min = rho * max(1.0, float(np.linalg.norm(y0)))
    t_max = 2.0 * t_min
    grid_m = WINDOW_GRID - 1
    # sample_dt divides t_min/grid_m, so every scanned T is a sample time
    m_sub = max(1, int(math.ceil((t_min / grid_m) / (eps / steps_per_period))))
    sample_dt = t_min / (grid_m * m_sub)
    traj = teps_trajectory(ctx, eps, z0, y0, (0.0, t_max), sample_dt)
    v0s = traj.diagnostics["v0"]
    ts = np.array([t_min * (1.0 + k / grid_m) for k in range(WINDOW_GRID)])
    idx = np.array([grid_m * m_sub + k * m_sub for k in range(WINDOW_GRID)])
    dvs = v0s[idx] - v00
    rates = -dvs / ts
    best = int(np.argmax(rates))
    t_best = float(ts[best])
    seg = traj.segment(0.0, t_best)
    l_eps, k1_eps, k2_eps = window_integrals(ctx, seg, eps)
    return WindowReport(
        z0=z0, y0=y0, eps=eps, rho=rho, R=R, T=t_best,
        dv0=float(dvs[best]), rate=float(rates[best]),
        L_eps=l_eps, K1_eps=k1_eps, K2_eps=k2_eps,
        rates=rates, passed=bool(rates[best] > 0.0),
    )


@dataclass
class CaptureReport:
    """Outcome of one capture check."""

    z0: np.ndarray
    y0: np.ndarray
    eps: float
    R: float
    horizon: float
    captured: bool
    capture_time: float
    post_max: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "z0": list(map(float, self.z0)),
            "y0": list(map(float, self.y0)),
            "eps": self.eps,
            "R": self.R,
            "horizon": self.horizon,
            "captured": self.captured,
            "capture_time": self.capture_time,
            "post_max": self.post_max,
            "passed": self.passed,
        }


def capture_check(ctx: LyapunovContext, eps: float, z0, y0,
                  R: float = DEFAULT_R, horizon: float = 10.0,
                  t_max: float = 1000.0, sample_dt: float = 0.01,
                  segment_len: float = 25.0) -> CaptureReport:
    """Find the first sublevel entry and bound the energy afterwards.

    Integrates in segments until the sampled energy first drops to R (the
    capture time), then checks v0 <= 2R(1 + slack) over the follow-up
    horizon. Failing to capture within t_max yields a failed report, not an
    exception. The horizon must be at least 10 time units.
    """
    if horizon < 10.0:
        raise PreconditionError("capture horizon must be at least 10 time units")
    z0 = np.asarray(z0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    state = np.concatenate([z0, y0])
    ctx_v0 = v0(ctx, z0, y0)
    spec = SystemSpec.t_eps(eps, ctx.modsat.sat)
    control = StepControl.fixed(eps / 50.0, eps_cap=eps)

    captured = ctx_v0 <= R
    t_cap = 0.0
    t = 0.0
    while not captured and t < t_max:
        t_end = min(t + segment_len, t_max)
        traj = integrate(spec, state, (t, t_end), control, sample_dt)
        vals = v0_batch(ctx, traj.states)
        hits = np.nonzero(vals <= R)[0]
        if hits.size:
            captured = True
            t_cap = float(traj.times[hits[0]])
            state = traj.states[hits[0]].copy()
        else:
            state = traj.final_state.copy()
        t = t_end
    if not captured:
        return CaptureReport(z0=z0, y0=y0, eps=eps, R=R, horizon=horizon,
                             captured=False, capture_time=math.nan,
                             post_max=math.nan, passed=False)
    post = integrate(spec, state, (t_cap, t_cap + horizon), control,
                     min(sample_dt, 0.005))
    post_max = float(np.max(v0_batch(ctx, post.states)))
    ok = post_max <= 2.0 * R * (1.0 + CAPTURE_SLACK)
    return CaptureReport(z0=z0, y0=y0, eps=eps, R=R, horizon=horizon,
                         captured=True, capture_time=t_cap,
                         post_max=post_max, passed=bool(ok))


@dataclass
class L2Report:
    """Outcome of one quadratic-dissipation window check."""

    t2: float
    T: float
    eps: float
    dv0: float
    integral: float
    ratio: float
    vacuous: bool
    passed: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("t2", "T", "eps", "dv0", "integral", "ratio", "vacuous", "passed")}


def l2_estimate_check(ctx: LyapunovContext, eps: float, traj: Trajectory,
                      t2: float, T: float, R: float = DEFAULT_R,
                      rho: float = DEFAULT_RHO) -> L2Report:
    """Compare the energy drop over [t2, t2+T] against the quadratic integral.

    Preconditions: T in [max(rho, 1/2), 2] with T/eps an integer, the window
    inside the sampled span, and the trajectory already captured (energy at
    most 2R over the window). Passing means dv0 <= -c * integral with the
    measured c > 0; a window at rest passes vacuously.
    """
    lo = max(rho, 0.5)
    if not (lo - 1e-12 <= T <= 2.0 + 1e-12):
        raise PreconditionError(f"window length T={T} outside [{lo}, 2]")
    if abs(T / eps - round(T / eps)) > 1e-9:
        raise PreconditionError("T/eps must be an integer")
    if t2 < traj.times[0] - 1e-12 or t2 + T > traj.times[-1] + 1e-12:
        raise RangeError("window lies outside the trajectory span")
    seg = traj.segment(t2, t2 + T)
    dts = np.diff(seg.times)
    dt = float(dts[0])
    if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1.0):
        raise UsageError("window requires uniform sampling")
    vals = seg.diagnostics.get("v0")
    if vals is None:
        vals = v0_batch(ctx, seg.states)
    if float(np.max(vals)) > 2.0 * R * (1.0 + CAPTURE_SLACK):
        raise PreconditionError("window is not captured: v0 exceeds 2R")
    bz = seg.diagnostics.get("bz")
    if bz is None:
        bz = drive_component(seg.times, eps, seg.states[:, :2])
    ny2 = np.sum(seg.states[:, 2:] ** 2, axis=1)
    integral = composite_simpson(ny2 + bz * bz, dt)
    dv0 = float(vals[-1] - vals[0])
    if integral <= 1e-12 and abs(dv0) <= 1e-10:
        return L2Report(t2=t2, T=T, eps=eps, dv0=dv0, integral=integral,
                        ratio=math.inf, vacuous=True, passed=True)
    ratio = -dv0 / integral
    return L2Report(t2=t2, T=T, eps=eps, dv0=dv0, integral=integral,
                    ratio=float(ratio), vacuous=False, passed=bool(ratio > 0.0))


@dataclass
class TailReport:
    """Sup of |drive projection| over sliding late windows."""

    starts: np.ndarray
    sups: np.ndarray
    decreasing: bool

    def to_dict(self) -> dict:
        return {
            "starts": list(map(float, self.starts)),
            "sups": list(map(float, self.sups)),
            "decreasing": self.decreasing,
        }


def barbalat_tail_check(traj: Trajectory, eps: float, starts, width: float = 5.0
                        ) -> TailReport:
    """Check that sup |b^T z| over [T, T+width] decreases along later T.

    A decreasing tail is the sampled surrogate for the drive projection
    tending to zero.
    """
    starts = np.asarray(starts, dtype=float)
    bz = traj.diagnostics.get("bz")
    if bz is None:
        bz = drive_component(traj.times, eps, traj.states[:, :2])
    sups = []
    for t_start in starts:
        if t_start + width > traj.times[-1] + 1e-9:
            raise RangeError("tail window extends past the trajectory")
        mask = (traj.times >= t_start) & (traj.times <= t_start + width)
        sups.append(float(np.max(np.abs(bz[mask]))))
    sups = np.asarray(sups)
    return TailReport(starts=starts, sups=sups,
                      decreasing=bool(np.all(np.diff(sups) < 0.0)))


def di_value(sat, z: float, y: float) -> float:
    """Planar-chain energy: y^2 plus running integrals of sigma itself."""
    return float(y * y + sat.antideriv(z) + sat.antideriv(z - y))


def di_value_batch(sat, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    z, y = states[:, 0], states[:, 1]
    return y * y + np.asarray(sat.antideriv(z)) + np.asarray(sat.antideriv(z - y))


def di_dot_batch(sat, states: np.ndarray) -> np.ndarray:
    """Planar-chain energy derivative: -sigma(z)^2 - y (sigma(z) - sigma(z-y))."""
    states = np.asarray(states, dtype=float)
    z, y = states[:, 0], states[:, 1]
    sz = np.asarray(sat(z))
    return -sz * sz - y * (sz - np.asarray(sat(z - y)))
