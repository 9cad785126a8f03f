"""Deterministic ODE integration with dense sampling and stop conditions.

Fixed mode is classical fourth-order Runge-Kutta; adaptive mode is the
Fehlberg embedded 4(5) pair propagating the higher-order solution. Systems
with a rapidly rotating drive carry a step cap tied to the drive period so
the oscillation is always resolved. Known system kinds run through compiled
chunk kernels; anything else (including raw callables) takes the plain
Python path with identical arithmetic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels, systems
from .errors import DivergenceError, DomainError, RangeError, UsageError

DIVERGENCE_NORM = 1e12

# step caps relative to the drive period eps
FIXED_CAP_FRACTION = 1.0 / 50.0
ADAPTIVE_CAP_FRACTION = 1.0 / 20.0


@dataclass(frozen=True)
class StepControl:
    """Step-size policy: fixed(h) or adaptive(rtol, atol, h_max).

    ``eps_cap`` optionally ties the maximum step to a drive period eps:
    at most eps/50 in fixed mode and eps/20 in adaptive mode.
    """

    mode: str
    h: float = 0.0
    rtol: float = 1e-8
    atol: float = 1e-10
    h_max: float = math.inf
    eps_cap: Optional[float] = None

    @staticmethod
    def fixed(h: float, eps_cap: Optional[float] = None) -> "StepControl":
        if not (h > 0):
            raise DomainError("fixed step h must be > 0")
        return StepControl(mode="fixed", h=h, eps_cap=eps_cap)

    @staticmethod
    def adaptive(rtol: float = 1e-8, atol: float = 1e-10,
                 h_max: float = math.inf,
                 eps_cap: Optional[float] = None) -> "StepControl":
        if not (rtol > 0 and atol > 0 and h_max > 0):
            raise DomainError("adaptive tolerances and h_max must be > 0")
        return StepControl(mode="adaptive", rtol=rtol, atol=atol, h_max=h_max,
                           eps_cap=eps_cap)

    def max_step(self) -> float:
        if self.mode == "fixed":
            cap = math.inf if self.eps_cap is None else self.eps_cap * FIXED_CAP_FRACTION
            return min(self.h, cap)
        cap = math.inf if self.eps_cap is None else self.eps_cap * ADAPTIVE_CAP_FRACTION
        return min(self.h_max, cap)


@dataclass
class Trajectory:
    """Sampled solution: strictly increasing times, states, diagnostics."""

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or self.states.shape[0] != self.times.size:
            raise UsageError("times and states must have matching leading length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise UsageError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise UsageError("trajectory states must be finite")

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        """Linearly interpolated state; t must lie inside the sampled span."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise RangeError(f"t={t} outside sampled span "
                             f"[{self.times[0]}, {self.times[-1]}]")
        return np.array([
            np.interp(t, self.times, self.states[:, j])
            for j in range(self.states.shape[1])
        ])

    def segment(self, t0: float, t1: float) -> "Trajectory":
        """Subtrajectory of samples with t0 <= t <= t1."""
        if t0 > t1:
            raise UsageError("segment needs t0 <= t1")
        mask = (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)
        if not np.any(mask):
            raise RangeError("segment contains no samples")
        diags = {k: v[mask] for k, v in self.diagnostics.items()}
        return Trajectory(self.times[mask], self.states[mask], diags)

    def to_csv(self, path: str | Path) -> None:
        """Write t, state columns, diagnostic columns at 17 significant digits."""
        path = Path(path)
        dim = self.states.shape[1]
        names = ["t"] + [f"x{j}" for j in range(dim)]
        cols = [self.times] + [self.states[:, j] for j in range(dim)]
        for key in self.diagnostics:
            names.append(key)
            cols.append(self.diagnostics[key])
        data = np.column_stack(cols)
        np.savetxt(path, data, fmt="%.17g", delimiter=",",
                   header=",".join(names), comments="")


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.dot(v, v)))


def _state0_vector(system, state0) -> np.ndarray:
    if isinstance(system, systems.SystemSpec):
        return system.state_vector(state0).astype(float).copy()
    vec = np.asarray(state0, dtype=float).copy()
    if vec.ndim != 1:
        raise UsageError("state must be a 1-d vector")
    return vec


def _rhs_callable(system) -> Callable[[float, np.ndarray], np.ndarray]:
    if isinstance(system, systems.SystemSpec):
        return lambda t, y: systems.rhs(system, t, y)
    if not callable(system):
        raise UsageError("system must be a SystemSpec or a callable rhs")
    return system


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Fehlberg 4(5) tableau
_FB_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_FB_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3554.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_FB_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_FB_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)


def _rkf45_step(f, t, y, h):
    ks = [f(t, y)]
    for i in range(1, 6):
        acc = y.copy()
        for a, k in zip(_FB_A[i], ks):
            acc = acc + (h * a) * k
        ks.append(f(t + _FB_C[i] * h, acc))
    y5 = y.copy()
    err = np.zeros_like(y)
    for b5, b4, k in zip(_FB_B5, _FB_B4, ks):
        y5 = y5 + (h * b5) * k
        err = err + (h * (b5 - b4)) * k
    return y5, err


def _integrate_interval_fixed(f, t_a, t_b, y, h_cap):
    n_sub = max(1, int(math.ceil((t_b - t_a) / h_cap - 1e-12)))
    h = (t_b - t_a) / n_sub
    for i in range(n_sub):
        y = _rk4_step(f, t_a + i * h, y, h)
    return y


def _integrate_interval_adaptive(f, t_a, t_b, y, control):
    h_cap = control.max_step()
    h = min(h_cap, t_b - t_a)
    t = t_a
    floor = 1e-14 * max(1.0, abs(t_b))
    while t < t_b - 1e-15 * max(1.0, abs(t_b)):
        h = min(h, t_b - t)
        y_new, err = _rkf45_step(f, t, y, h)
        scale = control.atol + control.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_ratio = float(np.max(np.abs(err) / scale)) if y.size else 0.0
        if err_ratio <= 1.0:
            t += h
            y = y_new
            grow = 5.0 if err_ratio == 0.0 else min(5.0, 0.9 * err_ratio ** -0.2)
            h = min(h_cap, h * grow)
        else:
            h = max(floor, h * max(0.2, 0.9 * err_ratio ** -0.2))
    return y


def integrate(system, state0, t_span, control: StepControl, sample_dt: float,
              stop: Optional[Callable[[float, np.ndarray], bool]] = None,
              diagnostics: Optional[dict[str, Callable[[float, np.ndarray], float]]] = None,
              ) -> Trajectory:
    """Integrate ``system`` over ``t_span`` and sample every ``sample_dt``.

    Samples land at t0 + k*sample_dt plus the right endpoint. The stop
    predicate is evaluated at sample times only; when it fires, the
    trajectory is truncated at that sample. A state norm above 1e12 raises
    DivergenceError carrying the partial trajectory.

    Systems whose spec exposes a drive period get the period-based step cap
    automatically even when the control does not set one.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
        raise UsageError("t_span must be finite with t1 > t0")
    if not (sample_dt > 0):
        raise UsageError("sample_dt must be > 0")

    if (isinstance(system, systems.SystemSpec) and system.eps is not None
            and control.eps_cap is None):
        control = StepControl(mode=control.mode, h=control.h, rtol=control.rtol,
                              atol=control.atol, h_max=control.h_max,
                              eps_cap=system.eps)

    y = _state0_vector(system, state0)
    dim = y.size

    span = t1 - t0
    n_full = int(math.floor(span / sample_dt + 1e-9))
    rem = span - n_full * sample_dt
    if rem < 1e-9 * sample_dt:
        rem = 0.0
    intervals = n_full + (1 if rem > 0 else 0)

    times = [t0]
    rows = [y.copy()]
    if stop is not None and stop(t0, y):
        return _finish(times, rows, diagnostics)

    payload = None
    if (isinstance(system, systems.SystemSpec) and control.mode == "fixed"):
        payload = systems.kernel_payload(system)

    if payload is not None:
        code, p, sat_code, k1c, k2c, tx, tv, td = payload
        h_cap = control.max_step()
        n_sub = max(1, int(math.ceil(sample_dt / h_cap - 1e-12)))
        chunk = 1024
        done = 0
        stopped = False
        while done < n_full and not stopped:
            m = min(chunk, n_full - done)
            out = np.empty((m, dim))
            filled, diverged = _kernels.run_rk4_chunk(
                code, t0 + done * sample_dt, y, sample_dt, n_sub, m,
                p, sat_code, k1c, k2c, tx, tv, td, out)
            for i in range(filled):
                times.append(t0 + (done + i + 1) * sample_dt)
                rows.append(out[i].copy())
                if stop is not None and stop(times[-1], rows[-1]):
                    stopped = True
                    break
            if diverged and not stopped:
                partial = _finish(times, rows, diagnostics)
                raise DivergenceError(times[-1], partial)
            done += filled if not stopped else m
        if not stopped and rem > 0.0:
            n_sub_rem = max(1, int(math.ceil(rem / h_cap - 1e-12)))
            out = np.empty((1, dim))
            filled, diverged = _kernels.run_rk4_chunk(
                code, t0 + n_full * sample_dt, y, rem, n_sub_rem, 1,
                p, sat_code, k1c, k2c, tx, tv, td, out)
            if diverged:
                partial = _finish(times, rows, diagnostics)
                raise DivergenceError(times[-1], partial)
            times.append(t1)
            rows.append(out[0].copy())
        return _finish(times, rows, diagnostics)

    # generic path
    f = _rhs_callable(system)
    h_cap = control.max_step()
    for k in range(intervals):
        t_a = t0 + k * sample_dt
        t_b = t1 if (k == n_full) else t0 + (k + 1) * sample_dt
        if control.mode == "fixed":
            y = _integrate_interval_fixed(f, t_a, t_b, y, h_cap)
        else:
            y = _integrate_interval_adaptive(f, t_a, t_b, y, control)
        if not np.all(np.isfinite(y)) or _norm(y) > DIVERGENCE_NORM:
            partial = _finish(times, rows, diagnostics)
            raise DivergenceError(times[-1], partial)
        times.append(t_b)
        rows.append(y.copy())
        if stop is not None and stop(t_b, y):
            break
    return _finish(times, rows, diagnostics)


def _finish(times, rows, diagnostics) -> Trajectory:
    traj = Trajectory(np.asarray(times), np.vstack(rows))
    if diagnostics:
        for name, fn in diagnostics.items():
            traj.diagnostics[name] = np.array(
                [fn(t, s) for t, s in zip(traj.times, traj.states)])
    return traj


def ode_residual(system, traj: Trajectory) -> float:
    """Max norm of (centered difference minus vector field) over interior samples."""
    if traj.times.size < 3:
        raise UsageError("residual needs at least 3 samples")
    dts = np.diff(traj.times)
    dt = float(dts[0])
    if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1.0):
        raise UsageError("residual requires uniformly spaced samples")
    deriv = (traj.states[2:] - traj.states[:-2]) / (2.0 * dt)
    ts = traj.times[1:-1]
    if isinstance(system, systems.SystemSpec):
        field_vals = systems.rhs_batch(system, ts, traj.states[1:-1])
    else:
        f = _rhs_callable(system)
        field_vals = np.vstack([f(float(t), s) for t, s in zip(ts, traj.states[1:-1])])
    return float(np.max(np.linalg.norm(deriv - field_vals, axis=1)))


def batch_map(fn: Callable, items: Sequence, workers: int = 4) -> list:
    """Apply ``fn`` over ``items`` with a bounded pool; results keep order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
