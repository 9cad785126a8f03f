"""Verification suites, batch sweeps, and report generation.

Each suite turns one family of checks into a SuiteResult with per-check
records and measured constants. Reports serialize to JSON deterministically:
fixed key order, no timestamps, config hash and tool version embedded.
Wall-clock timing is printed to stderr, never written into report files.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import convergence_study
from .config import RunConfig, config_hash
from .errors import CdistabError, DivergenceError
from .geometry import E1
from .integrator import StepControl, Trajectory, integrate
from .lyapunov import (
    LyapunovContext,
    barbalat_tail_check,
    capture_check,
    l2_estimate_check,
    teps_trajectory,
    v0,
    v0_batch,
    v0_dot_t0_batch,
    window_decrease_check,
)
from .modified import ModifiedSaturation, check_scaling_bound
from .saturation import validate_saturation
from .systems import (
    SystemKind,
    SystemSpec,
    a_eps_matrix,
    feedback_gain,
    normal_form,
    rhs_batch,
    s_to_t,
    scale_trajectory,
    spectral_abscissa,
    t0_linearization_block,
)

SUITE_NAMES = (
    "saturation", "averaging", "lyapunov-T0", "window-decrease",
    "capture", "l2", "hurwitz", "equivalence",
)


@dataclass
class SuiteResult:
    """Per-check records plus aggregate verdict for one named suite."""

    suite: str
    passed: bool
    records: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        # wall_clock intentionally omitted: reports must be byte-identical
        return {
            "suite": self.suite,
            "passed": self.passed,
            "records": self.records,
            "constants": self.constants,
        }


# ---- samplers ----------------------------------------------------------------


def sphere_sample(rng: np.random.Generator, radius: float, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return radius / np.linalg.norm(v) * v


def ball_sample(rng: np.random.Generator, radius: float, dim: int) -> np.ndarray:
    return sphere_sample(rng, radius * rng.uniform() ** (1.0 / dim), dim)


def scale_to_v0(ctx: LyapunovContext, direction: np.ndarray, target: float) -> np.ndarray:
    """Rescale a nonzero direction so the energy hits the target value."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    hi = 1.0
    while v0(ctx, *(np.split(hi * direction, 2))) < target:
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if v0(ctx, *(np.split(mid * direction, 2))) < target:
            lo = mid
        else:
            hi = mid
    return hi * direction


def adversarial_start(ctx: LyapunovContext, target_v0: float) -> np.ndarray:
    """The worst-case family: z = y aligned with e1, drive projection zero."""
    direction = np.concatenate([E1, E1])
    return scale_to_v0(ctx, direction, target_v0)


def lyapunov_starts(ctx: LyapunovContext, rng: np.random.Generator, count: int,
                    v0_min: float, v0_max: float, include_adversarial: bool = True
                    ) -> list[np.ndarray]:
    """Seeded starts with energies in [v0_min, v0_max].

    The adversarial aligned family is always folded in (one start for every
    four random ones) because it is the known worst case for pointwise
    decrease.
    """
    starts = []
    n_adv = max(1, count // 4) if include_adversarial else 0
    for i in range(n_adv):
        frac = (i + 1) / n_adv
        starts.append(adversarial_start(ctx, v0_min + frac * (v0_max - v0_min)))
    while len(starts) < count:
        direction = rng.normal(size=4)
        target = rng.uniform(v0_min, v0_max)
        starts.append(scale_to_v0(ctx, direction, target))
    return starts


# ---- suites -------------------------------------------------------------------


def suite_saturation(cfg: RunConfig) -> SuiteResult:
    from .saturation import arctan_saturation, standard_saturation, tanh_saturation

    res = SuiteResult("saturation", passed=True)
    cases = {
        "standard": standard_saturation(),
        "tanh": tanh_saturation(),
        "arctan_normalized": arctan_saturation().normalized(),
    }
    for name, sat in cases.items():
        report = validate_saturation(sat)
        res.records.append({"check": f"axioms[{name}]", **report.to_dict()})
        res.passed &= report.passed

        ms = ModifiedSaturation(sat)
        p0_err = abs(ms.prime(0.0) - 0.5 * sat.sigma_prime0)
        grid = np.logspace(-2, 2, 9)
        agree = max(
            max(abs(ms.prime(x) - ms.prime_alt(x)) for x in grid),
            max(abs(ms.prime(-x) - ms.prime_alt(-x)) for x in grid),
        )
        sinf = ms.measured_sinf()
        bound = check_scaling_bound(ms, np.logspace(-2, 2, 13),
                                    np.array([1.0, 2.0, 4.0, 8.0, 16.0]))
        ok = p0_err <= 1e-8 and agree <= 1e-8 and bound.passed
        res.records.append({
            "check": f"averaged[{name}]",
            "prime0_error": p0_err,
            "formula_agreement": agree,
            "measured_sinf": sinf,
            "scaling_inf_ratio": bound.inf_ratio,
            "passed": ok,
        })
        res.constants[f"measured_sinf[{name}]"] = sinf
        res.constants[f"c2[{name}]"] = bound.inf_ratio
        res.passed &= ok
    return res


def suite_averaging(cfg: RunConfig, sat, modsat) -> SuiteResult:
    av = cfg.verify.averaging
    angles = 2.0 * math.pi * np.arange(av.n_angles) / av.n_angles
    pts = np.array([[r * math.cos(a), r * math.sin(a)]
                    for r in av.radii for a in angles])
    study = convergence_study(sat, modsat, pts, np.array(av.eps_seq),
                              av.window[0], av.window[1], threshold=av.threshold)
    res = SuiteResult("averaging", passed=study.passed)
    res.records.append({"check": "convergence_study", **study.to_dict()})
    res.constants["slope"] = study.slope
    res.constants["max_error_smallest_eps"] = study.max_error_smallest_eps
    return res


def suite_lyapunov_t0(cfg: RunConfig, modsat) -> SuiteResult:
    ctx = LyapunovContext(modsat)
    rng = np.random.default_rng([cfg.seed, 2])
    spec = SystemSpec.t0(modsat)
    res = SuiteResult("lyapunov-T0", passed=True)
    final_norms = []
    for radius in cfg.verify.radii:
        for i in range(max(1, cfg.verify.n_starts // len(cfg.verify.radii))):
            x0 = sphere_sample(rng, radius, 4)
            traj = integrate(spec, x0, (0.0, cfg.verify.t0_time),
                             StepControl.fixed(5e-3), sample_dt=0.1)
            vals = v0_batch(ctx, traj.states)
            norms = np.linalg.norm(traj.states, axis=1)
            active = norms[:-1] > 1e-8
            decreasing = bool(np.all(np.diff(vals)[active] < 0.0))
            dots = v0_dot_t0_batch(ctx, traj.states)
            strict = bool(np.all(dots[norms > 1e-8] < 0.0))
            final_norms.append(float(norms[-1]))
            ok = decreasing and strict
            res.records.append({
                "check": f"t0_decrease[r={radius};{i}]",
                "v0_monotone": decreasing,
                "v0_dot_negative": strict,
                "final_norm": float(norms[-1]),
                "passed": ok,
            })
            res.passed &= ok
    res.constants["max_final_norm"] = max(final_norms)
    return res


def suite_window_decrease(cfg: RunConfig, modsat) -> SuiteResult:
    ctx = LyapunovContext(modsat)
    rng = np.random.default_rng([cfg.seed, 3])
    res = SuiteResult("window-decrease", passed=True)
    rates = []
    for eps in cfg.verify.eps_list:
        starts = lyapunov_starts(ctx, rng, cfg.verify.n_starts,
                                 cfg.verify.R, 4.0 * cfg.verify.R)
        for i, start in enumerate(starts):
            rep = window_decrease_check(ctx, eps, start[:2], start[2:],
                                        rho=cfg.verify.rho, R=cfg.verify.R)
            rates.append(rep.rate)
            res.records.append({"check": f"window[eps={eps};{i}]", **rep.to_dict()})
            res.passed &= rep.passed
    res.constants["min_rate"] = min(rates)
    return res


def suite_capture(cfg: RunConfig, modsat) -> SuiteResult:
    ctx = LyapunovContext(modsat)
    rng = np.random.default_rng([cfg.seed, 4])
    res = SuiteResult("capture", passed=True)
    times = []
    for eps in cfg.verify.eps_list:
        starts = lyapunov_starts(ctx, rng, max(2, cfg.verify.n_starts // 2),
                                 2.0 * cfg.verify.R, 10.0 * cfg.verify.R)
        for i, start in enumerate(starts):
            rep = capture_check(ctx, eps, start[:2], start[2:], R=cfg.verify.R,
                                horizon=cfg.verify.horizon,
                                t_max=cfg.verify.capture_t_max)
            if rep.captured:
                times.append(rep.capture_time)
            res.records.append({"check": f"capture[eps={eps};{i}]", **rep.to_dict()})
            res.passed &= rep.passed
    res.constants["max_capture_time"] = max(times) if times else math.nan
    return res


def suite_l2(cfg: RunConfig, modsat) -> SuiteResult:
    ctx = LyapunovContext(modsat)
    rng = np.random.default_rng([cfg.seed, 5])
    res = SuiteResult("l2", passed=True)
    ratios = []
    for eps in cfg.verify.eps_list:
        start = scale_to_v0(ctx, rng.normal(size=4), 1.8 * cfg.verify.R)
        cap = capture_check(ctx, eps, start[:2], start[2:], R=cfg.verify.R,
                            horizon=cfg.verify.horizon,
                            t_max=cfg.verify.capture_t_max)
        if not cap.captured:
            res.records.append({"check": f"l2[eps={eps}]", "passed": False,
                                "reason": "no capture"})
            res.passed = False
            continue
        t_window = math.floor(1.0 / eps) * eps  # T/eps integer, T in [1/2, 2]
        # run far past capture: the drained set empties slowly at first, so
        # the tail ladder needs wide spacing to show a clean decrease
        horizon_end = cap.capture_time + 110.0
        traj = teps_trajectory(ctx, eps, start[:2], start[2:],
                               (0.0, horizon_end), sample_dt=eps / 80.0)
        for j, offset in enumerate((2.0, 10.0, 20.0)):
            t2 = _align(cap.capture_time + offset, eps / 80.0)
            rep = l2_estimate_check(ctx, eps, traj, t2, t_window, R=cfg.verify.R,
                                    rho=cfg.verify.rho)
            ratios.append(rep.ratio)
            res.records.append({"check": f"l2[eps={eps};{j}]", **rep.to_dict()})
            res.passed &= rep.passed
        tail = barbalat_tail_check(
            traj, eps, cap.capture_time + np.array([5.0, 35.0, 65.0, 95.0]))
        res.records.append({"check": f"tail[eps={eps}]", "passed": tail.decreasing,
                            **tail.to_dict()})
        res.passed &= tail.decreasing
    finite = [r for r in ratios if math.isfinite(r)]
    res.constants["min_ratio"] = min(finite) if finite else math.nan
    return res


def _align(t: float, dt: float) -> float:
    return round(t / dt) * dt


def suite_hurwitz(cfg: RunConfig, modsat) -> SuiteResult:
    res = SuiteResult("hurwitz", passed=True)
    for eps in cfg.verify.hurwitz_eps:
        absc = spectral_abscissa(a_eps_matrix(eps))
        ok = absc < 0.0
        res.records.append({"check": f"a_eps[{eps}]", "abscissa": absc, "passed": ok})
        res.constants[f"abscissa[eps={eps}]"] = absc
        res.passed &= ok
    block = t0_linearization_block(modsat)
    absc = spectral_abscissa(block)
    s0 = modsat.prime0
    disc = s0 * s0 - 4.0 * s0
    expected = -0.5 * s0 if disc < 0 else 0.5 * (-s0 + math.sqrt(disc))
    ok = abs(absc - expected) <= 1e-10
    res.records.append({"check": "t0_block", "abscissa": absc,
                        "expected": expected, "passed": ok})
    res.constants["t0_block_abscissa"] = absc
    res.passed &= ok
    return res


def suite_equivalence(cfg: RunConfig, sat) -> SuiteResult:
    rng = np.random.default_rng([cfg.seed, 6])
    res = SuiteResult("equivalence", passed=True)

    # trajectory scaling between the unit-rate and eps frames
    gaps = []
    for eps in (0.5, 0.1):
        for i in range(3):
            K = rng.normal(size=4)
            x0 = sphere_sample(rng, 2.0, 4)
            t_final = 5.0
            n_per = 256
            s1 = SystemSpec.s1(K, sat)
            traj1 = integrate(s1, x0, (0.0, t_final / eps),
                              StepControl.fixed(1.0 / n_per),
                              sample_dt=0.01 / eps)
            k_eps = K / np.array([eps ** 2, eps ** 2, eps, eps])
            se = SystemSpec.s_eps(eps, k_eps, sat)
            traj2 = integrate(se, np.diag([eps ** 2, eps ** 2, eps, eps]) @ x0,
                              (0.0, t_final), StepControl.fixed(eps / n_per),
                              sample_dt=0.01)
            scaled = scale_trajectory(eps, traj1)
            m = min(scaled.times.size, traj2.times.size)
            gap = float(np.max(np.linalg.norm(
                scaled.states[:m] - traj2.states[:m], axis=1)))
            gaps.append(gap)
            ok = gap <= 1e-5
            res.records.append({"check": f"scaling[eps={eps};{i}]", "sup_gap": gap,
                                "passed": ok})
            res.passed &= ok
    res.constants["max_scaling_gap"] = max(gaps)

    # rotating-frame pushforward: residual and the drive-projection identity;
    # the difference oracle needs a twice-differentiable loop, so this block
    # always runs on the smooth nonlinearity
    from .saturation import tanh_saturation

    smooth = tanh_saturation()
    eps = 0.05
    gain = feedback_gain(eps)
    se = SystemSpec.s_eps(eps, gain.K_eps, smooth)
    x0 = sphere_sample(rng, 3.0, 4)
    dt = 4e-6
    traj = integrate(se, x0, (0.0, 0.1), StepControl.fixed(dt), sample_dt=dt)
    zy = np.vstack([s_to_t(t, eps, x).as_vector()
                    for t, x in zip(traj.times, traj.states)])
    te = SystemSpec.t_eps(eps, smooth)
    deriv = (zy[2:] - zy[:-2]) / (2.0 * dt)
    fields = rhs_batch(te, traj.times[1:-1], zy[1:-1])
    residual = float(np.max(np.linalg.norm(deriv - fields, axis=1)))
    from .lyapunov import drive_component
    bz = drive_component(traj.times, eps, zy[:, :2])
    ident = float(np.max(np.abs(bz - traj.states @ gain.K_eps)))
    ok = residual <= 1e-6 and ident <= 1e-12
    res.records.append({"check": "pushforward", "residual": residual,
                        "identity_gap": ident, "passed": ok})
    res.constants["pushforward_residual"] = residual
    res.passed &= ok

    # normal form: transformed trajectories satisfy the normalized model
    for i in range(2):
        omega = rng.uniform(1.0, 10.0)
        b = rng.normal(size=4)
        if np.hypot(b[2], b[3]) < 0.3:
            b[2] += 1.0
        u_fn = lambda t: math.sin(1.3 * t)  # noqa: E731
        nf = normal_form(omega, b, sat)
        cdi = SystemSpec.cdi(omega, b, sat, input_fn=u_fn)
        dt_new = 5e-5
        dt_old = dt_new * nf.time_scale
        traj = integrate(cdi, sphere_sample(rng, 1.0, 4), (0.0, 400 * dt_old),
                         StepControl.fixed(dt_old), sample_dt=dt_old)
        new_t, new_x = nf.transform_samples(traj.times, traj.states)
        u_new = nf.transform_input(u_fn)
        cdi1 = SystemSpec.cdi(2.0 * math.pi, np.array([0.0, 0.0, 0.0, 1.0]),
                              nf.sigma_tilde, input_fn=u_new)
        deriv = (new_x[2:] - new_x[:-2]) / (2.0 * dt_new)
        fields = np.vstack([rhs_batch(cdi1, np.array([t]), x[None, :])[0]
                            for t, x in zip(new_t[1:-1], new_x[1:-1])])
        residual = float(np.max(np.linalg.norm(deriv - fields, axis=1)))
        tilde = nf.sigma_tilde
        norm_ok = (abs(tilde.sigma_inf - 1.0) <= 1e-8
                   and abs(tilde.sigma_prime0 - 1.0) <= 1e-8)
        ok = residual <= 1e-6 and norm_ok
        res.records.append({"check": f"normal_form[{i}]", "residual": residual,
                            "normalized": norm_ok, "passed": ok})
        res.passed &= ok
    return res


def _build_common(cfg: RunConfig):
    sat = cfg.sigma.build()
    modsat = ModifiedSaturation(sat)
    return sat, modsat


def _dispatch_suite(name: str, cfg: RunConfig, sat, modsat) -> SuiteResult:
    if name == "saturation":
        return suite_saturation(cfg)
    if name == "averaging":
        return suite_averaging(cfg, sat, modsat)
    if name == "lyapunov-T0":
        return suite_lyapunov_t0(cfg, modsat)
    if name == "window-decrease":
        return suite_window_decrease(cfg, modsat)
    if name == "capture":
        return suite_capture(cfg, modsat)
    if name == "l2":
        return suite_l2(cfg, modsat)
    if name == "hurwitz":
        return suite_hurwitz(cfg, modsat)
    if name == "equivalence":
        return suite_equivalence(cfg, sat)
    raise CdistabError(f"unknown suite {name!r}")


def run_suite(name: str, cfg: RunConfig) -> SuiteResult:
    """Run one named suite (or 'all') and return its aggregated result."""
    t_start = time.perf_counter()
    sat, modsat = _build_common(cfg)
    if name == "all":
        res = SuiteResult("all", passed=True)
        for sub in SUITE_NAMES:
            t_sub = time.perf_counter()
            part = _dispatch_suite(sub, cfg, sat, modsat)
            part.wall_clock = time.perf_counter() - t_sub
            res.passed &= part.passed
            res.records.append(part.to_dict())
            res.constants.update({f"{part.suite}.{k}": v
                                  for k, v in part.constants.items()})
    else:
        res = _dispatch_suite(name, cfg, sat, modsat)
    res.wall_clock = time.perf_counter() - t_start
    return res


# ---- commands -------------------------------------------------------------------


def _report_payload(cfg: RunConfig, body: dict) -> str:
    body = dict(body)
    body["config_hash"] = config_hash(cfg)
    body["version"] = __version__
    body["seed"] = cfg.seed
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _resolve_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir) if cfg.out_dir else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sanitize(obj):
    """Make report structures JSON-clean (inf/nan to strings)."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_simulate(cfg: RunConfig) -> int:
    """Integrate the configured system; write trajectory CSV and summary JSON.

    Exit codes: 0 on success, 3 on divergence (partial output still written).
    """
    sat, modsat = _build_common(cfg)
    sim = cfg.simulate
    spec = sim.system.build(sat, modsat)
    out = _resolve_out(cfg)
    code = 0
    try:
        traj = integrate(spec, np.array(sim.initial_state), (0.0, sim.t_final),
                         sim.control.build(), sim.sample_dt)
    except DivergenceError as exc:
        traj = exc.trajectory
        code = 3
    if sim.diagnostics:
        _attach_diagnostics(spec, traj, modsat)
    traj.to_csv(out / "trajectory.csv")
    summary = {
        "system": sim.system.kind,
        "final_time": float(traj.final_time),
        "final_norm": float(np.linalg.norm(traj.final_state)),
        "samples": int(traj.times.size),
        "diverged": code == 3,
    }
    (out / "summary.json").write_text(_report_payload(cfg, _sanitize(summary)))
    return code


def _attach_diagnostics(spec: SystemSpec, traj: Trajectory, modsat) -> None:
    from .lyapunov import attach_teps_diagnostics, di_value_batch

    ctx = LyapunovContext(modsat)
    kind = spec.kind
    if kind is SystemKind.T_EPS:
        attach_teps_diagnostics(ctx, traj, spec.eps)
    elif kind in (SystemKind.T0, SystemKind.FN):
        traj.diagnostics["v0"] = v0_batch(ctx, traj.states)
        traj.diagnostics["v0_dot"] = v0_dot_t0_batch(ctx, traj.states)
    elif kind is SystemKind.DI:
        traj.diagnostics["v"] = di_value_batch(spec.sat, traj.states)
    elif kind in (SystemKind.S1, SystemKind.S_EPS):
        traj.diagnostics["u"] = traj.states @ spec.K
        traj.diagnostics["norm"] = np.linalg.norm(traj.states, axis=1)


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    """Run a named suite; exit 0 iff it passes. Writes report_<suite>.json."""
    res = run_suite(suite, cfg)
    out = _resolve_out(cfg)
    payload = _report_payload(cfg, _sanitize(res.to_dict()))
    (out / f"report_{suite}.json").write_text(payload)
    print(f"suite {suite}: {'PASS' if res.passed else 'FAIL'} "
          f"({res.wall_clock:.1f}s)", file=sys.stderr)
    return 0 if res.passed else 1


def cmd_sweep(cfg: RunConfig) -> int:
    """Grid of window-decrease runs over (eps, rho, R); reports measured rates.

    The largest eps whose cells all pass is flagged as the empirical
    threshold of the working range.
    """
    sat, modsat = _build_common(cfg)
    ctx = LyapunovContext(modsat)
    sw = cfg.sweep
    cells = []
    eps_all_pass: dict[float, bool] = {}
    for i, eps in enumerate(sw.eps_grid):
        for j, rho in enumerate(sw.rho_grid):
            for k, big_r in enumerate(sw.r_grid):
                rng = np.random.default_rng([cfg.seed, i, j, k])
                starts = lyapunov_starts(ctx, rng, sw.n_starts, big_r, 4.0 * big_r)
                rates = []
                ok = True
                for start in starts:
                    rep = window_decrease_check(ctx, eps, start[:2], start[2:],
                                                rho=rho, R=big_r)
                    rates.append(rep.rate)
                    ok &= rep.passed
                cells.append({
                    "eps": eps, "rho": rho, "R": big_r,
                    "min_rate": min(rates), "passed": ok,
                })
                eps_all_pass[eps] = eps_all_pass.get(eps, True) and ok
    passing = [e for e, good in eps_all_pass.items() if good]
    body = {
        "cells": cells,
        "empirical_eps0": max(passing) if passing else None,
    }
    out = _resolve_out(cfg)
    (out / "sweep.json").write_text(_report_payload(cfg, _sanitize(body)))
    for cell in cells:
        print(f"eps={cell['eps']:<6} rho={cell['rho']:<5} R={cell['R']:<6} "
              f"min_rate={cell['min_rate']:+.4f} "
              f"{'PASS' if cell['passed'] else 'FAIL'}", file=sys.stderr)
    return 0 if all(c["passed"] for c in cells) else 1
