import math

import numpy as np
import pytest

from cdistab import (
    DivergenceError,
    StepControl,
    SystemSpec,
    Trajectory,
    UsageError,
    batch_map,
    integrate,
    ode_residual,
)
from cdistab.geometry import A0


def rotation_rhs(t, y):
    return A0 @ y


def decay_rhs(t, y):
    return -y


def test_rotation_closes_after_one_turn():
    traj = integrate(rotation_rhs, np.array([1.0, 0.0]), (0.0, 2 * math.pi),
                     StepControl.fixed(1e-3), sample_dt=math.pi / 8)
    assert np.max(np.abs(traj.final_state - [1.0, 0.0])) < 1e-10


@pytest.mark.parametrize("mode", ["fixed", "adaptive"])
def test_linear_decay(mode):
    control = (StepControl.fixed(1e-4) if mode == "fixed"
               else StepControl.adaptive(rtol=1e-10, atol=1e-12, h_max=0.1))
    traj = integrate(decay_rhs, np.array([1.0]), (0.0, 1.0), control, sample_dt=0.25)
    # fixed RK4 at this step lands well inside 1e-10; the adaptive pair
    # controls error per step, so its global drift is a few orders above rtol
    bound = 1e-10 if mode == "fixed" else 1e-7
    assert abs(traj.final_state[0] - math.exp(-1.0)) < bound


def test_fourth_order_convergence():
    def err_at(h):
        traj = integrate(rotation_rhs, np.array([1.0, 0.0]), (0.0, 2 * math.pi),
                         StepControl.fixed(h), sample_dt=2 * math.pi)
        return float(np.linalg.norm(traj.final_state - [1.0, 0.0]))

    ratio = err_at(2 * math.pi / 200) / err_at(2 * math.pi / 400)
    assert 13.0 <= ratio <= 19.0


def test_determinism_bit_identical(std_sat):
    spec = SystemSpec.t_eps(0.05, std_sat)
    x0 = np.array([3.0, -1.0, 0.5, 2.0])
    a = integrate(spec, x0, (0.0, 5.0), StepControl.fixed(1e-3), sample_dt=0.01)
    b = integrate(spec, x0, (0.0, 5.0), StepControl.fixed(1e-3), sample_dt=0.01)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)
    c = integrate(rotation_rhs, np.array([1.0, 0.0]), (0.0, 3.0),
                  StepControl.fixed(1e-3), sample_dt=0.1)
    d = integrate(rotation_rhs, np.array([1.0, 0.0]), (0.0, 3.0),
                  StepControl.fixed(1e-3), sample_dt=0.1)
    assert np.array_equal(c.states, d.states)


def test_period_cap_applies_automatically(std_sat):
    # a coarse requested step must be capped to eps/50 for the rotating drive
    eps = 0.05
    spec = SystemSpec.t_eps(eps, std_sat)
    x0 = np.array([2.0, 0.0, 0.0, 1.0])
    coarse = integrate(spec, x0, (0.0, 1.0), StepControl.fixed(1.0), sample_dt=0.02)
    capped = integrate(spec, x0, (0.0, 1.0), StepControl.fixed(eps / 50.0),
                       sample_dt=0.02)
    assert np.array_equal(coarse.states, capped.states)


def test_rotation_energy_error_per_period():
    # the rotating-frame kinds default to 256 steps per drive period; the
    # pure-rotation subproblem must then hold its energy to 1e-8 per period
    eps = 0.02
    om = 2 * math.pi / eps

    def fast_rotation(t, y):
        return om * (A0 @ y)

    traj = integrate(fast_rotation, np.array([1.0, 0.0]), (0.0, eps),
                     StepControl.fixed(eps / 256.0), sample_dt=eps)
    assert abs(np.linalg.norm(traj.final_state) - 1.0) < 1e-8


def test_adaptive_respects_h_max():
    seen = []

    def spy(t, y):
        seen.append(t)
        return -y

    integrate(spy, np.array([1.0]), (0.0, 1.0),
              StepControl.adaptive(rtol=1e-6, atol=1e-9, h_max=0.01),
              sample_dt=0.5)
    ts = np.sort(np.unique(seen))
    assert np.max(np.diff(ts)) <= 0.01 + 1e-12


def test_divergence_raises_with_partial_trajectory():
    def blowup(t, y):
        return y * y

    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(DivergenceError) as info:
        integrate(blowup, np.array([1.0]), (0.0, 2.0),
                  StepControl.fixed(1e-4), sample_dt=0.05)
    err = info.value
    assert err.last_time <= 1.1
    assert err.trajectory is not None
    assert np.all(np.isfinite(err.trajectory.states))


def test_stop_predicate_at_samples():
    traj = integrate(decay_rhs, np.array([1.0]), (0.0, 10.0),
                     StepControl.fixed(1e-3), sample_dt=0.1,
                     stop=lambda t, y: abs(y[0]) < 0.5)
    assert abs(traj.final_state[0]) < 0.5
    assert abs(traj.states[-2, 0]) >= 0.5
    assert traj.final_time < 10.0


def test_sample_schedule_includes_endpoint():
    traj = integrate(decay_rhs, np.array([1.0]), (0.0, 1.05),
                     StepControl.fixed(1e-3), sample_dt=0.25)
    assert np.allclose(traj.times[:5], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
    assert abs(traj.final_time - 1.05) < 1e-12


def test_residual_orders_and_fault_detection(std_ms):
    spec = SystemSpec.t0(std_ms)
    x0 = np.array([2.0, 1.0, -0.5, 0.3])
    traj = integrate(spec, x0, (0.0, 1.0), StepControl.fixed(1e-3), sample_dt=1e-2)
    base = ode_residual(spec, traj)
    assert base < 1e-3

    corrupted = Trajectory(traj.times.copy(), traj.states.copy())
    corrupted.states[len(corrupted.times) // 2] += 0.05
    assert ode_residual(spec, corrupted) > 50.0 * base


def test_residual_requires_enough_uniform_samples():
    with pytest.raises(UsageError):
        ode_residual(decay_rhs, Trajectory(np.array([0.0, 1.0]), np.zeros((2, 1))))
    bad_times = Trajectory(np.array([0.0, 0.1, 0.35]), np.zeros((3, 1)))
    with pytest.raises(UsageError):
        ode_residual(decay_rhs, bad_times)


def test_exact_rotation_samples_residual_scales_quadratically():
    for dt, bound in ((1e-2, 2e-4), (1e-3, 2e-6)):
        ts = np.arange(0.0, 1.0 + dt / 2, dt)
        states = np.column_stack([np.cos(ts), np.sin(ts)])
        res = ode_residual(rotation_rhs, Trajectory(ts, states))
        assert res < bound


def test_batch_map_preserves_order():
    items = list(range(20))
    assert batch_map(lambda x: x * x, items, workers=4) == [x * x for x in items]
    assert batch_map(lambda x: x + 1, items, workers=1) == [x + 1 for x in items]


def test_csv_export_roundtrip(tmp_path, std_sat):
    spec = SystemSpec.t_eps(0.1, std_sat)
    traj = integrate(spec, np.array([1.0, 2.0, 3.0, 4.0]), (0.0, 0.5),
                     StepControl.fixed(1e-3), sample_dt=0.1)
    traj.diagnostics["norm"] = np.linalg.norm(traj.states, axis=1)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x0,x1,x2,x3,norm"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], traj.times)
    assert np.array_equal(data[:, 1:5], traj.states)
    assert np.array_equal(data[:, 5], traj.diagnostics["norm"])


def test_control_validation():
    from cdistab import DomainError

    with pytest.raises(DomainError):
        StepControl.fixed(0.0)
    with pytest.raises(DomainError):
        StepControl.adaptive(rtol=-1.0)
