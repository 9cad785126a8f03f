import math

import numpy as np
import pytest

from cdistab import (
    NotControllableError,
    State4,
    UsageError,
    a_eps_matrix,
    averaged_field,
    averaged_field_jacobian,
    feedback_gain,
    monotonicity_gap,
    normal_form,
    rhs,
    s_to_t,
    spectral_abscissa,
    t_to_s,
    t0_linearization,
    t0_linearization_block,
)
from cdistab.geometry import CoordTag, rotation
from cdistab.systems import SystemSpec, kernel_payload, rhs_batch

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


# ---- vector fields -----------------------------------------------------------


def test_t0_equilibrium(std_ms):
    spec = SystemSpec.t0(std_ms)
    assert np.array_equal(rhs(spec, 0.0, np.zeros(4)), np.zeros(4))


def test_t0_pure_z_start(std_ms):
    spec = SystemSpec.t0(std_ms)
    z = 2.0 * E1
    out = rhs(spec, 0.0, np.concatenate([z, np.zeros(2)]))
    fz = std_ms.eval(2.0) * E1
    assert np.allclose(out[:2], -fz, atol=1e-9)
    assert np.allclose(out[2:], -fz, atol=1e-9)


def test_teps_at_drive_aligned_start(std_sat):
    # at t=0 the drive points along e2, so z=e2 gives unit drive projection
    spec = SystemSpec.t_eps(0.37, std_sat)
    out = rhs(spec, 0.0, np.array([0.0, 1.0, 0.0, 0.0]))
    assert np.allclose(out, [0.0, -1.0, 0.0, -1.0], atol=1e-15)


def test_tag_mismatch_rejected(std_sat, std_ms):
    spec = SystemSpec.t_eps(0.1, std_sat)
    bad = State4(E1, E2, CoordTag.XY)
    with pytest.raises(UsageError):
        rhs(spec, 0.0, bad)
    spec2 = SystemSpec.s1(np.zeros(4), std_sat)
    with pytest.raises(UsageError):
        rhs(spec2, 0.0, State4(E1, E2, CoordTag.ZY))


def test_cdi_requires_controllable_drive(std_sat):
    with pytest.raises(NotControllableError):
        SystemSpec.cdi(1.0, np.array([1.0, 0.0, 0.0, 0.0]), std_sat)


def test_rhs_batch_matches_scalar(std_sat, std_ms):
    rng = np.random.default_rng(0)
    specs = [
        SystemSpec.t_eps(0.07, std_sat),
        SystemSpec.s1(rng.normal(size=4), std_sat),
        SystemSpec.s_eps(0.3, rng.normal(size=4), std_sat),
        SystemSpec.t0(std_ms),
        SystemSpec.di(std_sat),
        SystemSpec.fn(3, std_ms),
    ]
    for spec in specs:
        ts = rng.uniform(0.0, 5.0, 6)
        states = rng.normal(size=(6, spec.dim)) * 3.0
        batch = rhs_batch(spec, ts, states)
        for t, s, row in zip(ts, states, batch):
            assert np.allclose(row, rhs(spec, float(t), s), atol=1e-12)


def test_kernel_rhs_matches_python(std_sat, std_ms):
    from cdistab import _kernels

    rng = np.random.default_rng(1)
    specs = [
        SystemSpec.t_eps(0.05, std_sat),
        SystemSpec.s1(rng.normal(size=4), std_sat),
        SystemSpec.s_eps(0.3, rng.normal(size=4), std_sat),
        SystemSpec.t0(std_ms),
        SystemSpec.di(std_sat),
        SystemSpec.fn(2, std_ms),
    ]
    for spec in specs:
        code, p, sat_code, k1, k2, tx, tv, td = kernel_payload(spec)
        for _ in range(4):
            t = float(rng.uniform(0.0, 3.0))
            y = rng.normal(size=spec.dim) * 2.0
            out = np.empty(spec.dim)
            _kernels._rhs(code, t, y, out, p, sat_code, k1, k2, tx, tv, td)
            ref = rhs(spec, t, y)
            assert np.allclose(out, ref, atol=2e-9), spec.kind


def test_fn_two_blocks_matches_t0(std_ms):
    rng = np.random.default_rng(2)
    t0 = SystemSpec.t0(std_ms)
    fn2 = SystemSpec.fn(2, std_ms)
    for _ in range(10):
        s = rng.normal(size=4) * 5.0
        assert np.array_equal(rhs(t0, 0.0, s), rhs(fn2, 0.0, s))


def test_fn_scalar_case_uses_sign(std_ms):
    fn1 = SystemSpec.fn(1, std_ms)
    for z, y in ((2.0, 0.5), (-3.0, 1.0), (0.0, 1.0)):
        out = rhs(fn1, 0.0, np.array([z, y]))
        fz = math.copysign(std_ms.eval_cached(abs(z)), z) if z else 0.0
        assert np.allclose(out, [y - fz, -fz], atol=1e-12)


# ---- averaged field -----------------------------------------------------------


def test_field_zero_and_radial(std_ms):
    assert np.array_equal(averaged_field(std_ms, np.zeros(2)), np.zeros(2))
    r = 3.7
    out = averaged_field(std_ms, r * E1)
    assert np.allclose(out, std_ms.eval(r) * E1, atol=1e-9)


def test_field_rotation_equivariance(std_ms):
    rng = np.random.default_rng(3)
    for _ in range(25):
        z = rng.normal(size=2) * rng.uniform(0.1, 20.0)
        theta = rng.uniform(0.0, 2 * math.pi)
        rot = rotation(theta)
        assert np.allclose(averaged_field(std_ms, rot @ z),
                           rot @ averaged_field(std_ms, z), atol=1e-10)


def test_jacobian_at_origin(tanh_ms):
    assert np.array_equal(averaged_field_jacobian(tanh_ms, np.zeros(2)),
                          tanh_ms.prime0 * np.eye(2))


def test_jacobian_radial_eigenstructure(tanh_ms):
    r = 2.5
    jac = averaged_field_jacobian(tanh_ms, r * E1)
    assert abs(jac[0, 0] - tanh_ms.prime(r)) < 1e-12
    assert abs(jac[1, 1] - tanh_ms.eval(r) / r) < 1e-12
    assert abs(jac[0, 1]) < 1e-15 and abs(jac[1, 0]) < 1e-15


def test_jacobian_matches_finite_differences(tanh_ms):
    rng = np.random.default_rng(4)
    for _ in range(30):
        z = rng.normal(size=2) * rng.uniform(0.05, 20.0)
        jac = averaged_field_jacobian(tanh_ms, z)
        h = 4e-3 * max(1.0, float(np.linalg.norm(z)))
        fd = np.zeros((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1.0
            coarse = (averaged_field(tanh_ms, z + h * e)
                      - averaged_field(tanh_ms, z - h * e)) / (2 * h)
            fine = (averaged_field(tanh_ms, z + 0.5 * h * e)
                    - averaged_field(tanh_ms, z - 0.5 * h * e)) / h
            fd[:, j] = (4.0 * fine - coarse) / 3.0
        assert np.max(np.abs(fd - jac)) <= 1e-6 * max(1.0, np.max(np.abs(jac)))


def test_jacobian_symmetric_positive_definite(std_ms):
    rng = np.random.default_rng(5)
    for _ in range(200):
        z = rng.normal(size=2) * rng.uniform(0.01, 50.0)
        jac = averaged_field_jacobian(std_ms, z)
        assert np.max(np.abs(jac - jac.T)) <= 1e-12
        assert np.min(np.linalg.eigvalsh(jac)) > 0.0


def test_monotonicity_gap_values(std_ms):
    assert monotonicity_gap(std_ms, np.array([2.0, -1.0]), np.zeros(2)) == 0.0
    got = monotonicity_gap(std_ms, np.zeros(2), E1)
    assert abs(got - std_ms.eval(1.0)) < 1e-10


def test_monotonicity_gap_strictly_positive(std_ms):
    rng = np.random.default_rng(6)
    for _ in range(300):
        z = rng.normal(size=2) * rng.uniform(0.0, 20.0)
        y = rng.normal(size=2) * rng.uniform(1e-3, 20.0)
        assert monotonicity_gap(std_ms, z, y) > 0.0


# ---- normal form and gain ------------------------------------------------------


def test_normal_form_identity_case(std_sat):
    nf = normal_form(2 * math.pi, np.array([0.0, 0.0, 0.0, 1.0]), std_sat)
    assert np.allclose(nf.matrix, np.eye(4), atol=1e-14)
    assert abs(nf.time_scale - 1.0) < 1e-15
    assert nf.alpha is None
    assert abs(nf.k1 - 1.0) < 1e-15 and abs(nf.k2 - 1.0) < 1e-15


def test_normal_form_rotates_drive_to_second_axis(std_sat):
    nf = normal_form(2 * math.pi, np.array([0.0, 0.0, 2.0, 0.0]), std_sat)
    assert abs(nf.beta - 0.5) < 1e-15
    assert np.allclose(nf.u2, rotation(math.pi / 2), atol=1e-15)


def test_normal_form_time_rescale(std_sat):
    nf = normal_form(math.pi, np.array([0.0, 0.0, 0.0, 1.0]), std_sat)
    assert abs(nf.time_scale - 2.0) < 1e-15


def test_normal_form_requires_controllability(std_sat):
    with pytest.raises(NotControllableError):
        normal_form(1.0, np.array([1.0, 1.0, 0.0, 0.0]), std_sat)


def test_normal_form_trajectory_residual(arctan_norm_sat):
    from cdistab import StepControl, integrate
    from cdistab.saturation import arctan_saturation

    rng = np.random.default_rng(7)
    sigma = arctan_saturation()  # deliberately unnormalized
    for _ in range(3):
        omega = float(rng.uniform(1.0, 10.0))
        b = rng.normal(size=4)
        if np.hypot(b[2], b[3]) < 0.3:
            b[2] += 1.0
        u_fn = lambda t: math.sin(1.3 * t) + 0.4  # noqa: E731
        nf = normal_form(omega, b, sigma)
        cdi = SystemSpec.cdi(omega, b, sigma, input_fn=u_fn)
        dt_new = 5e-5
        dt_old = dt_new * nf.time_scale
        traj = integrate(cdi, rng.normal(size=4), (0.0, 400 * dt_old),
                         StepControl.fixed(dt_old), sample_dt=dt_old)
        new_t, new_x = nf.transform_samples(traj.times, traj.states)
        u_new = nf.transform_input(u_fn)
        tilde = nf.sigma_tilde
        assert abs(tilde.sigma_inf - 1.0) < 1e-12
        assert abs(tilde.sigma_prime0 - 1.0) < 1e-12
        target = SystemSpec.cdi(2 * math.pi, np.array([0.0, 0.0, 0.0, 1.0]),
                                tilde, input_fn=u_new)
        deriv = (new_x[2:] - new_x[:-2]) / (2 * dt_new)
        fields = np.vstack([rhs(target, float(t), x)
                            for t, x in zip(new_t[1:-1], new_x[1:-1])])
        assert float(np.max(np.linalg.norm(deriv - fields, axis=1))) < 1e-6


def test_feedback_gain_values():
    g = feedback_gain(1.0)
    assert np.array_equal(g.K, [0.0, 1.0, 0.0, 1.0])
    g = feedback_gain(0.1)
    assert np.allclose(g.K, [0.0, 0.01, 0.0, 0.1], atol=0.0)
    # the frame identity holds exactly, entry by entry
    eps = 0.02
    g = feedback_gain(eps)
    scale = np.array([eps ** 2, eps ** 2, eps, eps])
    assert np.array_equal(g.K_eps, g.K / scale)


# ---- coordinate transforms ------------------------------------------------------


def test_s_to_t_at_time_zero():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    zy = s_to_t(0.0, 0.1, x)
    assert np.allclose(zy.first, [4.0, 6.0], atol=0.0)
    assert np.allclose(zy.second, [3.0, 4.0], atol=0.0)
    assert zy.tag is CoordTag.ZY


def test_s_to_t_roundtrip():
    rng = np.random.default_rng(8)
    for _ in range(50):
        x = rng.normal(size=4) * 10.0
        t = float(rng.uniform(0.0, 100.0))
        eps = float(rng.uniform(0.01, 1.0))
        back = t_to_s(t, eps, s_to_t(t, eps, x)).as_vector()
        assert np.max(np.abs(back - x)) < 1e-13 * max(1.0, np.max(np.abs(x)))


def test_drive_projection_equals_gain_projection(std_sat):
    from cdistab.lyapunov import drive_component

    rng = np.random.default_rng(9)
    eps = 0.05
    gain = feedback_gain(eps)
    for _ in range(50):
        x = rng.normal(size=4) * 8.0
        t = float(rng.uniform(0.0, 50.0))
        zy = s_to_t(t, eps, x)
        bz = drive_component(t, eps, zy.first)
        assert abs(bz - float(gain.K_eps @ x)) < 1e-12


def test_scale_trajectory_identity_and_zero(std_sat):
    from cdistab import StepControl, Trajectory, integrate
    from cdistab.systems import scale_trajectory

    times = np.linspace(0.0, 2.0, 21)
    zero = Trajectory(times, np.zeros((21, 4)))
    out = scale_trajectory(0.3, zero)
    assert np.allclose(out.states, 0.0, atol=0.0)

    spec = SystemSpec.s1(np.array([0.0, 1.0, 0.0, 1.0]), std_sat)
    traj = integrate(spec, np.array([1.0, 0.0, 0.5, 0.0]), (0.0, 2.0),
                     StepControl.fixed(1e-3), sample_dt=0.1)
    same = scale_trajectory(1.0, traj)
    assert np.array_equal(same.states, traj.states)
    assert np.array_equal(same.times, traj.times)


def test_scale_trajectory_range_error(std_sat):
    from cdistab import RangeError, Trajectory
    from cdistab.systems import scale_trajectory

    traj = Trajectory(np.linspace(0.0, 1.0, 11), np.zeros((11, 4)))
    with pytest.raises(RangeError):
        scale_trajectory(0.5, traj, times=np.array([0.0, 0.6]))


# ---- linear endgame ---------------------------------------------------------------


def test_a_eps_structure():
    m = a_eps_matrix(1.0)
    om = 2 * math.pi
    expected = np.array([
        [0.0, -om, 1.0, 0.0],
        [om, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, -om],
        [0.0, -1.0, om, -1.0],
    ])
    assert np.allclose(m, expected, atol=0.0)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_a_eps_is_hurwitz(eps):
    assert spectral_abscissa(a_eps_matrix(eps)) < 0.0


def test_spectral_abscissa_examples(std_ms):
    from cdistab.geometry import A0, j2_omega

    assert abs(spectral_abscissa(A0)) < 1e-12
    assert abs(spectral_abscissa(j2_omega(1.0))) < 1e-9
    # roots of l^2 + l/2 + 1/2 have real part -1/4
    block = np.array([[-0.5, 1.0], [-0.5, 0.0]])
    assert abs(spectral_abscissa(block) + 0.25) < 1e-12
    assert np.allclose(t0_linearization_block(std_ms), block, atol=0.0)


def test_t0_linearization_shape(std_ms):
    m = t0_linearization(std_ms)
    s0 = std_ms.prime0
    assert np.array_equal(m[:2, :2], -s0 * np.eye(2))
    assert np.array_equal(m[2:, :2], -s0 * np.eye(2))
    assert np.array_equal(m[:2, 2:], np.eye(2))
    assert np.array_equal(m[2:, 2:], np.zeros((2, 2)))


def test_explicit_gain_stabilizes_unit_frame(std_sat):
    # the headline closed loop at a comfortable drive ratio: a small start
    # decays below 1e-4 well inside a thousand time units
    from cdistab import StepControl, integrate

    eps = 0.05
    gain = feedback_gain(eps)
    spec = SystemSpec.s1(gain.K, std_sat)
    x0 = np.array([1.2, -0.8, 0.9, 0.7])
    traj = integrate(spec, x0, (0.0, 1200.0), StepControl.fixed(1.0 / 256.0),
                     sample_dt=1.0, stop=lambda t, y: np.linalg.norm(y) < 1e-4)
    assert np.linalg.norm(traj.final_state) < 1e-4
    assert traj.final_time < 1200.0
