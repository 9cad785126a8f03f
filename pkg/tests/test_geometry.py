import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdistab import DomainError, State4, angle_of, d_eps, j2_omega, perp, rotation
from cdistab.geometry import A0, CoordTag

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def test_rotation_identity():
    assert np.allclose(rotation(0.0), np.eye(2), atol=0.0)


def test_rotation_quarter_turn_is_perp_generator():
    assert np.allclose(rotation(math.pi / 2) @ E1, E2, atol=1e-15)
    assert np.allclose(rotation(math.pi / 2), A0, atol=1e-15)


@pytest.mark.parametrize("theta", np.linspace(-7.0, 7.0, 29))
def test_rotation_group_inverse(theta):
    assert np.max(np.abs(rotation(theta) @ rotation(-theta) - np.eye(2))) < 1e-14


@pytest.mark.parametrize("theta", np.linspace(0.0, 2 * math.pi, 17))
def test_rotation_orthogonal_unit_determinant(theta):
    r = rotation(theta)
    assert np.max(np.abs(r.T @ r - np.eye(2))) < 1e-14
    assert abs(np.linalg.det(r) - 1.0) < 1e-14


def test_rotation_rejects_nonfinite():
    with pytest.raises(DomainError):
        rotation(math.inf)


def test_perp_examples():
    assert np.allclose(perp(E1), E2)
    assert np.allclose(perp(E2), -E1)
    assert np.allclose(perp(np.array([3.0, 4.0])), np.array([-4.0, 3.0]))


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_perp_is_orthogonal_and_involutive_up_to_sign(x, y):
    v = np.array([x, y])
    # BLAS may fuse one multiply-add, leaving a one-ulp residue
    assert abs(float(perp(v) @ v)) <= 4e-16 * (1.0 + x * x + y * y)
    assert np.allclose(perp(perp(v)), -v)


def test_angle_of_examples():
    assert angle_of(E1) == 0.0
    assert abs(angle_of(-E1) - math.pi) < 1e-15
    assert abs(angle_of(np.array([1.0, 1.0])) - math.pi / 4) < 1e-15


@pytest.mark.parametrize("theta", np.linspace(0.0, 2 * math.pi, 33)[:-1])
def test_angle_of_rotated_basis(theta):
    got = angle_of(rotation(theta) @ E1)
    diff = (got - theta) % (2 * math.pi)
    assert min(diff, 2 * math.pi - diff) < 1e-12


def test_angle_of_zero_vector_rejected():
    with pytest.raises(DomainError):
        angle_of(np.zeros(2))


def test_j2_zero_is_nilpotent_coupling_block():
    m = j2_omega(0.0)
    expected = np.zeros((4, 4))
    expected[:2, 2:] = np.eye(2)
    assert np.array_equal(m, expected)


def test_j2_block_assembly():
    m = j2_omega(2 * math.pi)
    assert np.allclose(m[:2, :2], 2 * math.pi * A0)
    assert np.allclose(m[2:, 2:], 2 * math.pi * A0)
    assert np.allclose(m[:2, 2:], np.eye(2))
    assert np.allclose(m[2:, :2], 0.0)


def test_j2_unit_rate_spectrum_defective():
    # eigenvalues +-1j, each with algebraic multiplicity 2 but only one
    # eigenvector: rank(J - i I) must be 3
    m = j2_omega(1.0)
    eig = np.sort_complex(np.linalg.eigvals(m))
    assert np.allclose(sorted(eig.imag), [-1, -1, 1, 1], atol=1e-12)
    assert np.allclose(eig.real, 0.0, atol=1e-12)
    rank = np.linalg.matrix_rank(m - 1j * np.eye(4), tol=1e-8)
    assert rank == 3


def test_j2_rejects_negative_rate():
    with pytest.raises(DomainError):
        j2_omega(-1.0)


def test_j2_commutes_with_block_rotation_generator():
    blk = np.kron(np.eye(2), A0)
    for om in (0.0, 0.5, 1.0, 7.25):
        m = j2_omega(om)
        assert np.max(np.abs(m @ blk - blk @ m)) < 1e-14


def test_d_eps_examples():
    assert np.array_equal(d_eps(1.0), np.eye(4))
    assert np.allclose(np.diag(d_eps(0.1)), [0.01, 0.01, 0.1, 0.1])
    assert np.max(np.abs(d_eps(0.37) @ d_eps(1 / 0.37) - np.eye(4))) < 1e-14


def test_d_eps_rejects_nonpositive():
    with pytest.raises(DomainError):
        d_eps(0.0)
    with pytest.raises(DomainError):
        d_eps(-2.0)


def test_state4_vector_roundtrip():
    s = State4.from_vector(np.array([1.0, 2.0, 3.0, 4.0]), CoordTag.ZY)
    assert np.array_equal(s.first, [1.0, 2.0])
    assert np.array_equal(s.second, [3.0, 4.0])
    assert np.array_equal(s.as_vector(), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(DomainError):
        State4.from_vector(np.zeros(3), CoordTag.XY)
