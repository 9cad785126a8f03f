"""Right-hand sides, coordinate transforms, and the feedback construction.

The model family: a 4-state oscillatory chain driven through a saturated
scalar input (kinds CDI, S1, S_EPS), its rotating-frame form (T_EPS), the
autonomous averaged limit (T0) and its 2n-state generalization (FN), and the
classic planar saturated chain (DI).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import DomainError, NotControllableError, UsageError
from .geometry import (
    CoordTag,
    State4,
    TWO_PI,
    angle_of,
    b_eps,
    d_eps,
    j2_omega,
    rotation,
    rotation_angle_of_time,
)
from .modified import ModifiedSaturation
from .saturation import SaturationFn


class SystemKind(Enum):
    CDI = "cdi"
    S1 = "s1"
    S_EPS = "s_eps"
    T_EPS = "t_eps"
    T0 = "t0"
    DI = "di"
    FN = "fn"


_TAG_OF_KIND = {
    SystemKind.CDI: CoordTag.XY,
    SystemKind.S1: CoordTag.XY,
    SystemKind.S_EPS: CoordTag.XY,
    SystemKind.T_EPS: CoordTag.ZY,
    SystemKind.T0: CoordTag.ZY,
}

_KERNEL_CODE = {
    SystemKind.T_EPS: _kernels.KIND_T_EPS,
    SystemKind.T0: _kernels.KIND_T0,
    SystemKind.S1: _kernels.KIND_S1,
    SystemKind.S_EPS: _kernels.KIND_S_EPS,
    SystemKind.DI: _kernels.KIND_DI,
    SystemKind.FN: _kernels.KIND_FN,
}

_EMPTY = np.zeros(2)


@dataclass(frozen=True)
class SystemSpec:
    """One concrete dynamical system plus its parameters and nonlinearity."""

    kind: SystemKind
    sat: Optional[SaturationFn] = None
    modsat: Optional[ModifiedSaturation] = None
    eps: Optional[float] = None
    omega: Optional[float] = None
    b: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    n: Optional[int] = None
    input_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    # ---- constructors ------------------------------------------------------

    @staticmethod
    def cdi(omega: float, b: np.ndarray, sat: SaturationFn,
            input_fn: Optional[Callable[[float], float]] = None) -> "SystemSpec":
        if not (omega > 0):
            raise DomainError("cdi requires omega > 0")
        b = np.asarray(b, dtype=float).reshape(4)
        if np.hypot(b[2], b[3]) == 0.0:
            raise NotControllableError("the driven block b2 must be nonzero")
        return SystemSpec(SystemKind.CDI, sat=sat, omega=omega, b=b, input_fn=input_fn)

    @staticmethod
    def s1(K: np.ndarray, sat: SaturationFn) -> "SystemSpec":
        return SystemSpec(SystemKind.S1, sat=sat, K=np.asarray(K, dtype=float).reshape(4))

    @staticmethod
    def s_eps(eps: float, K_eps: np.ndarray, sat: SaturationFn) -> "SystemSpec":
        _check_eps(eps)
        return SystemSpec(SystemKind.S_EPS, sat=sat, eps=eps,
                          K=np.asarray(K_eps, dtype=float).reshape(4))

    @staticmethod
    def t_eps(eps: float, sat: SaturationFn) -> "SystemSpec":
        _check_eps(eps)
        return SystemSpec(SystemKind.T_EPS, sat=sat, eps=eps)

    @staticmethod
    def t0(modsat: ModifiedSaturation) -> "SystemSpec":
        return SystemSpec(SystemKind.T0, modsat=modsat)

    @staticmethod
    def di(sat: SaturationFn) -> "SystemSpec":
        return SystemSpec(SystemKind.DI, sat=sat)

    @staticmethod
    def fn(n: int, modsat: ModifiedSaturation) -> "SystemSpec":
        if n < 1:
            raise DomainError("fn requires n >= 1")
        return SystemSpec(SystemKind.FN, modsat=modsat, n=n)

    # ---- shape helpers -----------------------------------------------------

    @property
    def dim(self) -> int:
        if self.kind is SystemKind.DI:
            return 2
        if self.kind is SystemKind.FN:
            return 2 * int(self.n)
        return 4

    @property
    def expected_tag(self) -> Optional[CoordTag]:
        return _TAG_OF_KIND.get(self.kind)

    def state_vector(self, state) -> np.ndarray:
        """Coerce a state (array or tagged State4) to a plain vector."""
        if isinstance(state, State4):
            tag = self.expected_tag
            if tag is not None and state.tag is not tag:
                raise UsageError(
                    f"{self.kind.value} expects {tag.value} coordinates, "
                    f"got {state.tag.value}"
                )
            vec = state.as_vector()
        else:
            vec = np.asarray(state, dtype=float)
        if vec.shape != (self.dim,):
            raise UsageError(f"{self.kind.value} state must have shape ({self.dim},)")
        return vec


def _check_eps(eps: float) -> None:
    if not (eps > 0) or not math.isfinite(eps):
        raise DomainError("eps must be a finite value > 0")


# ---- vector fields ---------------------------------------------------------


def rhs(spec: SystemSpec, t: float, state) -> np.ndarray:
    """Time derivative of ``state`` under ``spec`` at time ``t``."""
    y = spec.state_vector(state)
    kind = spec.kind
    if kind is SystemKind.CDI:
        u = spec.input_fn(t) if spec.input_fn is not None else 0.0
        s = float(spec.sat(u))
        om = spec.omega
        b = spec.b
        return np.array([
            -om * y[1] + y[2] - b[0] * s,
            om * y[0] + y[3] - b[1] * s,
            -om * y[3] - b[2] * s,
            om * y[2] - b[3] * s,
        ])
    if kind in (SystemKind.S1, SystemKind.S_EPS):
        om = TWO_PI if kind is SystemKind.S1 else TWO_PI / spec.eps
        s = float(spec.sat(float(spec.K @ y)))
        return np.array([
            -om * y[1] + y[2],
            om * y[0] + y[3],
            -om * y[3],
            om * y[2] - s,
        ])
    if kind is SystemKind.T_EPS:
        be = b_eps(t, spec.eps)
        s = float(spec.sat(be[0] * y[0] + be[1] * y[1]))
        w = be * s
        return np.array([y[2] - w[0], y[3] - w[1], -w[0], -w[1]])
    if kind in (SystemKind.T0, SystemKind.FN):
        n = y.size // 2
        fz = averaged_field(spec.modsat, y[:n])
        return np.concatenate([y[n:] - fz, -fz])
    # DI
    s = float(spec.sat(y[0]))
    return np.array([y[1] - s, -s])


def rhs_batch(spec: SystemSpec, ts: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Vectorized field evaluation along sampled (t, state) pairs."""
    ts = np.asarray(ts, dtype=float)
    states = np.asarray(states, dtype=float)
    kind = spec.kind
    out = np.empty_like(states)
    if kind is SystemKind.T_EPS:
        phi = TWO_PI * np.mod(ts / spec.eps, 1.0)
        bx, by = np.sin(phi), np.cos(phi)
        s = np.asarray(spec.sat(bx * states[:, 0] + by * states[:, 1]))
        out[:, 0] = states[:, 2] - bx * s
        out[:, 1] = states[:, 3] - by * s
        out[:, 2] = -bx * s
        out[:, 3] = -by * s
        return out
    if kind in (SystemKind.S1, SystemKind.S_EPS):
        om = TWO_PI if kind is SystemKind.S1 else TWO_PI / spec.eps
        s = np.asarray(spec.sat(states @ spec.K))
        out[:, 0] = -om * states[:, 1] + states[:, 2]
        out[:, 1] = om * states[:, 0] + states[:, 3]
        out[:, 2] = -om * states[:, 3]
        out[:, 3] = om * states[:, 2] - s
        return out
    if kind in (SystemKind.T0, SystemKind.FN):
        n = states.shape[1] // 2
        nz = np.linalg.norm(states[:, :n], axis=1)
        scale = np.zeros_like(nz)
        pos = nz > 0
        scale[pos] = np.asarray(spec.modsat.eval_cached(nz[pos])) / nz[pos]
        fz = scale[:, None] * states[:, :n]
        out[:, :n] = states[:, n:] - fz
        out[:, n:] = -fz
        return out
    if kind is SystemKind.DI:
        s = np.asarray(spec.sat(states[:, 0]))
        out[:, 0] = states[:, 1] - s
        out[:, 1] = -s
        return out
    return np.stack([rhs(spec, float(t), row) for t, row in zip(ts, states)])


def kernel_payload(spec: SystemSpec):
    """Pack a spec for the compiled integrator; None when unsupported."""
    code = _KERNEL_CODE.get(spec.kind)
    if code is None:
        return None
    p = np.zeros(5)
    sat_code, k1, k2 = 0, 1.0, 1.0
    tx = tv = td = _EMPTY
    if spec.kind in (SystemKind.T0, SystemKind.FN):
        tx, tv, td = spec.modsat.kernel_tables
    else:
        sat_code = spec.sat.kernel_code
        if sat_code < 0:
            return None
        k1, k2 = spec.sat.k1, spec.sat.k2
    if spec.kind in (SystemKind.T_EPS, SystemKind.S_EPS):
        p[0] = spec.eps
    if spec.kind in (SystemKind.S1, SystemKind.S_EPS):
        p[1:5] = spec.K
    return code, p, sat_code, k1, k2, tx, tv, td


# ---- averaged field ---------------------------------------------------------


def averaged_field(modsat: ModifiedSaturation, z: np.ndarray) -> np.ndarray:
    """Radial field with profile S: magnitude S(|z|) along the direction of z."""
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        return np.zeros_like(z)
    return modsat.eval_cached(nz) / nz * z


def averaged_field_quad(modsat: ModifiedSaturation, z: np.ndarray) -> np.ndarray:
    """Quadrature-grade variant used by the derivative and gap oracles."""
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        return np.zeros_like(z)
    return modsat.eval(nz) / nz * z


def averaged_field_jacobian(modsat: ModifiedSaturation, z: np.ndarray) -> np.ndarray:
    """Derivative matrix of the radial field; symmetric positive definite.

    Continuous at the origin, where it equals S'(0) times the identity.
    """
    z = np.asarray(z, dtype=float)
    nz = float(np.linalg.norm(z))
    dim = z.size
    if nz == 0.0:
        return modsat.prime0 * np.eye(dim)
    proj = np.outer(z, z) / (nz * nz)
    radial = modsat.prime(nz)
    tangential = modsat.eval(nz) / nz
    return radial * proj + tangential * (np.eye(dim) - proj)


def monotonicity_gap(modsat: ModifiedSaturation, z: np.ndarray, y: np.ndarray) -> float:
    """Increment y^T (f(z+y) - f(z)); nonnegative, zero only at y = 0."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(y @ (averaged_field_quad(modsat, z + y) - averaged_field_quad(modsat, z)))


# ---- normal form and feedback -----------------------------------------------


@dataclass(frozen=True)
class NormalFormData:
    """Linear change of variables plus time rescale that normalizes the model.

    ``matrix`` maps original states to normalized states; a trajectory x(t)
    of the original system becomes X(s) = matrix @ x(time_scale * s), driven
    by the rescaled input u(time_scale * s) / k1 through the normalized
    nonlinearity sigma_tilde = sigma(k1 .) / k2.
    """

    matrix: np.ndarray
    inverse: np.ndarray
    time_scale: float  # units of original time per unit of normalized time
    alpha: Optional[float]
    beta: float
    lam1: float
    lam2: float
    k1: float
    k2: float
    u1: Optional[np.ndarray]
    u2: np.ndarray
    sigma_tilde: SaturationFn

    def transform_state(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def transform_samples(self, times: np.ndarray, states: np.ndarray):
        """Map sampled (t, x) pairs of the original flow to normalized ones."""
        new_times = np.asarray(times, dtype=float) / self.time_scale
        new_states = np.asarray(states, dtype=float) @ self.matrix.T
        return new_times, new_states

    def transform_input(self, u_fn: Callable[[float], float]) -> Callable[[float], float]:
        c, k1 = self.time_scale, self.k1
        return lambda s: u_fn(c * s) / k1


def normal_form(omega: float, b: np.ndarray, sigma: SaturationFn) -> NormalFormData:
    """Normalize the 4-state model to unit rotation period and unit drive.

    Requires the driven block of ``b`` to be nonzero. The scalar constants
    are solved so that the transformed system matches the normalized model
    term by term; the result is meant to be checked by the trajectory
    residual test rather than trusted blindly.
    """
    if not (omega > 0) or not math.isfinite(omega):
        raise DomainError("normal form requires omega > 0")
    b = np.asarray(b, dtype=float).reshape(4)
    b1, b2 = b[:2], b[2:]
    if np.linalg.norm(b2) == 0.0:
        raise NotControllableError("the driven block b2 must be nonzero")

    if np.linalg.norm(b1) > 0.0:
        alpha = float(np.linalg.norm(b2) / np.linalg.norm(b1))
        u1 = rotation(angle_of(b2) - angle_of(b1))
        b_prime = alpha * (u1 @ b2)
    else:
        alpha, u1 = None, None
        b_prime = b2

    beta = float(1.0 / np.linalg.norm(b_prime))
    u2 = rotation(math.pi / 2.0 - angle_of(b_prime))

    c = TWO_PI / omega
    k2 = sigma.sigma_inf
    k1 = sigma.sigma_inf / sigma.sigma_prime0
    lam2 = 1.0 / (c * k2)
    lam1 = lam2 / c

    block = beta * u2
    mat = np.zeros((4, 4))
    if u1 is not None:
        au1 = alpha * u1
        mat[:2, :2] = lam1 * block @ au1
        mat[:2, 2:] = -lam1 * block
        mat[2:, 2:] = lam2 * block @ au1
    else:
        mat[:2, :2] = lam1 * block
        mat[2:, 2:] = lam2 * block
    inv = np.linalg.inv(mat)
    if np.max(np.abs(mat @ inv - np.eye(4))) > 1e-12:
        raise DomainError("normal-form matrix is numerically singular")

    return NormalFormData(
        matrix=mat, inverse=inv, time_scale=c, alpha=alpha, beta=beta,
        lam1=lam1, lam2=lam2, k1=k1, k2=k2, u1=u1, u2=u2,
        sigma_tilde=sigma.normalized(),
    )


@dataclass(frozen=True)
class FeedbackGain:
    """Stabilizing gain in both frames; K scales out of K_eps diagonally."""

    K: np.ndarray
    K_eps: np.ndarray
    eps: float


def feedback_gain(eps: float) -> FeedbackGain:
    """The explicit stabilizing gain: K = (0, eps^2, 0, eps)."""
    _check_eps(eps)
    k_eps = np.array([0.0, 1.0, 0.0, 1.0])
    k = np.diag(d_eps(eps)) * k_eps
    return FeedbackGain(K=k, K_eps=k_eps, eps=eps)


# ---- coordinate transforms ---------------------------------------------------


def s_to_t(t: float, eps: float, x) -> State4:
    """Rotating-frame change of variables at time ``t`` (XY to ZY)."""
    _check_eps(eps)
    if isinstance(x, State4):
        if x.tag is not CoordTag.XY:
            raise UsageError("s_to_t expects xy coordinates")
        vec = x.as_vector()
    else:
        vec = np.asarray(x, dtype=float).reshape(4)
    rot = rotation(rotation_angle_of_time(t, eps))
    y1 = rot @ vec[:2]
    y2 = rot @ vec[2:]
    return State4(y1 + y2, y2, CoordTag.ZY)


def t_to_s(t: float, eps: float, zy) -> State4:
    """Inverse of :func:`s_to_t` (ZY to XY)."""
    _check_eps(eps)
    if isinstance(zy, State4):
        if zy.tag is not CoordTag.ZY:
            raise UsageError("t_to_s expects zy coordinates")
        vec = zy.as_vector()
    else:
        vec = np.asarray(zy, dtype=float).reshape(4)
    rot = rotation(-rotation_angle_of_time(t, eps))
    y2 = vec[2:]
    y1 = vec[:2] - y2
    return State4(rot @ y1, rot @ y2, CoordTag.XY)


def scale_trajectory(eps: float, traj, times: Optional[np.ndarray] = None):
    """Map a trajectory of the unit-rate frame to the eps frame.

    Pointwise x_eps(t) = D_eps x(t/eps). With the default target grid
    (eps times the source grid) the mapping is exact sample for sample;
    an explicit ``times`` grid is linearly interpolated and must stay
    within the rescaled source span.
    """
    from .errors import RangeError
    from .integrator import Trajectory

    _check_eps(eps)
    scale = np.diag(d_eps(eps))
    if times is None:
        new_times = eps * traj.times
        new_states = traj.states * scale
    else:
        new_times = np.asarray(times, dtype=float)
        src_t = eps * traj.times
        if new_times.min() < src_t[0] - 1e-12 or new_times.max() > src_t[-1] + 1e-12:
            raise RangeError("requested times fall outside the rescaled source span")
        new_states = np.column_stack([
            np.interp(new_times, src_t, traj.states[:, j] * scale[j])
            for j in range(4)
        ])
    return Trajectory(times=new_times, states=new_states)


# ---- linear endgame ----------------------------------------------------------


def a_eps_matrix(eps: float) -> np.ndarray:
    """Closed-loop drift at rate 2*pi/eps with the unit-slope feedback.

    The loop term is the rank-one product of the input column (0, e2) with
    the gain row (e2, e2); with that term the matrix is Hurwitz for every
    eps, which is what the convergence endgame needs.
    """
    _check_eps(eps)
    b_col = np.array([0.0, 0.0, 0.0, 1.0])
    k_row = np.array([0.0, 1.0, 0.0, 1.0])
    return j2_omega(TWO_PI / eps) - np.outer(b_col, k_row)


def spectral_abscissa(m: np.ndarray) -> float:
    """Largest real part over the eigenvalues of a small dense matrix."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite")
    return float(np.max(np.linalg.eigvals(m).real))


def t0_linearization(modsat: ModifiedSaturation) -> np.ndarray:
    """Linearization of the averaged limit system at the origin (4x4)."""
    s0 = modsat.prime0
    m = np.zeros((4, 4))
    m[:2, :2] = -s0 * np.eye(2)
    m[:2, 2:] = np.eye(2)
    m[2:, :2] = -s0 * np.eye(2)
    return m


def t0_linearization_block(modsat: ModifiedSaturation) -> np.ndarray:
    """The 2x2 block whose Kronecker square with I2 is the full linearization."""
    s0 = modsat.prime0
    return np.array([[-s0, 1.0], [-s0, 0.0]])
