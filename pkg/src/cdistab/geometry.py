"""Planar rotations, structural matrices, and 4-state coordinate bookkeeping.

All functions here are pure and stateless; matrices are small dense numpy
arrays (2x2 or 4x4), which is the maximum size the toolkit ever needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

# 90-degree rotation; applying it to v gives the perpendicular of v.
A0 = np.array([[0.0, -1.0], [1.0, 0.0]])

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


class CoordTag(Enum):
    """Which coordinates a 4-state is expressed in."""

    XY = "xy"  # original (x1, x2) coordinates
    ZY = "zy"  # rotating-frame (z, y) coordinates


@dataclass(frozen=True)
class State4:
    """A point of R^4 split into two planar components plus a coordinate tag."""

    first: np.ndarray
    second: np.ndarray
    tag: CoordTag

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.first, self.second])

    @staticmethod
    def from_vector(vec: np.ndarray, tag: CoordTag) -> "State4":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (4,):
            raise DomainError(f"expected a 4-vector, got shape {vec.shape}")
        return State4(vec[:2].copy(), vec[2:].copy(), tag)


def rotation(theta: float) -> np.ndarray:
    """Rotation of the plane by ``theta`` radians (determinant one)."""
    if not math.isfinite(theta):
        raise DomainError("rotation angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def perp(v: np.ndarray) -> np.ndarray:
    """Counterclockwise perpendicular (-v2, v1)."""
    v = np.asarray(v, dtype=float)
    return np.array([-v[1], v[0]])


def angle_of(v: np.ndarray) -> float:
    """Angle of a nonzero planar vector, reduced to [0, 2*pi)."""
    v = np.asarray(v, dtype=float)
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise DomainError("angle of the zero vector is undefined")
    if not math.isfinite(n):
        raise DomainError("angle of a non-finite vector is undefined")
    theta = math.atan2(v[1], v[0])
    return theta % TWO_PI


def j2_omega(omega: float) -> np.ndarray:
    """Drift matrix of the 4-state model at rotation rate ``omega``.

    For omega == 0 this degenerates to the nilpotent block coupling
    [[0, I], [0, 0]]; for omega > 0 both diagonal blocks carry the planar
    rotation generator scaled by omega.
    """
    if omega < 0 or not math.isfinite(omega):
        raise DomainError("omega must be a finite value >= 0")
    m = np.zeros((4, 4))
    m[:2, 2:] = np.eye(2)
    if omega > 0:
        m[:2, :2] = omega * A0
        m[2:, 2:] = omega * A0
    return m


def d_eps(eps: float) -> np.ndarray:
    """Diagonal scaling diag(eps^2, eps^2, eps, eps)."""
    if not (eps > 0) or not math.isfinite(eps):
        raise DomainError("eps must be a finite value > 0")
    return np.diag([eps * eps, eps * eps, eps, eps])


def rotation_angle_of_time(t: float, eps: float) -> float:
    """Phase -2*pi*t/eps reduced so that trig evaluation stays accurate.

    Reducing t/eps modulo one before scaling keeps the phase error near
    machine epsilon even when t/eps is of order 1e6.
    """
    return -TWO_PI * ((t / eps) % 1.0)


def b_eps(t: float, eps: float) -> np.ndarray:
    """Rotating drive direction: the second basis vector spun at period eps."""
    phi = rotation_angle_of_time(t, eps)
    # R_phi @ e2 with phi = -2*pi*t/eps
    return np.array([-math.sin(phi), math.cos(phi)])
