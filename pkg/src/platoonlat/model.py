"""Bicycle-model path-tracking error dynamics in the arc-length domain.

The error vector is ``e = [e_lat, theta_err]``.  Positive ``e_lat`` means the
vehicle sits to the left of the path when facing increasing arc length.
Primes denote derivatives with respect to the desired-path arc length ``l``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

#: Heading errors above this magnitude leave the small-angle regime (diagnostic only).
SMALL_ANGLE_LIMIT = 0.3


class SmallAngleWarning(UserWarning):
    pass


class SingularStiffnessError(ValueError):
    """Raised when a steady state does not exist or is not unique."""


@dataclass(frozen=True)
class VehicleParams:
    """Lateral bicycle-model constants plus the (constant) longitudinal speed.

    Units: mass kg, yaw_inertia kg m^2, cornering stiffness N/rad,
    axle distances m, speed m/s.
    """

    mass: float
    yaw_inertia: float
    cf: float
    cr: float
    a: float
    b: float
    vx: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{f.name} must be positive and finite, got {value!r}")

    def with_speed(self, vx: float) -> "VehicleParams":
        return VehicleParams(self.mass, self.yaw_inertia, self.cf, self.cr, self.a, self.b, vx)


#: Lincoln MKZ identification used throughout the experiments, at 10 m/s.
LINCOLN_MKZ = VehicleParams(
    mass=1896.0,
    yaw_inertia=3803.0,
    cf=400000.0,
    cr=381900.0,
    a=1.2682,
    b=1.5818,
    vx=10.0,
)


@dataclass(frozen=True)
class SystemMatrices:
    M: np.ndarray
    C: np.ndarray
    L: np.ndarray
    B: np.ndarray
    F: np.ndarray
    vx: float


@dataclass(frozen=True)
class ErrorState:
    e_lat: float
    theta_err: float
    e_lat_prime: float = 0.0
    theta_err_prime: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("error state must be finite")
        if abs(self.theta_err) > SMALL_ANGLE_LIMIT:
            warnings.warn(
                f"|theta_err| = {abs(self.theta_err):.3f} rad exceeds the small-angle "
                f"validity range ({SMALL_ANGLE_LIMIT} rad)",
                SmallAngleWarning,
                stacklevel=2,
            )

    @property
    def e(self) -> np.ndarray:
        return np.array([self.e_lat, self.theta_err])

    @property
    def e_prime(self) -> np.ndarray:
        return np.array([self.e_lat_prime, self.theta_err_prime])

    def as_array(self) -> np.ndarray:
        return np.array([self.e_lat, self.theta_err, self.e_lat_prime, self.theta_err_prime])


def build_matrices(params: VehicleParams) -> SystemMatrices:
    """Return the M, C, L, B, F matrices of the error dynamics for ``params``."""
    if not isinstance(params, VehicleParams):
        raise TypeError("params must be a VehicleParams")
    m, iz, cf, cr, a, b, vx = (
        params.mass, params.yaw_inertia, params.cf, params.cr, params.a, params.b, params.vx,
    )
    M = np.diag([m, iz])
    cross = a * cf - b * cr
    C = np.array([[cf + cr, cross], [cross, a * a * cf + b * b * cr]]) / vx
    L = np.array([[0.0, -(cf + cr)], [0.0, -cross]])
    B = np.array([cf, a * cf])
    F = np.array([m * vx * vx + cross, a * a * cf + b * b * cr])
    for arr in (M, C, L, B, F):
        arr.setflags(write=False)
    return SystemMatrices(M=M, C=C, L=L, B=B, F=F, vx=vx)


def error_accel(mats: SystemMatrices, state: ErrorState, u: float, heading_prime: float) -> np.ndarray:
    """Second arc-length derivative of ``(e_lat, theta_err)``.

    Solves ``vx^2 M e'' = B u - F heading_prime - vx C e' - L e``.
    """
    vx = mats.vx
    rhs = mats.B * u - mats.F * heading_prime - vx * mats.C @ state.e_prime - mats.L @ state.e
    return rhs / (vx * vx * np.diag(mats.M))


def closed_loop_stiffness(mats: SystemMatrices, k_p) -> np.ndarray:
    return mats.L + np.outer(mats.B, np.asarray(k_p, dtype=float))


def steady_state_error(mats: SystemMatrices, u: float, heading_prime: float, k_p=None) -> ErrorState:
    """Constant error satisfying ``(L + B K_P) e = B u - F heading_prime``.

    ``u`` is the constant feedforward steering part; the proportional feedback
    ``-K_P e`` is folded into the stiffness.  Without ``k_p`` the open-loop
    stiffness is used, which is always singular in the ``e_lat`` direction.
    """
    stiffness = mats.L if k_p is None else closed_loop_stiffness(mats, k_p)
    rhs = mats.B * u - mats.F * heading_prime
    det = np.linalg.det(stiffness)
    scale = np.abs(stiffness).max()
    if scale == 0 or abs(det) <= 1e-12 * scale * scale:
        raise SingularStiffnessError(
            "stiffness matrix is singular: no unique steady state"
            + (" (open-loop L has a zero first column; pass k_p)" if k_p is None else "")
        )
    e = np.linalg.solve(stiffness, rhs)
    return ErrorState(float(e[0]), float(e[1]), 0.0, 0.0)
