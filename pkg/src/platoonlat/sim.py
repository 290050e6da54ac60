"""Platoon simulation in the shared arc-length coordinate.

Each vehicle is a linear 4-state system ``x = [e_lat, theta_err, e_lat', theta_err']``
driven by a steering feedforward ``w(l)`` and the path curvature.  Vehicles
are integrated one after another; each consumes its predecessor's sealed
grid record.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .control import (
    OUTPUT_LATERAL,
    DelayViolation,
    GainSet,
    LearnedSignal,
    delay_margin,
    lead_learned_signal,
    learned_update,
    output_derivative,
)
from .model import ErrorState, VehicleParams, build_matrices
from .path import DesiredPath

FF_PT = "ff"
LFP_DT = "lfp"
STRATEGIES = (FF_PT, LFP_DT)
BLOWUP_LIMIT = 1e3


class BlowUpError(RuntimeError):
    def __init__(self, vehicle: int, l_d: float, partial=None):
        super().__init__(f"|e_lat| of vehicle {vehicle} exceeded {BLOWUP_LIMIT:g} m at l_d = {l_d:.2f} m")
        self.vehicle = vehicle
        self.l_d = l_d
        self.partial = partial


@dataclass(frozen=True)
class DelaySpec:
    delay: float
    spacing: float


@dataclass(frozen=True)
class Scenario:
    params: VehicleParams
    gains: GainSet
    strategy: str
    n_vehicles: int
    path: DesiredPath
    step: float = 0.01
    initial_states: tuple | None = None
    delay: DelaySpec | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.n_vehicles < 2:
            raise ValueError("a platoon needs at least 2 vehicles")
        if not self.step > 0:
            raise ValueError("step must be positive")
        n = self.path.length / self.step
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"step {self.step} does not divide path length {self.path.length}")
        if self.initial_states is not None and len(self.initial_states) != self.n_vehicles:
            raise ValueError("initial_states needs one entry per vehicle")

    @property
    def n_steps(self) -> int:
        return int(round(self.path.length / self.step))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass
class PlatoonTrajectory:
    grid: np.ndarray
    states: np.ndarray  # (vehicles, samples, 4)
    u: np.ndarray  # (vehicles, samples)
    feedforward: np.ndarray  # (vehicles, samples), steering part not from own feedback
    xy: np.ndarray  # (vehicles, samples, 2)
    learned: list = field(default_factory=list)

    @property
    def n_vehicles(self) -> int:
        return self.states.shape[0]

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def e(self, i: int) -> np.ndarray:
        """Error vector samples of vehicle ``i`` (1-based), shape ``(n, 2)``."""
        return self.states[i - 1, :, :2]

    def e_lat(self, i: int) -> np.ndarray:
        return self.states[i - 1, :, 0]

    def theta_err(self, i: int) -> np.ndarray:
        return self.states[i - 1, :, 1]

    def write_csv(self, path, stride: int = 1) -> None:
        cols = ["l_d_m", "vehicle", "e_lat_m", "theta_err_rad", "e_lat_prime_m_per_m", "theta_err_prime_rad_per_m",
                "u_rad", "X_m", "Y_m"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for v in range(self.n_vehicles):
                for k in range(0, len(self.grid), stride):
                    s = self.states[v, k]
                    w.writerow([f"{self.grid[k]:.6f}", v + 1] + [f"{x:.10g}" for x in s]
                               + [f"{self.u[v, k]:.10g}", f"{self.xy[v, k, 0]:.10g}", f"{self.xy[v, k, 1]:.10g}"])


def closed_loop_system(params: VehicleParams, gains: GainSet):
    """State matrix and input columns of one vehicle under PD feedback.

    Returns ``(A, b_w, b_kappa)`` with ``x' = A x + b_w w + b_kappa kappa``.
    """
    mats = build_matrices(params)
    vx = params.vx
    kp, kd = np.asarray(gains.k_p), np.asarray(gains.k_d)
    minv = 1.0 / (vx * vx * np.diag(mats.M))
    A = np.zeros((4, 4))
    A[0:2, 2:4] = np.eye(2)
    A[2:4, 0:2] = -minv[:, None] * (mats.L + np.outer(mats.B, kp))
    A[2:4, 2:4] = -minv[:, None] * (vx * mats.C + vx * np.outer(mats.B, kd))
    b_w = np.concatenate([[0.0, 0.0], minv * mats.B])
    b_k = np.concatenate([[0.0, 0.0], -minv * mats.F])
    return A, b_w, b_k


def rk4_affine(A: np.ndarray, h: float):
    """Exact affine form of one classical RK4 step for ``x' = A x + f(l)``.

    ``x+ = Phi x + G0 f(l) + Gm f(l + h/2) + G1 f(l + h)``.
    """
    n = A.shape[0]
    I = np.eye(n)
    A2 = A @ A
    A3 = A2 @ A
    phi = I + h * A + h * h / 2 * A2 + h ** 3 / 6 * A3 + h ** 4 / 24 * (A3 @ A)
    g0 = h / 6 * (I + h * A + h * h / 2 * A2 + h ** 3 / 4 * A3)
    gm = h / 6 * (4 * I + 2 * h * A + h * h / 2 * A2)
    g1 = h / 6 * I
    return phi, g0, gm, g1


def midpoints(w: np.ndarray) -> np.ndarray:
    """Cell-midpoint values of a uniformly sampled signal (cubic interpolation)."""
    w = np.asarray(w, dtype=float)
    if len(w) < 4:
        return 0.5 * (w[:-1] + w[1:])
    mid = np.empty(len(w) - 1)
    mid[1:-1] = (-w[:-3] + 9 * w[1:-2] + 9 * w[2:-1] - w[3:]) / 16
    mid[0] = (3 * w[0] + 6 * w[1] - w[2]) / 8
    mid[-1] = (3 * w[-1] + 6 * w[-2] - w[-3]) / 8
    return mid


def half_grid(on_grid: np.ndarray, mid: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(on_grid) - 1)
    out[0::2] = on_grid
    out[1::2] = mid
    return out


def integrate_vehicle(A, b_w, b_k, w_half, kappa_half, x0, h, guard=BLOWUP_LIMIT):
    """Fixed-step RK4 of one vehicle given inputs on the half-step grid."""
    phi, g0, gm, g1 = rk4_affine(A, h)
    f = np.outer(w_half, b_w) + np.outer(kappa_half, b_k)
    g = f[0:-1:2] @ g0.T + f[1::2] @ gm.T + f[2::2] @ g1.T
    return kernels.affine_recursion(
        np.ascontiguousarray(phi), np.ascontiguousarray(g), np.ascontiguousarray(x0, dtype=float), float(guard)
    )


def simulate(scenario: Scenario) -> PlatoonTrajectory:
    p, gains, path, h = scenario.params, scenario.gains, scenario.path, scenario.step
    vx = p.vx
    if scenario.delay is not None:
        dm = delay_margin(scenario.delay.spacing, vx, scenario.delay.delay)
        if not dm.feasible:
            raise DelayViolation(
                f"delay {scenario.delay.delay} s is not below the spatial time gap "
                f"{scenario.delay.spacing / vx:.3f} s (margin {dm.margin:.3f} s)"
            )

    n = scenario.n_steps + 1
    grid = np.arange(n) * h
    kappa = path.curvature(grid)
    kappa_half = path.curvature(np.arange(2 * n - 1) * (h / 2))
    A, b_w, b_k = closed_loop_system(p, gains)
    kp, kd = np.asarray(gains.k_p), np.asarray(gains.k_d)

    m = scenario.n_vehicles
    states = np.zeros((m, n, 4))
    u = np.zeros((m, n))
    ff = np.zeros((m, n))
    learned: list[LearnedSignal] = []
    signal = lead_learned_signal(gains, grid, kappa)
    for i in range(m):
        if scenario.initial_states is None or scenario.initial_states[i] is None:
            x0 = np.zeros(4)
        else:
            x0 = np.asarray(scenario.initial_states[i].as_array(), dtype=float)

        # Split w into the exact curvature feedforward plus a part built from
        # recorded predecessor data, which is interpolated at mid-cells.
        recorded = np.zeros(n)
        if i > 0:
            prev = states[i - 1]
            if scenario.strategy == FF_PT:
                recorded = prev[:, :2] @ kp + vx * prev[:, 2:] @ kd + gains.k_ff * prev[:, 3]
            else:
                y = prev[:, :2] @ gains.c_out.T
                if gains.output == OUTPUT_LATERAL:
                    y = y[:, 0]
                signal = learned_update(gains, signal, y, output_derivative(y, h))
                recorded = signal.u_l - gains.k_ff * kappa
        if scenario.strategy == LFP_DT:
            learned.append(signal)
        w = gains.k_ff * kappa + recorded
        w_half = gains.k_ff * kappa_half + half_grid(recorded, midpoints(recorded))

        x, stop = integrate_vehicle(A, b_w, b_k, w_half, kappa_half, x0, h)
        if stop >= 0:
            states[i] = x
            raise BlowUpError(i + 1, float(grid[stop]), partial=states[: i + 1].copy())
        states[i] = x
        ff[i] = w
        u[i] = -(x[:, :2] @ kp) - vx * (x[:, 2:] @ kd) + w

    return PlatoonTrajectory(grid, states, u, ff, reconstruct_xy_arrays(states, path, grid), learned)


def reconstruct_xy_arrays(states, path: DesiredPath, grid) -> np.ndarray:
    theta = path.heading(grid)
    px = np.interp(grid, path.grid, path.x)
    py = np.interp(grid, path.grid, path.y)
    normal = np.column_stack([-np.sin(theta), np.cos(theta)])
    base = np.column_stack([px, py])
    return base[None, :, :] + states[:, :, 0:1] * normal[None, :, :]


def reconstruct_xy(traj: PlatoonTrajectory, path: DesiredPath) -> np.ndarray:
    """Planar traces: path point plus ``e_lat`` along the unit left normal."""
    return reconstruct_xy_arrays(traj.states, path, traj.grid)


# Sixth-order central first-derivative stencil.
_STENCIL = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_HALF = 3


def residual_series(traj: PlatoonTrajectory, scenario: Scenario) -> np.ndarray:
    """Per-sample max-norm residual of the governing equation, shape ``(vehicles, samples)``.

    ``e''`` comes from finite differences of the recorded ``e'``.  Samples
    whose stencil reaches across a path segment junction (where the
    solution is not smooth enough for the stencil) or past the grid ends are
    NaN.
    """
    mats = build_matrices(scenario.params)
    vx = scenario.params.vx
    h = traj.step
    n = len(traj.grid)
    kappa = scenario.path.curvature(traj.grid)
    valid = np.zeros(n, dtype=bool)
    valid[_HALF:n - _HALF] = True
    for bp in scenario.path.breakpoints[1:-1]:
        k = int(round(bp / h))
        valid[max(k - _HALF, 0):k + _HALF + 1] = False
    out = np.full((traj.n_vehicles, n), np.nan)
    for i in range(traj.n_vehicles):
        e = traj.states[i, :, :2]
        ep = traj.states[i, :, 2:]
        epp = np.full_like(ep, np.nan)
        epp[_HALF:n - _HALF] = sum(
            c * ep[j:n - 2 * _HALF + j] for j, c in enumerate(_STENCIL) if c
        ) / h
        r = (vx * vx * epp * np.diag(mats.M) + vx * ep @ mats.C.T + e @ mats.L.T
             - np.outer(traj.u[i], mats.B) + np.outer(kappa, mats.F))
        out[i, valid] = np.abs(r[valid]).max(axis=1)
    return out


def residual_check(traj: PlatoonTrajectory, scenario: Scenario) -> float:
    return float(np.nanmax(residual_series(traj, scenario)))
