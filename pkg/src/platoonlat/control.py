"""Steering laws: feedback-feedforward (FF) and learn-from-predecessor (LFP)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import ErrorState, VehicleParams

OUTPUT_LATERAL = "lateral"
OUTPUT_VECTOR = "vector"


@dataclass(frozen=True)
class GainSet:
    """Controller gains.

    ``k_p = [k_elat, k_theta]`` and ``k_d = [k_elat_dot, k_theta_dot]`` act on
    time-domain errors; the arc-length control law scales ``k_d`` by ``vx``.
    ``k_lp``/``k_ld`` are scalars for ``output="lateral"`` and length-2 rows
    for ``output="vector"``.
    """

    k_p: tuple
    k_d: tuple
    k_ff: float
    k_lp: float | tuple = 0.0
    k_ld: float | tuple = 0.0
    output: str = OUTPUT_LATERAL

    def __post_init__(self):
        object.__setattr__(self, "k_p", tuple(float(v) for v in self.k_p))
        object.__setattr__(self, "k_d", tuple(float(v) for v in self.k_d))
        if len(self.k_p) != 2 or len(self.k_d) != 2:
            raise ValueError("k_p and k_d must have two entries")
        if self.output not in (OUTPUT_LATERAL, OUTPUT_VECTOR):
            raise ValueError(f"unknown output selector {self.output!r}")
        width = 1 if self.output == OUTPUT_LATERAL else 2
        for name in ("k_lp", "k_ld"):
            val = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if val.shape != (width,):
                raise ValueError(f"{name} must have {width} entr{'y' if width == 1 else 'ies'} "
                                 f"for output={self.output!r}")
            object.__setattr__(self, name, float(val[0]) if width == 1 else tuple(float(v) for v in val))
        values = [*self.k_p, *self.k_d, self.k_ff, *np.atleast_1d(self.k_lp), *np.atleast_1d(self.k_ld)]
        if not np.all(np.isfinite(values)):
            raise ValueError("gains must be finite")

    @property
    def c_out(self) -> np.ndarray:
        return np.array([[1.0, 0.0]]) if self.output == OUTPUT_LATERAL else np.eye(2)

    @property
    def k_lp_row(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.k_lp, dtype=float))

    @property
    def k_ld_row(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.k_ld, dtype=float))

    def replace(self, **changes) -> "GainSet":
        kw = dict(k_p=self.k_p, k_d=self.k_d, k_ff=self.k_ff, k_lp=self.k_lp, k_ld=self.k_ld,
                  output=self.output)
        kw.update(changes)
        return GainSet(**kw)


def kff_formula(params: VehicleParams, k_theta: float) -> float:
    """Feedforward gain giving zero steady-state lateral error on a circular arc."""
    m, cf, cr, a, b, vx = params.mass, params.cf, params.cr, params.a, params.b, params.vx
    wb = a + b
    return wb + m * vx * vx / wb * (b / cf - a / cr + a / cr * k_theta) - b * k_theta


def reference_gains(params: VehicleParams | None = None, output: str = OUTPUT_LATERAL) -> GainSet:
    """Designed LFP gains of the reference experiment (k_ff rounded as published)."""
    k_lp, k_ld = (-0.04, -0.3) if output == OUTPUT_LATERAL else ((-0.04, 0.0), (-0.3, 0.0))
    return GainSet(k_p=(0.06, 0.96), k_d=(0.0, 0.08), k_ff=1.59, k_lp=k_lp, k_ld=k_ld, output=output)


def feedback_term(gains: GainSet, vx: float, e, e_prime):
    """``-K_P e - vx K_D e'`` for a single state or stacked ``(n, 2)`` arrays."""
    kp = np.asarray(gains.k_p)
    kd = np.asarray(gains.k_d)
    return -(np.asarray(e) @ kp) - vx * (np.asarray(e_prime) @ kd)


def ff_control(gains: GainSet, vx: float, ref_error: ErrorState, ref_heading_prime: float) -> float:
    return float(feedback_term(gains, vx, ref_error.e, ref_error.e_prime) + gains.k_ff * ref_heading_prime)


def ff_reference_error(i: int, des_errors, heading_prime: float):
    """Reference error and reference heading rate of vehicle ``i`` under predecessor tracking.

    ``des_errors`` maps vehicle index (1-based) to its :class:`ErrorState`
    against the desired path at the current arc length.
    """
    if i < 1:
        raise ValueError("vehicle index starts at 1")
    try:
        own = des_errors[i]
    except (KeyError, IndexError):
        raise ValueError(f"no error record for vehicle {i}") from None
    if i == 1:
        return own, heading_prime
    try:
        pred = des_errors[i - 1]
    except (KeyError, IndexError):
        raise ValueError(f"missing predecessor record for vehicle {i}") from None
    ref = ErrorState(*(own.as_array() - pred.as_array()))
    return ref, heading_prime + pred.theta_err_prime


class DelayViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class LearnedSignal:
    """Learned feedforward and the predecessor output it was built from, on a uniform grid."""

    grid: np.ndarray
    u_l: np.ndarray
    y: np.ndarray | None = None
    y_prime: np.ndarray | None = None
    step: float = field(init=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid must be 1-d with at least two samples")
        object.__setattr__(self, "step", float(grid[1] - grid[0]))
        if len(self.u_l) != len(grid):
            raise ValueError("u_l length does not match grid")

    def at(self, l_d: float) -> float:
        if not self.grid[0] - 1e-12 <= l_d <= self.grid[-1] + 1e-12:
            raise DelayViolation(f"learned signal not available at l_d={l_d}")
        return float(np.interp(l_d, self.grid, self.u_l))

    def restrict(self, n: int) -> "LearnedSignal":
        cut = (lambda a: None if a is None else a[:n])
        return LearnedSignal(self.grid[:n], self.u_l[:n], cut(self.y), cut(self.y_prime))

    def write_csv(self, path) -> None:
        y = self.y if self.y is not None else np.full(len(self.grid), np.nan)
        yp = self.y_prime if self.y_prime is not None else np.full(len(self.grid), np.nan)
        y = np.asarray(y).reshape(len(self.grid), -1)
        yp = np.asarray(yp).reshape(len(self.grid), -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            ycols = [f"y{j}" for j in range(y.shape[1])] if y.shape[1] > 1 else ["y"]
            w.writerow(["l_d_m", "u_l_rad"] + [c + "_si" for c in ycols] + [c + "_prime_si" for c in ycols])
            for k in range(len(self.grid)):
                w.writerow([f"{self.grid[k]:.10g}", f"{self.u_l[k]:.10g}"]
                           + [f"{v:.10g}" for v in y[k]] + [f"{v:.10g}" for v in yp[k]])


def lead_learned_signal(gains: GainSet, grid, heading_prime) -> LearnedSignal:
    return LearnedSignal(np.asarray(grid, dtype=float), gains.k_ff * np.asarray(heading_prime, dtype=float))


def output_derivative(y, step: float):
    """Central differences inside, one-sided at the ends."""
    return np.gradient(np.asarray(y, dtype=float), step, axis=0)


def learned_update(gains: GainSet, prev: LearnedSignal, y_prev, y_prev_prime) -> LearnedSignal:
    """``u_l,i = u_l,i-1 + K_LP y_{i-1} + K_LD y'_{i-1}`` pointwise on the grid."""
    y = np.asarray(y_prev, dtype=float)
    yp = np.asarray(y_prev_prime, dtype=float)
    n = len(prev.grid)
    if len(y) != n or len(yp) != n:
        raise ValueError(f"grid mismatch: learned signal has {n} samples, outputs have {len(y)}/{len(yp)}")
    if gains.output == OUTPUT_LATERAL:
        y = y.reshape(n)
        yp = yp.reshape(n)
        u = prev.u_l + gains.k_lp * y + gains.k_ld * yp
    else:
        u = prev.u_l + y.reshape(n, 2) @ gains.k_lp_row + yp.reshape(n, 2) @ gains.k_ld_row
    return LearnedSignal(prev.grid, u, y, yp)


def lfp_control(gains: GainSet, vx: float, own_error: ErrorState, learned: LearnedSignal, l_d: float) -> float:
    return float(feedback_term(gains, vx, own_error.e, own_error.e_prime) + learned.at(l_d))


@dataclass(frozen=True)
class DelayMargin:
    feasible: bool
    margin: float


def delay_margin(spacing: float, follower_speed: float, delay: float) -> DelayMargin:
    """Compare a V2V/sensing delay with the spatially induced time gap ``spacing / speed``.

    A zero margin counts as infeasible.
    """
    if spacing <= 0 or follower_speed <= 0:
        raise ValueError("spacing and speed must be positive")
    margin = spacing / follower_speed - delay
    return DelayMargin(margin > 0, margin)
