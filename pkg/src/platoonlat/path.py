"""Arc-length parameterized desired paths.

A path is a chain of segments (straights, circular arcs, sinusoidal
lane-change pulses).  Curvature and heading are known in closed form per
segment; planar coordinates are integrated on a dense grid.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

log = logging.getLogger(__name__)

GRID_STEP = 0.01
#: Tightest lane-change curvature accepted (1/m).
MAX_PULSE_CURVATURE = 1.0 / 5.0
#: Tightest radius reported for the reference track; tighter pulses are logged.
REFERENCE_MIN_RADIUS = 7.4


@dataclass(frozen=True)
class Straight:
    length: float

    def curvature(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))

    def heading(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))


@dataclass(frozen=True)
class Arc:
    curvature_value: float
    length: float

    def curvature(self, xi):
        return np.full_like(np.asarray(xi, dtype=float), self.curvature_value)

    def heading(self, xi):
        return self.curvature_value * np.asarray(xi, dtype=float)


@dataclass(frozen=True)
class SinePulse:
    """One lane change: ``kappa(xi) = peak * sin(2 pi xi / length)``.

    The heading rises and returns to its entry value, so the net heading
    change over the pulse is zero.
    """

    peak: float
    length: float

    def curvature(self, xi):
        return self.peak * np.sin(2.0 * np.pi * np.asarray(xi, dtype=float) / self.length)

    def heading(self, xi):
        w = 2.0 * np.pi / self.length
        return self.peak / w * (1.0 - np.cos(w * np.asarray(xi, dtype=float)))


Segment = Straight | Arc | SinePulse


def pulse_offset(peak: float, length: float) -> float:
    """Lateral displacement produced by a sine pulse entered with zero heading."""
    pulse = SinePulse(peak, length)
    value, _ = integrate.quad(lambda xi: math.sin(float(pulse.heading(xi))), 0.0, length,
                              epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def solve_pulse_peak(offset: float, length: float) -> float:
    """Peak curvature of a sine pulse that shifts the path sideways by ``offset``."""
    if offset == 0.0:
        return 0.0
    # Peak heading peak*length/pi must stay below pi/2 for the offset to be monotone in peak.
    upper = math.pi ** 2 / (2.0 * length)
    reachable = pulse_offset(upper, length)
    if abs(offset) >= reachable:
        raise ValueError(
            f"lane offset {offset} m cannot be reached within {length} m "
            f"(max {reachable:.3f} m)"
        )
    peak = optimize.brentq(lambda k: pulse_offset(k, length) - abs(offset), 0.0, upper,
                           xtol=1e-15, rtol=1e-15, maxiter=200)
    return math.copysign(peak, offset)


@dataclass
class DesiredPath:
    """Desired path sampled on a dense arc-length grid.

    ``grid``, ``theta``, ``kappa``, ``x``, ``y`` are the dense samples;
    :meth:`curvature` evaluates the exact piecewise curvature anywhere.
    """

    segments: tuple
    theta0: float = 0.0
    x0: float = 0.0
    y0: float = 0.0
    step: float = GRID_STEP
    grid: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    kappa: np.ndarray = field(init=False, repr=False)
    x: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("path needs at least one segment")
        for seg in self.segments:
            if not seg.length > 0:
                raise ValueError(f"segment length must be positive: {seg}")
        self.segments = tuple(self.segments)
        lengths = np.array([seg.length for seg in self.segments])
        self._starts = np.concatenate([[0.0], np.cumsum(lengths)])
        # Heading at each segment entry, accumulated in closed form.
        entry = [self.theta0]
        for seg in self.segments:
            entry.append(entry[-1] + float(seg.heading(seg.length)))
        self._entry_heading = np.array(entry)

        n = int(round(self.length / self.step))
        if not math.isclose(n * self.step, self.length, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"path length {self.length} is not a multiple of step {self.step}")
        self.grid = np.arange(n + 1) * self.step
        self.theta = self.heading(self.grid)
        self.kappa = self.curvature(self.grid)
        # Simpson rule per grid cell with exact mid-cell headings.
        mid = self.heading(self.grid[:-1] + 0.5 * self.step)
        dx = self.step / 6.0 * (np.cos(self.theta[:-1]) + 4 * np.cos(mid) + np.cos(self.theta[1:]))
        dy = self.step / 6.0 * (np.sin(self.theta[:-1]) + 4 * np.sin(mid) + np.sin(self.theta[1:]))
        self.x = self.x0 + np.concatenate([[0.0], np.cumsum(dx)])
        self.y = self.y0 + np.concatenate([[0.0], np.cumsum(dy)])
        for arr in (self.grid, self.theta, self.kappa, self.x, self.y):
            arr.setflags(write=False)

    @property
    def length(self) -> float:
        return float(self._starts[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment junctions, where curvature derivatives may jump."""
        return self._starts.copy()

    def _locate(self, l):
        l = np.asarray(l, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, l, side="right") - 1, 0, len(self.segments) - 1)
        return l, idx, l - self._starts[idx]

    def curvature(self, l):
        l, idx, xi = self._locate(l)
        out = np.zeros_like(l)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = seg.curvature(xi[mask])
        return out

    def heading(self, l):
        l, idx, xi = self._locate(l)
        out = np.zeros_like(l)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if np.any(mask):
                out[mask] = self._entry_heading[k] + seg.heading(xi[mask])
        return out

    def query(self, l_d: float):
        """Return ``(theta, kappa, X, Y)`` at arc length ``l_d`` by grid interpolation."""
        if not 0.0 <= l_d <= self.length + 1e-12:
            raise ValueError(f"arc length {l_d} outside [0, {self.length}]")
        vals = [np.interp(l_d, self.grid, arr) for arr in (self.theta, self.kappa, self.x, self.y)]
        return tuple(float(v) for v in vals)

    def normals(self) -> np.ndarray:
        """Unit left normals on the dense grid, shape ``(n, 2)``."""
        return np.column_stack([-np.sin(self.theta), np.cos(self.theta)])

    def radius_range(self) -> tuple[float, float]:
        """Min and max ``|1/kappa|`` over grid samples with nonzero curvature."""
        k = np.abs(self.kappa)
        k = k[k > 0]
        if k.size == 0:
            return math.inf, math.inf
        return float(1.0 / k.max()), float(1.0 / k.min())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["l_d_m", "X_m", "Y_m", "theta_rad", "kappa_per_m"])
            for row in zip(self.grid, self.x, self.y, self.theta, self.kappa):
                w.writerow([f"{v:.10g}" for v in row])


def make_constant_curvature(kappa0: float, length: float, step: float = GRID_STEP) -> DesiredPath:
    if not length > 0:
        raise ValueError("length must be positive")
    seg = Straight(length) if kappa0 == 0 else Arc(kappa0, length)
    return DesiredPath((seg,), step=step)


def make_lane_change_track(
    n_changes: int = 4,
    lane_offset: float = 3.5,
    change_length: float | Sequence[float] = 50.0,
    straight_length: float = 200.0,
    step: float = GRID_STEP,
) -> DesiredPath:
    """Straight, then ``n_changes`` alternating lane changes each followed by a straight.

    ``change_length`` may be one length or one per lane change.  Lane changes
    alternate left/right so an even count returns to the starting lane.
    """
    if n_changes < 1:
        raise ValueError("n_changes must be >= 1")
    if np.ndim(change_length) == 0:
        lengths = [float(change_length)] * n_changes
    else:
        lengths = [float(c) for c in change_length]
        if len(lengths) != n_changes:
            raise ValueError(f"expected {n_changes} change lengths, got {len(lengths)}")
    if straight_length <= 0 or any(c <= 0 for c in lengths):
        raise ValueError("lengths must be positive")

    segments: list = [Straight(straight_length)]
    for k, lc in enumerate(lengths):
        offset = lane_offset if k % 2 == 0 else -lane_offset
        peak = solve_pulse_peak(offset, lc)
        if abs(peak) > MAX_PULSE_CURVATURE:
            raise ValueError(
                f"lane change {k + 1}: peak curvature {abs(peak):.4f} 1/m exceeds "
                f"{MAX_PULSE_CURVATURE} 1/m (offset {lane_offset} m over {lc} m)"
            )
        if peak != 0 and 1.0 / abs(peak) < REFERENCE_MIN_RADIUS:
            log.info("lane change %d reaches radius %.2f m", k + 1, 1.0 / abs(peak))
        segments.append(SinePulse(peak, lc) if peak != 0 else Straight(lc))
        segments.append(Straight(straight_length))
    return DesiredPath(tuple(segments), step=step)


#: Lane-change lengths of the reference track; the first reaches ~7.4 m radius.
DEFAULT_CHANGE_LENGTHS = (13.0, 20.0, 35.0, 50.0)


def default_track(step: float = GRID_STEP) -> DesiredPath:
    return make_lane_change_track(4, 3.5, DEFAULT_CHANGE_LENGTHS, 100.0, step=step)


def nearest_point(polyline, query_xy):
    """Closest point of a recorded polyline to ``query_xy``.

    Returns ``(arc_position, signed_offset, heading)``; the offset is positive
    when the query lies to the left of the polyline direction.
    """
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("polyline must be an (n >= 2, 2) array")
    d = np.diff(pts, axis=0)
    seg_len = np.hypot(d[:, 0], d[:, 1])
    if seg_len.sum() == 0:
        raise ValueError("degenerate polyline: zero length")
    q = np.asarray(query_xy, dtype=float)
    valid = seg_len > 0
    rel = q - pts[:-1]
    t = np.zeros(len(d))
    t[valid] = np.clip(np.einsum("ij,ij->i", rel[valid], d[valid]) / seg_len[valid] ** 2, 0.0, 1.0)
    proj = pts[:-1] + t[:, None] * d
    dist = np.hypot(*(q - proj).T)
    dist[~valid] = np.inf
    k = int(np.argmin(dist))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    tangent = d[k] / seg_len[k]
    offset_vec = q - proj[k]
    cross = tangent[0] * offset_vec[1] - tangent[1] * offset_vec[0]
    return float(cum[k] + t[k] * seg_len[k]), float(math.copysign(dist[k], cross) if dist[k] else 0.0), \
        float(math.atan2(tangent[1], tangent[0]))
