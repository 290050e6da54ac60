"""Polynomials and transfer functions in the spatial Laplace variable ``s`` (1/m).

Builds the vehicle-to-vehicle error propagation transfer functions of both
steering strategies and the frequency-domain tests applied to them: H-infinity
norm by sweep, Routh-Hurwitz, the even-polynomial coefficient condition and
the Bode sensitivity integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .control import OUTPUT_LATERAL, GainSet
from .model import VehicleParams, build_matrices


class PolyfreqError(ValueError):
    """A frequency-domain precondition does not hold."""


class UnstableDenominatorError(PolyfreqError):
    pass


class RHPZeroError(PolyfreqError):
    pass


class ConsistencyError(PolyfreqError):
    pass


class NotRankOneError(PolyfreqError):
    pass


class SweepBracketWarning(UserWarning):
    pass


class Poly:
    """Real polynomial with ascending coefficients; trailing zeros are trimmed."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        c.setflags(write=False)
        self.c = c

    @classmethod
    def const(cls, value: float) -> "Poly":
        return cls([value])

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return -1 if self.is_zero() else len(self.c) - 1

    @property
    def lead(self) -> float:
        return float(self.c[-1])

    def is_zero(self) -> bool:
        return len(self.c) == 1 and self.c[0] == 0.0

    def coeff(self, k: int) -> float:
        return float(self.c[k]) if 0 <= k < len(self.c) else 0.0

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.c), len(other.c))
        return Poly(np.pad(self.c, (0, n - len(self.c))) + np.pad(other.c, (0, n - len(other.c))))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-self.c)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly(self.c * float(other))
        return Poly(np.convolve(self.c, _as_poly(other).c))

    __rmul__ = __mul__

    def __call__(self, s):
        """Horner evaluation; ``s`` may be a complex scalar or array."""
        s = np.asarray(s)
        out = np.zeros_like(s, dtype=np.result_type(s, float)) + self.c[-1]
        for a in self.c[-2::-1]:
            out = out * s + a
        return out if out.ndim else out[()]

    def __eq__(self, other):
        return isinstance(other, Poly) and np.array_equal(self.c, other.c)

    def __repr__(self):
        return f"Poly({self.c.tolist()})"

    def roots(self) -> np.ndarray:
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.c[::-1])

    def at_jw(self) -> tuple["Poly", "Poly"]:
        """Real and imaginary parts of ``p(j w)`` as real polynomials in ``w``."""
        re = np.zeros(len(self.c))
        im = np.zeros(len(self.c))
        for k, a in enumerate(self.c):
            sign = 1.0 if k % 4 in (0, 1) else -1.0
            if k % 2 == 0:
                re[k] = sign * a
            else:
                im[k] = sign * a
        return Poly(re), Poly(im)


def _as_poly(p) -> Poly:
    return p if isinstance(p, Poly) else Poly.const(float(p))


S = Poly([0.0, 1.0])


@dataclass(frozen=True)
class RationalTF:
    """``num(s) / den(s)``; no automatic cancellation of common factors."""

    num: Poly
    den: Poly

    def __post_init__(self):
        if self.den.is_zero():
            raise ValueError("denominator is the zero polynomial")

    def __call__(self, s):
        return self.num(s) / self.den(s)

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def limit_at_infinity(self) -> float:
        rd = self.relative_degree
        if rd < 0:
            return math.inf
        return self.num.lead / self.den.lead if rd == 0 else 0.0


@dataclass(frozen=True)
class TFMatrix:
    """2x2 transfer matrix over a shared denominator."""

    num: tuple  # 2x2 nested tuple of Poly
    den: Poly

    def entry(self, i: int, j: int) -> RationalTF:
        return RationalTF(self.num[i][j], self.den)

    def __call__(self, s):
        """Evaluate at scalar or 1-d array ``s``; returns shape ``(..., 2, 2)``."""
        d = self.den(s)
        rows = [[self.num[i][j](s) / d for j in range(2)] for i in range(2)]
        return np.moveaxis(np.array(rows, dtype=complex), (0, 1), (-2, -1))

    def limit_at_infinity(self) -> np.ndarray:
        out = np.zeros((2, 2))
        dd = self.den.degree
        for i in range(2):
            for j in range(2):
                n = self.num[i][j]
                if n.degree > dd:
                    out[i, j] = math.inf
                else:
                    out[i, j] = n.coeff(dd) / self.den.lead
        return out


def closed_loop_matrix(params: VehicleParams, gains: GainSet):
    """Polynomial matrix ``vx^2 M s^2 + vx C s + L + B (K_P + s vx K_D)``.

    Returned as a 2x2 nested tuple of :class:`Poly`.
    """
    mats = build_matrices(params)
    vx = params.vx
    kp, kd = np.asarray(gains.k_p), np.asarray(gains.k_d)
    return tuple(
        tuple(
            Poly([mats.L[i, j] + mats.B[i] * kp[j],
                  vx * mats.C[i, j] + vx * mats.B[i] * kd[j],
                  vx * vx * mats.M[i, j]])
            for j in range(2)
        )
        for i in range(2)
    )


def det_adj(m):
    (p11, p12), (p21, p22) = m
    det = p11 * p22 - p12 * p21
    adj = ((p22, -p12), (-p21, p11))
    return det, adj


def _adj_b(params: VehicleParams, gains: GainSet):
    mats = build_matrices(params)
    det, adj = det_adj(closed_loop_matrix(params, gains))
    adj_b = tuple(adj[i][0] * mats.B[0] + adj[i][1] * mats.B[1] for i in range(2))
    return det, adj_b


def build_H_lfp_scalar(params: VehicleParams, gains: GainSet) -> RationalTF:
    """Lateral-error propagation ``H = (D + n_G) / D`` under learning from the predecessor."""
    if gains.output != OUTPUT_LATERAL:
        raise ValueError("scalar H needs output='lateral'; use build_H_lfp_vector")
    det, adj_b = _adj_b(params, gains)
    n_g = adj_b[0] * Poly([gains.k_lp, gains.k_ld])
    return RationalTF(det + n_g, det)


def _identity_plus(det: Poly, adj_b, row) -> TFMatrix:
    num = tuple(
        tuple((det if i == j else Poly.const(0.0)) + adj_b[i] * row[j] for j in range(2))
        for i in range(2)
    )
    return TFMatrix(num, det)


def build_H_lfp_vector(params: VehicleParams, gains: GainSet) -> TFMatrix:
    """Error-vector propagation ``I + P^-1 B K_L(s)`` with both errors as output."""
    det, adj_b = _adj_b(params, gains)
    row = [Poly([lp, ld]) for lp, ld in zip(gains.k_lp_row, gains.k_ld_row)]
    if len(row) == 1:
        row.append(Poly.const(0.0))
    return _identity_plus(det, adj_b, row)


def build_H_ff_matrix(params: VehicleParams, gains: GainSet) -> tuple[TFMatrix, RationalTF]:
    """Error-vector propagation under predecessor tracking and its ``e_lat <- theta_err`` entry."""
    det, adj_b = _adj_b(params, gains)
    vx = params.vx
    row = [
        Poly([gains.k_p[0], vx * gains.k_d[0]]),
        Poly([gains.k_p[1], vx * gains.k_d[1] + gains.k_ff]),
    ]
    h2 = _identity_plus(det, adj_b, row)
    return h2, h2.entry(0, 1)


def sigma1_2x2(a) -> np.ndarray | float:
    """Largest singular value of complex 2x2 matrices (array shape ``(..., 2, 2)``).

    Uses the larger eigenvalue of the Gram matrix from its trace and determinant.
    """
    a = np.asarray(a, dtype=complex)
    fro2 = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * np.abs(det) ** 2, 0.0))
    out = np.sqrt(0.5 * (fro2 + disc))
    return out if out.ndim else float(out)


def rank1_perturbation_bound(r) -> float:
    """``sigma_1(I + R)`` for a numerically rank-one ``R``; always at least 1."""
    r = np.asarray(r, dtype=complex)
    s1 = sigma1_2x2(r)
    if s1 > 0:
        s2 = abs(r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]) / s1
        if s2 > 1e-10 * s1:
            raise NotRankOneError(f"R is not rank one: sigma2/sigma1 = {s2 / s1:.3e}")
    return sigma1_2x2(np.eye(2) + r)


ROUTH_EPS = 1e-12


def routh_first_column(p: Poly) -> tuple[np.ndarray, bool]:
    """First column of the Routh table (coefficients scaled to unit max, lead made positive).

    The flag reports a zero pivot or a zero row, either of which rules out
    strict stability.
    """
    if p.is_zero():
        raise ValueError("Routh test of the zero polynomial")
    c = p.c[::-1] / np.max(np.abs(p.c))
    if c[0] < 0:
        c = -c
    n = len(c)
    width = (n + 1) // 2
    rows = [np.zeros(width), np.zeros(width)]
    rows[0][: len(c[0::2])] = c[0::2]
    rows[1][: len(c[1::2])] = c[1::2]
    degenerate = False
    for _ in range(n - 2):
        upper, lower = rows[-2], rows[-1]
        if np.all(np.abs(lower) < ROUTH_EPS):
            degenerate = True
            # Row of zeros: roots symmetric about the origin. Continue with the auxiliary derivative.
            order = n - len(rows)
            powers = order + 1 - 2 * np.arange(width)
            lower = upper * np.maximum(powers, 0)
            rows[-1] = lower
        if abs(lower[0]) < ROUTH_EPS:
            degenerate = True
        pivot = lower[0] if abs(lower[0]) >= ROUTH_EPS else ROUTH_EPS
        rows[-1] = lower = np.concatenate([[pivot], lower[1:]])
        new = np.zeros(width)
        new[:-1] = (pivot * upper[1:] - upper[0] * lower[1:]) / pivot
        rows.append(new)
    col = np.array([r[0] for r in rows[:n]])
    return col, degenerate or bool(np.any(np.abs(col) < ROUTH_EPS))


def routh_hurwitz(p: Poly) -> bool:
    """Strict Hurwitz test: all roots in the open left half plane."""
    if p.degree < 1:
        raise ValueError("Routh test needs degree >= 1")
    col, degenerate = routh_first_column(p)
    return not degenerate and bool(np.all(col > 0))


def rhp_root_count(p: Poly) -> int:
    col, _ = routh_first_column(p)
    col = np.where(np.abs(col) < ROUTH_EPS, ROUTH_EPS, col)
    return int(np.sum(np.sign(col[1:]) != np.sign(col[:-1])))


@dataclass(frozen=True)
class HinfResult:
    value: float
    omega: float  # rad/m; math.inf when attained in the high-frequency limit
    finite_peak: float
    finite_omega: float


SWEEP_DECADES = (-4, 4)
SWEEP_PER_DECADE = 200


def _magnitude(tf):
    if isinstance(tf, TFMatrix):
        return lambda w: sigma1_2x2(tf(1j * np.asarray(w)))
    return lambda w: np.abs(tf(1j * np.asarray(w)))


def _limit_value(tf) -> float:
    lim = tf.limit_at_infinity()
    if isinstance(tf, TFMatrix):
        return math.inf if np.any(np.isinf(lim)) else sigma1_2x2(lim)
    return abs(lim)


def hinf_norm(tf) -> HinfResult:
    """Supremum over ``w >= 0`` of ``|H(jw)|`` (scalar) or ``sigma_1(H(jw))`` (matrix).

    Dense log sweep with golden-section refinement of the three largest local
    maxima, plus the values at ``w = 0`` and ``w -> inf``.
    """
    if tf.den.degree >= 1 and not routh_hurwitz(tf.den):
        raise UnstableDenominatorError("transfer function denominator is not Hurwitz")
    mag = _magnitude(tf)
    lo, hi = SWEEP_DECADES
    w = np.logspace(lo, hi, (hi - lo) * SWEEP_PER_DECADE + 1)
    vals = mag(w)
    interior = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])) + 1
    best_w, best_v = float(w[np.argmax(vals)]), float(np.max(vals))
    for k in interior[np.argsort(vals[interior])[::-1][:3]]:
        x = np.log(w[k - 1:k + 2])
        res = optimize.minimize_scalar(lambda t: -float(mag(math.exp(t))), bracket=tuple(x),
                                       method="golden", tol=1e-6)
        if -res.fun > best_v:
            best_w, best_v = math.exp(res.x), float(-res.fun)

    v0 = float(mag(0.0))
    vinf = _limit_value(tf)
    value, omega = best_v, best_w
    if v0 > value:
        value, omega = v0, 0.0
    if vinf >= value:
        value, omega = vinf, math.inf
    if omega in (w[0], w[-1]):
        warnings.warn(f"H-infinity argmax at sweep boundary w = {omega:g} rad/m", SweepBracketWarning,
                      stacklevel=2)
    return HinfResult(value=value, omega=omega, finite_peak=best_v, finite_omega=best_w)


@dataclass(frozen=True)
class CoefficientCondition:
    a6: float
    a4: float
    a2: float
    a0: float
    all_positive: bool

    @property
    def coefficients(self) -> tuple:
        return self.a6, self.a4, self.a2, self.a0


def mag2_poly(p: Poly) -> Poly:
    """``|p(jw)|^2`` as a real polynomial in ``w``."""
    re, im = p.at_jw()
    return re * re + im * im


def coefficient_condition(params: VehicleParams, gains: GainSet) -> CoefficientCondition:
    """Even-power coefficients of ``|D(jw)|^2 - |N(jw)|^2`` for the lateral-output LFP loop."""
    h = build_H_lfp_scalar(params, gains)
    q = mag2_poly(h.den) - mag2_poly(h.num)
    scale = max(np.max(np.abs(mag2_poly(h.den).c)), 1e-300)
    bad = [k for k in range(len(q.c)) if (k % 2 == 1 or k > 6) and abs(q.c[k]) > 1e-6 * scale]
    if bad:
        raise ConsistencyError(f"unexpected coefficients of w^{bad} in |D|^2 - |N|^2")
    a6, a4, a2, a0 = (q.coeff(k) for k in (6, 4, 2, 0))
    return CoefficientCondition(a6, a4, a2, a0, all(a > 0 for a in (a6, a4, a2, a0)))


@dataclass(frozen=True)
class BodeResult:
    numeric: float
    prediction: float
    omega_c: float
    tail: float


def _loop_numerator(h: RationalTF) -> Poly:
    return h.num - h.den


def bode_prediction(h: RationalTF) -> float:
    """``-(pi/2) lim_{s->inf} s G(s)`` for ``H = 1 + G``."""
    n_g = _loop_numerator(h)
    if n_g.is_zero() or n_g.degree < h.den.degree - 1:
        return 0.0
    if n_g.degree > h.den.degree - 1:
        raise ValueError("loop transfer function is not strictly proper")
    return -0.5 * math.pi * n_g.lead / h.den.lead


def bode_integral(h: RationalTF, cutoff_tol: float = 1e-9) -> BodeResult:
    """``int_0^inf ln|S(jw)| dw`` with ``S = 1/H``, by quadrature plus an analytic ``c/w^2`` tail."""
    n_g = _loop_numerator(h)
    prediction = bode_prediction(h)
    if n_g.is_zero():
        return BodeResult(0.0, 0.0, 0.0, 0.0)
    if h.num.degree >= 1 and not routh_hurwitz(h.num):
        raise RHPZeroError("H has a zero in the closed right half plane; the zero-integral result does not apply")
    if h.den.degree >= 1 and not routh_hurwitz(h.den):
        raise UnstableDenominatorError("transfer function denominator is not Hurwitz")

    def ln_s(w):
        g = n_g(1j * w) / h.den(1j * w)
        return -0.5 * math.log1p(2.0 * g.real + abs(g) ** 2)

    roots = np.concatenate([h.den.roots(), h.num.roots()])
    w_asym = 10.0 * max(1.0, float(np.max(np.abs(roots))) if roots.size else 1.0)
    wc = w_asym
    while abs(ln_s(wc)) >= cutoff_tol:
        wc *= 2.0
        if wc > 1e12:
            raise ConsistencyError("ln|S| does not decay; cannot place the integration cutoff")

    edges = np.concatenate([[0.0], np.geomspace(1e-3, wc, 60)])
    numeric = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(ln_s, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        numeric += val
    tail = ln_s(wc) * wc
    total = numeric + tail
    if abs(tail) > max(0.01 * abs(total), 1e-4):
        raise ConsistencyError(f"tail estimate {tail:.3e} exceeds 1% of the integral {total:.3e}")
    return BodeResult(total, prediction, wc, tail)
