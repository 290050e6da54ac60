"""Grid search for learning gains that satisfy the coefficient condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import polyfreq as pf
from .analysis import Certificate, verdict
from .control import GainSet, kff_formula
from .model import VehicleParams
from .sim import LFP_DT

ACCEPTED = "ACCEPTED"
NUMERIC_ONLY = "NUMERIC-ONLY"
NOT_FOUND = "NOT-FOUND"

__all__ = ["DesignSpec", "DesignResult", "UnstableFeedbackError", "design_lfp", "kff_formula",
           "ACCEPTED", "NUMERIC_ONLY", "NOT_FOUND"]


class UnstableFeedbackError(ValueError):
    pass


@dataclass(frozen=True)
class DesignSpec:
    params: VehicleParams
    k_p: tuple = (0.06, 0.96)
    k_d: tuple = (0.0, 0.08)
    k_ff: float | None = None  # None: zero steady-state formula
    k_lp_range: tuple = (-0.1, -0.005)
    k_ld_range: tuple = (-1.0, -0.01)
    grid: int = 9
    refinements: int = 2
    seed: tuple | None = None  # (k_lp, k_ld) tried before the grid

    def __post_init__(self):
        for name in ("k_lp_range", "k_ld_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"{name} must be a finite interval with lo <= hi, got {(lo, hi)}")
        if self.grid < 2 or self.refinements < 0:
            raise ValueError("grid needs at least 2 points per axis and refinements >= 0")

    def gains(self, k_lp: float, k_ld: float) -> GainSet:
        k_ff = kff_formula(self.params, self.k_p[1]) if self.k_ff is None else self.k_ff
        return GainSet(k_p=self.k_p, k_d=self.k_d, k_ff=k_ff, k_lp=k_lp, k_ld=k_ld)


@dataclass
class DesignResult:
    status: str
    gains: GainSet | None = None
    certificate: Certificate | None = None
    coefficients: pf.CoefficientCondition | None = None
    evaluated: int = 0
    diagnostics: list = field(default_factory=list)


def _order(c):
    return abs(c[1]), abs(c[0])


def _axis(lo, hi, n, admissible):
    pts = np.unique(np.linspace(lo, hi, n)) if hi > lo else np.array([lo])
    return [float(p) for p in pts if admissible(p)]


def design_lfp(spec: DesignSpec) -> DesignResult:
    """Return the first (smallest ``|K_LD|``, then ``|K_LP|``) candidate passing the coefficient condition."""
    params = spec.params
    base = spec.gains(0.0, 0.0)
    det, _ = pf.det_adj(pf.closed_loop_matrix(params, base))
    if not pf.routh_hurwitz(det):
        raise UnstableFeedbackError("feedback gains k_p, k_d do not stabilize a single vehicle; retune them first")

    ke = spec.k_p[0]
    lp_lo, lp_hi = spec.k_lp_range
    ld_lo, ld_hi = spec.k_ld_range
    result = DesignResult(NOT_FOUND)
    if ld_lo == ld_hi == 0.0:
        k_lp = min(max(0.5 * (lp_lo + lp_hi), -2 * ke + 1e-9), -1e-9)
        try:
            bode = pf.bode_integral(pf.build_H_lfp_scalar(params, spec.gains(k_lp, 0.0)))
            result.diagnostics.append(
                f"K_LD = 0 only: the log-sensitivity integral is {bode.numeric:.3g} (zero), so "
                f"|H(jw)| >= 1 at some w for any K_LP; no lateral string-stable design exists")
        except pf.PolyfreqError as exc:
            result.diagnostics.append(f"K_LD = 0 only: zero-integral rule not applicable ({exc})")
        return result

    def lp_ok(k):
        return -2 * ke < k < 0

    def ld_ok(k):
        return k < 0

    if not (lp_lo < 0 and lp_hi > -2 * ke):
        h0 = [abs((ke + k) / ke) for k in (lp_lo, lp_hi)]
        result.diagnostics.append(
            f"K_LP range [{lp_lo:g}, {lp_hi:g}] lies outside ({-2 * ke:g}, 0): |H(0)| = "
            f"{min(h0):.4g} >= 1 at best, so the zero-frequency gain alone rules out attenuation")
        return result
    if not ld_hi < 0 and not ld_lo < 0:
        result.diagnostics.append("K_LD range contains no negative value")
        return result

    def passes(c):
        result.evaluated += 1
        try:
            cond = pf.coefficient_condition(params, spec.gains(*c))
        except pf.PolyfreqError:
            return None
        return cond if cond.all_positive else None

    def accept(c, cond):
        g = spec.gains(*c)
        result.status = ACCEPTED
        result.gains = g
        result.coefficients = cond
        result.certificate = verdict(params, g, LFP_DT)
        return result

    if spec.seed is not None and lp_ok(spec.seed[0]) and ld_ok(spec.seed[1]) \
            and lp_lo <= spec.seed[0] <= lp_hi and ld_lo <= spec.seed[1] <= ld_hi:
        cond = passes(spec.seed)
        if cond is not None:
            return accept(tuple(spec.seed), cond)

    box = (lp_lo, lp_hi, ld_lo, ld_hi)
    n = spec.grid
    best = None
    for level in range(spec.refinements + 1):
        lps = _axis(box[0], box[1], n, lp_ok)
        lds = _axis(box[2], box[3], n, ld_ok)
        cands = sorted(((a, b) for a in lps for b in lds), key=_order)
        found = None
        for c in cands:
            cond = passes(c)
            if cond is not None:
                found = (c, cond)
                break
        if found is not None:
            best = found
            # Zoom into the neighbouring cells of the winner.
            dlp = (box[1] - box[0]) / (n - 1)
            dld = (box[3] - box[2]) / (n - 1)
            c = found[0]
            box = (max(lp_lo, c[0] - dlp), min(lp_hi, c[0] + dlp), max(ld_lo, c[1] - dld), min(ld_hi, c[1] + dld))
        elif best is None:
            n = 2 * n - 1
        else:
            break
    if best is not None:
        return accept(*best)

    result.diagnostics.append(f"no candidate among {result.evaluated} satisfies the coefficient condition")
    # The condition is only sufficient: look for candidates passing the numeric H-infinity test.
    for c in sorted(((a, b) for a in _axis(lp_lo, lp_hi, spec.grid, lp_ok)
                     for b in _axis(ld_lo, ld_hi, spec.grid, ld_ok)), key=_order):
        try:
            cert = verdict(params, spec.gains(*c), LFP_DT)
        except pf.PolyfreqError:
            continue
        if cert.hinf is not None and cert.hinf.value < 1.0:
            result.status = NUMERIC_ONLY
            result.gains = spec.gains(*c)
            result.certificate = cert
            break
    return result
