"""Discrete L2 norms, attenuation ratios and string-stability certificates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import polyfreq as pf
from .control import OUTPUT_LATERAL, OUTPUT_VECTOR, GainSet
from .model import VehicleParams
from .sim import FF_PT, LFP_DT, PlatoonTrajectory

STRING_STABLE_EMPIRICAL = "STRING-STABLE-EMPIRICAL"
AMPLIFYING = "AMPLIFYING"
VACUOUS = "VACUOUS"

STABLE = "STABLE"
MARGINAL = "MARGINAL"
NOT_STABLE = "NOT-STABLE"
UNSTABLE_BY_THEOREM = "UNSTABLE-BY-THEOREM"

#: Decision rules a certificate can rest on.
RULES = {
    "ff-rank-one": "predecessor tracking: H2 = I + rank-one term, so sigma_1(H2(jw)) >= 1 at every w",
    "ff-steady-state": "predecessor tracking on a circular arc: the heading error of vehicle i-1 "
                       "becomes a lateral error of vehicle i scaled by k_theta/k_elat",
    "vector-rank-one": "learning with the full error vector as output: I + rank-one term, "
                       "so sigma_1(H(jw)) >= 1 at every w",
    "bode-zero-integral": "lateral-output learning without derivative gain: G has relative degree 2 "
                          "and no RHP zero, so the log-sensitivity integral is 0 and |H(jw)| >= 1 somewhere",
    "hinf-small-gain": "sup_w |H(jw)| < 1 is sufficient for lateral string stability",
    "coefficient-condition": "all even coefficients of |D(jw)|^2 - |N(jw)|^2 positive gives |H(jw)| < 1 "
                             "at every finite w",
}

MIN_PREDECESSOR_NORM = 1e-12


def l2_norm(z, step: float) -> float:
    """Rectangular-rule L2 norm ``sqrt(sum |z_k|^2 step)``; vector samples sum component squares."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("empty signal")
    return math.sqrt(float(np.sum(z * z)) * step)


@dataclass
class NormReport:
    output: str
    horizon: float
    norms_elat: np.ndarray
    norms_evec: np.ndarray
    ratios_elat: np.ndarray  # entry i is ||y_{i+1}|| / ||y_i||, NaN if undefined
    ratios_evec: np.ndarray
    verdict: str
    first_amplifying: int | None = None  # 1-based index of the follower with gamma >= 1
    gamma_freq: float | None = None

    @property
    def ratios(self) -> np.ndarray:
        return self.ratios_elat if self.output == OUTPUT_LATERAL else self.ratios_evec

    @property
    def gamma(self) -> float:
        """Largest consecutive ratio, the empirical uniform attenuation constant."""
        r = self.ratios[np.isfinite(self.ratios)]
        return float(r.max()) if r.size else math.nan

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vehicle", "norm_elat_m_sqrt_m", "norm_evec_si_sqrt_m", "ratio_elat", "ratio_evec"])
            for i in range(len(self.norms_elat)):
                re_ = "" if i == 0 else f"{self.ratios_elat[i - 1]:.10g}"
                rv = "" if i == 0 else f"{self.ratios_evec[i - 1]:.10g}"
                w.writerow([i + 1, f"{self.norms_elat[i]:.10g}", f"{self.norms_evec[i]:.10g}", re_, rv])


def _ratios(norms: np.ndarray) -> np.ndarray:
    prev = norms[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(prev > MIN_PREDECESSOR_NORM, norms[1:] / prev, np.nan)


def attenuation_report(traj: PlatoonTrajectory, output: str = OUTPUT_LATERAL) -> NormReport:
    if output not in (OUTPUT_LATERAL, OUTPUT_VECTOR):
        raise ValueError(f"unknown output selector {output!r}")
    h = traj.step
    n_el = np.array([l2_norm(traj.e_lat(i), h) for i in range(1, traj.n_vehicles + 1)])
    n_ev = np.array([l2_norm(traj.e(i), h) for i in range(1, traj.n_vehicles + 1)])
    report = NormReport(output, float(traj.grid[-1] - traj.grid[0]), n_el, n_ev, _ratios(n_el), _ratios(n_ev),
                        VACUOUS)
    lead = n_el[0] if output == OUTPUT_LATERAL else n_ev[0]
    if lead <= MIN_PREDECESSOR_NORM:
        return report
    r = report.ratios
    bad = np.flatnonzero(~(r < 1.0))
    if bad.size:
        report.verdict = AMPLIFYING
        report.first_amplifying = int(bad[0]) + 2
    else:
        report.verdict = STRING_STABLE_EMPIRICAL
    return report


def strictly_decreasing(x) -> bool:
    return bool(np.all(np.diff(np.asarray(x)) < 0))


def strictly_increasing(x) -> bool:
    return bool(np.all(np.diff(np.asarray(x)) > 0))


@dataclass
class Certificate:
    strategy: str
    output: str
    verdict: str
    rule: str
    witness: dict = field(default_factory=dict)
    hinf: pf.HinfResult | None = None
    coefficients: pf.CoefficientCondition | None = None
    bode: pf.BodeResult | None = None
    h0: float | None = None
    notes: list = field(default_factory=list)

    @property
    def gamma_freq(self) -> float | None:
        return None if self.hinf is None else self.hinf.value


WITNESS_OMEGA = 1.0


def verdict(params: VehicleParams, gains: GainSet, strategy: str, output: str | None = None) -> Certificate:
    """Combine the impossibility rules with the numeric small-gain test."""
    output = output or gains.output
    if strategy == FF_PT:
        h2, scalar = pf.build_H_ff_matrix(params, gains)
        cert = Certificate(strategy, output, UNSTABLE_BY_THEOREM, "ff-rank-one")
        cert.witness["sigma1_at_w1"] = pf.sigma1_2x2(h2(1j * WITNESS_OMEGA))
        cert.witness["H2_elat_from_theta_at_0"] = float(np.real(scalar(0.0)))
        if not pf.routh_hurwitz(h2.den):
            cert.notes.append("closed-loop denominator is not Hurwitz")
        else:
            cert.hinf = pf.hinf_norm(h2)
        cert.notes.append(RULES["ff-steady-state"])
        return cert
    if strategy != LFP_DT:
        raise ValueError(f"unknown strategy {strategy!r}")

    if output == OUTPUT_VECTOR:
        if gains.output != OUTPUT_VECTOR:
            gains = gains.replace(output=OUTPUT_VECTOR, k_lp=(gains.k_lp_row[0], 0.0),
                                  k_ld=(gains.k_ld_row[0], 0.0))
        hv = pf.build_H_lfp_vector(params, gains)
        cert = Certificate(strategy, output, UNSTABLE_BY_THEOREM, "vector-rank-one")
        cert.witness["sigma1_at_w1"] = pf.sigma1_2x2(hv(1j * WITNESS_OMEGA))
        if pf.routh_hurwitz(hv.den):
            cert.hinf = pf.hinf_norm(hv)
        return cert

    h = pf.build_H_lfp_scalar(params, gains)
    if not pf.routh_hurwitz(h.den):
        raise pf.UnstableDenominatorError("feedback gains do not stabilize the single-vehicle loop")
    h0 = float(np.real(h(0.0)))
    hinf = pf.hinf_norm(h)
    coeff = pf.coefficient_condition(params, gains)
    cert = Certificate(strategy, output, NOT_STABLE, "hinf-small-gain", hinf=hinf, coefficients=coeff, h0=h0)
    try:
        cert.bode = pf.bode_integral(h)
    except pf.RHPZeroError:
        cert.notes.append("H has an RHP zero; the zero-integral rule does not apply")
    if gains.k_ld == 0.0 and cert.bode is not None:
        cert.verdict = UNSTABLE_BY_THEOREM
        cert.rule = "bode-zero-integral"
        cert.witness["bode_integral"] = cert.bode.numeric
        return cert
    if hinf.value < 1.0:
        cert.verdict = STABLE
    elif math.isinf(hinf.omega) and hinf.finite_peak < 1.0 and coeff.all_positive:
        # |H(jw)| < 1 at every finite w but tends to 1: the strict small-gain bound is not met.
        cert.verdict = MARGINAL
        cert.rule = "coefficient-condition"
        cert.notes.append("|H(jw)| -> 1 as w -> inf because H - 1 is strictly proper")
    return cert


def _fmt(x) -> str:
    if isinstance(x, float):
        return "inf" if math.isinf(x) else f"{x:.6g}"
    return str(x)


def format_certificate(cert: Certificate, params: VehicleParams, gains: GainSet) -> str:
    lines = [
        "string-stability certificate",
        f"strategy: {cert.strategy}",
        f"output: {cert.output}",
        f"vehicle: m={params.mass:g} kg Iz={params.yaw_inertia:g} kg m^2 Cf={params.cf:g} N/rad "
        f"Cr={params.cr:g} N/rad a={params.a:g} m b={params.b:g} m vx={params.vx:g} m/s",
        f"gains: k_p={list(gains.k_p)} k_d={list(gains.k_d)} k_ff={gains.k_ff:g} "
        f"k_lp={gains.k_lp} k_ld={gains.k_ld}",
        f"verdict: {cert.verdict}",
        f"rule: {cert.rule}: {RULES[cert.rule]}",
    ]
    for k, v in cert.witness.items():
        lines.append(f"witness {k}: {_fmt(v)}")
    if cert.h0 is not None:
        lines.append(f"H(0): {_fmt(cert.h0)}")
    if cert.hinf is not None:
        lines.append(f"hinf_norm: {_fmt(cert.hinf.value)} at w={_fmt(cert.hinf.omega)} rad/m")
        lines.append(f"largest finite-frequency peak: {cert.hinf.finite_peak:.10g} "
                     f"at w={_fmt(cert.hinf.finite_omega)} rad/m")
    if cert.coefficients is not None:
        c = cert.coefficients
        lines.append(f"coefficients a6 a4 a2 a0: {c.a6:.6e} {c.a4:.6e} {c.a2:.6e} {c.a0:.6e}")
        lines.append(f"coefficient condition: {'all positive' if c.all_positive else 'violated'}")
    if cert.bode is not None:
        lines.append(f"log-sensitivity integral: numeric {cert.bode.numeric:.6g}, "
                     f"predicted {cert.bode.prediction:.6g}")
    for note in cert.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"
