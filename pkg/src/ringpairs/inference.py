"""Parameter estimation on counting data.

Power-curve decomposition, double-exponential g2 fits, heralded g2,
interference fringes (two-photon and single-photon) and a parametric
Poisson bootstrap for the visibility error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear
from scipy.special import erfcx

from .coincidence import ThreefoldCounts
from .counting import poisson_sigma
from .errors import FitError, PeakNotFoundError, StatisticsError
from .fitting import FitResult, covariance_from_jacobian, solve
from .source import substream

__all__ = [
    "FitResult", "FringePoint", "FringeScan", "G2Result", "HeraldedG2Result",
    "VisibilityResult", "effective_modes", "fit_fringe", "fit_g2_double_exponential",
    "fit_power_quadratic", "g2_from_modes", "heralded_g2", "monte_carlo_visibility",
    "poisson_sigma", "single_photon_fringe_fit", "two_sided_exponential",
]


# --- power curve --------------------------------------------------------------

def fit_power_quadratic(points) -> FitResult:
    """Weighted, non-negative fit of N = a P + b P^2 + c.

    ``points`` holds ``(power_mW, rate, sigma)`` triples; weights are 1/sigma^2.
    """
    arr = np.asarray(points, dtype=float).reshape(-1, 3)
    p, n, s = arr.T
    distinct = np.unique(p).size
    if distinct < 3:
        raise FitError(f"rank deficiency: {distinct} distinct powers for 3 coefficients")
    if distinct < 4:
        raise ValueError("need at least 4 distinct pump powers")
    with np.errstate(divide="ignore"):
        w = np.where(s > 0, 1.0 / s, 0.0)
    if not np.any(w > 0):
        raise FitError("all weights are zero")
    design = np.column_stack([p, p ** 2, np.ones_like(p)])
    aw, nw = design * w[:, None], n * w
    res = lsq_linear(aw, nw, bounds=(0.0, np.inf), method="bvls", tol=1e-12)
    if not res.success:
        raise FitError(res.message)
    cov = covariance_from_jacobian(aw)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    names = ("a", "b", "c")
    resid = aw @ res.x - nw
    return FitResult(
        parameters=dict(zip(names, map(float, res.x))),
        sigmas=dict(zip(names, map(float, sig))),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        iterations=int(res.nit),
        converged=True,
    )


# --- unheralded g2 ---------------------------------------------------------------

@dataclass
class G2Result:
    g2_zero: float
    sigma: float
    coherence_time: float  # s
    effective_modes: float
    delay: float = 0.0  # s, fitted peak position
    fit: FitResult | None = field(default=None, repr=False)

    def to_dict(self):
        return {"g2_zero": self.g2_zero, "sigma": self.sigma,
                "coherence_time_s": self.coherence_time,
                "effective_modes": self.effective_modes, "delay_s": self.delay}


def effective_modes(g2_zero: float) -> float:
    """Number of equally populated thermal modes N from g2(0) = 1 + 1/N."""
    if g2_zero <= 1:
        return math.inf
    return 1.0 / (g2_zero - 1.0)


def g2_from_modes(n_modes: float) -> float:
    return 1.0 + 1.0 / n_modes


def two_sided_exponential(x, scale, jitter=0.0):
    """exp(-|x| / scale), optionally convolved with a Gaussian of rms ``jitter``."""
    x = np.asarray(x, dtype=float)
    if jitter <= 0:
        return np.exp(-np.abs(x) / scale)
    r = jitter / scale
    ax = np.abs(x)
    # erfcx keeps exp(r^2/2 -+ x/scale) erfc(...) finite far from the cusp
    arg_m = (r - ax / jitter) / math.sqrt(2.0)
    arg_p = (r + ax / jitter) / math.sqrt(2.0)
    g = np.exp(-0.5 * (ax / jitter) ** 2)
    with np.errstate(over="ignore", invalid="ignore"):
        left = np.where(arg_m > 0, g * erfcx(arg_m),
                        2.0 * np.exp(0.5 * r * r - ax / scale) - g * erfcx(-arg_m))
    return 0.5 * (left + g * erfcx(arg_p))


def fit_g2_double_exponential(points, timing_jitter: float = 0.0) -> G2Result:
    """Fit g2(tau) = 1 + A exp(-2 |tau - tau0| / tau_c); tau in ps.

    ``points`` holds ``(tau, g2)`` or ``(tau, g2, sigma)`` rows; with sigmas the
    fit is weighted by 1/sigma^2.  ``timing_jitter`` (ps, combined rms of both
    detectors) convolves the model with the Gaussian instrument response so A
    stays the physical g2(0) - 1.
    """
    arr = np.asarray(points, dtype=float)
    arr = arr.reshape(-1, arr.shape[-1] if arr.ndim == 2 else 2)
    tau, g = arr[:, 0], arr[:, 1]
    if arr.shape[1] > 2:
        if np.any(arr[:, 2] <= 0):
            raise FitError("g2 sigmas must be positive")
        weight = 1.0 / arr[:, 2]
    else:
        weight = np.ones_like(g)
    peak = int(np.argmax(g))
    amp0 = g[peak] - 1.0
    if not amp0 > 0:
        raise PeakNotFoundError("no bunching peak above 1")
    above = np.nonzero(g - 1.0 > amp0 / 2.0)[0]
    step = np.median(np.diff(np.sort(tau))) if tau.size > 1 else 1.0
    width = (tau[above].max() - tau[above].min()) if above.size > 1 else step
    tc0 = max(width, step) / math.log(2.0)
    t0 = tau[peak]
    jit = timing_jitter / step

    def resid(p):
        amp, shift, tc = p
        x = (tau - t0) / step - shift
        return (1.0 + amp * two_sided_exponential(x, abs(tc) / 2.0, jit) - g) * weight

    x, _, cov, res = solve(resid, [amp0, 0.0, tc0 / step], ["amplitude", "shift", "tau_c"])
    amp, shift, tc = x
    tc = abs(tc) * step
    if not res.converged:
        raise FitError("g2 fit did not converge")
    if amp <= 0:
        raise PeakNotFoundError("fitted bunching amplitude is not positive")
    center = t0 + shift * step
    if center - tau.min() < 2.5 * tc or tau.max() - center < 2.5 * tc:
        raise StatisticsError("g2 points do not span 5 coherence times around the peak")
    sig = res.sigmas["amplitude"]
    res.parameters.update(amplitude=float(amp), tau0_ps=float(center), tau_c_ps=float(tc))
    res.sigmas.update(tau0_ps=res.sigmas.pop("shift") * step,
                      tau_c_ps=res.sigmas.pop("tau_c") * step)
    res.parameters.pop("shift"), res.parameters.pop("tau_c")
    return G2Result(g2_zero=1.0 + float(amp), sigma=float(sig), coherence_time=float(tc) * 1e-12,
                    effective_modes=effective_modes(1.0 + float(amp)), delay=float(center) * 1e-12,
                    fit=res)


# --- heralded g2 -------------------------------------------------------------------

@dataclass
class HeraldedG2Result:
    g2h_zero: float
    sigma: float
    heralding_rate: float

    def to_dict(self):
        return {"g2h_zero": self.g2h_zero, "sigma": self.sigma,
                "heralding_rate_hz": self.heralding_rate}


def heralded_g2(counts: ThreefoldCounts) -> HeraldedG2Result:
    """g2_H(0) = N_h12 N_h / (N_h1 N_h2) with Poisson-propagated error."""
    nh, n1, n2, n12 = (counts.herald_singles, counts.herald_arm1,
                       counts.herald_arm2, counts.triples)
    if n1 <= 0 or n2 <= 0:
        raise StatisticsError("insufficient two-fold coincidences for heralded g2")
    scale = nh / (n1 * n2)
    g = n12 * scale
    rel = 1.0 / nh + 1.0 / n1 + 1.0 / n2
    sigma = math.sqrt((poisson_sigma(n12) * scale) ** 2 + g * g * rel)
    return HeraldedG2Result(float(g), float(sigma), nh / counts.duration)


# --- fringes -------------------------------------------------------------------------

@dataclass(frozen=True)
class FringePoint:
    phase: float
    coincidences: int
    singles_a: int
    singles_b: int
    dwell: float


@dataclass(frozen=True)
class FringeScan:
    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if any(p.dwell <= 0 for p in self.points):
            raise ValueError("dwell must be positive")

    @property
    def phases(self):
        return np.array([p.phase for p in self.points], dtype=float)

    @property
    def coincidences(self):
        return np.array([p.coincidences for p in self.points], dtype=float)

    @property
    def dwells(self):
        return np.array([p.dwell for p in self.points], dtype=float)

    def with_coincidences(self, counts):
        return FringeScan(tuple(
            FringePoint(p.phase, int(c), p.singles_a, p.singles_b, p.dwell)
            for p, c in zip(self.points, counts)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phase_rad", "coincidences", "singles_a", "singles_b", "dwell_s"])
            for p in self.points:
                w.writerow([repr(float(p.phase)), p.coincidences, p.singles_a, p.singles_b,
                            repr(float(p.dwell))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(FringePoint(float(r["phase_rad"]), int(r["coincidences"]),
                                     int(r["singles_a"]), int(r["singles_b"]),
                                     float(r["dwell_s"])) for r in rows))


@dataclass
class VisibilityResult:
    visibility: float
    sigma: float
    phase_offset: float
    mean_rate: float
    frequency: float = 2.0
    frequency_sigma: float = 0.0

    def to_dict(self):
        return dict(self.__dict__)


def _harmonic_fit(phase, counts, dwell, frequency, fit_frequency):
    """Weighted fit of counts = dwell * R0 (1 + V cos(f phi + phi0)).

    With fixed frequency the model is linear in (R0, R0 V cos phi0, -R0 V sin phi0)
    and is solved exactly; a free frequency is refined by damped least squares.
    Returns (R0, V, phi0, f) and their 1-sigma errors.
    """
    w = 1.0 / np.array([poisson_sigma(int(round(c))) for c in counts])
    if np.all(counts == 0):
        raise StatisticsError("no counts in scan")

    def design(f):
        return np.column_stack([dwell, dwell * np.cos(f * phase), dwell * np.sin(f * phase)])

    d = design(frequency) * w[:, None]
    lin, *_ = np.linalg.lstsq(d, counts * w, rcond=None)
    r0, u, v = lin
    if r0 <= 0:
        raise FitError("non-positive mean rate")
    vis = math.hypot(u, v) / r0
    phi0 = math.atan2(-v, u)
    if not fit_frequency:
        cov = covariance_from_jacobian(d)
        # delta method for V = |(u, v)| / R0 and phi0 = atan2(-v, u)
        h = math.hypot(u, v) or 1e-300
        gv = np.array([-vis / r0, u / (h * r0), v / (h * r0)])
        gp = np.array([0.0, v / h ** 2, -u / h ** 2])
        return ((r0, vis, phi0, frequency),
                (math.sqrt(cov[0, 0]), math.sqrt(max(gv @ cov @ gv, 0)),
                 math.sqrt(max(gp @ cov @ gp, 0)), 0.0), 1)

    def resid(p):
        r, vv, ph, f = p
        return (dwell * r * (1.0 + vv * np.cos(f * phase + ph)) - counts) * w

    x, sig, _, res = solve(resid, [r0, vis, phi0, frequency], ["r0", "v", "phi0", "f"],
                           absolute_sigma=True)
    if not res.converged:
        raise FitError("fringe fit did not converge")
    return tuple(x), tuple(sig), res.iterations


def _normalize(r0, vis, phi0):
    if vis < 0:
        vis, phi0 = -vis, phi0 + math.pi
    return r0, vis, math.remainder(phi0, 2 * math.pi)


def _check_coverage(phase, frequency, n_min=8):
    if phase.size < n_min:
        raise StatisticsError(f"fringe scan needs at least {n_min} points")
    if (phase.max() - phase.min()) * frequency < 2 * math.pi * (1 - 1.0 / phase.size) - 1e-9:
        raise StatisticsError("fringe scan does not cover a full period")


def fit_fringe(scan: FringeScan, fit_frequency: bool = False, accidentals=None) -> VisibilityResult:
    """Two-photon fringe R(phi) = R0 (1 + V cos(2 phi + phi0)) on raw coincidences.

    ``accidentals`` (counts per point) gives the optional accidental-subtracted
    variant.  ``fit_frequency`` frees the fringe frequency (diagnostic mode).
    """
    phase, counts, dwell = scan.phases, scan.coincidences, scan.dwells
    _check_coverage(phase, 2.0)
    if accidentals is not None:
        counts = np.clip(counts - np.asarray(accidentals, float), 0, None)
    (r0, vis, phi0, f), (sr, sv, sp, sf), _ = _harmonic_fit(phase, counts, dwell, 2.0,
                                                            fit_frequency)
    r0, vis, phi0 = _normalize(r0, vis, phi0)
    return VisibilityResult(float(vis), float(sv), float(phi0), float(r0), float(f), float(sf))


def single_photon_fringe_fit(points, fit_frequency: bool = False, dwell: float = 1.0) -> FitResult:
    """Laser fringe S(phi) = S0 (1 + v cos(phi + psi)); ``points`` = (phase, counts)."""
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    phase, counts = arr.T
    _check_coverage(phase, 1.0)
    (s0, v, psi, f), (ss, sv, sp, sf), it = _harmonic_fit(
        phase, counts, np.full(phase.size, dwell), 1.0, fit_frequency)
    s0, v, psi = _normalize(s0, v, psi)
    params = {"s0": float(s0), "v": float(v), "psi": float(psi)}
    sigmas = {"s0": float(ss), "v": float(sv), "psi": float(sp)}
    if fit_frequency:
        params["frequency"], sigmas["frequency"] = float(f), float(sf)
    model = dwell * s0 * (1 + v * np.cos(f * phase + psi))
    return FitResult(params, sigmas, float(np.sqrt(np.mean((model - counts) ** 2))), it, True)


def monte_carlo_visibility(scan: FringeScan, iterations: int = 1000, seed: int = 0) -> VisibilityResult:
    """Parametric Poisson bootstrap of the fringe visibility.

    Each iteration redraws every coincidence count from Poisson(observed)
    and refits; returns the mean visibility and its sample standard deviation.
    """
    base = fit_fringe(scan)
    rng = substream(seed, "monte-carlo-visibility")
    observed = scan.coincidences
    draws = rng.poisson(observed, size=(iterations, observed.size))
    vis, failures = [], 0
    for row in draws:
        try:
            vis.append(fit_fringe(scan.with_coincidences(row)).visibility)
        except StatisticsError:
            failures += 1
    if failures > 0.1 * iterations:
        raise StatisticsError(f"{failures} of {iterations} Monte-Carlo refits failed")
    vis = np.asarray(vis)
    return VisibilityResult(float(vis.mean()), float(vis.std(ddof=1)), base.phase_offset,
                            base.mean_rate)
