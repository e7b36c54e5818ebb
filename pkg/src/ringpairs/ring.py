"""Microring resonance comb: grid, transmission, and Q / dispersion fitting.

Resonance frequencies follow the Kerr-comb expansion around the pump mode::

    omega_mu = omega_0 + D1*mu + D2*mu**2/2 + D3*mu**3/6

with ``D1 = 2*pi*FSR``.  Group-velocity dispersion is reported through
``beta2 = -(n_g/c) * D2 / D1**2`` with ``n_g = c / (FSR * 2*pi*R)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import ConfigError, FitError, NoDipFoundError, RangeError
from .fitting import FitResult, solve

C = 299_792_458.0
TWO_PI = 2.0 * np.pi


def nm_to_hz(wavelength_nm):
    return C / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def hz_to_nm(frequency_hz):
    return C / np.asarray(frequency_hz, dtype=float) * 1e9


@dataclass(frozen=True)
class ResonatorSpec:
    center_frequency: float = C / 1550.1e-9
    fsr: float = 330e9
    d2: float = 0.0
    d3: float = 0.0
    q_loaded: float = 4.3e5
    extinction: float = 0.9
    radius: float = 60e-6

    def __post_init__(self):
        if not self.center_frequency > 0:
            raise ConfigError("resonator.center_frequency", "must be > 0")
        if not self.fsr > 0:
            raise ConfigError("resonator.fsr", "must be > 0")
        if not self.q_loaded > 0:
            raise ConfigError("resonator.q_loaded", "must be > 0")
        if not 0 < self.extinction <= 1:
            raise ConfigError("resonator.extinction", "must lie in (0, 1]")
        if not self.radius > 0:
            raise ConfigError("resonator.radius", "must be > 0")

    @classmethod
    def from_beta2(cls, beta2, **kw):
        """Build a spec whose D2 reproduces the given beta2 (s^2/m)."""
        spec = cls(**kw)
        return replace(spec, d2=-beta2 * spec.d1 ** 3 * spec.radius)

    @property
    def d1(self):
        return TWO_PI * self.fsr

    @property
    def group_index(self):
        return C / (self.fsr * TWO_PI * self.radius)

    @property
    def beta2(self):
        return -(self.group_index / C) * self.d2 / self.d1 ** 2

    @property
    def linewidth(self):
        return self.center_frequency / self.q_loaded

    @property
    def photon_lifetime(self):
        """Loaded-cavity energy lifetime Q / (2 pi nu0)."""
        return self.q_loaded / (TWO_PI * self.center_frequency)

    def mode_frequency(self, mu):
        mu = np.asarray(mu, dtype=float)
        dint = self.d2 * mu ** 2 / 2 + self.d3 * mu ** 3 / 6
        return self.center_frequency + (self.d1 * mu + dint) / TWO_PI


@dataclass(frozen=True)
class CombResonance:
    mode_index: int
    frequency: float
    linewidth_fwhm: float


def resonance_grid(spec: ResonatorSpec, mu_min: int, mu_max: int) -> list[CombResonance]:
    if mu_min > mu_max:
        raise ValueError("mu_min must not exceed mu_max")
    mu = np.arange(mu_min, mu_max + 1)
    freq = spec.mode_frequency(mu)
    if np.any(freq <= 0):
        raise RangeError("mode span reaches non-positive frequencies")
    if np.any(np.diff(freq) <= 0):
        raise RangeError("dispersion too strong: resonance frequencies not increasing over span")
    freq[mu == 0] = spec.center_frequency
    return [
        CombResonance(int(m), float(f), float(f / spec.q_loaded))
        for m, f in zip(mu, freq)
    ]


def integrated_dispersion(spec: ResonatorSpec, mu, frequencies=None):
    """D_int(mu) = 2 pi (nu_mu - nu_0) - D1 mu, in rad/s."""
    mu = np.asarray(mu, dtype=float)
    nu = spec.mode_frequency(mu) if frequencies is None else np.asarray(frequencies, float)
    return TWO_PI * (nu - spec.center_frequency) - spec.d1 * mu


def lorentzian_dip(frequency, center, fwhm, extinction):
    x = 2.0 * (np.asarray(frequency, float) - center) / fwhm
    return 1.0 - extinction / (1.0 + x * x)


def transmission(spec: ResonatorSpec, frequency):
    """All-pass transmission: Lorentzian dip of the comb line nearest to ``frequency``."""
    nu = np.asarray(frequency, dtype=float)
    guess = np.rint((nu - spec.center_frequency) / spec.fsr)
    best = None
    for shift in (-1.0, 0.0, 1.0):
        lines = spec.mode_frequency(guess + shift)
        d = np.abs(nu - lines)
        if best is None:
            best, nearest = d, lines
        else:
            closer = d < best
            best = np.where(closer, d, best)
            nearest = np.where(closer, lines, nearest)
    out = lorentzian_dip(nu, nearest, nearest / spec.q_loaded, spec.extinction)
    return float(out) if out.ndim == 0 else out


def synthetic_trace(spec: ResonatorSpec, mu: int, *, span_fwhm=10.0, n_points=401,
                    noise=0.0, rng=None):
    """Transmission samples around resonance ``mu`` with optional Gaussian noise."""
    center = float(spec.mode_frequency(mu))
    fwhm = center / spec.q_loaded
    nu = center + np.linspace(-0.5, 0.5, n_points) * span_fwhm * fwhm
    t = transmission(spec, nu)
    if noise:
        rng = np.random.default_rng() if rng is None else rng
        t = t + rng.normal(0.0, noise, size=t.shape)
    return np.column_stack([nu, t])


def _noise_level(t):
    d = np.diff(t)
    return 1.4826 * np.median(np.abs(d - np.median(d))) / np.sqrt(2.0)


def fit_resonance(trace) -> FitResult:
    """Lorentzian fit of a single dip; returns center, loaded Q and extinction."""
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[1] != 2:
        raise ValueError("trace must be an (n, 2) array of (frequency, transmission)")
    if trace.shape[0] < 20:
        raise ValueError("trace needs at least 20 points")
    trace = trace[np.argsort(trace[:, 0])]
    nu, t = trace[:, 0], trace[:, 1]

    imin = int(np.argmin(t))
    depth = 1.0 - t[imin]
    noise = _noise_level(t)
    if imin in (0, len(t) - 1) or depth <= 0 or depth < 3.0 * noise:
        raise NoDipFoundError(f"no resonance dip (depth {depth:.3g}, noise {noise:.3g})")

    below = np.nonzero(t < 1.0 - depth / 2.0)[0]
    width0 = nu[below[-1]] - nu[below[0]] if below.size > 1 else (nu[-1] - nu[0]) / 10
    width0 = max(width0, nu[1] - nu[0])
    nu_g = nu[imin]
    x = (nu - nu_g) / width0

    def resid(p):
        shift, w, ext = p
        return 1.0 - ext / (1.0 + (2.0 * (x - shift) / w) ** 2) - t

    p, _, cov, res = solve(resid, [0.0, 1.0, depth], ["shift", "width", "extinction"])
    if not res.converged:
        raise FitError("resonance fit did not converge")
    shift, w, ext = p
    center = nu_g + shift * width0
    fwhm = abs(w) * width0
    q = center / fwhm
    grad = np.array([width0 / fwhm, -q / w, 0.0])  # dQ/d(shift, width, ext)
    sig_q = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    return FitResult(
        parameters={"center_frequency": center, "q_loaded": q, "extinction": float(ext),
                    "linewidth": fwhm},
        sigmas={"center_frequency": res.sigmas["shift"] * width0, "q_loaded": sig_q,
                "extinction": res.sigmas["extinction"],
                "linewidth": res.sigmas["width"] * width0},
        residual_rms=res.residual_rms,
        iterations=res.iterations,
        converged=res.converged,
    )


def fit_dispersion(resonances, radius: float = 60e-6) -> FitResult:
    """Cubic least squares of resonance frequency versus mode number.

    ``resonances`` is an iterable of ``(mu, frequency_hz)``.  Returns D1, D2,
    D3 (rad/s), the pump-mode frequency and beta2 (s^2/m).
    """
    arr = np.asarray(list(resonances) if not isinstance(resonances, np.ndarray) else resonances,
                     dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("resonances must be (mu, frequency) pairs")
    mu, nu = arr[:, 0], arr[:, 1]
    if np.unique(mu).size < 4:
        raise FitError("rank-deficient: need at least 4 distinct mode numbers for a cubic fit")
    if mu.size < 7 or not (mu.min() <= 0 <= mu.max()):
        raise ValueError("need >= 7 resonances spanning mu = 0")

    ref = nu[np.argmin(np.abs(mu))]
    y = TWO_PI * (nu - ref)
    basis = np.column_stack([np.ones_like(mu), mu, mu ** 2 / 2, mu ** 3 / 6])
    coef, _, rank, _ = np.linalg.lstsq(basis, y, rcond=None)
    if rank < 4:
        raise FitError("rank-deficient dispersion fit")
    resid = y - basis @ coef
    dof = mu.size - 4
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = np.linalg.inv(basis.T @ basis) * s2
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))

    offset, d1, d2, d3 = coef
    beta2 = -d2 / (radius * d1 ** 3)
    g = np.array([0.0, 3 * d2 / (radius * d1 ** 4), -1.0 / (radius * d1 ** 3), 0.0])
    sig_beta2 = float(np.sqrt(max(g @ cov @ g, 0.0)))
    return FitResult(
        parameters={"d1": float(d1), "d2": float(d2), "d3": float(d3),
                    "center_frequency": float(ref + offset / TWO_PI), "beta2": float(beta2)},
        sigmas={"d1": float(sig[1]), "d2": float(sig[2]), "d3": float(sig[3]),
                "center_frequency": float(sig[0] / TWO_PI), "beta2": sig_beta2},
        residual_rms=float(np.sqrt(np.mean(resid ** 2))) / TWO_PI,
        iterations=1,
        converged=True,
    )


# --- channel plan -----------------------------------------------------------

@dataclass(frozen=True)
class Channel:
    center: float  # Hz
    width: float  # Hz, flat-top passband

    @property
    def wavelength_nm(self):
        return float(hz_to_nm(self.center))

    def contains(self, frequency):
        return np.abs(np.asarray(frequency) - self.center) <= self.width / 2


@dataclass(frozen=True)
class ChannelPlan:
    pump: Channel
    pairs: dict = field(default_factory=dict)  # index -> (signal, idler)
    tolerance: float = C / 1550.1e-9 / 4.3e5  # Hz, one resonance linewidth

    def __post_init__(self):
        for idx in self.pairs:
            self._validate(idx)

    def _validate(self, index):
        sig, idl = self.pairs[index]
        mismatch = sig.center + idl.center - 2 * self.pump.center
        if abs(mismatch) > self.tolerance:
            raise ConfigError(f"channel_plan.pairs.{index}",
                              f"energy conservation violated by {mismatch / 1e6:.1f} MHz")
        if not sig.center > self.pump.center > idl.center:
            raise ConfigError(f"channel_plan.pairs.{index}",
                              "signal must lie above and idler below the pump in frequency")

    @classmethod
    def from_signal_wavelengths(cls, pump_nm: float, signal_nm: dict, width: float = 100e9,
                                tolerance: float | None = None):
        """Idler centers follow from energy conservation 2 nu_p = nu_s + nu_i."""
        nu_p = float(nm_to_hz(pump_nm))
        pairs = {}
        for idx, lam in signal_nm.items():
            nu_s = float(nm_to_hz(lam))
            pairs[int(idx)] = (Channel(nu_s, width), Channel(2 * nu_p - nu_s, width))
        kw = {} if tolerance is None else {"tolerance": tolerance}
        return cls(Channel(nu_p, width), dict(sorted(pairs.items())), **kw)

    @property
    def indices(self):
        return list(self.pairs)


# Signal wavelengths of the measured channel pairs, indexed by pair number S_i I_i.
TABLE_I_SIGNAL_NM = {2: 1544.80, 3: 1542.16, 4: 1539.53, 5: 1536.91,
                     6: 1534.30, 7: 1531.70, 8: 1529.11}


def default_channel_plan(width=100e9):
    return ChannelPlan.from_signal_wavelengths(1550.1, TABLE_I_SIGNAL_NM, width)


def channel_pair(plan: ChannelPlan, index: int) -> tuple[Channel, Channel]:
    if index not in plan.pairs:
        raise RangeError(f"channel index {index} out of range {sorted(plan.pairs)}")
    plan._validate(index)
    return plan.pairs[index]


# --- CSV I/O ------------------------------------------------------------------

def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "transmission"])
        for f, t in np.asarray(trace):
            w.writerow([repr(float(f)), repr(float(t))])


def read_trace_csv(path):
    return _read_two_column(path, ("frequency_hz", "transmission"))


def write_resonances_csv(path, resonances: Iterable):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "frequency_hz"])
        for mu, f in resonances:
            w.writerow([int(mu), repr(float(f))])


def read_resonances_csv(path):
    return _read_two_column(path, ("mu", "frequency_hz"))


def _read_two_column(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
