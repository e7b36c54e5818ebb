"""Stochastic time-tag generation for a microring SFWM pair source.

Emission model
--------------
Photons leave the ring through resonance modes whose occupation is thermal.
Mode events occur at rate ``1/tau`` (``tau`` = pair correlation time, the
loaded photon lifetime).  Each mode carries an exponentially distributed
intensity shared by the pair, signal-noise and idler-noise processes, so
every arm is a single-mode thermal stream (unheralded g2(0) = 2) while the
signal/idler cross-correlation has the two-sided exponential shape of scale
``tau``.  Every photon leaves its mode after an Exp(tau) dwell.

Only photons that survive the optical loss budget are drawn; thinning a
Poisson-given-intensity process is exact, so the occupied-mode sampler never
touches the ~10^6 /s undetectable pairs.

Detector effects (efficiency, dark counts, delay, Gaussian jitter, TDC
quantization, non-paralyzable dead time) are applied per detector in
:class:`_Detector`.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import AcquisitionTooLarge, ConfigError, RangeError
from .ring import ChannelPlan, channel_pair, default_channel_plan, hz_to_nm
from .tags import PS, TimeTagStream, seconds_to_ps

SCAN_RANGE_NM = (1480.0, 1620.0)
DEFAULT_TAU = 4.3e5 / (2 * math.pi * 299_792_458.0 / 1550.1e-9)  # Q / (2 pi nu0)
_FWHM_TO_SIGMA = 1.0 / math.sqrt(8.0 * math.log(2.0))


def db_to_transmittance(db):
    return 10.0 ** (-db / 10.0)


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 0.75
    dark_rate: float = 80.0
    jitter_sigma: float = 50e-12
    dead_time: float = 30e-9
    tdc_resolution: float = 1e-12
    delay: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ConfigError("detector.efficiency", "must lie in [0, 1]")
        if self.dark_rate < 0:
            raise ConfigError("detector.dark_rate", "must be >= 0")
        if self.jitter_sigma < 0:
            raise ConfigError("detector.jitter_sigma", "must be >= 0")
        if self.dead_time < 0:
            raise ConfigError("detector.dead_time", "must be >= 0")
        if not self.tdc_resolution > 0:
            raise ConfigError("detector.tdc_resolution", "must be > 0")


@dataclass(frozen=True)
class RamanPeak:
    center: float  # nm
    fwhm: float  # nm
    amplitude: float  # on-chip s^-1 mW^-1 at the peak

    def __call__(self, wavelength_nm):
        s = self.fwhm * _FWHM_TO_SIGMA
        return self.amplitude * np.exp(-0.5 * ((np.asarray(wavelength_nm) - self.center) / s) ** 2)


@dataclass(frozen=True)
class SourceConfig:
    """Pair source, noise spectrum and optical loss budget.

    ``brightness`` is the on-chip pair generation rate per mW^2.  Noise rates
    (``noise_floor`` and Raman peaks) are on-chip photon rates per mW and per
    resonance channel; detected coefficients follow by multiplying with the
    arm transmittance.
    """

    brightness: float = 2.09e6
    pump_power: float = 1.0
    noise_floor: float = 0.0
    raman_peaks: tuple = ()
    pair_correlation_time: float = DEFAULT_TAU
    coupling_loss_total: float = 8.0  # dB, split evenly between the two facets
    filter_loss_signal: float = 1.5  # dB
    filter_loss_idler: float = 1.5  # dB
    channel_plan: ChannelPlan = field(default_factory=default_channel_plan)
    max_tags: int = 100_000_000
    chunk_duration: float = 0.5

    def __post_init__(self):
        checks = [
            ("brightness", self.brightness >= 0), ("pump_power", self.pump_power >= 0),
            ("noise_floor", self.noise_floor >= 0),
            ("pair_correlation_time", self.pair_correlation_time > 0),
            ("coupling_loss_total", self.coupling_loss_total >= 0),
            ("filter_loss_signal", self.filter_loss_signal >= 0),
            ("filter_loss_idler", self.filter_loss_idler >= 0),
            ("chunk_duration", self.chunk_duration > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"source.{name}", "out of physical range")
        for k, p in enumerate(self.raman_peaks):
            if p.amplitude < 0 or p.fwhm <= 0:
                raise ConfigError(f"source.raman_peaks.{k}", "amplitude >= 0 and fwhm > 0 required")

    def optical_transmittance(self, arm: str) -> float:
        """Facet plus filter transmittance of one arm, detector excluded."""
        facet = self.coupling_loss_total / 2.0
        filt = self.filter_loss_signal if arm == "signal" else self.filter_loss_idler
        return db_to_transmittance(facet + filt)


@dataclass(frozen=True)
class UmiSpec:
    delay: float = 10e-9
    phase: float = 0.0
    two_photon_visibility: float = 1.0

    def __post_init__(self):
        if not 0 <= self.two_photon_visibility <= 1:
            raise ConfigError("umi.two_photon_visibility", "must lie in [0, 1]")
        if not self.delay > 0:
            raise ConfigError("umi.delay", "must be > 0")


# --- rates ------------------------------------------------------------------

def parse_channel(label: str):
    """``"S6"`` / ``"I6"`` -> (6, "signal"/"idler")."""
    label = str(label).strip()
    if len(label) < 2 or label[0].upper() not in "SI" or not label[1:].isdigit():
        raise RangeError(f"unknown channel label {label!r}")
    return int(label[1:]), "signal" if label[0].upper() == "S" else "idler"


def channel_wavelength(config: SourceConfig, index: int, arm: str) -> float:
    sig, idl = channel_pair(config.channel_plan, index)
    return float(hz_to_nm((sig if arm == "signal" else idl).center))


def pair_rate(config: SourceConfig, power: float) -> float:
    """On-chip pair generation rate B * P^2."""
    if power < 0:
        raise ValueError("power must be >= 0")
    return config.brightness * power ** 2


def raman_noise_rate(config: SourceConfig, wavelength: float, power: float) -> float:
    """On-chip noise photon rate in the resonance at ``wavelength`` (nm)."""
    if not SCAN_RANGE_NM[0] <= wavelength <= SCAN_RANGE_NM[1]:
        raise RangeError(f"wavelength {wavelength} nm outside scan range {SCAN_RANGE_NM}")
    density = config.noise_floor + sum(float(p(wavelength)) for p in config.raman_peaks)
    return density * power


@dataclass(frozen=True)
class SinglesRate:
    linear: float
    quadratic: float
    constant: float

    @property
    def total(self):
        return self.linear + self.quadratic + self.constant

    def __float__(self):
        return self.total


def singles_coefficients(config: SourceConfig, channel: str, detector: DetectorSpec | None = None):
    """Detected (a, b, c) of N = a P + b P^2 + c for one arm."""
    detector = detector or DetectorSpec()
    index, arm = parse_channel(channel)
    eta = config.optical_transmittance(arm) * detector.efficiency
    lam = channel_wavelength(config, index, arm)
    a = raman_noise_rate(config, lam, 1.0) * eta
    b = config.brightness * eta
    return a, b, detector.dark_rate


def singles_rate(config: SourceConfig, channel: str, power: float,
                 detector: DetectorSpec | None = None) -> SinglesRate:
    if power < 0:
        raise ValueError("power must be >= 0")
    a, b, c = singles_coefficients(config, channel, detector)
    return SinglesRate(a * power, b * power ** 2, c)


# --- seeding ------------------------------------------------------------------

def substream(seed: int, *labels) -> np.random.Generator:
    """Independent generator derived from (seed, labels); host- and thread-independent."""
    key = tuple(zlib.crc32(str(lab).encode()) for lab in labels)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def derive_seed(seed: int, *labels) -> int:
    """Integer seed for a sub-task, derived like :func:`substream`."""
    key = tuple(zlib.crc32(str(lab).encode()) for lab in labels)
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


# --- emission -----------------------------------------------------------------

@dataclass
class _Emission:
    pair_s: np.ndarray  # ps, pairs whose both photons survived the optics
    pair_i: np.ndarray
    lone_s: np.ndarray  # signal-arm photons without a surviving partner (incl. noise)
    lone_i: np.ndarray


def _mode_means(config, index, power, t_s, t_i):
    tau = config.pair_correlation_time
    n_p = pair_rate(config, power) * tau
    n_s = raman_noise_rate(config, channel_wavelength(config, index, "signal"), power) * tau
    n_i = raman_noise_rate(config, channel_wavelength(config, index, "idler"), power) * tau
    m_both = n_p * t_s * t_i
    m_s = n_p * t_s * (1 - t_i) + n_s * t_s
    m_i = n_p * (1 - t_s) * t_i + n_i * t_i
    return m_both, m_s, m_i


def _emission_chunks(config, index, power, duration, rng, t_s, t_i):
    """Yield photon emissions chunk by chunk over [0, duration]."""
    tau_ps = config.pair_correlation_time / PS
    m = np.array(_mode_means(config, index, power, t_s, t_i))
    lam = m.sum()
    expected = (m[0] + max(m[1], m[2])) / config.pair_correlation_time * duration
    if expected > config.max_tags:
        raise AcquisitionTooLarge(
            f"~{expected:.3g} tags per stream exceeds cap {config.max_tags:.3g}; "
            "shorten the acquisition and chunk it")
    if lam <= 0:
        return
    q = lam / (1.0 + lam)
    cum = np.cumsum(m / lam)
    pad = 30.0 * tau_ps
    total_ps = duration / PS
    chunk_ps = config.chunk_duration / PS
    lo = -pad
    while lo < total_ps:
        hi = min(lo + chunk_ps, total_ps)
        n_modes = rng.poisson(q * (hi - lo) / tau_ps)
        t_mode = rng.uniform(lo, hi, n_modes)
        k = rng.geometric(1.0 - q, n_modes)
        base = np.repeat(t_mode, k)
        cat = np.searchsorted(cum, rng.random(base.size), side="right")
        cat = np.minimum(cat, 2)
        both = base[cat == 0]
        yield _Emission(
            pair_s=both + rng.exponential(tau_ps, both.size),
            pair_i=both + rng.exponential(tau_ps, both.size),
            lone_s=(b := base[cat == 1]) + rng.exponential(tau_ps, b.size),
            lone_i=(b := base[cat == 2]) + rng.exponential(tau_ps, b.size),
        )
        lo = hi


# --- detection ----------------------------------------------------------------

@numba.njit(cache=True)
def _dead_time_filter(tags, min_gap):
    keep = np.zeros(tags.size, dtype=np.bool_)
    if tags.size == 0:
        return keep
    last = tags[0]
    keep[0] = True
    for i in range(1, tags.size):
        if tags[i] - last >= min_gap:
            keep[i] = True
            last = tags[i]
    return keep


class _Detector:
    """Accumulates photon arrivals chunk-wise and renders a TimeTagStream."""

    def __init__(self, spec: DetectorSpec, label, duration, rng):
        self.spec, self.label, self.duration, self.rng = spec, label, duration, rng
        self.res_ps = spec.tdc_resolution / PS
        self.parts = []

    def add(self, photons_ps):
        s, rng = self.spec, self.rng
        hit = photons_ps[rng.random(photons_ps.size) < s.efficiency]
        # chunks are time-local, so per-chunk sorting leaves only short
        # boundary overlaps for the final (run-aware) merge
        self.parts.append(np.sort(self._clock(hit)))

    def _clock(self, t):
        s = self.spec
        t = t + s.delay / PS
        if s.jitter_sigma > 0:
            t = t + self.rng.normal(0.0, s.jitter_sigma / PS, t.size)
        return np.floor(t / self.res_ps).astype(np.int64) * int(round(self.res_ps))

    def finish(self) -> TimeTagStream:
        total_ps = seconds_to_ps(self.duration)
        n_dark = self.rng.poisson(self.spec.dark_rate * self.duration)
        dark = self.rng.uniform(0.0, total_ps, n_dark)
        tags = np.concatenate(self.parts) if self.parts else np.empty(0, np.int64)
        tags = np.concatenate([tags, np.sort(self._clock(dark))])
        tags = tags[(tags >= 0) & (tags <= total_ps)]
        tags.sort(kind="stable")
        min_gap = max(int(round(self.spec.dead_time / PS)), int(round(self.res_ps)), 1)
        tags = tags[_dead_time_filter(tags, min_gap)]
        return TimeTagStream(self.label, self.duration, tags)


def apply_detector(photons_ps, spec: DetectorSpec, duration, seed, label="det"):
    """Run photon arrival times (ps) through one detector model."""
    det = _Detector(spec, label, duration, substream(seed, "detector", label))
    det.add(np.asarray(photons_ps, dtype=float))
    return det.finish()


# --- acquisitions ---------------------------------------------------------------

def _labels(index):
    return f"S{index}", f"I{index}"


def _power(config, power):
    return config.pump_power if power is None else power


def generate_pair_streams(config: SourceConfig, detectors, channel_index: int, duration: float,
                          seed: int, power: float | None = None):
    """Signal and idler detector streams of one channel pair."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    channel_pair(config.channel_plan, channel_index)
    ls, li = _labels(channel_index)
    src = substream(seed, "source", channel_index)
    det_s = _Detector(detectors[0], ls, duration, substream(seed, "detector", ls))
    det_i = _Detector(detectors[1], li, duration, substream(seed, "detector", li))
    t_s = config.optical_transmittance("signal")
    t_i = config.optical_transmittance("idler")
    for em in _emission_chunks(config, channel_index, _power(config, power), duration, src, t_s, t_i):
        det_s.add(np.concatenate([em.pair_s, em.lone_s]))
        det_i.add(np.concatenate([em.pair_i, em.lone_i]))
    return det_s.finish(), det_i.finish()


def franson_transform(config: SourceConfig, detectors, channel_index: int, duration: float,
                      umi: UmiSpec, seed: int, power: float | None = None):
    """Pair streams after both photons traverse one unbalanced interferometer.

    Per pair the arm combination is SS/LL (central peak, probability 1/2) or
    SL/LS (satellites at +-delay, 1/4 each).  Central pairs exit the detected
    port jointly with probability (1 + V cos 2 phi) / 4 for both photons, so
    each photon alone exits with probability 1/2 at any phase.  Unpaired
    photons exit with probability 1/2 and a random arm.
    """
    if umi.delay <= 10 * config.pair_correlation_time:
        raise ConfigError("umi.delay", "must exceed 10x the pair correlation time")
    channel_pair(config.channel_plan, channel_index)
    ls, li = _labels(channel_index)
    src = substream(seed, "source", channel_index)
    route = substream(seed, "umi", channel_index)
    det_s = _Detector(detectors[0], ls, duration, substream(seed, "detector", ls))
    det_i = _Detector(detectors[1], li, duration, substream(seed, "detector", li))
    t_s = config.optical_transmittance("signal")
    t_i = config.optical_transmittance("idler")
    dt = umi.delay / PS
    fringe = umi.two_photon_visibility * math.cos(2.0 * umi.phase)
    p_same = (1.0 + fringe) / 4.0  # P(+,+) = P(-,-) for central pairs
    for em in _emission_chunks(config, channel_index, _power(config, power), duration, src, t_s, t_i):
        n = em.pair_s.size
        u = route.random(n)
        central = u < 0.5
        sl = (u >= 0.5) & (u < 0.75)
        ls_ = u >= 0.75
        long_both = route.random(n) < 0.5
        shift_s = np.where(central, long_both * dt, np.where(ls_, dt, 0.0))
        shift_i = np.where(central, long_both * dt, np.where(sl, dt, 0.0))
        # central ports: ++ / -- w.p. p_same each, +- / -+ w.p. 1/2 - p_same each
        v = route.random(n)
        c_pp = v < p_same
        c_pm = (v >= 2 * p_same) & (v < 0.5 + p_same)
        c_mp = v >= 0.5 + p_same
        out_s_c = c_pp | c_pm
        out_i_c = c_pp | c_mp
        sat_s = route.random(n) < 0.5
        sat_i = route.random(n) < 0.5
        out_s = np.where(central, out_s_c, sat_s)
        out_i = np.where(central, out_i_c, sat_i)

        def lone(t):
            w = route.random(t.size)
            keep = w < 0.5
            return t[keep] + (w[keep] < 0.25) * dt

        det_s.add(np.concatenate([(em.pair_s + shift_s)[out_s], lone(em.lone_s)]))
        det_i.add(np.concatenate([(em.pair_i + shift_i)[out_i], lone(em.lone_i)]))
    return det_s.finish(), det_i.finish()


def hbt_split(stream: TimeTagStream, seed: int):
    """50:50 beamsplitter: each tag independently routed to output 1 or 2."""
    rng = substream(seed, "hbt", stream.channel_label)
    to_one = rng.random(len(stream)) < 0.5
    return (TimeTagStream(f"{stream.channel_label}/1", stream.duration, stream.tags[to_one]),
            TimeTagStream(f"{stream.channel_label}/2", stream.duration, stream.tags[~to_one]))


def generate_heralded_streams(config: SourceConfig, herald_detector: DetectorSpec,
                              hbt_detectors, channel_index: int, duration: float, seed: int,
                              power: float | None = None):
    """Herald (signal) stream plus the idler split on a 50:50 splitter before detection."""
    channel_pair(config.channel_plan, channel_index)
    ls, li = _labels(channel_index)
    src = substream(seed, "source", channel_index)
    split = substream(seed, "hbt", li)
    det_h = _Detector(herald_detector, ls, duration, substream(seed, "detector", ls))
    det_1 = _Detector(hbt_detectors[0], li + "/1", duration, substream(seed, "detector", li, 1))
    det_2 = _Detector(hbt_detectors[1], li + "/2", duration, substream(seed, "detector", li, 2))
    t_s = config.optical_transmittance("signal")
    t_i = config.optical_transmittance("idler")
    for em in _emission_chunks(config, channel_index, _power(config, power), duration, src, t_s, t_i):
        det_h.add(np.concatenate([em.pair_s, em.lone_s]))
        idl = np.concatenate([em.pair_i, em.lone_i])
        one = split.random(idl.size) < 0.5
        det_1.add(idl[one])
        det_2.add(idl[~one])
    return det_h.finish(), det_1.finish(), det_2.finish()


def laser_fringe_counts(phases, rate, visibility, phase_offset, dwell, seed):
    """Counts of an attenuated CW laser through the interferometer: S0 (1 + v cos(phi + psi))."""
    rng = substream(seed, "laser")
    phases = np.asarray(phases, dtype=float)
    mean = rate * dwell * (1.0 + visibility * np.cos(phases + phase_offset))
    return rng.poisson(mean)


def thermal_window_counts(mu: float, n_windows: int, herald_efficiency: float,
                          arm_efficiency: float, seed: int, window: int = 1):
    """Per-window thermal pair-number oracle for heralded g2.

    Every window holds n pairs with p_n = mu^n / (1 + mu)^(n+1).  Signal
    photons are detected independently with ``herald_efficiency`` (threshold
    detector); idler photons go 50:50 to two threshold detectors with
    ``arm_efficiency`` each.  Returns a ThreefoldCounts-compatible tuple.
    """
    from .coincidence import ThreefoldCounts

    rng = substream(seed, "thermal-oracle", mu)
    q = mu / (1.0 + mu)
    herald = one = two = triple = 0
    remaining = int(n_windows)
    block = 20_000_000
    while remaining > 0:
        w = min(block, remaining)
        remaining -= w
        occupied = rng.binomial(w, q)
        n = rng.geometric(1.0 - q, occupied)
        h = rng.random(occupied) < 1.0 - (1.0 - herald_efficiency) ** n
        n1 = rng.binomial(n, arm_efficiency / 2.0)
        p2 = (arm_efficiency / 2.0) / (1.0 - arm_efficiency / 2.0) if arm_efficiency < 2 else 1.0
        n2 = rng.binomial(n - n1, min(p2, 1.0))
        c1, c2 = n1 > 0, n2 > 0
        herald += int(h.sum())
        one += int((h & c1).sum())
        two += int((h & c2).sum())
        triple += int((h & c1 & c2).sum())
    return ThreefoldCounts(herald, one, two, triple, int(window), float(n_windows * window * PS))
