"""Desk-scale experiment commands.

Each ``cmd_*`` takes a validated :class:`ExperimentConfig` and an output
directory, writes its artifacts under ``<out>/<command>/`` together with a
``manifest.json``, and returns the summary dictionary.  Sweep points run on a
thread pool; every point draws from a sub-seed derived from (seed, command,
point label), and results are gathered in sweep order, so outputs do not
depend on the worker count.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .coincidence import (DEFAULT_ACCIDENTAL_OFFSETS, calibrate_delay, car,
                          coincidences_in_window, cross_correlogram, g2_histogram_normalize,
                          threefold_coincidences)
from .config import ExperimentConfig, RunManifest
from .errors import StatisticsError
from .inference import (FringePoint, FringeScan, fit_fringe, fit_g2_double_exponential,
                        fit_power_quadratic, heralded_g2, monte_carlo_visibility,
                        single_photon_fringe_fit, two_sided_exponential)
from .ring import (channel_pair, fit_dispersion, fit_resonance, hz_to_nm, resonance_grid,
                   synthetic_trace)
from .source import (derive_seed, franson_transform, generate_heralded_streams,
                     generate_pair_streams, laser_fringe_counts, raman_noise_rate,
                     singles_coefficients, substream)
from .tags import PS, write_qtg

COMMANDS = ("dispersion", "pairs", "spectrum", "multichannel", "franson", "hbt", "table1")


# --- plumbing -----------------------------------------------------------------

@dataclass
class RunOptions:
    workers: int = 1
    emit_tags: bool = False


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Run:
    """Output directory, manifest and pool for one command invocation."""

    def __init__(self, command, cfg: ExperimentConfig, out_dir, options: RunOptions | None):
        self.command, self.cfg = command, cfg
        self.options = options or RunOptions()
        self.dir = Path(out_dir) / command
        self.dir.mkdir(parents=True, exist_ok=True)
        self.seed = cfg.acquisition.seed
        self.manifest = RunManifest(command, cfg.hash, self.seed)
        self.manifest.start()

    def path(self, name):
        p = self.dir / name
        self.manifest.add(name, p.relative_to(self.dir.parent))
        return p

    def seed_for(self, *labels):
        return derive_seed(self.seed, self.command, *labels)

    def serial(self):
        """Shallow copy that runs its sweeps in the calling thread."""
        sub = copy.copy(self)
        sub.options = replace(self.options, workers=1)
        return sub

    def map(self, fn, items):
        items = list(items)
        if self.options.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.options.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def write_json(self, name, obj):
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
        self.path(name).write_text(text + "\n")

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def emit(self, name, streams):
        if self.options.emit_tags:
            write_qtg(self.path(name), streams)

    def finish(self, summary):
        # effective config (overrides applied); its hash is the manifest's config_hash
        self.write_json("config.json", self.cfg.document)
        self.write_json("summary.json", summary)
        self.manifest.stop(workers=self.options.workers)
        self.manifest.write(self.dir / "manifest.json")
        return summary


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _pair_detectors(cfg):
    return cfg.detectors["signal"], cfg.detectors["idler"]


def _combined_jitter_ps(*detectors):
    return math.sqrt(sum((d.jitter_sigma / PS) ** 2 for d in detectors))


def _wavelengths(cfg, channel):
    s, i = channel_pair(cfg.source.channel_plan, channel)
    return float(hz_to_nm(s.center)), float(hz_to_nm(i.center))


# --- dispersion ----------------------------------------------------------------

def cmd_dispersion(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("dispersion", cfg, out_dir, options)
    sec, spec = cfg.dispersion, cfg.resonator
    grid = resonance_grid(spec, sec.mu_min, sec.mu_max)

    def measure(res):
        rng = substream(run.seed, "dispersion", res.mode_index)
        trace = synthetic_trace(spec, res.mode_index, span_fwhm=sec.span_fwhm,
                                n_points=sec.n_points, noise=sec.trace_noise, rng=rng)
        return res.mode_index, trace, fit_resonance(trace)

    results = run.map(measure, grid)
    run.write_csv("transmission.csv", ["mu", "frequency_hz", "transmission"],
                  ([mu, f, t] for mu, trace, _ in results for f, t in trace))
    run.write_csv("resonance_fits.csv",
                  ["mu", "center_frequency_hz", "center_sigma_hz", "q_loaded", "q_sigma",
                   "extinction", "extinction_sigma"],
                  ([mu, r["center_frequency"], r.sigmas["center_frequency"], r["q_loaded"],
                    r.sigmas["q_loaded"], r["extinction"], r.sigmas["extinction"]]
                   for mu, _, r in results))
    centers = np.array([[mu, r["center_frequency"]] for mu, _, r in results])
    disp = fit_dispersion(centers, spec.radius)
    mu = centers[:, 0]
    d1, d2, d3 = disp["d1"], disp["d2"], disp["d3"]
    nu0 = disp["center_frequency"]
    dint = centers[:, 1] - nu0 - d1 * mu / (2 * np.pi)
    model = (d2 * mu ** 2 / 2 + d3 * mu ** 3 / 6) / (2 * np.pi)
    run.write_csv("integrated_dispersion.csv", ["mu", "dint_hz", "fit_hz"],
                  zip(mu.astype(int), dint, model))
    qs = np.array([r["q_loaded"] for _, _, r in results])
    summary = {
        "beta2_s2_per_m": disp["beta2"],
        "beta2_sigma": disp.sigmas["beta2"],
        "d1_rad_s": d1, "d2_rad_s": d2, "d3_rad_s": d3,
        "d2_over_2pi_hz": d2 / (2 * np.pi),
        "fsr_hz": d1 / (2 * np.pi),
        "center_frequency_hz": nu0,
        "q_loaded_mean": float(qs.mean()),
        "q_loaded_min": float(qs.min()),
        "q_loaded_max": float(qs.max()),
        "n_resonances": len(results),
        "fit": disp.to_dict(),
    }
    return run.finish(summary)


# --- pairs -----------------------------------------------------------------------

def _acc_offsets(window):
    # default offsets are 2 ns apart; wider windows get proportionally spread ones
    step = max(window, 2000)
    return tuple(s * (5 + k) * step for k in range(0, 10) for s in (-1, 1))


def _pair_point(cfg, run, channel, power, duration, label):
    s, i = generate_pair_streams(cfg.source, _pair_detectors(cfg), channel, duration,
                                 run.seed_for(label), power=power)
    acq = cfg.acquisition
    delay = calibrate_delay(s, i)
    w = acq.coincidence_window
    offsets = DEFAULT_ACCIDENTAL_OFFSETS if w <= 2000 else _acc_offsets(w)
    ratio = car(s, i, delay, w, offsets)
    hist = cross_correlogram(s, i, acq.histogram_bin, acq.histogram_range)
    return s, i, delay, ratio, hist


def cmd_pairs(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("pairs", cfg, out_dir, options)
    sec = cfg.pairs
    duration = sec.duration or cfg.acquisition.duration
    channel = sec.channel

    def point(p):
        s, i, delay, ratio, hist = _pair_point(cfg, run, channel, p, duration, f"P{p!r}")
        return p, s, i, delay, ratio, hist

    points = run.map(point, sec.powers)
    rows, car_rows = [], []
    for k, (p, s, i, delay, ratio, hist) in enumerate(points):
        hist.to_csv(run.path(f"correlogram_{k:02d}.csv"))
        run.emit(f"tags_{k:02d}.qtg", [s, i])
        rows.append([p, len(s) / duration, len(i) / duration, math.sqrt(max(len(i), 1)) / duration])
        car_rows.append([p, ratio.coincidence_rate, ratio.accidental_rate, ratio.car,
                         ratio.car_sigma, delay])
    run.write_csv("singles.csv", ["power_mw", "signal_rate", "idler_rate", "idler_sigma"], rows)
    run.write_csv("car.csv", ["power_mw", "coincidence_rate", "accidental_rate", "car",
                              "car_sigma", "delay_ps"], car_rows)
    fit = fit_power_quadratic([(p, n, sg) for p, _, n, sg in rows])
    a, b, c = singles_coefficients(cfg.source, f"I{channel}", cfg.detectors["idler"])
    summary = {
        "channel": channel,
        "wavelengths_nm": _wavelengths(cfg, channel),
        "duration_s": duration,
        "fit": fit.to_dict(),
        "a": fit["a"], "b": fit["b"], "c": fit["c"],
        "configured": {"a": a, "b": b, "c": c},
        "car": [{"power_mw": r[0], "car": r[3], "car_sigma": r[4],
                 "coincidence_rate": r[1]} for r in car_rows],
    }
    return run.finish(summary)


# --- spectrum --------------------------------------------------------------------

def cmd_spectrum(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    """Detected correlated and noise photon spectral densities (s^-1 nm^-1).

    Both columns are per-resonance rates divided by the passband width in nm,
    so integrating a column over a passband returns the detected rate.
    """
    run = _Run("spectrum", cfg, out_dir, options)
    sec, src = cfg.spectrum, cfg.source
    plan = src.channel_plan
    n = int(round((sec.stop_nm - sec.start_nm) / sec.step_nm)) + 1
    lam = sec.start_nm + sec.step_nm * np.arange(n)
    lam = lam[lam <= sec.stop_nm + 1e-9]
    pump_nm = float(hz_to_nm(plan.pump.center))
    eff = {"signal": cfg.detectors["signal"].efficiency, "idler": cfg.detectors["idler"].efficiency}
    rows, channel_rates = [], {}
    for x in lam:
        arm = "signal" if x < pump_nm else "idler"
        eta = src.optical_transmittance(arm) * eff[arm]
        nu = 2.99792458e8 / (x * 1e-9)
        width_nm = x * x * 1e-9 * plan.pump.width / 2.99792458e8
        corr, chan = 0.0, 0
        for idx, (s, i) in plan.pairs.items():
            for ch, ch_arm in ((s, "signal"), (i, "idler")):
                if ch.contains(nu):
                    w_nm = float(hz_to_nm(ch.center - ch.width / 2) - hz_to_nm(ch.center + ch.width / 2))
                    corr = src.brightness * sec.power ** 2 * src.optical_transmittance(ch_arm) \
                        * eff[ch_arm] / w_nm
                    chan = idx if ch_arm == "signal" else -idx
        noise = raman_noise_rate(src, float(x), sec.power) * eta / width_nm
        rows.append([float(x), corr, noise, chan])
    run.write_csv("spectrum.csv", ["wavelength_nm", "correlated_rate_per_nm",
                                   "noise_rate_per_nm", "channel"], rows)
    arr = np.array(rows)
    for idx in plan.pairs:
        for sign, arm in ((1, "signal"), (-1, "idler")):
            sel = arr[:, 3] == sign * idx
            channel_rates[f"{arm[0].upper()}{idx}"] = float(arr[sel, 1].sum() * sec.step_nm)
    noise = arr[:, 2]
    # local maxima of the noise column, strongest first
    peaks = [k for k in range(1, len(noise) - 1) if noise[k] >= noise[k - 1] and noise[k] > noise[k + 1]]
    peaks.sort(key=lambda k: -noise[k])
    summary = {
        "power_mw": sec.power,
        "noise_peaks_nm": sorted(float(arr[k, 0]) for k in peaks[:2]),
        "integrated_correlated_rate": channel_rates,
        "pump_nm": pump_nm,
    }
    return run.finish(summary)


# --- multichannel -------------------------------------------------------------------

def cmd_multichannel(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("multichannel", cfg, out_dir, options)
    sec = cfg.multichannel
    duration = sec.duration or cfg.acquisition.duration

    def point(ch):
        return ch, *_pair_point(cfg, run, ch, sec.power, duration, f"ch{ch}")

    rows = []
    for ch, s, i, delay, ratio, hist in run.map(point, sec.channels):
        run.emit(f"tags_ch{ch}.qtg", [s, i])
        hist.to_csv(run.path(f"correlogram_ch{ch}.csv"))
        ls, li = _wavelengths(cfg, ch)
        rows.append([ch, ls, li, len(s) / duration, len(i) / duration, ratio.coincidence_rate,
                     ratio.accidental_rate, ratio.car, ratio.car_sigma])
    header = ["channel", "signal_nm", "idler_nm", "signal_rate", "idler_rate",
              "coincidence_rate", "accidental_rate", "car", "car_sigma"]
    run.write_csv("channels.csv", header, rows)
    best = max(rows, key=lambda r: r[7])
    summary = {
        "power_mw": sec.power,
        "duration_s": duration,
        "channels": [dict(zip(header, r)) for r in rows],
        "best_channel": best[0],
        "best_car": best[7],
        "best_coincidence_rate": best[5],
    }
    return run.finish(summary)


# --- franson ------------------------------------------------------------------------

def _phase_grid(n):
    return 2 * np.pi * np.arange(n) / n


def _franson_scan(cfg, run, channel, power, dwell, n_phases, label):
    """Phase scan through the unbalanced interferometer; returns scan and histograms."""
    dets = _pair_detectors(cfg)
    s, i = generate_pair_streams(cfg.source, dets, channel, min(dwell, 2.0),
                                 run.seed_for(label, "calibration"), power=power)
    delay = calibrate_delay(s, i, search=(-5000, 5000))
    w = cfg.acquisition.coincidence_window
    dt = int(round(cfg.umi.delay / PS))
    span = dt + 5000
    bin_ps = cfg.acquisition.histogram_bin
    span -= span % bin_ps
    # accidental windows between and beyond the satellite peaks
    acc = tuple(sg * (dt * 2 + k * w) for k in range(5) for sg in (-1, 1))

    def point(k_phase):
        k, phase = k_phase
        umi = replace(cfg.umi, phase=float(phase))
        a, b = franson_transform(cfg.source, dets, channel, dwell, umi,
                                 run.seed_for(label, k), power=power)
        c = coincidences_in_window(a, b, delay, w)
        acc_counts = sum(coincidences_in_window(a, b, delay + o, w) for o in acc) / len(acc)
        hist = cross_correlogram(a, b, bin_ps, (delay - span, delay + span))
        return FringePoint(float(phase), int(c), len(a), len(b), float(dwell)), acc_counts, hist, (a, b)

    out = run.map(point, enumerate(_phase_grid(n_phases)))
    scan = FringeScan(tuple(o[0] for o in out))
    return scan, [o[1] for o in out], [o[2] for o in out], [o[3] for o in out], delay


def _flatness(scan: FringeScan):
    """Largest sinusoidal singles modulation (harmonics 1 and 2) in units of its sigma."""
    report = {}
    for arm in ("singles_a", "singles_b"):
        counts = np.array([getattr(p, arm) for p in scan.points], float)
        dwell = scan.points[0].dwell
        worst = 0.0
        for f in (1, 2):
            x = scan.phases * f
            fit = single_photon_fringe_fit(np.column_stack([x, counts]), dwell=dwell)
            worst = max(worst, fit["v"] / fit.sigmas["v"] if fit.sigmas["v"] > 0 else 0.0)
        mean = counts.mean()
        chi2 = float(np.sum((counts - mean) ** 2 / mean)) / (counts.size - 1)
        report[arm] = {"mean_rate": mean / dwell, "max_modulation_sigma": worst,
                       "chi2_per_dof": chi2, "max_deviation_sigma":
                       float(np.max(np.abs(counts - mean)) / math.sqrt(mean))}
    report["flat"] = all(report[a]["max_modulation_sigma"] < 3.0 for a in ("singles_a", "singles_b"))
    return report


def _visibility(scan, mc_iterations, seed):
    fit = fit_fringe(scan)
    mc = monte_carlo_visibility(scan, mc_iterations, seed)
    return fit, mc


def cmd_franson(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("franson", cfg, out_dir, options)
    sec = cfg.franson
    scan, acc, hists, streams, delay = _franson_scan(cfg, run, sec.channel, sec.power, sec.dwell,
                                                     sec.n_phases, "scan")
    for k, (h, st) in enumerate(zip(hists, streams)):
        h.to_csv(run.path(f"histogram_phase{k:02d}.csv"))
        run.emit(f"tags_phase{k:02d}.qtg", list(st))
    scan.to_csv(run.path("fringe.csv"))
    fit, mc = _visibility(scan, sec.mc_iterations, run.seed_for("monte-carlo"))
    free = fit_fringe(scan, fit_frequency=True)
    subtracted = fit_fringe(scan, accidentals=acc)

    phases = scan.phases
    laser = laser_fringe_counts(phases, sec.laser_rate, sec.laser_visibility,
                                sec.laser_phase_offset, sec.dwell, run.seed_for("laser"))
    run.write_csv("laser_fringe.csv", ["phase_rad", "counts", "dwell_s"],
                  ([p, int(c), sec.dwell] for p, c in zip(phases, laser)))
    lfit = single_photon_fringe_fit(np.column_stack([phases, laser]), fit_frequency=True,
                                    dwell=sec.dwell)
    f1, s1 = lfit["frequency"], lfit.sigmas["frequency"]
    ratio = free.frequency / f1
    ratio_sigma = ratio * math.hypot(free.frequency_sigma / free.frequency, s1 / f1)
    run.write_csv("fringe_accidentals.csv", ["phase_rad", "accidentals"], zip(phases, acc))
    summary = {
        "channel": sec.channel,
        "wavelengths_nm": _wavelengths(cfg, sec.channel),
        "power_mw": sec.power,
        "dwell_s": sec.dwell,
        "delay_ps": delay,
        "visibility": fit.visibility,
        "visibility_fit_sigma": fit.sigma,
        "visibility_mc_mean": mc.visibility,
        "visibility_mc_sigma": mc.sigma,
        "phase_offset": fit.phase_offset,
        "mean_coincidence_rate": fit.mean_rate,
        "visibility_accidental_subtracted": subtracted.visibility,
        "two_photon_frequency": free.frequency,
        "two_photon_frequency_sigma": free.frequency_sigma,
        "laser": lfit.to_dict(),
        "frequency_ratio": ratio,
        "frequency_ratio_sigma": ratio_sigma,
        "singles_flatness": _flatness(scan),
    }
    return run.finish(summary)


# --- hbt -----------------------------------------------------------------------------

def _g2_measurement(cfg, run, channel, power, duration, bin_ps, range_ps, label):
    """Unheralded g2 of the idler through a 50:50 splitter (split before detection)."""
    d1, d2 = cfg.detectors["hbt1"], cfg.detectors["hbt2"]
    _, a1, a2 = generate_heralded_streams(cfg.source, cfg.detectors["signal"], (d1, d2), channel,
                                          duration, run.seed_for(label), power=power)
    hist = cross_correlogram(a1, a2, bin_ps, (-range_ps, range_ps))
    tau, g2 = g2_histogram_normalize(hist, (range_ps // 2, range_ps))
    base = hist.counts.sum() / g2.sum()
    sigma = np.sqrt(np.maximum(hist.counts, 1)) / base
    fit = fit_g2_double_exponential(np.column_stack([tau, g2, sigma]), _combined_jitter_ps(d1, d2))
    return fit, tau, g2, hist, (a1, a2)


def _heralded_measurement(cfg, run, channel, power, duration, label, window=None):
    h, a1, a2 = generate_heralded_streams(cfg.source, cfg.detectors["signal"],
                                          (cfg.detectors["hbt1"], cfg.detectors["hbt2"]),
                                          channel, duration, run.seed_for(label), power=power)
    w = window or cfg.acquisition.coincidence_window
    t1, t2 = calibrate_delay(h, a1), calibrate_delay(h, a2)
    counts = threefold_coincidences(h, a1, a2, w, t1, t2)
    return heralded_g2(counts), counts, (h, a1, a2)


def cmd_hbt(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("hbt", cfg, out_dir, options)
    sec = cfg.hbt
    g2fit, tau, g2, hist, arms = _g2_measurement(cfg, run, sec.channel, sec.g2_power,
                                                 sec.g2_duration, sec.g2_bin, sec.g2_range, "g2")
    run.write_csv("g2.csv", ["tau_ps", "g2", "counts"], zip(tau, g2, hist.counts))
    run.emit("tags_g2.qtg", list(arms))
    model = 1.0 + (g2fit.g2_zero - 1.0) * two_sided_exponential(
        tau - g2fit.delay / PS, g2fit.coherence_time / PS / 2.0,
        _combined_jitter_ps(cfg.detectors["hbt1"], cfg.detectors["hbt2"]))
    run.write_csv("g2_fit.csv", ["tau_ps", "g2_model"], zip(tau, model))

    main, counts, streams = _heralded_measurement(cfg, run, sec.channel, sec.herald_power,
                                                  sec.herald_duration, "herald", sec.threefold_window)
    run.emit("tags_herald.qtg", list(streams))

    def sweep(p):
        res, c, _ = _heralded_measurement(cfg, run, sec.channel, p, sec.sweep_duration, f"sweep{p!r}",
                                         sec.threefold_window)
        return p, res, c

    rows = [[p, r.heralding_rate, r.g2h_zero, r.sigma, c.herald_singles, c.herald_arm1,
             c.herald_arm2, c.triples] for p, r, c in run.map(sweep, sec.sweep_powers)]
    run.write_csv("heralded_sweep.csv", ["power_mw", "heralding_rate", "g2h_zero", "g2h_sigma",
                                         "n_herald", "n_herald_arm1", "n_herald_arm2",
                                         "n_triples"], rows)
    ordered = sorted(rows, key=lambda r: r[1])
    g2h_seq = [r[2] for r in ordered]
    summary = {
        "channel": sec.channel,
        "wavelengths_nm": _wavelengths(cfg, sec.channel),
        "g2": g2fit.to_dict(),
        "g2_tags": len(arms[0]) + len(arms[1]),
        "heralded": {**main.to_dict(), **counts.to_dict(), "power_mw": sec.herald_power},
        "sweep_monotonic": all(x < y for x, y in zip(g2h_seq, g2h_seq[1:])),
    }
    return run.finish(summary)


# --- channel table ---------------------------------------------------------------

TABLE1_HEADER = ["wavelengths_nm", "signal_nm", "idler_nm", "visibility_pct",
                 "visibility_sigma_pct", "g2_zero", "g2_sigma", "g2h_zero", "g2h_sigma",
                 "heralding_rate_khz"]


def cmd_table1(cfg: ExperimentConfig, out_dir, options: RunOptions | None = None):
    run = _Run("table1", cfg, out_dir, options)
    sec = cfg.table1
    sub = run.serial()

    def row(ch):
        g2fit, *_ = _g2_measurement(cfg, sub, ch, sec.g2_power, sec.g2_duration,
                                    cfg.hbt.g2_bin, cfg.hbt.g2_range, f"g2-ch{ch}")
        g2h, _, _ = _heralded_measurement(cfg, sub, ch, sec.herald_power, sec.herald_duration,
                                          f"herald-ch{ch}", sec.threefold_window)
        scan, *_ = _franson_scan(cfg, sub, ch, sec.franson_power, sec.franson_dwell,
                                 sec.n_phases, f"franson-ch{ch}")
        fit, mc = _visibility(scan, sec.mc_iterations, run.seed_for("monte-carlo", ch))
        ls, li = _wavelengths(cfg, ch)
        return ch, [f"{ls:.2f} & {li:.2f}", ls, li, 100 * fit.visibility, 100 * mc.sigma,
                    g2fit.g2_zero, g2fit.sigma, g2h.g2h_zero, g2h.sigma,
                    g2h.heralding_rate / 1e3]

    rows = run.map(row, sec.channels)
    run.write_csv("table1.csv", TABLE1_HEADER, [r for _, r in rows])
    summary = {"rows": [{"channel": ch, **dict(zip(TABLE1_HEADER, r))} for ch, r in rows]}
    return run.finish(summary)


DISPATCH = {
    "dispersion": cmd_dispersion, "pairs": cmd_pairs, "spectrum": cmd_spectrum,
    "multichannel": cmd_multichannel, "franson": cmd_franson, "hbt": cmd_hbt,
    "table1": cmd_table1,
}
