"""JSON experiment configuration, validation and run manifests.

A config is one JSON document.  Every section is checked before any
computation starts; errors carry the dotted path of the offending key.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import ConfigError, RangeError
from .ring import ChannelPlan, ResonatorSpec, nm_to_hz
from .source import DetectorSpec, RamanPeak, SourceConfig, UmiSpec

DEFAULT_WINDOW_PS = 2000
DEFAULT_BIN_PS = 100


# --- section types ------------------------------------------------------------

@dataclass(frozen=True)
class Acquisition:
    seed: int
    duration: float = 10.0
    coincidence_window: int = DEFAULT_WINDOW_PS
    histogram_bin: int = DEFAULT_BIN_PS
    histogram_range: tuple = (-40_000, 40_000)

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("acquisition.duration", "must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("acquisition.seed", "must be an unsigned 64-bit integer")
        if self.coincidence_window <= 0 or self.histogram_bin <= 0:
            raise ConfigError("acquisition", "window and bin widths must be > 0")
        lo, hi = self.histogram_range
        if hi <= lo or (hi - lo) % self.histogram_bin:
            raise ConfigError("acquisition.histogram_range",
                              "must be increasing and a whole number of bins")


@dataclass(frozen=True)
class DispersionSection:
    mu_min: int = -25
    mu_max: int = 25
    trace_noise: float = 0.003
    n_points: int = 401
    span_fwhm: float = 10.0

    def __post_init__(self):
        if self.mu_max - self.mu_min < 6 or not self.mu_min <= 0 <= self.mu_max:
            raise ConfigError("dispersion", "mode range must span 0 and hold at least 7 modes")
        if self.trace_noise < 0 or self.n_points < 20 or self.span_fwhm <= 0:
            raise ConfigError("dispersion", "trace settings out of range")


@dataclass(frozen=True)
class PairsSection:
    channel: int = 6
    powers: tuple = (0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.45, 1.7)
    duration: float | None = None

    def __post_init__(self):
        if len(set(self.powers)) < 4 or min(self.powers) < 0:
            raise ConfigError("pairs.powers", "need at least 4 distinct non-negative powers")


@dataclass(frozen=True)
class SpectrumSection:
    start_nm: float = 1480.0
    stop_nm: float = 1620.0
    step_nm: float = 0.01
    power: float = 1.1

    def __post_init__(self):
        if not 1480.0 <= self.start_nm < self.stop_nm <= 1620.0:
            raise ConfigError("spectrum", "wavelength grid must lie inside [1480, 1620] nm")
        if not self.step_nm > 0:
            raise ConfigError("spectrum.step_nm", "must be > 0")


@dataclass(frozen=True)
class MultichannelSection:
    channels: tuple = (2, 3, 4, 5, 6, 7, 8)
    power: float = 1.1
    duration: float | None = None


@dataclass(frozen=True)
class FransonSection:
    channel: int = 6
    power: float = 0.488
    n_phases: int = 16
    dwell: float = 15.0
    laser_rate: float = 5.0e4
    laser_visibility: float = 0.98
    laser_phase_offset: float = 0.4
    mc_iterations: int = 1000

    def __post_init__(self):
        if self.n_phases < 8:
            raise ConfigError("franson.n_phases", "need at least 8 phase points")
        if not self.dwell > 0:
            raise ConfigError("franson.dwell", "must be > 0")
        if not 0 <= self.laser_visibility <= 1:
            raise ConfigError("franson.laser_visibility", "must lie in [0, 1]")
        if self.mc_iterations < 10:
            raise ConfigError("franson.mc_iterations", "must be >= 10")


@dataclass(frozen=True)
class HbtSection:
    channel: int = 6
    g2_power: float = 8.0
    g2_duration: float = 10.0
    g2_bin: int = 50
    g2_range: int = 10_000
    herald_power: float = 1.45
    herald_duration: float = 120.0
    sweep_powers: tuple = (1.45, 2.0, 2.8, 4.0)
    sweep_duration: float = 20.0
    threefold_window: int | None = None  # ps; defaults to acquisition.coincidence_window

    def __post_init__(self):
        if self.g2_range % self.g2_bin:
            raise ConfigError("hbt.g2_range", "must be a multiple of hbt.g2_bin")


@dataclass(frozen=True)
class Table1Section:
    channels: tuple = (2, 3, 4, 5, 6, 7, 8)
    g2_power: float = 8.0
    g2_duration: float = 8.0
    herald_power: float = 1.45
    herald_duration: float = 60.0
    franson_power: float = 0.488
    franson_dwell: float = 15.0
    n_phases: int = 16
    mc_iterations: int = 1000
    threefold_window: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    resonator: ResonatorSpec
    source: SourceConfig
    detectors: dict
    umi: UmiSpec
    acquisition: Acquisition
    dispersion: DispersionSection = DispersionSection()
    pairs: PairsSection = PairsSection()
    spectrum: SpectrumSection = SpectrumSection()
    multichannel: MultichannelSection = MultichannelSection()
    franson: FransonSection = FransonSection()
    hbt: HbtSection = HbtSection()
    table1: Table1Section = Table1Section()
    document: dict = field(default_factory=dict, compare=False, repr=False)

    def detector(self, name):
        return self.detectors[name]

    @property
    def hash(self):
        return config_hash(self.document)


# --- parsing ------------------------------------------------------------------

_SECTIONS = {"dispersion": DispersionSection, "pairs": PairsSection,
             "spectrum": SpectrumSection, "multichannel": MultichannelSection,
             "franson": FransonSection, "hbt": HbtSection, "table1": Table1Section}
_DETECTOR_NAMES = ("signal", "idler", "hbt1", "hbt2")


def _prefixed(path, exc):
    inner = exc.path.split(".", 1)[-1] if "." in exc.path else ""
    return ConfigError(f"{path}.{inner}" if inner else path, exc.message)


def _number(value, path, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if integer:
        if float(value) != int(value):
            raise ConfigError(path, "expected an integer")
        return int(value)
    return float(value)


def _coerce(cls, data, path, exclude=()):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in exclude}
    kw = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"{path}.{key}", "unknown key")
        t = fields[key].type
        kind = t if isinstance(t, str) else getattr(t, "__name__", str(t))
        sub = f"{path}.{key}"
        if value is None and "None" in kind:
            kw[key] = None
        elif kind.startswith("tuple"):
            if not isinstance(value, list):
                raise ConfigError(sub, "expected a list")
            kw[key] = tuple(value if not all(isinstance(v, (int, float)) for v in value)
                            else [_number(v, f"{sub}.{i}", isinstance(v, int))
                                  for i, v in enumerate(value)])
        elif kind == "int":
            kw[key] = _number(value, sub, integer=True)
        elif "float" in kind:
            kw[key] = _number(value, sub)
        else:
            kw[key] = value
    try:
        return cls(**kw)
    except ConfigError as exc:
        raise _prefixed(path, exc) from None
    except TypeError as exc:
        raise ConfigError(path, str(exc)) from None


def _resonator(data):
    if not isinstance(data, dict):
        raise ConfigError("resonator", "expected an object")
    data = dict(data)
    if "center_wavelength_nm" in data:
        if "center_frequency" in data:
            raise ConfigError("resonator", "give center_frequency or center_wavelength_nm, not both")
        data["center_frequency"] = float(nm_to_hz(
            _number(data.pop("center_wavelength_nm"), "resonator.center_wavelength_nm")))
    beta2 = data.pop("beta2", None)
    if beta2 is not None and "d2" in data:
        raise ConfigError("resonator", "give d2 or beta2, not both")
    spec = _coerce(ResonatorSpec, data, "resonator")
    if beta2 is not None:
        spec = ResonatorSpec.from_beta2(_number(beta2, "resonator.beta2"),
                                        **{f.name: getattr(spec, f.name)
                                           for f in dataclasses.fields(ResonatorSpec)
                                           if f.name != "d2"})
    return spec


def _channel_plan(data):
    path = "source.channel_plan"
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(data) - {"pump_nm", "width", "signal_nm"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    signal = data.get("signal_nm")
    if not isinstance(signal, dict) or not signal:
        raise ConfigError(f"{path}.signal_nm", "expected a non-empty index -> nm mapping")
    mapping = {}
    for key, lam in signal.items():
        if not str(key).isdigit():
            raise ConfigError(f"{path}.signal_nm.{key}", "channel index must be an integer")
        mapping[int(key)] = _number(lam, f"{path}.signal_nm.{key}")
    width = _number(data.get("width", 100e9), f"{path}.width")
    if not width > 0:
        raise ConfigError(f"{path}.width", "must be > 0")
    try:
        return ChannelPlan.from_signal_wavelengths(
            _number(data.get("pump_nm", 1550.1), f"{path}.pump_nm"), mapping, width)
    except ConfigError as exc:
        raise _prefixed("source", exc) from None


def _source(data, resonator):
    if not isinstance(data, dict):
        raise ConfigError("source", "expected an object")
    data = dict(data)
    peaks = []
    for k, p in enumerate(data.pop("raman_peaks", [])):
        peaks.append(_coerce(RamanPeak, p, f"source.raman_peaks.{k}"))
        if peaks[-1].amplitude < 0 or peaks[-1].fwhm <= 0:
            raise ConfigError(f"source.raman_peaks.{k}", "amplitude >= 0 and fwhm > 0 required")
    kw = {"raman_peaks": tuple(peaks)}
    if "channel_plan" in data:
        kw["channel_plan"] = _channel_plan(data.pop("channel_plan"))
    if data.get("pair_correlation_time") is None:
        data.pop("pair_correlation_time", None)
        kw["pair_correlation_time"] = resonator.photon_lifetime
    src = _coerce(SourceConfig, data, "source", exclude=("raman_peaks", "channel_plan"))
    try:
        return dataclasses.replace(src, **kw)
    except ConfigError as exc:
        raise _prefixed("source", exc) from None


def _check_channels(cfg):
    known = set(cfg.source.channel_plan.indices)
    refs = [("pairs.channel", cfg.pairs.channel), ("franson.channel", cfg.franson.channel),
            ("hbt.channel", cfg.hbt.channel)]
    refs += [(f"multichannel.channels.{i}", c) for i, c in enumerate(cfg.multichannel.channels)]
    refs += [(f"table1.channels.{i}", c) for i, c in enumerate(cfg.table1.channels)]
    for path, c in refs:
        if c not in known:
            raise ConfigError(path, f"channel {c} not in the channel plan {sorted(known)}")


def parse_config(document: dict) -> ExperimentConfig:
    """Validate a config document and build the typed configuration."""
    if not isinstance(document, dict):
        raise ConfigError("$", "config root must be an object")
    allowed = {"resonator", "source", "detectors", "umi", "acquisition", "description",
               *_SECTIONS}
    for key in document:
        if key not in allowed:
            raise ConfigError(key, "unknown section")
    if "acquisition" not in document or "seed" not in document.get("acquisition", {}):
        raise ConfigError("acquisition.seed", "a seed is required")
    resonator = _resonator(document.get("resonator", {}))
    source = _source(document.get("source", {}), resonator)
    det_doc = document.get("detectors", {})
    if not isinstance(det_doc, dict):
        raise ConfigError("detectors", "expected a name -> detector mapping")
    detectors = {name: _coerce(DetectorSpec, spec, f"detectors.{name}")
                 for name, spec in det_doc.items()}
    for name in _DETECTOR_NAMES:
        detectors.setdefault(name, detectors.get("idler", DetectorSpec()))
    umi = _coerce(UmiSpec, document.get("umi", {}), "umi")
    acq = dict(document["acquisition"])
    seed = acq.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("acquisition.seed", "must be an integer")
    acquisition = _coerce(Acquisition, acq, "acquisition")
    sections = {name: _coerce(cls, document.get(name, {}), name)
                for name, cls in _SECTIONS.items()}
    cfg = ExperimentConfig(resonator, source, detectors, umi, acquisition,
                           document=copy.deepcopy(document), **sections)
    _check_channels(cfg)
    if umi.delay <= 10 * source.pair_correlation_time:
        raise ConfigError("umi.delay", "must exceed 10x the pair correlation time")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("$", f"cannot read config: {exc}") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_config(document)


def paper_config_path() -> Path:
    return Path(str(resources.files("ringpairs") / "data" / "paper.json"))


def paper_config() -> ExperimentConfig:
    return load_config(paper_config_path())


def with_overrides(document: dict, **changes) -> dict:
    """Copy of ``document`` with dotted-path overrides applied."""
    out = copy.deepcopy(document)
    for dotted, value in changes.items():
        node = out
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return out


# --- hashing and manifests --------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(document: dict) -> str:
    """sha256 of the canonical (sorted-key) JSON form; stable under key reordering."""
    return hashlib.sha256(canonical_json(document).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    tool_version: str = __version__
    artifacts: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)  # wall-clock only; excluded from comparisons

    def add(self, name, path):
        self.artifacts[name] = str(path)

    def start(self):
        self.runtime["started"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self._t0 = time.perf_counter()

    def stop(self, **extra):
        self.runtime["wall_seconds"] = round(time.perf_counter() - getattr(self, "_t0", 0.0), 3)
        self.runtime["python"] = platform.python_version()
        self.runtime.update(extra)

    def to_dict(self):
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "tool_version": self.tool_version, "artifacts": dict(sorted(self.artifacts.items())),
                "overrides": self.overrides, "runtime": self.runtime}

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def check_channel(cfg: ExperimentConfig, channel: int) -> int:
    if channel not in cfg.source.channel_plan.pairs:
        raise RangeError(f"channel {channel} not in the channel plan")
    return channel
