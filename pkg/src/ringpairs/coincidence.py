"""Exact correlation of sorted time-tag streams.

Every counter here is a linear multi-pointer sweep over strictly increasing
int64 picosecond arrays; no approximation, no greedy one-to-one matching.
Window semantics: a pair ``(t_a, t_b)`` is coincident at ``delay`` and
``width`` when ``|t_b - t_a - delay| <= width / 2``.  Histogram bins are
half-open ``[tau, tau + bin_width)``.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .counting import poisson_sigma
from .errors import RangeError, ZeroAccidentalsError
from .tags import PS, TimeTagStream, check_sorted


@numba.njit(cache=True, nogil=True)
def _histogram_kernel(a, b, tau_min, tau_max, bin_width, counts):
    nb = b.size
    lo = 0
    total = 0
    for i in range(a.size):
        ta = a[i]
        while lo < nb and b[lo] - ta < tau_min:
            lo += 1
        j = lo
        while j < nb:
            d = b[j] - ta
            if d >= tau_max:
                break
            counts[(d - tau_min) // bin_width] += 1
            total += 1
            j += 1
    return total


@numba.njit(cache=True, nogil=True)
def _window_kernel(a, b, delay, width):
    # |2 (tb - ta - delay)| <= width keeps odd widths exact in integers
    nb = b.size
    lo = 0
    n = 0
    for i in range(a.size):
        ta = a[i]
        while lo < nb and 2 * (b[lo] - ta - delay) < -width:
            lo += 1
        j = lo
        while j < nb and 2 * (b[j] - ta - delay) <= width:
            n += 1
            j += 1
    return n


@numba.njit(cache=True, nogil=True)
def _partner_flags(h, arm, delay, width, out):
    n = arm.size
    lo = 0
    for i in range(h.size):
        th = h[i]
        while lo < n and 2 * (arm[lo] - th - delay) < -width:
            lo += 1
        out[i] = lo < n and 2 * (arm[lo] - th - delay) <= width


@numba.njit(cache=True, nogil=True)
def _is_strictly_increasing(x):
    for i in range(1, x.size):
        if x[i] <= x[i - 1]:
            return False
    return True


def _tags(x):
    if isinstance(x, TimeTagStream):
        return x.tags, x.duration
    arr = np.ascontiguousarray(x, dtype=np.int64)
    if not _is_strictly_increasing(arr):
        check_sorted(arr)
    return arr, None


@dataclass
class CoincidenceHistogram:
    bin_width: int
    range: tuple[int, int]
    counts: np.ndarray
    total_pairs_counted: int
    acquisition_duration: float | None = None

    def __post_init__(self):
        span = self.range[1] - self.range[0]
        if span % self.bin_width or self.counts.size != span // self.bin_width:
            raise RangeError("histogram span must be a whole number of bins")

    @property
    def bin_edges(self):
        return self.range[0] + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def bin_centers(self):
        return self.range[0] + self.bin_width * (np.arange(self.counts.size) + 0.5)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center_ps", "counts"])
            for c, n in zip(self.bin_centers.tolist(), self.counts.tolist()):
                w.writerow([repr(c), n])


def cross_correlogram(a, b, bin_width: int, range: tuple[int, int]) -> CoincidenceHistogram:
    """Histogram of ``t_b - t_a`` over all tag pairs falling inside ``range``."""
    ta, dur = _tags(a)
    tb, _ = _tags(b)
    tau_min, tau_max = int(range[0]), int(range[1])
    bin_width = int(bin_width)
    if bin_width <= 0 or tau_max - tau_min < bin_width:
        raise RangeError("range must span at least one bin")
    if (tau_max - tau_min) % bin_width:
        raise RangeError("range span is not a multiple of bin_width")
    counts = np.zeros((tau_max - tau_min) // bin_width, dtype=np.int64)
    total = _histogram_kernel(ta, tb, tau_min, tau_max, bin_width, counts)
    return CoincidenceHistogram(bin_width, (tau_min, tau_max), counts, int(total), dur)


def chunked_cross_correlogram(a, b, bin_width, range, n_chunks=4, workers=1):
    """Same result as :func:`cross_correlogram`, evaluated over time chunks of ``a``.

    Each chunk of ``a`` is paired with the slice of ``b`` reachable within
    ``range``; integer sums are reduced in chunk order.
    """
    ta, dur = _tags(a)
    tb, _ = _tags(b)
    tau_min, tau_max = int(range[0]), int(range[1])
    if ta.size == 0:
        return cross_correlogram(ta, tb, bin_width, range)
    cuts = np.linspace(ta[0], ta[-1] + 1, n_chunks + 1).astype(np.int64)
    jobs = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        sa = ta[np.searchsorted(ta, lo):np.searchsorted(ta, hi)]
        sb = tb[np.searchsorted(tb, lo + tau_min):np.searchsorted(tb, hi + tau_max)]
        jobs.append((sa, sb))
    run = lambda job: cross_correlogram(job[0], job[1], bin_width, range)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    counts = np.sum([p.counts for p in parts], axis=0)
    total = sum(p.total_pairs_counted for p in parts)
    return CoincidenceHistogram(int(bin_width), (tau_min, tau_max), counts, total, dur)


def coincidences_in_window(a, b, delay: int, width: int) -> int:
    if width <= 0:
        raise ValueError("width must be positive")
    ta, _ = _tags(a)
    tb, _ = _tags(b)
    return int(_window_kernel(ta, tb, int(delay), int(width)))


def calibrate_delay(a, b, search=(-20_000, 20_000), bin_width=50) -> int:
    """Arg-max bin center of a coarse correlogram (integer ps)."""
    h = cross_correlogram(a, b, bin_width, search)
    if h.total_pairs_counted == 0:
        return 0
    return int(round(h.bin_centers[int(np.argmax(h.counts))]))


DEFAULT_ACCIDENTAL_OFFSETS = tuple(
    s * k * 1000 for k in range(10, 30, 2) for s in (-1, 1)
)


@dataclass
class CarResult:
    coincidence_rate: float
    accidental_rate: float
    car: float
    car_sigma: float
    window_width: int
    peak_delay: int
    coincidences: int = 0
    accidentals_total: int = 0
    n_accidental_windows: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def car(a, b, peak_delay: int, window: int, accidental_offsets=DEFAULT_ACCIDENTAL_OFFSETS,
        duration: float | None = None) -> CarResult:
    """Coincidence-to-accidental ratio from one peak window and K offset windows."""
    offsets = sorted(int(o) for o in accidental_offsets)
    if not offsets:
        raise ValueError("need at least one accidental window")
    if any(abs(o) < window for o in offsets):
        raise ValueError("accidental windows overlap the peak window")
    if any(o2 - o1 < window for o1, o2 in zip(offsets, offsets[1:])):
        raise ValueError("accidental windows overlap each other")
    if duration is None:
        duration = _duration(a, b)
    c = coincidences_in_window(a, b, peak_delay, window)
    acc = [coincidences_in_window(a, b, peak_delay + o, window) for o in offsets]
    total = int(sum(acc))
    k = len(offsets)
    if total == 0:
        raise ZeroAccidentalsError(c)
    mean_acc = total / k
    ratio = c / mean_acc
    sigma = np.hypot(poisson_sigma(c) / mean_acc, c * poisson_sigma(total) / k / mean_acc ** 2)
    return CarResult(
        coincidence_rate=c / duration,
        accidental_rate=mean_acc / duration,
        car=float(ratio),
        car_sigma=float(sigma),
        window_width=int(window),
        peak_delay=int(peak_delay),
        coincidences=int(c),
        accidentals_total=total,
        n_accidental_windows=k,
    )


def _duration(*streams):
    for s in streams:
        if isinstance(s, TimeTagStream):
            return s.duration
    raise ValueError("duration required when passing raw arrays")


@dataclass
class ThreefoldCounts:
    herald_singles: int
    herald_arm1: int
    herald_arm2: int
    triples: int
    window_width: int
    duration: float

    def to_dict(self):
        return dict(self.__dict__)


def threefold_coincidences(herald, arm1, arm2, window: int, delay1: int = 0, delay2: int = 0,
                           duration: float | None = None) -> ThreefoldCounts:
    """Herald-based two- and three-fold counts.

    ``herald_arm1`` counts heralds with at least one arm-1 partner inside the
    window centered on ``delay1``; ``triples`` counts heralds with partners in
    both arms.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    th, dur = _tags(herald)
    t1, _ = _tags(arm1)
    t2, _ = _tags(arm2)
    f1 = np.zeros(th.size, dtype=np.bool_)
    f2 = np.zeros(th.size, dtype=np.bool_)
    _partner_flags(th, t1, int(delay1), int(window), f1)
    _partner_flags(th, t2, int(delay2), int(window), f2)
    if duration is None:
        duration = dur if dur is not None else _duration(arm1, arm2)
    return ThreefoldCounts(int(th.size), int(f1.sum()), int(f2.sum()), int((f1 & f2).sum()),
                           int(window), float(duration))


def g2_histogram_normalize(h: CoincidenceHistogram, baseline_region: tuple[int, int]):
    """Normalize a correlogram by its mean over ``baseline_region`` (|tau| band).

    The baseline is taken over bins whose centers satisfy
    ``lo <= |tau| <= hi``; returns ``(tau_ps, g2)`` arrays.
    """
    lo, hi = baseline_region
    centers = h.bin_centers
    mask = (np.abs(centers) >= lo) & (np.abs(centers) <= hi)
    if mask.sum() < 10:
        raise ValueError("baseline region must contain at least 10 bins")
    base = h.counts[mask].mean()
    if base <= 0:
        raise ZeroAccidentalsError(int(h.counts.sum()))
    return centers, h.counts / base
