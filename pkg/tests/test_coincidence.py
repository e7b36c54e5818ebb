import numpy as np
import pytest

from ringpairs.coincidence import (
    calibrate_delay,
    car,
    chunked_cross_correlogram,
    coincidences_in_window,
    cross_correlogram,
    g2_histogram_normalize,
    threefold_coincidences,
)
from ringpairs.errors import RangeError, UnsortedStreamError, ZeroAccidentalsError
from ringpairs.tags import TimeTagStream

SPAN = 2_000_000


def _random_tags(rng, n=1000, span=SPAN):
    return np.unique(rng.integers(0, span, n))


def _poisson_stream(rng, rate, duration, label="x"):
    n = rng.poisson(rate * duration)
    return TimeTagStream(label, duration, np.unique(rng.integers(0, int(duration * 1e12), n)))


def _brute_histogram(a, b, bin_width, lo, hi):
    d = (b[None, :] - a[:, None]).ravel()
    d = d[(d >= lo) & (d < hi)]
    return np.bincount((d - lo) // bin_width, minlength=(hi - lo) // bin_width)


def _brute_window(a, b, delay, width):
    d = b[None, :] - a[:, None] - delay
    return int(np.count_nonzero(2 * np.abs(d) <= width))


def _brute_threefold(h, x, y, width, d1, d2):
    m1 = 2 * np.abs(x[None, :] - h[:, None] - d1) <= width
    m2 = 2 * np.abs(y[None, :] - h[:, None] - d2) <= width
    triple = m1[:, :, None] & m2[:, None, :]
    return m1.any(1).sum(), m2.any(1).sum(), triple.any(axis=(1, 2)).sum()


def test_histogram_matches_brute_force_over_seeds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a, b = _random_tags(rng), _random_tags(rng)
        bw = int(rng.integers(1, 500))
        lo = -int(rng.integers(0, 40)) * bw
        hi = lo + int(rng.integers(1, 80)) * bw
        h = cross_correlogram(a, b, bw, (lo, hi))
        np.testing.assert_array_equal(h.counts, _brute_histogram(a, b, bw, lo, hi))
        assert h.total_pairs_counted == h.counts.sum()


def test_window_matches_brute_force_over_seeds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a, b = _random_tags(rng), _random_tags(rng)
        delay = int(rng.integers(-20_000, 20_000))
        width = int(rng.integers(1, 10_000))
        assert coincidences_in_window(a, b, delay, width) == _brute_window(a, b, delay, width)


def test_threefold_matches_brute_force_over_seeds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = 200
        h = _random_tags(rng, n, 200_000)
        x, y = _random_tags(rng, n, 200_000), _random_tags(rng, n, 200_000)
        width = int(rng.integers(1, 1500))
        d1, d2 = (int(v) for v in rng.integers(-500, 500, 2))
        got = threefold_coincidences(h, x, y, width, d1, d2, duration=1.0)
        n1, n2, n12 = _brute_threefold(h, x, y, width, d1, d2)
        assert (got.herald_arm1, got.herald_arm2, got.triples) == (n1, n2, n12)
        assert got.herald_singles == h.size
        assert got.triples <= min(got.herald_arm1, got.herald_arm2) <= got.herald_singles


def test_threefold_empty_arm():
    rng = np.random.default_rng(1)
    h, x = _random_tags(rng), _random_tags(rng)
    got = threefold_coincidences(h, x, np.empty(0, np.int64), 2000, duration=1.0)
    assert got.triples == 0 and got.herald_arm2 == 0


def test_mirror_identity():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a, b = _random_tags(rng), _random_tags(rng)
        # half-open bins mirror onto (-tau - bw, -tau], so compare at unit bins
        ab1 = cross_correlogram(a, b, 1, (-5000, 5001))
        ba1 = cross_correlogram(b, a, 1, (-5000, 5001))
        np.testing.assert_array_equal(ab1.counts, ba1.counts[::-1])


def test_self_correlation_zero_lag():
    rng = np.random.default_rng(3)
    a = _random_tags(rng)
    h = cross_correlogram(a, a, 100, (-1000, 1000))
    assert h.counts[10] >= a.size


def test_window_equals_aligned_bins():
    rng = np.random.default_rng(4)
    a, b = _random_tags(rng), _random_tags(rng)
    # window [delay - 1000, delay + 1000] covers integer lags -1000..1000
    h = cross_correlogram(a, b, 1, (-1000, 1001))
    assert coincidences_in_window(a, b, 0, 2000) == h.counts.sum()


def test_shifted_copy_counts_every_tag():
    a = np.arange(0, 10_000_000, 10_000, dtype=np.int64)
    b = a + 777
    assert coincidences_in_window(a, b, 777, 100) == a.size


def test_chunked_equals_whole():
    rng = np.random.default_rng(5)
    a, b = _random_tags(rng, 5000), _random_tags(rng, 5000)
    whole = cross_correlogram(a, b, 50, (-20_000, 20_000))
    for chunks in (1, 2, 3, 7, 16):
        for workers in (1, 4):
            part = chunked_cross_correlogram(a, b, 50, (-20_000, 20_000), chunks, workers)
            np.testing.assert_array_equal(part.counts, whole.counts)
            assert part.total_pairs_counted == whole.total_pairs_counted


def test_independent_poisson_accidental_level():
    rng = np.random.default_rng(6)
    r1, r2, duration, bw = 2e5, 3e5, 2.0, 1000
    a = _poisson_stream(rng, r1, duration)
    b = _poisson_stream(rng, r2, duration)
    h = cross_correlogram(a, b, bw, (-100_000, 100_000))
    expected = a.rate * b.rate * duration * bw * 1e-12
    mean = h.counts.mean()
    assert abs(mean - expected) < 3 * np.sqrt(expected / h.counts.size)
    per_bin_z = (h.counts - expected) / np.sqrt(expected)
    assert np.abs(per_bin_z).max() < 5


def test_car_independent_streams_is_one():
    rng = np.random.default_rng(7)
    a = _poisson_stream(rng, 3e5, 2.0)
    b = _poisson_stream(rng, 3e5, 2.0)
    res = car(a, b, 0, 2000)
    assert abs(res.car - 1) < 3 * res.car_sigma
    assert res.car_sigma > 0


def test_car_symmetry_exact():
    rng = np.random.default_rng(8)
    a = _poisson_stream(rng, 2e5, 1.0)
    b = TimeTagStream("b", 1.0, np.unique(np.concatenate([
        a.tags[a.tags < 1e12 - 5000] + 3000, _poisson_stream(rng, 2e5, 1.0).tags])))
    offsets = [-20_000, -12_000, 12_000, 16_000, 24_000]
    fwd = car(a, b, 3000, 2000, offsets)
    rev = car(b, a, -3000, 2000, [-o for o in offsets])
    assert fwd.to_dict() | {"peak_delay": 0} == rev.to_dict() | {"peak_delay": 0}
    assert fwd.car > 10


def test_car_ratio_arithmetic():
    # 126 Hz coincidences at CAR 243 imply 0.519 Hz accidentals
    assert 126 / 243 == pytest.approx(0.519, abs=5e-4)


def test_car_empty_stream_raises():
    a = TimeTagStream("a", 1.0, np.arange(0, 10**9, 10**5))
    b = TimeTagStream("b", 1.0, [])
    with pytest.raises(ZeroAccidentalsError):
        car(a, b, 0, 2000)


def test_car_rejects_overlapping_windows():
    a = TimeTagStream("a", 1.0, [1, 2])
    with pytest.raises(ValueError):
        car(a, a, 0, 2000, [1000, 5000])
    with pytest.raises(ValueError):
        car(a, a, 0, 2000, [5000, 6000])


def test_window_counts_linear_in_duration():
    rng = np.random.default_rng(9)
    counts = []
    for duration in (1.0, 2.0):
        a = _poisson_stream(rng, 2e5, duration)
        b = _poisson_stream(rng, 2e5, duration)
        counts.append(coincidences_in_window(a, b, 0, 10_000))
    ratio_sigma = 2 * np.sqrt(1 / counts[0] + 1 / counts[1])
    assert abs(counts[1] / counts[0] - 2) < 3 * ratio_sigma


def test_calibrate_delay_finds_offset():
    rng = np.random.default_rng(10)
    a = _random_tags(rng, 3000, 10**10)
    b = np.unique(np.concatenate([a + 4321, _random_tags(rng, 3000, 10**10)]))
    assert abs(calibrate_delay(a, b) - 4321) <= 25


def test_errors():
    with pytest.raises(UnsortedStreamError):
        cross_correlogram(np.array([3, 1]), np.array([1, 2]), 10, (0, 100))
    with pytest.raises(UnsortedStreamError):
        coincidences_in_window(np.array([1, 2]), np.array([5, 4]), 0, 10)
    with pytest.raises(RangeError):
        cross_correlogram(np.array([1]), np.array([2]), 30, (0, 100))
    with pytest.raises(RangeError):
        cross_correlogram(np.array([1]), np.array([2]), 100, (0, 50))
    with pytest.raises(ValueError):
        coincidences_in_window(np.array([1]), np.array([2]), 0, 0)


def test_g2_normalize_flat_is_one():
    a = np.arange(0, 10**9, 997, dtype=np.int64)
    b = np.arange(0, 10**9, 1009, dtype=np.int64)
    h = cross_correlogram(a, b, 1000, (-50_000, 50_000))
    h.counts[:] = 40
    tau, g2 = g2_histogram_normalize(h, (20_000, 50_000))
    np.testing.assert_array_equal(g2, np.ones_like(g2))
    with pytest.raises(ValueError):
        g2_histogram_normalize(h, (48_000, 50_000))
    h.counts[:] = 0
    with pytest.raises(ZeroAccidentalsError):
        g2_histogram_normalize(h, (20_000, 50_000))
