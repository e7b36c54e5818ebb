import numpy as np
import pytest

from ringpairs.errors import ConfigError, FitError, NoDipFoundError, RangeError
from ringpairs.ring import (
    C, ChannelPlan, ResonatorSpec, TABLE_I_SIGNAL_NM, channel_pair, default_channel_plan,
    fit_dispersion, fit_resonance, hz_to_nm, integrated_dispersion, read_resonances_csv,
    read_trace_csv, resonance_grid, synthetic_trace, transmission, write_resonances_csv,
    write_trace_csv,
)

NU0 = C / 1550.1e-9


def paper_spec(**kw):
    return ResonatorSpec.from_beta2(-8.26e-27, **kw)


def test_pump_mode_is_exact():
    grid = resonance_grid(paper_spec(), -3, 3)
    assert grid[3].mode_index == 0
    assert grid[3].frequency == NU0
    assert grid[3].frequency == pytest.approx(193.402e12, abs=1e9)


def test_fsr_spacing_without_dispersion():
    grid = resonance_grid(ResonatorSpec(), 0, 1)
    assert grid[1].frequency - grid[0].frequency == pytest.approx(330e9, rel=1e-12)


def test_integrated_dispersion_polynomial():
    spec = ResonatorSpec(d2=4.4e6, d3=-150.0)
    mu = np.arange(-20, 21)
    nu = np.array([r.frequency for r in resonance_grid(spec, -20, 20)])
    dint = 2 * np.pi * (nu - spec.center_frequency) - spec.d1 * mu
    expected = spec.d2 * mu ** 2 / 2 + spec.d3 * mu ** 3 / 6
    # absolute frequencies are ~1e15 rad/s, so machine precision is ~0.2 rad/s
    np.testing.assert_allclose(dint, expected, atol=1.0)
    np.testing.assert_allclose(integrated_dispersion(spec, mu), expected, atol=1.0)


def test_grid_rejects_non_positive_frequencies():
    with pytest.raises(RangeError):
        resonance_grid(ResonatorSpec(), -1000, 0)


def test_beta2_d2_relation():
    spec = paper_spec()
    assert spec.beta2 == pytest.approx(-8.26e-27, rel=1e-12)
    assert spec.d2 / (2 * np.pi) == pytest.approx(703e3, rel=1e-3)
    assert spec.d2 > 0  # anomalous


def test_linewidth_and_lifetime():
    spec = ResonatorSpec()
    assert spec.linewidth == pytest.approx(449.8e6, rel=1e-3)
    assert spec.photon_lifetime == pytest.approx(0.3539e-9, rel=1e-3)


def test_transmission_on_and_off_resonance():
    spec = ResonatorSpec(extinction=1.0)
    assert transmission(spec, NU0) == pytest.approx(0.0, abs=1e-12)
    half = ResonatorSpec(extinction=0.8)
    assert transmission(half, NU0 + half.linewidth / 2) == pytest.approx(0.6, rel=1e-9)
    assert transmission(spec, NU0 + 165e9) > 0.999


def test_transmission_bounded_and_symmetric(rng):
    spec = paper_spec()
    nu = NU0 + rng.uniform(-5e12, 5e12, 2000)
    t = transmission(spec, nu)
    assert np.all((t >= 0) & (t <= 1))
    c = float(spec.mode_frequency(4))
    d = rng.uniform(0, 5e9, 50)
    np.testing.assert_allclose(transmission(spec, c + d), transmission(spec, c - d), rtol=1e-12)


def test_fit_resonance_noiseless():
    spec = paper_spec()
    res = fit_resonance(synthetic_trace(spec, 3))
    assert res["q_loaded"] == pytest.approx(4.3e5, rel=1e-3)
    assert res["center_frequency"] == pytest.approx(float(spec.mode_frequency(3)), abs=1e3)
    assert res["extinction"] == pytest.approx(0.9, rel=1e-6)


def test_fit_resonance_noisy_recovery():
    spec = paper_spec()
    good = covered = 0
    for seed in range(100):
        trace = synthetic_trace(spec, 0, noise=0.01, rng=np.random.default_rng(seed))
        res = fit_resonance(trace)
        good += abs(res["q_loaded"] / 4.3e5 - 1) < 0.02
        covered += abs(res["q_loaded"] - 4.3e5) < 2 * res.sigmas["q_loaded"]
    assert good == 100
    assert covered >= 90


def test_fit_resonance_rejects_flat_trace():
    nu = NU0 + np.linspace(-2e9, 2e9, 200)
    with pytest.raises(NoDipFoundError):
        fit_resonance(np.column_stack([nu, np.ones_like(nu)]))


def test_fit_resonance_rejects_short_trace():
    with pytest.raises(ValueError):
        fit_resonance(synthetic_trace(paper_spec(), 0, n_points=10))


def test_fit_resonance_is_deterministic():
    trace = synthetic_trace(paper_spec(), 2, noise=0.01, rng=np.random.default_rng(1))
    assert fit_resonance(trace).to_dict() == fit_resonance(trace.copy()).to_dict()


def test_fit_dispersion_recovers_paper_beta2():
    grid = resonance_grid(paper_spec(), -25, 25)
    res = fit_dispersion([(r.mode_index, r.frequency) for r in grid])
    assert res["beta2"] == pytest.approx(-8.26e-27, rel=1e-6)
    assert res["d1"] == pytest.approx(2 * np.pi * 330e9, rel=1e-9)


def test_fit_dispersion_equidistant_comb():
    grid = resonance_grid(ResonatorSpec(), -10, 10)
    res = fit_dispersion([(r.mode_index, r.frequency) for r in grid])
    assert abs(res["d2"]) < 1.0
    assert abs(res["d3"]) < 1.0
    assert abs(res["beta2"]) < 1e-32


def test_fit_dispersion_jitter_coverage():
    spec = ResonatorSpec(d2=4.4e6, d3=2.0e3)
    mu = np.arange(-20, 21)
    nu = spec.mode_frequency(mu)
    hits = 0
    for seed in range(200):
        noisy = nu + np.random.default_rng(seed).normal(0, 1e6, mu.size)
        res = fit_dispersion(np.column_stack([mu, noisy]))
        hits += all(abs(res[k] - getattr(spec, k)) < 3 * res.sigmas[k] for k in ("d1", "d2", "d3"))
    assert hits >= 190


def test_fit_dispersion_rank_deficient():
    with pytest.raises(FitError):
        fit_dispersion([(0, NU0), (1, NU0 + 330e9), (2, NU0 + 660e9)] * 3)


def test_channel_pairs_follow_table_rows():
    plan = default_channel_plan()
    s, i = channel_pair(plan, 2)
    assert hz_to_nm(s.center) == pytest.approx(1544.80, abs=1e-9)
    assert hz_to_nm(i.center) == pytest.approx(1555.44, abs=0.005)
    s, i = channel_pair(plan, 6)
    assert hz_to_nm(s.center) == pytest.approx(1534.30, abs=1e-9)
    assert hz_to_nm(i.center) == pytest.approx(1566.23, abs=0.005)
    with pytest.raises(RangeError):
        channel_pair(plan, 1)
    with pytest.raises(RangeError):
        channel_pair(plan, 9)


def test_channel_plan_energy_conservation():
    plan = default_channel_plan()
    for idx in TABLE_I_SIGNAL_NM:
        s, i = channel_pair(plan, idx)
        assert abs(s.center + i.center - 2 * plan.pump.center) <= NU0 / 4.3e5


def test_channel_plan_rejects_unbalanced_pair():
    plan = default_channel_plan()
    s, i = plan.pairs[3]
    bad = type(i)(i.center + 2e9, i.width)
    with pytest.raises(ConfigError):
        ChannelPlan(plan.pump, {3: (s, bad)})


def test_csv_round_trips(tmp_path):
    spec = paper_spec()
    trace = synthetic_trace(spec, 1, noise=0.01, rng=np.random.default_rng(3))
    write_trace_csv(tmp_path / "t.csv", trace)
    np.testing.assert_array_equal(read_trace_csv(tmp_path / "t.csv"), trace)
    grid = resonance_grid(spec, -3, 3)
    write_resonances_csv(tmp_path / "r.csv", [(r.mode_index, r.frequency) for r in grid])
    back = read_resonances_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back[:, 1], [r.frequency for r in grid])
