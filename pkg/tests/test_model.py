import json
import math

import numpy as np
import pytest

from bacnoma.model import (
    Allocation,
    ChannelRealization,
    ConfigError,
    ScenarioConfig,
    average_sum_rate,
    dbm_to_watts,
    downlink_rate,
    epsilon0,
    two_device_scenario,
    instantaneous_sum_rate,
    rate_report,
    sample_channels,
    sinr_scale,
    watts_to_dbm,
)

SIGMA2 = 3.981071705534969e-13


def test_dbm_conversions():
    assert dbm_to_watts(20.0) == pytest.approx(0.1, rel=1e-15)
    assert dbm_to_watts(-94.0) == pytest.approx(SIGMA2, rel=1e-14)
    assert watts_to_dbm(1.0) == pytest.approx(30.0)
    np.testing.assert_allclose(watts_to_dbm(dbm_to_watts(np.array([-100.0, 0.0, 43.0]))), [-100.0, 0.0, 43.0])
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)


def test_epsilon0():
    assert epsilon0(1.0) == 1.0
    assert epsilon0(3.0) == 7.0
    with pytest.raises(ValueError):
        epsilon0(-0.1)


def test_two_device_gains():
    cfg = two_device_scenario()
    ch = sample_channels(cfg, np.random.default_rng(0))
    assert ch.h0_sq == pytest.approx(1 / 27, rel=1e-15)
    np.testing.assert_allclose(ch.h_sq, [0.125, 0.125], rtol=1e-15)
    np.testing.assert_allclose(ch.g_sq, [0.008, 1.0], rtol=1e-15)
    assert ch.hsi_sq == 1.0
    assert cfg.sigma2 == pytest.approx(SIGMA2, rel=1e-14)
    assert cfg.p_max == pytest.approx(0.1, rel=1e-14)


def test_fading_mean_is_unity():
    # A single far device at distance 1 from both nodes: gain equals the fade.
    cfg = ScenarioConfig(M=1, bs_position=(0, 0), user_position=(1, 0), device_positions=((0.5, math.sqrt(0.75)),))
    rng = np.random.default_rng(11)
    fades = np.array([sample_channels(cfg, rng).hsi_sq for _ in range(20000)])
    assert 0.97 <= fades.mean() <= 1.03
    # Vectorized check with a larger sample of the same law.
    z = (rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)) / math.sqrt(2)
    assert 0.98 <= np.mean(np.abs(z) ** 2) <= 1.02


def test_same_seed_same_draw():
    cfg = ScenarioConfig(M=5)
    a = sample_channels(cfg, np.random.default_rng(3))
    b = sample_channels(cfg, np.random.default_rng(3))
    assert a.h0_sq == b.h0_sq
    assert np.array_equal(a.h_sq, b.h_sq) and np.array_equal(a.g_sq, b.g_sq)


def test_uniform_placement_inside_square():
    cfg = ScenarioConfig(M=50, fading=False, square_edge=2.0)
    ch = sample_channels(cfg, np.random.default_rng(1))
    # Distances to the BS at the centre are at most sqrt(2).
    assert np.all(ch.h_sq >= math.sqrt(2) ** -3 * (1 - 1e-12))


def test_colocated_device_rejected():
    cfg = ScenarioConfig(M=1, device_positions=((0.0, 0.0),), fading=False)
    with pytest.raises(ConfigError):
        sample_channels(cfg, np.random.default_rng(0))


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelRealization(1.0, [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        ChannelRealization(-1.0, [1.0], [1.0])
    ch = ChannelRealization(1.0, [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    sub = ch.subset([2])
    assert sub.M == 1 and sub.h_sq[0] == 3.0 and sub.g_sq[0] == 6.0


def test_rates_on_two_device_instance():
    cfg = two_device_scenario()
    ch = sample_channels(cfg, np.random.default_rng(0))
    # High-SNR eta2 ignores the noise term, so the QoS constraint is met to ~1e-10.
    a = Allocation(0.1, [1.0, (1 / 27 - 0.001) / 0.125])
    assert downlink_rate(ch, a, cfg.sigma2) == pytest.approx(1.0, abs=1e-9)
    assert average_sum_rate(ch, a, cfg.alpha, cfg.sigma2) == pytest.approx(1.94069002, rel=1e-8)
    rep = rate_report(ch, a, cfg.alpha, cfg.sigma2)
    assert rep.downlink_rate == pytest.approx(1.0, abs=1e-9)


def test_rate_properties():
    ch = ChannelRealization(0.04, [0.1, 0.02], [0.3, 0.5], 0.7)
    zero = Allocation(0.1, [0.0, 0.0])
    assert average_sum_rate(ch, zero, 0.01, SIGMA2) == 0.0
    lo = Allocation(0.1, [0.2, 0.2])
    hi = Allocation(0.1, [0.4, 0.2])
    assert average_sum_rate(ch, hi, 0.01, SIGMA2) > average_sum_rate(ch, lo, 0.01, SIGMA2)
    assert downlink_rate(ch, hi, SIGMA2) < downlink_rate(ch, lo, SIGMA2)
    # More self-interference lowers the uplink rate.
    assert average_sum_rate(ch, hi, 0.1, SIGMA2) < average_sum_rate(ch, hi, 0.01, SIGMA2)
    # Jensen: the average over the excitation is below the rate at its mean.
    assert average_sum_rate(ch, hi, 0.01, SIGMA2) < instantaneous_sum_rate(ch, hi, 1.0, 0.01, SIGMA2)


def test_monte_carlo_matches_average():
    rng = np.random.default_rng(5)
    cfg = ScenarioConfig(M=3)
    for _ in range(3):
        ch = sample_channels(cfg, rng)
        a = Allocation(rng.uniform(0.01, 0.1), rng.uniform(0, 1, 3))
        s0 = rng.exponential(size=200_000)
        mc = instantaneous_sum_rate(ch, a, s0, cfg.alpha, cfg.sigma2).mean()
        assert mc == pytest.approx(average_sum_rate(ch, a, cfg.alpha, cfg.sigma2), rel=0.005)


def test_sinr_scale_formula():
    ch = ChannelRealization(1.0, [2.0], [1.0], 3.0)
    a = Allocation(0.5, [0.5])
    assert sinr_scale(ch, a, 0.1, 0.01) == pytest.approx(0.25 * 4 / (0.1 * 0.5 * 3 + 0.01))


def test_allocation_validity():
    assert Allocation(0.1, [0.0, 1.0]).is_valid(0.1)
    assert not Allocation(0.2, [0.5]).is_valid(0.1)
    assert not Allocation(0.1, [1.5]).is_valid(0.1)


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(M=0)
    with pytest.raises(ConfigError):
        ScenarioConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(M=2, device_positions=((1, 1),))
    with pytest.raises(ConfigError):
        two_device_scenario().replace(M=3)


def test_config_round_trip(tmp_path):
    for cfg in (two_device_scenario(), ScenarioConfig(M=4, alpha=0.2, seed=9)):
        path = tmp_path / "cfg.json"
        cfg.dump(path)
        assert ScenarioConfig.load(path) == cfg


def test_config_dbm_fields(tmp_path):
    d = two_device_scenario().to_dict()
    del d["sigma2"], d["p_max"]
    d["sigma2_dbm"] = -94
    d["p_max_dbm"] = 20
    cfg = ScenarioConfig.from_dict(d)
    assert cfg.p_max == pytest.approx(0.1)


def test_config_missing_field(tmp_path):
    d = two_device_scenario().to_dict()
    del d["p_max"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ConfigError, match="p_max"):
        ScenarioConfig.load(path)


def test_config_not_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(path)
