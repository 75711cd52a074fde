import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamalloc import channel
from beamalloc.channel import ChannelError, LinkBudget

from . import oracles

DEG = math.pi / 180


def test_mainlobe_gain_values():
    assert channel.mainlobe_gain(2 * math.pi, 0.05) == pytest.approx(1.0, rel=1e-15)
    assert channel.mainlobe_gain(10 * DEG, 0.01) == pytest.approx(35.65, rel=1e-12)
    # 120 - 119 * 0.01
    assert channel.mainlobe_gain(3 * DEG, 0.01) == pytest.approx(118.81, rel=1e-12)


@pytest.mark.parametrize("theta", [0.0, -0.1, 7.0])
def test_mainlobe_gain_domain(theta):
    with pytest.raises(ChannelError):
        channel.mainlobe_gain(theta, 0.01)


@settings(max_examples=300)
@given(st.floats(1e-4, 2 * math.pi), st.floats(1e-6, 0.999))
def test_gain_conserves_power(theta, eps):
    g = channel.mainlobe_gain(theta, eps)
    assert g * theta + eps * (2 * math.pi - theta) == pytest.approx(2 * math.pi, rel=1e-12)


def test_gain_decreasing_in_theta():
    thetas = np.linspace(1e-3, 2 * math.pi, 2000)
    for eps in (1e-4, 0.01, 0.5, 0.99):
        g = channel.mainlobe_gain(thetas, eps)
        assert np.all(np.diff(g) < 0)


def test_pathloss_values():
    assert channel.pathloss_db(1, 1, 3.7) == pytest.approx(98.4, abs=1e-12)
    assert channel.pathloss_db(60, 0.1, 2) == pytest.approx(113.963, abs=5e-4)
    assert channel.pathloss_db(60, 1, 2) == pytest.approx(133.963, abs=5e-4)
    with pytest.raises(ChannelError):
        channel.pathloss_db(60, 0.0, 2)


def test_noise_power_values():
    assert channel.noise_power_dbm(-174, 1) == -174
    assert channel.noise_power_dbm(-174, 125e6) == pytest.approx(-93.03, abs=5e-3)
    assert channel.noise_power_dbm(-174, 1e9) == pytest.approx(-84, abs=1e-12)


@given(st.floats(-60, 60))
def test_db_round_trip(db):
    assert channel.linear_to_db(channel.db_to_linear(db)) == pytest.approx(db, rel=1e-9, abs=1e-12)
    assert channel.watt_to_dbm(channel.dbm_to_watt(db)) == pytest.approx(db, rel=1e-9, abs=1e-12)


def test_budget_defaults():
    b = LinkBudget()
    assert b.subband_bandwidth_hz == 125e6
    assert b.subband_power_w == pytest.approx(0.125)
    assert b.subband_bandwidth_hz * b.num_subbands == b.system_bandwidth_hz


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
def test_budget_rejects_large_sidelobe(eps):
    with pytest.raises(ChannelError):
        LinkBudget(sidelobe_level=eps)


def test_estimated_sinr_default_point():
    got = channel.estimated_sinr(50.0, 10 * DEG, LinkBudget(), 6)
    assert got == pytest.approx(oracles.imperfect_sinr(50.0, 10 * DEG), rel=1e-6)


def test_estimated_sinr_single_sector_is_snr():
    b = LinkBudget()
    got = channel.estimated_sinr(40.0, 5 * DEG, b, 1)
    g = channel.mainlobe_gain(5 * DEG, b.sidelobe_level)
    snr = b.subband_power_w * g * g * float(channel.pathloss_linear(40.0, b)) / b.noise_power_w
    assert got == pytest.approx(snr, rel=1e-12)


def test_estimated_sinr_vanishing_sidelobe_limit():
    b = LinkBudget(sidelobe_level=1e-9)
    theta = 15 * DEG
    limit = b.subband_power_w * (2 * math.pi / theta) ** 2 * float(channel.pathloss_linear(70.0, b)) / b.noise_power_w
    assert channel.estimated_sinr(70.0, theta, b, 6) == pytest.approx(limit, rel=1e-6)


def test_min_distance_clamp():
    b = LinkBudget()
    assert channel.estimated_sinr(0.0, 10 * DEG, b, 6) == channel.estimated_sinr(1.0, 10 * DEG, b, 6)


def _full_owner(m_count, n_count, victim, sector):
    owner = np.arange(m_count * n_count).reshape(m_count, n_count) + 100
    owner[sector, :] = victim
    return owner


def test_true_sinr_matches_estimate_at_full_occupancy():
    b = LinkBudget()
    owner = _full_owner(6, 8, 0, 2)
    got = channel.true_sinr(0, 2, 5, owner, 1.0, 50.0, 10 * DEG, b)
    assert got == pytest.approx(channel.estimated_sinr(50.0, 10 * DEG, b, 6), rel=1e-12)


def test_true_sinr_without_interferers_is_faded_snr():
    b = LinkBudget()
    owner = np.full((6, 8), -1)
    owner[0, 3] = 7
    got = channel.true_sinr(7, 0, 3, owner, 0.4, 30.0, 20 * DEG, b)
    snr = channel.estimated_sinr(30.0, 20 * DEG, b, 1)
    assert got == pytest.approx(0.4 * snr, rel=1e-12)


def test_interferer_count_skips_same_user():
    owner = np.full((3, 2), -1)
    owner[0, 0] = 4
    owner[1, 0] = 4
    owner[2, 0] = 9
    assert channel.interferer_count(owner, 4, 0, 0) == 1


def test_doubling_sidelobe_quadruples_interference():
    owner = _full_owner(6, 8, 0, 0)
    res = []
    for eps in (0.01, 0.02):
        b = LinkBudget(sidelobe_level=eps)
        theta = 10 * DEG
        g = channel.mainlobe_gain(theta, eps)
        s = channel.true_sinr(0, 0, 0, owner, 1.3, 60.0, theta, b)
        signal = b.subband_power_w * g * g * 1.3 * float(channel.pathloss_linear(60.0, b))
        res.append(signal / s - b.noise_power_w)
    assert res[1] == pytest.approx(4 * res[0], rel=1e-9)


def test_block_sinrs_matches_scalar():
    b = LinkBudget()
    rng = np.random.default_rng(5)
    k_count = 10
    owner = rng.integers(-1, k_count, size=(6, 8))
    gains = rng.exponential(size=(k_count, 6, 8))
    dist = rng.uniform(1, 100, k_count)
    thetas = np.radians(rng.choice([3, 5, 10, 15, 20, 30], size=6))
    got = channel.block_sinrs(owner, gains, dist, thetas, b)
    for m in range(6):
        for n in range(8):
            k = owner[m, n]
            if k < 0:
                assert np.isnan(got[m, n])
            else:
                ref = channel.true_sinr(k, m, n, owner, gains[k, m, n], dist[k], thetas[m], b)
                assert got[m, n] == pytest.approx(ref, rel=1e-13)


def test_user_rate():
    assert channel.user_rate([], 125e6) == 0.0
    assert channel.user_rate([255, 255], 125e6) == pytest.approx(2e9, rel=1e-15)
    a, c = [3.0, 10.0], [0.5]
    assert channel.user_rate(a + c, 1e6) == pytest.approx(channel.user_rate(a, 1e6) + channel.user_rate(c, 1e6))


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=8), st.floats(0, 10))
def test_user_rate_monotone(sinrs, bump):
    base = channel.user_rate(sinrs, 1e6)
    assert channel.user_rate([sinrs[0] + bump] + sinrs[1:], 1e6) >= base
    assert channel.user_rate(sinrs + [bump], 1e6) >= base


def test_fading_statistics():
    f = channel.sample_fading(np.random.default_rng(2024), (1000, 10, 100))
    p = f.power_gain
    assert p.min() >= 0
    assert p.mean() == pytest.approx(1.0, abs=0.01)
    assert np.mean(p > 1) == pytest.approx(math.exp(-1), abs=0.005)


def test_fading_deterministic():
    a = channel.sample_fading(np.random.default_rng(9), (4, 6, 8)).h
    b = channel.sample_fading(np.random.default_rng(9), (4, 6, 8)).h
    assert np.array_equal(a, b)
