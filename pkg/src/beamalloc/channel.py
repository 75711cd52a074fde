"""Link budget, flat-top beam gains, SINR and achievable rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_DISTANCE_M = 1.0


class ChannelError(ValueError):
    pass


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(dbm):
    return db_to_linear(np.asarray(dbm, dtype=float) - 30.0)


def watt_to_dbm(w):
    return linear_to_db(w) + 30.0


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm_per_sector: float = 30.0
    noise_density_dbm_hz: float = -174.0
    system_bandwidth_hz: float = 1e9
    num_subbands: int = 8
    carrier_freq_ghz: float = 60.0
    pathloss_exp: float = 2.0
    sidelobe_level: float = 0.01

    def __post_init__(self):
        if self.num_subbands < 1:
            raise ChannelError("num_subbands must be >= 1")
        if not self.system_bandwidth_hz > 0:
            raise ChannelError("system_bandwidth_hz must be positive")
        if not self.carrier_freq_ghz > 0:
            raise ChannelError("carrier_freq_ghz must be positive")
        if not 0 < self.sidelobe_level < 0.1:
            raise ChannelError(f"sidelobe_level must lie in (0, 0.1), got {self.sidelobe_level}")
        for name in ("tx_power_dbm_per_sector", "noise_density_dbm_hz", "pathloss_exp"):
            if not math.isfinite(getattr(self, name)):
                raise ChannelError(f"{name} must be finite")

    @property
    def subband_bandwidth_hz(self) -> float:
        return self.system_bandwidth_hz / self.num_subbands

    @property
    def subband_power_w(self) -> float:
        """Equal split of the sector power over its subbands."""
        return float(dbm_to_watt(self.tx_power_dbm_per_sector)) / self.num_subbands

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watt(noise_power_dbm(self.noise_density_dbm_hz, self.subband_bandwidth_hz)))


def mainlobe_gain(theta, eps):
    """Flat-top mainlobe gain ``(2*pi - (2*pi - theta)*eps) / theta``.

    Works elementwise on arrays. The sidelobe gain is ``eps`` itself.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta > 2 * math.pi):
        raise ChannelError("beamwidth must lie in (0, 2*pi]")
    if not np.all((np.asarray(eps) > 0) & (np.asarray(eps) < 1)):
        raise ChannelError("sidelobe level must lie in (0, 1)")
    g = (2 * math.pi - (2 * math.pi - theta) * eps) / theta
    return float(g) if g.ndim == 0 else g


def pathloss_db(f_ghz, dist_km, alpha):
    dist_km = np.asarray(dist_km, dtype=float)
    if np.any(dist_km <= 0):
        raise ChannelError("distance must be positive")
    if np.any(np.asarray(f_ghz) <= 0):
        raise ChannelError("carrier frequency must be positive")
    pl = 98.4 + 20.0 * np.log10(f_ghz) + 10.0 * alpha * np.log10(dist_km)
    return float(pl) if np.ndim(pl) == 0 else pl


def noise_power_dbm(n0_dbm_hz, w_hz):
    if np.any(np.asarray(w_hz) <= 0):
        raise ChannelError("bandwidth must be positive")
    p = n0_dbm_hz + 10.0 * np.log10(w_hz)
    return float(p) if np.ndim(p) == 0 else p


def pathloss_linear(distance_m, budget: LinkBudget):
    """Linear channel gain ``10**(-PL/10)``; distances clamp at 1 m."""
    d_km = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M) / 1000.0
    return db_to_linear(-pathloss_db(budget.carrier_freq_ghz, d_km, budget.pathloss_exp))


def _sinr(distance_m, theta, power_gain, n_interferers, budget: LinkBudget):
    p = budget.subband_power_w
    g = mainlobe_gain(theta, budget.sidelobe_level)
    rx = p * np.asarray(power_gain) * pathloss_linear(distance_m, budget)
    interference = np.asarray(n_interferers) * rx * budget.sidelobe_level**2
    return g * g * rx / (interference + budget.noise_power_w)


def estimated_sinr(distance_m, theta, budget: LinkBudget, num_sectors: int):
    """Fading-free SINR from a reported distance, assuming every other sector
    occupies the subband (``num_sectors - 1`` sidelobe interferers)."""
    out = _sinr(distance_m, theta, 1.0, num_sectors - 1, budget)
    return float(out) if np.ndim(out) == 0 else out


def interferer_count(owner: np.ndarray, user: int, sector: int, subband: int) -> int:
    """Other sectors transmitting on ``subband`` to someone other than ``user``.

    ``owner`` is the (M, N) table of scheduled users, -1 where idle; sector
    and subband are 0-based here.
    """
    col = owner[:, subband]
    mask = (col >= 0) & (col != user)
    mask[sector] = False
    return int(mask.sum())


def true_sinr(
    user: int,
    sector: int,
    subband: int,
    owner: np.ndarray,
    power_gain: float,
    distance_m: float,
    theta: float,
    budget: LinkBudget,
) -> float:
    """Realised SINR of one block.

    The interference terms carry the victim's own fading coefficient and
    distance, as in the system model; ``power_gain`` is ``|h_{k,m,n}|**2``.
    """
    n_int = interferer_count(owner, user, sector, subband)
    return float(_sinr(distance_m, theta, power_gain, n_int, budget))


def block_sinrs(
    owner: np.ndarray,
    power_gain: np.ndarray,
    distance_m: np.ndarray,
    thetas: np.ndarray,
    budget: LinkBudget,
) -> np.ndarray:
    """Realised SINR of every scheduled block, NaN where idle.

    ``power_gain`` has shape (K, M, N), ``distance_m`` (K,), ``thetas`` (M,).
    """
    m_count, n_count = owner.shape
    out = np.full(owner.shape, np.nan)
    busy = owner >= 0
    if not busy.any():
        return out
    ms, ns = np.nonzero(busy)
    ks = owner[ms, ns]
    # sidelobe interferers: busy blocks in other sectors on the same subband
    # whose user differs from the victim
    same_sub = owner[:, ns].T  # (blocks, M)
    other = (same_sub >= 0) & (same_sub != ks[:, None])
    other[np.arange(len(ms)), ms] = False
    n_int = other.sum(axis=1)
    out[ms, ns] = _sinr(distance_m[ks], thetas[ms], power_gain[ks, ms, ns], n_int, budget)
    return out


def user_rate(sinrs, w_hz: float) -> float:
    """Sum of ``W*log2(1+sinr)`` over a user's allocated blocks."""
    s = np.asarray(sinrs, dtype=float)
    if s.size == 0:
        return 0.0
    if np.any(s < 0):
        raise ChannelError("SINR must be nonnegative")
    return w_hz * math.fsum(np.log2(1.0 + s).tolist())


@dataclass(frozen=True)
class FadingRealization:
    h: np.ndarray

    @property
    def power_gain(self) -> np.ndarray:
        return np.abs(self.h) ** 2


def sample_fading(rng: np.random.Generator, dims) -> FadingRealization:
    """i.i.d. CN(0, 1) coefficients of shape ``dims``."""
    re = rng.standard_normal(dims)
    im = rng.standard_normal(dims)
    return FadingRealization((re + 1j * im) / math.sqrt(2.0))
