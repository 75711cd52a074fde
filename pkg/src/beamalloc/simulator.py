"""Seeded Monte Carlo campaigns over user counts and allocation algorithms.

Each frame draws estimated user positions, allocates on them, then realises
true positions and Rayleigh fading and scores the allocation with the
realised SINR. All algorithm arms of a campaign see the same frame
randomness (common random numbers).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel, geometry
from .allocator import (
    FIXED,
    NO_PROTECT,
    PROPOSED,
    Allocation,
    AllocatorConfig,
    QosConfig,
    adaptive_allocate,
    fairness,
)
from .channel import LinkBudget
from .geometry import CellConfig
from .rng import Purpose, stream

log = logging.getLogger(__name__)

DEFAULT_THETAS_DEG = (3.0, 5.0, 10.0, 15.0, 20.0, 30.0)


class ConfigError(ValueError):
    """Invalid campaign configuration; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Arm:
    """One algorithm variant of a sweep.

    ``delta`` is the edge threshold in meters (ignored by ``no-protect``);
    ``fixed_theta_deg`` is only used by ``fixed``.
    """

    algorithm: str = PROPOSED
    delta: float | None = None
    fixed_theta_deg: float | None = None

    @property
    def label(self) -> str:
        if self.algorithm == FIXED:
            return f"fixed:{self.fixed_theta_deg:g}"
        return self.algorithm

    @classmethod
    def parse(cls, text: str, delta: float | None = None) -> "Arm":
        text = text.strip()
        if text in (PROPOSED, NO_PROTECT):
            return cls(text, None if text == NO_PROTECT else delta)
        if text.startswith(FIXED + ":"):
            return cls(FIXED, delta, float(text.split(":", 1)[1]))
        raise ValueError(f"unknown algorithm {text!r}; expected proposed, no-protect or fixed:<deg>")


@dataclass(frozen=True)
class CampaignConfig:
    cell: CellConfig = field(default_factory=CellConfig)
    budget: LinkBudget = field(default_factory=LinkBudget)
    qos: QosConfig = field(default_factory=QosConfig)
    thetas_deg: tuple[float, ...] = DEFAULT_THETAS_DEG
    beta: float = 3.0
    delta: float | None = None  # defaults to beta
    k_values: tuple[int, ...] = (20, 40, 60, 80, 100)
    frames: int = 1000
    seed: int = 0
    arms: tuple[Arm, ...] = (Arm(PROPOSED),)

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError("sweep.frames", f"must be >= 1, got {self.frames}")
        if self.beta < 0:
            raise ConfigError("algorithm.beta_m", f"must be >= 0, got {self.beta}")
        if self.seed < 0:
            raise ConfigError("sweep.seed", "must be a nonnegative integer")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("sweep.k", "user counts must be positive integers")
        if not self.arms:
            raise ConfigError("sweep.algorithms", "at least one algorithm is required")
        for t in self.thetas_deg:
            try:
                geometry.beams_per_sector(math.radians(t), self.cell.num_sectors)
            except geometry.GeometryError as exc:
                raise ConfigError("algorithm.thetas_deg", str(exc)) from None
        self.check_delta(self.resolved_delta, "algorithm.delta_m")
        for arm in self.arms:
            if arm.algorithm not in (PROPOSED, NO_PROTECT, FIXED):
                raise ConfigError("sweep.algorithms", f"unknown algorithm {arm.algorithm!r}")
            if arm.delta is not None:
                self.check_delta(arm.delta, "sweep.deltas_m")
            if arm.algorithm == FIXED:
                if arm.fixed_theta_deg is None:
                    raise ConfigError("sweep.algorithms", "fixed algorithm needs a beamwidth")
                try:
                    geometry.beams_per_sector(math.radians(arm.fixed_theta_deg), self.cell.num_sectors)
                except geometry.GeometryError as exc:
                    raise ConfigError("sweep.algorithms", str(exc)) from None

    @property
    def resolved_delta(self) -> float:
        return self.beta if self.delta is None else self.delta

    def check_delta(self, delta: float, key: str) -> None:
        if delta < 0:
            raise ConfigError(key, f"must be >= 0, got {delta}")
        if self.beta > 0 and not 0 < delta <= self.beta:
            raise ConfigError(key, f"must satisfy 0 < delta <= beta ({self.beta}), got {delta}")

    def arm_delta(self, arm: Arm) -> float | None:
        if arm.algorithm == NO_PROTECT:
            return None
        return self.resolved_delta if arm.delta is None else arm.delta

    def allocator_config(self, arm: Arm) -> AllocatorConfig:
        if arm.algorithm == FIXED:
            thetas = (math.radians(arm.fixed_theta_deg),)
        else:
            thetas = tuple(math.radians(t) for t in self.thetas_deg)
        delta = self.arm_delta(arm)
        return AllocatorConfig(
            cell=self.cell,
            budget=self.budget,
            qos=self.qos,
            thetas=thetas,
            delta=0.0 if delta is None else delta,
            protect_edges=arm.algorithm != NO_PROTECT,
        )


@dataclass(frozen=True)
class FrameMetrics:
    gamma: float | None
    predicted_gamma: float | None
    sum_rate: float
    served: int
    outage: int
    excluded: int
    qos_satisfied: int
    thetas_deg: tuple[float | None, ...]


@dataclass(frozen=True)
class FrameDraw:
    """Randomness shared by every arm in one (K, frame) cell of a campaign."""

    estimated: np.ndarray
    actual: np.ndarray
    power_gain: np.ndarray
    rng_key: tuple[int, ...]


def draw_frame(cfg: CampaignConfig, k: int, frame: int) -> FrameDraw:
    key = (cfg.seed, k, frame)
    est = geometry.sample_uniform_disc(k, cfg.cell.radius_m, stream(*key, Purpose.POSITIONS))
    act = geometry.sample_actual_positions(est, cfg.beta, stream(*key, Purpose.ACTUAL), cfg.cell.radius_m)
    dims = (k, cfg.cell.num_sectors, cfg.budget.num_subbands)
    fading = channel.sample_fading(stream(*key, Purpose.FADING), dims)
    return FrameDraw(est, act, fading.power_gain, key)


def evaluate(alloc: Allocation, draw: FrameDraw, cfg: CampaignConfig) -> FrameMetrics:
    """Score an allocation with the realised positions and fading."""
    k_count = alloc.num_users
    owner = alloc.owner
    thetas = alloc.thetas
    act = draw.actual
    d_act = np.hypot(act[:, 0], act[:, 1])
    az_act = geometry.wrap_angle(np.arctan2(act[:, 1], act[:, 0]))

    sinr = channel.block_sinrs(owner, draw.power_gain, d_act, thetas, cfg.budget)
    rates = np.zeros(k_count)
    targets = np.zeros(k_count)
    w = cfg.budget.subband_bandwidth_hz
    for m, dec in enumerate(alloc.sectors):
        if dec.best is None:
            continue
        beam = dec.beam
        edge_set = set(dec.best.classification.edge)
        for k, subbands in dec.best.grants.items():
            target = cfg.qos.rmin_edge if k in edge_set else cfg.qos.rmin_center
            targets[k] = max(targets[k], target)
            covered = bool(geometry.in_beam_interval(az_act[k], beam)) and d_act[k] <= cfg.cell.radius_m
            if covered:
                rates[k] += channel.user_rate(sinr[m, subbands], w)

    allocated = np.zeros(k_count, dtype=bool)
    allocated[alloc.allocated_users()] = True
    served = allocated & (rates > 0)
    outage = allocated & ~served
    return FrameMetrics(
        gamma=fairness(rates[served]),
        predicted_gamma=alloc.predicted_gamma,
        sum_rate=float(math.fsum(rates)),
        served=int(served.sum()),
        outage=int(outage.sum()),
        excluded=int(k_count - allocated.sum()),
        qos_satisfied=int((allocated & (rates >= targets)).sum()),
        thetas_deg=tuple(None if np.isnan(t) else round(math.degrees(t), 9) for t in thetas),
    )


def run_frame(cfg: CampaignConfig, arm: Arm, k: int, frame: int, draw: FrameDraw | None = None) -> FrameMetrics:
    draw = draw_frame(cfg, k, frame) if draw is None else draw
    alloc = adaptive_allocate(draw.estimated, cfg.allocator_config(arm), draw.rng_key)
    return evaluate(alloc, draw, cfg)


def run_frame_arms(cfg: CampaignConfig, k: int, frame: int) -> list[FrameMetrics]:
    """Every arm on the same frame draw."""
    draw = draw_frame(cfg, k, frame)
    return [run_frame(cfg, arm, k, frame, draw) for arm in cfg.arms]


def _run_chunk(args) -> list[list[FrameMetrics]]:
    cfg, k, frames = args
    return [run_frame_arms(cfg, k, f) for f in frames]


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error; exact summation keeps the result order-free."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class AggregateMetrics:
    k: int
    arm: Arm
    delta: float | None
    beta: float
    frames: list[FrameMetrics]
    thetas_deg: tuple[float, ...]

    @property
    def gammas(self) -> list[float]:
        return [f.gamma for f in self.frames if f.gamma is not None]

    @property
    def gamma_stats(self) -> tuple[float, float]:
        return mean_stderr(self.gammas)

    @property
    def sumrate_stats(self) -> tuple[float, float]:
        return mean_stderr([f.sum_rate for f in self.frames])

    def mean_of(self, attr: str) -> float:
        return mean_stderr([getattr(f, attr) for f in self.frames])[0]

    @property
    def theta_counts(self) -> dict[float, int]:
        counts = {t: 0 for t in self.thetas_deg}
        for f in self.frames:
            for t in f.thetas_deg:
                if t is not None:
                    counts[t] = counts.get(t, 0) + 1
        return counts

    @property
    def theta_fractions(self) -> dict[float, float]:
        counts = self.theta_counts
        total = sum(counts.values())
        return {t: (c / total if total else 0.0) for t, c in counts.items()}

    @property
    def modal_theta(self) -> float | None:
        counts = self.theta_counts
        if not any(counts.values()):
            return None
        # ties resolve toward the narrower beam
        return max(sorted(counts), key=lambda t: (counts[t], -t))


@dataclass
class CampaignResult:
    config: CampaignConfig
    aggregates: list[AggregateMetrics]

    def get(self, k: int, label: str, delta: float | None = None) -> AggregateMetrics:
        for a in self.aggregates:
            if a.k == k and a.arm.label == label and (delta is None or a.delta == delta):
                return a
        raise KeyError((k, label, delta))


def run_campaign(cfg: CampaignConfig, workers: int = 1, chunk_size: int = 50) -> CampaignResult:
    """Run every arm over ``cfg.frames`` frames for each K.

    Output is identical for any ``workers`` value.
    """
    jobs = []
    for k in cfg.k_values:
        for start in range(0, cfg.frames, chunk_size):
            jobs.append((cfg, k, range(start, min(start + chunk_size, cfg.frames))))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk, jobs))
    else:
        chunks = [_run_chunk(j) for j in jobs]

    per_cell: dict[int, list[list[FrameMetrics]]] = {k: [] for k in cfg.k_values}
    for (_, k, _), chunk in zip(jobs, chunks):
        per_cell[k].extend(chunk)

    thetas = tuple(float(t) for t in cfg.thetas_deg)
    aggregates = []
    for k in cfg.k_values:
        rows = per_cell[k]
        for i, arm in enumerate(cfg.arms):
            arm_thetas = (float(arm.fixed_theta_deg),) if arm.algorithm == FIXED else thetas
            aggregates.append(
                AggregateMetrics(k, arm, cfg.arm_delta(arm), cfg.beta, [r[i] for r in rows], arm_thetas)
            )
        log.info("K=%d done (%d frames)", k, len(rows))
    return CampaignResult(cfg, aggregates)
