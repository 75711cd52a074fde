"""Adaptive joint beam/subband allocation under position uncertainty.

For each sector independently and each candidate beamwidth, the allocator
points the beam at the densest slot, splits the users it may serve into
center and edge classes by their distance to the beam edge, sizes each
user's subband demand from the fading-free SINR, grants demands nearest-first
and scores the result by the sum of log rates. The beamwidth with the best
score wins the sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import channel, geometry
from .channel import LinkBudget
from .geometry import BeamId, CellConfig
from .rng import Purpose, stream

PROPOSED = "proposed"
NO_PROTECT = "no-protect"
FIXED = "fixed"

UNSERVABLE = np.iinfo(np.int64).max


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class QosConfig:
    rmin_center: float = 2e9
    rmin_edge: float = 1e9

    def __post_init__(self):
        if not self.rmin_center > self.rmin_edge > 0:
            raise AllocationError("QoS targets must satisfy rmin_center > rmin_edge > 0")


@dataclass(frozen=True)
class AllocatorConfig:
    """Static inputs of one allocation run.

    ``thetas`` are candidate beamwidths in radians. ``protect_edges=False``
    gives the no-protection baseline: every in-beam user is a center user
    and neighbouring-beam users are never served.
    """

    cell: CellConfig = field(default_factory=CellConfig)
    budget: LinkBudget = field(default_factory=LinkBudget)
    qos: QosConfig = field(default_factory=QosConfig)
    thetas: tuple[float, ...] = tuple(math.radians(t) for t in (3, 5, 10, 15, 20, 30))
    delta: float = 3.0
    protect_edges: bool = True

    def __post_init__(self):
        if not self.thetas:
            raise AllocationError("at least one candidate beamwidth is required")
        for t in self.thetas:
            geometry.beams_per_sector(t, self.cell.num_sectors)
        if self.delta < 0:
            raise AllocationError(f"delta must be >= 0, got {self.delta}")
        object.__setattr__(self, "thetas", tuple(sorted(float(t) for t in self.thetas)))


@dataclass
class UserClassification:
    center: list[int]
    edge: list[int]
    excluded: list[int]
    edge_dist: dict[int, float]
    delta: float

    @property
    def considered(self) -> list[int]:
        return self.center + self.edge


@dataclass
class ThetaTrial:
    theta: float
    beam: BeamId | None
    classification: UserClassification | None
    demands: dict[int, int]
    grants: dict[int, list[int]]
    predicted_rates: dict[int, float]
    gamma: float | None


@dataclass
class SectorDecision:
    sector: int
    trials: list[ThetaTrial]
    best: ThetaTrial | None

    @property
    def theta(self) -> float | None:
        return None if self.best is None else self.best.theta

    @property
    def beam(self) -> BeamId | None:
        return None if self.best is None else self.best.beam


@dataclass
class Allocation:
    """Combined allocation: ``owner[m, n]`` is the user holding subband ``n``
    of sector ``m`` (0-based), or -1 if idle."""

    owner: np.ndarray
    num_users: int
    sectors: list[SectorDecision]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([np.nan if s.theta is None else s.theta for s in self.sectors])

    @property
    def beams(self) -> list[BeamId | None]:
        return [s.beam for s in self.sectors]

    @property
    def phi(self) -> np.ndarray:
        m_count, n_count = self.owner.shape
        out = np.zeros((self.num_users, m_count, n_count), dtype=bool)
        ms, ns = np.nonzero(self.owner >= 0)
        out[self.owner[ms, ns], ms, ns] = True
        return out

    def allocated_users(self) -> np.ndarray:
        return np.unique(self.owner[self.owner >= 0])

    @property
    def predicted_gamma(self) -> float | None:
        vals = [s.best.gamma for s in self.sectors if s.best is not None]
        return math.fsum(vals) if vals else None


def _sector_counts(g: np.ndarray, sector: int, v_count: int) -> np.ndarray:
    base = (sector - 1) * v_count
    local = g[(g >= base) & (g < base + v_count)] - base
    return np.bincount(local, minlength=v_count)


def select_beam(
    azimuths: np.ndarray,
    sector: int,
    theta: float,
    num_sectors: int,
    rng: np.random.Generator | None = None,
    beam_index: np.ndarray | None = None,
) -> BeamId | None:
    """Beam of ``sector`` (1-based) holding the most azimuths; None if the sector is empty.

    Ties are broken uniformly at random with ``rng``. ``beam_index`` may carry
    precomputed global beam indices of ``azimuths``.
    """
    v_count = geometry.beams_per_sector(theta, num_sectors)
    g = geometry.global_beam_index(azimuths, theta, num_sectors) if beam_index is None else beam_index
    counts = _sector_counts(g, sector, v_count)
    if counts.max() == 0:
        return None
    top = np.flatnonzero(counts == counts.max())
    if len(top) > 1:
        if rng is None:
            raise AllocationError("tied beams need an rng to break the tie")
        slot = int(top[rng.integers(len(top))])
    else:
        slot = int(top[0])
    return BeamId(sector, slot + 1, theta, num_sectors)


def classify_users(
    selected: BeamId,
    distances: np.ndarray,
    azimuths: np.ndarray,
    delta: float,
    protect_edges: bool = True,
    beam_index: np.ndarray | None = None,
) -> UserClassification:
    """Split users estimated in ``selected`` or its two neighbours.

    In-beam users are center users when their edge distance exceeds
    ``delta`` and edge users otherwise. Neighbour-beam users become edge users
    when within ``delta`` of the selected beam's boundary and are excluded
    otherwise. Without edge protection every in-beam user is a center user and
    neighbours are excluded.
    """
    theta, m_count = selected.beamwidth, selected.num_sectors
    if beam_index is None:
        beam_index = geometry.global_beam_index(azimuths, theta, m_count)
    g = beam_index
    gv = selected.global_index
    prev, nxt = geometry.adjacent_beams(selected)
    neighbours = {prev.global_index, nxt.global_index} - {gv}
    in_beam = np.flatnonzero(g == gv)
    near = np.flatnonzero(np.isin(g, list(neighbours))) if neighbours else np.array([], dtype=int)

    idx = np.concatenate([in_beam, near]).astype(int)
    a = geometry.edge_distances(distances[idx], azimuths[idx], selected.start, selected.end)
    edge_dist = {int(k): float(v) for k, v in zip(idx, a)}

    center, edge, excluded = [], [], []
    for k in in_beam:
        k = int(k)
        if protect_edges and edge_dist[k] <= delta:
            edge.append(k)
        else:
            center.append(k)
    for k in near:
        k = int(k)
        if protect_edges and delta > 0 and edge_dist[k] <= delta:
            edge.append(k)
        else:
            excluded.append(k)
    return UserClassification(center, edge, excluded, edge_dist, delta)


def required_subbands(rmin: float, gamma_prime: float, w_hz: float) -> int:
    """Subbands needed to reach ``rmin`` at per-subband SINR ``gamma_prime``.

    Returns UNSERVABLE when the per-subband capacity is zero.
    """
    cap = w_hz * math.log2(1.0 + gamma_prime)
    if cap <= 0:
        return UNSERVABLE
    n = math.ceil(rmin / cap)
    return n if n < UNSERVABLE else UNSERVABLE


def allocate_sector(order: Sequence[int], demands: dict[int, int], num_subbands: int) -> dict[int, list[int]]:
    """Grant full demands in ``order`` from a pool of subbands.

    A user whose demand no longer fits is skipped and later users may still be
    served. Returns ``{user: [subband, ...]}`` for granted users only.
    """
    grants: dict[int, list[int]] = {}
    nxt = 0
    for k in order:
        need = demands[k]
        if need <= num_subbands - nxt:
            grants[k] = list(range(nxt, nxt + need))
            nxt += need
        if nxt == num_subbands:
            break
    return grants


def fairness(rates) -> float | None:
    """Sum of natural-log rates over positive entries; None when none are positive."""
    logs = [math.log(r) for r in rates if r > 0]
    return math.fsum(logs) if logs else None


def _tie_rng(rng_key: Sequence[int], sector: int, theta_idx: int) -> np.random.Generator:
    return stream(rng_key[0], *rng_key[1:], Purpose.TIE_BREAK, sector, theta_idx)


@dataclass(frozen=True)
class _ThetaView:
    """Per-beamwidth quantities shared by all sectors of a frame."""

    theta: float
    index: int
    v_count: int
    beam_index: np.ndarray
    capacity: np.ndarray  # bps per subband at the fading-free SINR

    @classmethod
    def build(cls, cfg: AllocatorConfig, theta: float, index: int, distances, azimuths) -> "_ThetaView":
        m_count = cfg.cell.num_sectors
        gp = np.atleast_1d(channel.estimated_sinr(distances, theta, cfg.budget, m_count))
        return cls(
            theta,
            index,
            geometry.beams_per_sector(theta, m_count),
            geometry.global_beam_index(azimuths, theta, m_count),
            cfg.budget.subband_bandwidth_hz * np.log2(1.0 + gp),
        )


def _run_theta(
    cfg: AllocatorConfig,
    sector: int,
    view: _ThetaView,
    distances: np.ndarray,
    azimuths: np.ndarray,
    rng_key: Sequence[int],
) -> ThetaTrial:
    theta, m_count = view.theta, cfg.cell.num_sectors
    counts = _sector_counts(view.beam_index, sector, view.v_count)
    if counts.max() == 0:
        return ThetaTrial(theta, None, None, {}, {}, {}, None)
    # the tie-break stream is only built when a tie occurs
    tied = np.count_nonzero(counts == counts.max()) > 1
    rng = _tie_rng(rng_key, sector, view.index) if tied else None
    beam = select_beam(azimuths, sector, theta, m_count, rng, view.beam_index)

    cls = classify_users(beam, distances, azimuths, cfg.delta, cfg.protect_edges, view.beam_index)
    edge_set = set(cls.edge)
    demands: dict[int, int] = {}
    for k in cls.considered:
        rmin = cfg.qos.rmin_edge if k in edge_set else cfg.qos.rmin_center
        cap = float(view.capacity[k])
        demands[k] = math.ceil(rmin / cap) if cap > 0 else UNSERVABLE
    order = sorted(cls.considered, key=lambda k: (distances[k], k))
    grants = allocate_sector(order, demands, cfg.budget.num_subbands)
    rates = {k: len(sb) * float(view.capacity[k]) for k, sb in grants.items()}
    gamma = fairness([rates[k] for k in order if k in rates])
    return ThetaTrial(theta, beam, cls, demands, grants, rates, gamma)


def allocate_sector_adaptive(
    cfg: AllocatorConfig,
    sector: int,
    distances: np.ndarray,
    azimuths: np.ndarray,
    rng_key: Sequence[int] = (0,),
    views: Sequence[_ThetaView] | None = None,
) -> SectorDecision:
    """Try every candidate beamwidth in one sector; keep the best score (ties to the narrowest)."""
    if views is None:
        views = [_ThetaView.build(cfg, t, i, distances, azimuths) for i, t in enumerate(cfg.thetas)]
    trials = [_run_theta(cfg, sector, v, distances, azimuths, rng_key) for v in views]
    best = None
    for t in trials:
        if t.gamma is not None and (best is None or t.gamma > best.gamma):
            best = t
    return SectorDecision(sector, trials, best)


def adaptive_allocate(
    estimated_xy: np.ndarray,
    cfg: AllocatorConfig,
    rng_key: Sequence[int] = (0,),
) -> Allocation:
    """Allocate one frame from estimated positions (shape (K, 2)).

    ``rng_key`` seeds the per-sector tie-break streams; the same key always
    yields the same allocation.
    """
    xy = np.asarray(estimated_xy, dtype=float).reshape(-1, 2)
    distances = np.hypot(xy[:, 0], xy[:, 1])
    azimuths = geometry.wrap_angle(np.arctan2(xy[:, 1], xy[:, 0]))
    m_count = cfg.cell.num_sectors
    owner = np.full((m_count, cfg.budget.num_subbands), -1, dtype=np.int64)
    views = [_ThetaView.build(cfg, t, i, distances, azimuths) for i, t in enumerate(cfg.thetas)]
    decisions = []
    for m in range(1, m_count + 1):
        dec = allocate_sector_adaptive(cfg, m, distances, azimuths, rng_key, views)
        if dec.best is not None:
            for k, subbands in dec.best.grants.items():
                owner[m - 1, subbands] = k
        decisions.append(dec)
    return Allocation(owner, len(xy), decisions)


def reference_allocate(
    estimated_xy: np.ndarray,
    cfg: AllocatorConfig,
    rng_key: Sequence[int] = (0,),
    variant: str = NO_PROTECT,
    fixed_theta: float | None = None,
) -> Allocation:
    """Baselines: ``no-protect`` (adaptive width, no edge class) or ``fixed``
    (edge protection kept, single beamwidth ``fixed_theta``)."""
    if variant == NO_PROTECT:
        return adaptive_allocate(estimated_xy, replace(cfg, protect_edges=False), rng_key)
    if variant == FIXED:
        if fixed_theta is None:
            raise AllocationError("fixed variant needs fixed_theta")
        return adaptive_allocate(estimated_xy, replace(cfg, thetas=(fixed_theta,)), rng_key)
    raise AllocationError(f"unknown reference variant {variant!r}")


def constraint_violations(phi: np.ndarray, num_sectors: int | None = None) -> list[str]:
    """Walk a (K, M, N) indicator tensor and report broken structural constraints.

    Checks that each (sector, subband) block has at most one user and that no
    subband carries more than M beams in total.
    """
    phi = np.asarray(phi)
    k_count, m_count, n_count = phi.shape
    limit = m_count if num_sectors is None else num_sectors
    problems = []
    if not np.isin(phi, (0, 1)).all():
        problems.append("non-binary entry")
    for n in range(n_count):
        total = 0
        for m in range(m_count):
            holders = np.flatnonzero(phi[:, m, n])
            if len(holders) > 1:
                problems.append(f"sector {m + 1} subband {n + 1} shared by users {holders.tolist()}")
            total += len(holders)
        if total > limit:
            problems.append(f"subband {n + 1} carries {total} beams > {limit}")
    return problems
