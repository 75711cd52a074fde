"""Cell, sector and beam geometry.

Azimuths live in [0, 2*pi). Sector ``m`` (1-based) spans
``[(m-1)*2*pi/M, m*2*pi/M)`` and beam ``v`` of that sector spans
``[sector_start + (v-1)*theta, sector_start + v*theta)``. Beams are also
addressed by a 0-based *global* index ``g = (m-1)*V + (v-1)`` running
counter-clockwise around the cell, which is what the vectorised helpers use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
_DIVISOR_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid cell or beam configuration."""


@dataclass(frozen=True)
class CellConfig:
    radius_m: float = 100.0
    num_sectors: int = 6

    def __post_init__(self):
        if not self.radius_m > 0:
            raise GeometryError(f"cell radius must be positive, got {self.radius_m}")
        if self.num_sectors < 1:
            raise GeometryError(f"num_sectors must be >= 1, got {self.num_sectors}")

    @property
    def sector_width(self) -> float:
        return TWO_PI / self.num_sectors


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    @classmethod
    def polar(cls, distance: float, azimuth: float) -> "Position":
        return cls(distance * math.cos(azimuth), distance * math.sin(azimuth))

    @property
    def distance(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def azimuth(self) -> float:
        return wrap_angle(math.atan2(self.y, self.x))

    def offset_to(self, other: "Position") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class BeamId:
    """One analog beam: 1-based ``sector`` and ``slot`` plus its width in radians."""

    sector: int
    slot: int
    beamwidth: float
    num_sectors: int

    @property
    def beams_per_sector(self) -> int:
        return beams_per_sector(self.beamwidth, self.num_sectors)

    @property
    def global_index(self) -> int:
        return (self.sector - 1) * self.beams_per_sector + (self.slot - 1)

    @property
    def start(self) -> float:
        return self.global_index * self.beamwidth

    @property
    def end(self) -> float:
        return self.start + self.beamwidth

    @property
    def center(self) -> float:
        return self.start + 0.5 * self.beamwidth

    @classmethod
    def from_global(cls, g: int, theta: float, num_sectors: int) -> "BeamId":
        v_count = beams_per_sector(theta, num_sectors)
        g %= v_count * num_sectors
        return cls(g // v_count + 1, g % v_count + 1, theta, num_sectors)


def wrap_angle(a):
    """Map angle(s) onto [0, 2*pi)."""
    w = np.mod(a, TWO_PI)
    if np.ndim(w) == 0:
        w = float(w)
        return 0.0 if w >= TWO_PI else w
    w[w >= TWO_PI] = 0.0
    return w


def beams_per_sector(theta: float, num_sectors: int) -> int:
    """Number of beams ``V = 2*pi / (theta*M)`` tiling one sector.

    Raises GeometryError when theta exceeds the sector or does not divide it.
    """
    if not theta > 0:
        raise GeometryError(f"beamwidth must be positive, got {theta}")
    sector = TWO_PI / num_sectors
    if theta > sector * (1 + _DIVISOR_TOL):
        raise GeometryError(
            f"beamwidth {math.degrees(theta):g} deg exceeds sector width "
            f"{math.degrees(sector):g} deg"
        )
    ratio = sector / theta
    v = round(ratio)
    if v < 1 or abs(ratio - v) > _DIVISOR_TOL * max(1.0, ratio):
        raise GeometryError(
            f"beamwidth {math.degrees(theta):g} deg does not divide the "
            f"{math.degrees(sector):g} deg sector"
        )
    return int(v)


def beam_of(pos: Position, theta: float, num_sectors: int) -> BeamId:
    g = int(global_beam_index(pos.azimuth, theta, num_sectors))
    return BeamId.from_global(g, theta, num_sectors)


def global_beam_index(azimuth, theta: float, num_sectors: int):
    """Vectorised 0-based global beam index of azimuth(s) in [0, 2*pi)."""
    total = beams_per_sector(theta, num_sectors) * num_sectors
    g = np.floor(np.asarray(azimuth) / theta).astype(np.int64)
    return np.clip(g, 0, total - 1)


def angular_gap(a, b):
    """Absolute angular separation in [0, pi]."""
    return np.abs(np.mod(np.asarray(a) - b + math.pi, TWO_PI) - math.pi)


def ray_distance(distance, azimuth, ray_angle):
    """Euclidean distance from point(s) to the ray leaving the origin at ray_angle."""
    gap = np.minimum(angular_gap(azimuth, ray_angle), 0.5 * math.pi)
    return np.asarray(distance) * np.sin(gap)


def edge_distances(distance, azimuth, start, end):
    """Distance to the nearer of the two boundary rays at ``start`` and ``end``."""
    return np.minimum(
        ray_distance(distance, azimuth, start), ray_distance(distance, azimuth, end)
    )


def edge_distance(pos: Position, beam: BeamId) -> float:
    return float(edge_distances(pos.distance, pos.azimuth, beam.start, beam.end))


def adjacent_beams(beam: BeamId) -> tuple[BeamId, BeamId]:
    """Previous and next beams, wrapping across sector boundaries and around the cell."""
    g = beam.global_index
    return (
        BeamId.from_global(g - 1, beam.beamwidth, beam.num_sectors),
        BeamId.from_global(g + 1, beam.beamwidth, beam.num_sectors),
    )


def in_beam_interval(azimuth, beam: BeamId):
    a = np.asarray(azimuth)
    return (a >= beam.start) & (a < beam.end)


def in_coverage(pos: Position, beam: BeamId, cell: CellConfig) -> bool:
    return bool(in_beam_interval(pos.azimuth, beam)) and pos.distance <= cell.radius_m


def sample_uniform_disc(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` area-uniform points in a disc of ``radius`` at the origin, shape (n, 2)."""
    r = radius * np.sqrt(rng.random(n))
    phi = TWO_PI * rng.random(n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def clip_to_cell(xy: np.ndarray, radius: float) -> np.ndarray:
    d = np.hypot(xy[:, 0], xy[:, 1])
    scale = np.where(d > radius, radius / np.maximum(d, 1e-300), 1.0)
    return xy * scale[:, None]


def sample_actual_positions(
    estimated: np.ndarray, beta: float, rng: np.random.Generator, cell_radius: float | None = None
) -> np.ndarray:
    """Draw true positions uniformly within ``beta`` of each estimated position.

    Draws happen even for ``beta == 0`` so the RNG stream advances identically
    whatever the uncertainty level.
    """
    if beta < 0:
        raise GeometryError(f"beta must be >= 0, got {beta}")
    estimated = np.asarray(estimated, dtype=float).reshape(-1, 2)
    offsets = sample_uniform_disc(len(estimated), beta, rng)
    actual = estimated + offsets if beta > 0 else estimated.copy()
    if cell_radius is not None:
        actual = clip_to_cell(actual, cell_radius)
    return actual


def sample_actual_position(
    estimated: Position, beta: float, rng: np.random.Generator, cell: CellConfig | None = None
) -> Position:
    xy = np.array([[estimated.x, estimated.y]])
    out = sample_actual_positions(xy, beta, rng, None if cell is None else cell.radius_m)
    return Position(float(out[0, 0]), float(out[0, 1]))
