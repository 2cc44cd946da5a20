"""Shock typing and seed extraction on a cost volume."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Mapping

import numpy as np

from .cost import CostVolume

NEIGHBORS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class ShockType(IntEnum):
    PROTRUSION = 1
    NECK = 2
    RIBBON = 3
    BLOB = 4


@dataclass(frozen=True)
class ShockConfig:
    delta_r: float = 0.0
    epsilon_r: int = 1

    def __post_init__(self):
        if self.delta_r < 0:
            raise ValueError("delta_r must be >= 0")
        if self.epsilon_r < 1 or int(self.epsilon_r) != self.epsilon_r:
            raise ValueError("epsilon_r must be a positive integer")


@dataclass(frozen=True)
class Seed:
    y: int
    x: int
    r: int
    cost: float
    shock_type: ShockType

    @property
    def key(self):
        return (-self.r, self.cost, self.y, self.x)

    def dump(self) -> str:
        return f"{self.x} {self.y} {self.r} {self.cost!r} {int(self.shock_type)}"


class SeedQueue:
    """Seeds ordered by radius (descending), then cost, then row-major position."""

    def __init__(self, seeds: Iterable[Seed] = ()):
        self._heap = [(s.key, s) for s in seeds]
        heapq.heapify(self._heap)
        self._dropped: set[Seed] = set()

    def __len__(self) -> int:
        return len(self._heap) - len(self._dropped)

    def __bool__(self) -> bool:
        return len(self) > 0

    def __iter__(self) -> Iterator[Seed]:
        return (s for _, s in sorted(self._heap) if s not in self._dropped)

    def pop(self) -> Seed:
        while self._heap:
            _, seed = heapq.heappop(self._heap)
            if seed in self._dropped:
                self._dropped.discard(seed)
                continue
            return seed
        raise IndexError("pop from empty SeedQueue")

    def remove_if(self, predicate) -> int:
        gone = [s for s in self if predicate(s)]
        self._dropped.update(gone)
        return len(gone)

    def dump(self) -> str:
        return "".join(s.dump() + "\n" for s in self)


def is_scale_maximal(vol: CostVolume, y: int, x: int, r: int,
                     cfg: ShockConfig = ShockConfig()) -> bool:
    """C(x, r) + delta_r < C(x, r + epsilon_r); a missing larger disk counts as +inf."""
    here = vol.at(y, x, r)
    if not np.isfinite(here):
        return False
    return here + cfg.delta_r < vol.at(y, x, r + cfg.epsilon_r)


def scale_maximal_mask(vol: CostVolume, cfg: ShockConfig = ShockConfig()) -> np.ndarray:
    cost = vol.cost
    eps = cfg.epsilon_r
    larger = np.full_like(cost, np.inf)
    if eps < cost.shape[0]:
        larger[:-eps] = cost[eps:]
    return np.isfinite(cost) & (cost + cfg.delta_r < larger)


def best_scales(vol: CostVolume, cfg: ShockConfig = ShockConfig()):
    """Per pixel, the scale-maximal radius of least cost (0 / inf where none)."""
    masked = np.where(scale_maximal_mask(vol, cfg), vol.cost, np.inf)
    idx = np.argmin(masked, axis=0)
    best_cost = np.take_along_axis(masked, idx[None], axis=0)[0]
    best_r = np.where(np.isfinite(best_cost), idx + vol.r_min, 0)
    return best_r, best_cost


def _neighbor_stack(arr: np.ndarray, fill) -> np.ndarray:
    h, w = arr.shape
    padded = np.full((h + 2, w + 2), fill, dtype=arr.dtype)
    padded[1:-1, 1:-1] = arr
    return np.stack([padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy, dx in NEIGHBORS8])


def extract_seeds(vol: CostVolume, cfg: ShockConfig = ShockConfig()) -> SeedQueue:
    """Type-3/4 shocks that are scale-maximal and local cost minima."""
    maximal = scale_maximal_mask(vol, cfg)
    best_r, best_cost = best_scales(vol, cfg)
    nb_r = _neighbor_stack(best_r, 0)
    nb_cost = _neighbor_stack(best_cost, np.inf)
    nb_max_r = nb_r.max(axis=0)
    nb_min_cost = nb_cost.min(axis=0)

    radii = np.arange(vol.r_min, vol.r_max + 1)[:, None, None]
    blob = radii > nb_max_r[None]
    ribbon = np.zeros_like(maximal)
    for k in range(nb_r.shape[0]):
        ribbon |= nb_r[k][None] == radii
    local_min = vol.cost <= nb_min_cost[None]
    keep = maximal & (blob | ribbon) & local_min

    seeds = []
    for s, y, x in zip(*np.nonzero(keep)):
        kind = ShockType.BLOB if blob[s, y, x] else ShockType.RIBBON
        seeds.append(Seed(int(y), int(x), int(s + vol.r_min), float(vol.cost[s, y, x]), kind))
    return SeedQueue(seeds)


def _ring_components(ring: list[tuple[int, int]]) -> int:
    left = set(ring)
    count = 0
    while left:
        count += 1
        stack = [left.pop()]
        while stack:
            py, px = stack.pop()
            for dy, dx in NEIGHBORS8:
                q = (py + dy, px + dx)
                if q in left:
                    left.remove(q)
                    stack.append(q)
    return count


def classify_shock(radii: Mapping[tuple[int, int], int], y: int, x: int, r: int) -> ShockType:
    """Shock type of a medial point given the radii of accepted axis points.

    ``radii`` maps (y, x) to radius for every axis point; only the 8
    neighbors of (y, x) are consulted.
    """
    ring = [(y + dy, x + dx) for dy, dx in NEIGHBORS8 if (y + dy, x + dx) in radii]
    nb = [radii[p] for p in ring]
    if all(r > q for q in nb):
        return ShockType.BLOB
    if all(q == r for q in nb):
        return ShockType.RIBBON
    if all(q > r for q in nb) and _ring_components(ring) > 1:
        return ShockType.NECK
    return ShockType.PROTRUSION
