"""Grammar-constrained greedy growth of medial branches from seeds.

Each seed grows by repeatedly attaching the cheapest valid *fragment*: a
digital straight run of up to ``l_max`` points leaving an existing axis
point in one of ``directions`` quantized headings.  Fragment points take the
radius of least cost within ``scale_step`` of the previous point.  A
fragment is valid when every point costs at most the seed's tolerance,
no point lands on or next to the existing axis (except where it leaves
its site, or, for union fragments, where its last point meets another
branch), and its disks add at least one pixel to the covered area.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .cost import CostVolume, disk_halfwidths
from .shock import NEIGHBORS8, Seed, SeedQueue, ShockType, classify_shock

_NB = np.array(NEIGHBORS8, dtype=np.int64)


@dataclass(frozen=True)
class GrowthConfig:
    alpha_c: float = 0.75
    l_max: int = 10
    alpha_end: float = 0.85
    directions: int = 16
    relax_factor: float = 2.0
    scale_step: int = 1
    subsume_fraction: float = 1.0
    subsume_margin: int = 0
    seed_margin: int = 1
    fold_angle: float = 90.0
    junction_angle: float = 45.0
    allow_union: bool = True

    def __post_init__(self):
        if not self.alpha_c > 0:
            raise ValueError("alpha_c must be positive")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")
        if self.relax_factor < 1:
            raise ValueError("relax_factor must be >= 1")
        if self.directions < 4:
            raise ValueError("need at least 4 directions")
        if self.scale_step < 0:
            raise ValueError("scale_step must be >= 0")
        if not 0 < self.subsume_fraction <= 1:
            raise ValueError("subsume_fraction must lie in (0, 1]")
        if self.subsume_margin not in (0, 1) or self.seed_margin not in (0, 1):
            raise ValueError("margins must be 0 or 1")

    def alpha(self, length: int) -> float:
        """Length weight: 1 at length 1 falling linearly to alpha_end at l_max."""
        if self.l_max == 1:
            return 1.0
        return 1.0 - (1.0 - self.alpha_end) * (length - 1) / (self.l_max - 1)

    def tolerance(self, seed_cost: float) -> float:
        return seed_cost * (1.0 + self.alpha_c)


@dataclass
class MedialPoint:
    y: int
    x: int
    r: int
    cost: float
    branch: int
    seed: int
    seed_origin: bool = False
    relaxed: bool = False
    junction: bool = False
    end_point: bool = False


@dataclass(frozen=True)
class Fragment:
    site: int
    direction: int
    angle: float
    points: tuple  # ((y, x, r, cost), ...)
    union_with: int = -1

    @property
    def length(self) -> int:
        return len(self.points)

    def mean_cost(self) -> float:
        return sum(p[3] for p in self.points) / len(self.points)

    def weighted_cost(self, cfg: GrowthConfig) -> float:
        return cfg.alpha(self.length) * self.mean_cost()


@dataclass
class MedialAxis:
    """Accepted medial points plus their branch structure and disk coverage."""
    height: int
    width: int
    points: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    tolerances: list = field(default_factory=list)
    counters: dict = field(default_factory=lambda: {
        "proposals_examined": 0, "fragments_attached": 0, "seeds_grown": 0,
        "seeds_skipped": 0, "relaxed_fragments": 0, "union_fragments": 0})

    def __post_init__(self):
        self.occupancy = np.full((self.height, self.width), -1, dtype=np.int64)
        self.coverage = np.zeros((self.height, self.width), dtype=bool)
        # coverage grown by one pixel in every direction
        self.halo = np.zeros((self.height, self.width), dtype=bool)
        self.emanating: list[list[float]] = []
        # (r, y, x) entries of the cost volume consulted so far during growth
        self.examined: np.ndarray | None = None

    @classmethod
    def empty_like(cls, vol: CostVolume) -> "MedialAxis":
        return cls(vol.height, vol.width)

    def covered(self, margin: int = 0) -> np.ndarray:
        return self.halo if margin else self.coverage

    def __len__(self) -> int:
        return len(self.points)

    def point_at(self, y: int, x: int) -> MedialPoint | None:
        if 0 <= y < self.height and 0 <= x < self.width:
            i = self.occupancy[y, x]
            return self.points[i] if i >= 0 else None
        return None

    def neighbors(self, i: int) -> list[int]:
        p = self.points[i]
        out = []
        for dy, dx in NEIGHBORS8:
            y, x = p.y + dy, p.x + dx
            if 0 <= y < self.height and 0 <= x < self.width and self.occupancy[y, x] >= 0:
                out.append(int(self.occupancy[y, x]))
        return out

    def radii(self) -> dict:
        return {(p.y, p.x): p.r for p in self.points}

    def mask(self) -> np.ndarray:
        return self.occupancy >= 0

    def radius_map(self) -> np.ndarray:
        out = np.zeros((self.height, self.width), dtype=np.int64)
        for p in self.points:
            out[p.y, p.x] = p.r
        return out

    def _add_point(self, y, x, r, cost, branch, seed, **flags) -> int:
        idx = len(self.points)
        self.points.append(MedialPoint(y, x, r, float(cost), branch, seed, **flags))
        self.emanating.append([])
        self.occupancy[y, x] = idx
        hw = disk_halfwidths(r)
        for k, w in enumerate(hw):
            self.coverage[y + k - r, x - w:x + w + 1] = True
        for k, w in enumerate(_grown_halfwidths(r, 1)):
            yy = y + k - r - 1
            if 0 <= yy < self.height:
                self.halo[yy, max(x - w, 0):x + w + 1] = True
        return idx

    def refresh_flags(self) -> None:
        for i, p in enumerate(self.points):
            n = len(self.neighbors(i))
            p.junction = n >= 3
            p.end_point = n <= 1

    def shock_types(self) -> list[ShockType]:
        radii = self.radii()
        return [classify_shock(radii, p.y, p.x, p.r) for p in self.points]


def _grown_halfwidths(r: int, m: int) -> np.ndarray:
    """Row half-widths of D(0, r) dilated by an m-pixel square."""
    hw = np.full(2 * r + 1 + 2 * m, -1, dtype=np.int64)
    hw[m:m + 2 * r + 1] = disk_halfwidths(r)
    out = hw.copy()
    for j in range(1, m + 1):
        out[:-j] = np.maximum(out[:-j], hw[j:])
        out[j:] = np.maximum(out[j:], hw[:-j])
    return out + m


# ---------------------------------------------------------------------------
# numba kernels for fragment scanning

@njit(cache=True)
def _round_half_up(v):
    return int(math.floor(v + 0.5))


@njit(cache=True)
def _foreign_neighbors(occ, y, x, site):
    h, w = occ.shape
    count = 0
    last = -1
    for k in range(8):
        yy = y + _NB[k, 0]
        xx = x + _NB[k, 1]
        if 0 <= yy < h and 0 <= xx < w:
            q = occ[yy, xx]
            if q >= 0 and q != site:
                count += 1
                last = q
    return count, last


@njit(cache=True)
def _mark_disk(scratch, cov, y, x, hw, value):
    """Set scratch over D(x, r); return (pixels newly marked, of those uncovered)."""
    r = (hw.shape[0] - 1) // 2
    fresh = 0
    uncovered = 0
    for k in range(hw.shape[0]):
        yy = y + k - r
        for xx in range(x - hw[k], x + hw[k] + 1):
            if scratch[yy, xx] != value:
                scratch[yy, xx] = value
                fresh += 1
                if not cov[yy, xx]:
                    uncovered += 1
    return fresh, uncovered


_DOM2 = np.array(((-2, 0), (2, 0), (0, -2), (0, 2), (-1, -1), (-1, 1), (1, -1), (1, 1)),
                 dtype=np.int64)
_RING2 = np.array(((-2, 0), (2, 0), (0, -2), (0, 2)), dtype=np.int64)


@njit(cache=True)
def _crowded(occ, local, stamp, y, x):
    """True if an axis point two steps away (not in the allowed set) runs alongside."""
    h, w = occ.shape
    for k in range(4):
        yy = y + _RING2[k, 0]
        xx = x + _RING2[k, 1]
        if 0 <= yy < h and 0 <= xx < w and occ[yy, xx] >= 0 and local[yy, xx] != stamp:
            return True
    return False


@njit(cache=True)
def _scan(cost, seen, r_min, cov, occ, local, stamp, scratch, hw_table, site, y0, x0, r0,
          sy, sx, l_max, scale_step, ctol, allow_union, subsume_fraction,
          out_y, out_x, out_r, out_c, out_ok, out_crowd):
    """Walk one heading from a site; fill per-point data and per-length validity.

    Returns (points scanned, union target or -1, proposals examined).  A
    proposal counts once per run: ``seen`` records every cost entry looked at.
    """
    h, w = occ.shape
    n_scales = cost.shape[0]
    r_max = r_min + n_scales - 1
    proposals = 0
    n = 0
    union = -1
    total = 0
    fresh_uncovered = 0
    prev_r = r0
    for i in range(1, l_max + 1):
        y = y0 + _round_half_up(i * sy)
        x = x0 + _round_half_up(i * sx)
        if y < 0 or y >= h or x < 0 or x >= w or occ[y, x] >= 0:
            break
        cnt, last = _foreign_neighbors(occ, y, x, site)
        joining = False
        if cnt > 0:
            if not allow_union or i == 1 or cnt > 1:
                break
            joining = True
        best = np.inf
        best_r = -1
        lo = max(prev_r - scale_step, r_min)
        hi = min(prev_r + scale_step, r_max)
        for r in range(hi, lo - 1, -1):
            if not seen[r - r_min, y, x]:
                seen[r - r_min, y, x] = True
                proposals += 1
            c = cost[r - r_min, y, x]
            if c < best:
                best = c
                best_r = r
        if not best <= ctol:
            break
        if best_r + 2 <= r_max:
            # a cheaper disk two pixels larger containing this one lies on the ridge
            dominated = False
            for k in range(8):
                yy = y + _DOM2[k, 0]
                xx = x + _DOM2[k, 1]
                if 0 <= yy < h and 0 <= xx < w:
                    if not seen[best_r + 2 - r_min, yy, xx]:
                        seen[best_r + 2 - r_min, yy, xx] = True
                        proposals += 1
                    if cost[best_r + 2 - r_min, yy, xx] < best:
                        dominated = True
            if dominated:
                break
        hw = hw_table[best_r, :2 * best_r + 1]
        fresh, unc = _mark_disk(scratch, cov, y, x, hw, True)
        total += fresh
        fresh_uncovered += unc
        out_y[n] = y
        out_x[n] = x
        out_r[n] = best_r
        out_c[n] = best
        out_crowd[n] = _crowded(occ, local, stamp, y, x)
        if subsume_fraction >= 1.0:
            out_ok[n] = fresh_uncovered > 0
        else:
            out_ok[n] = (total - fresh_uncovered) < subsume_fraction * total
        n += 1
        prev_r = best_r
        if joining:
            union = last
            break
    for j in range(n):
        r = out_r[j]
        _mark_disk(scratch, cov, out_y[j], out_x[j], hw_table[r, :2 * r + 1], False)
    return n, union, proposals


@njit(cache=True)
def _any_crowded(occ, local, stamp, ys, xs):
    for i in range(ys.shape[0]):
        if _crowded(occ, local, stamp, ys[i], xs[i]):
            return True
    return False


@njit(cache=True)
def _still_valid(cov, occ, local, stamp, scratch, hw_table, site, ys, xs, rs, union,
                 subsume_fraction):
    n = ys.shape[0]
    for i in range(n):
        if occ[ys[i], xs[i]] >= 0:
            return False
        cnt, last = _foreign_neighbors(occ, ys[i], xs[i], site)
        if cnt > 0:
            if not (i == n - 1 and i > 0 and cnt == 1 and last == union):
                return False
        elif i == n - 1 and union >= 0:
            return False
    if _any_crowded(occ, local, stamp, ys, xs):
        return False
    total = 0
    unc = 0
    for i in range(n):
        r = rs[i]
        f, u = _mark_disk(scratch, cov, ys[i], xs[i], hw_table[r, :2 * r + 1], True)
        total += f
        unc += u
    for i in range(n):
        r = rs[i]
        _mark_disk(scratch, cov, ys[i], xs[i], hw_table[r, :2 * r + 1], False)
    if subsume_fraction >= 1.0:
        return unc > 0
    return (total - unc) < subsume_fraction * total


# ---------------------------------------------------------------------------

def _angle_gap(a: float, b: float) -> float:
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


class Grower:
    """Fragment search over one cost volume and one (mutable) axis."""

    def __init__(self, vol: CostVolume, axis: MedialAxis, cfg: GrowthConfig):
        self.vol = vol
        self.axis = axis
        self.cfg = cfg
        self.scratch = np.zeros(vol.shape, dtype=np.bool_)
        if axis.examined is None or axis.examined.shape != vol.cost.shape:
            axis.examined = np.zeros(vol.cost.shape, dtype=np.bool_)
        self.local = np.zeros(vol.shape, dtype=np.int64)
        self._stamp = 0
        top = vol.r_max
        self.hw_table = np.zeros((top + 1, 2 * top + 1), dtype=np.int64)
        for r in range(1, top + 1):
            self.hw_table[r, :2 * r + 1] = disk_halfwidths(r)
        self.angles = [2 * math.pi * k / cfg.directions for k in range(cfg.directions)]
        self.steps = []
        for a in self.angles:
            sy, sx = -math.sin(a), math.cos(a)
            m = max(abs(sy), abs(sx))
            self.steps.append((sy / m, sx / m))
        n = cfg.l_max
        self._buf = (np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(n, np.int64),
                     np.zeros(n, np.float64), np.zeros(n, np.bool_), np.zeros(n, np.bool_))

    def _mark_local(self, *centres) -> int:
        """Stamp axis points within two steps of the given points; return the stamp."""
        self._stamp += 1
        for c in centres:
            frontier = [c]
            seen = {c}
            for _ in range(2):
                nxt = []
                for i in frontier:
                    for j in self.axis.neighbors(i):
                        if j not in seen:
                            seen.add(j)
                            nxt.append(j)
                frontier = nxt
            for i in seen:
                p = self.axis.points[i]
                self.local[p.y, p.x] = self._stamp
        return self._stamp

    # -- candidates -------------------------------------------------------

    def allowed_directions(self, site: int) -> list[int]:
        limit = math.radians(self.cfg.fold_angle) - 1e-9
        used = self.axis.emanating[site]
        return [k for k, a in enumerate(self.angles)
                if all(_angle_gap(a, u) >= limit for u in used)]

    def scan(self, site: int, k: int, ctol: float, stamp: int | None = None) -> list[Fragment]:
        """Every valid fragment leaving ``site`` along heading k."""
        p = self.axis.points[site]
        sy, sx = self.steps[k]
        ys, xs, rs, cs, ok, crowd = self._buf
        if stamp is None:
            stamp = self._mark_local(site)
        n, union, proposals = _scan(
            self.vol.cost, self.axis.examined, self.vol.r_min, self.axis.covered(self.cfg.subsume_margin),
            self.axis.occupancy,
            self.local, stamp, self.scratch, self.hw_table, site, p.y, p.x, p.r, sy, sx,
            self.cfg.l_max, self.cfg.scale_step, ctol, self.cfg.allow_union,
            self.cfg.subsume_fraction, ys, xs, rs, cs, ok, crowd)
        self.axis.counters["proposals_examined"] += int(proposals)
        pts = [(int(ys[i]), int(xs[i]), int(rs[i]), float(cs[i])) for i in range(n)]
        frags = []
        clear = True
        for length in range(1, n + 1):
            clear = clear and not crowd[length - 1]
            joins = union >= 0 and length == n
            if not ok[length - 1]:
                continue
            if joins:
                # points near the branch being joined are expected
                st = self._mark_local(site, union)
                if not _any_crowded(self.axis.occupancy, self.local, st, ys[:n], xs[:n]):
                    frags.append(Fragment(site, k, self.angles[k], tuple(pts), union))
                stamp = self._mark_local(site)
            elif clear:
                frags.append(Fragment(site, k, self.angles[k], tuple(pts[:length])))
        return frags

    def candidates(self, site: int, ctol: float) -> list[Fragment]:
        out = []
        stamp = self._mark_local(site)
        for k in self.allowed_directions(site):
            out.extend(self.scan(site, k, ctol, stamp))
            if self.local[self.axis.points[site].y, self.axis.points[site].x] != stamp:
                stamp = self._mark_local(site)
        return out

    def best_fragment(self, site: int, ctol: float):
        best, best_key = None, None
        for frag in self.candidates(site, ctol):
            key = (frag.weighted_cost(self.cfg), frag.direction, frag.length)
            if best_key is None or key < best_key:
                best, best_key = frag, key
        return best

    def still_valid(self, frag: Fragment) -> bool:
        ys = np.array([p[0] for p in frag.points], dtype=np.int64)
        xs = np.array([p[1] for p in frag.points], dtype=np.int64)
        rs = np.array([p[2] for p in frag.points], dtype=np.int64)
        centres = (frag.site,) if frag.union_with < 0 else (frag.site, frag.union_with)
        stamp = self._mark_local(*centres)
        return bool(_still_valid(self.axis.covered(self.cfg.subsume_margin), self.axis.occupancy, self.local, stamp,
                                 self.scratch, self.hw_table, frag.site, ys, xs, rs,
                                 frag.union_with, self.cfg.subsume_fraction))

    # -- mutation ---------------------------------------------------------

    def attach(self, frag: Fragment, relaxed: bool = False) -> list[int]:
        axis = self.axis
        site = axis.points[frag.site]
        back = frag.angle + math.pi
        extends = len(axis.emanating[frag.site]) <= 1 and (
            axis.branches[site.branch][-1] == frag.site)
        if extends and axis.emanating[frag.site] and not site.seed_origin:
            branch = site.branch
        elif extends and not axis.emanating[frag.site]:
            branch = site.branch
        else:
            branch = len(axis.branches)
            axis.branches.append([frag.site])
        axis.emanating[frag.site].append(frag.angle)
        new = []
        for y, x, r, c in frag.points:
            i = axis._add_point(y, x, r, c, branch, site.seed, relaxed=relaxed)
            axis.emanating[i].append(back)
            if new:
                axis.emanating[new[-1]].append(frag.angle)
            axis.branches[branch].append(i)
            new.append(i)
        if frag.union_with >= 0:
            axis.emanating[new[-1]].append(frag.angle)
            axis.emanating[frag.union_with].append(back)
            axis.counters["union_fragments"] += 1
        axis.counters["fragments_attached"] += 1
        if relaxed:
            axis.counters["relaxed_fragments"] += 1
        return new

    def plant(self, seed: Seed) -> int:
        axis = self.axis
        seed_idx = len(axis.seeds)
        axis.seeds.append(seed)
        axis.tolerances.append(self.cfg.tolerance(seed.cost))
        branch = len(axis.branches)
        axis.branches.append([])
        i = axis._add_point(seed.y, seed.x, seed.r, seed.cost, branch, seed_idx,
                            seed_origin=True)
        axis.branches[branch].append(i)
        return i

    def grow(self, sites, tol_of, relaxed: bool = False) -> None:
        """Lazy greedy: repeatedly attach the globally cheapest valid fragment."""
        heap = []
        tick = 0

        def push(site):
            nonlocal tick
            frag = self.best_fragment(site, tol_of(site))
            if frag is not None:
                key = (frag.weighted_cost(self.cfg), frag.direction, frag.length, tick)
                heapq.heappush(heap, (key, frag))
                tick += 1

        for s in sites:
            push(s)
        while heap:
            _, frag = heapq.heappop(heap)
            if not self.still_valid(frag):
                push(frag.site)
                continue
            new = self.attach(frag, relaxed=relaxed)
            push(frag.site)
            for i in new:
                push(i)


def _seed_blocked(axis: MedialAxis, seed: Seed, reach: int = 2) -> bool:
    """A seed on or within ``reach`` pixels of the axis would only start a stub."""
    y0, y1 = max(seed.y - reach, 0), min(seed.y + reach + 1, axis.height)
    x0, x1 = max(seed.x - reach, 0), min(seed.x + reach + 1, axis.width)
    return bool((axis.occupancy[y0:y1, x0:x1] >= 0).any())


def grow_seed(seed: Seed, vol: CostVolume, axis: MedialAxis,
              cfg: GrowthConfig = GrowthConfig(), grower: Grower | None = None) -> MedialAxis:
    """Plant a seed and grow its branches until no valid fragment remains."""
    grower = grower or Grower(vol, axis, cfg)
    if _seed_blocked(axis, seed):
        axis.counters["seeds_skipped"] += 1
        return axis
    root = grower.plant(seed)
    ctol = axis.tolerances[-1]
    start = len(axis.points) - 1
    assert start == root
    grower.grow([root], lambda _s: ctol)
    axis.counters["seeds_grown"] += 1
    return axis


def candidate_fragments(site: int, vol: CostVolume, axis: MedialAxis,
                        cfg: GrowthConfig, ctol: float) -> list[Fragment]:
    return Grower(vol, axis, cfg).candidates(site, ctol)


def detect_junction(site: int, axis: MedialAxis, vol: CostVolume,
                    cfg: GrowthConfig = GrowthConfig(), ctol: float | None = None) -> bool:
    """True when two more fragments in well-separated headings could attach here."""
    p = axis.points[site]
    if ctol is None:
        ctol = axis.tolerances[p.seed] if axis.tolerances else math.inf
    grower = Grower(vol, axis, cfg)
    heads = sorted({f.direction for f in grower.candidates(site, ctol)})
    sep = math.radians(cfg.junction_angle)
    for i, a in enumerate(heads):
        for b in heads[i + 1:]:
            if _angle_gap(grower.angles[a], grower.angles[b]) > sep + 1e-9:
                return True
    return False


def _disks_inside(mask: np.ndarray, ys, xs, rs) -> np.ndarray:
    """For each (y, x, r), whether D(x, r) lies entirely inside mask."""
    h, w = mask.shape
    prefix = np.zeros((h, w + 1), dtype=np.int64)
    np.cumsum(~mask, axis=1, out=prefix[:, 1:])
    out = np.ones(len(ys), dtype=bool)
    for r in np.unique(rs):
        sel = np.nonzero(rs == r)[0]
        y, x = ys[sel], xs[sel]
        holes = np.zeros(len(sel), dtype=np.int64)
        for k, half in enumerate(disk_halfwidths(int(r))):
            row = y + k - r
            holes += prefix[row, x + half + 1] - prefix[row, x - half]
        out[sel] = holes == 0
    return out


def prune_seeds(queue: SeedQueue, axis: MedialAxis, margin: int = 1) -> int:
    """Drop queued seeds already on the axis or whose disk the axis already covers.

    A seed is on the axis when an axis point within one pixel has a radius
    within one of its own.  Coverage is taken ``margin`` pixels wide.
    """
    if not len(axis) or not len(queue):
        return 0
    seeds = list(queue)
    ys = np.array([q.y for q in seeds])
    xs = np.array([q.x for q in seeds])
    rs = np.array([q.r for q in seeds])
    rad = np.pad(axis.radius_map(), 1)
    close = np.zeros(len(seeds), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            nr = rad[ys + 1 + dy, xs + 1 + dx]
            close |= (nr > 0) & (np.abs(nr - rs) <= 1)
    gone = close | _disks_inside(axis.covered(margin), ys, xs, rs)
    doomed = {seeds[i] for i in np.nonzero(gone)[0]}
    return queue.remove_if(lambda q: q in doomed)


def grow_end_points(vol: CostVolume, axis: MedialAxis,
                    cfg: GrowthConfig = GrowthConfig(), grower: Grower | None = None) -> MedialAxis:
    """Resume growth at branch end points under a relaxed tolerance."""
    grower = grower or Grower(vol, axis, cfg)
    ends = [i for i in range(len(axis.points)) if len(axis.neighbors(i)) <= 1]

    def tol(site):
        return axis.tolerances[axis.points[site].seed] * cfg.relax_factor

    grower.grow(ends, tol, relaxed=True)
    return axis


# ---------------------------------------------------------------------------
# full pipeline

STAGES = ("proposal_generation", "seed_growth", "end_point_growth", "other")


@dataclass
class Extraction:
    axis: MedialAxis
    volume: CostVolume
    seeds: list
    timings: dict
    smoothed: np.ndarray

    @property
    def exhaustive_proposals(self) -> int:
        v = self.volume
        return v.height * v.width * (v.r_max - v.r_min + 1)


def extract(img, cost_cfg=None, shock_cfg=None, growth_cfg=None,
            smooth: bool = True, smooth_lam: float = 2e-2, smooth_kappa: float = 2.0,
            smooth_beta_max: float = 1e5) -> Extraction:
    """Smooth, build the cost volume, pick seeds and grow the medial axis."""
    import time

    from .cost import CostConfig, build_cost_volume
    from .imgproc import as_rgb, smooth_l0
    from .shock import ShockConfig, extract_seeds

    cost_cfg = cost_cfg or CostConfig()
    shock_cfg = shock_cfg or ShockConfig()
    growth_cfg = growth_cfg or GrowthConfig()
    timings = dict.fromkeys(STAGES, 0.0)
    t_start = time.perf_counter()

    t = time.perf_counter()
    rgb = as_rgb(img)
    smoothed = smooth_l0(rgb, lam=smooth_lam, kappa=smooth_kappa,
                         beta_max=smooth_beta_max) if smooth else rgb
    t_vol = time.perf_counter()
    vol = build_cost_volume(smoothed, cost_cfg)
    cost_time = time.perf_counter() - t_vol
    queue = extract_seeds(vol, shock_cfg)
    seeds = list(queue)
    timings["proposal_generation"] = time.perf_counter() - t

    axis = MedialAxis.empty_like(vol)
    grower = Grower(vol, axis, growth_cfg)
    while queue:
        seed = queue.pop()
        t = time.perf_counter()
        grow_seed(seed, vol, axis, growth_cfg, grower)
        timings["seed_growth"] += time.perf_counter() - t
        prune_seeds(queue, axis, growth_cfg.seed_margin)

    t = time.perf_counter()
    grow_end_points(vol, axis, growth_cfg, grower)
    timings["end_point_growth"] = time.perf_counter() - t

    axis.refresh_flags()
    total = time.perf_counter() - t_start
    timings["other"] = max(total - sum(timings[k] for k in STAGES[:3]), 0.0)
    timings["total"] = total
    # part of proposal generation; reported so it can be excluded from runtimes
    timings["cost_volume"] = cost_time
    return Extraction(axis, vol, seeds, timings, smoothed)
