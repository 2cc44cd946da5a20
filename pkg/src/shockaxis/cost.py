"""Dense disk-cost volumes.

A disk D(x, r) is the set of integer offsets with dy^2 + dx^2 <= r^2 around x.
Its cost is low when the image inside is homogeneous and the disk is as
large as it can be without leaving the region.  Two homogeneity measures are
supported:

* ``color``: squared Lab distances between the disk's mean color and the
  mean colors of every disk it encloses, normalized by the disk area.
* ``hist``: Bhattacharyya distances between per-channel intensity
  histograms (built from 6x6 tile means) of the disk and of every disk it
  encloses, normalized by the radius.

An enclosed disk D(x_k, r_l) is one with |x_k - x| + r_l <= r and
r_l in [sub_r_min, r - 1].
"""
from __future__ import annotations

import functools
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numba import njit

from .imgproc import TileGrid, as_rgb, build_tile_grid, to_lab

log = logging.getLogger(__name__)

COLOR = "color"
HIST = "hist"
COST_KINDS = (COLOR, HIST)
DEFAULT_WS = {COLOR: 1e-4, HIST: 2e-8}

# 1 - BC below this is treated as identical distributions (ulp noise in BC
# would otherwise be amplified by the square root)
BC_EPS = 1e-12


@dataclass(frozen=True)
class CostConfig:
    kind: str = COLOR
    w_s: float | None = None
    r_min: int = 2
    r_max: int = 41
    bins: int = 10
    tile_size: int = 6
    sub_r_min: int = 1

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.r_min < 2 or self.r_max < self.r_min:
            raise ValueError("need 2 <= r_min <= r_max")
        if not 1 <= self.sub_r_min <= self.r_min:
            raise ValueError("sub_r_min must lie in [1, r_min]")
        if self.w_s is not None and not self.w_s > 0:
            raise ValueError("w_s must be positive")
        if self.bins < 1 or self.tile_size < 1:
            raise ValueError("bins and tile_size must be >= 1")

    @property
    def scale_weight(self) -> float:
        return DEFAULT_WS[self.kind] if self.w_s is None else self.w_s


# ---------------------------------------------------------------------------
# disk geometry

@functools.lru_cache(maxsize=None)
def disk_halfwidths(r: int) -> np.ndarray:
    """Half-width of each row dy in [-r, r] of the digital disk of radius r."""
    return np.array([math.isqrt(r * r - dy * dy) for dy in range(-r, r + 1)],
                    dtype=np.int64)


@functools.lru_cache(maxsize=None)
def disk_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    inside = dy * dy + dx * dx <= r * r
    return dy[inside], dx[inside]


def disk_area(r: int) -> int:
    return int(disk_halfwidths(r).sum() * 2 + 2 * r + 1)


def disk_mask(r: int) -> np.ndarray:
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    return dy * dy + dx * dx <= r * r


def disk_fits(shape, y: int, x: int, r: int) -> bool:
    h, w = shape[:2]
    return r <= y <= h - 1 - r and r <= x <= w - 1 - r


def max_fitting_radius(shape) -> int:
    return (min(shape[:2]) - 1) // 2


@dataclass(frozen=True)
class DiskGeometry:
    radius: int
    dy: np.ndarray = field(repr=False)
    dx: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, r: int) -> "DiskGeometry":
        dy, dx = disk_offsets(r)
        return cls(r, dy, dx)

    @property
    def area(self) -> int:
        return int(self.dy.size)


def _enclosed_count(r: int, sub_r_min: int) -> int:
    return sum(disk_area(r - rl) for rl in range(sub_r_min, r))


# ---------------------------------------------------------------------------
# Bhattacharyya distance

def bhattacharyya(h1, h2) -> float:
    """Bhattacharyya distance between two (unnormalized) histograms."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    n1, n2 = h1.sum(), h2.sum()
    if n1 <= 0 or n2 <= 0:
        raise ValueError("histograms must have positive mass")
    bc = 0.0
    for a, b in zip(h1, h2):
        if a > 0 and b > 0:
            bc += math.sqrt(a * b)
    gap = 1.0 - bc / math.sqrt(n1 * n2)
    return math.sqrt(gap) if gap >= BC_EPS else 0.0


def bin_index(values, bins: int) -> np.ndarray:
    return np.minimum((np.asarray(values) * bins).astype(np.int64), bins - 1)


# ---------------------------------------------------------------------------
# direct (per-disk) evaluation; slow but transparent

def _disk_pixels(img, y, x, r):
    dy, dx = disk_offsets(r)
    return img[y + dy, x + dx]


def disk_histogram(rgb: np.ndarray, grid: TileGrid, y: int, x: int, r: int,
                   bins: int) -> np.ndarray:
    """(3, bins) histogram of tile means whose tiles lie inside D(x, r).

    Falls back to binning the disk's own pixels when no tile is enclosed.
    """
    half_diag = grid.tile_size * math.sqrt(2.0) / 2.0
    reach = r - half_diag
    hist = np.zeros((3, bins), dtype=np.int64)
    if reach >= 0:
        cy = grid.centers_y[:, None]
        cx = grid.centers_x[None, :]
        inside = (cy - y) ** 2 + (cx - x) ** 2 <= reach * reach
        if inside.any():
            for ch in range(3):
                idx = bin_index(grid.means[..., ch][inside], bins)
                hist[ch] = np.bincount(idx, minlength=bins)
            return hist
    px = _disk_pixels(rgb, y, x, r)
    for ch in range(3):
        hist[ch] = np.bincount(bin_index(px[:, ch], bins), minlength=bins)
    return hist


def _enclosed_disks(y, x, r, sub_r_min):
    for rl in range(sub_r_min, r):
        dy, dx = disk_offsets(r - rl)
        for a, b in zip(dy, dx):
            yield y + int(a), x + int(b), rl


def color_cost(lab: np.ndarray, y: int, x: int, r: int, cfg: CostConfig) -> float:
    """Color-homogeneity cost of one disk, by direct enumeration."""
    if not disk_fits(lab.shape, y, x, r):
        return math.inf
    mean = _disk_pixels(lab, y, x, r).mean(axis=0)
    c = 0.0
    for yk, xk, rl in _enclosed_disks(y, x, r, cfg.sub_r_min):
        diff = mean - _disk_pixels(lab, yk, xk, rl).mean(axis=0)
        c += float(diff @ diff)
    return c / disk_area(r) + cfg.scale_weight / r


def hist_cost(rgb: np.ndarray, grid: TileGrid, y: int, x: int, r: int,
              cfg: CostConfig) -> float:
    """Intensity-histogram cost of one disk, by direct enumeration."""
    if not disk_fits(rgb.shape, y, x, r):
        return math.inf
    parent = disk_histogram(rgb, grid, y, x, r, cfg.bins)
    c = 0.0
    for yk, xk, rl in _enclosed_disks(y, x, r, cfg.sub_r_min):
        child = disk_histogram(rgb, grid, yk, xk, rl, cfg.bins)
        c += sum(bhattacharyya(parent[ch], child[ch]) for ch in range(3)) / 3.0
    return c / r + cfg.scale_weight / r


# ---------------------------------------------------------------------------
# the volume

@dataclass
class CostVolume:
    """C(x, r) for every pixel and scale; +inf marks disks leaving the image."""
    cost: np.ndarray  # (n_scales, H, W)
    r_min: int
    r_max: int
    kind: str
    w_s: float
    evaluations: int = 0

    @property
    def shape(self):
        return self.cost.shape[1:]

    @property
    def height(self) -> int:
        return self.cost.shape[1]

    @property
    def width(self) -> int:
        return self.cost.shape[2]

    @property
    def scales(self) -> range:
        return range(self.r_min, self.r_max + 1)

    def at(self, y: int, x: int, r: int) -> float:
        if r < self.r_min or r > self.r_max:
            return math.inf
        if not (0 <= y < self.height and 0 <= x < self.width):
            return math.inf
        return float(self.cost[r - self.r_min, y, x])

    def is_valid(self, y: int, x: int, r: int) -> bool:
        return math.isfinite(self.at(y, x, r))

    def slice(self, r: int) -> np.ndarray:
        return self.cost[r - self.r_min]

    # dump format: magic, width, height, r_min, r_max, kind code, then
    # float32 costs in scale-major, row-major order (+inf = invalid)
    _HEADER = struct.Struct("<8sIIIIB3x")
    _MAGIC = b"SHKCOST1"

    def save(self, path) -> None:
        header = self._HEADER.pack(self._MAGIC, self.width, self.height, self.r_min,
                                   self.r_max, COST_KINDS.index(self.kind))
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.cost.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path, w_s: float | None = None) -> "CostVolume":
        raw = Path(path).read_bytes()
        magic, w, h, r_min, r_max, code = cls._HEADER.unpack_from(raw)
        if magic != cls._MAGIC:
            raise ValueError(f"{path}: not a cost-volume dump")
        n = r_max - r_min + 1
        data = np.frombuffer(raw, dtype="<f4", offset=cls._HEADER.size)
        if data.size != n * h * w:
            raise ValueError(f"{path}: truncated cost-volume dump")
        kind = COST_KINDS[code]
        cost = data.reshape(n, h, w).astype(np.float64)
        return cls(cost, r_min, r_max, kind,
                   DEFAULT_WS[kind] if w_s is None else w_s,
                   int(np.isfinite(cost).sum()))


# ---------------------------------------------------------------------------
# fast kernels

@njit(cache=True)
def _disk_sum_into(prefix, out, y0, y1, x0, x1, hw, weight):
    """out[y, x] += weight * sum over the disk with row half-widths hw.

    prefix is a row-wise cumulative sum of shape (H, W + 1, C).
    """
    d = (hw.shape[0] - 1) // 2
    nch = prefix.shape[2]
    for y in range(y0, y1):
        for x in range(x0, x1):
            for k in range(hw.shape[0]):
                yy = y + k - d
                w = hw[k]
                for c in range(nch):
                    out[y, x, c] += weight * (prefix[yy, x + w + 1, c] - prefix[yy, x - w, c])


def _row_prefix(arr: np.ndarray) -> np.ndarray:
    h, w, c = arr.shape
    out = np.zeros((h, w + 1, c))
    np.cumsum(arr, axis=1, out=out[:, 1:, :])
    return out


def _disk_means(img: np.ndarray, radii) -> dict[int, np.ndarray]:
    """Mean of img over D(x, r) at every centre where the disk fits."""
    prefix = _row_prefix(img)
    h, w = img.shape[:2]
    means = {}
    for r in radii:
        acc = np.zeros_like(img)
        if h - r > r and w - r > r:
            _disk_sum_into(prefix, acc, r, h - r, r, w - r, disk_halfwidths(r), 1.0)
        means[r] = acc / disk_area(r)
    return means


def _color_volume(lab: np.ndarray, cfg: CostConfig, r_max: int) -> np.ndarray:
    h, w = lab.shape[:2]
    # shift to a reference color so flat images give exactly zero features
    centered = lab - lab[0, 0]
    radii = range(cfg.sub_r_min, r_max + 1)
    means = _disk_means(centered, radii)
    n_scales = r_max - cfg.r_min + 1
    # channels 0-2: sum of enclosed mean features; channel 3: sum of squared norms
    acc = np.zeros((n_scales, h, w, 4))
    for rl in range(cfg.sub_r_min, r_max):
        feat = np.concatenate([means[rl], (means[rl] ** 2).sum(axis=2, keepdims=True)],
                              axis=2)
        prefix = _row_prefix(feat)
        for r in range(max(rl + 1, cfg.r_min), r_max + 1):
            if h - r <= r or w - r <= r:
                continue
            _disk_sum_into(prefix, acc[r - cfg.r_min], r, h - r, r, w - r,
                           disk_halfwidths(r - rl), 1.0)
    cost = np.full((n_scales, h, w), np.inf)
    for r in range(cfg.r_min, r_max + 1):
        if h - r <= r or w - r <= r:
            continue
        s = r - cfg.r_min
        f = means[r][r:h - r, r:w - r]
        s1 = acc[s, r:h - r, r:w - r, :3]
        s2 = acc[s, r:h - r, r:w - r, 3]
        n = _enclosed_count(r, cfg.sub_r_min)
        c = n * (f * f).sum(axis=2) - 2.0 * (f * s1).sum(axis=2) + s2
        np.maximum(c, 0.0, out=c)
        cost[s, r:h - r, r:w - r] = c / disk_area(r) + cfg.scale_weight / r
    return cost


@njit(cache=True)
def _histograms_at_scale(rgb, tile_means, cy, cx, r, hw_pix, half_diag, bins, out, mass):
    h, w = rgb.shape[:2]
    reach = r - half_diag
    ty_n = cy.shape[0]
    tx_n = cx.shape[0]
    for y in range(r, h - r):
        for x in range(r, w - r):
            n = 0
            if reach >= 0:
                r2 = reach * reach
                for i in range(ty_n):
                    dyc = cy[i] - y
                    if dyc * dyc > r2:
                        continue
                    for j in range(tx_n):
                        dxc = cx[j] - x
                        if dyc * dyc + dxc * dxc <= r2:
                            n += 1
                            for c in range(3):
                                b = int(tile_means[i, j, c] * bins)
                                if b > bins - 1:
                                    b = bins - 1
                                out[y, x, c, b] += 1
            if n == 0:
                for k in range(2 * r + 1):
                    yy = y + k - r
                    for xx in range(x - hw_pix[k], x + hw_pix[k] + 1):
                        n += 1
                        for c in range(3):
                            b = int(rgb[yy, xx, c] * bins)
                            if b > bins - 1:
                                b = bins - 1
                            out[y, x, c, b] += 1
            mass[y, x] = n


@njit(cache=True)
def _pair_distance(psq, pn, csq, cn, i, j):
    """Channel-averaged Bhattacharyya distance from square-rooted bin counts."""
    bins = psq.shape[2]
    denom = pn[i] * cn[j]
    dsum = 0.0
    for c in range(3):
        bc = 0.0
        for b in range(bins):
            bc += psq[i, c, b] * csq[j, c, b]
        gap = 1.0 - bc / denom
        if gap >= 1e-12:
            dsum += math.sqrt(gap)
    return dsum / 3.0


@njit(cache=True)
def _lookup_disk_sum(pid, cid, psq, pn, csq, cn, table, y0, y1, x0, x1, hw, out):
    """out[y, x] += sum over child centres in the disk of the pair distance.

    table caches distances by (parent id, child id); NaN marks unknown.
    """
    d = (hw.shape[0] - 1) // 2
    for y in range(y0, y1):
        for x in range(x0, x1):
            u = pid[y, x]
            row = table[u]
            acc = 0.0
            for k in range(hw.shape[0]):
                yy = y + k - d
                for xx in range(x - hw[k], x + hw[k] + 1):
                    v = cid[yy, xx]
                    t = row[v]
                    if t != t:
                        t = _pair_distance(psq, pn, csq, cn, u, v)
                        row[v] = t
                    acc += t
            out[y, x] += acc


@njit(cache=True)
def _lookup_prefix_sum(pid, cid, psq, pn, csq, cn, y0, y1, x0, x1, hw, out):
    """Same sums as _lookup_disk_sum, via a row prefix per parent histogram."""
    h, w = cid.shape
    d = (hw.shape[0] - 1) // 2
    prefix = np.zeros((h, w + 1))
    row = np.empty(csq.shape[0])
    for u in range(psq.shape[0]):
        for v in range(csq.shape[0]):
            row[v] = _pair_distance(psq, pn, csq, cn, u, v)
        for yy in range(h):
            run = 0.0
            for xx in range(w):
                c = cid[yy, xx]
                if c >= 0:
                    run += row[c]
                prefix[yy, xx + 1] = run
        for y in range(y0, y1):
            for x in range(x0, x1):
                if pid[y, x] != u:
                    continue
                acc = 0.0
                for k in range(hw.shape[0]):
                    yy = y + k - d
                    acc += prefix[yy, x + hw[k] + 1] - prefix[yy, x - hw[k]]
                out[y, x] += acc


_ROW_HASH = np.random.default_rng(0x5EED).integers(1, 2**62, size=64, dtype=np.int64)


def _unique_rows(block: np.ndarray):
    """np.unique(block, axis=0, return_inverse=True), via int64 row hashes."""
    weights = _ROW_HASH[:block.shape[1]] if block.shape[1] <= 64 else None
    if weights is not None:
        with np.errstate(over="ignore"):
            keys = block @ weights
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        uniq = block[first]
        if np.array_equal(uniq[inverse], block):
            return uniq, inverse.ravel()
    uniq, inverse = np.unique(block, axis=0, return_inverse=True)
    return uniq, inverse.ravel()


def _histogram_ids(hist: np.ndarray, mass: np.ndarray, r: int):
    """Label each valid centre with the index of its distinct histogram."""
    h, w = mass.shape
    ids = np.full((h, w), -1, dtype=np.int64)
    block = hist[r:h - r, r:w - r].reshape(-1, hist.shape[2] * hist.shape[3])
    uniq, inverse = _unique_rows(block)
    ids[r:h - r, r:w - r] = inverse.reshape(h - 2 * r, w - 2 * r)
    uniq = uniq.reshape(-1, hist.shape[2], hist.shape[3])
    return ids, uniq, uniq[:, 0, :].sum(axis=1)


def _hist_volume(rgb: np.ndarray, cfg: CostConfig, r_max: int) -> np.ndarray:
    h, w = rgb.shape[:2]
    grid = build_tile_grid(rgb, cfg.tile_size)
    half_diag = cfg.tile_size * math.sqrt(2.0) / 2.0
    labels = {}
    for r in range(cfg.sub_r_min, r_max + 1):
        if not (h - r > r and w - r > r):
            continue
        hist = np.zeros((h, w, 3, cfg.bins), dtype=np.int64)
        mass = np.zeros((h, w), dtype=np.int64)
        _histograms_at_scale(rgb, grid.means, grid.centers_y, grid.centers_x, r,
                             disk_halfwidths(r), half_diag, cfg.bins, hist, mass)
        ids, uniq, umass = _histogram_ids(hist, mass, r)
        labels[r] = (ids, np.sqrt(uniq), np.sqrt(umass.astype(np.float64)))
    n_scales = r_max - cfg.r_min + 1
    cost = np.full((n_scales, h, w), np.inf)
    for r in range(cfg.r_min, r_max + 1):
        if r not in labels:
            continue
        pid, psq, pn = labels[r]
        n_valid = (h - 2 * r) * (w - 2 * r)
        c = np.zeros((h, w))
        for rl in range(cfg.sub_r_min, r):
            cid, csq, cn = labels[rl]
            hw = disk_halfwidths(r - rl)
            if len(psq) * (h * w + len(csq)) < n_valid * disk_area(r - rl):
                _lookup_prefix_sum(pid, cid, psq, pn, csq, cn, r, h - r, r, w - r, hw, c)
            else:
                table = np.full((len(psq), len(csq)), np.nan)
                _lookup_disk_sum(pid, cid, psq, pn, csq, cn, table, r, h - r, r, w - r, hw, c)
        cost[r - cfg.r_min, r:h - r, r:w - r] = (
            c[r:h - r, r:w - r] / r + cfg.scale_weight / r)
    return cost


def build_cost_volume(img, cfg: CostConfig = CostConfig()) -> CostVolume:
    """Compute C(x, r) for all positions and scales of an sRGB image."""
    rgb = as_rgb(img)
    fit = max_fitting_radius(rgb.shape)
    if fit < cfg.r_min:
        raise ValueError(
            f"image {rgb.shape[1]}x{rgb.shape[0]} cannot hold a disk of radius {cfg.r_min}")
    r_max = cfg.r_max
    if r_max > fit:
        log.warning("r_max=%d exceeds the largest disk fitting the image; using %d",
                    r_max, fit)
        r_max = fit
    if cfg.kind == COLOR:
        cost = _color_volume(to_lab(rgb), cfg, r_max)
    else:
        cost = _hist_volume(rgb, cfg, r_max)
    return CostVolume(cost, cfg.r_min, r_max, cfg.kind, cfg.scale_weight,
                      int(np.isfinite(cost).sum()))


def effective_config(cfg: CostConfig, shape) -> CostConfig:
    """cfg with r_max truncated to what fits in an image of the given shape."""
    return replace(cfg, r_max=min(cfg.r_max, max_fitting_radius(shape)))
