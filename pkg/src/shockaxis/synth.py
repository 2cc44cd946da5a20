"""Synthetic shape fixtures and brute-force medial axes of binary masks.

Fixture specs use a small line format, one directive per line::

    canvas 100 60
    background 0.15 0.15 0.85
    noise 0.02 7              # sigma, optional rng seed
    rect 20 23 60 14  0.85 0.15 0.15          # x y w h  r g b
    disk 50 30 10  0.85 0.15 0.15             # cx cy radius  r g b
    plus 50 30 20 8  0.85 0.15 0.15           # cx cy arm width  r g b
    dumbbell 20 60 30 8 4  0.85 0.15 0.15     # cx1 cx2 cy radius bar  r g b
    wedge 10 30 70 20 70 40  0.85 0.15 0.15   # triangle vertices  r g b

``#`` starts a comment.  Later primitives paint over earlier ones.
"""
from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra
from skimage.morphology import skeletonize


class SpecError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


_ARITY = {"rect": 4, "disk": 3, "plus": 4, "dumbbell": 5, "wedge": 6}


@dataclass(frozen=True)
class Primitive:
    kind: str
    params: tuple
    color: tuple

    def mask(self, shape) -> np.ndarray:
        h, w = shape
        yy, xx = np.mgrid[0:h, 0:w]
        p = self.params
        if self.kind == "rect":
            x, y, rw, rh = (int(v) for v in p)
            return (xx >= x) & (xx < x + rw) & (yy >= y) & (yy < y + rh)
        if self.kind == "disk":
            cx, cy, r = p
            return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        if self.kind == "plus":
            cx, cy, arm, width = (int(v) for v in p)
            lo = -(width // 2)
            hi = lo + width
            horiz = (np.abs(xx - cx) <= arm) & (yy - cy >= lo) & (yy - cy < hi)
            vert = (np.abs(yy - cy) <= arm) & (xx - cx >= lo) & (xx - cx < hi)
            return horiz | vert
        if self.kind == "dumbbell":
            cx1, cx2, cy, r, bar = p
            a = (xx - cx1) ** 2 + (yy - cy) ** 2 <= r * r
            b = (xx - cx2) ** 2 + (yy - cy) ** 2 <= r * r
            lo = cy - int(bar) // 2
            band = (yy >= lo) & (yy < lo + int(bar)) & (xx >= min(cx1, cx2)) & (xx <= max(cx1, cx2))
            return a | b | band
        if self.kind == "wedge":
            (x1, y1), (x2, y2), (x3, y3) = p[0:2], p[2:4], p[4:6]

            def side(ax, ay, bx, by):
                return (bx - ax) * (yy - ay) - (by - ay) * (xx - ax)

            s1, s2, s3 = side(x1, y1, x2, y2), side(x2, y2, x3, y3), side(x3, y3, x1, y1)
            return ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
        raise ValueError(f"unknown primitive {self.kind!r}")


@dataclass
class ShapeSpec:
    width: int
    height: int
    background: tuple = (0.15, 0.15, 0.85)
    primitives: list = field(default_factory=list)
    noise: float = 0.0
    noise_seed: int = 0

    def add(self, kind: str, *params, color=(0.85, 0.15, 0.15)) -> "ShapeSpec":
        if kind not in _ARITY or len(params) != _ARITY[kind]:
            raise ValueError(f"{kind} takes {_ARITY.get(kind)} parameters")
        self.primitives.append(Primitive(kind, tuple(params), tuple(color)))
        return self


def _numbers(tokens, lineno, kind):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise SpecError(lineno, f"non-numeric argument to {kind!r}") from None


def parse_spec(text: str) -> ShapeSpec:
    spec = None
    pending = []
    background, noise, noise_seed = (0.15, 0.15, 0.85), 0.0, 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = shlex.split(raw, comments=True)
        if not tokens:
            continue
        kind, args = tokens[0], tokens[1:]
        if kind == "canvas":
            vals = _numbers(args, lineno, kind)
            if len(vals) != 2 or min(vals) < 1:
                raise SpecError(lineno, "canvas needs positive width and height")
            spec = ShapeSpec(int(vals[0]), int(vals[1]))
        elif kind == "background":
            vals = _numbers(args, lineno, kind)
            if len(vals) != 3:
                raise SpecError(lineno, "background needs r g b")
            background = tuple(vals)
        elif kind == "noise":
            vals = _numbers(args, lineno, kind)
            if len(vals) not in (1, 2) or vals[0] < 0:
                raise SpecError(lineno, "noise needs sigma [seed]")
            noise = vals[0]
            noise_seed = int(vals[1]) if len(vals) == 2 else 0
        elif kind in _ARITY:
            vals = _numbers(args, lineno, kind)
            if len(vals) != _ARITY[kind] + 3:
                raise SpecError(lineno, f"{kind} needs {_ARITY[kind]} geometry values and r g b")
            pending.append((lineno, Primitive(kind, tuple(vals[:-3]), tuple(vals[-3:]))))
        else:
            raise SpecError(lineno, f"unknown directive {kind!r}")
    if spec is None:
        raise SpecError(0, "missing canvas directive")
    spec.background, spec.noise, spec.noise_seed = background, noise, noise_seed
    for lineno, prim in pending:
        if not all(0.0 <= c <= 1.0 for c in prim.color):
            raise SpecError(lineno, "colors must lie in [0, 1]")
        spec.primitives.append(prim)
    return spec


def render(spec: ShapeSpec):
    """Rasterize a spec; returns (image, [mask per primitive], background mask)."""
    shape = (spec.height, spec.width)
    img = np.empty(shape + (3,))
    img[:] = spec.background
    painted = []
    for prim in spec.primitives:
        m = prim.mask(shape)
        if not m.any():
            raise ValueError(f"{prim.kind} primitive lies outside the canvas")
        img[m] = prim.color
        painted = [q & ~m for q in painted]
        painted.append(m)
    background = ~np.logical_or.reduce(painted) if painted else np.ones(shape, bool)
    if spec.noise > 0:
        rng = np.random.default_rng(spec.noise_seed)
        n = np.clip(rng.normal(0.0, spec.noise, img.shape), -5 * spec.noise, 5 * spec.noise)
        img = img + n
    return np.clip(img, 0.0, 1.0), painted, background


@dataclass(frozen=True)
class OracleSkeleton:
    mask: np.ndarray     # bool, medial pixels
    radius: np.ndarray   # float, distance-transform value on medial pixels, 0 elsewhere


def distance_map(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance to the nearest pixel outside the mask (canvas edge counts)."""
    padded = np.pad(mask.astype(bool), 1)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


# Pixel-centre distances move in steps of whole pixels along a digital
# boundary, so staircase corners look like tiny protrusions.  A slack below
# sqrt(2) - 1 absorbs them while keeping the bisectors of 45 degree corners.
CONTAINMENT_SLACK = 0.3


def maximal_disk_centers(mask: np.ndarray, slack: float = CONTAINMENT_SLACK,
                         chunk: int = 2048) -> np.ndarray:
    """Pixels whose inscribed disk is not contained in a larger pixel's disk.

    Brute force over all pairs: p is dropped when some q with R_q > R_p has
    |p - q| + R_p <= R_q + slack.
    """
    mask = np.asarray(mask, dtype=bool)
    dist = distance_map(mask)
    ys, xs = np.nonzero(mask)
    rad = dist[ys, xs]
    order = np.argsort(rad, kind="stable")
    ys, xs, rad = ys[order], xs[order], rad[order]
    keep = np.ones(ys.size, dtype=bool)
    for lo in range(0, ys.size, chunk):
        sl = slice(lo, lo + chunk)
        # only strictly larger disks can contain p
        first = np.searchsorted(rad, rad[sl].min(), side="right")
        qy, qx, qr = ys[first:], xs[first:], rad[first:]
        d = np.hypot(ys[sl, None] - qy[None], xs[sl, None] - qx[None])
        inside = (qr[None] > rad[sl, None]) & (d + rad[sl, None] <= qr[None] + slack + 1e-9)
        keep[sl] = ~inside.any(axis=1)
    out = np.zeros(mask.shape, dtype=bool)
    out[ys[keep], xs[keep]] = True
    return out


def oracle_mat(mask, slack: float = CONTAINMENT_SLACK) -> OracleSkeleton:
    """Maximal-disk centres thinned to unit width; radius from the distance map.

    Centres with radius <= 1 are single boundary pixels and are discarded, as
    are one-pixel spurs hanging off a junction (quantization around blobs).
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    dist = distance_map(mask)
    centers = maximal_disk_centers(mask, slack) & (dist > 1.0)
    thin = _drop_stubs(skeletonize(centers))
    joined = _connect(thin, mask, dist)
    if joined is not thin:
        thin = _drop_stubs(skeletonize(joined))
    return OracleSkeleton(thin, np.where(thin, dist, 0.0))


_EIGHT = np.ones((3, 3), dtype=bool)


def _connect(skel: np.ndarray, mask: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Join skeleton pieces lying in one mask component by ridge-hugging paths.

    Discrete maximal-disk centres thin out where a ribbon widens into a blob,
    leaving gaps.  Pieces are merged greedily along the cheapest path inside
    the mask, with step cost 1 / dist^2 so the path keeps to the centre.
    Returns ``skel`` itself when nothing needs joining.
    """
    pieces, n = ndimage.label(skel, structure=_EIGHT)
    if n < 2:
        return skel
    regions, _ = ndimage.label(mask, structure=_EIGHT)
    ys, xs = np.nonzero(mask)
    label_of = pieces[ys, xs]
    region_of = regions[ys, xs]

    def split_region():
        for reg in np.unique(region_of[label_of > 0]):
            labs = np.unique(label_of[(region_of == reg) & (label_of > 0)])
            if len(labs) > 1:
                return labs
        return None

    labs = split_region()
    if labs is None:
        return skel
    index = np.full(mask.shape, -1, dtype=np.int64)
    index[ys, xs] = np.arange(ys.size)
    weight = 1.0 / np.maximum(dist[ys, xs], 0.5) ** 2
    rows, cols, vals = [], [], []
    h, w = mask.shape
    for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
        yy, xx = ys + dy, xs + dx
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        ok[ok] &= index[yy[ok], xx[ok]] >= 0
        a = np.nonzero(ok)[0]
        b = index[yy[ok], xx[ok]]
        step = np.hypot(dy, dx) * 0.5 * (weight[a] + weight[b])
        rows += [a, b]
        cols += [b, a]
        vals += [step, step]
    graph = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(ys.size, ys.size))
    out = skel.copy()
    while labs is not None:
        sizes = [int((label_of == k).sum()) for k in labs]
        root = labs[int(np.argmax(sizes))]
        src = np.nonzero(label_of == root)[0]
        cost, pred, _ = dijkstra(graph, indices=src, min_only=True, return_predecessors=True)
        others = np.nonzero(np.isin(label_of, labs) & (label_of != root))[0]
        target = others[np.argmin(cost[others])]
        label_of[label_of == label_of[target]] = root
        node = target
        while node >= 0:
            out[ys[node], xs[node]] = True
            label_of[node] = root
            node = pred[node]
        labs = split_region()
    return out


def _degree(skel: np.ndarray) -> np.ndarray:
    k = np.ones((3, 3), dtype=np.int64)
    k[1, 1] = 0
    return ndimage.convolve(skel.astype(np.int64), k, mode="constant") * skel


def _drop_stubs(skel: np.ndarray) -> np.ndarray:
    """Remove one-pixel spurs: end points whose only neighbour is a junction."""
    deg = _degree(skel)
    junction = ndimage.binary_dilation(deg >= 3, structure=np.ones((3, 3), bool))
    stubs = (deg == 1) & junction
    return skel & ~stubs


def reconstruct(skel: OracleSkeleton, shape=None) -> np.ndarray:
    """Union of the disks (center, radius) over the skeleton."""
    shape = shape or skel.mask.shape
    out = np.zeros(shape, dtype=bool)
    for y, x in zip(*np.nonzero(skel.mask)):
        r = skel.radius[y, x]
        ri = int(np.floor(r))
        dy, dx = np.mgrid[-ri:ri + 1, -ri:ri + 1]
        inside = dy * dy + dx * dx <= r * r
        yy, xx = y + dy[inside], x + dx[inside]
        ok = (yy >= 0) & (yy < shape[0]) & (xx >= 0) & (xx < shape[1])
        out[yy[ok], xx[ok]] = True
    return out


def write_fixture(spec: ShapeSpec, outdir, name: str = "fixture") -> Path:
    """Render a spec and write image plus oracle skeletons in the ground-truth layout.

    Layout: ``<outdir>/<name>.png`` and ``<outdir>/<name>/annotation_<k>.png``
    with ``annotation_<k>_radius.png``; annotation 0 holds every region's
    skeleton, annotations 1.. hold one primitive each.
    """
    from .io import write_annotation
    from .imgproc import save_rgb

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    img, masks, background = render(spec)
    save_rgb(outdir / f"{name}.png", img)
    gtdir = outdir / name
    gtdir.mkdir(exist_ok=True)
    skels = [oracle_mat(m) for m in masks if m.any()]
    if background.any():
        bg = oracle_mat(background)
    else:
        bg = None
    union_mask = np.zeros(img.shape[:2], bool)
    union_rad = np.zeros(img.shape[:2])
    for s in skels + ([bg] if bg is not None else []):
        union_mask |= s.mask
        union_rad = np.where(s.mask, s.radius, union_rad)
    write_annotation(gtdir, 0, union_mask, union_rad)
    for k, s in enumerate(skels, start=1):
        write_annotation(gtdir, k, s.mask, s.radius)
    return gtdir


# canonical fixtures used across tests and the acceptance suite; a 120x80
# canvas puts the 1%-of-diagonal matching tolerance just above sqrt(2)
CANVAS = (120, 80)


def rectangle_spec(noise=0.0) -> ShapeSpec:
    return ShapeSpec(*CANVAS, noise=noise).add("rect", 30, 33, 60, 14)


def disk_spec(noise=0.0) -> ShapeSpec:
    return ShapeSpec(*CANVAS, noise=noise).add("disk", 60, 40, 10)


def plus_spec(noise=0.0) -> ShapeSpec:
    return ShapeSpec(*CANVAS, noise=noise).add("plus", 60, 40, 24, 10)


def dumbbell_spec(noise=0.0, bar=8) -> ShapeSpec:
    return ShapeSpec(*CANVAS, noise=noise).add("dumbbell", 36, 84, 40, 9, bar)


def wedge_spec(noise=0.0) -> ShapeSpec:
    return ShapeSpec(*CANVAS, noise=noise).add("wedge", 20, 40, 100, 22, 100, 58)


FIXTURES = {"rectangle": rectangle_spec, "disk": disk_spec, "plus": plus_spec,
            "dumbbell": dumbbell_spec, "wedge": wedge_spec}


def scene_spec(noise=0.02, seed=3) -> ShapeSpec:
    """Half-resolution (161x241) scene with one of each primitive, for search-space counts."""
    spec = ShapeSpec(241, 161, noise=noise, noise_seed=seed)
    spec.add("rect", 20, 20, 90, 24, color=(0.85, 0.15, 0.15))
    spec.add("disk", 180, 50, 28, color=(0.15, 0.85, 0.15))
    spec.add("plus", 70, 110, 36, 16, color=(0.85, 0.85, 0.15))
    spec.add("dumbbell", 140, 215, 115, 14, 8, color=(0.85, 0.15, 0.85))
    spec.add("wedge", 130, 150, 230, 100, 230, 155, color=(0.15, 0.85, 0.85))
    return spec
