"""Cost volume against an independent brute-force oracle, plus invariants."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockaxis.cost import (DEFAULT_WS, CostConfig, CostVolume, bhattacharyya, build_cost_volume,
                            color_cost, disk_area, hist_cost)
from shockaxis.imgproc import build_tile_grid, to_lab


# -- independent oracle -------------------------------------------------------

def _disk(r):
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
            if dy * dy + dx * dx <= r * r]


def oracle_color_volume(img, r_min, r_max, w_s, sub_r_min=1):
    lab = to_lab(img)
    h, w = lab.shape[:2]
    means = {}
    for r in range(sub_r_min, r_max + 1):
        off = np.array(_disk(r))
        for y in range(r, h - r):
            for x in range(r, w - r):
                means[y, x, r] = lab[y + off[:, 0], x + off[:, 1]].mean(axis=0)
    out = np.full((r_max - r_min + 1, h, w), np.inf)
    for r in range(r_min, r_max + 1):
        for y in range(r, h - r):
            for x in range(r, w - r):
                m = means[y, x, r]
                c = 0.0
                for rl in range(sub_r_min, r):
                    kids = np.array([means[y + a, x + b, rl] for a, b in _disk(r - rl)])
                    c += float(((kids - m) ** 2).sum())
                out[r - r_min, y, x] = c / len(_disk(r)) + w_s / r
    return out


def _tile_means(img, t):
    h, w = img.shape[:2]
    rows, cols = -(-h // t), -(-w // t)
    means = np.zeros((rows, cols, 3))
    cy = np.zeros(rows)
    cx = np.zeros(cols)
    for i in range(rows):
        ys = list(range(i * t, min((i + 1) * t, h)))
        cy[i] = sum(ys) / len(ys)
        for j in range(cols):
            xs = list(range(j * t, min((j + 1) * t, w)))
            cx[j] = sum(xs) / len(xs)
            block = img[ys[0]:ys[-1] + 1, xs[0]:xs[-1] + 1]
            means[i, j] = block.reshape(-1, 3).mean(axis=0)
    return means, cy, cx


def _bins(v, bins):
    return min(int(math.floor(v * bins)), bins - 1)


def _oracle_hist(img, tiles, y, x, r, bins, t):
    means, cy, cx = tiles
    reach = r - t * math.sqrt(2) / 2
    hist = np.zeros((3, bins), dtype=np.int64)
    vals = []
    if reach >= 0:
        for i in range(len(cy)):
            for j in range(len(cx)):
                if (cy[i] - y) ** 2 + (cx[j] - x) ** 2 <= reach * reach:
                    vals.append(means[i, j])
    if not vals:
        vals = [img[y + a, x + b] for a, b in _disk(r)]
    for v in vals:
        for ch in range(3):
            hist[ch, _bins(v[ch], bins)] += 1
    return hist


def _oracle_bhatt(h1, h2):
    n1, n2 = h1.sum(), h2.sum()
    if np.array_equal(h1 * n2, h2 * n1):
        return 0.0  # same distribution
    bc = np.sqrt(h1 * h2).sum() / math.sqrt(n1 * n2)
    return math.sqrt(max(1.0 - bc, 0.0))


def oracle_hist_volume(img, r_min, r_max, w_s, bins=10, t=6, sub_r_min=1):
    h, w = img.shape[:2]
    tiles = _tile_means(img, t)
    hists = {}
    for r in range(sub_r_min, r_max + 1):
        for y in range(r, h - r):
            for x in range(r, w - r):
                hists[y, x, r] = _oracle_hist(img, tiles, y, x, r, bins, t)
    out = np.full((r_max - r_min + 1, h, w), np.inf)
    for r in range(r_min, r_max + 1):
        for y in range(r, h - r):
            for x in range(r, w - r):
                p = hists[y, x, r]
                c = 0.0
                for rl in range(sub_r_min, r):
                    for a, b in _disk(r - rl):
                        q = hists[y + a, x + b, rl]
                        c += sum(_oracle_bhatt(p[ch], q[ch]) for ch in range(3)) / 3
                out[r - r_min, y, x] = c / r + w_s / r
    return out


def blobs_image(seed, h, w, noise=0.03):
    """A few flat rectangles and disks plus noise."""
    rng = np.random.default_rng(seed)
    img = np.empty((h, w, 3))
    img[:] = rng.random(3)
    yy, xx = np.mgrid[:h, :w]
    for _ in range(3):
        c = rng.random(3)
        if rng.random() < 0.5:
            y0, x0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
            img[y0:y0 + rng.integers(4, h // 2), x0:x0 + rng.integers(4, w // 2)] = c
        else:
            cy, cx, r = rng.integers(0, h), rng.integers(0, w), rng.integers(3, 9)
            img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = c
    return np.clip(img + rng.normal(0, noise, img.shape), 0, 1)


def _assert_close_volume(got, ref, tol=1e-9):
    assert got.shape == ref.shape
    assert np.array_equal(np.isinf(got), np.isinf(ref))
    fin = np.isfinite(ref)
    assert np.max(np.abs(got[fin] - ref[fin])) <= tol


# -- oracle equivalence -------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1])
def test_color_volume_matches_oracle(seed):
    img = blobs_image(seed, 24, 28)
    vol = build_cost_volume(img, CostConfig(kind="color", r_min=2, r_max=6))
    _assert_close_volume(vol.cost, oracle_color_volume(img, 2, 6, DEFAULT_WS["color"]))


def test_color_volume_matches_oracle_32():
    img = blobs_image(7, 32, 32)
    vol = build_cost_volume(img, CostConfig(kind="color", r_min=2, r_max=8))
    _assert_close_volume(vol.cost, oracle_color_volume(img, 2, 8, DEFAULT_WS["color"]))


@pytest.mark.parametrize("seed", [0, 1])
def test_hist_volume_matches_oracle(seed):
    img = blobs_image(seed, 26, 26, noise=0.05)
    vol = build_cost_volume(img, CostConfig(kind="hist", r_min=2, r_max=7))
    _assert_close_volume(vol.cost, oracle_hist_volume(img, 2, 7, DEFAULT_WS["hist"]))


def test_hist_volume_matches_oracle_32():
    img = blobs_image(3, 32, 32, noise=0.05)
    vol = build_cost_volume(img, CostConfig(kind="hist", r_min=2, r_max=8))
    _assert_close_volume(vol.cost, oracle_hist_volume(img, 2, 8, DEFAULT_WS["hist"]))


def test_direct_evaluators_match_volume():
    img = blobs_image(5, 22, 22)
    lab = to_lab(img)
    grid = build_tile_grid(img, 6)
    for kind in ("color", "hist"):
        cfg = CostConfig(kind=kind, r_max=6)
        vol = build_cost_volume(img, cfg)
        for y, x, r in [(8, 8, 5), (10, 12, 3), (6, 15, 6), (11, 11, 2)]:
            ref = (color_cost(lab, y, x, r, cfg) if kind == "color"
                   else hist_cost(img, grid, y, x, r, cfg))
            assert abs(vol.at(y, x, r) - ref) <= 1e-9


# -- exact values ---------------------------------------------------------------

@pytest.mark.parametrize("kind", ["color", "hist"])
def test_constant_image_cost_is_scale_term(kind):
    img = np.full((30, 34, 3), 0.37)
    vol = build_cost_volume(img, CostConfig(kind=kind, r_max=12))
    w_s = DEFAULT_WS[kind]
    for r in vol.scales:
        s = vol.slice(r)
        assert np.all(s[np.isfinite(s)] == w_s / r)


def test_constant_20x20_r5():
    vol = build_cost_volume(np.full((20, 20, 3), 0.5), CostConfig(kind="color", r_max=5))
    assert vol.at(10, 10, 5) == 1e-4 / 5 == 2e-5


def test_bhattacharyya_identities():
    a = np.zeros(10)
    b = np.zeros(10)
    a[0], b[1] = 1, 1
    assert abs(bhattacharyya(a, b) - 1.0) <= 1e-12
    h = np.array([3, 5, 2, 0, 0, 0, 0, 0, 0, 0])
    assert abs(bhattacharyya(h, h)) <= 1e-12
    assert bhattacharyya(h, 2 * h) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=10, max_size=10),
       st.lists(st.integers(0, 20), min_size=10, max_size=10))
def test_bhattacharyya_bounds_and_symmetry(a, b):
    if sum(a) == 0 or sum(b) == 0:
        return
    d = bhattacharyya(a, b)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert d == bhattacharyya(b, a)


# -- geometry and validity ------------------------------------------------------

def test_valid_counts_10x10():
    vol = build_cost_volume(np.random.default_rng(0).random((10, 10, 3)),
                            CostConfig(r_min=2, r_max=3))
    assert np.isfinite(vol.slice(2)).sum() == 36
    assert np.isfinite(vol.slice(3)).sum() == 16
    assert vol.evaluations == 52


def test_bsds_half_volume_layout():
    img = np.random.default_rng(0).random((161, 241, 3))
    vol = build_cost_volume(img, CostConfig(kind="color", r_min=2, r_max=41))
    assert vol.cost.size == 161 * 241 * 40
    for r in (2, 17, 41):
        valid = np.isfinite(vol.slice(r))
        assert not valid[:r].any() and not valid[-r:].any()
        assert not valid[:, :r].any() and not valid[:, -r:].any()
        assert valid[r:-r, r:-r].all()
    assert np.all(vol.cost[np.isfinite(vol.cost)] >= vol.w_s / 41)


def test_rmax_truncated_with_warning(caplog):
    with caplog.at_level("WARNING", logger="shockaxis.cost"):
        vol = build_cost_volume(np.zeros((12, 30, 3)), CostConfig(r_max=10))
    assert vol.r_max == 5
    assert "r_max" in caplog.text


def test_too_small_image_rejected():
    with pytest.raises(ValueError):
        build_cost_volume(np.zeros((4, 4, 3)), CostConfig())


@pytest.mark.parametrize("kw", [{"kind": "x"}, {"r_min": 1}, {"r_max": 1}, {"w_s": 0.0},
                                {"sub_r_min": 3}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        CostConfig(**kw)


def test_disk_area_strictly_increasing():
    areas = [disk_area(r) for r in range(1, 30)]
    assert all(b > a for a, b in zip(areas, areas[1:]))
    assert disk_area(1) == 5 and disk_area(2) == 13


@pytest.mark.parametrize("kind", ["color", "hist"])
def test_constant_image_monotone_in_r(kind):
    vol = build_cost_volume(np.full((30, 30, 3), 0.8), CostConfig(kind=kind, r_max=14))
    curve = [vol.at(15, 15, r) for r in vol.scales]
    assert all(b < a for a, b in zip(curve, curve[1:]))


@pytest.mark.parametrize("kind", ["color", "hist"])
def test_straddling_disk_costs_more(kind):
    img = np.zeros((40, 40, 3))
    img[:, :20] = (0.9, 0.1, 0.1)
    img[:, 20:] = (0.1, 0.1, 0.9)
    vol = build_cost_volume(img, CostConfig(kind=kind, r_max=8))
    for r in (3, 6, 8):
        assert vol.at(20, 20, r) > vol.at(20, 9, r)


def test_edge_sensitivity():
    img = np.zeros((40, 60, 3))
    img[:, :30] = (0.85, 0.15, 0.15)
    img[:, 30:] = (0.15, 0.15, 0.85)
    lab = to_lab(img)
    assert np.linalg.norm(lab[0, 0] - lab[0, -1]) > 20
    vol = build_cost_volume(img, CostConfig(kind="color", r_max=14))
    for x in range(16, 30):
        d = 30 - x  # distance to the nearest pixel of the other region
        col = [vol.at(20, x, r) for r in vol.scales]
        best = vol.r_min + int(np.argmin(col))
        assert best <= d + 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 1000))
def test_color_translation_invariance(dy, dx, seed):
    # content sits in a flat frame, so shifting it moves every valid entry
    base = np.full((36, 36, 3), 0.2)
    patch = blobs_image(seed, 16, 16, noise=0.0)
    a, b = base.copy(), base.copy()
    a[8:24, 8:24] = patch
    b[8 + dy:24 + dy, 8 + dx:24 + dx] = patch
    cfg = CostConfig(kind="color", r_max=5)
    va, vb = build_cost_volume(a, cfg), build_cost_volume(b, cfg)
    h, w = 36, 36
    for k in range(va.cost.shape[0]):
        sa = va.cost[k, :h - dy, :w - dx]
        sb = vb.cost[k, dy:, dx:]
        both = np.isfinite(sa) & np.isfinite(sb)
        assert np.allclose(sa[both], sb[both], rtol=0, atol=1e-9)


@pytest.mark.parametrize("dy,dx", [(6, 0), (0, 6), (6, 12)])
def test_hist_translation_by_whole_tiles(dy, dx):
    # tiles are fixed to the image grid, so only whole-tile shifts commute
    base = np.full((42, 48, 3), 0.2)
    patch = blobs_image(11, 18, 18, noise=0.0)
    a, b = base.copy(), base.copy()
    a[6:24, 6:24] = patch
    b[6 + dy:24 + dy, 6 + dx:24 + dx] = patch
    cfg = CostConfig(kind="hist", r_max=6)
    va, vb = build_cost_volume(a, cfg), build_cost_volume(b, cfg)
    for k in range(va.cost.shape[0]):
        sa = va.cost[k, :42 - dy, :48 - dx]
        sb = vb.cost[k, dy:, dx:]
        both = np.isfinite(sa) & np.isfinite(sb)
        assert np.allclose(sa[both], sb[both], rtol=0, atol=1e-9)


def test_volume_dump_roundtrip(tmp_path):
    img = blobs_image(2, 20, 24)
    vol = build_cost_volume(img, CostConfig(kind="hist", r_max=6))
    vol.save(tmp_path / "v.bin")
    back = CostVolume.load(tmp_path / "v.bin")
    assert (back.r_min, back.r_max, back.kind, back.w_s) == (2, 6, "hist", 2e-8)
    assert np.array_equal(np.isinf(back.cost), np.isinf(vol.cost))
    fin = np.isfinite(vol.cost)
    assert np.allclose(back.cost[fin], vol.cost[fin].astype(np.float32))
    raw = (tmp_path / "v.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(raw[:-4])
    with pytest.raises(ValueError):
        CostVolume.load(tmp_path / "bad.bin")
