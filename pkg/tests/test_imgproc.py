import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from shockaxis.imgproc import (ImageError, as_rgb, build_tile_grid, from_lab, load_image,
                               save_rgb, smooth_l0, to_lab)


def _srgb_to_lab_reference(rgb):
    """Textbook sRGB -> XYZ (D65) -> Lab, written out independently."""
    def lin(c):
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4
    r, g, b = (lin(c) for c in rgb)
    x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b
    y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b
    z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b
    xn, yn, zn = 0.95047, 1.0, 1.08883
    eps, kappa = 216 / 24389, 24389 / 27

    def f(t):
        return t ** (1 / 3) if t > eps else (kappa * t + 16) / 116
    fx, fy, fz = f(x / xn), f(y / yn), f(z / zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


# -- loading ------------------------------------------------------------------

def test_load_white_pixel(tmp_path):
    p = tmp_path / "w.png"
    Image.fromarray(np.full((1, 1, 3), 255, np.uint8)).save(p)
    img = load_image(p)
    assert img.shape == (1, 1, 3)
    assert np.array_equal(img, np.ones((1, 1, 3)))


def test_load_bsds_size(tmp_path):
    p = tmp_path / "b.png"
    Image.fromarray(np.zeros((321, 481, 3), np.uint8)).save(p)
    img = load_image(p)
    assert img.shape[0] * img.shape[1] == 154401


def test_load_ppm(tmp_path):
    p = tmp_path / "a.ppm"
    Image.fromarray(np.full((3, 4, 3), 51, np.uint8)).save(p)
    assert np.allclose(load_image(p), 0.2)


def test_truncated_file_raises(tmp_path):
    p = tmp_path / "t.png"
    Image.fromarray(np.zeros((40, 40, 3), np.uint8)).save(p)
    p.write_bytes(p.read_bytes()[:30])
    with pytest.raises(ImageError):
        load_image(p)


def test_missing_file_raises(tmp_path):
    with pytest.raises(ImageError):
        load_image(tmp_path / "none.png")


def test_save_load_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (5, 7, 3)) / 255.0
    save_rgb(tmp_path / "x.png", img)
    assert np.allclose(load_image(tmp_path / "x.png"), img)


def test_as_rgb_rejects_out_of_range():
    with pytest.raises(ImageError):
        as_rgb(np.full((2, 2, 3), 1.5))
    with pytest.raises(ImageError):
        as_rgb(np.zeros((2, 2, 4)))


# -- smoothing ----------------------------------------------------------------

def test_smooth_constant_fixed_point():
    img = np.full((20, 30, 3), 0.3)
    assert np.array_equal(smooth_l0(img), img)


def test_smooth_step_variance_and_edge():
    rng = np.random.default_rng(1)
    clean = np.zeros((40, 40, 3))
    clean[:, 20:] = 0.8
    noisy = np.clip(clean + rng.normal(0, 0.02, clean.shape), 0, 1)
    out = smooth_l0(noisy)
    for sl in (np.s_[:, 2:18], np.s_[:, 22:38]):
        assert out[sl].var(axis=(0, 1)).max() * 10 <= noisy[sl].var(axis=(0, 1)).min()
    # edge: strongest horizontal jump per row stays within 1 px of column 20
    jumps = np.abs(np.diff(out[..., 0], axis=1)).argmax(axis=1) + 1
    assert np.all(np.abs(jumps - 20) <= 1)


def test_smooth_iteration_count_bsds_scale():
    img = np.random.default_rng(2).random((161, 241, 3))
    _, iters = smooth_l0(img, lam=0.02, kappa=2.0, return_iterations=True)
    # beta runs 0.04, 0.08, ... up to 1e5
    assert iters == math.ceil(math.log2(1e5 / 0.04))
    assert iters < 30


@pytest.mark.parametrize("kw", [{"lam": 0}, {"kappa": 1.0}, {"lam": math.nan},
                                {"beta_max": math.inf}])
def test_smooth_bad_params(kw):
    with pytest.raises(ValueError):
        smooth_l0(np.zeros((4, 4, 3)), **kw)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 31))
def test_smooth_shape_and_range(h, w, seed):
    img = np.random.default_rng(seed).random((h, w, 3))
    out = smooth_l0(img)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


# -- Lab ----------------------------------------------------------------------

@pytest.mark.parametrize("rgb", [(1, 1, 1), (0, 0, 0), (1, 0, 0), (0.2, 0.5, 0.9)])
def test_to_lab_matches_reference(rgb):
    got = to_lab(np.array(rgb, float).reshape(1, 1, 3))[0, 0]
    assert np.allclose(got, _srgb_to_lab_reference(rgb), atol=0.01)


def test_to_lab_known_values():
    assert np.allclose(to_lab(np.ones((1, 1, 3)))[0, 0], (100, 0, 0), atol=0.01)
    assert np.allclose(to_lab(np.zeros((1, 1, 3)))[0, 0], (0, 0, 0), atol=0.01)
    assert np.allclose(to_lab(np.array([[[1.0, 0, 0]]]))[0, 0], (53.24, 80.09, 67.20),
                       atol=0.01)


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(0, 1)] * 3))
def test_lab_roundtrip(rgb):
    img = np.array(rgb, float).reshape(1, 1, 3)
    lab = to_lab(img)
    back = to_lab(np.clip(from_lab(lab), 0, 1))
    assert np.linalg.norm(back - lab) < 0.1


# -- tiles --------------------------------------------------------------------

def test_tiles_constant():
    g = build_tile_grid(np.full((13, 20, 3), 0.4), 6)
    assert np.allclose(g.means, 0.4)


def test_tiles_half_split():
    img = np.zeros((12, 12, 3))
    img[:, 6:] = 1.0
    g = build_tile_grid(img, 6)
    for ch in range(3):
        assert np.array_equal(g.means[..., ch], [[0, 1], [0, 1]])


def test_tiles_partial_edges():
    img = np.random.default_rng(3).random((13, 13, 3))
    g = build_tile_grid(img, 6)
    assert g.shape == (3, 3)
    assert np.allclose(g.means[2, 0], img[12, 0:6].mean(axis=0), atol=1e-12)
    assert np.allclose(g.means[0, 2], img[0:6, 12].mean(axis=0), atol=1e-12)
    assert np.allclose(g.means[2, 2], img[12, 12], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 7), st.integers(0, 2 ** 31))
def test_tiles_match_brute_force(h, w, t, seed):
    img = np.random.default_rng(seed).random((h, w, 3))
    g = build_tile_grid(img, t)
    assert g.shape == (math.ceil(h / t), math.ceil(w / t))
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            ref = img[i * t:(i + 1) * t, j * t:(j + 1) * t].reshape(-1, 3).mean(axis=0)
            assert np.allclose(g.means[i, j], ref, atol=1e-12)
