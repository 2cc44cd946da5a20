"""Image loading, L0 smoothing, color conversion and tile statistics.

Images are plain float64 arrays of shape (H, W, 3) with sRGB values in
[0, 1]; Lab images share that layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from skimage import color


class ImageError(ValueError):
    """Raised when an input image cannot be read or is degenerate."""


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ImageError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
                arr = np.repeat(arr[..., None], 3, axis=2)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageError(f"cannot decode {path}: {exc}") from exc
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImageError(f"zero-area image: {path}")
    return np.clip(arr, 0.0, 1.0)


def save_rgb(path, img: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def as_rgb(img) -> np.ndarray:
    """Validate and coerce an array to the (H, W, 3) float [0, 1] layout."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError("zero-area image")
    if not np.all(np.isfinite(arr)):
        raise ImageError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageError("channel values must lie in [0, 1]")
    return arr


def _difference_otfs(shape):
    # forward differences with periodic boundary, as FFT transfer functions
    h, w = shape
    kx = np.zeros(shape)
    kx[0, 0], kx[0, -1] = -1.0, 1.0
    ky = np.zeros(shape)
    ky[0, 0], ky[-1, 0] = -1.0, 1.0
    return np.fft.fft2(kx), np.fft.fft2(ky)


def smooth_l0(img, lam: float = 2e-2, kappa: float = 2.0, beta_max: float = 1e5,
              return_iterations: bool = False):
    """Edge-preserving smoothing by L0 gradient minimization.

    Alternates between hard-thresholding the gradient field and a quadratic
    solve in the Fourier domain, doubling (by ``kappa``) the coupling weight
    until it exceeds ``beta_max``.  Output is clipped to [0, 1].
    """
    for name, val in (("lam", lam), ("kappa", kappa), ("beta_max", beta_max)):
        if not math.isfinite(val):
            raise ValueError(f"{name} must be finite")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")

    src = as_rgb(img)
    S = src.copy()
    otfx, otfy = _difference_otfs(S.shape[:2])
    fft_src = np.fft.fft2(S, axes=(0, 1))
    denom_grad = (np.abs(otfx) ** 2 + np.abs(otfy) ** 2)[..., None]

    beta = 2.0 * lam
    iterations = 0
    while beta < beta_max:
        h = np.roll(S, -1, axis=1) - S
        v = np.roll(S, -1, axis=0) - S
        small = (h ** 2 + v ** 2).sum(axis=2) < lam / beta
        h[small] = 0.0
        v[small] = 0.0
        numer = fft_src + beta * (
            np.conj(otfx)[..., None] * np.fft.fft2(h, axes=(0, 1))
            + np.conj(otfy)[..., None] * np.fft.fft2(v, axes=(0, 1))
        )
        S = np.real(np.fft.ifft2(numer / (1.0 + beta * denom_grad), axes=(0, 1)))
        beta *= kappa
        iterations += 1

    out = np.clip(S, 0.0, 1.0)
    # flat inputs are an exact fixed point; skip FFT round-off there
    if np.ptp(src.reshape(-1, 3), axis=0).max() == 0.0:
        out = src.copy()
    if return_iterations:
        return out, iterations
    return out


def to_lab(img) -> np.ndarray:
    """sRGB -> CIELAB under the D65 white point (2 degree observer)."""
    return color.rgb2lab(as_rgb(img), illuminant="D65", channel_axis=-1)


def from_lab(lab) -> np.ndarray:
    return color.lab2rgb(np.asarray(lab, dtype=np.float64), illuminant="D65",
                         channel_axis=-1)


@dataclass(frozen=True)
class TileGrid:
    """Per-tile, per-channel mean intensities over a square tiling."""
    tile_size: int
    means: np.ndarray      # (rows, cols, 3)
    centers_y: np.ndarray  # (rows,) mean row coordinate of covered pixels
    centers_x: np.ndarray  # (cols,)

    @property
    def shape(self):
        return self.means.shape[:2]


def build_tile_grid(img, tile_size: int = 6) -> TileGrid:
    if tile_size < 1:
        raise ValueError("tile_size must be >= 1")
    arr = as_rgb(img)
    h, w = arr.shape[:2]
    ys = np.arange(0, h, tile_size)
    xs = np.arange(0, w, tile_size)
    sums = np.add.reduceat(np.add.reduceat(arr, ys, axis=0), xs, axis=1)
    ny = np.minimum(ys + tile_size, h) - ys
    nx = np.minimum(xs + tile_size, w) - xs
    means = sums / (ny[:, None] * nx[None, :])[..., None]
    cy = ys + (ny - 1) / 2.0
    cx = xs + (nx - 1) / 2.0
    return TileGrid(tile_size, means, cy.astype(np.float64), cx.astype(np.float64))
