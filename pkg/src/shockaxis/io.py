"""Reading and writing skeleton artifacts.

Ground truth lives in one directory per image holding ``annotation_<k>.png``
(8-bit mask, nonzero on skeleton pixels) and optionally
``annotation_<k>_radius.png`` (16-bit integer radius, nonzero exactly on
skeleton pixels).  Every file is written to a temporary sibling and renamed
into place, so readers never see partial output.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

ANNOTATION_RE = re.compile(r"^annotation_(\d+)\.png$")

AXIS_RGB = (255, 0, 0)
MARK_RGB = (255, 255, 0)

SKELETON_FILE = "skeleton.png"
RADIUS_FILE = "radius.png"
BRANCHES_FILE = "branches.json"
COUNTERS_FILE = "counters.json"
OVERLAY_FILE = "overlay.png"
ARTIFACTS = (SKELETON_FILE, RADIUS_FILE, BRANCHES_FILE, COUNTERS_FILE, OVERLAY_FILE)


# ---------------------------------------------------------------------------
# atomic writes

def _atomic(path, write) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic(path, lambda tmp: Path(tmp).write_text(text))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _save_png(path, arr, mode=None) -> None:
    _atomic(path, lambda tmp: Image.fromarray(arr, mode=mode).save(tmp, format="PNG"))


def write_mask(path, mask) -> None:
    _save_png(path, np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8))


def write_radius(path, radius) -> None:
    r = np.clip(np.rint(np.asarray(radius, dtype=np.float64)), 0, 65535).astype(np.uint16)
    _save_png(path, r)


def write_rgb(path, img) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    _save_png(path, arr)


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., :3].max(axis=2)
    return arr > 0


def read_radius(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im).astype(np.float64)


# ---------------------------------------------------------------------------
# ground truth

@dataclass
class Annotation:
    index: int
    mask: np.ndarray
    radius: np.ndarray | None = None


def write_annotation(directory, k: int, mask, radius=None) -> None:
    directory = Path(directory)
    mask = np.asarray(mask, bool)
    write_mask(directory / f"annotation_{k}.png", mask)
    if radius is not None:
        # keep the radius nonzero exactly on the skeleton
        r = np.where(mask, np.maximum(np.rint(radius), 1), 0)
        write_radius(directory / f"annotation_{k}_radius.png", r)


def load_annotations(directory) -> list[Annotation]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no ground-truth directory {directory}")
    found = []
    for p in directory.iterdir():
        m = ANNOTATION_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    out = []
    for k, p in sorted(found):
        mask = read_mask(p)
        rp = directory / f"annotation_{k}_radius.png"
        radius = read_radius(rp) if rp.exists() else None
        if radius is not None and radius.shape != mask.shape:
            raise ValueError(f"{rp}: radius map shape differs from its mask")
        out.append(Annotation(k, mask, radius))
    return out


# ---------------------------------------------------------------------------
# axis artifacts

def _point_flags(p) -> list[str]:
    return [name for name in ("seed_origin", "relaxed", "junction", "end_point")
            if getattr(p, name)]


def axis_record(axis) -> dict:
    pts = axis.points
    branches = []
    for b, members in enumerate(axis.branches):
        branches.append({
            "id": b,
            "points": [{"x": pts[i].x, "y": pts[i].y, "r": pts[i].r,
                        "cost": pts[i].cost, "flags": _point_flags(pts[i])}
                       for i in members]})
    return {"height": axis.height, "width": axis.width,
            "n_points": len(pts), "branches": branches}


def counters_record(extraction, config: dict | None = None) -> dict:
    vol = extraction.volume
    return {"counters": dict(extraction.axis.counters),
            "scales": [vol.r_min, vol.r_max],
            "image_shape": [vol.height, vol.width],
            "exhaustive_proposals": extraction.exhaustive_proposals,
            "seeds": len(extraction.seeds),
            "timings": {k: float(v) for k, v in extraction.timings.items()},
            "config": config or {}}


def overlay(img, axis, marks=True) -> np.ndarray:
    """Input image with the axis in red and junctions and seed origins in yellow."""
    out = np.clip(np.round(np.asarray(img, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    out = out.copy()
    m = axis.mask()
    out[m] = AXIS_RGB
    if marks:
        for p in axis.points:
            if p.junction or p.seed_origin:
                out[p.y, p.x] = MARK_RGB
    return out


def write_axis(outdir, img, extraction, config: dict | None = None) -> dict:
    """Write the five extraction artifacts; returns name -> path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    axis = extraction.axis
    paths = {name: outdir / name for name in ARTIFACTS}
    write_mask(paths[SKELETON_FILE], axis.mask())
    write_radius(paths[RADIUS_FILE], axis.radius_map())
    rec = axis_record(axis)
    rec["counters"] = dict(axis.counters)
    rec["config"] = config or {}
    write_json(paths[BRANCHES_FILE], rec)
    write_json(paths[COUNTERS_FILE], counters_record(extraction, config))
    write_rgb(paths[OVERLAY_FILE], overlay(img, axis))
    return paths


# ---------------------------------------------------------------------------
# schemas

def schema(name: str) -> dict:
    """Shipped JSON schema for one output kind: branches, counters or eval."""
    text = resources.files("shockaxis").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
