"""Command-line entry point: extract, eval, synth and bench.

Exit codes: 0 success, 1 extraction or scoring failure, 2 usage or IO error.
Every RunConfig key is also a ``--key value`` flag; a config file may be
given with ``--config`` or through the SHOCKAXIS_CONFIG environment variable.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import io
from .config import CONFIG_ENV, ConfigError, RunConfig, resolve_config

log = logging.getLogger("shockaxis")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm")
STAGE_LABELS = {"proposal_generation": "Proposal Generation", "seed_growth": "Seed Growth",
                "end_point_growth": "End Point Growth", "other": "Other"}


class UsageError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help=f"key = value config file (default: ${CONFIG_ENV})")
    g = p.add_argument_group("run configuration")
    for f in fields(RunConfig):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        g.add_argument(*flags, dest=f"cfg_{f.name}", metavar="VALUE", default=None,
                       help=f"(default {RunConfig().as_dict()[f.name]!r})")


def _config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return resolve_config(args.config, overrides)


def _images_in(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not path.exists():
        raise UsageError(f"no such input: {path}")
    return [path]


def _run_extract(img, cfg: RunConfig):
    from .growth import extract
    return extract(img, cfg.cost_config(), cfg.shock_config(), cfg.growth_config(),
                   smooth=cfg.smooth, smooth_lam=cfg.smooth_lambda,
                   smooth_kappa=cfg.smooth_kappa, smooth_beta_max=cfg.smooth_beta_max)


# ---------------------------------------------------------------------------
# extract

def cmd_extract(args) -> int:
    from .imgproc import ImageError, load_image

    cfg = _config(args)
    inputs = []
    for path in args.inputs:
        inputs.extend(_images_in(Path(path)))
    if not inputs:
        raise UsageError("no input images")
    failed = 0
    for path in inputs:
        try:
            img = load_image(path)
        except ImageError as exc:
            raise UsageError(str(exc)) from exc
        try:
            ex = _run_extract(img, cfg)
        except ValueError as exc:
            log.error("%s: extraction failed: %s", path, exc)
            failed += 1
            continue
        out = Path(args.output) / path.stem
        io.write_axis(out, img, ex, cfg.resolved())
        c = ex.axis.counters
        print(f"{path.name}: {len(ex.axis)} points, {len(ex.axis.branches)} branches, "
              f"{c['proposals_examined']} of {ex.exhaustive_proposals} proposals, "
              f"{ex.timings['total']:.2f} s -> {out}")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# eval

def _find_prediction(pred_dir: Path, name: str) -> Path | None:
    for cand in (pred_dir / name / io.SKELETON_FILE, pred_dir / f"{name}.png"):
        if cand.exists():
            return cand
    return None


def _format_scores(rows) -> str:
    head = f"{'':<24}{'P':>8}{'R':>8}{'F1':>8}"
    lines = [head, "-" * len(head)]
    for label, p, r, f in rows:
        lines.append(f"{label:<24}{p:>8.3f}{r:>8.3f}{f:>8.3f}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    from . import evaluation as ev

    cfg = _config(args)
    protocol = cfg.protocol
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise UsageError(f"not a directory: {d}")
    names = sorted(p.name for p in gt_dir.iterdir() if p.is_dir())
    plain, weighted, images, failures = [], [], [], []
    for name in names:
        try:
            annos = io.load_annotations(gt_dir / name)
            if not annos:
                raise ValueError("no annotations")
            pp = _find_prediction(pred_dir, name)
            if pp is None:
                raise FileNotFoundError("no prediction")
            pred = io.read_mask(pp)
            masks = [a.mask for a in annos]
            if any(m.shape != pred.shape for m in masks):
                raise ValueError("prediction and annotation sizes differ")
        except (OSError, ValueError) as exc:
            log.error("%s: %s", name, exc)
            failures.append({"name": name, "error": str(exc)})
            continue
        tol = cfg.tolerance_px(pred.shape)
        res = ev.score(pred, masks, tol, protocol)
        plain.append(res)
        rec = res.as_dict()
        if args.weighted:
            if any(a.radius is None for a in annos):
                log.warning("%s: radius maps missing; weighted score falls back to unweighted",
                            name)
                wres = res
            else:
                wmaps = [ev.ligature_weights(a.mask, a.radius, cfg.ligature_horizon)
                         for a in annos]
                wres = ev.score_weighted(pred, masks, wmaps, tol, protocol,
                                         weight_precision=args.weight_precision)
            weighted.append(wres)
            rec["weighted_score"] = wres.as_dict()
        rec.update(name=name, tolerance_px=tol, n_annotations=len(annos))
        images.append(rec)

    agg = ev.aggregate(plain, protocol)
    rows = [(f"{protocol} ({len(plain)} images)", agg.precision, agg.recall, agg.f1)]
    report = {"protocol": protocol, "weighted": bool(args.weighted),
              "tolerance": cfg.tolerance, "aggregate": agg.as_dict(), "images": images,
              "failures": failures, "config": cfg.resolved()}
    if args.weighted:
        wagg = ev.aggregate(weighted, protocol)
        rows.append(("ligature-weighted", wagg.precision, wagg.recall, wagg.f1))
        rows.append(("*gains", wagg.precision - agg.precision, wagg.recall - agg.recall,
                     wagg.f1 - agg.f1))
        report["weighted_aggregate"] = wagg.as_dict()
    print(_format_scores(rows))
    for f in failures:
        print(f"unscorable: {f['name']}: {f['error']}")
    if args.json:
        io.write_json(args.json, report)
    return EXIT_FAIL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args) -> int:
    from .synth import SpecError, parse_spec, write_fixture

    path = Path(args.spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read spec {path}: {exc}") from exc
    try:
        spec = parse_spec(text)
    except SpecError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    name = args.name or path.stem
    gt = write_fixture(spec, args.output, name)
    print(f"wrote {Path(args.output) / (name + '.png')} and ground truth in {gt}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def bench_table(timings: dict, examined: int, exhaustive: int) -> str:
    from .growth import STAGES

    total = sum(timings[s] for s in STAGES)
    lines = [f"{'Stage':<22}{'Time (s)':>12}{'%':>8}", "-" * 42]
    for s in STAGES:
        pct = 100.0 * timings[s] / total if total > 0 else 0.0
        lines.append(f"{STAGE_LABELS[s]:<22}{timings[s]:>12.3f}{pct:>8.1f}")
    lines.append("-" * 42)
    lines.append(f"{'Total':<22}{total:>12.3f}{100.0 if total > 0 else 0.0:>8.1f}")
    lines.append("")
    lines.append(f"proposals examined  {examined}")
    lines.append(f"exhaustive H*W*R    {exhaustive}")
    if exhaustive:
        lines.append(f"ratio               {examined / exhaustive:.4f}")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    from .growth import STAGES
    from .imgproc import ImageError, load_image

    cfg = _config(args)
    d = Path(args.input)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    totals = dict.fromkeys(STAGES, 0.0)
    cost_time = 0.0
    examined = exhaustive = 0
    names = []
    for path in _images_in(d):
        try:
            img = load_image(path)
        except ImageError as exc:
            raise UsageError(str(exc)) from exc
        ex = _run_extract(img, cfg)
        for s in STAGES:
            totals[s] += ex.timings[s]
        cost_time += ex.timings.get("cost_volume", 0.0)
        examined += ex.axis.counters["proposals_examined"]
        exhaustive += ex.exhaustive_proposals
        names.append(path.name)
    print(f"{len(names)} image(s)")
    print(bench_table(totals, examined, exhaustive))
    if args.json:
        total = sum(totals.values())
        io.write_json(args.json, {
            "images": names,
            "stages": [{"stage": s, "seconds": totals[s],
                        "percent": 100.0 * totals[s] / total if total > 0 else 0.0}
                       for s in STAGES],
            "total": total, "cost_volume_seconds": cost_time,
            "proposals_examined": examined, "exhaustive_proposals": exhaustive,
            "config": cfg.resolved()})
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shockaxis", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract medial axes from images")
    p.add_argument("inputs", nargs="+", help="image files or directories")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score predicted skeletons against ground truth")
    p.add_argument("pred", help="directory of predictions (<name>/skeleton.png or <name>.png)")
    p.add_argument("gt", help="directory of <name>/annotation_<k>.png ground truth")
    p.add_argument("--weighted", action="store_true", help="also report ligature-weighted scores")
    p.add_argument("--weight-precision", action="store_true",
                   help="weight precision as well as recall")
    p.add_argument("--json", type=Path, default=None, help="write the full report here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a fixture spec with oracle skeletons")
    p.add_argument("spec", help="fixture spec file")
    p.add_argument("output", help="output directory")
    p.add_argument("--name", default=None, help="fixture name (default: spec file stem)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="per-stage runtime breakdown over a directory")
    p.add_argument("input", help="directory of images")
    p.add_argument("--json", type=Path, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
