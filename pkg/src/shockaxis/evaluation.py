"""Skeleton benchmark scoring with tolerant one-to-one pixel matching.

Predicted and ground-truth skeletons are binary masks.  A predicted pixel
and a ground-truth pixel may be paired when their Euclidean distance is at
most ``tol``; the pairing is a maximum-cardinality bipartite matching.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

STANDARD = "standard"
SINGLE = "single"
PROTOCOLS = (STANDARD, SINGLE)

# above this many candidate edges the exact matcher gives way to greedy
DEFAULT_EDGE_CAP = 5_000_000


def default_tolerance(shape, fraction: float = 0.01) -> float:
    h, w = shape[:2]
    return fraction * math.hypot(h, w)


def f_measure(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else float(2 * p * r / (p + r))


@dataclass
class MatchResult:
    pred_matched: np.ndarray  # bool mask
    gt_matched: np.ndarray    # bool mask
    n_pred: int
    n_gt: int
    tol: float
    pairs: np.ndarray         # (K, 4) rows of (pred_y, pred_x, gt_y, gt_x)
    exact: bool = True

    @property
    def tp_pred(self) -> int:
        return int(self.pred_matched.sum())

    @property
    def tp_gt(self) -> int:
        return int(self.gt_matched.sum())

    @property
    def precision(self) -> float:
        return self.tp_pred / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp_gt / self.n_gt if self.n_gt else 0.0


@dataclass
class EvalResult:
    protocol: str
    precision: float
    recall: float
    f1: float
    per_annotation: list = field(default_factory=list)  # (P, R, F1) per annotation
    best_annotation: int | None = None
    weighted: bool = False
    # pooled numerators/denominators, for aggregating over images
    counts: tuple = (0.0, 0.0, 0.0, 0.0)  # (tp_pred, n_pred, tp_gt, n_gt)

    def as_dict(self) -> dict:
        return {"protocol": self.protocol, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "weighted": self.weighted,
                "counts": list(self.counts),
                "best_annotation": self.best_annotation,
                "per_annotation": [list(t) for t in self.per_annotation]}


def _candidate_pairs(pred_pts, gt_pts, tol):
    if len(pred_pts) == 0 or len(gt_pts) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    tree = cKDTree(gt_pts)
    pairs = tree.query_ball_point(pred_pts, r=tol + 1e-9)
    rows = np.repeat(np.arange(len(pred_pts)), [len(p) for p in pairs])
    cols = np.fromiter((c for p in pairs for c in p), dtype=np.int64, count=len(rows))
    d = np.hypot(*(pred_pts[rows] - gt_pts[cols]).T) if len(rows) else np.zeros(0)
    return rows, cols, d


def _greedy(rows, cols, d, n_pred, n_gt):
    pm = np.full(n_pred, -1)
    used = np.zeros(n_gt, bool)
    for k in np.lexsort((cols, rows, d)):
        i, j = rows[k], cols[k]
        if pm[i] < 0 and not used[j]:
            pm[i] = j
            used[j] = True
    return pm


def match_skeletons(pred, gt, tol: float, edge_cap: int = DEFAULT_EDGE_CAP) -> MatchResult:
    """Maximum one-to-one matching of pixels at distance <= tol."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    pred_pts = np.argwhere(pred)
    gt_pts = np.argwhere(gt)
    rows, cols, d = _candidate_pairs(pred_pts, gt_pts, tol)
    exact = len(rows) <= edge_cap
    if len(rows) == 0:
        pm = np.full(len(pred_pts), -1)
    elif exact:
        graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)),
                                  shape=(len(pred_pts), len(gt_pts)))
        pm = maximum_bipartite_matching(graph, perm_type="column")
    else:
        log.warning("matching graph has %d edges; using greedy nearest-first", len(rows))
        pm = _greedy(rows, cols, d, len(pred_pts), len(gt_pts))
    pred_m = np.zeros(pred.shape, bool)
    gt_m = np.zeros(gt.shape, bool)
    hit = pm >= 0
    pairs = np.hstack([pred_pts[hit], gt_pts[pm[hit]]]).reshape(-1, 4)
    pred_m[pairs[:, 0], pairs[:, 1]] = True
    gt_m[pairs[:, 2], pairs[:, 3]] = True
    return MatchResult(pred_m, gt_m, len(pred_pts), len(gt_pts), float(tol), pairs, exact)


def _check_annotations(annotations):
    if len(annotations) == 0:
        raise ValueError("need at least one annotation")


def _weights_for(weights, k, gt):
    if weights is None:
        return np.ones(np.shape(gt))
    w = np.asarray(weights[k], dtype=np.float64)
    if w.shape != np.shape(gt):
        raise ValueError("weight map shape differs from its annotation")
    return w


def _recall(m: MatchResult, gt, w) -> tuple[float, float]:
    return float(w[m.gt_matched].sum()), float(w[np.asarray(gt, bool)].sum())


def _pair_weights(m: MatchResult, w) -> np.ndarray:
    """Per matched pred pixel, the weight of its ground-truth partner (pred-shaped)."""
    out = np.zeros(m.pred_matched.shape)
    out[m.pairs[:, 0], m.pairs[:, 1]] = w[m.pairs[:, 2], m.pairs[:, 3]]
    return out


def _weighted_precision_counts(matched_w, matched, n_pred) -> tuple[float, float]:
    # matched pixels count with their partner's weight, unmatched ones count fully
    good = float(matched_w[matched].sum())
    return good, good + (n_pred - int(matched.sum()))


def _weighted_precision(matched_w: np.ndarray, matched: np.ndarray, n_pred: int) -> float:
    good, denom = _weighted_precision_counts(matched_w, matched, n_pred)
    return good / denom if denom > 0 else 0.0


def score_standard(pred, annotations, tol: float, weights=None,
                   weight_precision: bool = False) -> EvalResult:
    """Precision over pred pixels matched to any annotation; recall pooled over all."""
    _check_annotations(annotations)
    pred = np.asarray(pred, bool)
    n_pred = int(pred.sum())
    any_match = np.zeros(pred.shape, bool)
    best_w = np.zeros(pred.shape)
    hit = total = 0.0
    per = []
    for k, gt in enumerate(annotations):
        m = match_skeletons(pred, gt, tol)
        w = _weights_for(weights, k, gt)
        any_match |= m.pred_matched
        pw = _pair_weights(m, w)
        best_w = np.maximum(best_w, pw)
        h, t = _recall(m, gt, w)
        hit += h
        total += t
        p_k = _weighted_precision(pw, m.pred_matched, n_pred) if weight_precision else m.precision
        r_k = h / t if t > 0 else 0.0
        per.append((p_k, r_k, f_measure(p_k, r_k)))
    if weight_precision:
        good, denom = _weighted_precision_counts(best_w, any_match, n_pred)
    else:
        good, denom = float(any_match.sum()), float(n_pred)
    p = good / denom if denom > 0 else 0.0
    r = hit / total if total > 0 else 0.0
    return EvalResult(STANDARD, float(p), float(r), f_measure(p, r), per,
                      weighted=weights is not None, counts=(good, denom, hit, total))


def score_single_annotation(pred, annotations, tol: float, weights=None,
                            weight_precision: bool = False) -> EvalResult:
    """Score against each annotation alone and keep the one with the best F1."""
    _check_annotations(annotations)
    pred = np.asarray(pred, bool)
    n_pred = int(pred.sum())
    per = []
    counts = []
    for k, gt in enumerate(annotations):
        m = match_skeletons(pred, gt, tol)
        w = _weights_for(weights, k, gt)
        h, t = _recall(m, gt, w)
        r = h / t if t > 0 else 0.0
        if weight_precision:
            good, denom = _weighted_precision_counts(_pair_weights(m, w), m.pred_matched, n_pred)
        else:
            good, denom = float(m.tp_pred), float(n_pred)
        p = good / denom if denom > 0 else 0.0
        per.append((float(p), float(r), f_measure(p, r)))
        counts.append((good, denom, h, t))
    best = max(range(len(per)), key=lambda k: (per[k][2], -k))
    p, r, f = per[best]
    return EvalResult(SINGLE, p, r, f, per, best, weighted=weights is not None,
                      counts=counts[best])


def score_weighted(pred, annotations, weights, tol: float, protocol: str = STANDARD,
                   weight_precision: bool = False) -> EvalResult:
    """Ligature-weighted recall (and optionally precision) under either protocol."""
    if len(weights) != len(annotations):
        raise ValueError("one weight map per annotation required")
    fn = score_standard if protocol == STANDARD else score_single_annotation
    return fn(pred, annotations, tol, weights=weights, weight_precision=weight_precision)


def aggregate(results, protocol: str = STANDARD) -> EvalResult:
    """Pool per-image counts into one dataset-level score."""
    tp_p = n_p = tp_g = n_g = 0.0
    for res in results:
        a, b, c, d = res.counts
        tp_p, n_p, tp_g, n_g = tp_p + a, n_p + b, tp_g + c, n_g + d
    p = tp_p / n_p if n_p > 0 else 0.0
    r = tp_g / n_g if n_g > 0 else 0.0
    weighted = any(res.weighted for res in results)
    return EvalResult(protocol, p, r, f_measure(p, r), weighted=weighted,
                      counts=(tp_p, n_p, tp_g, n_g))


def score(pred, annotations, tol: float, protocol: str = STANDARD, weights=None,
          weight_precision: bool = False) -> EvalResult:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    fn = score_standard if protocol == STANDARD else score_single_annotation
    return fn(pred, annotations, tol, weights=weights, weight_precision=weight_precision)


# ---------------------------------------------------------------------------
# ligature weights

def _skeleton_graph_neighbors(mask, horizon):
    """For each skeleton pixel, skeleton pixels within graph distance <= horizon."""
    pts = [tuple(p) for p in np.argwhere(mask)]
    index = {p: i for i, p in enumerate(pts)}
    out = []
    for p in pts:
        seen = {p: 0}
        queue = deque([p])
        while queue:
            q = queue.popleft()
            if seen[q] == horizon:
                continue
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    n = (q[0] + dy, q[1] + dx)
                    if n in index and n not in seen:
                        seen[n] = seen[q] + 1
                        queue.append(n)
        del seen[p]
        out.append([index[n] for n in seen])
    return pts, out


def ligature_weights(mask, radius=None, horizon: int = 3, supersample: int = 1) -> np.ndarray:
    """Fraction of each skeleton point's disk not covered by nearby skeleton disks.

    Neighbors are skeleton pixels within ``horizon`` steps along the 8-connected
    skeleton.  Areas are counted on a grid refined ``supersample`` times per
    axis.  Returns a float map, zero off the skeleton.
    """
    mask = np.asarray(mask, bool)
    if radius is None:
        log.warning("no radius map; ligature weights default to 1")
        return mask.astype(np.float64)
    radius = np.asarray(radius, dtype=np.float64)
    if radius.shape != mask.shape:
        raise ValueError("radius map shape differs from skeleton")
    if horizon < 0 or supersample < 1:
        raise ValueError("horizon must be >= 0 and supersample >= 1")
    pts, nbrs = _skeleton_graph_neighbors(mask, horizon)
    out = np.zeros(mask.shape)
    s = supersample
    for i, (y, x) in enumerate(pts):
        r = radius[y, x]
        if r <= 0:
            out[y, x] = 1.0
            continue
        n = int(math.ceil(r * s))
        g = (np.arange(-n, n + 1) / s)
        dy, dx = np.meshgrid(g, g, indexing="ij")
        inside = dy * dy + dx * dx <= r * r
        covered = np.zeros_like(inside)
        for j in nbrs[i]:
            qy, qx = pts[j]
            rq = radius[qy, qx]
            covered |= (dy - (qy - y)) ** 2 + (dx - (qx - x)) ** 2 <= rq * rq
        area = inside.sum()
        out[y, x] = (inside & ~covered).sum() / area if area else 1.0
    return np.clip(out, 0.0, 1.0)
