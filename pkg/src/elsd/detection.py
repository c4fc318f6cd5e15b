"""Foreground segmentation, box extraction and detection scoring.

Turns a foreground matrix into per-frame detections (threshold mask ->
8-connected components -> tight bounding boxes) and scores them against
ground truth with greedy one-to-one IoU matching, micro-aggregated over
all frames.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError, InvalidParameterError


class Box(NamedTuple):
    """Axis-aligned pixel box: top-left (x, y), size (w, h), half-open."""

    x: int
    y: int
    w: int
    h: int


class Detection(NamedTuple):
    box: Box
    score: float


class GtBox(NamedTuple):
    target_id: int
    box: Box


_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def mad_threshold(values, k=3.0):
    """Robust threshold: k times the MAD-estimated standard deviation.

    Falls back to a quarter of the peak magnitude when the estimate
    degenerates (more than half the entries identical, e.g. an exactly
    sparse foreground), and to +inf when the input is all zero so that
    the resulting masks are empty.
    """
    values = np.asarray(values, dtype=np.float64)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return np.inf
    sigma = 1.4826 * float(np.median(np.abs(values - np.median(values))))
    theta = k * sigma
    if theta <= 0.0:
        theta = 0.25 * peak
    return theta


def resolve_threshold(values, policy):
    """Turn a threshold policy (float or "mad") into a concrete value."""
    if isinstance(policy, str):
        if policy.lower() != "mad":
            raise InvalidParameterError(f"unknown threshold policy {policy!r}")
        return mad_threshold(values)
    theta = float(policy)
    if np.isnan(theta) or theta < 0:
        raise InvalidParameterError(f"threshold must be >= 0, got {theta}")
    return theta  # +inf is valid: it selects nothing (all-zero foreground)


def segment(s_frame, geometry, threshold_policy):
    """Binary mask of one frame: ``|S_j| >= theta``.

    ``threshold_policy`` is either a fixed threshold or "mad" (resolved
    on this frame; batch pipelines resolve the policy once over the whole
    matrix and pass the float).
    """
    height, width = geometry
    s_frame = np.asarray(s_frame, dtype=np.float64)
    if s_frame.size != height * width:
        raise InvalidInputError(
            f"frame length {s_frame.size} does not match geometry {geometry}"
        )
    if not np.all(np.isfinite(s_frame)):
        raise InvalidInputError("frame contains non-finite entries")
    theta = resolve_threshold(s_frame, threshold_policy)
    return np.abs(s_frame).reshape(height, width) >= theta


def components_to_boxes(mask, geometry=None, min_area=2, values=None):
    """Tight boxes of 8-connected components with at least min_area pixels.

    ``values`` (same geometry) contributes the foreground-mass score of
    each detection; without it the score is the pixel count.
    """
    mask = np.asarray(mask)
    if mask.ndim == 1:
        if geometry is None:
            raise InvalidInputError("flat mask requires geometry")
        mask = mask.reshape(geometry)
    mask = mask.astype(bool)
    if values is not None:
        values = np.abs(np.asarray(values, dtype=np.float64)).reshape(mask.shape)
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    dets = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        component = labels[sl] == i
        area = int(component.sum())
        if area < min_area:
            continue
        ys, xs = sl
        box = Box(x=xs.start, y=ys.start, w=xs.stop - xs.start,
                  h=ys.stop - ys.start)
        score = float(values[sl][component].sum()) if values is not None \
            else float(area)
        dets.append(Detection(box=box, score=score))
    return dets


def iou(a: Box, b: Box):
    """Intersection over union of two boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(ix, 0) * max(iy, 0)
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


@dataclass
class MetricsReport:
    tp: int
    fn: int
    fp: int
    recall: float
    precision: float
    f1: float
    iou_threshold: float
    rank_B: int | None = None


def f1_score(recall, precision):
    if recall + precision == 0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)


def _metrics_from_counts(tp, fn, fp, iou_threshold, rank_B=None):
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    return MetricsReport(tp=tp, fn=fn, fp=fp, recall=recall,
                         precision=precision, f1=f1_score(recall, precision),
                         iou_threshold=iou_threshold, rank_B=rank_B)


def match_and_score(dets, gt, iou_threshold, rank_B=None):
    """Greedy one-to-one matching per frame, aggregated over all frames.

    Candidate pairs with IoU >= threshold are taken in descending IoU
    order (ties broken by ground-truth index, then detection index); each
    box is used at most once. Matched pairs are TP, leftover ground truth
    FN, leftover detections FP.
    """
    if len(dets) != len(gt):
        raise InvalidInputError(
            f"detections cover {len(dets)} frames, ground truth {len(gt)}"
        )
    tp = fn = fp = 0
    for frame_dets, frame_gt in zip(dets, gt):
        pairs = []
        for gi, g in enumerate(frame_gt):
            for di, d in enumerate(frame_dets):
                v = iou(g.box, d.box)
                if v >= iou_threshold:
                    pairs.append((-v, gi, di))
        pairs.sort()
        used_gt, used_det = set(), set()
        for _, gi, di in pairs:
            if gi in used_gt or di in used_det:
                continue
            used_gt.add(gi)
            used_det.add(di)
        matched = len(used_gt)
        tp += matched
        fn += len(frame_gt) - matched
        fp += len(frame_dets) - matched
    return _metrics_from_counts(tp, fn, fp, iou_threshold, rank_B)


def sweep_iou(dets, gt, thresholds, rank_B=None):
    """One report per IoU threshold; matching is recomputed per threshold."""
    for t in thresholds:
        if not 0 < t < 1:
            raise InvalidParameterError(f"IoU thresholds must be in (0,1), got {t}")
    return [match_and_score(dets, gt, t, rank_B) for t in thresholds]
