"""Anchor generation and segment-wise anchor/tube matching.

Anchor shapes come from k-means over ground-truth (w, h) pairs under the
1 - IOU distance of centered boxes; anchors are materialized on a regular
G x G grid of cell centers. Matching labels each anchor positive, negative
or ignore against the tubes of one video using K-frame segment overlaps
rather than whole-tube averages, which keeps positives reachable on shaky
tubes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CardinalityError, ParameterError
from .geometry import Box, Tube, segment_iou

POSITIVE = 1
NEGATIVE = -1
IGNORE = 0


@dataclass(frozen=True)
class MatchLabel:
    """Outcome of matching one anchor: +1 / -1 / 0 with the matched tube."""

    value: int
    matched_tube: Tube | None = None

    def __post_init__(self):
        if self.value not in (POSITIVE, NEGATIVE, IGNORE):
            raise ValueError(f"label value must be +1, -1 or 0, got {self.value}")
        if (self.value == POSITIVE) != (self.matched_tube is not None):
            raise ValueError("matched_tube must be present iff the label is positive")


def _shape_iou_matrix(wh: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """IOU between (w, h) shapes and cluster centers as if co-centered."""
    iw = np.minimum(wh[:, None, 0], centers[None, :, 0])
    ih = np.minimum(wh[:, None, 1], centers[None, :, 1])
    inter = iw * ih
    union = (wh[:, 0] * wh[:, 1])[:, None] + (centers[:, 0] * centers[:, 1])[None, :] - inter
    return inter / union


def cluster_anchors(boxes: Sequence[Box], n: int = 6, seed: int = 0,
                    max_iter: int = 100) -> list[tuple[float, float]]:
    """K-means over box shapes with 1 - IOU distance.

    Seeding is deterministic: the first center is drawn from a seeded RNG,
    the rest by farthest-point selection, so the same inputs always produce
    the same anchors. Cluster centers are coordinate means; empty clusters
    keep their previous center.
    """
    if n < 1:
        raise ParameterError(f"cluster count must be >= 1, got {n}")
    if len(boxes) < n:
        raise CardinalityError(f"need at least {n} boxes to form {n} clusters, got {len(boxes)}")
    wh = np.array([[b.w, b.h] for b in boxes], dtype=float)
    rng = np.random.default_rng(seed)

    centers = wh[int(rng.integers(len(wh)))][None, :]
    while len(centers) < n:
        dist = 1.0 - _shape_iou_matrix(wh, centers).max(axis=1)
        centers = np.vstack([centers, wh[int(np.argmax(dist))]])

    assign = None
    for _ in range(max_iter):
        dist = 1.0 - _shape_iou_matrix(wh, centers)
        new_assign = dist.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(n):
            members = wh[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return [(float(w), float(h)) for w, h in centers]


@dataclass(frozen=True)
class AnchorSet:
    """G x G grid of cell-centered anchors, one per (cell, shape) pair."""

    grid: int
    shapes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.grid < 1:
            raise ValueError(f"grid size must be >= 1, got {self.grid}")
        if not self.shapes or any(w <= 0 or h <= 0 for w, h in self.shapes):
            raise ValueError("anchor set needs at least one positive shape")
        object.__setattr__(self, "shapes",
                           tuple((float(w), float(h)) for w, h in self.shapes))

    def anchors(self) -> list[Box]:
        """All anchors in deterministic order: rows, then columns, then shapes."""
        out = []
        for iy in range(self.grid):
            cy = (iy + 0.5) / self.grid
            for ix in range(self.grid):
                cx = (ix + 0.5) / self.grid
                for w, h in self.shapes:
                    out.append(Box(cx, cy, w, h))
        return out

    def __len__(self) -> int:
        return self.grid * self.grid * len(self.shapes)


def _check_thresholds(pos_thresh: float, neg_thresh: float) -> None:
    if not 0.0 < neg_thresh <= pos_thresh < 1.0:
        raise ParameterError(
            f"need 0 < neg_thresh <= pos_thresh < 1, got {neg_thresh}, {pos_thresh}")


def match_anchor(anchor: Box, tubes: Sequence[Tube], k: int = 6,
                 pos_thresh: float = 0.5, neg_thresh: float = 0.4) -> MatchLabel:
    """Segment-wise anchor label against the tubes of one video.

    Positive: the mean IOU over some tube's first K frames reaches
    pos_thresh; ties between tubes resolve to the largest first-segment IOU
    (then earliest tube). Negative: for every tube, every one of its
    floor(T/K) consecutive K-frame segments stays below neg_thresh. A tube
    shorter than K contributes no segments to the negative rule, so its
    remainder frames are unexamined there (it can still make the anchor
    positive through its truncated first segment). Anything else: ignore.

    An empty tube list labels every anchor negative.
    """
    if k < 1:
        raise ParameterError(f"segment length must be >= 1, got {k}")
    _check_thresholds(pos_thresh, neg_thresh)
    best_tube = None
    best_iou = 0.0
    for tube in tubes:
        first = segment_iou(anchor, tube, 0, k)
        if first >= pos_thresh and (best_tube is None or first > best_iou):
            best_tube, best_iou = tube, first
    if best_tube is not None:
        return MatchLabel(POSITIVE, best_tube)
    for tube in tubes:
        n_segments = len(tube) // k
        for i in range(n_segments):
            if segment_iou(anchor, tube, i * k, k) >= neg_thresh:
                return MatchLabel(IGNORE)
    return MatchLabel(NEGATIVE)


def match_anchor_whole_tube(anchor: Box, tubes: Sequence[Tube],
                            pos_thresh: float = 0.5,
                            neg_thresh: float = 0.4) -> MatchLabel:
    """Baseline matcher using whole-tube average IOU instead of segments.

    Exists to quantify what segment matching buys: on tubes with motion or
    camera shake the full-tube average dilutes the overlap and positives
    become scarce.
    """
    _check_thresholds(pos_thresh, neg_thresh)
    best_tube = None
    best_iou = 0.0
    for tube in tubes:
        mean_iou = segment_iou(anchor, tube, 0, len(tube))
        if mean_iou >= pos_thresh and (best_tube is None or mean_iou > best_iou):
            best_tube, best_iou = tube, mean_iou
    if best_tube is not None:
        return MatchLabel(POSITIVE, best_tube)
    for tube in tubes:
        if segment_iou(anchor, tube, 0, len(tube)) >= neg_thresh:
            return MatchLabel(IGNORE)
    return MatchLabel(NEGATIVE)


def match_all(anchor_set: AnchorSet, tubes: Sequence[Tube], k: int = 6,
              pos_thresh: float = 0.5, neg_thresh: float = 0.4) -> list[MatchLabel]:
    """Labels for every anchor in the set's deterministic enumeration order."""
    return [match_anchor(a, tubes, k, pos_thresh, neg_thresh)
            for a in anchor_set.anchors()]
