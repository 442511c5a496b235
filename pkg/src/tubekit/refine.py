"""Selective tube refinement: local search around coarse boxes.

A coarse detection carries polynomial tube parameters over a temporal span.
Refinement samples the polynomial at N uniform timestamps, replaces the
boxes at selected key samples with the best-scoring external proposal whose
center falls inside a size-scaled search window, then rebuilds the dense
tube with spline interpolation and re-scores it. The final tube set is
pruned by spatio-temporal NMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateTubeError, ParameterError
from .geometry import Box, TemporalSpan, Tube, interp_tube, tube_iou
from .keyframe import sample_grid
from .paramtube import PolyTubeParams, eval_poly_tube


@dataclass(frozen=True)
class ScoredProposal:
    """External per-sample box proposal with a confidence score."""

    box: Box
    score: float
    frame_index: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"proposal score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class CoarseDetection:
    """Parameterized tube hypothesis before refinement."""

    params: PolyTubeParams
    anchor: Box
    span: TemporalSpan
    label: int | str
    cls_score: float

    def __post_init__(self):
        if not 0.0 <= self.cls_score <= 1.0:
            raise ValueError(f"classification score must be in [0, 1], got {self.cls_score}")


@dataclass(frozen=True)
class RefinedDetection:
    """Dense per-frame tube with its final score.

    ``refined_indices`` lists the sample indices whose boxes were replaced
    by proposals; empty for a purely coarse detection.
    """

    tube: Tube
    label: int | str
    score: float
    refined_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0, 1], got {self.score}")
        object.__setattr__(self, "refined_indices", tuple(self.refined_indices))


@dataclass(frozen=True)
class SearchArea:
    """Closed rectangle of admissible proposal centers."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def contains(self, x: float, y: float) -> bool:
        return self.x_lo <= x <= self.x_hi and self.y_lo <= y <= self.y_hi


def sample_coarse_boxes(det: CoarseDetection, n: int) -> list[tuple[float, Box]]:
    """Decode the coarse polynomial at the N uniform sample timestamps."""
    return [(float(s), eval_poly_tube(det.params, float(s), det.anchor))
            for s in sample_grid(n)]


def search_area(box: Box, sigma: float) -> SearchArea:
    """Search window around a coarse box, sides scaled by sigma times its size.

    sigma = 0 degenerates to the single center point; the boundary is
    closed, so a proposal centered exactly on the edge still qualifies.
    """
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    return SearchArea(box.cx - sigma * box.w, box.cx + sigma * box.w,
                      box.cy - sigma * box.h, box.cy + sigma * box.h)


def refine_box(coarse: Box, proposals: Iterable[ScoredProposal],
               sigma: float) -> tuple[Box, float | None]:
    """Replace a coarse box with the best proposal centered in its search area.

    Returns (box, proposal score); when no proposal center falls inside the
    window the coarse box is kept and the score is None. Score ties resolve
    to the earliest proposal.
    """
    area = search_area(coarse, sigma)
    best = None
    for prop in proposals:
        if not area.contains(prop.box.cx, prop.box.cy):
            continue
        if best is None or prop.score > best.score:
            best = prop
    if best is None:
        return coarse, None
    return best.box, best.score


def _combine_scores(cls_score: float, replacement_scores: Sequence[float],
                    mode: str = "arithmetic") -> float:
    if not replacement_scores:
        return cls_score
    mean_rep = sum(replacement_scores) / len(replacement_scores)
    if mode == "arithmetic":
        return (cls_score + mean_rep) / 2
    if mode == "geometric":
        return math.sqrt(cls_score * mean_rep)
    raise ParameterError(f"unknown score mode {mode!r}")


def assemble_tube(det: CoarseDetection,
                  samples: Sequence[tuple[float, Box, float | None]],
                  n: int, score_mode: str = "arithmetic") -> RefinedDetection:
    """Build the final dense tube from N sample boxes (refined or coarse).

    The samples are spline-interpolated at every integer frame of the
    detection span. The final score is the mean of the classification score
    and the mean replacement-proposal score, or the classification score
    alone when nothing was replaced.
    """
    if len(samples) != n:
        raise ParameterError(f"expected {n} sample boxes, got {len(samples)}")
    span = det.span
    if span.t_e - span.t_s < 1:
        raise DegenerateTubeError("refinement span must cover >= 2 frames")
    knots = [(s, box) for s, box, _ in samples]
    queries = [(f - span.t_s) / (span.t_e - span.t_s) for f in span.frames()]
    boxes = interp_tube(knots, queries)
    tube = Tube(det.label, tuple(zip(span.frames(), boxes)))
    replacement_scores = [sc for _, _, sc in samples if sc is not None]
    score = _combine_scores(det.cls_score, replacement_scores, score_mode)
    refined = tuple(i for i, (_, _, sc) in enumerate(samples) if sc is not None)
    return RefinedDetection(tube=tube, label=det.label, score=min(max(score, 0.0), 1.0),
                            refined_indices=refined)


def refine_detection(det: CoarseDetection,
                     proposals_by_sample: Mapping[int, Sequence[ScoredProposal]],
                     selected: Iterable[int], sigma: float, n: int,
                     score_mode: str = "arithmetic") -> RefinedDetection:
    """Full selective refinement of one coarse detection.

    Only the selected sample indices are eligible for replacement; with an
    empty proposal map or empty selection the output tube equals the
    coarse-only assembly exactly.
    """
    wanted = set(selected)
    samples: list[tuple[float, Box, float | None]] = []
    for i, (s, box) in enumerate(sample_coarse_boxes(det, n)):
        if i in wanted:
            box, score = refine_box(box, proposals_by_sample.get(i, ()), sigma)
        else:
            score = None
        samples.append((s, box, score))
    return assemble_tube(det, samples, n, score_mode)


def tube_nms(dets: Sequence[RefinedDetection], iou_thr: float = 0.2,
             max_out: int = 3) -> list[RefinedDetection]:
    """Greedy tube-level non-maximum suppression.

    Detections are visited in descending score (ties keep input order);
    each survivor suppresses later tubes overlapping it by more than
    iou_thr. At most max_out detections are returned.
    """
    if not 0.0 <= iou_thr <= 1.0:
        raise ParameterError(f"iou threshold must be in [0, 1], got {iou_thr}")
    if max_out < 1:
        raise ParameterError(f"max_out must be >= 1, got {max_out}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    keep: list[int] = []
    for i in order:
        if all(tube_iou(dets[i].tube, dets[j].tube) <= iou_thr for j in keep):
            keep.append(i)
            if len(keep) == max_out:
                break
    return [dets[i] for i in keep]
