"""End-to-end orchestration: fit, select, refine, evaluate.

Wires the stage modules together the way the CLI and benchmarks consume
them. Learned components are replaced by their oracles: the least-squares
fit stands in for parameter prediction, and the coarse classification score
is a confidence stand-in derived from how well the polynomial reproduces
its own tube.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .config import PipelineConfig
from .errors import ParameterError
from .evalkit import AnnotationSet, DetectionSet
from .geometry import Box, TemporalSpan, Tube, segment_iou, tube_iou
from .keyframe import select_key_samples
from .matching import AnchorSet, cluster_anchors
from .paramtube import fit_tube_lsq
from .refine import (CoarseDetection, RefinedDetection, ScoredProposal,
                     assemble_tube, refine_detection, sample_coarse_boxes, tube_nms)
from .serialize import Dataset


@dataclass
class CoarseResult:
    """Per-video coarse detections plus the anchor set that produced them."""

    anchor_set: AnchorSet
    detections: dict[str, list[CoarseDetection]] = field(default_factory=dict)


def build_anchor_set(annotations: AnnotationSet, cfg: PipelineConfig) -> AnchorSet:
    """Anchor shapes clustered from the dataset's own ground-truth boxes."""
    boxes = [b for tubes in annotations.videos.values() for t in tubes for b in t.boxes]
    n = min(cfg.n_anchor_shapes, len(boxes))
    if n == 0:
        raise ParameterError("cannot build anchors from an empty annotation set")
    shapes = cluster_anchors(boxes, n=n, seed=cfg.seed)
    return AnchorSet(grid=cfg.grid_size, shapes=tuple(shapes))


def best_anchor(anchors: list[Box], tube: Tube, segment_len: int) -> Box:
    """Anchor with the largest first-segment IOU against the tube."""
    best, best_iou = anchors[0], -1.0
    for a in anchors:
        iou = segment_iou(a, tube, 0, segment_len)
        if iou > best_iou:
            best, best_iou = a, iou
    return best


def _coarse_cls_score(det: CoarseDetection, gt: Tube, cfg: PipelineConfig) -> float:
    """Confidence stand-in: how well the coarse tube reproduces its source.

    A detector would output a learned class confidence; here the assembled
    coarse tube's overlap with the tube it was fitted to is mapped into
    [0.5, 1], which preserves the ranking a confident detector would give.
    """
    assembled = assemble_tube(det, [(s, b, None) for s, b in
                                    sample_coarse_boxes(det, cfg.n_samples)],
                              cfg.n_samples, cfg.score_mode)
    return 0.5 + 0.5 * tube_iou(assembled.tube, gt)


def build_coarse(annotations: AnnotationSet,
                 spans: dict[str, TemporalSpan],
                 cfg: PipelineConfig,
                 anchor_set: AnchorSet | None = None) -> CoarseResult:
    """Fit one coarse detection per ground-truth tube.

    Each tube is encoded against its best-matching anchor and fitted with an
    order-k polynomial over its own span. Tubes too short to constrain the
    fit fall back to the largest feasible order.
    """
    anchor_set = anchor_set or build_anchor_set(annotations, cfg)
    anchors = anchor_set.anchors()
    result = CoarseResult(anchor_set=anchor_set)
    for vid in sorted(annotations.videos):
        dets = []
        for tube in annotations.videos[vid]:
            anchor = best_anchor(anchors, tube, cfg.segment_len)
            order = min(cfg.k, len(tube) - 1)
            params = fit_tube_lsq(tube, anchor, order)
            span = TemporalSpan(tube.t_start, tube.t_end)
            det = CoarseDetection(params=params, anchor=anchor, span=span,
                                  label=tube.label, cls_score=1.0)
            dets.append(dataclasses.replace(
                det, cls_score=_coarse_cls_score(det, tube, cfg)))
        result.detections[vid] = dets
    return result


def assemble_coarse_only(coarse: CoarseResult, cfg: PipelineConfig) -> DetectionSet:
    """Dense tubes from the coarse polynomials alone (the no-refine baseline)."""
    videos = {}
    for vid, dets in coarse.detections.items():
        assembled = [assemble_tube(d, [(s, b, None) for s, b in
                                       sample_coarse_boxes(d, cfg.n_samples)],
                                   cfg.n_samples, cfg.score_mode)
                     for d in dets]
        videos[vid] = tuple(tube_nms(assembled, cfg.nms_iou, cfg.max_out))
    return DetectionSet(videos)


def _proposals_for(vid_props: dict, label) -> dict:
    """Resolve the proposal channel for one detection.

    Class-routed maps (label -> sample -> items, the class-specific proposer
    shape) select the detection's own channel; single-channel maps
    (sample -> items, the file-schema shape) are shared by every detection.
    """
    if not vid_props:
        return {}
    first = next(iter(vid_props.values()))
    if isinstance(first, dict):
        return vid_props.get(label, {})
    return vid_props


def refine_all(coarse: CoarseResult,
               proposals: dict[str, dict],
               importance: dict[str, list[float]],
               cfg: PipelineConfig,
               sigma: float | None = None) -> DetectionSet:
    """Selective refinement of every coarse detection, then per-video NMS.

    ``proposals`` may be class-routed or single-channel (see
    :func:`_proposals_for`). Videos missing proposals or importance scores
    fall back to the coarse assembly (refinement is conservative by
    construction).
    """
    sigma = cfg.sigma if sigma is None else sigma
    videos = {}
    for vid, dets in coarse.detections.items():
        vid_props = proposals.get(vid, {})
        scores = importance.get(vid)
        selected = select_key_samples(scores, cfg.alpha) if scores is not None else []
        refined: list[RefinedDetection] = [
            refine_detection(d, _proposals_for(vid_props, d.label), selected,
                             sigma, cfg.n_samples, cfg.score_mode)
            for d in dets]
        videos[vid] = tuple(tube_nms(refined, cfg.nms_iou, cfg.max_out))
    return DetectionSet(videos)


def run_refinement(dataset: Dataset, cfg: PipelineConfig,
                   sigma: float | None = None) -> tuple[DetectionSet, DetectionSet]:
    """(coarse-only, refined) detection sets for a loaded dataset."""
    coarse = build_coarse(dataset.annotations, dataset.spans, cfg)
    baseline = assemble_coarse_only(coarse, cfg)
    refined = refine_all(coarse, dataset.proposals, dataset.importance, cfg, sigma)
    return baseline, refined
