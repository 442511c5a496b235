"""Tube-level detection metrics.

Implements video mAP (tube detections matched by spatio-temporal IOU),
frame mAP (tubes exploded into per-frame boxes carrying the tube score),
video MABO (mean best overlap per ground-truth tube, averaged per class),
and the four-way proposal breakdown (true positive / wrong classification /
bad localization / duplicate).

Matching is greedy by descending detection score with one-to-one
ground-truth consumption; a detection counts as positive when its overlap
with an unmatched same-class ground truth strictly exceeds delta. AP uses
the all-point precision-envelope integration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ParameterError
from .geometry import Box, Tube, box_iou, tube_iou
from .refine import RefinedDetection


@dataclass
class AnnotationSet:
    """Ground-truth tubes per video id."""

    videos: dict[str, tuple[Tube, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.videos = {str(vid): tuple(tubes) for vid, tubes in self.videos.items()}

    def classes(self) -> set:
        return {t.label for tubes in self.videos.values() for t in tubes}

    def n_tubes(self) -> int:
        return sum(len(tubes) for tubes in self.videos.values())


@dataclass
class DetectionSet:
    """Scored detection tubes per video id."""

    videos: dict[str, tuple[RefinedDetection, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.videos = {str(vid): tuple(dets) for vid, dets in self.videos.items()}

    def n_detections(self) -> int:
        return sum(len(dets) for dets in self.videos.values())


@dataclass(frozen=True)
class FpBreakdown:
    """Mutually exclusive proposal categories; counts partition the detections."""

    tp: int
    wrong_class: int
    bad_localization: int
    duplicate: int

    @property
    def total(self) -> int:
        return self.tp + self.wrong_class + self.bad_localization + self.duplicate


@dataclass
class EvalReport:
    """Full metric bundle for one detection set against one annotation set."""

    per_class_ap: dict[float, dict]          # delta -> class -> AP (None if no GT)
    v_map: dict[float, float]                # delta -> mAP
    frame_map: float
    frame_map_delta: float
    v_mabo: float
    breakdown: FpBreakdown
    breakdown_delta: float


def _sorted_detections(dets: DetectionSet, label=None) -> list[tuple[str, int, RefinedDetection]]:
    """Flatten detections into deterministic descending-score order."""
    entries = [(vid, i, d)
               for vid, ds in sorted(dets.videos.items())
               for i, d in enumerate(ds)
               if label is None or d.label == label]
    entries.sort(key=lambda e: (-e[2].score, e[0], e[1]))
    return entries


def average_precision(tp_flags: Sequence[bool], n_gt: int) -> float:
    """All-point interpolated AP from score-ordered TP/FP flags.

    The precision-recall curve is completed with (recall 0, precision 0) and
    (recall 1, precision 0) endpoints, the precision envelope is taken, and
    the area under the envelope is accumulated where recall changes.
    """
    if n_gt <= 0:
        raise ParameterError("average precision needs at least one ground truth")
    if not tp_flags:
        return 0.0
    mrec = [0.0]
    mpre = [0.0]
    tp_cum = 0
    for i, flag in enumerate(tp_flags, start=1):
        tp_cum += int(flag)
        mrec.append(tp_cum / n_gt)
        mpre.append(tp_cum / i)
    mrec.append(1.0)
    mpre.append(0.0)
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return sum((mrec[i] - mrec[i - 1]) * mpre[i]
               for i in range(1, len(mrec)) if mrec[i] != mrec[i - 1])


def _class_labels(dets: DetectionSet, gts: AnnotationSet) -> list:
    labels = gts.classes() | {d.label for ds in dets.videos.values() for d in ds}
    return sorted(labels, key=lambda c: (str(type(c)), str(c)))


def video_map(dets: DetectionSet, gts: AnnotationSet,
              delta: float) -> tuple[dict, float]:
    """Per-class AP and mAP over tube detections at IOU threshold delta.

    A detection is a true positive when its tube IOU with some unmatched
    same-class, same-video ground truth strictly exceeds delta; that ground
    truth is then consumed. Classes without any ground truth are reported as
    None and excluded from the mean.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    gt_classes = gts.classes()
    if not gt_classes:
        raise ParameterError("annotation set has no ground-truth tubes")
    per_class: dict = {}
    for label in _class_labels(dets, gts):
        if label not in gt_classes:
            per_class[label] = None
            continue
        n_gt = sum(1 for tubes in gts.videos.values()
                   for t in tubes if t.label == label)
        matched = {vid: [False] * len(tubes) for vid, tubes in gts.videos.items()}
        tp_flags = []
        for vid, _, det in _sorted_detections(dets, label):
            gt_tubes = gts.videos.get(vid, ())
            best_iou, best_j = 0.0, -1
            for j, gt in enumerate(gt_tubes):
                if gt.label != label or matched[vid][j]:
                    continue
                iou = tube_iou(det.tube, gt)
                if iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j >= 0 and best_iou > delta:
                matched[vid][best_j] = True
                tp_flags.append(True)
            else:
                tp_flags.append(False)
        per_class[label] = average_precision(tp_flags, n_gt)
    defined = [ap for ap in per_class.values() if ap is not None]
    return per_class, sum(defined) / len(defined)


def map_range(dets: DetectionSet, gts: AnnotationSet, delta_lo: float,
              delta_hi: float, step: float = 0.05) -> float:
    """Mean of video mAP over an inclusive arithmetic grid of thresholds."""
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    if not 0.0 < delta_lo <= delta_hi < 1.0:
        raise ParameterError(
            f"need 0 < delta_lo <= delta_hi < 1, got {delta_lo}, {delta_hi}")
    grid = []
    i = 0
    while True:
        d = delta_lo + i * step
        if d > delta_hi + 1e-9:
            break
        grid.append(min(d, delta_hi))
        i += 1
    if not grid:
        raise ParameterError("empty threshold grid")
    return sum(video_map(dets, gts, d)[1] for d in grid) / len(grid)


def frame_map(dets: DetectionSet, gts: AnnotationSet, delta: float = 0.5) -> float:
    """Frame-level mAP after assigning each tube's score to all its boxes."""
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    gt_classes = gts.classes()
    if not gt_classes:
        raise ParameterError("annotation set has no ground-truth tubes")
    # (vid, frame, label) -> list of GT boxes
    gt_boxes: dict[tuple, list[Box]] = {}
    for vid, tubes in gts.videos.items():
        for tube in tubes:
            for t, box in tube.frames:
                gt_boxes.setdefault((vid, t, tube.label), []).append(box)
    aps = []
    for label in sorted(gt_classes, key=lambda c: (str(type(c)), str(c))):
        n_gt = sum(len(v) for k, v in gt_boxes.items() if k[2] == label)
        matched = {k: [False] * len(v) for k, v in gt_boxes.items() if k[2] == label}
        entries = []
        for vid, i, det in _sorted_detections(dets, label):
            for t, box in det.tube.frames:
                entries.append((det.score, vid, i, t, box))
        entries.sort(key=lambda e: (-e[0], e[1], e[2], e[3]))
        tp_flags = []
        for _, vid, _, t, box in entries:
            key = (vid, t, label)
            best_iou, best_j = 0.0, -1
            for j, gt in enumerate(gt_boxes.get(key, ())):
                if matched.get(key, [])[j]:
                    continue
                iou = box_iou(box, gt)
                if iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j >= 0 and best_iou > delta:
                matched[key][best_j] = True
                tp_flags.append(True)
            else:
                tp_flags.append(False)
        aps.append(average_precision(tp_flags, n_gt) if n_gt else None)
    defined = [ap for ap in aps if ap is not None]
    return sum(defined) / len(defined)


def v_mabo(dets: DetectionSet, gts: AnnotationSet) -> float:
    """Mean (over classes) of the average best overlap per ground-truth tube.

    Overlap is class-agnostic: each ground truth takes its best tube IOU
    against every detection in the same video, the per-class averages are
    taken over that class's ground truths, and classes are averaged.
    """
    gt_classes = gts.classes()
    if not gt_classes:
        raise ParameterError("annotation set has no ground-truth tubes")
    per_class: dict = {label: [] for label in gt_classes}
    for vid, tubes in gts.videos.items():
        vid_dets = dets.videos.get(vid, ())
        for gt in tubes:
            best = max((tube_iou(d.tube, gt) for d in vid_dets), default=0.0)
            per_class[gt.label].append(best)
    means = [sum(v) / len(v) for v in per_class.values() if v]
    return sum(means) / len(means)


def fp_breakdown(dets: DetectionSet, gts: AnnotationSet, delta: float) -> FpBreakdown:
    """Categorize every detection into exactly one of four proposal types.

    Processing order is descending score. Priorities when several ground
    truths qualify: true positive (unmatched same-class overlap > delta),
    then duplicate (same-class overlap > delta with an already-matched
    ground truth), then wrong classification (overlap > delta with a
    different-class ground truth), then bad localization (everything else).
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    matched = {vid: [False] * len(tubes) for vid, tubes in gts.videos.items()}
    tp = wrong = bad = dup = 0
    for vid, _, det in _sorted_detections(dets):
        gt_tubes = gts.videos.get(vid, ())
        ious = [tube_iou(det.tube, gt) for gt in gt_tubes]
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gt_tubes):
            if gt.label == det.label and not matched[vid][j] and ious[j] > delta:
                if ious[j] > best_iou:
                    best_iou, best_j = ious[j], j
        if best_j >= 0:
            matched[vid][best_j] = True
            tp += 1
        elif any(gt.label == det.label and matched[vid][j] and ious[j] > delta
                 for j, gt in enumerate(gt_tubes)):
            dup += 1
        elif any(gt.label != det.label and ious[j] > delta
                 for j, gt in enumerate(gt_tubes)):
            wrong += 1
        else:
            bad += 1
    return FpBreakdown(tp=tp, wrong_class=wrong, bad_localization=bad, duplicate=dup)


def evaluate(dets: DetectionSet, gts: AnnotationSet,
             deltas: Iterable[float] = (0.2, 0.3, 0.5, 0.75),
             frame_delta: float = 0.5,
             breakdown_delta: float = 0.5) -> EvalReport:
    """Compute the full metric bundle at the requested thresholds."""
    deltas = tuple(deltas)
    if not deltas:
        raise ParameterError("need at least one evaluation threshold")
    per_class_ap = {}
    v_map_values = {}
    for d in deltas:
        per_class, mean_ap = video_map(dets, gts, d)
        per_class_ap[d] = per_class
        v_map_values[d] = mean_ap
    return EvalReport(
        per_class_ap=per_class_ap,
        v_map=v_map_values,
        frame_map=frame_map(dets, gts, frame_delta),
        frame_map_delta=frame_delta,
        v_mabo=v_mabo(dets, gts),
        breakdown=fp_breakdown(dets, gts, breakdown_delta),
        breakdown_delta=breakdown_delta,
    )
