"""Key-timestamp labeling and selection.

Training side: given a ground-truth tube and a uniform grid of N sample
timestamps, greedily grow the knot set (starting from both endpoints) with
whichever sample most improves the spline-vs-ground-truth tube overlap,
until the overlap reaches epsilon. The binary membership vector is the
training label for a timestamp selector. Inference side: selection is a
plain score threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTubeError, OutOfRangeError, ParameterError, ValidationError
from .geometry import Box, Tube, _spline_eval, iou_array


def sample_grid(n: int) -> np.ndarray:
    """Uniform sample timestamps s_i = i / (n - 1) for i in [0, n-1]."""
    if n < 2:
        raise ParameterError(f"sample count must be >= 2, got {n}")
    return np.arange(n) / (n - 1)


@dataclass(frozen=True)
class KeySampleGrid:
    """Uniform N-sample grid, optionally carrying per-sample importance scores."""

    n: int
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"sample count must be >= 2, got {self.n}")
        if self.scores is not None:
            scores = tuple(float(p) for p in self.scores)
            if len(scores) != self.n:
                raise ValidationError(
                    f"expected {self.n} scores, got {len(scores)}")
            if any(not 0.0 <= p <= 1.0 for p in scores):
                raise ValidationError("importance scores must lie in [0, 1]")
            object.__setattr__(self, "scores", scores)

    @property
    def timestamps(self) -> tuple[float, ...]:
        return tuple(sample_grid(self.n))


@dataclass(frozen=True)
class KeyTimestampLabels:
    """Greedy selection result: per-sample binary labels plus diagnostics.

    ``steps`` records (added sample index, overlap after adding) in greedy
    order; ``achieved_iou`` is the final overlap of the selected knot set.
    """

    labels: tuple[int, ...]
    selected: tuple[int, ...]
    achieved_iou: float
    initial_iou: float
    steps: tuple[tuple[int, float], ...] = ()


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def gt_box_at(tube: Tube, s: float) -> Box:
    """Ground-truth box at normalized time s within the tube's own span.

    s maps to frame round(t0 + s * (t_end - t0)) with half-up rounding; if
    the tube skips that exact frame the nearest stored one is used.
    """
    if not 0.0 <= s <= 1.0:
        raise OutOfRangeError(f"normalized timestamp must be in [0, 1], got {s}")
    if len(tube) < 2:
        raise DegenerateTubeError("sampling needs >= 2 frames")
    frame = _round_half_up(tube.t_start + s * (tube.t_end - tube.t_start))
    return tube.box_near(frame)


class _GreedyObjective:
    """Overlap of the spline through selected grid knots vs. the full tube.

    Precomputes the per-sample ground-truth boxes and the tube's normalized
    frame times once; each candidate evaluation is then a single vectorized
    spline build + IOU pass.
    """

    def __init__(self, tube: Tube, n: int):
        self.grid = sample_grid(n)
        self.knot_boxes = np.array(
            [gt_box_at(tube, s).astuple() for s in self.grid], dtype=float)
        ts = np.asarray(tube.timestamps, dtype=float)
        self.query_ts = (ts - ts[0]) / (ts[-1] - ts[0])
        self.gt_boxes = tube.as_array()

    def iou(self, selected: tuple[int, ...]) -> float:
        idx = np.asarray(selected)
        interp = _spline_eval(self.grid[idx], self.knot_boxes[idx], self.query_ts)
        ious = iou_array(interp, self.gt_boxes)
        # left-to-right summation keeps this bit-identical to a frame loop
        # over box_iou, so symmetric candidates tie exactly
        return sum(ious.tolist()) / len(ious)


def greedy_keyframe_labels(tube: Tube, n: int, epsilon: float = 0.8) -> KeyTimestampLabels:
    """Greedy key-timestamp labels for one ground-truth tube.

    Starts from the endpoint samples, repeatedly adds the sample whose
    inclusion maximizes the interpolated-tube overlap with the ground truth
    (ties resolve to the smallest sample index), and stops once the overlap
    reaches epsilon or every sample is selected. The result is a pure
    function of (tube, n, epsilon).

    Note that spline knot insertion is not monotone: even the best remaining
    sample can lower the overlap (the spline is forced through it), so the
    per-step overlaps in ``steps`` may decrease. The guaranteed contract is
    the stop condition: achieved_iou >= epsilon unless every sample was
    selected.
    """
    if n < 2:
        raise ParameterError(f"sample count must be >= 2, got {n}")
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must be in (0, 1], got {epsilon}")
    if len(tube) < 2:
        raise DegenerateTubeError("keyframe labeling needs >= 2 frames")

    objective = _GreedyObjective(tube, n)
    selected = {0, n - 1}
    iou = objective.iou(tuple(sorted(selected)))
    initial_iou = iou
    steps: list[tuple[int, float]] = []
    while iou < epsilon and len(selected) < n:
        best_idx, best_iou = -1, -math.inf
        for i in range(n):
            if i in selected:
                continue
            cand = objective.iou(tuple(sorted(selected | {i})))
            if cand > best_iou:
                best_idx, best_iou = i, cand
        selected.add(best_idx)
        steps.append((best_idx, best_iou))
        iou = best_iou
    ordered = tuple(sorted(selected))
    labels = tuple(1 if i in selected else 0 for i in range(n))
    return KeyTimestampLabels(labels=labels, selected=ordered, achieved_iou=iou,
                              initial_iou=initial_iou, steps=tuple(steps))


def exhaustive_keyframe_labels(tube: Tube, n: int,
                               epsilon: float = 0.8) -> KeyTimestampLabels:
    """Smallest knot subset reaching epsilon, by exhaustive enumeration.

    Comparison tool for the greedy labeler; enumeration is exponential in n
    so n is capped at 12. Among subsets of the minimal achieving size the
    highest-overlap one wins (ties to lexicographically smallest).
    """
    if n < 2:
        raise ParameterError(f"sample count must be >= 2, got {n}")
    if n > 12:
        raise ParameterError(f"exhaustive mode is capped at n <= 12, got {n}")
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must be in (0, 1], got {epsilon}")
    if len(tube) < 2:
        raise DegenerateTubeError("keyframe labeling needs >= 2 frames")

    objective = _GreedyObjective(tube, n)
    initial = objective.iou((0, n - 1))
    middles = range(1, n - 1)

    def result(selected: tuple[int, ...], iou: float) -> KeyTimestampLabels:
        labels = tuple(1 if i in selected else 0 for i in range(n))
        return KeyTimestampLabels(labels=labels, selected=selected,
                                  achieved_iou=iou, initial_iou=initial)

    if initial >= epsilon:
        return result((0, n - 1), initial)
    for size in range(1, n - 1):
        best = None
        for combo in itertools.combinations(middles, size):
            sel = tuple(sorted((0, n - 1) + combo))
            iou = objective.iou(sel)
            if iou >= epsilon and (best is None or iou > best[1]):
                best = (sel, iou)
        if best is not None:
            return result(*best)
    full = tuple(range(n))
    return result(full, objective.iou(full))


def select_key_samples(scores, alpha: float) -> list[int]:
    """Indices of samples whose importance score reaches alpha, ascending."""
    return [i for i, p in enumerate(scores) if p >= alpha]
