"""Boxes, tubes, overlap measures and spline interpolation.

Everything downstream (matching, refinement, metrics) is built on the
primitives in this module. All operations are pure functions of immutable
values, so they are safe to call from any number of workers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateTubeError, OutOfRangeError, ParameterError

# Spline overshoot on hostile knots can push a width/height through zero;
# the floor keeps interpolated boxes valid without affecting knot values.
_MIN_SIZE = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in normalized image coordinates, center format.

    (cx, cy) is the box center, (w, h) the full width/height, all expressed
    as fractions of the image dimensions. Centers may drift outside [0, 1]
    (interpolation overshoot is legal); sizes must stay positive.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for v in (self.cx, self.cy, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError(f"box coordinates must be finite, got {self.astuple()}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "Box":
        """Build from corner format (boundary conversion helper)."""
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)


@dataclass(frozen=True)
class TemporalSpan:
    """Half-open action interval hypothesis [t_s, t_e] in frame units."""

    t_s: int
    t_e: int

    def __post_init__(self):
        if self.t_s >= self.t_e:
            raise ValueError(f"span must satisfy t_s < t_e, got ({self.t_s}, {self.t_e})")

    @property
    def n_frames(self) -> int:
        return self.t_e - self.t_s + 1

    def frames(self) -> range:
        return range(self.t_s, self.t_e + 1)


@dataclass(frozen=True, eq=True)
class Tube:
    """Class-labeled sequence of (frame timestamp, box).

    Timestamps are strictly increasing integers; the sequence is non-empty.
    Fitting and keyframe selection additionally require >= 2 frames.
    """

    label: int | str
    frames: tuple[tuple[int, Box], ...]

    def __post_init__(self):
        frames = tuple((int(t), b) for t, b in self.frames)
        object.__setattr__(self, "frames", frames)
        if not frames:
            raise ValueError("tube must contain at least one frame")
        ts = [t for t, _ in frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"tube timestamps must be strictly increasing, got {ts}")

    def __len__(self) -> int:
        return len(self.frames)

    @cached_property
    def timestamps(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.frames)

    @cached_property
    def boxes(self) -> tuple[Box, ...]:
        return tuple(b for _, b in self.frames)

    @property
    def t_start(self) -> int:
        return self.frames[0][0]

    @property
    def t_end(self) -> int:
        return self.frames[-1][0]

    def box_at(self, t: int) -> Box | None:
        """Box at an exact timestamp, or None if the tube has no entry there."""
        i = bisect.bisect_left(self.timestamps, t)
        if i < len(self.frames) and self.timestamps[i] == t:
            return self.boxes[i]
        return None

    def box_near(self, t: int) -> Box:
        """Box at the timestamp closest to t (earlier wins ties)."""
        ts = self.timestamps
        i = bisect.bisect_left(ts, t)
        if i == 0:
            return self.boxes[0]
        if i == len(ts):
            return self.boxes[-1]
        return self.boxes[i - 1] if t - ts[i - 1] <= ts[i] - t else self.boxes[i]

    def as_array(self) -> np.ndarray:
        """(T, 4) array of (cx, cy, w, h) rows, frame order."""
        return np.array([b.astuple() for b in self.boxes], dtype=float)


def box_iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; symmetric, in [0, 1].

    Areas are derived from the same corner values as the intersection so
    that identical boxes score exactly 1.0.
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    if iw <= 0:
        return 0.0
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise IOU between two (N, 4) arrays of (cx, cy, w, h) rows.

    Vectorized twin of :func:`box_iou` for hot loops; matches it operation
    for operation so both paths yield bit-identical values.
    """
    ax1, ax2 = a[:, 0] - a[:, 2] / 2, a[:, 0] + a[:, 2] / 2
    ay1, ay2 = a[:, 1] - a[:, 3] / 2, a[:, 1] + a[:, 3] / 2
    bx1, bx2 = b[:, 0] - b[:, 2] / 2, b[:, 0] + b[:, 2] / 2
    by1, by2 = b[:, 1] - b[:, 3] / 2, b[:, 1] + b[:, 3] / 2
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where((inter > 0) & (union > 0), inter / union, 0.0)
    return out


def tube_iou(a: Tube, b: Tube) -> float:
    """Spatio-temporal IOU between two tubes.

    Per-frame box IOU averaged over the temporal union of both tubes,
    counting zero on frames where only one tube has a box. Equals the mean
    per-frame IOU when the spans coincide.
    """
    boxes_a = dict(a.frames)
    boxes_b = dict(b.frames)
    union = sorted(boxes_a.keys() | boxes_b.keys())
    total = 0.0
    for t in union:
        if t in boxes_a and t in boxes_b:
            total += box_iou(boxes_a[t], boxes_b[t])
    return total / len(union)


def segment_iou(anchor: Box, tube: Tube, start_index: int = 0, k: int = 1) -> float:
    """Mean IOU between an anchor box and a K-frame tube segment.

    The segment starts at ``start_index`` and is truncated at the tube end,
    so it covers min(k, len(tube) - start_index) boxes.
    """
    if k < 1:
        raise ParameterError(f"segment length must be >= 1, got {k}")
    if not 0 <= start_index < len(tube):
        raise ParameterError(
            f"start_index {start_index} outside tube of length {len(tube)}")
    boxes = tube.boxes[start_index:start_index + k]
    return sum(box_iou(anchor, b) for b in boxes) / len(boxes)


def interp_tube(knots: Sequence[tuple[float, Box]],
                query_ts: Sequence[float]) -> list[Box]:
    """Interpolate a box trajectory through knots with natural cubic splines.

    Each of the four coordinates is interpolated independently; the natural
    boundary condition (zero second derivative at both ends) keeps the curve
    from oscillating near the endpoints. With exactly two knots the result
    is linear in t.

    Args:
        knots: (timestamp, box) pairs with strictly increasing timestamps.
        query_ts: query timestamps, all within [knots[0].t, knots[-1].t].

    Returns:
        One interpolated box per query timestamp; passes through every knot.

    Raises:
        DegenerateTubeError: fewer than two knots.
        OutOfRangeError: a query timestamp outside the knot span.
    """
    if len(knots) < 2:
        raise DegenerateTubeError(f"interpolation needs >= 2 knots, got {len(knots)}")
    ts = np.array([t for t, _ in knots], dtype=float)
    if np.any(np.diff(ts) <= 0):
        raise ParameterError(f"knot timestamps must be strictly increasing, got {ts.tolist()}")
    qs = np.asarray(query_ts, dtype=float)
    if qs.size and (qs.min() < ts[0] or qs.max() > ts[-1]):
        raise OutOfRangeError(
            f"query timestamps must lie in [{ts[0]}, {ts[-1]}], "
            f"got range [{qs.min()}, {qs.max()}]")
    values = np.array([[b.cx, b.cy, b.w, b.h] for _, b in knots], dtype=float)
    out = _spline_eval(ts, values, qs)
    return [Box(float(cx), float(cy), float(w), float(h)) for cx, cy, w, h in out]


def _spline_eval(knot_ts: np.ndarray, knot_values: np.ndarray,
                 query_ts: np.ndarray) -> np.ndarray:
    """Natural-spline evaluation on raw arrays; sizes floored to stay positive."""
    spline = CubicSpline(knot_ts, knot_values, axis=0, bc_type="natural")
    out = np.atleast_2d(spline(query_ts))
    out[:, 2:] = np.maximum(out[:, 2:], _MIN_SIZE)
    return out
