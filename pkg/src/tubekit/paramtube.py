"""Polynomial tube parameterization and the coarse-stage losses.

A tube trajectory is modeled per coordinate as a polynomial over normalized
time t in [0, 1], expressed in anchor-relative encoded space (center offsets
scaled by the anchor size, sizes as log ratios). This module provides the
encoding pair, polynomial evaluation, a least-squares fitting oracle, and
the coarse regression/classification losses as pure functions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (DegenerateTubeError, IllConditionedFitError, OutOfRangeError,
                     ParameterError, UnderdeterminedFitError, ValidationError)
from .geometry import Box, TemporalSpan, Tube

MAX_ORDER = 8
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class EncodedOffset:
    """Anchor-relative box encoding: scaled center offsets + log size ratios."""

    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self):
        for v in (self.dx, self.dy, self.dw, self.dh):
            if not math.isfinite(v):
                raise ValueError(f"encoded offsets must be finite, got {self}")

    def asarray(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dw, self.dh], dtype=float)


@dataclass(frozen=True, eq=False)
class PolyTubeParams:
    """Coefficient matrix of shape (k+1, 4) for one parameterized tube.

    Column order is (dx, dy, dw, dh) in encoded-offset space; row j holds the
    coefficients of t**j. Order k must be >= 1 (a constant trajectory is
    expressed with zero high-order coefficients).
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != 4:
            raise ValueError(f"theta must have shape (k+1, 4), got {theta.shape}")
        if theta.shape[0] < 2:
            raise ValueError("polynomial order must be >= 1 (theta needs >= 2 rows)")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta coefficients must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def order(self) -> int:
        return self.theta.shape[0] - 1


def encode(box: Box, anchor: Box) -> EncodedOffset:
    """Encode a box relative to an anchor (inverse of :func:`decode`)."""
    return EncodedOffset(
        dx=(box.cx - anchor.cx) / anchor.w,
        dy=(box.cy - anchor.cy) / anchor.h,
        dw=math.log(box.w / anchor.w),
        dh=math.log(box.h / anchor.h),
    )


def decode(off: EncodedOffset, anchor: Box) -> Box:
    """Decode an anchor-relative offset back into an absolute box."""
    return Box(
        cx=anchor.cx + off.dx * anchor.w,
        cy=anchor.cy + off.dy * anchor.h,
        w=anchor.w * math.exp(off.dw),
        h=anchor.h * math.exp(off.dh),
    )


def normalize_timestamps(tube: Tube) -> np.ndarray:
    """Map tube timestamps affinely onto [0, 1].

    The first frame maps to 0 and the last to 1, which keeps powers of t
    bounded regardless of the polynomial order.
    """
    if len(tube) < 2:
        raise DegenerateTubeError("timestamp normalization needs >= 2 frames")
    ts = np.asarray(tube.timestamps, dtype=float)
    return (ts - ts[0]) / (ts[-1] - ts[0])


def normalize_in_span(tube: Tube, span: TemporalSpan) -> np.ndarray:
    """Normalize tube timestamps within an enclosing temporal span."""
    ts = np.asarray(tube.timestamps, dtype=float)
    if tube.t_start < span.t_s or tube.t_end > span.t_e:
        raise OutOfRangeError(
            f"tube frames [{tube.t_start}, {tube.t_end}] exceed span "
            f"[{span.t_s}, {span.t_e}]")
    return (ts - span.t_s) / (span.t_e - span.t_s)


def _power_vector(order: int, t: float) -> np.ndarray:
    return np.power(t, np.arange(order + 1))


def eval_poly_raw(params: PolyTubeParams, t: float) -> EncodedOffset:
    """Evaluate the polynomial at normalized time t in encoded-offset space."""
    if not 0.0 <= t <= 1.0:
        raise OutOfRangeError(f"normalized timestamp must be in [0, 1], got {t}")
    vals = _power_vector(params.order, t) @ params.theta
    return EncodedOffset(*vals)


def eval_poly_tube(params: PolyTubeParams, t: float, anchor: Box) -> Box:
    """Evaluate the parameterized tube at normalized time t as an absolute box."""
    return decode(eval_poly_raw(params, t), anchor)


def fit_tube_lsq(tube: Tube, anchor: Box, k: int,
                 span: TemporalSpan | None = None) -> PolyTubeParams:
    """Least-squares polynomial fit of a tube in encoded space.

    Returns the coefficient matrix minimizing the summed squared error
    between the polynomial and the tube's encoded boxes at its normalized
    timestamps, each coordinate fitted independently. This is the oracle
    that stands in for a learned parameter predictor.

    Args:
        tube: source tube, at least k+1 frames.
        anchor: reference box for the encoding.
        k: polynomial order, 1..8.
        span: optional enclosing span; when given, timestamps are normalized
            within it instead of within the tube (supports padded proposals).

    Raises:
        ParameterError: k outside [1, 8].
        UnderdeterminedFitError: fewer frames than coefficients.
        IllConditionedFitError: Vandermonde condition number above 1e12.
    """
    if not 1 <= k <= MAX_ORDER:
        raise ParameterError(f"polynomial order must be in [1, {MAX_ORDER}], got {k}")
    if len(tube) < 2:
        raise DegenerateTubeError("fitting needs >= 2 frames")
    if len(tube) <= k:
        raise UnderdeterminedFitError(
            f"tube of length {len(tube)} cannot determine order-{k} fit")
    t_hat = normalize_timestamps(tube) if span is None else normalize_in_span(tube, span)
    vander = np.vander(t_hat, k + 1, increasing=True)
    cond = np.linalg.cond(vander)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedFitError(
            f"fit system condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    targets = np.stack([encode(b, anchor).asarray() for b in tube.boxes])
    theta, *_ = np.linalg.lstsq(vander, targets, rcond=None)
    return PolyTubeParams(theta)


def fit_residual(params: PolyTubeParams, tube: Tube, anchor: Box,
                 span: TemporalSpan | None = None) -> float:
    """Summed squared encoded-space residual of params against a tube."""
    t_hat = normalize_timestamps(tube) if span is None else normalize_in_span(tube, span)
    vander = np.vander(t_hat, params.order + 1, increasing=True)
    preds = vander @ params.theta
    targets = np.stack([encode(b, anchor).asarray() for b in tube.boxes])
    return float(np.sum((preds - targets) ** 2))


def coarse_regression_loss(preds: Mapping[Box, PolyTubeParams],
                           gts: Mapping[Box, Tube]) -> float:
    """Tube regression loss over the positive anchors.

    For each positive anchor, the squared encoded-space error between its
    predicted polynomial and its matched tube is summed over the tube's
    frames and divided by that tube's length; the per-anchor means are then
    summed. Zero iff every prediction reproduces its tube exactly.

    An empty positive set yields 0.0 with a warning (the downstream 1/|B+|
    normalization is skipped in that case).
    """
    if not preds:
        warnings.warn("empty positive set: regression loss defined as 0", stacklevel=2)
        return 0.0
    total = 0.0
    for anchor, params in preds.items():
        tube = gts.get(anchor)
        if tube is None:
            raise ParameterError("every positive anchor must map to a matched tube")
        total += fit_residual(params, tube, anchor) / len(tube)
    return total


def coarse_total_loss(cls_scores: Sequence[Sequence[float]] | np.ndarray,
                      cls_labels: Sequence[int],
                      preds: Mapping[Box, PolyTubeParams],
                      gts: Mapping[Box, Tube],
                      n_pos: int, n_neg: int) -> float:
    """Combined coarse loss: normalized classification plus regression term.

    The classification part is summed (C+1)-way cross-entropy over all
    positive and negative samples (background is the extra class), divided
    by the total sample count; the regression part is
    :func:`coarse_regression_loss` divided by the positive count.
    """
    scores = np.asarray(cls_scores, dtype=float)
    labels = np.asarray(cls_labels, dtype=int)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise ValidationError(
            f"need one score row per label, got {scores.shape} vs {labels.shape}")
    if n_pos < 0 or n_neg < 0 or scores.shape[0] != n_pos + n_neg:
        raise ValidationError(
            f"sample count {scores.shape[0]} != n_pos + n_neg = {n_pos + n_neg}")
    sums = scores.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValidationError("classification scores must sum to 1 per sample")
    if np.any(labels < 0) or np.any(labels >= scores.shape[1]):
        raise ValidationError("class labels must index into the score columns")
    picked = scores[np.arange(len(labels)), labels]
    if np.any(picked <= 0):
        raise ValidationError("true-class probability must be positive")
    l_cls = float(-np.log(picked).sum())
    loss = l_cls / (n_pos + n_neg)
    if n_pos > 0:
        loss += coarse_regression_loss(preds, gts) / n_pos
    else:
        warnings.warn("empty positive set: regression term skipped", stacklevel=2)
    return loss
