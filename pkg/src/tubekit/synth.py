"""Deterministic synthetic data: tubes, temporal spans, proposals, scores.

Stand-ins for every learned component so the pipeline can run end-to-end at
desk scale. Ground-truth tubes follow a smooth polynomial base trajectory
(sizes vary log-polynomially so they stay positive) plus bounded per-frame
jitter that models camera shake. Box proposals are perturbed copies of the
ground truth mixed with distractors, scored with a controllable correlation
to their true overlap. Importance scores replay, corrupt, or flatten the
greedy key-timestamp labels.

Every generator output is a pure function of (config, seed): per-video RNG
streams are derived by seed mixing, so any video can be regenerated in
isolation and parallel generation cannot reorder results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ParameterError, SynthesisError
from .evalkit import AnnotationSet
from .geometry import Box, TemporalSpan, Tube, box_iou, tube_iou
from .keyframe import gt_box_at, greedy_keyframe_labels, sample_grid
from .refine import ScoredProposal

_MAX_RETRIES = 60
_EDGE_TOLERANCE = 0.06
_MAX_PAIRWISE_IOU = 0.10


@dataclass
class SynthConfig:
    """Knobs for the synthetic generators.

    jitter and proposal_noise are fractions of the local box size;
    score_fidelity in [0, 1] controls how strongly proposal scores track
    their true overlap (1 = perfect oracle, 0 = adversarial).
    """

    seed: int = 7
    n_videos: int = 20
    n_frames: int = 96
    n_classes: int = 4
    max_instances: int = 3
    motion_order: int = 3
    motion_amp: float = 0.25
    size_amp: float = 0.1
    jitter: float = 0.1
    proposals_per_frame: int = 5
    distractors: int = 2
    proposal_noise: float = 0.1
    score_fidelity: float = 1.0
    span_padding: int = 0
    span_align: int = 0
    distinct_labels: bool = False

    def __post_init__(self):
        if self.n_videos < 1 or self.n_classes < 1 or self.proposals_per_frame < 1:
            raise ParameterError("counts must be >= 1")
        if not 1 <= self.max_instances <= 3:
            raise ParameterError(f"max_instances must be in [1, 3], got {self.max_instances}")
        if self.n_frames < 4:
            raise ParameterError(f"need at least 4 frames per video, got {self.n_frames}")
        if self.motion_order < 0:
            raise ParameterError("motion order must be >= 0")
        for name in ("motion_amp", "size_amp", "jitter", "proposal_noise"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.jitter >= 1 or self.proposal_noise >= 1:
            raise ParameterError("relative perturbations must stay below 1")
        if not 0.0 <= self.score_fidelity <= 1.0:
            raise ParameterError("score_fidelity must be in [0, 1]")
        if self.distractors < 0 or self.span_padding < 0:
            raise ParameterError("distractors and span_padding must be >= 0")
        if self.span_align < 0:
            raise ParameterError("span_align must be >= 0")
        if self.distinct_labels and self.n_classes < self.max_instances:
            raise ParameterError(
                "distinct_labels needs n_classes >= max_instances")


def _video_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    # Seed mixing keeps per-video streams independent and order-free.
    return np.random.default_rng([seed, stream, index])


def _waypoint_poly(rng: np.random.Generator, order: int, amp: float) -> np.ndarray:
    """Coefficients (increasing order) of a polynomial through random waypoints.

    Pinning waypoints uniformly in [-amp, amp] at equispaced times bounds
    the curve's excursion, which raw random coefficients would not.
    """
    if order == 0 or amp == 0.0:
        coeffs = np.zeros(order + 1)
        coeffs[0] = rng.uniform(-amp, amp) if amp else 0.0
        return coeffs
    ts = np.linspace(0.0, 1.0, order + 1)
    values = rng.uniform(-amp, amp, order + 1)
    vander = np.vander(ts, order + 1, increasing=True)
    return np.linalg.solve(vander, values)


def _polyval(coeffs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    return np.vander(ts, len(coeffs), increasing=True) @ coeffs


def _try_tube(rng: np.random.Generator, cfg: SynthConfig, label: int) -> Tube | None:
    T = cfg.n_frames
    min_len = max(cfg.motion_order + 2, 4)
    margin = max(T // 5, 1)
    t_s = int(rng.integers(0, margin + 1))
    t_e = T - 1 - int(rng.integers(0, margin + 1))
    if t_e - t_s + 1 < min_len:
        t_s, t_e = 0, T - 1
    if cfg.span_align > 1:
        # snap the span length to a multiple of span_align so the uniform
        # sample grid lands exactly on frames (no temporal quantization)
        step = cfg.span_align
        down = ((t_e - t_s) // step) * step
        if down >= max(min_len - 1, step):
            t_e = t_s + down
        else:
            up = -(-(max(min_len - 1, 1)) // step) * step
            if t_s + up > T - 1:
                return None
            t_e = t_s + up

    w0 = rng.uniform(0.18, 0.35)
    h0 = rng.uniform(0.18, 0.35)
    cx0 = rng.uniform(0.3, 0.7)
    cy0 = rng.uniform(0.3, 0.7)
    px = _waypoint_poly(rng, cfg.motion_order, cfg.motion_amp)
    py = _waypoint_poly(rng, cfg.motion_order, cfg.motion_amp)
    pw = _waypoint_poly(rng, cfg.motion_order, cfg.size_amp)
    ph = _waypoint_poly(rng, cfg.motion_order, cfg.size_amp)

    ts = np.arange(t_s, t_e + 1)
    t_hat = (ts - t_s) / (t_e - t_s)
    cx = cx0 + _polyval(px, t_hat)
    cy = cy0 + _polyval(py, t_hat)
    w = w0 * np.exp(_polyval(pw, t_hat))
    h = h0 * np.exp(_polyval(ph, t_hat))

    if cfg.jitter > 0:
        cx = cx + rng.uniform(-1, 1, len(ts)) * cfg.jitter * w
        cy = cy + rng.uniform(-1, 1, len(ts)) * cfg.jitter * h
        w = w * (1 + rng.uniform(-1, 1, len(ts)) * cfg.jitter)
        h = h * (1 + rng.uniform(-1, 1, len(ts)) * cfg.jitter)

    lo = min((cx - w / 2).min(), (cy - h / 2).min())
    hi = max((cx + w / 2).max(), (cy + h / 2).max())
    if lo < -_EDGE_TOLERANCE or hi > 1 + _EDGE_TOLERANCE:
        return None
    frames = tuple((int(t), Box(float(a), float(b), float(c), float(d)))
                   for t, a, b, c, d in zip(ts, cx, cy, w, h))
    return Tube(label, frames)


def gen_dataset(cfg: SynthConfig) -> tuple[AnnotationSet, dict[str, TemporalSpan]]:
    """Generate ground-truth tubes and per-video temporal spans.

    Each video holds 1..max_instances tubes with pairwise tube IOU below
    0.15 (no near-duplicates) and boxes inside the frame up to a small
    tolerance; infeasible draws are retried a bounded number of times. The
    per-video span covers all of its tubes, optionally padded.
    """
    videos: dict[str, tuple[Tube, ...]] = {}
    spans: dict[str, TemporalSpan] = {}
    for v in range(cfg.n_videos):
        rng = _video_rng(cfg.seed, 0, v)
        n_inst = int(rng.integers(1, cfg.max_instances + 1))
        if cfg.distinct_labels:
            labels = [int(c) for c in rng.permutation(cfg.n_classes)[:n_inst]]
        else:
            labels = [int(c) for c in rng.integers(cfg.n_classes, size=n_inst)]
        tubes: list[Tube] = []
        for label in labels:
            tube = None
            for _ in range(_MAX_RETRIES):
                cand = _try_tube(rng, cfg, label)
                if cand is None:
                    continue
                if any(tube_iou(cand, other) > _MAX_PAIRWISE_IOU for other in tubes):
                    continue
                tube = cand
                break
            if tube is None:
                raise SynthesisError(
                    f"could not place a feasible tube in video {v} after "
                    f"{_MAX_RETRIES} attempts; lower motion_amp or sizes")
            tubes.append(tube)
        vid = f"v{v:04d}"
        videos[vid] = tuple(tubes)
        t_s = min(t.t_start for t in tubes) - cfg.span_padding
        t_e = max(t.t_end for t in tubes) + cfg.span_padding
        spans[vid] = TemporalSpan(max(t_s, 0), min(t_e, cfg.n_frames - 1))
    return AnnotationSet(videos), spans


def _perturbed_box(rng: np.random.Generator, gt: Box, noise: float) -> Box:
    if noise == 0:
        return gt
    return Box(
        cx=gt.cx + rng.uniform(-1, 1) * noise * gt.w,
        cy=gt.cy + rng.uniform(-1, 1) * noise * gt.h,
        w=gt.w * (1 + rng.uniform(-1, 1) * noise),
        h=gt.h * (1 + rng.uniform(-1, 1) * noise),
    )


def _proposal_score(rng: np.random.Generator, iou: float, fidelity: float) -> float:
    raw = fidelity * iou + (1 - fidelity) * rng.uniform(0.0, 1.0)
    return float(min(max(raw, 0.0), 1.0))


def _video_proposals(rng: np.random.Generator, tubes, cfg: SynthConfig,
                     n_samples: int):
    """Per-class, per-sample proposals for one video's tubes."""
    grid = sample_grid(n_samples)
    per_class: dict = {}
    for i, s in enumerate(grid):
        for tube in tubes:
            gt = gt_box_at(tube, float(s))
            items = []
            for _ in range(cfg.proposals_per_frame):
                box = _perturbed_box(rng, gt, cfg.proposal_noise)
                items.append(ScoredProposal(
                    box, _proposal_score(rng, box_iou(box, gt), cfg.score_fidelity), i))
            for _ in range(cfg.distractors):
                box = Box(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                          rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4))
                items.append(ScoredProposal(
                    box, _proposal_score(rng, box_iou(box, gt), cfg.score_fidelity), i))
            bucket = per_class.setdefault(tube.label, {})
            bucket[i] = bucket.get(i, ()) + tuple(items)
    return per_class


def oracle_proposals_per_class(gts: AnnotationSet, cfg: SynthConfig,
                               n_samples: int) -> dict:
    """Class-routed proposal channels: video id -> label -> sample -> items.

    Stand-in for a class-specific proposer: at each of the n_samples grid
    timestamps of every tube, emits proposals_per_frame perturbed copies of
    the ground-truth box plus random distractors, all filed under the tube's
    class. Scores follow fidelity * IOU + (1 - fidelity) * noise, clamped to
    [0, 1]; with fidelity 1 and zero noise the top proposal at every sample
    is the exact ground-truth box scored 1.0.
    """
    out = {}
    for v_idx, vid in enumerate(sorted(gts.videos)):
        rng = _video_rng(cfg.seed, 1, v_idx)
        out[vid] = _video_proposals(rng, gts.videos[vid], cfg, n_samples)
    return out


def oracle_proposals(gts: AnnotationSet, cfg: SynthConfig,
                     n_samples: int) -> dict[str, dict[int, tuple[ScoredProposal, ...]]]:
    """Single-channel proposals (video id -> sample -> items).

    Flattens :func:`oracle_proposals_per_class` across classes in tube
    order; this is the shape the file schema stores. Draws are identical to
    the per-class variant, so the two views describe the same proposals.
    """
    flat: dict[str, dict[int, tuple[ScoredProposal, ...]]] = {}
    for vid, per_class in oracle_proposals_per_class(gts, cfg, n_samples).items():
        merged: dict[int, tuple[ScoredProposal, ...]] = {}
        for bucket in per_class.values():
            for i, items in bucket.items():
                merged[i] = merged.get(i, ()) + items
        flat[vid] = {i: merged[i] for i in sorted(merged)}
    return flat


def oracle_importance(tube: Tube, n: int, mode: str = "labels",
                      epsilon: float = 0.8, flip_rate: float = 0.2,
                      rng: np.random.Generator | None = None) -> list[float]:
    """Importance scores standing in for a learned timestamp selector.

    mode "labels" replays the greedy key-timestamp labels (perfect
    selector); "noisy" flips each label with probability flip_rate;
    "uniform" returns 0.5 everywhere (selection degenerates to all-or-none
    around the threshold).
    """
    if mode == "uniform":
        if n < 2:
            raise ParameterError(f"sample count must be >= 2, got {n}")
        return [0.5] * n
    labels = greedy_keyframe_labels(tube, n, epsilon).labels
    if mode == "labels":
        return [float(v) for v in labels]
    if mode == "noisy":
        if not 0.0 <= flip_rate <= 1.0:
            raise ParameterError(f"flip rate must be in [0, 1], got {flip_rate}")
        rng = rng if rng is not None else np.random.default_rng(0)
        flips = rng.random(n) < flip_rate
        return [float(1 - v) if f else float(v) for v, f in zip(labels, flips)]
    raise ParameterError(f"unknown importance mode {mode!r}")


def video_importance(gts: AnnotationSet, cfg: SynthConfig, n_samples: int,
                     mode: str = "labels", epsilon: float = 0.8,
                     flip_rate: float = 0.2) -> dict[str, list[float]]:
    """Per-video importance vectors: elementwise max over the video's tubes.

    A sample is key for the video if it is key for any of its instances, so
    a single selector output can drive the refinement of all of them.
    """
    out: dict[str, list[float]] = {}
    for v_idx, vid in enumerate(sorted(gts.videos)):
        rng = _video_rng(cfg.seed, 2, v_idx)
        merged = [0.0] * n_samples
        for tube in gts.videos[vid]:
            scores = oracle_importance(tube, n_samples, mode, epsilon, flip_rate, rng)
            merged = [max(a, b) for a, b in zip(merged, scores)]
        out[vid] = merged
    return out
