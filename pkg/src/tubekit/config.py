"""Pipeline configuration with named presets and lossless round-tripping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ParameterError, ValidationError

# One-flag configurations matching the benchmark setups the defaults were
# tuned for: resample length T, sample count N, everything else shared.
PRESETS: dict[str, dict] = {
    "ucf101-24": {"n_frames": 96, "n_samples": 16},
    "jhmdb-21": {"n_frames": 32, "n_samples": 6},
    "ucfsports": {"n_frames": 32, "n_samples": 8},
}


@dataclass
class PipelineConfig:
    """All tunables of the fit/match/keyframe/refine/eval workflows."""

    k: int = 4                      # polynomial order of the coarse tube
    n_samples: int = 16             # N uniform sample timestamps
    segment_len: int = 6            # K frames per matching segment
    epsilon: float = 0.8            # keyframe labeling stop threshold
    sigma: float = 0.8              # search-area scale
    alpha: float = 0.3              # importance selection threshold
    pos_thresh: float = 0.5
    neg_thresh: float = 0.4
    nms_iou: float = 0.2
    max_out: int = 3
    deltas: tuple[float, ...] = (0.2, 0.3, 0.5, 0.75)
    seed: int = 7
    n_frames: int = 96              # T, drives simulation and presets
    grid_size: int = 7              # anchor grid G
    n_anchor_shapes: int = 6
    score_mode: str = "arithmetic"

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in self.deltas)
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.k <= 8:
            raise ParameterError(f"k must be in [1, 8], got {self.k}")
        if self.n_samples < 2:
            raise ParameterError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.segment_len < 1:
            raise ParameterError(f"segment_len must be >= 1, got {self.segment_len}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.neg_thresh <= self.pos_thresh < 1.0:
            raise ParameterError(
                f"need 0 < neg_thresh <= pos_thresh < 1, got "
                f"{self.neg_thresh}, {self.pos_thresh}")
        if not 0.0 <= self.nms_iou <= 1.0:
            raise ParameterError(f"nms_iou must be in [0, 1], got {self.nms_iou}")
        if self.max_out < 1:
            raise ParameterError(f"max_out must be >= 1, got {self.max_out}")
        if not self.deltas or any(not 0.0 < d < 1.0 for d in self.deltas):
            raise ParameterError(f"deltas must lie in (0, 1), got {self.deltas}")
        if self.n_frames < 4:
            raise ParameterError(f"n_frames must be >= 4, got {self.n_frames}")
        if self.grid_size < 1 or self.n_anchor_shapes < 1:
            raise ParameterError("anchor grid and shape count must be >= 1")
        if self.score_mode not in ("arithmetic", "geometric"):
            raise ParameterError(f"unknown score_mode {self.score_mode!r}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["deltas"] = list(self.deltas)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def preset(cls, name: str, **overrides) -> "PipelineConfig":
        if name not in PRESETS:
            raise ParameterError(
                f"unknown preset {name!r}, available: {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})
