"""Coarse-to-fine action-tube estimation, refinement and evaluation toolkit."""

from .config import PipelineConfig
from .errors import (CardinalityError, DegenerateTubeError, IllConditionedFitError,
                     OutOfRangeError, ParameterError, SchemaError, SynthesisError,
                     TubekitError, UnderdeterminedFitError, ValidationError)
from .evalkit import (AnnotationSet, DetectionSet, EvalReport, FpBreakdown, evaluate,
                      fp_breakdown, frame_map, map_range, v_mabo, video_map)
from .geometry import (Box, TemporalSpan, Tube, box_iou, interp_tube, segment_iou,
                       tube_iou)
from .keyframe import (KeySampleGrid, KeyTimestampLabels, exhaustive_keyframe_labels,
                       greedy_keyframe_labels, gt_box_at, sample_grid,
                       select_key_samples)
from .matching import (AnchorSet, MatchLabel, cluster_anchors, match_all,
                       match_anchor, match_anchor_whole_tube)
from .paramtube import (EncodedOffset, PolyTubeParams, coarse_regression_loss,
                        coarse_total_loss, decode, encode, eval_poly_raw,
                        eval_poly_tube, fit_tube_lsq, normalize_timestamps)
from .refine import (CoarseDetection, RefinedDetection, ScoredProposal, SearchArea,
                     assemble_tube, refine_box, refine_detection, sample_coarse_boxes,
                     search_area, tube_nms)
from .synth import (SynthConfig, gen_dataset, oracle_importance, oracle_proposals,
                    video_importance)

__version__ = "0.1.0"
