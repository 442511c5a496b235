import numpy as np

from tubekit.config import PipelineConfig
from tubekit.geometry import segment_iou
from tubekit.pipeline import (assemble_coarse_only, best_anchor, build_anchor_set,
                              build_coarse, refine_all, run_refinement)
from tubekit.serialize import Dataset
from tubekit.synth import (SynthConfig, gen_dataset, oracle_proposals,
                           oracle_proposals_per_class, video_importance)


def small_world(seed=23, videos=6, fidelity=1.0, noise=0.0):
    cfg = PipelineConfig(k=3, n_samples=8, seed=seed)
    synth = SynthConfig(seed=seed, n_videos=videos, n_frames=36, motion_order=4,
                        motion_amp=0.25, jitter=0.05, span_align=7,
                        proposal_noise=noise, score_fidelity=fidelity,
                        distinct_labels=True)
    ann, spans = gen_dataset(synth)
    return cfg, synth, ann, spans


def test_anchor_set_comes_from_dataset_shapes():
    cfg, _, ann, _ = small_world()
    aset = build_anchor_set(ann, cfg)
    assert aset.grid == cfg.grid_size
    assert len(aset.shapes) == cfg.n_anchor_shapes
    sizes = [b.w for tubes in ann.videos.values() for t in tubes for b in t.boxes]
    for w, h in aset.shapes:
        assert min(sizes) * 0.5 <= w <= max(sizes) * 1.5


def test_best_anchor_maximizes_first_segment_iou():
    cfg, _, ann, _ = small_world()
    aset = build_anchor_set(ann, cfg)
    anchors = aset.anchors()
    tube = next(iter(ann.videos.values()))[0]
    chosen = best_anchor(anchors, tube, cfg.segment_len)
    best = max(segment_iou(a, tube, 0, cfg.segment_len) for a in anchors)
    assert segment_iou(chosen, tube, 0, cfg.segment_len) == best


def test_build_coarse_one_detection_per_tube():
    cfg, _, ann, spans = small_world()
    coarse = build_coarse(ann, spans, cfg)
    for vid, tubes in ann.videos.items():
        dets = coarse.detections[vid]
        assert len(dets) == len(tubes)
        for det, tube in zip(dets, tubes):
            assert det.label == tube.label
            assert det.span.t_s == tube.t_start
            assert det.span.t_e == tube.t_end
            assert 0.5 <= det.cls_score <= 1.0


def test_refine_all_with_empty_proposals_equals_baseline():
    cfg, _, ann, spans = small_world()
    coarse = build_coarse(ann, spans, cfg)
    baseline = assemble_coarse_only(coarse, cfg)
    refined = refine_all(coarse, {}, {}, cfg)
    assert refined.videos == baseline.videos


def test_class_routed_and_flat_proposals_agree_on_single_instance():
    cfg, synth, ann, spans = small_world(videos=8)
    single = {vid: tubes for vid, tubes in ann.videos.items() if len(tubes) == 1}
    assert single
    from tubekit.evalkit import AnnotationSet
    ann_single = AnnotationSet(single)
    spans_single = {vid: spans[vid] for vid in single}
    coarse = build_coarse(ann_single, spans_single, cfg)
    imp = video_importance(ann_single, synth, cfg.n_samples)
    flat = refine_all(coarse, oracle_proposals(ann_single, synth, cfg.n_samples),
                      imp, cfg)
    routed = refine_all(coarse,
                        oracle_proposals_per_class(ann_single, synth, cfg.n_samples),
                        imp, cfg)
    assert flat.videos == routed.videos


def test_run_refinement_bundle():
    cfg, synth, ann, spans = small_world()
    ds = Dataset(annotations=ann, spans=spans,
                 proposals=oracle_proposals(ann, synth, cfg.n_samples),
                 importance=video_importance(ann, synth, cfg.n_samples))
    baseline, refined = run_refinement(ds, cfg)
    assert set(baseline.videos) == set(ann.videos)
    assert set(refined.videos) == set(ann.videos)
    assert any(d.refined_indices for dets in refined.videos.values() for d in dets)
