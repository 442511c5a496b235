"""Command-line workflows: simulate, fit, match, keyframes, refine, eval, report.

Every run with identical inputs and seed produces byte-identical artifacts;
failures exit with a distinct code per error family and print a
machine-readable error record to stderr:

    0  success
    2  usage error (unknown flag/subcommand; argparse default)
    3  missing input file
    4  parameter/config out of range
    5  data validation or schema error
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .config import PRESETS, PipelineConfig
from .errors import ParameterError, SchemaError, TubekitError, ValidationError
from .evalkit import evaluate, v_mabo, video_map
from .geometry import Tube, tube_iou
from .keyframe import greedy_keyframe_labels
from .matching import match_all, match_anchor_whole_tube, POSITIVE, NEGATIVE, IGNORE
from .paramtube import fit_residual
from .pipeline import (assemble_coarse_only, build_anchor_set, build_coarse,
                       refine_all)
from .serialize import (Dataset, _fmt_json_block, dumps_report, load_dataset,
                        report_to_csv, report_to_json_obj, save_dataset)
from .svgplot import save_chart
from .synth import SynthConfig, gen_dataset, oracle_proposals, video_importance

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_DATA = 5

CONFIG_ENV_VAR = "TUBEKIT_CONFIG"

_CONFIG_FLAGS = [
    ("--k", int, "polynomial order of the coarse tube"),
    ("--n-samples", int, "number of uniform sample timestamps (N)"),
    ("--segment-len", int, "matching segment length in frames (K)"),
    ("--epsilon", float, "keyframe labeling stop threshold"),
    ("--sigma", float, "search-area scale"),
    ("--alpha", float, "importance selection threshold"),
    ("--pos-thresh", float, "positive matching threshold"),
    ("--neg-thresh", float, "negative matching threshold"),
    ("--nms-iou", float, "tube NMS suppression threshold"),
    ("--max-out", int, "max tubes per video after NMS"),
    ("--seed", int, "master RNG seed"),
    ("--n-frames", int, "video resample length (T)"),
    ("--grid-size", int, "anchor grid size (G)"),
    ("--score-mode", str, "final score combiner: arithmetic | geometric"),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline configuration")
    group.add_argument("--config", help="JSON config file "
                       f"(default: ${CONFIG_ENV_VAR} if set)")
    group.add_argument("--preset", choices=sorted(PRESETS),
                       help="named configuration preset")
    for flag, typ, help_text in _CONFIG_FLAGS:
        group.add_argument(flag, type=typ, default=None, help=help_text)
    group.add_argument("--deltas", default=None,
                       help="comma-separated evaluation IOU thresholds")


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    base: dict = {}
    if args.preset:
        base.update(PRESETS[args.preset])
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"no such config file: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config file {path}: malformed JSON at line "
                              f"{exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise SchemaError(f"config file {path}: expected a JSON object")
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"config file {path}: unknown fields {sorted(unknown)}")
        base.update(data)
    for flag, _, _ in _CONFIG_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    if args.deltas is not None:
        base["deltas"] = tuple(float(d) for d in args.deltas.split(","))
    return PipelineConfig(**base)


def _synth_config(args: argparse.Namespace, cfg: PipelineConfig) -> SynthConfig:
    return SynthConfig(
        seed=cfg.seed,
        n_videos=args.videos,
        n_frames=cfg.n_frames,
        n_classes=args.classes,
        max_instances=args.max_instances,
        motion_order=args.motion_order,
        motion_amp=args.motion_amp,
        size_amp=args.size_amp,
        jitter=args.jitter,
        proposals_per_frame=args.proposals_per_frame,
        distractors=args.distractors,
        proposal_noise=args.proposal_noise,
        score_fidelity=args.fidelity,
        span_padding=args.span_padding,
        span_align=args.span_align,
        distinct_labels=args.distinct_labels,
    )


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_obj(obj: dict) -> str:
    return _fmt_json_block(obj) + "\n"


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    synth = _synth_config(args, cfg)
    annotations, spans = gen_dataset(synth)
    proposals = oracle_proposals(annotations, synth, cfg.n_samples)
    importance = video_importance(annotations, synth, cfg.n_samples,
                                  mode=args.importance_mode,
                                  epsilon=cfg.epsilon,
                                  flip_rate=args.flip_rate)
    save_dataset(args.out, Dataset(annotations=annotations, spans=spans,
                                   proposals=proposals, importance=importance))
    print(f"wrote {args.out}: {len(annotations.videos)} videos, "
          f"{annotations.n_tubes()} tubes")
    return EXIT_OK


def _cmd_fit(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.infile)
    coarse = build_coarse(dataset.annotations, dataset.spans, cfg)
    videos = []
    for vid in sorted(coarse.detections):
        fits = []
        for idx, det in enumerate(coarse.detections[vid]):
            tube = dataset.annotations.videos[vid][idx]
            residual = fit_residual(det.params, tube, det.anchor)
            fits.append({
                "tube_index": idx,
                "label": det.label,
                "anchor": [det.anchor.cx, det.anchor.cy, det.anchor.w, det.anchor.h],
                "order": det.params.order,
                "theta": [list(row) for row in det.params.theta],
                "rms_residual": (residual / len(tube)) ** 0.5,
            })
        videos.append({"id": vid, "fits": fits})
    _write(args.out, _dump_obj({"schema_version": 1, "k": cfg.k, "videos": videos}))
    print(f"wrote {args.out}: fits for {len(videos)} videos")
    return EXIT_OK


def _cmd_match(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.infile)
    anchor_set = build_anchor_set(dataset.annotations, cfg)
    videos = []
    for vid in sorted(dataset.annotations.videos):
        tubes = list(dataset.annotations.videos[vid])
        labels = match_all(anchor_set, tubes, cfg.segment_len,
                           cfg.pos_thresh, cfg.neg_thresh)
        whole = [match_anchor_whole_tube(a, tubes, cfg.pos_thresh, cfg.neg_thresh)
                 for a in anchor_set.anchors()]
        positives = [{"anchor_index": i, "tube_index": tubes.index(l.matched_tube)}
                     for i, l in enumerate(labels) if l.value == POSITIVE]
        videos.append({
            "id": vid,
            "n_pos": sum(l.value == POSITIVE for l in labels),
            "n_neg": sum(l.value == NEGATIVE for l in labels),
            "n_ignore": sum(l.value == IGNORE for l in labels),
            "n_pos_whole_tube": sum(l.value == POSITIVE for l in whole),
            "positives": positives,
        })
    out = {"schema_version": 1, "grid": anchor_set.grid,
           "shapes": [list(s) for s in anchor_set.shapes], "videos": videos}
    _write(args.out, _dump_obj(out))
    total_pos = sum(v["n_pos"] for v in videos)
    total_whole = sum(v["n_pos_whole_tube"] for v in videos)
    print(f"wrote {args.out}: {total_pos} positive anchors "
          f"(whole-tube baseline: {total_whole})")
    return EXIT_OK


def _cmd_keyframes(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.infile)
    videos = []
    for vid in sorted(dataset.annotations.videos):
        tubes = []
        for idx, tube in enumerate(dataset.annotations.videos[vid]):
            out = greedy_keyframe_labels(tube, cfg.n_samples, cfg.epsilon)
            tubes.append({"tube_index": idx,
                          "labels": list(out.labels),
                          "selected": list(out.selected),
                          "achieved_iou": out.achieved_iou})
        videos.append({"id": vid, "tubes": tubes})
    _write(args.out, _dump_obj({"schema_version": 1, "n_samples": cfg.n_samples,
                                "epsilon": cfg.epsilon, "videos": videos}))
    n = sum(len(v["tubes"]) for v in videos)
    print(f"wrote {args.out}: keyframe labels for {n} tubes")
    return EXIT_OK


def _cmd_refine(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.infile)
    coarse = build_coarse(dataset.annotations, dataset.spans, cfg)
    baseline = assemble_coarse_only(coarse, cfg)
    refined = refine_all(coarse, dataset.proposals, dataset.importance, cfg)
    coarse_out = args.coarse_out or str(Path(args.out).with_suffix("")) + ".coarse.json"
    save_dataset(args.out, Dataset(detections=refined, spans=dataset.spans))
    save_dataset(coarse_out, Dataset(detections=baseline, spans=dataset.spans))
    print(f"wrote {args.out} (refined) and {coarse_out} (coarse baseline)")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    gts = load_dataset(args.gts).annotations
    dets = load_dataset(args.dets).detections
    report = evaluate(dets, gts, deltas=cfg.deltas)
    payload = report_to_json_obj(report)
    if args.map_range:
        lo, hi, step = (float(x) for x in args.map_range.split(":"))
        from .evalkit import map_range
        payload["v_map_range"] = {"lo": lo, "hi": hi, "step": step,
                                  "value": map_range(dets, gts, lo, hi, step)}
    _write(args.out, _dump_obj(payload))
    if args.csv:
        _write(args.csv, report_to_csv(report))
    for d in cfg.deltas:
        print(f"v-mAP@{d:g}: {report.v_map[d]:.4f}")
    print(f"frame-mAP@{report.frame_map_delta:g}: {report.frame_map:.4f}")
    print(f"v-MABO: {report.v_mabo:.4f}")
    b = report.breakdown
    print(f"breakdown@{report.breakdown_delta:g}: tp={b.tp} wrong_class={b.wrong_class} "
          f"bad_localization={b.bad_localization} duplicate={b.duplicate}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg = _resolve_config(args)
    dataset = load_dataset(args.infile)
    k_grid = [int(k) for k in args.k_grid.split(",")]
    sigma_grid = [float(s) for s in args.sigma_grid.split(",")]
    delta = args.delta

    table: dict[str, dict[int, float]] = {"no refine": {}}
    for sigma in sigma_grid:
        table[f"sigma={sigma:g}"] = {}
    best = None
    for k in k_grid:
        k_cfg = dataclasses.replace(cfg, k=k)
        coarse = build_coarse(dataset.annotations, dataset.spans, k_cfg)
        baseline = assemble_coarse_only(coarse, k_cfg)
        table["no refine"][k] = video_map(baseline, dataset.annotations, delta)[1]
        for sigma in sigma_grid:
            refined = refine_all(coarse, dataset.proposals, dataset.importance,
                                 k_cfg, sigma=sigma)
            score = video_map(refined, dataset.annotations, delta)[1]
            table[f"sigma={sigma:g}"][k] = score
            if best is None or score > best[0]:
                best = (score, k, sigma, refined, baseline)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = "row," + ",".join(f"k={k}" for k in k_grid)
    csv_rows = [header]
    txt_rows = [f"v-mAP@{delta:g}".ljust(12) + "".join(f"k={k}".rjust(9) for k in k_grid)]
    for row_name, cells in table.items():
        csv_rows.append(row_name + "," + ",".join(f"{cells[k]:.17g}" for k in k_grid))
        txt_rows.append(row_name.ljust(12)
                        + "".join(f"{cells[k]:9.4f}" for k in k_grid))
    _write(out_dir / "table.csv", "\n".join(csv_rows) + "\n")
    _write(out_dir / "table.txt", "\n".join(txt_rows) + "\n")
    _write(out_dir / "report.json", _dump_obj({
        "delta": delta, "k_grid": k_grid, "sigma_grid": sigma_grid,
        "table": {row: {str(k): v for k, v in cells.items()}
                  for row, cells in table.items()},
    }))
    print("\n".join(txt_rows))
    if args.plots:
        _write_plots(out_dir, dataset, best, delta)
    print(f"wrote {out_dir}/table.csv, table.txt, report.json")
    return EXIT_OK


def _write_plots(out_dir: Path, dataset: Dataset, best, delta: float) -> None:
    _, k, sigma, refined, baseline = best
    series = []
    for name, dets in (("refined", refined), ("no refine", baseline)):
        recalls, precisions = _pr_curve(dets, dataset, delta)
        series.append((name, recalls, precisions))
    save_chart(out_dir / "pr_curve.svg", series,
               f"precision-recall @ IOU {delta:g} (k={k}, sigma={sigma:g})",
               "recall", "precision")
    vid = sorted(dataset.annotations.videos)[0]
    gt = dataset.annotations.videos[vid][0]
    traj = [("ground truth",
             [t for t, _ in gt.frames], [b.cx for b in gt.boxes])]
    for name, dets in (("refined", refined), ("no refine", baseline)):
        if dets.videos.get(vid):
            tube = dets.videos[vid][0].tube
            traj.append((name, [t for t, _ in tube.frames],
                         [b.cx for b in tube.boxes]))
    save_chart(out_dir / "trajectory.svg", traj,
               f"horizontal center trajectory ({vid})", "frame", "cx")


def _pr_curve(dets, dataset: Dataset, delta: float):
    """Pooled PR points over all classes, for plotting only."""
    entries = []
    for vid in sorted(dets.videos):
        for i, d in enumerate(dets.videos[vid]):
            entries.append((-d.score, vid, i, d))
    entries.sort(key=lambda e: e[:3])
    matched: dict[tuple, bool] = {}
    n_gt = dataset.annotations.n_tubes()
    tp = fp = 0
    recalls, precisions = [0.0], [1.0]
    for _, vid, _, det in entries:
        hit = False
        for j, gt in enumerate(dataset.annotations.videos.get(vid, ())):
            if gt.label == det.label and not matched.get((vid, j)) \
                    and tube_iou(det.tube, gt) > delta:
                matched[(vid, j)] = True
                hit = True
                break
        tp, fp = (tp + 1, fp) if hit else (tp, fp + 1)
        recalls.append(tp / n_gt if n_gt else 0.0)
        precisions.append(tp / (tp + fp))
    return recalls, precisions


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubekit",
        description="Coarse-to-fine action-tube estimation, refinement and "
                    "evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset file")
    p.add_argument("--out", required=True, help="output dataset JSON")
    p.add_argument("--videos", type=int, default=20)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--max-instances", type=int, default=3)
    p.add_argument("--motion-order", type=int, default=3)
    p.add_argument("--motion-amp", type=float, default=0.25)
    p.add_argument("--size-amp", type=float, default=0.1)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--proposals-per-frame", type=int, default=5)
    p.add_argument("--distractors", type=int, default=2)
    p.add_argument("--proposal-noise", type=float, default=0.1)
    p.add_argument("--fidelity", type=float, default=1.0)
    p.add_argument("--span-padding", type=int, default=0)
    p.add_argument("--span-align", type=int, default=0)
    p.add_argument("--distinct-labels", action="store_true")
    p.add_argument("--importance-mode", choices=("labels", "noisy", "uniform"),
                   default="labels")
    p.add_argument("--flip-rate", type=float, default=0.2)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit polynomial tube parameters per tube")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("match", help="label anchors against ground-truth tubes")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("keyframes", help="greedy key-timestamp labels per tube")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_keyframes)

    p = sub.add_parser("refine", help="build coarse and refined detections")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="refined detections JSON")
    p.add_argument("--coarse-out", help="coarse baseline detections JSON "
                   "(default: <out>.coarse.json)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("eval", help="score detections against annotations")
    p.add_argument("--dets", required=True)
    p.add_argument("--gts", required=True)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="optional CSV report")
    p.add_argument("--map-range", help="extra averaged mAP row, e.g. 0.5:0.95:0.05")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="sigma x k ablation table and plots")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k-grid", default="2,3,4,5")
    p.add_argument("--sigma-grid", default="0.4,0.6,0.8")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _error_record(EXIT_MISSING_INPUT, exc)
        return EXIT_MISSING_INPUT
    except (SchemaError, ValidationError) as exc:
        _error_record(EXIT_DATA, exc)
        return EXIT_DATA
    except (ParameterError, TubekitError, ValueError) as exc:
        _error_record(EXIT_CONFIG, exc)
        return EXIT_CONFIG


def _error_record(code: int, exc: Exception) -> None:
    record = {"error": {"code": code, "kind": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
