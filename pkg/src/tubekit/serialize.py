"""JSON schemas for datasets and detections, plus CSV report output.

One file format covers both annotation and detection payloads:

    {"schema_version": 1,
     "videos": [{"id": str,
                 "span": {"t_s": int, "t_e": int},
                 "tubes": [{"label": int|str,
                            "frames": [{"t": int, "box": [cx, cy, w, h]}]}],
                 "detections": [{"label": ..., "score": float,
                                 "frames": [...]}],
                 "proposals": [{"sample_index": int,
                                "items": [{"box": [...], "score": float}]}],
                 "importance": [float, ...]}]}

All per-video sections are optional; unknown fields are rejected with the
JSON path of the offender. Floats are written with 17 significant digits so
values round-trip exactly and repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .evalkit import AnnotationSet, DetectionSet, EvalReport
from .geometry import Box, TemporalSpan, Tube
from .refine import RefinedDetection, ScoredProposal

SCHEMA_VERSION = 1

ProposalMap = dict[str, dict[int, tuple[ScoredProposal, ...]]]
ImportanceMap = dict[str, list[float]]


@dataclass
class Dataset:
    """Everything one dataset file can carry."""

    annotations: AnnotationSet = field(default_factory=AnnotationSet)
    spans: dict[str, TemporalSpan] = field(default_factory=dict)
    detections: DetectionSet = field(default_factory=DetectionSet)
    proposals: ProposalMap = field(default_factory=dict)
    importance: ImportanceMap = field(default_factory=dict)


# ---------------------------------------------------------------------------
# writing

def _fmt(value) -> str:
    if isinstance(value, bool):
        raise SchemaError(f"booleans are not part of the schema: {value!r}")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, dict):
        inner = ", ".join(f"{json.dumps(k)}: {_fmt(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise SchemaError(f"cannot serialize value of type {type(value).__name__}")


def _dump(obj: dict) -> str:
    # Hand-rolled emitter: json.dumps would print shortest-repr floats, and
    # the file contract pins 17 significant digits.
    lines = ["{"]
    lines.append(f'  "schema_version": {obj["schema_version"]},')
    lines.append('  "videos": [')
    videos = obj["videos"]
    for i, video in enumerate(videos):
        body = ", ".join(f"{json.dumps(k)}: {_fmt(v)}" for k, v in video.items())
        comma = "," if i + 1 < len(videos) else ""
        lines.append("    {" + body + "}" + comma)
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _box_obj(box: Box) -> list[float]:
    return [box.cx, box.cy, box.w, box.h]


def _tube_obj(tube: Tube) -> dict:
    return {"label": tube.label,
            "frames": [{"t": t, "box": _box_obj(b)} for t, b in tube.frames]}


def _video_record(vid: str, dataset: Dataset) -> dict:
    record: dict = {"id": vid}
    span = dataset.spans.get(vid)
    if span is not None:
        record["span"] = {"t_s": span.t_s, "t_e": span.t_e}
    tubes = dataset.annotations.videos.get(vid)
    if tubes is not None:
        record["tubes"] = [_tube_obj(t) for t in tubes]
    dets = dataset.detections.videos.get(vid)
    if dets is not None:
        record["detections"] = [dict(_tube_obj(d.tube), score=d.score) for d in dets]
    props = dataset.proposals.get(vid)
    if props is not None:
        record["proposals"] = [
            {"sample_index": i,
             "items": [{"box": _box_obj(p.box), "score": p.score} for p in items]}
            for i, items in sorted(props.items())]
    imp = dataset.importance.get(vid)
    if imp is not None:
        record["importance"] = [float(p) for p in imp]
    return record


def dumps_dataset(dataset: Dataset) -> str:
    ids = sorted(set(dataset.annotations.videos) | set(dataset.spans)
                 | set(dataset.detections.videos) | set(dataset.proposals)
                 | set(dataset.importance))
    return _dump({"schema_version": SCHEMA_VERSION,
                  "videos": [_video_record(v, dataset) for v in ids]})


def save_dataset(path: str | Path, dataset: Dataset) -> None:
    Path(path).write_text(dumps_dataset(dataset))


def save_annotations(path: str | Path, annotations: AnnotationSet,
                     spans: dict[str, TemporalSpan] | None = None) -> None:
    save_dataset(path, Dataset(annotations=annotations, spans=spans or {}))


def save_detections(path: str | Path, detections: DetectionSet,
                    spans: dict[str, TemporalSpan] | None = None) -> None:
    save_dataset(path, Dataset(detections=detections, spans=spans or {}))


# ---------------------------------------------------------------------------
# reading

def _require(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{path}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{path}: missing required field(s) {sorted(missing)}")


def _parse_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _parse_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}: expected an integer, got {value!r}")
    return value


def _parse_label(value, path: str):
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise SchemaError(f"{path}: label must be an integer or string, got {value!r}")
    return value


def _parse_box(value, path: str) -> Box:
    if not isinstance(value, list) or len(value) != 4:
        raise SchemaError(f"{path}: box must be a 4-element array [cx, cy, w, h]")
    cx, cy, w, h = (_parse_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    try:
        return Box(cx, cy, w, h)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def _parse_frames(value, path: str) -> tuple[tuple[int, Box], ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"{path}: frames must be a non-empty array")
    out = []
    for i, frame in enumerate(value):
        fpath = f"{path}[{i}]"
        _require(frame, {"t", "box"}, {"t", "box"}, fpath)
        out.append((_parse_int(frame["t"], f"{fpath}.t"),
                    _parse_box(frame["box"], f"{fpath}.box")))
    return tuple(out)


def _parse_tube(value, path: str) -> Tube:
    _require(value, {"label", "frames"}, {"label", "frames"}, path)
    label = _parse_label(value["label"], f"{path}.label")
    frames = _parse_frames(value["frames"], f"{path}.frames")
    try:
        return Tube(label, frames)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def _parse_detection(value, path: str) -> RefinedDetection:
    _require(value, {"label", "frames", "score"}, {"label", "frames", "score"}, path)
    label = _parse_label(value["label"], f"{path}.label")
    frames = _parse_frames(value["frames"], f"{path}.frames")
    score = _parse_number(value["score"], f"{path}.score")
    try:
        return RefinedDetection(tube=Tube(label, frames), label=label, score=score)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def _parse_video(value, path: str, dataset: Dataset, seen: set[str]) -> None:
    _require(value, {"id", "span", "tubes", "detections", "proposals", "importance"},
             {"id"}, path)
    vid = value["id"]
    if not isinstance(vid, str):
        raise SchemaError(f"{path}.id: video id must be a string, got {vid!r}")
    if vid in seen:
        raise SchemaError(f"{path}.id: duplicate video id {vid!r}")
    seen.add(vid)
    if "span" in value:
        span = value["span"]
        spath = f"{path}.span"
        _require(span, {"t_s", "t_e"}, {"t_s", "t_e"}, spath)
        try:
            dataset.spans[vid] = TemporalSpan(_parse_int(span["t_s"], f"{spath}.t_s"),
                                              _parse_int(span["t_e"], f"{spath}.t_e"))
        except ValueError as exc:
            raise SchemaError(f"{spath}: {exc}") from None
    if "tubes" in value:
        if not isinstance(value["tubes"], list):
            raise SchemaError(f"{path}.tubes: expected an array")
        dataset.annotations.videos[vid] = tuple(
            _parse_tube(t, f"{path}.tubes[{i}]") for i, t in enumerate(value["tubes"]))
    if "detections" in value:
        if not isinstance(value["detections"], list):
            raise SchemaError(f"{path}.detections: expected an array")
        dataset.detections.videos[vid] = tuple(
            _parse_detection(d, f"{path}.detections[{i}]")
            for i, d in enumerate(value["detections"]))
    if "proposals" in value:
        if not isinstance(value["proposals"], list):
            raise SchemaError(f"{path}.proposals: expected an array")
        per_sample: dict[int, tuple[ScoredProposal, ...]] = {}
        for i, group in enumerate(value["proposals"]):
            gpath = f"{path}.proposals[{i}]"
            _require(group, {"sample_index", "items"}, {"sample_index", "items"}, gpath)
            idx = _parse_int(group["sample_index"], f"{gpath}.sample_index")
            if idx < 0:
                raise SchemaError(f"{gpath}.sample_index: must be >= 0, got {idx}")
            if idx in per_sample:
                raise SchemaError(f"{gpath}.sample_index: duplicate index {idx}")
            if not isinstance(group["items"], list):
                raise SchemaError(f"{gpath}.items: expected an array")
            items = []
            for j, item in enumerate(group["items"]):
                ipath = f"{gpath}.items[{j}]"
                _require(item, {"box", "score"}, {"box", "score"}, ipath)
                try:
                    items.append(ScoredProposal(
                        box=_parse_box(item["box"], f"{ipath}.box"),
                        score=_parse_number(item["score"], f"{ipath}.score"),
                        frame_index=idx))
                except ValueError as exc:
                    raise SchemaError(f"{ipath}: {exc}") from None
            per_sample[idx] = tuple(items)
        dataset.proposals[vid] = per_sample
    if "importance" in value:
        if not isinstance(value["importance"], list):
            raise SchemaError(f"{path}.importance: expected an array")
        scores = [_parse_number(p, f"{path}.importance[{i}]")
                  for i, p in enumerate(value["importance"])]
        bad = [p for p in scores if not 0.0 <= p <= 1.0]
        if bad:
            raise SchemaError(f"{path}.importance: scores must lie in [0, 1], got {bad}")
        dataset.importance[vid] = scores


def loads_dataset(text: str) -> Dataset:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _require(obj, {"schema_version", "videos"}, {"schema_version", "videos"}, "$")
    version = _parse_int(obj["schema_version"], "$.schema_version")
    if version > SCHEMA_VERSION:
        raise SchemaError(
            f"$.schema_version: file version {version} is newer than supported "
            f"version {SCHEMA_VERSION}")
    if version < 1:
        raise SchemaError(f"$.schema_version: invalid version {version}")
    if not isinstance(obj["videos"], list):
        raise SchemaError("$.videos: expected an array")
    dataset = Dataset()
    seen: set[str] = set()
    for i, video in enumerate(obj["videos"]):
        _parse_video(video, f"$.videos[{i}]", dataset, seen)
    return dataset


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return loads_dataset(path.read_text())


def load_annotations(path: str | Path) -> AnnotationSet:
    return load_dataset(path).annotations


def load_detections(path: str | Path) -> DetectionSet:
    return load_dataset(path).detections


# ---------------------------------------------------------------------------
# report output

def report_to_json_obj(report: EvalReport) -> dict:
    return {
        "v_map": {f"{d:g}": report.v_map[d] for d in report.v_map},
        "per_class_ap": {f"{d:g}": {str(c): ap for c, ap in per_class.items()}
                         for d, per_class in report.per_class_ap.items()},
        "frame_map": report.frame_map,
        "frame_map_delta": report.frame_map_delta,
        "v_mabo": report.v_mabo,
        "breakdown": {"tp": report.breakdown.tp,
                      "wrong_class": report.breakdown.wrong_class,
                      "bad_localization": report.breakdown.bad_localization,
                      "duplicate": report.breakdown.duplicate},
        "breakdown_delta": report.breakdown_delta,
    }


def dumps_report(report: EvalReport) -> str:
    obj = report_to_json_obj(report)
    return _fmt_json_block(obj)


def _fmt_json_block(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{pad}  {json.dumps(str(k))}: {_fmt_json_block(v, indent + 1)}'
                for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_fmt_json_block(v, indent) for v in obj) + "]"
    if obj is None:
        return "null"
    return _fmt(obj)


def report_to_csv(report: EvalReport) -> str:
    """Flat CSV view of an evaluation report (one metric per row)."""
    rows = ["metric,delta,class,value"]
    for d in report.v_map:
        rows.append(f"v_map,{d:g},,{report.v_map[d]:.17g}")
    for d, per_class in report.per_class_ap.items():
        for c, ap in per_class.items():
            value = "" if ap is None else f"{ap:.17g}"
            rows.append(f"class_ap,{d:g},{c},{value}")
    rows.append(f"frame_map,{report.frame_map_delta:g},,{report.frame_map:.17g}")
    rows.append(f"v_mabo,,,{report.v_mabo:.17g}")
    b = report.breakdown
    for name, value in (("tp", b.tp), ("wrong_class", b.wrong_class),
                        ("bad_localization", b.bad_localization),
                        ("duplicate", b.duplicate)):
        rows.append(f"breakdown_{name},{report.breakdown_delta:g},,{value}")
    return "\n".join(rows) + "\n"
