"""Annotation file ingestion and dataset statistics.

Reads grounding labels from CSV or JSON, validates every row, and summarizes
the corpus: counts, mean segment/video durations, segment-to-video ratio,
where segments sit in the video, and how segments and questions share each
other.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .metrics import GroundingLabel
from .svgplot import bar_chart, pie_chart
from .temporal import TemporalSegment, VideoExtent, iou

CSV_COLUMNS = ("question_id", "video_id", "duration_s", "answer_index", "segments")

POSITION_BINS = ("left", "middle", "right")

DEDUP_IOU = 0.5


class ParseError(ValueError):
    """File is structurally unreadable (bad header, bad JSON, bad number)."""


class ValidationError(ValueError):
    """A row parsed but violates a label constraint; carries the line number."""


class EmptyDataset(ValueError):
    """Stats requested over zero labels."""


@dataclass(frozen=True)
class DatasetStats:
    """Corpus-level summary of a grounding label set."""

    n_videos: int
    n_questions: int
    n_segments: int
    mean_seg_dur: float
    mean_vid_dur: float
    mean_ratio: float
    position_hist: dict[str, float]
    segs_per_qa_hist: dict[int, float]
    qas_per_seg_hist: dict[int, float]

    def __post_init__(self) -> None:
        for name, hist in (
            ("position_hist", self.position_hist),
            ("segs_per_qa_hist", self.segs_per_qa_hist),
            ("qas_per_seg_hist", self.qas_per_seg_hist),
        ):
            total = sum(hist.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name} sums to {total}, expected 1")
        if not 0.0 < self.mean_ratio <= 1.0:
            raise ValueError(f"mean_ratio {self.mean_ratio} outside (0, 1]")


# --- loading ----------------------------------------------------------------

def _parse_segments(cell: str | list, where: str) -> list[tuple[float, float]]:
    """Accepts 's:e;s:e' strings or [[s, e], ...] lists."""
    pairs: list[tuple[float, float]] = []
    if isinstance(cell, str):
        for chunk in cell.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            bits = chunk.split(":")
            if len(bits) != 2:
                raise ParseError(f"{where}: segment {chunk!r} is not 'start:end'")
            try:
                pairs.append((float(bits[0]), float(bits[1])))
            except ValueError as exc:
                raise ParseError(f"{where}: non-numeric segment {chunk!r}") from exc
    elif isinstance(cell, list):
        for item in cell:
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                raise ParseError(f"{where}: segment entry {item!r} is not a [start, end] pair")
            try:
                pairs.append((float(item[0]), float(item[1])))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{where}: non-numeric segment {item!r}") from exc
    else:
        raise ParseError(f"{where}: segments must be a string or list, got {type(cell).__name__}")
    if not pairs:
        raise ParseError(f"{where}: no segments")
    return pairs


def _build_label(row: Mapping[str, object], where: str) -> GroundingLabel:
    try:
        qid = str(row["question_id"])
        vid = str(row["video_id"])
        duration = float(row["duration_s"])  # type: ignore[arg-type]
        answer = int(row["answer_index"])  # type: ignore[arg-type]
    except KeyError as exc:
        raise ParseError(f"{where}: missing column {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from exc
    pairs = _parse_segments(row["segments"], where)
    try:
        segments = tuple(TemporalSegment(a, b) for a, b in pairs)
        return GroundingLabel(
            question_id=qid,
            video_id=vid,
            extent=VideoExtent(duration),
            segments=segments,
            answer_index=answer,
        )
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def load_labels(path: str | Path) -> dict[str, GroundingLabel]:
    """Load labels from a .csv or .json file, keyed by question id.

    Rows that parse but violate label constraints (segment outside the video,
    start >= end, negative start) raise ValidationError naming the line.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _load_json(path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    raise ParseError(f"{path}: unsupported extension (want .csv or .json)")


def _load_csv(path: Path) -> dict[str, GroundingLabel]:
    labels: dict[str, GroundingLabel] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        missing = set(CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ParseError(f"{path}: header missing columns {sorted(missing)}")
        for row in reader:
            where = f"{path.name}:{reader.line_num}"
            label = _build_label(row, where)
            if label.question_id in labels:
                raise ValidationError(f"{where}: duplicate question_id {label.question_id!r}")
            labels[label.question_id] = label
    if not labels:
        raise ParseError(f"{path}: no rows")
    return labels


def _load_json(path: Path) -> dict[str, GroundingLabel]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ParseError(f"{path}: expected a JSON array of rows")
    labels: dict[str, GroundingLabel] = {}
    for i, row in enumerate(raw):
        where = f"{path.name}:row {i}"
        if not isinstance(row, dict):
            raise ParseError(f"{where}: not an object")
        label = _build_label(row, where)
        if label.question_id in labels:
            raise ValidationError(f"{where}: duplicate question_id {label.question_id!r}")
        labels[label.question_id] = label
    if not labels:
        raise ParseError(f"{path}: no rows")
    return labels


def save_labels(path: str | Path, labels: Mapping[str, GroundingLabel]) -> None:
    """Write labels back out in the schema load_labels reads."""
    path = Path(path)

    def base(lab: GroundingLabel) -> dict:
        return {
            "question_id": lab.question_id,
            "video_id": lab.video_id,
            "duration_s": lab.extent.duration,
            "answer_index": lab.answer_index,
        }

    if path.suffix.lower() == ".json":
        rows = [
            base(lab) | {"segments": [[s.start, s.end] for s in lab.segments]}
            for lab in labels.values()
        ]
        path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    elif path.suffix.lower() == ".csv":
        rows = [
            base(lab) | {"segments": ";".join(f"{s.start!r}:{s.end!r}" for s in lab.segments)}
            for lab in labels.values()
        ]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS))
            writer.writeheader()
            writer.writerows(rows)
    else:
        raise ParseError(f"{path}: unsupported extension (want .csv or .json)")


# --- statistics ---------------------------------------------------------------

def _position_bin(seg: TemporalSegment, duration: float) -> str:
    mid = (seg.start + seg.end) / 2.0
    third = duration / 3.0
    if mid < third:
        return "left"
    if mid < 2.0 * third:
        return "middle"
    return "right"


def _dedup_segments(segs: list[TemporalSegment]) -> list[list[int]]:
    """Greedy IoU clustering; two segments with IoU > 0.5 count as the same.

    Returns clusters as index lists; first member is the representative.
    """
    clusters: list[list[int]] = []
    for i, seg in enumerate(segs):
        for cluster in clusters:
            if iou(seg, segs[cluster[0]]) > DEDUP_IOU:
                cluster.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def compute_stats(labels: Mapping[str, GroundingLabel]) -> DatasetStats:
    """Aggregate corpus statistics from a label set.

    Segment position is the third of the video containing the segment
    midpoint. The ratio statistic is per-segment (length / its video's
    duration) averaged over all segments. qas_per_seg deduplicates segments
    within a video via IoU > 0.5 and counts distinct QAs per deduped segment.
    """
    if not labels:
        raise EmptyDataset("no labels")

    videos: dict[str, float] = {}
    by_video: dict[str, list[tuple[str, TemporalSegment]]] = {}
    n_segments = 0
    seg_dur_sum = 0.0
    ratio_sum = 0.0
    pos_counts = dict.fromkeys(POSITION_BINS, 0)
    segs_per_qa: dict[int, int] = {}

    for lab in labels.values():
        videos[lab.video_id] = lab.extent.duration
        k = len(lab.segments)
        segs_per_qa[k] = segs_per_qa.get(k, 0) + 1
        for seg in lab.segments:
            n_segments += 1
            seg_dur_sum += seg.length
            ratio_sum += seg.length / lab.extent.duration
            pos_counts[_position_bin(seg, lab.extent.duration)] += 1
            by_video.setdefault(lab.video_id, []).append((lab.question_id, seg))

    qas_per_seg: dict[int, int] = {}
    for vid, entries in by_video.items():
        segs = [seg for _, seg in entries]
        for cluster in _dedup_segments(segs):
            qids = {entries[i][0] for i in cluster}
            qas_per_seg[len(qids)] = qas_per_seg.get(len(qids), 0) + 1
    n_dedup = sum(qas_per_seg.values())

    n_questions = len(labels)
    return DatasetStats(
        n_videos=len(videos),
        n_questions=n_questions,
        n_segments=n_segments,
        mean_seg_dur=seg_dur_sum / n_segments,
        mean_vid_dur=sum(videos.values()) / len(videos),
        mean_ratio=ratio_sum / n_segments,
        position_hist={b: pos_counts[b] / n_segments for b in POSITION_BINS},
        segs_per_qa_hist={k: v / n_questions for k, v in sorted(segs_per_qa.items())},
        qas_per_seg_hist={k: v / n_dedup for k, v in sorted(qas_per_seg.items())},
    )


def stats_to_dict(stats: DatasetStats) -> dict:
    return {
        "n_videos": stats.n_videos,
        "n_questions": stats.n_questions,
        "n_segments": stats.n_segments,
        "mean_seg_dur": stats.mean_seg_dur,
        "mean_vid_dur": stats.mean_vid_dur,
        "mean_ratio": stats.mean_ratio,
        "position_hist": dict(stats.position_hist),
        "segs_per_qa_hist": {str(k): v for k, v in stats.segs_per_qa_hist.items()},
        "qas_per_seg_hist": {str(k): v for k, v in stats.qas_per_seg_hist.items()},
    }


def write_stats_json(path: str | Path, stats: DatasetStats) -> None:
    Path(path).write_text(
        json.dumps(stats_to_dict(stats), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_stats_svgs(out_dir: str | Path, stats: DatasetStats) -> list[Path]:
    """Emit the three distribution panels as standalone SVG files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    panels = (
        ("positions.svg", pie_chart(stats.position_hist, "Segment position in video")),
        (
            "segs_per_qa.svg",
            bar_chart(
                {str(k): v for k, v in stats.segs_per_qa_hist.items()},
                "Segments per question",
                y_label="fraction of QAs",
            ),
        ),
        (
            "qas_per_seg.svg",
            bar_chart(
                {str(k): v for k, v in stats.qas_per_seg_hist.items()},
                "Questions per segment",
                y_label="fraction of segments",
            ),
        ),
    )
    for name, svg in panels:
        p = out / name
        p.write_text(svg, encoding="utf-8")
        files.append(p)
    return files
