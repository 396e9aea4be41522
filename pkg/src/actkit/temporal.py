"""Temporal localization: sliding windows, non-maximum suppression and
agglomerative segmentation over frame-level word count streams.

Windows are placed on a geometric schedule (size and stride grow by
sqrt(2) per level).  Window histograms are read from an integral
(cumulative) table of frame word counts so each window costs O(1)
regardless of its length.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

BASE_WINDOW = 30
BASE_STEP = 6
WINDOW_GROWTH = math.sqrt(2.0)
MAX_WINDOW = 1800
SEGMENT_SPAN = 60


@dataclass(frozen=True)
class Detection:
    """A scored window of one attribute in one video (inclusive frames)."""

    video: str
    attribute: str
    start: int
    end: int
    score: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("detection must end at or after its start")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Segment:
    """A scored stretch of frames produced by segmentation (inclusive)."""

    start: int
    end: int
    score: float = 0.0

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("segment must end at or after its start")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def window_schedule(base_size: int = BASE_WINDOW, base_step: int = BASE_STEP,
                    growth: float = WINDOW_GROWTH,
                    max_size: int = MAX_WINDOW) -> list:
    """Geometric ladder of (size, step) pairs.

    Level k has size round(base_size * growth^k) and step
    max(1, round(base_step * growth^k)), rounding halves up; levels stop
    once the size would exceed max_size.
    """
    if base_size < 1 or base_step < 1 or growth <= 1.0:
        raise ValueError("schedule needs positive sizes and growth > 1")
    out = []
    k = 0
    while True:
        size = _round_half_up(base_size * growth ** k)
        if size > max_size:
            break
        step = max(1, _round_half_up(base_step * growth ** k))
        out.append((size, step))
        k += 1
    return out


# ---------------------------------------------------------------------------
# integral word count tables

@dataclass
class IntegralHistogram:
    """Prefix sums of a (T, B) frame count stream.

    prefix has shape (T + 1, B) with prefix[0] = 0, so any window sum is
    one subtraction.
    """

    prefix: np.ndarray

    def __post_init__(self):
        self.prefix = np.asarray(self.prefix, dtype=float)
        if self.prefix.ndim != 2 or self.prefix.shape[0] < 1:
            raise ValueError("integral table must be (T + 1, B)")
        if np.any(self.prefix[0] != 0):
            raise ValueError("integral table must start at zero")

    @property
    def num_frames(self) -> int:
        return self.prefix.shape[0] - 1

    @property
    def num_bins(self) -> int:
        return self.prefix.shape[1]


def build_integral(counts) -> IntegralHistogram:
    """Cumulative table over per-frame word counts (T, B)."""
    C = np.asarray(counts, dtype=float)
    if C.ndim != 2:
        raise ValueError("counts must be (T, B)")
    prefix = np.zeros((C.shape[0] + 1, C.shape[1]))
    np.cumsum(C, axis=0, out=prefix[1:])
    return IntegralHistogram(prefix)


def window_counts(table: IntegralHistogram, start: int, end: int) -> np.ndarray:
    """Raw bin counts of the inclusive frame window [start, end]."""
    if not 0 <= start <= end < table.num_frames:
        raise ValueError(f"window [{start}, {end}] outside 0..{table.num_frames - 1}")
    return table.prefix[end + 1] - table.prefix[start]


def window_histogram(table: IntegralHistogram, start: int, end: int,
                     layout=None) -> np.ndarray:
    """Window counts normalized to unit L1 mass.

    With a block layout (as produced by a codebook set) each block is
    normalized on its own; otherwise the whole vector is.  Empty blocks
    stay zero.
    """
    raw = window_counts(table, start, end)
    out = raw.copy()
    blocks = [(s, e) for _, _, s, e in layout] if layout is not None \
        else [(0, raw.size)]
    for s, e in blocks:
        total = out[s:e].sum()
        if total > 0:
            out[s:e] /= total
    return out


def score_windows(table: IntegralHistogram, scorer, video: str = "",
                  attribute: str = "", schedule=None, layout=None) -> list:
    """Slide every schedule level over the stream and score each window.

    scorer maps a histogram vector to a float.  Windows are placed at
    offsets 0, step, 2*step, ... while offset + size <= T.  Returns
    Detection records in scan order.
    """
    sched = schedule if schedule is not None else window_schedule()
    T = table.num_frames
    out = []
    for size, step in sched:
        if size > T:
            continue
        for start in range(0, T - size + 1, step):
            hist = window_histogram(table, start, start + size - 1, layout)
            out.append(Detection(video, attribute, start, start + size - 1,
                                 float(scorer(hist))))
    return out


# ---------------------------------------------------------------------------
# non-maximum suppression

def _overlap(a: Detection, b: Detection) -> int:
    return min(a.end, b.end) - max(a.start, b.start) + 1


def _iou(a: Detection, b: Detection) -> float:
    inter = max(0, _overlap(a, b))
    union = a.length + b.length - inter
    return inter / union if union > 0 else 0.0


def nms(detections, overlap_threshold: float = 0.0,
        criterion: str = "overlap") -> list:
    """Greedy non-maximum suppression.

    Candidates are visited by descending score (ties: earlier start,
    then shorter window).  A candidate is dropped when its overlap with
    an already kept window exceeds the threshold; the default threshold
    of zero removes anything that overlaps a kept window at all.
    criterion "overlap" measures shared frames, "iou" the
    intersection-over-union ratio.
    """
    if criterion not in ("overlap", "iou"):
        raise ValueError(f"unknown suppression criterion {criterion!r}")
    order = sorted(detections,
                   key=lambda d: (-d.score, d.start, d.length))
    kept = []
    for cand in order:
        ok = True
        for k in kept:
            if criterion == "overlap":
                if _overlap(cand, k) > overlap_threshold:
                    ok = False
                    break
            else:
                if _iou(cand, k) > overlap_threshold:
                    ok = False
                    break
        if ok:
            kept.append(cand)
    return kept


# ---------------------------------------------------------------------------
# agglomerative segmentation

def uniform_intervals(num_frames: int, span: int = SEGMENT_SPAN) -> list:
    """Chop a stream into fixed spans; the trailing piece may be shorter."""
    if num_frames < 1 or span < 1:
        raise ValueError("need positive stream length and span")
    out = []
    for start in range(0, num_frames, span):
        out.append(Segment(start, min(start + span, num_frames) - 1))
    return out


def _cosine(u, v) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v) / (nu * nv)


def merge_adjacent(items, similarity, combine, threshold: float) -> list:
    """Greedy agglomeration of an ordered list.

    Repeatedly merges the adjacent pair with the highest similarity
    while that similarity is at or above the threshold, preferring the
    leftmost pair on ties.  combine(a, b) produces the merged item.
    The input list is left untouched.
    """
    out = list(items)
    while len(out) > 1:
        sims = [similarity(out[i], out[i + 1]) for i in range(len(out) - 1)]
        best = int(np.argmax(sims))
        if sims[best] < threshold:
            break
        out[best:best + 2] = [combine(out[best], out[best + 1])]
    return out


def segment_agglomerative(table: IntegralHistogram, threshold: float,
                          span: int = SEGMENT_SPAN, layout=None,
                          rescore=None) -> list:
    """Merge adjacent spans whose histograms agree.

    Starts from uniform spans and repeatedly merges the adjacent pair
    with the highest cosine similarity, while that similarity is at or
    above the threshold (leftmost pair on ties).  With a rescore
    callback each final segment is scored on its own histogram;
    without one scores stay zero.
    """
    segs = uniform_intervals(table.num_frames, span)

    def hist(seg):
        return window_histogram(table, seg.start, seg.end, layout)

    items = merge_adjacent(
        [(s, hist(s)) for s in segs],
        similarity=lambda a, b: _cosine(a[1], b[1]),
        combine=lambda a, b: (
            Segment(a[0].start, b[0].end),
            hist(Segment(a[0].start, b[0].end))),
        threshold=threshold)
    if rescore is not None:
        return [Segment(s.start, s.end, float(rescore(h))) for s, h in items]
    return [s for s, _ in items]


def pool_segment_scores(segment_scores, segment_lengths) -> float:
    """Length-weighted mean used as the fallback sequence score."""
    scores = np.asarray(segment_scores, dtype=float)
    lengths = np.asarray(segment_lengths, dtype=float)
    if scores.shape != lengths.shape or scores.size == 0:
        raise ValueError("need matching non-empty score and length arrays")
    return float((scores * lengths).sum() / lengths.sum())


def filter_background(segments, histograms, model, threshold: float = 0.0,
                      floor: float = -10.0):
    """Drop segments a background model scores above the threshold.

    model maps a histogram to a scalar background score.  Returns
    (kept segments, kept histograms, flagged segments).  If everything
    is flagged the caller still needs a pooled vector, so the first
    histogram's shape is reused for a floor vector and a warning is
    logged.
    """
    segments = list(segments)
    histograms = [np.asarray(h, dtype=float) for h in histograms]
    if len(segments) != len(histograms):
        raise ValueError("segments and histograms must align")
    kept, kept_h, flagged = [], [], []
    for seg, h in zip(segments, histograms):
        if float(model(h)) > threshold:
            flagged.append(seg)
        else:
            kept.append(seg)
            kept_h.append(h)
    if not kept and segments:
        log.warning("filter_background: every segment flagged as background")
        kept_h = [np.full_like(histograms[0], floor)]
    return kept, kept_h, flagged


# ---------------------------------------------------------------------------
# file formats

def save_detections_csv(detections, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "attribute", "start", "end", "score"])
        for d in detections:
            writer.writerow([d.video, d.attribute, d.start, d.end,
                             f"{d.score:.9g}"])


def load_detections_csv(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["video", "attribute", "start", "end", "score"]:
            raise ValueError(f"{path}: bad detection header")
        for rec in reader:
            if not rec:
                continue
            out.append(Detection(rec[0], rec[1], int(rec[2]), int(rec[3]),
                                 float(rec[4])))
    return out


def save_segments_jsonl(segments, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in segments:
            fh.write(json.dumps({"start": s.start, "end": s.end,
                                 "score": s.score}) + "\n")


def load_segments_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                out.append(Segment(int(rec["start"]), int(rec["end"]),
                                   float(rec.get("score", 0.0))))
            except KeyError as exc:
                raise ValueError(f"{path}:{ln}: missing field {exc}") from exc
    return out
