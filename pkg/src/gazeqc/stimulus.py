"""Stimulus-dependent reading metrics from word AOIs.

Fixations are mapped to words by containment of their centroid in the word's
closed bounding box. No snapping to the nearest word: a fixation that misses
all words is a background fixation, which is exactly what these metrics need
to expose.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from gazeqc.errors import (
    DegenerateBox,
    EmptyLayout,
    EmptyWindow,
    MalformedRow,
    MissingHeader,
    OverlappingBoxes,
)
from gazeqc.recording import EyeEvent, ReportWarning, Stage, TrialWindow

AOI_COLUMNS = ('word_index', 'line_index', 'text', 'x_min', 'y_min', 'x_max', 'y_max')
BACKGROUND = None


@dataclass(frozen=True)
class AoiWord:
    word_index: int
    line_index: int
    text: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True, eq=False)
class StimulusLayout:
    stimulus_id: str
    words: tuple[AoiWord, ...]
    source: str | None = None

    def __post_init__(self):
        words = tuple(sorted(self.words, key=lambda w: w.word_index))
        object.__setattr__(self, 'words', words)
        seen = set()
        for w in words:
            if w.word_index in seen:
                raise MalformedRow(0, f'duplicate word_index {w.word_index}')
            seen.add(w.word_index)
            if not (w.x_min < w.x_max and w.y_min < w.y_max):
                raise DegenerateBox(w.word_index)
        _check_overlaps(words)
        boxes = np.array([[w.x_min, w.y_min, w.x_max, w.y_max] for w in words], dtype=float).reshape(-1, 4)
        object.__setattr__(self, '_boxes', boxes)
        object.__setattr__(self, '_by_index', {w.word_index: w for w in words})

    @property
    def line_count(self) -> int:
        return 1 + max(w.line_index for w in self.words) if self.words else 0

    def __len__(self) -> int:
        return len(self.words)

    def word(self, word_index: int) -> AoiWord:
        return self._by_index[word_index]

    def assign_points(self, x, y) -> np.ndarray:
        """Word index for each point, ``-1`` for background.

        Vectorised containment over all boxes; ties on shared edges go to the
        lowest word index because words are stored in index order.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.full(len(x), -1, dtype=np.int64)
        if not len(self.words):
            return out
        b = self._boxes
        index = np.array([w.word_index for w in self.words])
        for lo in range(0, len(x), 4096):
            px, py = x[lo:lo + 4096, None], y[lo:lo + 4096, None]
            inside = (b[:, 0] <= px) & (px <= b[:, 2]) & (b[:, 1] <= py) & (py <= b[:, 3])
            hit = inside.any(axis=1)
            first = inside.argmax(axis=1)
            out[lo:lo + 4096] = np.where(hit, index[first], -1)
        return out


def _check_overlaps(words: Sequence[AoiWord]) -> None:
    # sweep over x: only boxes whose x-ranges intersect can overlap
    order = sorted(words, key=lambda w: (w.x_min, w.word_index))
    active: list[AoiWord] = []
    for w in order:
        active = [a for a in active if a.x_max > w.x_min]
        for a in active:
            if min(a.y_max, w.y_max) > max(a.y_min, w.y_min):
                pair = tuple(sorted((a.word_index, w.word_index)))
                raise OverlappingBoxes(pair)
        active.append(w)


def load_aoi_csv(text: str, stimulus_id: str = 'stimulus', source: str | None = None) -> StimulusLayout:
    """Parse an AOI table with header ``word_index,line_index,text,x_min,y_min,x_max,y_max``.

    Raises
    ------
    MissingHeader
        If the first row is not exactly the expected header.
    MalformedRow
        If a row has the wrong number of fields or a non-numeric value.
    DegenerateBox
        If a box has ``x_min >= x_max`` or ``y_min >= y_max``.
    OverlappingBoxes
        If two boxes share interior area.
    """
    text = text.lstrip('﻿')
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != AOI_COLUMNS:
        raise MissingHeader(f'expected header {",".join(AOI_COLUMNS)}')
    words = []
    for row in reader:
        line_no = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(AOI_COLUMNS):
            raise MalformedRow(line_no, f'expected {len(AOI_COLUMNS)} fields, got {len(row)}')
        try:
            words.append(AoiWord(
                int(row[0]), int(row[1]), row[2],
                float(row[3]), float(row[4]), float(row[5]), float(row[6]),
            ))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        if words[-1].word_index < 0 or words[-1].line_index < 0:
            raise MalformedRow(line_no, 'indices must be non-negative')
    return StimulusLayout(stimulus_id, tuple(words), source)


def read_aoi_csv(path: str | Path, stimulus_id: str | None = None) -> StimulusLayout:
    path = Path(path)
    return load_aoi_csv(path.read_text(encoding='utf-8'), stimulus_id or path.stem, source=str(path))


@dataclass(frozen=True)
class FixationAssignment:
    fixation: EyeEvent
    word_index: int | None  # None means background

    @property
    def is_background(self) -> bool:
        return self.word_index is None


def assign_fixation(fix: EyeEvent, layout: StimulusLayout) -> FixationAssignment:
    """Map one fixation centroid to the word box containing it, or to background."""
    if fix.x_px is None or fix.y_px is None:
        return FixationAssignment(fix, BACKGROUND)
    idx = int(layout.assign_points(fix.x_px, fix.y_px)[0])
    return FixationAssignment(fix, None if idx < 0 else idx)


def assign_fixations(fixations: Sequence[EyeEvent], layout: StimulusLayout) -> list[FixationAssignment]:
    if not fixations:
        return []
    x = [np.nan if f.x_px is None else f.x_px for f in fixations]
    y = [np.nan if f.y_px is None else f.y_px for f in fixations]
    idx = layout.assign_points(x, y)
    return [FixationAssignment(f, None if i < 0 else int(i)) for f, i in zip(fixations, idx)]


def word_skip_rate(assignments: Sequence[FixationAssignment], layout: StimulusLayout) -> float:
    """Fraction of the layout's words that received no fixation in the trial."""
    if not len(layout):
        raise EmptyLayout('layout has no words')
    fixated = {a.word_index for a in assignments if a.word_index is not None}
    skipped = sum(1 for w in layout.words if w.word_index not in fixated)
    return skipped / len(layout)


def background_dwell(
        fixations: Sequence[EyeEvent],
        assignments: Sequence[FixationAssignment],
        warnings: list | None = None,
) -> tuple[float, float]:
    """Total background fixation time and its share of all fixation time."""
    total = sum(f.duration_ms for f in fixations)
    background = sum(a.fixation.duration_ms for a in assignments if a.word_index is None)
    if not fixations or total <= 0:
        if warnings is not None:
            warnings.append(ReportWarning('no_fixations', 'no fixation time; background dwell ratio set to 0'))
        return float(background), 0.0
    return float(background), background / total


def multi_line_jump_ratio(line_sequence: Sequence[int]) -> float | None:
    """Share of line changes that skip at least one line.

    ``line_sequence`` holds the line index of each word-assigned fixation in
    time order. Returns ``None`` when the sequence never changes line.
    """
    changes = [abs(b - a) for a, b in zip(line_sequence, line_sequence[1:]) if b != a]
    if not changes:
        return None
    return sum(1 for d in changes if d >= 2) / len(changes)


def line_sequence(assignments: Sequence[FixationAssignment], layout: StimulusLayout) -> list[int]:
    ordered = sorted((a for a in assignments if a.word_index is not None),
                     key=lambda a: (a.fixation.start_ms, a.fixation.end_ms))
    return [layout.word(a.word_index).line_index for a in ordered]


def word_length_effect(assignments: Sequence[FixationAssignment], layout: StimulusLayout) -> float | None:
    """Spearman correlation of word length with total fixation time per fixated word.

    Undefined (``None``) with fewer than three fixated words or when either
    variable is constant.
    """
    dwell: dict[int, float] = {}
    for a in assignments:
        if a.word_index is not None:
            dwell[a.word_index] = dwell.get(a.word_index, 0.0) + a.fixation.duration_ms
    if len(dwell) < 3:
        return None
    keys = sorted(dwell)
    lengths = np.array([len(layout.word(k).text) for k in keys], dtype=float)
    durations = np.array([dwell[k] for k in keys])
    if np.ptp(lengths) == 0 or np.ptp(durations) == 0:
        return None
    rho = stats.spearmanr(lengths, durations).statistic
    return float(np.clip(rho, -1.0, 1.0))


def reading_speed(layout: StimulusLayout, window: TrialWindow) -> float:
    """Words per minute: layout size over trial duration."""
    if not window.duration_ms > 0:
        raise EmptyWindow(f'window {window.trial_id!r} has no duration')
    return len(layout) / (window.duration_ms / 60000.0)


@dataclass(frozen=True)
class StimulusMetricsReport:
    stimulus_id: str
    fixation_stage: Stage
    num_fixations: int
    word_skip_rate: float
    background_dwell_ms: float
    background_dwell_ratio: float
    multi_line_jump_ratio: float | None
    word_length_duration_corr: float | None
    reading_speed_wpm: float | None
    warnings: list[ReportWarning] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'stimulus_id': self.stimulus_id,
            'stage': f'events:{self.fixation_stage.value}',
            'fixation_stage': self.fixation_stage.value,
            'num_fixations': self.num_fixations,
            'word_skip_rate': self.word_skip_rate,
            'background_dwell_ms': self.background_dwell_ms,
            'background_dwell_ratio': self.background_dwell_ratio,
            'multi_line_jump_ratio': self.multi_line_jump_ratio,
            'word_length_duration_corr': self.word_length_duration_corr,
            'reading_speed_wpm': self.reading_speed_wpm,
        }


def compute_stimulus_metrics(
        fixations: Sequence[EyeEvent],
        layout: StimulusLayout,
        window: TrialWindow,
        stage: Stage = Stage.MANUFACTURER,
) -> StimulusMetricsReport:
    """All stimulus metrics for one trial's fixations."""
    warnings: list[ReportWarning] = []
    fixations = sorted(fixations, key=lambda f: (f.start_ms, f.end_ms))
    assignments = assign_fixations(fixations, layout)
    bg_ms, bg_ratio = background_dwell(fixations, assignments, warnings)
    try:
        wpm = reading_speed(layout, window)
    except EmptyWindow:
        wpm = None
    return StimulusMetricsReport(
        stimulus_id=layout.stimulus_id,
        fixation_stage=stage,
        num_fixations=len(fixations),
        word_skip_rate=word_skip_rate(assignments, layout),
        background_dwell_ms=bg_ms,
        background_dwell_ratio=bg_ratio,
        multi_line_jump_ratio=multi_line_jump_ratio(line_sequence(assignments, layout)),
        word_length_duration_corr=word_length_effect(assignments, layout),
        reading_speed_wpm=wpm,
        warnings=warnings,
    )
