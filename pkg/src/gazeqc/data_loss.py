"""Data loss per trial window: total, blink-caused and unexplained.

Expected samples are counted on a tick grid anchored at the window start with
one tick per sample period. A closed window of ``N`` periods holds ``N + 1``
ticks. Blink loss is counted on the same grid, so a blink costs the same
whether the device wrote missing-coordinate lines or no lines at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from gazeqc.errors import EmptyWindow, ZeroRate
from gazeqc.recording import Block, EventKind, Eye, EyeEvent, ReportWarning, SampleTable, TrialWindow

_EPS = 1e-9


@dataclass(frozen=True)
class BlinkStat:
    eye: Eye | None
    start_ms: float
    end_ms: float
    num_samples: int

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    def to_dict(self) -> dict:
        return {
            'eye': None if self.eye is None else self.eye.value,
            'start_ms': self.start_ms,
            'end_ms': self.end_ms,
            'duration_ms': self.duration_ms,
            'num_samples': self.num_samples,
        }


@dataclass(frozen=True)
class DataLossReport:
    window: TrialWindow
    eye: Eye | None
    sampling_rate_hz: float
    expected_samples: int
    recorded_samples: int
    valid_samples: int
    blink_samples: int
    loss_ratio_total: float
    loss_ratio_blink: float
    loss_ratio_unknown: float
    blink_count: int
    blink_ratio: float
    blinks: list[BlinkStat] = field(default_factory=list)
    warnings: list[ReportWarning] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'eye': None if self.eye is None else self.eye.value,
            'stage': 'raw_samples',
            'sampling_rate_hz': self.sampling_rate_hz,
            'expected_samples': self.expected_samples,
            'recorded_samples': self.recorded_samples,
            'valid_samples': self.valid_samples,
            'blink_samples': self.blink_samples,
            'loss_ratio_total': self.loss_ratio_total,
            'loss_ratio_blink': self.loss_ratio_blink,
            'loss_ratio_unknown': self.loss_ratio_unknown,
            'blink_count': self.blink_count,
            'blink_ratio': self.blink_ratio,
            'blinks': [b.to_dict() for b in self.blinks],
        }


class _Grid:
    """Tick indices ``0..n-1`` at ``start + k * 1000 / rate``."""

    def __init__(self, window: TrialWindow, rate_hz: float):
        self.start = window.start_ms
        self.rate = rate_hz
        span = (window.end_ms - window.start_ms) * rate_hz / 1000.0
        if window.end_inclusive:
            self.n = math.floor(span + _EPS) + 1
        else:
            self.n = max(math.ceil(span - _EPS), 0)

    def index_range(self, t0: float, t1: float) -> tuple[int, int] | None:
        """Tick indices inside the closed interval ``[t0, t1]`` (clipped to the grid)."""
        a = math.ceil((t0 - self.start) * self.rate / 1000.0 - _EPS)
        b = math.floor((t1 - self.start) * self.rate / 1000.0 + _EPS)
        a, b = max(a, 0), min(b, self.n - 1)
        return (a, b) if a <= b else None

    def times(self) -> np.ndarray:
        return self.start + np.arange(self.n) * (1000.0 / self.rate)


def _merge(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _ranges_count(ranges: list[tuple[int, int]]) -> int:
    return sum(b - a + 1 for a, b in ranges)


def _intersect(r1: list[tuple[int, int]], r2: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    i = j = 0
    while i < len(r1) and j < len(r2):
        a, b = max(r1[i][0], r2[j][0]), min(r1[i][1], r2[j][1])
        if a <= b:
            out.append((a, b))
        if r1[i][1] < r2[j][1]:
            i += 1
        else:
            j += 1
    return out


def _blink_intervals(blinks, eye: Eye | None) -> list[tuple[float, float, Eye | None]]:
    out = []
    for b in blinks:
        if isinstance(b, EyeEvent):
            if b.kind is not EventKind.BLINK or (eye is not None and b.eye is not eye):
                continue
            out.append((b.start_ms, b.end_ms, b.eye))
        else:
            out.append((float(b[0]), float(b[1]), eye))
    return out


def _pick_eye(samples: SampleTable, eye: Eye | None) -> Eye:
    if eye is not None:
        return eye
    eyes = samples.eyes()
    if len(eyes) != 1:
        raise ValueError('samples carry both eyes (or none); pass eye= explicitly')
    return eyes[0]


def compute_data_loss(
        samples: SampleTable,
        blinks,
        window: TrialWindow,
        rate_hz: float | None,
        eye: Eye | None = None,
        blocks: list[Block] | None = None,
) -> DataLossReport:
    """Decompose data loss in ``window`` into blink-caused and unknown parts.

    Parameters
    ----------
    samples : SampleTable
        Samples sorted by time; rows outside the window are ignored.
    blinks : iterable
        Blink :class:`EyeEvent` objects (other kinds and other eyes are
        skipped) or plain ``(start_ms, end_ms)`` pairs.
    window : TrialWindow
    rate_hz : float
        Sampling rate defining the expected tick grid.
    eye : Eye, optional
        Eye whose coordinates decide validity. Required for binocular tables.
    blocks : list of Block, optional
        When given, only ticks inside a recording block are expected, and
        samples flagged as outside any block do not count as valid.

    Raises
    ------
    ZeroRate
        If ``rate_hz`` is missing or not positive.
    EmptyWindow
        If the window does not have positive duration.
    """
    if rate_hz is None or not rate_hz > 0:
        raise ZeroRate(f'sampling rate {rate_hz!r} is not usable')
    if not window.end_ms > window.start_ms:
        raise EmptyWindow(f'window {window.trial_id!r} has no duration')
    eye = _pick_eye(samples, eye)
    warnings: list[ReportWarning] = []
    grid = _Grid(window, rate_hz)

    full = [(0, grid.n - 1)] if grid.n else []
    if blocks is not None:
        block_ranges = []
        for b in sorted(blocks, key=lambda b: b.start_ms):
            r = grid.index_range(b.start_ms, b.end_ms)
            if r is not None:
                block_ranges.append(r)
        expected_ranges = _intersect(full, _merge(block_ranges)) if block_ranges else []
        expected_ranges = [(int(a), int(b)) for a, b in _merge(expected_ranges)]
    else:
        expected_ranges = full
    expected = _ranges_count(expected_ranges)
    if expected < 1:
        raise EmptyWindow(f'window {window.trial_id!r} contains no expected sample')

    sub = samples.between(window.start_ms, window.end_ms, window.end_inclusive)
    present = sub.has_left if eye is Eye.LEFT else sub.has_right
    if blocks is not None:
        present = present & sub.in_block
    recorded = int(present.sum())
    valid = int((sub.valid(eye) & present).sum())

    raw = [(max(a, window.start_ms), min(b, window.end_ms), e)
           for a, b, e in _blink_intervals(blinks, eye)
           if b >= window.start_ms and a <= window.end_ms]
    raw.sort(key=lambda r: (r[0], r[1]))
    stats = []
    for a, b, e in raw:
        r = grid.index_range(a, b)
        n = _ranges_count(_intersect([r], expected_ranges)) if r else 0
        stats.append(BlinkStat(e, a, b, n))
    merged_ranges = []
    for a, b in _merge((a, b) for a, b, _ in raw):
        r = grid.index_range(a, b)
        if r is not None:
            merged_ranges.append(r)
    blink_ticks = _ranges_count(_intersect(_merge(merged_ranges), expected_ranges))

    if valid > expected:
        warnings.append(ReportWarning(
            'duplicate_samples',
            f'{valid} valid samples exceed {expected} expected in trial {window.trial_id!r}'))
    # integer numerators keep exact zeros exact
    lost = min(max(expected - valid, 0), expected)
    total = lost / expected
    blink = blink_ticks / expected
    unknown = (lost - blink_ticks) / expected
    if lost < blink_ticks:
        warnings.append(ReportWarning(
            'blink_overlaps_valid_samples',
            f'blink intervals cover valid samples in trial {window.trial_id!r}; unknown loss floored at 0'))
    unknown = max(0.0, unknown)
    minutes = window.duration_ms / 60000.0

    return DataLossReport(
        window=window,
        eye=eye,
        sampling_rate_hz=float(rate_hz),
        expected_samples=expected,
        recorded_samples=recorded,
        valid_samples=valid,
        blink_samples=blink_ticks,
        loss_ratio_total=total,
        loss_ratio_blink=blink,
        loss_ratio_unknown=unknown,
        blink_count=len(stats),
        blink_ratio=len(stats) / minutes,
        blinks=stats,
        warnings=warnings,
    )


def detect_gaps(
        samples: SampleTable,
        window: TrialWindow,
        rate_hz: float | None,
        min_gap_ms: float,
        eye: Eye | None = None,
) -> list[tuple[float, float, int]]:
    """Runs of expected ticks with no sample line nearby.

    A tick is missing when no sample lies within half a period of it. With
    ``eye`` given, only samples with valid coordinates for that eye count.
    Returns ``(first_tick_ms, last_tick_ms, num_missing)`` for every maximal
    run lasting at least ``min_gap_ms`` (``num_missing`` periods).
    """
    if rate_hz is None or not rate_hz > 0:
        raise ZeroRate(f'sampling rate {rate_hz!r} is not usable')
    if not window.end_ms > window.start_ms:
        raise EmptyWindow(f'window {window.trial_id!r} has no duration')
    period = 1000.0 / rate_hz
    if min_gap_ms < period - _EPS:
        raise ValueError(f'min_gap_ms={min_gap_ms} is shorter than one sample period ({period} ms)')

    grid = _Grid(window, rate_hz)
    ticks = grid.times()
    half = period / 2.0
    sub = samples.between(window.start_ms - half, window.end_ms + half)
    t = sub.time_ms
    if eye is not None:
        t = t[sub.valid(eye)]
    if len(t):
        i = np.searchsorted(t, ticks)
        left = np.abs(ticks - t[np.clip(i - 1, 0, len(t) - 1)])
        right = np.abs(t[np.clip(i, 0, len(t) - 1)] - ticks)
        covered = np.minimum(left, right) <= half + _EPS
    else:
        covered = np.zeros(len(ticks), dtype=bool)

    missing = np.flatnonzero(~covered)
    if not len(missing):
        return []
    breaks = np.flatnonzero(np.diff(missing) > 1)
    starts = np.concatenate(([missing[0]], missing[breaks + 1]))
    ends = np.concatenate((missing[breaks], [missing[-1]]))
    gaps = []
    for a, b in zip(starts, ends):
        n = int(b - a + 1)
        if n * period >= min_gap_ms - _EPS:
            gaps.append((float(ticks[a]), float(ticks[b]), n))
    return gaps
