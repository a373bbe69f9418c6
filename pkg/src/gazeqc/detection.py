"""Fallback fixation detection for recordings without device events.

Dispersion-threshold identification (I-DT) works in screen pixels, so it
needs no viewing-distance or screen-size metadata. Every fixation it returns
is tagged ``Stage.FALLBACK``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from gazeqc.recording import EventKind, Eye, EyeEvent, SampleTable, Stage

_EPS = 1e-9


@dataclass(frozen=True)
class IdtParams:
    dispersion_threshold_px: float = 25.0
    min_duration_ms: float = 50.0

    def __post_init__(self):
        if not self.dispersion_threshold_px > 0:
            raise ValueError(f'dispersion_threshold_px must be > 0, got {self.dispersion_threshold_px}')
        if not self.min_duration_ms > 0:
            raise ValueError(f'min_duration_ms must be > 0, got {self.min_duration_ms}')

    def to_dict(self) -> dict:
        return {'algorithm': 'idt', **asdict(self)}


def _pick_eye(samples: SampleTable, eye: Eye | None) -> Eye | None:
    if eye is not None:
        return eye
    eyes = samples.eyes()
    return eyes[0] if eyes else None


def detect_fixations_idt(
        samples: SampleTable,
        params: IdtParams = IdtParams(),
        eye: Eye | None = None,
) -> list[EyeEvent]:
    """Dispersion-threshold fixation detection on one eye.

    A candidate window starts at the first valid sample and spans at least
    ``min_duration_ms``. If its dispersion ``(max x - min x) + (max y - min y)``
    is within the threshold it is grown sample by sample until the next
    sample would exceed it; the window then becomes one fixation located at
    the centroid of its samples. Otherwise the window start moves on by one
    sample. Windows never contain a missing sample.

    Parameters
    ----------
    samples : SampleTable
        Samples sorted by time.
    params : IdtParams
    eye : Eye, optional
        Defaults to the table's first recorded eye.

    Returns
    -------
    list[EyeEvent]
        Fixations in time order.
    """
    eye = _pick_eye(samples, eye)
    if eye is None or not len(samples):
        return []
    t = samples.time_ms
    x, y = samples.xy(eye)
    cols = samples.left if eye is Eye.LEFT else samples.right
    pupil = cols[2] if cols is not None else np.full(len(t), np.nan)
    ok = ~(np.isnan(x) | np.isnan(y))
    n = len(t)
    if not ok.any():
        return []

    # limit[i]: exclusive end of the unbroken stretch starting at i; a stretch
    # ends at a missing sample or at a time gap wider than two sample periods
    stops = np.flatnonzero(~ok)
    if n > 1:
        dt = np.diff(t)
        gaps = np.flatnonzero(dt > 2.0 * np.median(dt)) + 1
        stops = np.union1d(stops, gaps)
    limit = np.full(n, n, dtype=np.int64)
    if len(stops):
        pos = np.searchsorted(stops, np.arange(n), side='right')
        has = pos < len(stops)
        limit[has] = stops[pos[has]]

    thr = params.dispersion_threshold_px + _EPS
    min_dur = params.min_duration_ms
    ends = np.searchsorted(t, t + min_dur - _EPS, side='left')
    fixations = []
    i = 0
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = int(ends[i])
        if j >= n:
            break
        if limit[i] <= j:
            i = int(limit[i])
            continue
        wx, wy = x[i:j + 1], y[i:j + 1]
        x0, x1, y0, y1 = wx.min(), wx.max(), wy.min(), wy.max()
        if (x1 - x0) + (y1 - y0) > thr:
            i += 1
            continue
        k = j + 1
        end = int(limit[i])
        step = 64
        while k < end:
            stop = min(k + step, end)
            cx0 = np.minimum.accumulate(np.minimum(x[k:stop], x0))
            cx1 = np.maximum.accumulate(np.maximum(x[k:stop], x1))
            cy0 = np.minimum.accumulate(np.minimum(y[k:stop], y0))
            cy1 = np.maximum.accumulate(np.maximum(y[k:stop], y1))
            over = np.flatnonzero((cx1 - cx0) + (cy1 - cy0) > thr)
            if len(over):
                k += int(over[0])
                break
            x0, x1, y0, y1 = cx0[-1], cx1[-1], cy0[-1], cy1[-1]
            k = stop
            step *= 2
        members = slice(i, k)
        p = pupil[members]
        p = p[~np.isnan(p)]
        fixations.append(EyeEvent(
            EventKind.FIXATION, eye, float(t[i]), float(t[k - 1]), Stage.FALLBACK,
            x_px=float(np.mean(x[members])),
            y_px=float(np.mean(y[members])),
            pupil=float(np.mean(p)) if len(p) else None,
        ))
        i = k
    return fixations
