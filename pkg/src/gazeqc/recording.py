"""Core data types shared by the parser and the report builders.

A :class:`Recording` is the unprocessed artifact of one session: header lines,
the sample stream, device-detected events, messages and recording blocks.
Samples are stored column-wise in a :class:`SampleTable` so that hour-long
recordings stay cheap to hold and to slice.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np


class Eye(str, enum.Enum):
    LEFT = 'left'
    RIGHT = 'right'

    @classmethod
    def from_token(cls, token: str) -> Eye:
        """Map ``L``/``R``/``LEFT``/``RIGHT`` (any case) to an :class:`Eye`."""
        t = token.strip().upper()
        if t in ('L', 'LEFT'):
            return cls.LEFT
        if t in ('R', 'RIGHT'):
            return cls.RIGHT
        raise ValueError(f'not an eye token: {token!r}')


class EventKind(str, enum.Enum):
    FIXATION = 'fixation'
    SACCADE = 'saccade'
    BLINK = 'blink'


class Stage(str, enum.Enum):
    """Where an event came from: the tracker itself or our fallback detector."""

    MANUFACTURER = 'manufacturer'
    FALLBACK = 'fallback'


class WindowSource(str, enum.Enum):
    MARKERS = 'markers'
    WHOLE_SESSION = 'whole_session'


@dataclass(frozen=True)
class ReportWarning:
    code: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        if self.line is None:
            return f'{self.code}: {self.message}'
        return f'line {self.line}: {self.code}: {self.message}'

    def to_dict(self) -> dict:
        return {'code': self.code, 'line': self.line, 'message': self.message}


class EyeChannel(NamedTuple):
    x_px: float | None
    y_px: float | None
    pupil: float | None


class GazeSample(NamedTuple):
    time_ms: float
    left: EyeChannel | None = None
    right: EyeChannel | None = None

    def channel(self, eye: Eye) -> EyeChannel | None:
        return self.left if eye is Eye.LEFT else self.right


@dataclass(frozen=True, slots=True)
class EyeEvent:
    """One fixation, saccade or blink for one eye.

    Only the payload fields that belong to ``kind`` are filled; the others
    stay ``None``. ``duration_ms`` is always ``end_ms - start_ms``.
    """

    kind: EventKind
    eye: Eye
    start_ms: float
    end_ms: float
    stage: Stage = Stage.MANUFACTURER
    # fixation payload
    x_px: float | None = None
    y_px: float | None = None
    pupil: float | None = None
    # saccade payload
    start_x_px: float | None = None
    start_y_px: float | None = None
    end_x_px: float | None = None
    end_y_px: float | None = None
    amplitude_deg: float | None = None
    peak_velocity_deg_s: float | None = None
    line: int | None = None

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms


@dataclass(frozen=True, slots=True)
class Message:
    time_ms: float
    text: str
    line: int | None = None


@dataclass(frozen=True)
class Declaration:
    """A parsed ``SAMPLES`` or ``EVENTS`` line."""

    kind: str
    eyes: tuple[Eye, ...]
    rate_hz: float | None
    tracking: str | None
    filter_level: int | None
    tokens: tuple[str, ...]
    line: int | None = None
    block_index: int | None = None


@dataclass(frozen=True)
class Block:
    start_ms: float
    end_ms: float
    eyes: tuple[Eye, ...] = ()
    line: int | None = None
    synthetic: bool = False

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class TrialWindow:
    """A time window analysed as one trial.

    ``end_inclusive`` is False when the window was closed by the next trial's
    start marker, so that the shared boundary tick belongs to one trial only.
    """

    trial_id: str
    start_ms: float
    end_ms: float
    source: WindowSource = WindowSource.MARKERS
    end_inclusive: bool = True

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    def contains(self, t):
        """Boolean membership for a scalar or an array of timestamps."""
        t = np.asarray(t)
        upper = t <= self.end_ms if self.end_inclusive else t < self.end_ms
        return (t >= self.start_ms) & upper

    def to_dict(self) -> dict:
        return {
            'start_ms': self.start_ms,
            'end_ms': self.end_ms,
            'end_inclusive': self.end_inclusive,
            'source': self.source.value,
        }


def _opt(value: float) -> float | None:
    return None if value != value else float(value)


@dataclass(eq=False)
class SampleTable:
    """Column store of gaze samples.

    Eye columns are ``None`` when no sample in the table carries that eye.
    Missing coordinates and missing pupil sizes are NaN.
    """

    time_ms: np.ndarray
    line: np.ndarray
    left: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    right: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    has_left: np.ndarray | None = None
    has_right: np.ndarray | None = None
    in_block: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.time_ms)
        if self.has_left is None:
            self.has_left = np.full(n, self.left is not None)
        if self.has_right is None:
            self.has_right = np.full(n, self.right is not None)
        if self.in_block is None:
            self.in_block = np.ones(n, dtype=bool)

    @classmethod
    def empty(cls) -> SampleTable:
        return cls(np.empty(0), np.empty(0, dtype=np.int64))

    @classmethod
    def from_arrays(cls, time_ms, x=None, y=None, pupil=None, eye: Eye = Eye.RIGHT) -> SampleTable:
        """Build a monocular table from plain arrays; handy in scripts and tests."""
        t = np.asarray(time_ms, dtype=float)
        n = len(t)
        cols = tuple(
            np.full(n, np.nan) if a is None else np.asarray(a, dtype=float).copy()
            for a in (x, y, pupil)
        )
        kw = {'left': cols} if eye is Eye.LEFT else {'right': cols}
        return cls(t, np.arange(n, dtype=np.int64), **kw)

    def __len__(self) -> int:
        return len(self.time_ms)

    def _channel(self, cols, present, i) -> EyeChannel | None:
        if cols is None or not present[i]:
            return None
        x, y, p = cols
        return EyeChannel(_opt(x[i]), _opt(y[i]), _opt(p[i]))

    def __getitem__(self, i: int) -> GazeSample:
        return GazeSample(
            float(self.time_ms[i]),
            self._channel(self.left, self.has_left, i),
            self._channel(self.right, self.has_right, i),
        )

    def __iter__(self) -> Iterator[GazeSample]:
        for i in range(len(self)):
            yield self[i]

    def eyes(self) -> tuple[Eye, ...]:
        out = []
        if self.left is not None and self.has_left.any():
            out.append(Eye.LEFT)
        if self.right is not None and self.has_right.any():
            out.append(Eye.RIGHT)
        return tuple(out)

    def xy(self, eye: Eye) -> tuple[np.ndarray, np.ndarray]:
        """Gaze coordinates for one eye, NaN where the eye was not recorded."""
        cols, present = (self.left, self.has_left) if eye is Eye.LEFT else (self.right, self.has_right)
        if cols is None:
            nan = np.full(len(self), np.nan)
            return nan, nan.copy()
        x = np.where(present, cols[0], np.nan)
        y = np.where(present, cols[1], np.nan)
        return x, y

    def valid(self, eye: Eye) -> np.ndarray:
        """Rows whose ``eye`` coordinates are both numeric."""
        x, y = self.xy(eye)
        return ~(np.isnan(x) | np.isnan(y))

    def take(self, index) -> SampleTable:
        """Row subset by integer index, boolean mask or slice."""
        def sub(cols):
            return None if cols is None else tuple(c[index] for c in cols)
        return SampleTable(
            self.time_ms[index], self.line[index], sub(self.left), sub(self.right),
            self.has_left[index], self.has_right[index], self.in_block[index],
        )

    def between(self, start_ms: float, end_ms: float, inclusive: bool = True) -> SampleTable:
        """Rows with ``start_ms <= t <= end_ms`` (``< end_ms`` if not inclusive).

        Assumes the table is sorted by time.
        """
        lo = np.searchsorted(self.time_ms, start_ms, side='left')
        hi = np.searchsorted(self.time_ms, end_ms, side='right' if inclusive else 'left')
        return self.take(slice(lo, hi))


@dataclass(eq=False)
class Recording:
    header: list[tuple[str, str]] = field(default_factory=list)
    metadata_lines: list[Declaration] = field(default_factory=list)
    blocks: list[Block] = field(default_factory=list)
    samples: SampleTable = field(default_factory=SampleTable.empty)
    events: list[EyeEvent] = field(default_factory=list)
    messages: list[Message] = field(default_factory=list)
    warnings: list[ReportWarning] = field(default_factory=list)
    source_path: str | None = None
    digest: str | None = None

    def events_of(self, kind: EventKind, eye: Eye | None = None) -> list[EyeEvent]:
        return [e for e in self.events if e.kind is kind and (eye is None or e.eye is eye)]

    def block_at(self, t: float) -> Block | None:
        for b in self.blocks:
            if b.start_ms <= t <= b.end_ms:
                return b
        return None
