"""EyeLink ASC parsing.

The parser is tolerant: any line it cannot use produces exactly one
:class:`~gazeqc.recording.ReportWarning` and is skipped, so a single odd line
never costs the whole file. Sample lines are tokenised in one pass and
converted to floats in bulk, which keeps hour-long 1000 Hz recordings within
a few seconds.

Public API:
- parse_asc, read_asc
- parse_sample_line
- parse_validation_message, parse_calibration_message
- segment_trials
"""
from __future__ import annotations

__all__ = [
    'CalibrationRecord',
    'ValidationRecord',
    'parse_asc',
    'parse_calibration_message',
    'parse_sample_line',
    'parse_validation_message',
    'read_asc',
    'segment_trials',
]

import gc
import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gazeqc.errors import EmptyInput, MalformedSample, MalformedValidation, NoRecordingBlock
from gazeqc.recording import (
    Block,
    Declaration,
    EventKind,
    Eye,
    EyeChannel,
    EyeEvent,
    GazeSample,
    Message,
    Recording,
    ReportWarning,
    SampleTable,
    TrialWindow,
    WindowSource,
)

MISSING = '.'
_DIGITS = frozenset('0123456789')
_NON_SAMPLE = re.compile(r'\n(?![0-9])')
_CHUNK_CHARS = 1 << 16  # small chunks stay cache resident

# Recognised EyeLink lines that carry nothing any report needs.
_IGNORED_KEYWORDS = frozenset({'PRESCALER', 'VPRESCALER', 'PUPIL', 'INPUT', 'BUTTON'})
_EVENT_STARTS = {'SFIX': EventKind.FIXATION, 'SSACC': EventKind.SACCADE, 'SBLINK': EventKind.BLINK}

# Codes for warnings that stand for exactly one rejected input line.
LINE_REJECT_CODES = frozenset({
    'unknown_line', 'malformed_sample', 'duplicate_sample', 'non_monotonic_sample',
    'malformed_event', 'malformed_message', 'malformed_block', 'malformed_declaration',
    'end_without_start',
})


def _num(token: str) -> float | None:
    """Decimal value of a field, ``None`` for the missing marker or junk."""
    if token == MISSING:
        return None
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _eyes_in(tokens) -> tuple[Eye, ...]:
    eyes = []
    if 'LEFT' in tokens:
        eyes.append(Eye.LEFT)
    if 'RIGHT' in tokens:
        eyes.append(Eye.RIGHT)
    return tuple(eyes)


def _fields_needed(layout: tuple[Eye, ...]) -> int:
    return 1 + 3 * len(layout)


def parse_sample_line(line: str, layout: tuple[Eye, ...]) -> GazeSample:
    """Parse one sample line for the given eye layout.

    ``layout`` lists the recorded eyes in file column order, e.g.
    ``(Eye.RIGHT,)`` or ``(Eye.LEFT, Eye.RIGHT)``. Fields after the pupil
    columns are ignored.

    Raises
    ------
    MalformedSample
        If the timestamp does not parse or the line has too few fields.
    """
    parts = line.split()
    if not layout:
        raise MalformedSample('layout declares no eye')
    if len(parts) < _fields_needed(layout):
        raise MalformedSample(f'expected {_fields_needed(layout)} fields, got {len(parts)}')
    t = _num(parts[0])
    if t is None:
        raise MalformedSample(f'bad timestamp {parts[0]!r}')
    channels = {}
    for k, eye in enumerate(layout):
        x, y, p = (_num(v) for v in parts[1 + 3 * k: 4 + 3 * k])
        if x is None or y is None:
            x = y = None
        if p == 0.0:
            p = None
        channels[eye] = EyeChannel(x, y, p)
    return GazeSample(t, channels.get(Eye.LEFT), channels.get(Eye.RIGHT))


def _to_float(tokens: list[str]) -> np.ndarray:
    n = len(tokens)
    if MISSING not in tokens:
        try:
            return np.fromiter(map(float, tokens), dtype=float, count=n)
        except ValueError:
            pass
    # usually only a few missing markers: patch them found by C-level scans
    tokens = list(tokens)
    i = -1
    try:
        while True:
            i = tokens.index(MISSING, i + 1)
            tokens[i] = 'nan'
    except ValueError:
        pass
    try:
        return np.fromiter(map(float, tokens), dtype=float, count=n)
    except ValueError:
        out = np.empty(n)
        for i, v in enumerate(tokens):
            f = _num(v)
            out[i] = math.nan if f is None else f
        return out


class _SampleBuffer:
    """Collects runs of sample lines and converts them chunk by chunk.

    A run is a substring of the file holding consecutive sample lines. Each
    chunk is tokenised in one ``split`` after newlines are swapped for a
    sentinel token; the sentinel positions prove every line has the same field
    count, in which case columns are plain list slices. Ragged chunks fall
    back to per-line splits.
    """

    _SEP = '\x01'

    def __init__(self, warn):
        self.pieces: list[str] = []
        self.spans: list[tuple[int, int]] = []  # (first line number, line count)
        self.size = 0
        self.layout: tuple[Eye, ...] = ()
        self.chunks: list[tuple[tuple[Eye, ...], np.ndarray, np.ndarray, dict]] = []
        self.warn = warn

    def set_layout(self, layout):
        if layout != self.layout:
            self.flush()
            self.layout = layout

    def add(self, run: str, first_lineno: int) -> int:
        """Append a run of sample lines; returns its line count."""
        total = 0
        i = 0
        while len(run) - i > _CHUNK_CHARS:
            cut = run.find('\n', i + _CHUNK_CHARS)
            if cut < 0:
                break
            total += self._push(run[i:cut], first_lineno + total)
            i = cut + 1
        total += self._push(run[i:] if i else run, first_lineno + total)
        return total

    def _push(self, piece: str, lineno: int) -> int:
        k = piece.count('\n') + 1
        self.pieces.append(piece)
        self.spans.append((lineno, k))
        self.size += len(piece)
        if self.size >= _CHUNK_CHARS:
            self.flush()
        return k

    def _columns(self, text: str, n: int, lines: np.ndarray):
        need = _fields_needed(self.layout)
        sep = self._SEP
        if sep not in text:
            flat = text.replace('\n', f' {sep} ').split()
            width = len(flat) // n
            if (width >= need and len(flat) == n * (width + 1) - 1
                    and flat[width::width + 1].count(sep) == n - 1):
                return [flat[j::width + 1] for j in range(need)], lines
        rows, kept = [], []
        for i, line in enumerate(text.split('\n')):
            parts = line.split()
            if len(parts) < need:
                self.warn(ReportWarning('malformed_sample', f'expected {need} fields, got {len(parts)}',
                                        int(lines[i])))
                continue
            rows.append(parts)
            kept.append(i)
        return [[r[j] for r in rows] for j in range(need)], lines[kept]

    def flush(self):
        if not self.pieces:
            return
        pieces, self.pieces = self.pieces, []
        spans, self.spans = self.spans, []
        self.size = 0
        text = pieces[0] if len(pieces) == 1 else '\n'.join(pieces)
        lines = np.concatenate([np.arange(a, a + k, dtype=np.int64) for a, k in spans])
        cols_txt, lines = self._columns(text, len(lines), lines)
        if not len(lines):
            return
        t = _to_float(cols_txt[0])
        cols = {}
        for k, eye in enumerate(self.layout):
            x = _to_float(cols_txt[1 + 3 * k])
            y = _to_float(cols_txt[2 + 3 * k])
            p = _to_float(cols_txt[3 + 3 * k])
            bad = ~(np.isfinite(x) & np.isfinite(y))
            x[bad] = np.nan
            y[bad] = np.nan
            p[(p == 0.0) | ~np.isfinite(p)] = np.nan
            cols[eye] = (x, y, p)
        t[~np.isfinite(t)] = np.nan
        self.chunks.append((self.layout, t, lines, cols))

    def table(self) -> SampleTable:
        self.flush()
        if not self.chunks:
            return SampleTable.empty()
        t = np.concatenate([c[1] for c in self.chunks])
        lines = np.concatenate([c[2] for c in self.chunks])
        n = len(t)
        eye_cols = {}
        present = {}
        for eye in (Eye.LEFT, Eye.RIGHT):
            if not any(eye in c[0] for c in self.chunks):
                continue
            cols = tuple(np.full(n, np.nan) for _ in range(3))
            mask = np.zeros(n, dtype=bool)
            pos = 0
            for layout, ct, _, cc in self.chunks:
                m = len(ct)
                if eye in cc:
                    for dst, src in zip(cols, cc[eye]):
                        dst[pos:pos + m] = src
                    mask[pos:pos + m] = True
                pos += m
            eye_cols[eye] = cols
            present[eye] = mask
        return SampleTable(
            t, lines,
            left=eye_cols.get(Eye.LEFT), right=eye_cols.get(Eye.RIGHT),
            has_left=present.get(Eye.LEFT, np.zeros(n, dtype=bool)),
            has_right=present.get(Eye.RIGHT, np.zeros(n, dtype=bool)),
        )


def _parse_declaration(parts: list[str], lineno: int, block_index) -> Declaration:
    rate = tracking = filt = None
    for i, tok in enumerate(parts[:-1]):
        nxt = parts[i + 1]
        if tok == 'RATE':
            rate = _num(nxt)
        elif tok == 'TRACKING':
            tracking = nxt
        elif tok == 'FILTER':
            try:
                filt = int(nxt)
            except ValueError:
                filt = None
    return Declaration(parts[0], _eyes_in(parts), rate, tracking, filt, tuple(parts), lineno, block_index)


def _parse_event(parts: list[str], lineno: int | None = None) -> EyeEvent:
    """Build an event from an EFIX/ESACC/EBLINK line; raise ValueError if malformed."""
    kw = parts[0]
    need = {'EFIX': 8, 'ESACC': 11, 'EBLINK': 5}[kw]
    if len(parts) < need:
        raise ValueError(f'{kw} needs {need} fields, got {len(parts)}')
    eye = Eye.from_token(parts[1])
    ts, te = float(parts[2]), float(parts[3])
    if not (math.isfinite(ts) and math.isfinite(te)) or te < ts:
        raise ValueError(f'bad event interval {parts[2]}..{parts[3]}')
    if kw == 'EFIX':
        return EyeEvent(EventKind.FIXATION, eye, ts, te, x_px=_num(parts[5]),
                        y_px=_num(parts[6]), pupil=_num(parts[7]), line=lineno)
    if kw == 'ESACC':
        sx, sy, ex, ey, amp, pv = (_num(v) for v in parts[5:11])
        return EyeEvent(EventKind.SACCADE, eye, ts, te, start_x_px=sx, start_y_px=sy,
                        end_x_px=ex, end_y_px=ey, amplitude_deg=amp, peak_velocity_deg_s=pv, line=lineno)
    return EyeEvent(EventKind.BLINK, eye, ts, te, line=lineno)


def parse_asc(text: str, source_path: str | None = None, digest: str | None = None) -> Recording:
    """Parse the full contents of an EyeLink ASC export.

    Parameters
    ----------
    text : str
        File contents. ``\\n``, ``\\r\\n`` and ``\\r`` line endings are accepted.
    source_path : str, optional
        Stored on the Recording for report provenance.
    digest : str, optional
        Content digest to store; defaults to the SHA-256 of ``text`` encoded as UTF-8.

    Returns
    -------
    Recording

    Raises
    ------
    EmptyInput
        If the text has no non-blank line.
    NoRecordingBlock
        If there is no START line and no timestamped line to derive a block from.
        When timestamps exist, a synthetic block spanning them is used instead
        and a ``no_recording_block`` warning is added.
    """
    # millions of short-lived strings make the cyclic collector rescan the
    # heap repeatedly; nothing created here forms a cycle
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        return _parse_asc(text, source_path, digest)
    finally:
        if was_enabled:
            gc.enable()


def _parse_asc(text: str, source_path: str | None, digest: str | None) -> Recording:
    if '\r' in text:
        text = text.replace('\r\n', '\n').replace('\r', '\n')
    if not text.strip():
        raise EmptyInput('input contains no non-blank line')

    # Only lines that do not start with a digit go through the Python loop;
    # the runs of sample lines between them are handed over as substrings.
    starts = [] if text[:1] in _DIGITS else [0]
    starts.extend(m.start() + 1 for m in _NON_SAMPLE.finditer(text))

    warnings: list[ReportWarning] = []
    warn = warnings.append
    header: list[tuple[str, str]] = []
    decls: list[Declaration] = []
    blocks: list[Block] = []
    events: list[EyeEvent] = []
    messages: list[Message] = []
    buf = _SampleBuffer(warn)

    open_block: tuple[float, tuple[Eye, ...], int] | None = None
    declared_layout: tuple[Eye, ...] | None = None
    layout: tuple[Eye, ...] | None = None
    warned_missing_decl = False
    last_t: float | None = None
    first_t: float | None = None

    def seen(t):
        nonlocal last_t, first_t
        if first_t is None or t < first_t:
            first_t = t
        if last_t is None or t > last_t:
            last_t = t

    def feed(run: str, lineno: int) -> int:
        nonlocal layout, warned_missing_decl
        if layout is None:
            if declared_layout:
                layout = declared_layout
            else:
                layout = open_block[1] if open_block and open_block[1] else None
                if layout is None:
                    parts = run[:run.find('\n')].split() if '\n' in run else run.split()
                    layout = (Eye.LEFT, Eye.RIGHT) if len(parts) >= 7 and _num(parts[4]) is not None else (Eye.RIGHT,)
                if not warned_missing_decl:
                    warned_missing_decl = True
                    warn(ReportWarning(
                        'missing_samples_declaration',
                        'sample before any SAMPLES declaration; assuming '
                        + '+'.join(e.value for e in layout), lineno))
            buf.set_layout(layout)
        return buf.add(run, lineno)

    pos = 0  # offset of the next unconsumed line
    next_lineno = 1
    n_text = len(text)
    for start in starts:
        if start > pos:
            next_lineno += feed(text[pos:start - 1], next_lineno)
        lineno = next_lineno
        end = text.find('\n', start)
        if end < 0:
            end = n_text
        s = text[start:end].strip()
        pos = end + 1
        next_lineno += 1
        if not s:
            continue
        if s[0] in _DIGITS:  # indented sample line
            feed(s, lineno)
            continue

        if s.startswith('**'):
            body = s[2:].strip()
            if body:
                key, _, value = body.partition(':')
                header.append((key.strip(), value.strip()))
            continue

        parts = s.split()
        kw = parts[0]
        if kw == 'MSG':
            p = s.split(None, 2)
            t = _num(p[1]) if len(p) > 1 else None
            if len(p) < 3 or t is None:
                warn(ReportWarning('malformed_message', f'cannot parse {s!r}', lineno))
                continue
            messages.append(Message(t, p[2].rstrip(), lineno))
            seen(t)
        elif kw in ('EFIX', 'ESACC', 'EBLINK'):
            try:
                ev = _parse_event(parts, lineno)
            except ValueError as exc:
                warn(ReportWarning('malformed_event', str(exc), lineno))
                continue
            events.append(ev)
            seen(ev.start_ms)
            seen(ev.end_ms)
        elif kw in _EVENT_STARTS:
            t = _num(parts[2]) if len(parts) >= 3 else None
            if t is None or parts[1] not in ('L', 'R'):
                warn(ReportWarning('malformed_event', f'cannot parse {s!r}', lineno))
                continue
            seen(t)
        elif kw == 'START':
            t = _num(parts[1]) if len(parts) > 1 else None
            if t is None:
                warn(ReportWarning('malformed_block', f'cannot parse {s!r}', lineno))
                continue
            if open_block is not None:
                warn(ReportWarning('unterminated_block', 'START before END; closing previous block', lineno))
                blocks.append(Block(open_block[0], max(last_t, open_block[0]), open_block[1], open_block[2]))
            open_block = (t, _eyes_in(parts), lineno)
            seen(t)
        elif kw == 'END':
            t = _num(parts[1]) if len(parts) > 1 else None
            if t is None:
                warn(ReportWarning('malformed_block', f'cannot parse {s!r}', lineno))
                continue
            if open_block is None:
                warn(ReportWarning('end_without_start', 'END line without open block', lineno))
                continue
            if t < open_block[0]:
                warn(ReportWarning('malformed_block', 'END precedes START', lineno))
                continue
            blocks.append(Block(open_block[0], t, open_block[1], open_block[2]))
            open_block = None
            seen(t)
        elif kw in ('SAMPLES', 'EVENTS'):
            decl = _parse_declaration(parts, lineno, len(blocks) if open_block is not None else None)
            if not decl.eyes:
                warn(ReportWarning('malformed_declaration', f'no eye in {s!r}', lineno))
                continue
            decls.append(decl)
            if kw == 'SAMPLES':
                declared_layout = decl.eyes
                layout = None
        elif kw in _IGNORED_KEYWORDS:
            continue
        else:
            warn(ReportWarning('unknown_line', f'unrecognised line {s[:60]!r}', lineno))

    if pos < n_text:
        feed(text[pos:], next_lineno)

    if open_block is not None:
        end = max(last_t, open_block[0])
        warn(ReportWarning('unterminated_block', f'block opened at line {open_block[2]} has no END', open_block[2]))
        blocks.append(Block(open_block[0], end, open_block[1], open_block[2]))

    samples = buf.table()
    samples = _drop_bad_samples(samples, warnings)
    if len(samples):
        seen(float(samples.time_ms.min()))
        seen(float(samples.time_ms.max()))

    if not blocks:
        if first_t is None:
            raise NoRecordingBlock('no START line and no timestamped data')
        eyes = declared_layout or samples.eyes()
        blocks.append(Block(first_t, last_t, tuple(eyes), None, synthetic=True))
        warn(ReportWarning('no_recording_block',
                           f'no START line; using synthetic block {first_t:g}..{last_t:g}'))

    _flag_outside_blocks(samples, blocks, warnings)
    warnings.sort(key=lambda w: (w.line is None, w.line or 0))

    if digest is None:
        digest = 'sha256:' + hashlib.sha256(text.encode('utf-8', 'surrogateescape')).hexdigest()
    return Recording(header, decls, blocks, samples, events, messages, warnings, source_path, digest)


def _drop_bad_samples(samples: SampleTable, warnings: list[ReportWarning]) -> SampleTable:
    t = samples.time_ms
    if not len(t):
        return samples
    keep = np.isfinite(t)
    for ln in samples.line[~keep]:
        warnings.append(ReportWarning('malformed_sample', 'timestamp does not parse', int(ln)))
    # a row must be strictly later than every accepted row before it
    tt = np.where(keep, t, -np.inf)
    prev_max = np.concatenate(([-np.inf], np.maximum.accumulate(tt)[:-1]))
    dup = keep & (tt == prev_max)
    back = keep & (tt < prev_max)
    for ln, tv in zip(samples.line[dup], t[dup]):
        warnings.append(ReportWarning('duplicate_sample', f'repeated timestamp {tv:g}', int(ln)))
    for ln, tv in zip(samples.line[back], t[back]):
        warnings.append(ReportWarning('non_monotonic_sample', f'timestamp {tv:g} goes backwards', int(ln)))
    keep &= ~(dup | back)
    return samples if keep.all() else samples.take(keep)


def _flag_outside_blocks(samples: SampleTable, blocks: list[Block], warnings: list[ReportWarning]) -> None:
    if not len(samples):
        return
    bs = sorted(blocks, key=lambda b: b.start_ms)
    starts = np.array([b.start_ms for b in bs])
    ends = np.array([b.end_ms for b in bs])
    idx = np.searchsorted(starts, samples.time_ms, side='right') - 1
    inside = (idx >= 0) & (samples.time_ms <= ends[np.clip(idx, 0, None)])
    samples.in_block = inside
    if inside.all():
        return
    out = np.flatnonzero(~inside)
    run_starts = out[np.concatenate(([True], np.diff(out) > 1))]
    run_ends = out[np.concatenate((np.diff(out) > 1, [True]))]
    for a, b in zip(run_starts, run_ends):
        warnings.append(ReportWarning(
            'sample_outside_block',
            f'{b - a + 1} sample(s) outside any recording block, retained and flagged',
            int(samples.line[a])))


def read_asc(path: str | Path, encoding: str = 'utf-8') -> Recording:
    """Read and parse an ASC file; the digest covers the exact file bytes."""
    path = Path(path)
    raw = path.read_bytes()
    digest = 'sha256:' + hashlib.sha256(raw).hexdigest()
    return parse_asc(raw.decode(encoding, errors='replace'), source_path=str(path), digest=digest)


# calibration / validation messages

_VALIDATION_RE = re.compile(
    r'^!CAL\s+VALIDATION\s+(?P<model>\S+)\s+(?P<eyes>LR|RL|L|R)\s+(?P<eye>LEFT|RIGHT)'
    r'(?:\s+(?P<label>[A-Z_]+))?'
    r'(?:\s+ERROR\s+(?P<avg>\S+)\s+avg\.\s+(?P<max>\S+)\s+max'
    r'(?:\s+OFFSET\s+(?P<off>\S+)\s+deg\.(?:\s+(?P<ox>[^,\s]+),(?P<oy>\S+)\s+pix\.)?)?)?\s*$'
)
_CALIBRATION_RE = re.compile(
    r'^!CAL\s+CALIBRATION\s+(?P<model>\S+)\s+(?P<eyes>LR|RL|L|R)\s+(?P<eye>LEFT|RIGHT)(?:\s+(?P<label>\S+))?'
)


@dataclass(frozen=True)
class ValidationRecord:
    time_ms: float
    model: str
    eye: Eye
    error_label: str
    avg_error_deg: float | None = None
    max_error_deg: float | None = None
    offset_deg: float | None = None
    offset_pix: tuple[float, float] | None = None
    binocular: bool = False


@dataclass(frozen=True)
class CalibrationRecord:
    time_ms: float
    model: str
    eye: Eye
    num_points: int | None
    label: str | None = None
    binocular: bool = False


def _strict_float(token: str | None, what: str) -> float | None:
    if token is None:
        return None
    try:
        v = float(token)
    except ValueError:
        raise MalformedValidation(f'{what} {token!r} is not a number') from None
    if not math.isfinite(v):
        raise MalformedValidation(f'{what} {token!r} is not finite')
    return v


def parse_validation_message(msg: Message, warnings: list | None = None) -> ValidationRecord | None:
    """Return a ValidationRecord if ``msg`` is a ``!CAL VALIDATION`` line.

    Messages with a different prefix return ``None`` silently. Messages with
    the prefix but unusable fields return ``None`` and, if ``warnings`` is
    given, append a ``malformed_validation`` warning to it.
    """
    text = msg.text
    if not text.startswith('!CAL VALIDATION'):
        return None
    try:
        m = _VALIDATION_RE.match(text)
        if m is None:
            raise MalformedValidation(f'unrecognised validation line {text!r}')
        label = m['label']
        if label is None or (label == 'ERROR' and m['avg'] is None):
            raise MalformedValidation(f'validation without label {text!r}')
        offset_pix = None
        if m['ox'] is not None:
            offset_pix = (_strict_float(m['ox'], 'offset x'), _strict_float(m['oy'], 'offset y'))
        return ValidationRecord(
            time_ms=msg.time_ms,
            model=m['model'],
            eye=Eye.from_token(m['eye']),
            error_label=label,
            avg_error_deg=_strict_float(m['avg'], 'avg error'),
            max_error_deg=_strict_float(m['max'], 'max error'),
            offset_deg=_strict_float(m['off'], 'offset'),
            offset_pix=offset_pix,
            binocular=len(m['eyes']) == 2,
        )
    except MalformedValidation as exc:
        if warnings is not None:
            warnings.append(ReportWarning('malformed_validation', str(exc), msg.line))
        return None


def format_validation_message(rec: ValidationRecord) -> str:
    """Inverse of :func:`parse_validation_message` (message text only)."""
    eyes = 'LR' if rec.binocular else ('L' if rec.eye is Eye.LEFT else 'R')
    text = f'!CAL VALIDATION {rec.model} {eyes} {rec.eye.value.upper()} {rec.error_label}'
    if rec.avg_error_deg is not None:
        text += f' ERROR {rec.avg_error_deg!r} avg. {rec.max_error_deg!r} max'
        if rec.offset_deg is not None:
            text += f' OFFSET {rec.offset_deg!r} deg.'
            if rec.offset_pix is not None:
                text += f' {rec.offset_pix[0]!r},{rec.offset_pix[1]!r} pix.'
    return text


def parse_calibration_message(msg: Message, warnings: list | None = None) -> CalibrationRecord | None:
    """Return a CalibrationRecord if ``msg`` is a ``!CAL CALIBRATION`` line."""
    from gazeqc.calibration import count_points
    from gazeqc.errors import UnknownModel

    if not msg.text.startswith('!CAL CALIBRATION'):
        return None
    m = _CALIBRATION_RE.match(msg.text)
    if m is None:
        if warnings is not None:
            warnings.append(ReportWarning('malformed_calibration', f'cannot parse {msg.text!r}', msg.line))
        return None
    try:
        points = count_points(m['model'])
    except UnknownModel as exc:
        points = None
        if warnings is not None:
            warnings.append(ReportWarning('unknown_calibration_model', str(exc), msg.line))
    return CalibrationRecord(msg.time_ms, m['model'], Eye.from_token(m['eye']), points,
                             m['label'], binocular=len(m['eyes']) == 2)


# trials

def segment_trials(
        rec: Recording,
        start_pattern: str = 'TRIALID',
        end_pattern: str = 'TRIAL_RESULT',
        warnings: list | None = None,
) -> list[TrialWindow]:
    """Cut a recording into trial windows using message prefixes.

    A start marker opens a trial that ends at the first of: the next end
    marker, the next start marker (exclusive end) or the end of its recording
    block. The trial id is the message text after the start prefix. Without
    any usable start marker, one ``session`` window spanning all blocks is
    returned.
    """
    if warnings is None:
        warnings = []
    blocks = sorted(rec.blocks, key=lambda b: b.start_ms)
    markers = []
    for m in rec.messages:
        if m.text.startswith(start_pattern):
            markers.append((m.time_ms, 0, m))
        elif m.text.startswith(end_pattern):
            markers.append((m.time_ms, 1, m))
    markers.sort(key=lambda k: (k[0], k[1]))

    def block_for(t):
        for b in blocks:
            if b.start_ms <= t <= b.end_ms:
                return b
        return None

    windows: list[TrialWindow] = []
    used: set[str] = set()
    for i, (t, kind, m) in enumerate(markers):
        if kind != 0:
            continue
        tid = m.text[len(start_pattern):].strip() or str(len(windows) + 1)
        block = block_for(t)
        if block is None:
            warnings.append(ReportWarning('trial_outside_block', f'trial {tid!r} starts outside any block', m.line))
            continue
        end, inclusive = block.end_ms, True
        for t2, kind2, _ in markers[i + 1:]:
            if t2 > block.end_ms:
                break
            if kind2 == 1:
                end, inclusive = t2, True
                break
            # a later start closes this trial; one at the same time leaves it empty
            end, inclusive = t2, False
            break
        if not end > t:
            warnings.append(ReportWarning('empty_trial', f'trial {tid!r} has zero duration', m.line))
            continue
        if tid in used:
            k = 2
            while f'{tid}#{k}' in used:
                k += 1
            warnings.append(ReportWarning('duplicate_trial_id', f'trial id {tid!r} repeated; renamed {tid}#{k}', m.line))
            tid = f'{tid}#{k}'
        used.add(tid)
        windows.append(TrialWindow(tid, t, end, WindowSource.MARKERS, inclusive))

    if not windows:
        if not blocks:
            return []
        warnings.append(ReportWarning('no_trial_markers',
                                      f'no usable {start_pattern!r} markers; using whole session'))
        windows.append(TrialWindow('session', blocks[0].start_ms, max(b.end_ms for b in blocks),
                                   WindowSource.WHOLE_SESSION))
    return windows
