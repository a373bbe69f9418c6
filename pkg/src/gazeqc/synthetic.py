"""Synthetic EyeLink sessions with known ground truth.

:func:`make_session` builds a reading-like recording (fixations on words of a
generated layout, saccades between them, blinks, optional dropped samples)
and keeps every planted quantity. :func:`to_asc` / :func:`write_asc` render it
in ASC format so that parser and reports can be checked against the truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from gazeqc.recording import Block, EventKind, Eye, EyeEvent, Message, SampleTable, TrialWindow
from gazeqc.stimulus import AoiWord, StimulusLayout

_WORDS = ('the of and to in is was that for it with as his on be at by had are but from or have an they '
          'which one you were her all she there would their we him been has when who will more no if out '
          'so said what up its about into than them can only other new some could time these two may then '
          'do first any my now such like our over man me even most made after also did many before must '
          'through back years where much your way well down should because each just those people how too '
          'little state good very make world still own see men work long get here between both life being '
          'under never day same another know while last might us great old year off come since against go '
          'came right used take three').split()


def make_layout(n_words: int = 60, words_per_line: int = 10, seed: int = 0,
                x0: float = 100.0, y0: float = 100.0, char_px: float = 12.0,
                line_px: float = 48.0, box_px: float = 32.0, stimulus_id: str = 'text') -> StimulusLayout:
    """A left-to-right text layout with one box per word."""
    rng = np.random.default_rng(seed)
    words = []
    for i in range(n_words):
        line, col = divmod(i, words_per_line)
        if col == 0:
            x = x0
        text = str(rng.choice(_WORDS))
        w = char_px * len(text)
        y = y0 + line * line_px
        words.append(AoiWord(i, line, text, x, y, x + w, y + box_px))
        x += w + char_px
    return StimulusLayout(stimulus_id, tuple(words))


def layout_csv(layout: StimulusLayout) -> str:
    rows = ['word_index,line_index,text,x_min,y_min,x_max,y_max']
    for w in layout.words:
        rows.append(f'{w.word_index},{w.line_index},{w.text},{w.x_min:g},{w.y_min:g},{w.x_max:g},{w.y_max:g}')
    return '\n'.join(rows) + '\n'


@dataclass
class GroundTruth:
    rate_hz: float
    eyes: tuple[Eye, ...]
    header: list[tuple[str, str]]
    blocks: list[Block]
    samples: SampleTable
    events: list[EyeEvent]
    messages: list[Message]
    trials: list[TrialWindow]
    blink_intervals: list[tuple[float, float]]
    dropped_ms: np.ndarray
    layout: StimulusLayout | None = None
    validations: list[dict] = field(default_factory=list)
    with_samples_decl: bool = True

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.rate_hz


def _fmt_t(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else f'{t:.1f}'


def make_session(
        rate_hz: float = 1000.0,
        duration_s: float = 60.0,
        n_trials: int = 5,
        n_blinks: int = 12,
        n_validations: int = 2,
        eyes: tuple[Eye, ...] = (Eye.RIGHT,),
        drop_ticks: int = 0,
        blink_lines: str = 'missing',
        seed: int = 0,
        start_ms: float = 1_000_000.0,
        layout: StimulusLayout | None = None,
        background_prob: float = 0.05,
) -> GroundTruth:
    """Generate a session with planted fixations, saccades, blinks and losses.

    Parameters
    ----------
    blink_lines : {'missing', 'absent'}
        Whether blink ticks are written as lines with missing coordinates or
        not written at all.
    drop_ticks : int
        Number of non-blink ticks (anywhere in the block) removed from the
        sample stream.
    """
    rng = np.random.default_rng(seed)
    if layout is None:
        layout = make_layout(seed=seed)
    period = 1000.0 / rate_hz
    n_ticks = int(round(duration_s * rate_hz)) + 1
    ticks = start_ms + np.arange(n_ticks) * period
    block_end = float(ticks[-1])

    # trials: equal shares of the block with a 100 ms margin on each side
    trials = []
    share = (block_end - start_ms) / n_trials
    for i in range(n_trials):
        a = start_ms + round(i * share) + 100
        b = start_ms + round((i + 1) * share) - 100
        trials.append(TrialWindow(str(i + 1), float(a), float(b)))

    # blink onsets: inside trials, at least 1.2 s apart, clear of trial ends
    candidates = []
    for tw in trials:
        lo, hi = tw.start_ms + 300, tw.end_ms - 800
        t = lo
        while t < hi:
            candidates.append(t)
            t += 1200
    if n_blinks > len(candidates):
        raise ValueError(f'{n_blinks} blinks do not fit; at most {len(candidates)}')
    onsets = sorted(rng.choice(candidates, size=n_blinks, replace=False).tolist()) if n_blinks else []

    # timeline of (kind, start_tick, end_tick, x0, y0, x1, y1)
    centers = [((w.x_min + w.x_max) / 2, (w.y_min + w.y_max) / 2) for w in layout.words]
    segments = []
    k = 0
    word = 0
    pos = centers[0]
    pending = list(onsets)
    while k < n_ticks:
        fix_len = int(rng.integers(150, 300) * rate_hz / 1000)
        end = min(k + fix_len, n_ticks - 1)
        segments.append(('fix', k, end, pos, pos))
        k = end + 1
        if k >= n_ticks:
            break
        if pending and ticks[k] >= pending[0]:
            pending.pop(0)
            blen = int(rng.integers(80, 180) * rate_hz / 1000)
            end = min(k + blen, n_ticks - 1)
            segments.append(('blink', k, end, pos, pos))
            k = end + 1
            continue
        if rng.random() < background_prob:
            nxt = (float(rng.uniform(20, 60)), float(rng.uniform(20, 60)))
        else:
            word = (word + int(rng.choice([1, 1, 1, 2, 2, 3, -1]))) % len(centers)
            nxt = centers[word]
        slen = max(int(rng.integers(20, 40) * rate_hz / 1000), 2)
        end = min(k + slen, n_ticks - 1)
        segments.append(('sacc', k, end, pos, nxt))
        pos = nxt
        k = end + 1
    if pending:
        raise RuntimeError('blink schedule not consumed')

    x = np.empty(n_ticks)
    y = np.empty(n_ticks)
    in_blink = np.zeros(n_ticks, dtype=bool)
    events = []
    blink_intervals = []
    for kind, a, b, p0, p1 in segments:
        if kind == 'fix':
            x[a:b + 1], y[a:b + 1] = round(p0[0], 1), round(p0[1], 1)
        elif kind == 'sacc':
            f = np.linspace(0.0, 1.0, b - a + 1)
            x[a:b + 1] = np.round(p0[0] + f * (p1[0] - p0[0]), 1)
            y[a:b + 1] = np.round(p0[1] + f * (p1[1] - p0[1]), 1)
        else:
            in_blink[a:b + 1] = True
            x[a:b + 1] = y[a:b + 1] = np.nan
            blink_intervals.append((float(ticks[a]), float(ticks[b])))
    pupil = np.round(rng.uniform(900, 1500, n_ticks))
    pupil[in_blink] = np.nan

    for eye in eyes:
        for kind, a, b, p0, p1 in segments:
            ts, te = float(ticks[a]), float(ticks[b])
            if kind == 'fix':
                events.append(EyeEvent(EventKind.FIXATION, eye, ts, te, x_px=round(p0[0], 1),
                                       y_px=round(p0[1], 1), pupil=float(np.round(np.nanmean(pupil[a:b + 1])))))
            elif kind == 'sacc':
                amp = round(float(np.hypot(p1[0] - p0[0], p1[1] - p0[1])) / 35.0, 2)
                events.append(EyeEvent(EventKind.SACCADE, eye, ts, te, start_x_px=float(x[a]),
                                       start_y_px=float(y[a]), end_x_px=float(x[b]), end_y_px=float(y[b]),
                                       amplitude_deg=amp, peak_velocity_deg_s=float(round(amp * 60 + 30))))
            else:
                events.append(EyeEvent(EventKind.BLINK, eye, ts, te))
    events.sort(key=lambda e: (e.end_ms, e.eye.value))

    eligible = np.flatnonzero(~in_blink)
    dropped_idx = np.sort(rng.choice(eligible, size=drop_ticks, replace=False)) if drop_ticks else np.empty(0, int)
    keep = np.ones(n_ticks, dtype=bool)
    keep[dropped_idx] = False
    if blink_lines == 'absent':
        keep &= ~in_blink
    elif blink_lines != 'missing':
        raise ValueError(f'blink_lines must be "missing" or "absent", got {blink_lines!r}')

    cols = (x[keep], y[keep], pupil[keep])
    table = SampleTable(ticks[keep], np.zeros(int(keep.sum()), dtype=np.int64),
                        left=cols if Eye.LEFT in eyes else None,
                        right=tuple(c.copy() for c in cols) if Eye.RIGHT in eyes else None)

    messages = [Message(start_ms - 3000, 'RECCFG CR 1000 2 1 R' if eyes == (Eye.RIGHT,) else 'RECCFG CR 1000 2 1 LR')]
    validations = []
    for v in range(n_validations):
        tc = start_ms - 2500 + v * 1000
        for eye in eyes:
            eye_tok = 'LR' if len(eyes) == 2 else ('L' if eye is Eye.LEFT else 'R')
            messages.append(Message(tc, f'!CAL CALIBRATION HV9 {eye_tok} {eye.value.upper()}   GOOD'))
        for eye in eyes:
            avg = round(float(rng.uniform(0.2, 0.8)), 2)
            mx = round(avg + float(rng.uniform(0.1, 0.8)), 2)
            off = round(float(rng.uniform(0.05, 0.5)), 2)
            ox, oy = round(float(rng.uniform(-20, 20)), 1), round(float(rng.uniform(-20, 20)), 1)
            eye_tok = 'LR' if len(eyes) == 2 else ('L' if eye is Eye.LEFT else 'R')
            messages.append(Message(tc + 500, f'!CAL VALIDATION HV9 {eye_tok} {eye.value.upper()} GOOD ERROR '
                                              f'{avg:.2f} avg. {mx:.2f} max  OFFSET {off:.2f} deg. {ox:.1f},{oy:.1f} pix.'))
            validations.append({'time_ms': tc + 500, 'eye': eye, 'avg': avg, 'max': mx, 'offset': off,
                                'offset_pix': (ox, oy)})
    messages.append(Message(start_ms, 'DISPLAY_COORDS 0 0 1279 1023'))
    for tw in trials:
        messages.append(Message(tw.start_ms, f'TRIALID {tw.trial_id}'))
        messages.append(Message(tw.end_ms, 'TRIAL_RESULT 0'))
    messages.sort(key=lambda m: m.time_ms)

    header = [
        ('CONVERTED FROM SYNTH.EDF using edfapi 4.2.1', ''),
        ('DATE', 'Wed Mar  2 11:11:11 2022'),
        ('TYPE', 'EDF_FILE BINARY EVENT SAMPLE TAGGED'),
        ('VERSION', 'EYELINK II 1'),
        ('SOURCE', 'EYELINK CL'),
        ('EYELINK II CL v6.12 Feb  1 2018 (EyeLink 1000 Plus)', ''),
    ]
    block = Block(start_ms, block_end, tuple(sorted(eyes, key=lambda e: e.value)))
    return GroundTruth(rate_hz, tuple(eyes), header, [block], table, events, messages, trials,
                       blink_intervals, ticks[dropped_idx], layout, validations)


def _sample_line(t: float, cols: list) -> str:
    parts = [_fmt_t(t)]
    for x, y, p in cols:
        if x != x:
            parts += ['   .', '   .', '    0.0']
        else:
            parts += [f'{x:7.1f}', f'{y:7.1f}', f'{p:7.1f}']
    parts.append('...' if len(cols) == 1 else '.....')
    return '\t'.join(parts)


def _num_or_dot(v: float | None, fmt: str = '.1f') -> str:
    return '.' if v is None else format(v, fmt)


def _event_lines(e: EyeEvent) -> tuple[str, str]:
    eye = 'L' if e.eye is Eye.LEFT else 'R'
    ts, te = _fmt_t(e.start_ms), _fmt_t(e.end_ms)
    dur = _fmt_t(e.end_ms - e.start_ms + 1)
    if e.kind is EventKind.FIXATION:
        return (f'SFIX {eye}   {ts}',
                f'EFIX {eye}   {ts}\t{te}\t{dur}\t{_num_or_dot(e.x_px)}\t{_num_or_dot(e.y_px)}\t'
                f'{_num_or_dot(e.pupil, ".0f")}')
    if e.kind is EventKind.SACCADE:
        return (f'SSACC {eye}  {ts}',
                f'ESACC {eye}  {ts}\t{te}\t{dur}\t{_num_or_dot(e.start_x_px)}\t{_num_or_dot(e.start_y_px)}\t'
                f'{_num_or_dot(e.end_x_px)}\t{_num_or_dot(e.end_y_px)}\t{_num_or_dot(e.amplitude_deg, ".2f")}\t'
                f'{_num_or_dot(e.peak_velocity_deg_s, ".0f")}')
    return f'SBLINK {eye} {ts}', f'EBLINK {eye} {ts}\t{te}\t{dur}'


def asc_lines(truth: GroundTruth) -> Iterator[str]:
    """ASC text lines for ``truth`` in device order."""
    for k, v in truth.header:
        yield f'** {k}: {v}' if v else f'** {k}'
    yield '**'
    yield ''
    block = truth.blocks[0]
    pre = [m for m in truth.messages if m.time_ms < block.start_ms]
    inside = [m for m in truth.messages if m.time_ms >= block.start_ms]
    for m in pre:
        yield f'MSG\t{_fmt_t(m.time_ms)} {m.text}'
    eyes_tok = ' '.join(e.value.upper() for e in sorted(truth.eyes, key=lambda e: e.value))
    yield f'START\t{_fmt_t(block.start_ms)} \t{eyes_tok}\tSAMPLES\tEVENTS'
    yield 'PRESCALER\t1'
    yield 'VPRESCALER\t1'
    yield 'PUPIL\tAREA'
    yield f'EVENTS\tGAZE\t{eyes_tok}\tRATE\t{truth.rate_hz:.2f}\tTRACKING\tCR\tFILTER\t2'
    if truth.with_samples_decl:
        yield f'SAMPLES\tGAZE\t{eyes_tok}\tRATE\t{truth.rate_hz:.2f}\tTRACKING\tCR\tFILTER\t2'

    # merge samples, event lines and messages by time: messages, then event
    # start lines, then the sample, then event end lines
    s = truth.samples
    order_eyes = sorted(truth.eyes, key=lambda e: e.value)
    col_sets = [s.left if e is Eye.LEFT else s.right for e in order_eyes]
    starts = sorted(((e.start_ms, i) for i, e in enumerate(truth.events)))
    ends = sorted(((e.end_ms, i) for i, e in enumerate(truth.events)))
    ev_lines = [_event_lines(e) for e in truth.events]
    mi = si = ei = 0
    t_arr = s.time_ms
    cols_lists = [[c.tolist() for c in cs] for cs in col_sets]
    times = t_arr.tolist()
    inf = float('inf')
    for k, t in enumerate(times):
        while mi < len(inside) and inside[mi].time_ms <= t:
            yield f'MSG\t{_fmt_t(inside[mi].time_ms)} {inside[mi].text}'
            mi += 1
        while si < len(starts) and starts[si][0] <= t:
            yield ev_lines[starts[si][1]][0]
            si += 1
        yield _sample_line(t, [(cl[0][k], cl[1][k], cl[2][k]) for cl in cols_lists])
        nxt = times[k + 1] if k + 1 < len(times) else inf
        while ei < len(ends) and ends[ei][0] < nxt:
            yield ev_lines[ends[ei][1]][1]
            ei += 1
    while si < len(starts):
        yield ev_lines[starts[si][1]][0]
        si += 1
    while ei < len(ends):
        yield ev_lines[ends[ei][1]][1]
        ei += 1
    while mi < len(inside):
        yield f'MSG\t{_fmt_t(inside[mi].time_ms)} {inside[mi].text}'
        mi += 1
    yield f'END\t{_fmt_t(block.end_ms)} \tSAMPLES\tEVENTS\tRES\t  38.00\t  35.00'


def to_asc(truth: GroundTruth) -> str:
    return '\n'.join(asc_lines(truth)) + '\n'


def write_asc(truth: GroundTruth, path: str | Path) -> Path:
    path = Path(path)
    with path.open('w', encoding='utf-8', newline='\n') as fh:
        buf = []
        for line in asc_lines(truth):
            buf.append(line)
            if len(buf) >= 65536:
                fh.write('\n'.join(buf) + '\n')
                buf.clear()
        if buf:
            fh.write('\n'.join(buf) + '\n')
    return path
