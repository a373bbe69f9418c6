"""Property tests for invariants that must hold on any input."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from gazeqc import (
    AoiWord,
    IdtParams,
    StimulusLayout,
    compute_data_loss,
    detect_fixations_idt,
    multi_line_jump_ratio,
    parse_asc,
    segment_trials,
    summarize_calibration,
    word_length_effect,
    word_skip_rate,
)
from gazeqc.asc import ValidationRecord
from gazeqc.errors import ParseError
from gazeqc.recording import EventKind, Eye, EyeEvent, SampleTable, TrialWindow
from gazeqc.stimulus import FixationAssignment

settings.register_profile('gazeqc', max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('gazeqc')

LINES = st.one_of(
    st.builds(lambda t: f'START {t} RIGHT SAMPLES EVENTS', st.integers(0, 2000)),
    st.builds(lambda t: f'END {t} SAMPLES EVENTS', st.integers(0, 2000)),
    st.builds(lambda t, x, y: f'{t}\t{x}\t{y}\t900.0\t...', st.integers(0, 2000),
              st.sampled_from(['100.0', '.', '3', 'x']), st.sampled_from(['5.5', '.', ''])),
    st.builds(lambda t, s: f'MSG {t} {s}', st.integers(0, 2000),
              st.sampled_from(['TRIALID 1', 'TRIAL_RESULT 0', '!CAL VALIDATION HV9 R RIGHT GOOD ERROR 0.3 avg. x',
                               'DISPLAY_COORDS 0 0 1023 767', ''])),
    st.sampled_from(['SAMPLES GAZE RIGHT RATE 1000.00 TRACKING CR FILTER 2', 'EFIX R 1 2', 'EBLINK R 5 9 5',
                     'ESACC R 1 2 3 4 5 6 7 8 9', 'SFIX R 4', '** DATE: today', 'BUTTON 1 2 3', '', '\t']),
    st.text(max_size=30),
)


@given(st.lists(LINES, max_size=40), st.sampled_from(['\n', '\r\n', '\r']))
def test_parse_is_total(lines, eol):
    try:
        rec = parse_asc(eol.join(lines))
    except ParseError:
        return
    t = rec.samples.time_ms
    assert np.all(np.diff(t) > 0)


def _loss_case(n, drop, blink):
    t = np.arange(n, dtype=float)
    keep = np.ones(n, bool)
    keep[list(drop)] = False
    x = np.full(n, 50.0)
    s = SampleTable.from_arrays(t[keep], x[keep], x[keep].copy())
    return compute_data_loss(s, blink, TrialWindow('t', 0, n - 1), 1000)


@given(st.integers(20, 300).flatmap(lambda n: st.tuples(
    st.just(n), st.sets(st.integers(0, n - 1)), st.sets(st.integers(0, n - 1)),
    st.lists(st.tuples(st.integers(-10, n + 10), st.integers(0, 40)), max_size=4))))
def test_data_loss_decomposition_and_monotonicity(case):
    n, drop_a, drop_b, blinks = case
    blink = [(a, a + w) for a, w in blinks]
    r = _loss_case(n, drop_a, blink)
    assert 0 <= r.loss_ratio_blink and 0 <= r.loss_ratio_unknown <= r.loss_ratio_total <= 1
    if not r.warnings:
        assert r.loss_ratio_total == pytest.approx(r.loss_ratio_blink + r.loss_ratio_unknown, abs=1e-12)
    r2 = _loss_case(n, drop_a | drop_b, blink)
    assert r2.loss_ratio_total >= r.loss_ratio_total
    assert r2.loss_ratio_blink == r.loss_ratio_blink


GAZE = st.lists(st.tuples(st.integers(5, 80), st.integers(0, 400), st.integers(0, 400)), min_size=1, max_size=8)


def _gaze(segments, noise_seed):
    rng = np.random.default_rng(noise_seed)
    xs = np.concatenate([np.full(n, x) for n, x, _ in segments]) + rng.integers(-4, 5, sum(s[0] for s in segments))
    ys = np.concatenate([np.full(n, y) for n, _, y in segments]) + rng.integers(-4, 5, len(xs))
    return np.arange(len(xs)) * 2.0, xs.astype(float), ys.astype(float)


@given(GAZE, st.integers(0, 99), st.integers(-500, 500), st.integers(-500, 500))
def test_idt_translation_equivariant(segments, seed, dx, dy):
    t, x, y = _gaze(segments, seed)
    p = IdtParams(20, 30)
    a = detect_fixations_idt(SampleTable.from_arrays(t, x, y), p)
    b = detect_fixations_idt(SampleTable.from_arrays(t, x + dx, y + dy), p)
    assert [(f.start_ms, f.end_ms) for f in a] == [(f.start_ms, f.end_ms) for f in b]
    for fa, fb in zip(a, b):
        assert fb.x_px == pytest.approx(fa.x_px + dx, abs=1e-9)
        assert fb.y_px == pytest.approx(fa.y_px + dy, abs=1e-9)


@given(GAZE, st.integers(0, 99))
def test_idt_fixations_inside_their_samples(segments, seed):
    t, x, y = _gaze(segments, seed)
    p = IdtParams(20, 30)
    fixes = detect_fixations_idt(SampleTable.from_arrays(t, x, y), p)
    prev_end = -math.inf
    for f in fixes:
        m = (t >= f.start_ms) & (t <= f.end_ms)
        assert x[m].min() <= f.x_px <= x[m].max()
        assert y[m].min() <= f.y_px <= y[m].max()
        assert (np.ptp(x[m]) + np.ptp(y[m])) <= p.dispersion_threshold_px
        assert f.end_ms - f.start_ms >= p.min_duration_ms
        assert f.start_ms > prev_end
        prev_end = f.end_ms


def _layout(n):
    return StimulusLayout('s', tuple(AoiWord(i, i // 5, 'w' * (1 + i % 7), i * 10, 0, i * 10 + 10, 10)
                                     for i in range(n)))


def _fx(d=100.0):
    return EyeEvent(EventKind.FIXATION, Eye.RIGHT, 0, d, x_px=0, y_px=0)


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.integers(0, n - 1)), st.lists(st.integers(0, n - 1)))))
def test_skip_rate_monotone(case):
    n, a, b = case
    lay = _layout(n)
    first = [FixationAssignment(_fx(), i) for i in a]
    more = first + [FixationAssignment(_fx(), i) for i in b]
    assert 0 <= word_skip_rate(more, lay) <= word_skip_rate(first, lay) <= 1


@given(st.lists(st.integers(0, 20), max_size=30), st.integers(-100, 100))
def test_jump_ratio_line_shift_invariant(lines, k):
    assert multi_line_jump_ratio(lines) == multi_line_jump_ratio([v + k for v in lines])


@given(st.lists(st.integers(50, 500), min_size=3, max_size=20))
def test_word_length_effect_monotone_transform_invariant(durations):
    lay = _layout(len(durations))
    a = word_length_effect([FixationAssignment(_fx(d), i) for i, d in enumerate(durations)], lay)
    b = word_length_effect([FixationAssignment(_fx(d ** 3 / 1e4 + 7), i) for i, d in enumerate(durations)], lay)
    if a is None:
        assert b is None
    else:
        assert b == pytest.approx(a, abs=1e-12)
        assert -1 <= a <= 1


VAL = st.builds(lambda t, avg, extra, eye, lab: ValidationRecord(float(t), 'HV9', eye, lab, avg, round(avg + extra, 2)),
                st.integers(0, 10**6), st.floats(0.05, 3, allow_nan=False).map(lambda v: round(v, 2)),
                st.floats(0, 2).map(lambda v: round(v, 2)), st.sampled_from([Eye.LEFT, Eye.RIGHT]),
                st.sampled_from(['GOOD', 'FAIR', 'POOR']))


@given(st.lists(VAL, max_size=12), st.randoms())
def test_calibration_summary_order_invariant(vals, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    a, b = summarize_calibration([], vals), summarize_calibration([], shuffled)
    if vals:
        assert a.mean_avg_error_deg == pytest.approx(b.mean_avg_error_deg, abs=1e-12)
    assert a.worst_max_error_deg == b.worst_max_error_deg
    assert a.label_histogram == b.label_histogram
    assert sorted(a.validation_timestamps) == sorted(b.validation_timestamps)


MARKERS = st.lists(st.tuples(st.integers(0, 999), st.sampled_from(['TRIALID t', 'TRIAL_RESULT 0'])), max_size=15)


@given(MARKERS)
def test_segment_windows_sorted_and_disjoint(markers):
    text = 'START 0 RIGHT SAMPLES EVENTS\n0\t1\t1\t1\n'
    text += ''.join(f'MSG {t} {m}\n' for t, m in markers)
    text += 'END 999 SAMPLES EVENTS\n'
    windows = segment_trials(parse_asc(text))
    assume(windows)
    for w in windows:
        assert w.end_ms > w.start_ms and 0 <= w.start_ms and w.end_ms <= 999
    for a, b in zip(windows, windows[1:]):
        assert a.start_ms < b.start_ms
        assert a.end_ms <= b.start_ms if not a.end_inclusive else a.end_ms < b.start_ms
    assert len({w.trial_id for w in windows}) == len(windows)
