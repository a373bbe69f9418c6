import numpy as np
import pytest

from gazeqc import (
    AoiWord,
    StimulusLayout,
    assign_fixation,
    background_dwell,
    load_aoi_csv,
    multi_line_jump_ratio,
    reading_speed,
    word_length_effect,
    word_skip_rate,
)
from gazeqc.errors import DegenerateBox, EmptyLayout, EmptyWindow, MalformedRow, MissingHeader, OverlappingBoxes
from gazeqc.recording import EventKind, Eye, EyeEvent, Stage, TrialWindow
from gazeqc.stimulus import FixationAssignment, compute_stimulus_metrics

from oracles import spearman

HEAD = 'word_index,line_index,text,x_min,y_min,x_max,y_max\n'


def fix(x, y, dur=100.0, start=0.0):
    return EyeEvent(EventKind.FIXATION, Eye.RIGHT, start, start + dur, x_px=x, y_px=y)


def row_layout(texts, line_of=None, width=50):
    words = [AoiWord(i, line_of(i) if line_of else 0, t, i * width, 0, (i + 1) * width, 20)
             for i, t in enumerate(texts)]
    return StimulusLayout('s', tuple(words))


def test_load_two_rows():
    lay = load_aoi_csv(HEAD + '0,0,The,0,0,40,20\n1,1,cat,0,30,40,50\n')
    assert len(lay) == 2 and lay.line_count == 2
    assert lay.word(1).text == 'cat'


def test_load_degenerate():
    with pytest.raises(DegenerateBox):
        load_aoi_csv(HEAD + '0,0,a,100,0,90,20\n')


def test_load_overlap():
    with pytest.raises(OverlappingBoxes):
        load_aoi_csv(HEAD + '0,0,a,0,0,50,20\n1,0,b,40,10,90,30\n')


def test_shared_edge_is_not_overlap():
    lay = load_aoi_csv(HEAD + '0,0,a,0,0,50,20\n1,0,b,50,0,90,20\n')
    assert len(lay) == 2


def test_load_header_and_rows():
    with pytest.raises(MissingHeader):
        load_aoi_csv('a,b,c\n0,0,a,0,0,1,1\n')
    with pytest.raises(MalformedRow) as exc:
        load_aoi_csv(HEAD + '0,0,a,0,0,1,1\n1,0,b,x,0,1,1\n')
    assert exc.value.line_no == 3


def test_quoted_text_with_comma():
    lay = load_aoi_csv(HEAD + '0,0,"well,",0,0,40,20\n')
    assert lay.word(0).text == 'well,'


def test_assign_examples():
    words = [AoiWord(3, 0, 'w3', 100, 40, 150, 60), AoiWord(4, 0, 'w4', 150, 40, 200, 60),
             AoiWord(5, 0, 'w5', 200, 40, 250, 60)]
    lay = StimulusLayout('s', tuple(words))
    assert assign_fixation(fix(105, 50), lay).word_index == 3
    assert assign_fixation(fix(200, 50), lay).word_index == 4
    assert assign_fixation(fix(5, 5), lay).is_background


def test_word_skip_examples():
    lay = row_layout(['w'] * 10)
    hits = [FixationAssignment(fix(0, 0), i) for i in (1, 3, 5)]
    assert word_skip_rate(hits, lay) == 0.7
    assert word_skip_rate([FixationAssignment(fix(0, 0), i) for i in range(10)], lay) == 0.0
    assert word_skip_rate([], lay) == 1.0
    with pytest.raises(EmptyLayout):
        word_skip_rate([], StimulusLayout('e', ()))


def test_background_dwell_examples():
    a, b = fix(0, 0, 200), fix(0, 0, 100, 300)
    assert background_dwell([a, b], [FixationAssignment(a, 0), FixationAssignment(b, None)]) == (100.0, 1 / 3)
    assert background_dwell([a], [FixationAssignment(a, 0)]) == (0.0, 0.0)
    c = fix(0, 0, 250)
    assert background_dwell([c], [FixationAssignment(c, None)]) == (250.0, 1.0)
    warnings = []
    assert background_dwell([], [], warnings) == (0.0, 0.0)
    assert [w.code for w in warnings] == ['no_fixations']


def test_multi_line_examples():
    assert multi_line_jump_ratio([1, 1, 2, 4, 4, 5]) == 1 / 3
    assert multi_line_jump_ratio([0, 0, 0]) is None
    assert multi_line_jump_ratio([1, 3]) == 1.0
    assert multi_line_jump_ratio([]) is None


def _effect(lengths, durations):
    lay = row_layout(['x' * n for n in lengths])
    assigns = [FixationAssignment(fix(0, 0, d), i) for i, d in enumerate(durations)]
    return word_length_effect(assigns, lay)


def test_word_length_monotone():
    assert _effect([2, 4, 6], [100, 200, 300]) == 1.0
    assert _effect([2, 4, 6], [300, 200, 100]) == -1.0


def test_word_length_ties_against_oracle():
    # average ranks: lengths (1.5, 1.5, 3, 4), durations (1, 2, 3.5, 3.5); Pearson gives 4 / 4.5
    frozen = 8 / 9
    assert spearman([3, 3, 5, 7], [120, 140, 150, 150]) == pytest.approx(frozen, abs=1e-15)
    assert _effect([3, 3, 5, 7], [120, 140, 150, 150]) == pytest.approx(frozen, abs=1e-12)


def test_word_length_undefined():
    assert _effect([2, 4], [100, 200]) is None
    assert _effect([3, 3, 3], [100, 200, 300]) is None
    assert _effect([2, 4, 6], [100, 100, 100]) is None


def test_word_length_sums_per_word():
    lay = row_layout(['ab', 'abcd', 'abcdef'])
    assigns = [FixationAssignment(fix(0, 0, d), i) for i, d in [(0, 100), (0, 250), (1, 200), (2, 300)]]
    # per-word totals 350, 200, 300 against lengths 2, 4, 6
    assert word_length_effect(assigns, lay) == pytest.approx(spearman([2, 4, 6], [350, 200, 300]))


def test_reading_speed_examples():
    assert reading_speed(row_layout(['w'] * 300, width=2), TrialWindow('t', 0, 60000)) == 300
    assert reading_speed(row_layout(['w'] * 150, width=2), TrialWindow('t', 0, 30000)) == 300
    with pytest.raises(EmptyWindow):
        reading_speed(row_layout(['w']), TrialWindow('t', 5, 5))


def test_compute_all_metrics():
    lay = row_layout(['a', 'bb', 'ccc', 'dddd'], line_of=lambda i: i // 2)
    fixes = [fix(25, 10, 100, 0), fix(75, 10, 150, 200), fix(175, 10, 200, 400), fix(500, 500, 50, 700)]
    m = compute_stimulus_metrics(fixes, lay, TrialWindow('t', 0, 60000), Stage.FALLBACK)
    assert m.num_fixations == 4
    assert m.word_skip_rate == 0.25
    assert m.background_dwell_ms == 50 and m.background_dwell_ratio == 50 / 500
    assert m.multi_line_jump_ratio == 0.0
    assert m.word_length_duration_corr == 1.0
    assert m.reading_speed_wpm == 4
    assert m.to_dict()['stage'] == 'events:fallback'


def test_assign_points_vectorised_matches_single():
    rng = np.random.default_rng(1)
    lay = row_layout(['w'] * 20)
    xs, ys = rng.uniform(-10, 1010, 500), rng.uniform(-5, 25, 500)
    vec = lay.assign_points(xs, ys)
    for x, y, v in zip(xs, ys, vec):
        single = assign_fixation(fix(x, y), lay).word_index
        assert (single if single is not None else -1) == v
