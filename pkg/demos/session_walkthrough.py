"""Walk through one session: generate a recording, parse it, report on it.

Run with ``python3 demos/session_walkthrough.py``. Nothing is written to disk.
"""
from gazeqc import ReportConfig, build_session_report, parse_asc, serialize_report
from gazeqc.synthetic import make_session, to_asc

# A one-minute monocular recording at 1000 Hz with five reading trials,
# a dozen blinks and 40 ticks dropped at random by the "tracker".
truth = make_session(duration_s=60, n_trials=5, n_blinks=12, drop_ticks=40, seed=3)
text = to_asc(truth)
print(f'ASC text: {len(text.splitlines())} lines')

rec = parse_asc(text, source_path='demo.asc')
print(f'parsed {len(rec.samples)} samples, {len(rec.events)} events, {len(rec.messages)} messages')

# Binding the layout turns on the reading metrics.
report = build_session_report(rec, config=ReportConfig(stimulus=truth.layout))

md = report.metadata
print(f'\ntracker: {md.tracker_model} {md.tracker_version}, {md.sampling_rate_hz:g} Hz, eye {md.tracked_eye}')
cal = report.calibration
print(f'validations: {cal.num_validations}, mean error {cal.mean_avg_error_deg:.2f} deg, '
      f'worst {cal.worst_max_error_deg:.2f} deg')

print('\ntrial  loss   blink  unknown  skip  bg-dwell  wpm')
for t in report.trials:
    dl, sm = t.data_loss[0], t.stimulus_metrics
    print(f'{t.trial_id:>5}  {dl.loss_ratio_total:.3f}  {dl.loss_ratio_blink:.3f}  {dl.loss_ratio_unknown:.4f}'
          f'   {sm.word_skip_rate:.2f}  {sm.background_dwell_ratio:.3f}   {sm.reading_speed_wpm:.0f}')

# The dropped ticks are the only unexplained loss.
planted = len(truth.dropped_ms)
found = sum(round(dl.loss_ratio_unknown * dl.expected_samples) for t in report.trials for dl in t.data_loss)
print(f'\nplanted {planted} dropped ticks overall, {found} unexplained inside trials')

print('\nfirst lines of the Markdown report:')
print('\n'.join(serialize_report(report, 'markdown').splitlines()[:12]))
