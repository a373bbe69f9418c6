"""Deterministic JSON and Markdown rendering of quality reports.

JSON keys follow schema order, absent values are ``null`` and fractions are
written with at most 6 significant digits. Equal reports always render to
equal bytes.
"""
from __future__ import annotations

import json
import math

from gazeqc.errors import UnknownFormat
from gazeqc.report import DATASET_METRICS, DatasetQualityReport, SessionQualityReport, TrialQualityReport

FORMATS = ('json', 'markdown')

FRACTION_KEYS = frozenset({
    'loss_ratio_total', 'loss_ratio_blink', 'loss_ratio_unknown',
    'word_skip_rate', 'background_dwell_ratio', 'multi_line_jump_ratio',
    'word_length_duration_corr',
})


def _sig6(x: float) -> float:
    return float(f'{x:.6g}')


def _clean(obj, fraction: bool = False):
    if isinstance(obj, dict):
        return {str(k): _clean(v, fraction or k in FRACTION_KEYS) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, fraction) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return _sig6(obj) if fraction else obj
    if hasattr(obj, 'item'):  # numpy scalar
        return _clean(obj.item(), fraction)
    return str(obj)


def _calibration_dict(report: SessionQualityReport) -> dict:
    cal = report.calibration
    return {
        'stage': 'messages',
        'num_calibrations': cal.num_calibrations,
        'num_validations': cal.num_validations,
        'calibration_timestamps': cal.calibration_timestamps,
        'validation_timestamps': cal.validation_timestamps,
        'calibration_models': list(cal.calibration_models),
        'num_points': cal.num_points,
        'tracked_eyes': [e.value for e in cal.tracked_eyes],
        'combined': cal.combined.to_dict(),
        'per_eye': {e.value: s.to_dict() for e, s in sorted(cal.per_eye.items(), key=lambda kv: kv[0].value)},
        'calibrations': [
            {'time_ms': c.time_ms, 'model': c.model, 'eye': c.eye.value, 'num_points': c.num_points,
             'label': c.label}
            for c in cal.calibrations
        ],
        'validations': [
            {'time_ms': v.time_ms, 'model': v.model, 'eye': v.eye.value, 'error_label': v.error_label,
             'avg_error_deg': v.avg_error_deg, 'max_error_deg': v.max_error_deg,
             'offset_deg': v.offset_deg, 'offset_pix': None if v.offset_pix is None else list(v.offset_pix)}
            for v in cal.validations
        ],
    }


def _trial_dict(trial: TrialQualityReport) -> dict:
    losses = []
    for dl in trial.data_loss:
        d = dl.to_dict()
        d['gaps'] = [{'start_ms': a, 'end_ms': b, 'num_missing': n} for a, b, n in trial.gaps.get(dl.eye, [])]
        losses.append(d)
    return {
        'trial_id': trial.trial_id,
        'window': trial.window.to_dict(),
        'data_loss': losses,
        'stimulus_metrics': None if trial.stimulus_metrics is None else trial.stimulus_metrics.to_dict(),
        'warnings': [w.to_dict() for w in trial.warnings],
    }


def session_to_dict(report: SessionQualityReport) -> dict:
    metadata = {'stage': 'header', **report.metadata.to_dict()}
    return {
        'schema_version': report.schema_version,
        'source': {'path': report.source_path, 'digest': report.digest},
        'metadata': metadata,
        'calibration': _calibration_dict(report),
        'trials': [_trial_dict(t) for t in report.trials],
        'warnings': [w.to_dict() for w in report.warnings],
        'parameters': report.parameters,
    }


def dataset_to_dict(report: DatasetQualityReport) -> dict:
    return {
        'schema_version': report.schema_version,
        'kind': 'dataset',
        'n_sessions': report.n_sessions,
        'metrics': {name: report.metrics[name].to_dict() for name in DATASET_METRICS},
        'sessions': [
            {'session_id': r.session_id, 'digest': r.digest, 'num_warnings': r.num_warnings,
             'values': {name: r.values.get(name) for name in DATASET_METRICS}}
            for r in report.sessions
        ],
        'warnings': list(report.warnings),
        'parameters': report.parameters,
    }


def to_dict(report) -> dict:
    if isinstance(report, SessionQualityReport):
        return _clean(session_to_dict(report))
    if isinstance(report, DatasetQualityReport):
        return _clean(dataset_to_dict(report))
    raise TypeError(f'cannot serialise {type(report).__name__}')


def serialize_report(report, format: str = 'json') -> str:
    """Render a session or dataset report as ``json`` or ``markdown`` text."""
    if format not in FORMATS:
        raise UnknownFormat(f'unknown format {format!r}; expected one of {", ".join(FORMATS)}')
    data = to_dict(report)
    if format == 'json':
        return json.dumps(data, indent=2, ensure_ascii=False, allow_nan=False) + '\n'
    if isinstance(report, DatasetQualityReport):
        return _dataset_markdown(data)
    return _session_markdown(data)


def _fmt(v) -> str:
    if v is None:
        return 'n/a'
    if isinstance(v, float):
        return f'{v:.6g}'
    return str(v)


def _table(header: list[str], rows: list[list]) -> list[str]:
    out = ['| ' + ' | '.join(header) + ' |', '|' + '---|' * len(header)]
    out += ['| ' + ' | '.join(_fmt(c) for c in row) + ' |' for row in rows]
    return out


def _session_markdown(d: dict) -> str:
    lines = [f"# Eye-tracking data quality report", '',
             f"- source: `{d['source']['path']}`", f"- digest: `{d['source']['digest']}`",
             f"- schema version: {d['schema_version']}", '']

    lines += ['## Metadata', '']
    meta = {k: v for k, v in d['metadata'].items() if k not in ('stage', 'missing')}
    lines += _table(['field', 'value'], [[k, v] for k, v in meta.items()])
    if d['metadata']['missing']:
        lines += ['', 'Missing: ' + ', '.join(d['metadata']['missing'])]

    cal = d['calibration']
    lines += ['', '## Calibration and validation', '',
              f"- calibrations: {cal['num_calibrations']} at {cal['calibration_timestamps']}",
              f"- validations: {cal['num_validations']} at {cal['validation_timestamps']}",
              f"- calibration points: {_fmt(cal['num_points'])}", '']
    rows = [['combined', cal['combined']['num_validations'], cal['combined']['mean_avg_error_deg'],
             cal['combined']['worst_max_error_deg'], cal['combined']['label_histogram']]]
    rows += [[eye, s['num_validations'], s['mean_avg_error_deg'], s['worst_max_error_deg'], s['label_histogram']]
             for eye, s in cal['per_eye'].items()]
    lines += _table(['eye', 'validations', 'mean avg error (deg)', 'worst max error (deg)', 'labels'], rows)

    lines += ['', '## Data loss', '']
    rows = []
    for t in d['trials']:
        for dl in t['data_loss']:
            rows.append([t['trial_id'], dl['eye'], dl['expected_samples'], dl['valid_samples'],
                         dl['loss_ratio_total'], dl['loss_ratio_blink'], dl['loss_ratio_unknown'],
                         dl['blink_count'], dl['blink_ratio']])
    lines += _table(['trial', 'eye', 'expected', 'valid', 'loss total', 'loss blink', 'loss unknown',
                     'blinks', 'blinks/min'], rows)

    lines += ['', '## Stimulus metrics', '']
    rows = []
    for t in d['trials']:
        m = t['stimulus_metrics']
        if m is None:
            continue
        rows.append([t['trial_id'], m['stimulus_id'], m['fixation_stage'], m['word_skip_rate'],
                     m['background_dwell_ms'], m['background_dwell_ratio'], m['multi_line_jump_ratio'],
                     m['word_length_duration_corr'], m['reading_speed_wpm']])
    if rows:
        lines += _table(['trial', 'stimulus', 'fixations', 'skip rate', 'background ms', 'background ratio',
                         'multi-line jumps', 'length effect', 'wpm'], rows)
    else:
        lines.append('No AOI layout bound.')

    warnings = [w for w in d['warnings']] + [w for t in d['trials'] for w in t['warnings']]
    lines += ['', '## Warnings', '']
    lines += [f"- {w['code']}" + (f" (line {w['line']})" if w['line'] is not None else '') + f": {w['message']}"
              for w in warnings] or ['None.']
    lines += ['', '## Parameters', '', '```json', json.dumps(d['parameters'], indent=2), '```', '']
    return '\n'.join(lines)


def _dataset_markdown(d: dict) -> str:
    lines = ['# Eye-tracking dataset quality summary', '',
             f"- sessions: {d['n_sessions']}", f"- schema version: {d['schema_version']}", '']
    rows = [[name, s['n'], s['mean'], s['sd'], s['median'], s['min'], s['max']] for name, s in d['metrics'].items()]
    lines += _table(['metric', 'n', 'mean', 'sd', 'median', 'min', 'max'], rows)
    lines += ['', '## Sessions', '']
    rows = [[s['session_id']] + [s['values'][m] for m in DATASET_METRICS] for s in d['sessions']]
    lines += _table(['session'] + list(DATASET_METRICS), rows)
    if d['warnings']:
        lines += ['', '## Warnings', ''] + [f'- {w}' for w in d['warnings']]
    lines.append('')
    return '\n'.join(lines)
