"""Trial, session and dataset quality reports."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from gazeqc.asc import segment_trials
from gazeqc.calibration import CalibrationSummary, extract_calibration
from gazeqc.data_loss import DataLossReport, compute_data_loss, detect_gaps
from gazeqc.detection import IdtParams, detect_fixations_idt
from gazeqc.errors import EmptyInput, EmptyWindow, ZeroRate
from gazeqc.metadata import SessionMetadata, extract_metadata
from gazeqc.recording import EventKind, Eye, EyeEvent, Recording, ReportWarning, Stage, TrialWindow
from gazeqc.stimulus import StimulusLayout, StimulusMetricsReport, compute_stimulus_metrics

SCHEMA_VERSION = '1.0'

DATASET_METRICS = (
    'loss_ratio_total',
    'loss_ratio_blink',
    'loss_ratio_unknown',
    'blink_ratio',
    'mean_validation_avg_error_deg',
    'worst_validation_max_error_deg',
    'word_skip_rate',
    'background_dwell_ratio',
    'multi_line_jump_ratio',
    'reading_speed_wpm',
)


@dataclass(frozen=True)
class ReportConfig:
    trial_start: str = 'TRIALID'
    trial_end: str = 'TRIAL_RESULT'
    idt: IdtParams = IdtParams()
    stimulus: StimulusLayout | None = None
    stimulus_map: Mapping[str, StimulusLayout] = field(default_factory=dict)
    stimulus_map_source: str | None = None
    stimulus_eye: Eye | None = None
    min_gap_ms: float = 50.0

    def echo(self) -> dict:
        """Every setting that affects a report, including unchanged defaults."""
        return {
            'trial_markers': {'start': self.trial_start, 'end': self.trial_end},
            'fixation_detection': self.idt.to_dict(),
            'fixation_source': 'manufacturer events; fallback detection per trial without them',
            'stimulus_eye': 'auto' if self.stimulus_eye is None else self.stimulus_eye.value,
            'stimulus': None if self.stimulus is None else {
                'stimulus_id': self.stimulus.stimulus_id, 'path': self.stimulus.source},
            'stimulus_map': None if not self.stimulus_map else {
                'path': self.stimulus_map_source,
                'bindings': {tid: {'stimulus_id': lay.stimulus_id, 'path': lay.source}
                             for tid, lay in sorted(self.stimulus_map.items())},
            },
            'data_loss': {
                'tick_grid': 'floor(duration_ms * rate_hz / 1000) + 1 ticks per closed window',
                'valid_sample': 'x and y both numeric for the analysed eye',
                'expected_ticks_restricted_to_blocks': True,
                'gap_min_ms': self.min_gap_ms,
            },
            'word_assignment': 'centroid in closed box; shared edge to lowest word_index',
            'schema_version': SCHEMA_VERSION,
        }


@dataclass(frozen=True)
class TrialQualityReport:
    window: TrialWindow
    data_loss: list[DataLossReport] = field(default_factory=list)
    gaps: dict[Eye, list[tuple[float, float, int]]] = field(default_factory=dict)
    stimulus_metrics: StimulusMetricsReport | None = None
    warnings: list[ReportWarning] = field(default_factory=list)

    @property
    def trial_id(self) -> str:
        return self.window.trial_id


@dataclass(frozen=True)
class SessionQualityReport:
    source_path: str | None
    digest: str | None
    metadata: SessionMetadata
    calibration: CalibrationSummary
    trials: list[TrialQualityReport]
    warnings: list[ReportWarning]
    parameters: dict
    schema_version: str = SCHEMA_VERSION

    @property
    def session_id(self) -> str:
        return self.source_path or self.digest or 'session'

    def all_warnings(self) -> list[ReportWarning]:
        out = list(self.warnings)
        for t in self.trials:
            out.extend(t.warnings)
        return out

    def session_values(self) -> dict[str, float | None]:
        """One value per dataset metric for cross-session comparison.

        Loss ratios are pooled over trials and eyes (summed sample counts),
        blink rate is pooled over analysed time, stimulus metrics are the mean
        of defined trial values.
        """
        losses = [dl for t in self.trials for dl in t.data_loss]
        values: dict[str, float | None] = dict.fromkeys(DATASET_METRICS)
        if losses:
            expected = sum(dl.expected_samples for dl in losses)
            valid = sum(dl.valid_samples for dl in losses)
            blink = sum(dl.blink_samples for dl in losses)
            lost = min(max(expected - valid, 0), expected)
            values['loss_ratio_total'] = lost / expected
            values['loss_ratio_blink'] = blink / expected
            values['loss_ratio_unknown'] = max(0, lost - blink) / expected
            minutes = sum(dl.window.duration_ms for dl in losses) / 60000.0
            values['blink_ratio'] = sum(dl.blink_count for dl in losses) / minutes
        values['mean_validation_avg_error_deg'] = self.calibration.mean_avg_error_deg
        values['worst_validation_max_error_deg'] = self.calibration.worst_max_error_deg
        for key in ('word_skip_rate', 'background_dwell_ratio', 'multi_line_jump_ratio', 'reading_speed_wpm'):
            vals = sorted(v for t in self.trials if t.stimulus_metrics is not None
                          for v in [getattr(t.stimulus_metrics, key)] if v is not None)
            values[key] = float(np.mean(vals)) if vals else None
        return values


class _EventIndex:
    """Events of one kind and eye, sorted by start, for window queries."""

    def __init__(self, events: Iterable[EyeEvent]):
        self.events = sorted(events, key=lambda e: (e.start_ms, e.end_ms))
        self.starts = [e.start_ms for e in self.events]

    def starting_in(self, window: TrialWindow) -> list[EyeEvent]:
        lo = bisect.bisect_left(self.starts, window.start_ms)
        hi = (bisect.bisect_right if window.end_inclusive else bisect.bisect_left)(self.starts, window.end_ms)
        return self.events[lo:hi]

    def overlapping(self, window: TrialWindow) -> list[EyeEvent]:
        hi = bisect.bisect_right(self.starts, window.end_ms)
        return [e for e in self.events[:hi] if e.end_ms >= window.start_ms]


def _analysed_eyes(metadata: SessionMetadata, rec: Recording) -> tuple[Eye, ...]:
    if metadata.tracked_eye == 'binocular':
        eyes = (Eye.LEFT, Eye.RIGHT)
    elif metadata.tracked_eye in ('left', 'right'):
        eyes = (Eye(metadata.tracked_eye),)
    else:
        eyes = rec.samples.eyes()
    present = set(rec.samples.eyes())
    return tuple(e for e in eyes if e in present) or tuple(present)


def _rate_for(window: TrialWindow, rec: Recording, metadata: SessionMetadata) -> float | None:
    for i, b in enumerate(rec.blocks):
        if b.start_ms <= window.start_ms <= b.end_ms:
            for d in rec.metadata_lines:
                if d.kind == 'SAMPLES' and d.block_index == i and d.rate_hz:
                    return d.rate_hz
            break
    if metadata.sampling_rate_hz is not None:
        return metadata.sampling_rate_hz
    return metadata.sampling_rates_hz[0] if len(metadata.sampling_rates_hz) == 1 else None


def build_session_report(
        rec: Recording,
        trials: Sequence[TrialWindow] | None = None,
        config: ReportConfig = ReportConfig(),
) -> SessionQualityReport:
    """Assemble the full quality report for one recording.

    Device fixations are used for stimulus metrics wherever a trial has
    them; a trial without any is analysed with fallback detection on its raw
    samples and its metrics are tagged accordingly. Metric-level problems
    end up as warnings with the affected fields left empty.
    """
    warnings: list[ReportWarning] = list(rec.warnings)
    metadata = extract_metadata(rec)
    warnings.extend(ReportWarning('metadata_missing', m) for m in metadata.missing)
    if metadata.mixed_rate:
        warnings.append(ReportWarning('mixed_sampling_rate',
                                      f'sampling rates differ across declarations: {list(metadata.sampling_rates_hz)}'))
    calibration = extract_calibration(rec)
    warnings.extend(calibration.warnings)
    if trials is None:
        trials = segment_trials(rec, config.trial_start, config.trial_end, warnings)

    eyes = _analysed_eyes(metadata, rec)
    blinks = {e: _EventIndex(rec.events_of(EventKind.BLINK, e)) for e in (Eye.LEFT, Eye.RIGHT)}
    fixes = {e: _EventIndex(rec.events_of(EventKind.FIXATION, e)) for e in (Eye.LEFT, Eye.RIGHT)}
    stim_eye = config.stimulus_eye or (Eye.RIGHT if Eye.RIGHT in eyes else (eyes[0] if eyes else None))
    has_binding = config.stimulus is not None or bool(config.stimulus_map)
    if not has_binding:
        warnings.append(ReportWarning('no_layout', 'no AOI layout bound; stimulus metrics skipped'))

    reports = []
    for window in trials:
        tw: list[ReportWarning] = []
        rate = _rate_for(window, rec, metadata)
        losses, gaps = [], {}
        for eye in eyes:
            try:
                dl = compute_data_loss(rec.samples, blinks[eye].overlapping(window), window, rate,
                                       eye=eye, blocks=rec.blocks)
            except (ZeroRate, EmptyWindow) as exc:
                tw.append(ReportWarning('data_loss_unavailable', f'{eye.value}: {exc}'))
                continue
            losses.append(dl)
            tw.extend(dl.warnings)
            period = 1000.0 / rate
            gaps[eye] = detect_gaps(rec.samples, window, rate, max(config.min_gap_ms, period), eye=eye)

        metrics = None
        layout = config.stimulus_map.get(window.trial_id, config.stimulus)
        if layout is None and has_binding:
            tw.append(ReportWarning('no_layout', f'no AOI layout bound to trial {window.trial_id!r}'))
        elif layout is not None and stim_eye is not None:
            fixations = fixes[stim_eye].starting_in(window)
            stage = Stage.MANUFACTURER
            if not fixations:
                stage = Stage.FALLBACK
                sub = rec.samples.between(window.start_ms, window.end_ms, window.end_inclusive)
                fixations = detect_fixations_idt(sub, config.idt, eye=stim_eye)
            metrics = compute_stimulus_metrics(fixations, layout, window, stage)
            tw.extend(metrics.warnings)
        reports.append(TrialQualityReport(window, losses, gaps, metrics, tw))

    params = config.echo()
    params['analysed_eyes'] = [e.value for e in eyes]
    params['stimulus_eye_used'] = None if stim_eye is None else stim_eye.value
    return SessionQualityReport(rec.source_path, rec.digest, metadata, calibration, reports, warnings, params)


# dataset level

@dataclass(frozen=True)
class MetricDistribution:
    n: int
    mean: float | None
    sd: float | None
    median: float | None
    min: float | None
    max: float | None

    @classmethod
    def of(cls, values: Sequence[float]) -> MetricDistribution:
        v = np.sort(np.asarray(values, dtype=float))
        n = len(v)
        if n == 0:
            return cls(0, None, None, None, None, None)
        return cls(
            n=n,
            mean=float(np.mean(v)),
            sd=float(np.std(v, ddof=1)) if n > 1 else None,
            median=float(np.median(v)),
            min=float(v[0]),
            max=float(v[-1]),
        )

    def to_dict(self) -> dict:
        return {'n': self.n, 'mean': self.mean, 'sd': self.sd, 'median': self.median,
                'min': self.min, 'max': self.max}


@dataclass(frozen=True)
class SessionRow:
    session_id: str
    digest: str | None
    values: dict[str, float | None]
    num_warnings: int = 0


@dataclass(frozen=True)
class DatasetQualityReport:
    sessions: tuple[SessionRow, ...]
    metrics: dict[str, MetricDistribution]
    parameters: dict | None = None
    warnings: tuple[str, ...] = ()
    schema_version: str = SCHEMA_VERSION

    @property
    def n_sessions(self) -> int:
        return len(self.sessions)

    def merge(self, other: DatasetQualityReport) -> DatasetQualityReport:
        """Aggregate over the union of both reports' sessions."""
        return aggregate_rows(self.sessions + other.sessions, self.parameters,
                              self.warnings + other.warnings)


def session_row(report: SessionQualityReport) -> SessionRow:
    return SessionRow(report.session_id, report.digest, report.session_values(), len(report.all_warnings()))


def aggregate_rows(rows: Iterable[SessionRow], parameters: dict | None = None,
                   warnings: Iterable[str] = ()) -> DatasetQualityReport:
    rows = tuple(sorted(rows, key=lambda r: (r.session_id, r.digest or '')))
    if not rows:
        raise EmptyInput('dataset aggregation needs at least one session')
    metrics = {}
    for name in DATASET_METRICS:
        vals = [r.values.get(name) for r in rows]
        vals = [v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))]
        metrics[name] = MetricDistribution.of(vals)
    return DatasetQualityReport(rows, metrics, parameters, tuple(sorted(warnings)))


def aggregate_dataset(reports: Sequence[SessionQualityReport], parameters: dict | None = None) -> DatasetQualityReport:
    """Distribution summaries of every dataset metric across sessions.

    Sessions where a metric is undefined are left out of that metric only;
    each metric reports its own ``n``. The result does not depend on the
    order of ``reports``.
    """
    if not reports:
        raise EmptyInput('dataset aggregation needs at least one session')
    if parameters is None:
        parameters = dataset_parameters(min(reports, key=lambda r: (r.session_id, r.digest or '')))
    return aggregate_rows((session_row(r) for r in reports), parameters)


def dataset_parameters(report: SessionQualityReport) -> dict:
    """Parameter echo of a session minus the per-session resolved fields."""
    return {k: v for k, v in report.parameters.items() if k not in ('analysed_eyes', 'stimulus_eye_used')}
