"""Calibration and validation summaries.

Scores are reported as they are; nothing here decides whether a validation
is good enough.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from gazeqc.asc import (
    CalibrationRecord,
    ValidationRecord,
    parse_calibration_message,
    parse_validation_message,
)
from gazeqc.errors import UnknownModel
from gazeqc.recording import Eye, Recording, ReportWarning

CALIBRATION_POINTS = {'H3': 3, 'HV3': 3, 'HV5': 5, 'HV9': 9, 'HV13': 13}


def count_points(model: str) -> int:
    """Number of calibration targets for an EyeLink calibration model token."""
    try:
        return CALIBRATION_POINTS[model.strip().upper()]
    except KeyError:
        raise UnknownModel(f'unknown calibration model {model!r}') from None


@dataclass(frozen=True)
class EyeValidationSummary:
    num_validations: int
    num_scored: int
    mean_avg_error_deg: float | None
    worst_max_error_deg: float | None
    label_histogram: dict[str, int]

    def to_dict(self) -> dict:
        return {
            'num_validations': self.num_validations,
            'num_scored': self.num_scored,
            'mean_avg_error_deg': self.mean_avg_error_deg,
            'worst_max_error_deg': self.worst_max_error_deg,
            'label_histogram': dict(sorted(self.label_histogram.items())),
        }


@dataclass(frozen=True)
class CalibrationSummary:
    num_calibrations: int
    num_validations: int
    calibration_timestamps: list[float]
    validation_timestamps: list[float]
    combined: EyeValidationSummary
    per_eye: dict[Eye, EyeValidationSummary]
    tracked_eyes: tuple[Eye, ...] = ()
    calibration_models: tuple[str, ...] = ()
    num_points: int | None = None
    validations: list[ValidationRecord] = field(default_factory=list)
    calibrations: list[CalibrationRecord] = field(default_factory=list)
    warnings: list[ReportWarning] = field(default_factory=list)

    @property
    def mean_avg_error_deg(self) -> float | None:
        return self.combined.mean_avg_error_deg

    @property
    def worst_max_error_deg(self) -> float | None:
        return self.combined.worst_max_error_deg

    @property
    def label_histogram(self) -> dict[str, int]:
        return self.combined.label_histogram


def _summarize_eye(vals: list[ValidationRecord]) -> EyeValidationSummary:
    avgs = [v.avg_error_deg for v in vals if v.avg_error_deg is not None]
    maxes = [v.max_error_deg for v in vals if v.max_error_deg is not None]
    # sorted input keeps the floating-point sum independent of record order
    mean_avg = float(np.mean(sorted(avgs))) if avgs else None
    return EyeValidationSummary(
        num_validations=len(vals),
        num_scored=len(avgs),
        mean_avg_error_deg=mean_avg,
        worst_max_error_deg=max(maxes) if maxes else None,
        label_histogram=dict(sorted(Counter(v.error_label for v in vals).items())),
    )


def summarize_calibration(
        calibrations: list[CalibrationRecord],
        validations: list[ValidationRecord],
) -> CalibrationSummary:
    """Summarise calibration and validation attempts of one session.

    Validations without numeric scores (e.g. ``ABORTED``) are counted and
    appear in the label histogram but do not enter the error statistics.
    """
    warnings = []
    if not validations:
        warnings.append(ReportWarning('no_validation', 'no validation performed'))
    key = lambda r: (r.time_ms, r.eye.value)  # noqa: E731
    calibrations = sorted(calibrations, key=key)
    validations = sorted(validations, key=lambda r: (r.time_ms, r.eye.value, r.error_label,
                                                       r.avg_error_deg or -1.0, r.max_error_deg or -1.0))
    eyes = sorted({v.eye for v in validations} | {c.eye for c in calibrations}, key=lambda e: e.value)
    per_eye = {eye: _summarize_eye([v for v in validations if v.eye is eye]) for eye in eyes}
    models = tuple(sorted({c.model for c in calibrations}))
    points = {c.num_points for c in calibrations if c.num_points is not None}
    return CalibrationSummary(
        num_calibrations=len(calibrations),
        num_validations=len(validations),
        calibration_timestamps=[c.time_ms for c in calibrations],
        validation_timestamps=[v.time_ms for v in validations],
        combined=_summarize_eye(validations),
        per_eye=per_eye,
        tracked_eyes=tuple(eyes),
        calibration_models=models,
        num_points=points.pop() if len(points) == 1 else None,
        validations=validations,
        calibrations=calibrations,
        warnings=warnings,
    )


def extract_calibration(rec: Recording) -> CalibrationSummary:
    """Find every ``!CAL`` calibration and validation message and summarise them."""
    warnings: list[ReportWarning] = []
    cals, vals = [], []
    for msg in rec.messages:
        if not msg.text.startswith('!CAL'):
            continue
        v = parse_validation_message(msg, warnings)
        if v is not None:
            vals.append(v)
            continue
        c = parse_calibration_message(msg, warnings)
        if c is not None:
            cals.append(c)
    summary = summarize_calibration(cals, vals)
    points = {c.num_points for c in cals if c.num_points is not None}
    if len(points) > 1:
        warnings.append(ReportWarning('mixed_calibration_models',
                                      f'calibration point counts differ: {sorted(points)}'))
    summary.warnings[:0] = warnings
    return summary
