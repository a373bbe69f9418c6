"""Session-level setup metadata taken from ASC header, declarations and messages."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from gazeqc.recording import Declaration, Eye, Recording

_TRACKER_RE = re.compile(r'^(?P<model>EYELINK.*?)\s+v(?P<version>\d+(?:\.\d+)*)(?P<rest>.*)$', re.I)
_PAREN_RE = re.compile(r'\(([^)]+)\)')


@dataclass(frozen=True)
class SessionMetadata:
    sampling_rate_hz: float | None = None
    tracked_eye: str | None = None
    sample_filter_level: int | None = None
    event_filter_level: int | None = None
    tracking_mode: str | None = None
    recording_datetime: str | None = None
    total_recording_duration_ms: float = 0.0
    tracker_model: str | None = None
    tracker_version: str | None = None
    display_width_px: int | None = None
    display_height_px: int | None = None
    calibration_model: str | None = None
    sampling_rates_hz: tuple[float, ...] = ()
    mixed_rate: bool = False
    num_blocks: int = 0
    missing: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            'sampling_rate_hz': self.sampling_rate_hz,
            'sampling_rates_hz': list(self.sampling_rates_hz),
            'mixed_rate': self.mixed_rate,
            'tracked_eye': self.tracked_eye,
            'sample_filter_level': self.sample_filter_level,
            'event_filter_level': self.event_filter_level,
            'tracking_mode': self.tracking_mode,
            'recording_datetime': self.recording_datetime,
            'total_recording_duration_ms': self.total_recording_duration_ms,
            'num_blocks': self.num_blocks,
            'tracker_model': self.tracker_model,
            'tracker_version': self.tracker_version,
            'display_width_px': self.display_width_px,
            'display_height_px': self.display_height_px,
            'calibration_model': self.calibration_model,
            'missing': list(self.missing),
        }


def _header_value(rec: Recording, key: str) -> str | None:
    for k, v in rec.header:
        if k.upper() == key:
            return v or None
    return None


def _tracker(rec: Recording) -> tuple[str | None, str | None]:
    for k, v in rec.header:
        raw = f'{k}:{v}' if v else k
        m = _TRACKER_RE.match(raw)
        if m:
            paren = _PAREN_RE.search(m['rest'])
            return (paren.group(1).strip() if paren else m['model'].strip()), m['version']
    version = _header_value(rec, 'VERSION')
    if version:
        # "EYELINK II 1": trailing number is the file-format version
        head, _, tail = version.rpartition(' ')
        if head and tail.replace('.', '', 1).isdigit():
            return head, tail
        return version, None
    source = _header_value(rec, 'SOURCE')
    return source, None


def _display(rec: Recording) -> tuple[int | None, int | None]:
    for prefix in ('DISPLAY_COORDS', 'GAZE_COORDS'):
        for msg in rec.messages:
            if not msg.text.startswith(prefix):
                continue
            parts = msg.text.split()[1:5]
            try:
                x0, y0, x1, y1 = (float(v) for v in parts)
            except ValueError:
                continue
            w, h = round(x1 - x0 + 1), round(y1 - y0 + 1)
            if w > 0 and h > 0:
                return w, h
    return None, None


def _tracked_eye(decls: list[Declaration], rec: Recording) -> str | None:
    eyes: set[Eye] = set()
    for d in decls:
        eyes.update(d.eyes)
    if not eyes:
        for b in rec.blocks:
            eyes.update(b.eyes)
    if not eyes:
        eyes.update(rec.samples.eyes())
    if not eyes:
        return None
    if len(eyes) == 2:
        return 'binocular'
    return eyes.pop().value


def extract_metadata(rec: Recording) -> SessionMetadata:
    """Collect the standard session metadata fields.

    A field is ``None`` when its source line is absent, and its name is then
    listed in ``missing`` as ``"<field> missing"``. ``SAMPLES`` declarations are
    the primary source; ``EVENTS`` declarations fill in rate and tracking mode
    when no ``SAMPLES`` line exists.
    """
    samples_decls = [d for d in rec.metadata_lines if d.kind == 'SAMPLES']
    events_decls = [d for d in rec.metadata_lines if d.kind == 'EVENTS']
    primary = samples_decls or events_decls

    rates = []
    for d in primary:
        if d.rate_hz is not None and d.rate_hz not in rates:
            rates.append(d.rate_hz)
    rate = rates[0] if len(rates) == 1 else None
    tracking = next((d.tracking for d in primary if d.tracking), None)
    sample_filter = next((d.filter_level for d in samples_decls if d.filter_level is not None), None)
    event_filter = next((d.filter_level for d in events_decls if d.filter_level is not None), None)
    model, version = _tracker(rec)
    width, height = _display(rec)

    cal_model = None
    for msg in rec.messages:
        if msg.text.startswith('!CAL CALIBRATION'):
            parts = msg.text.split()
            if len(parts) > 2:
                cal_model = parts[2]
                break
    if cal_model is None:
        # RECCFG-style message, "ELCL_CAL_TYPE HV9" or "CALIBRATION_TYPE = HV9"
        for msg in rec.messages:
            m = re.search(r'\b(?:CALIBRATION_TYPE|CAL_TYPE)\s*=?\s*(H3|HV3|HV5|HV9|HV13)\b', msg.text)
            if m:
                cal_model = m.group(1)
                break

    values = {
        'sampling_rate': rate if rate is not None else (rates[0] if rates else None),
        'tracked_eye': _tracked_eye(samples_decls or events_decls, rec),
        'sample_filter_level': sample_filter,
        'event_filter_level': event_filter,
        'tracking_mode': tracking,
        'recording_datetime': _header_value(rec, 'DATE'),
        'tracker_model': model,
        'tracker_version': version,
        'display_resolution': width,
        'calibration_model': cal_model,
    }
    missing = tuple(f'{name} missing' for name, v in values.items() if v is None)

    return SessionMetadata(
        sampling_rate_hz=rate,
        tracked_eye=values['tracked_eye'],
        sample_filter_level=sample_filter,
        event_filter_level=event_filter,
        tracking_mode=tracking,
        recording_datetime=values['recording_datetime'],
        total_recording_duration_ms=float(sum(b.end_ms - b.start_ms for b in rec.blocks)),
        tracker_model=model,
        tracker_version=version,
        display_width_px=width,
        display_height_px=height,
        calibration_model=cal_model,
        sampling_rates_hz=tuple(rates),
        mixed_rate=len(rates) > 1,
        num_blocks=len(rec.blocks),
        missing=missing,
    )
