"""Standardised data quality reports for EyeLink eye-tracking recordings."""
from gazeqc.asc import (
    CalibrationRecord,
    ValidationRecord,
    parse_asc,
    parse_sample_line,
    parse_validation_message,
    read_asc,
    segment_trials,
)
from gazeqc.calibration import CalibrationSummary, count_points, extract_calibration, summarize_calibration
from gazeqc.data_loss import BlinkStat, DataLossReport, compute_data_loss, detect_gaps
from gazeqc.detection import IdtParams, detect_fixations_idt
from gazeqc.metadata import SessionMetadata, extract_metadata
from gazeqc.recording import (
    Block,
    EventKind,
    Eye,
    EyeChannel,
    EyeEvent,
    GazeSample,
    Message,
    Recording,
    ReportWarning,
    SampleTable,
    Stage,
    TrialWindow,
    WindowSource,
)
from gazeqc.report import (
    DatasetQualityReport,
    ReportConfig,
    SessionQualityReport,
    TrialQualityReport,
    aggregate_dataset,
    build_session_report,
)
from gazeqc.serialize import serialize_report
from gazeqc.stimulus import (
    AoiWord,
    FixationAssignment,
    StimulusLayout,
    StimulusMetricsReport,
    assign_fixation,
    background_dwell,
    load_aoi_csv,
    multi_line_jump_ratio,
    read_aoi_csv,
    reading_speed,
    word_length_effect,
    word_skip_rate,
)

__version__ = '0.1.0'
