"""``gazeqc`` command line.

Subcommands: ``report`` (one session), ``dataset`` (aggregate over many
sessions) and ``validate-aoi`` (lint an AOI layout). Exit codes: 0 success,
1 input/parse error, 2 invalid stimulus or configuration, 3 warnings
occurred under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from gazeqc.asc import read_asc
from gazeqc.detection import IdtParams
from gazeqc.errors import LayoutError, ParseError
from gazeqc.report import ReportConfig, aggregate_rows, build_session_report, dataset_parameters, session_row
from gazeqc.serialize import FORMATS, serialize_report
from gazeqc.stimulus import read_aoi_csv

log = logging.getLogger('gazeqc')

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_STRICT = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    glob: str = '*.asc'
    trial_start: str = 'TRIALID'
    trial_end: str = 'TRIAL_RESULT'
    dispersion_px: float = 25.0
    min_fix_ms: float = 50.0
    stimulus: str | None = None
    stimulus_map: str | None = None
    output_format: str = 'json'
    out: str | None = None
    strict: bool = False
    jobs: int = 1


def load_stimulus_map(path: str | Path) -> dict:
    """Read a ``trial_id,stimulus_id,aoi_path`` table; AOI paths are relative to the map."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'cannot read stimulus map {path}: {exc}') from None
    reader = csv.DictReader(text.lstrip('﻿').splitlines())
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ['trial_id', 'stimulus_id', 'aoi_path']:
        raise ConfigError(f'{path}: expected header trial_id,stimulus_id,aoi_path')
    cache = {}
    bindings = {}
    for row in reader:
        aoi = (path.parent / row['aoi_path'].strip())
        key = (str(aoi), row['stimulus_id'].strip())
        if key not in cache:
            cache[key] = _read_layout(aoi, row['stimulus_id'].strip())
        tid = row['trial_id'].strip()
        if tid in bindings:
            raise ConfigError(f'{path}: trial {tid!r} bound twice')
        bindings[tid] = cache[key]
    return bindings


def _read_layout(path: Path, stimulus_id: str | None = None):
    try:
        return read_aoi_csv(path, stimulus_id)
    except OSError as exc:
        raise ConfigError(f'cannot read AOI file {path}: {exc}') from None
    except LayoutError as exc:
        raise ConfigError(f'{path}: {exc}') from None


def make_report_config(run: RunConfig) -> ReportConfig:
    if run.output_format not in FORMATS:
        raise ConfigError(f'unknown format {run.output_format!r}')
    try:
        idt = IdtParams(run.dispersion_px, run.min_fix_ms)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    stimulus = _read_layout(Path(run.stimulus)) if run.stimulus else None
    smap = load_stimulus_map(run.stimulus_map) if run.stimulus_map else {}
    return ReportConfig(run.trial_start, run.trial_end, idt, stimulus, smap,
                        run.stimulus_map if run.stimulus_map else None)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding='utf-8')
        log.info('report written to %s', out)


def _session_job(path: str, config: ReportConfig):
    try:
        report = build_session_report(read_asc(path), config=config)
    except (OSError, ParseError) as exc:
        return None, None, f'{path}: {exc}'
    return session_row(report), dataset_parameters(report), None


def _dataset_files(inputs: list[str], pattern: str) -> list[str]:
    found = set()
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            found.update(str(f) for f in p.glob(pattern) if f.is_file())
        elif p.is_file():
            found.add(str(p))
        else:
            raise FileNotFoundError(item)
    return sorted(found)


def run_report(run: RunConfig) -> int:
    """Execute one CLI run; returns the process exit code."""
    if run.command == 'validate-aoi':
        try:
            layout = _read_layout(Path(run.inputs[0]))
        except ConfigError as exc:
            log.error('%s', exc)
            return EXIT_CONFIG
        sys.stdout.write(f'{run.inputs[0]}: ok, {len(layout)} words on {layout.line_count} lines\n')
        return EXIT_OK

    if run.command == 'report':
        path = run.inputs[0]
        if not Path(path).is_file():
            log.error('input file not found: %s', path)
            return EXIT_PARSE
        try:
            config = make_report_config(run)
        except ConfigError as exc:
            log.error('%s', exc)
            return EXIT_CONFIG
        try:
            rec = read_asc(path)
        except (OSError, ParseError) as exc:
            log.error('cannot parse %s: %s', path, exc)
            return EXIT_PARSE
        report = build_session_report(rec, config=config)
        _emit(serialize_report(report, run.output_format), run.out)
        warnings = report.all_warnings()
        for w in warnings:
            log.warning('%s', w)
        if run.strict and warnings:
            return EXIT_STRICT
        return EXIT_OK

    # dataset
    try:
        files = _dataset_files(run.inputs, run.glob)
    except FileNotFoundError as exc:
        log.error('input not found: %s', exc)
        return EXIT_PARSE
    if not files:
        log.error('no files matching %r in %s', run.glob, ', '.join(run.inputs))
        return EXIT_PARSE
    try:
        config = make_report_config(run)
    except ConfigError as exc:
        log.error('%s', exc)
        return EXIT_CONFIG
    if run.jobs > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            results = list(pool.map(_session_job, files, [config] * len(files)))
    else:
        results = [_session_job(f, config) for f in files]
    errors = [e for _, _, e in results if e is not None]
    for e in errors:
        log.error('%s', e)
    ok = [(row, params) for row, params, _ in results if row is not None]
    if not ok:
        return EXIT_PARSE
    # same parameter choice as aggregate_dataset, so outputs match byte for byte
    params = min(ok, key=lambda rp: (rp[0].session_id, rp[0].digest or ''))[1]
    dataset = aggregate_rows([row for row, _ in ok], params, [f'session skipped: {e}' for e in errors])
    _emit(serialize_report(dataset, run.output_format), run.out)
    if errors:
        return EXIT_PARSE
    if run.strict and any(row.num_warnings for row, _ in ok):
        return EXIT_STRICT
    return EXIT_OK


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError('must be >= 1')
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='gazeqc', description='Data quality reports for EyeLink ASC recordings.')
    parser.add_argument('-v', '--verbose', action='store_true', help='log warnings and progress')
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--trial-start', default='TRIALID', help='message prefix opening a trial')
    common.add_argument('--trial-end', default='TRIAL_RESULT', help='message prefix closing a trial')
    common.add_argument('--dispersion-px', type=float, default=25.0, help='I-DT dispersion threshold')
    common.add_argument('--min-fix-ms', type=float, default=50.0, help='I-DT minimum fixation duration')
    common.add_argument('--stimulus', help='AOI CSV applied to every trial')
    common.add_argument('--stimulus-map', help='CSV binding trial_id to stimulus_id and aoi_path')
    common.add_argument('--format', dest='output_format', choices=FORMATS, default='json')
    common.add_argument('--out', help='output path (default: standard output)')
    common.add_argument('--strict', action='store_true', help='exit 3 if any warning occurred')

    p = sub.add_parser('report', parents=[common], help='quality report for one ASC file')
    p.add_argument('inputs', nargs=1, metavar='ASC')

    p = sub.add_parser('dataset', parents=[common], help='aggregate report over many ASC files')
    p.add_argument('inputs', nargs='+', metavar='PATH')
    p.add_argument('--glob', default='*.asc', help='file pattern inside directories')
    p.add_argument('--jobs', type=_positive_int, default=1, help='parallel worker processes')

    p = sub.add_parser('validate-aoi', help='check an AOI layout CSV')
    p.add_argument('inputs', nargs=1, metavar='CSV')
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, stream=sys.stderr,
                        format='%(levelname)s: %(message)s')
    kwargs = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    return run_report(RunConfig(**kwargs))


if __name__ == '__main__':
    sys.exit(main())
