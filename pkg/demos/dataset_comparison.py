"""Compare data quality across a small simulated lab dataset.

Writes eight ASC files to a temporary directory, runs the ``dataset``
subcommand over them and prints the per-metric distribution. Run with
``python3 demos/dataset_comparison.py``.
"""
import json
import tempfile
from pathlib import Path

from gazeqc.cli import main
from gazeqc.synthetic import layout_csv, make_layout, make_session, write_asc

layout = make_layout(seed=0)
with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / 'story.csv').write_text(layout_csv(layout))
    # participants get progressively worse tracking
    for i in range(8):
        truth = make_session(duration_s=30, n_trials=3, n_blinks=4 + i, drop_ticks=300 * i,
                             seed=i, layout=layout)
        write_asc(truth, tmp / f'p{i:02d}.asc')

    out = tmp / 'dataset.json'
    code = main(['dataset', str(tmp), '--stimulus', str(tmp / 'story.csv'), '--out', str(out)])
    print(f'exit code {code}')
    report = json.loads(out.read_text())

print(f'{report["n_sessions"]} sessions\n')
print(f'{"metric":<32}{"n":>3}{"mean":>10}{"sd":>10}{"min":>10}{"max":>10}')
for name, m in report['metrics'].items():
    if m['n'] == 0:
        print(f'{name:<32}{0:>3}   (undefined in every session)')
        continue
    sd = '-' if m['sd'] is None else f'{m["sd"]:.4f}'
    print(f'{name:<32}{m["n"]:>3}{m["mean"]:>10.4f}{sd:>10}{m["min"]:>10.4f}{m["max"]:>10.4f}')

print('\nsessions by unexplained loss:')
for s in sorted(report['sessions'], key=lambda s: s['values']['loss_ratio_unknown']):
    print(f'  {Path(s["session_id"]).name}: {s["values"]["loss_ratio_unknown"]:.4f}')
