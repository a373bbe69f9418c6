import sys
from pathlib import Path

# the oracle helpers live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = []  # (number, name, passed, detail) filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for num, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f'[{"PASS" if ok else "FAIL"}] {num}. {name}: {detail}')
