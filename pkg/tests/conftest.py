import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

# make tests/oracles.py importable regardless of rootdir settings
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def lex():
    from mmsarc.textfeat import LexResources

    return LexResources.from_dir(FIXTURES / "lexicon")


def pytest_terminal_summary(terminalreporter):
    # acceptance criteria report one line each; shown at the end of the run
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES):
            terminalreporter.write_line(LINES[key])
