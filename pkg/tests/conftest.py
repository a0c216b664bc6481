import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def titanic_csv(tmp_path_factory):
    """Real passenger file from LUGSAIL_TITANIC_CSV, else a synthetic stand-in."""
    env = os.environ.get("LUGSAIL_TITANIC_CSV")
    if env:
        return Path(env)
    from lugsail.samplers.titanic import write_synthetic_titanic

    return write_synthetic_titanic(tmp_path_factory.mktemp("data") / "titanic.csv")


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
