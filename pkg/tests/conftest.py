import numpy as np
import pytest

from vitalselect.features import extract_all, window_records
from vitalselect.preprocess import impute
from vitalselect.sigsynth import synthesize_dataset


@pytest.fixture(scope="session")
def small_records():
    return synthesize_dataset(11, 12)


@pytest.fixture(scope="session")
def small_matrix(small_records):
    """12 subjects, 5 windows per session, imputed per session."""
    return impute(extract_all(window_records(small_records, 10.0, 5.0)), by_session=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    return request.config.stash.setdefault(_VERDICTS, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
