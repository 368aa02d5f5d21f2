import numpy as np
import pytest

from mlcstore.halffloat import EXP_MSB_MASK

ALL_WORDS = np.arange(1 << 16, dtype=np.uint32).astype(np.uint16)


@pytest.fixture(scope="session")
def all_words():
    return ALL_WORDS


@pytest.fixture(scope="session")
def valid_words():
    """Every half word a weight can take: bit 1 clear."""
    return ALL_WORDS[(ALL_WORDS & EXP_MSB_MASK) == 0]


TABLE_WEIGHTS = (0.004222, 0.020614, 0.0004982)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
