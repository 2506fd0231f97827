import pytest

from sievebounds.buchstab import build_table
from sievebounds.integrals import QuadratureConfig, compute_term
from sievebounds.terms import TermId

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def table():
    return build_table()


@pytest.fixture(scope="session")
def rigorous(table):
    """Default rigorous results for all sixteen terms."""
    return {t: compute_term(t, QuadratureConfig(), table) for t in TermId}


@pytest.fixture(scope="session")
def fast(table):
    return {t: compute_term(t, QuadratureConfig(mode="fast"), table) for t in TermId}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
