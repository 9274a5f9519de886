import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from obstruction_walks.arith import sieve_primes  # noqa: E402
from obstruction_walks.fibration import build_sigma_table, parse_family  # noqa: E402

ST = "s,t"
FOUR = "s,t,s+t,s-t"


@pytest.fixture(scope="session")
def table():
    return sieve_primes(10**6)


@pytest.fixture(scope="session")
def st():
    return parse_family(ST)


@pytest.fixture(scope="session")
def four():
    return parse_family(FOUR)


@pytest.fixture(scope="session")
def sig_st(st, table):
    return build_sigma_table(st, 10**6, table)


@pytest.fixture(scope="session")
def sig_four(four, table):
    return build_sigma_table(four, 10**6, table)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """record(number, passed, detail) for the acceptance summary."""
    def record(number: int, passed: bool, detail: str) -> bool:
        request.config.stash[ACCEPTANCE].append((number, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(ACCEPTANCE, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in rows:
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
