import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dnsobs.model import DnsQuery, parse_timestamp

T0 = parse_timestamp("2015-03-01T00:00:00Z")
DATA = os.path.join(os.path.dirname(__file__), "data")


def q(offset, user, domain):
    return DnsQuery(T0 + offset, user, domain)


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE_LINES: list = []


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
