import re

import pytest

from codedchain.setting import Setting

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_setting():
    return Setting(N=16, K=2, Q=4, f=2)


@pytest.fixture
def acceptance_line():
    def record(criterion, ok, detail):
        line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        def order(line):
            num, suffix = re.match(r"\[criterion (\d+)(\w*)\]", line).groups()
            return int(num), suffix
        for line in sorted(set(ACCEPTANCE_LINES), key=order):
            terminalreporter.write_line(line)
