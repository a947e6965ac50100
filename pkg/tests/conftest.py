import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

EXTENDED = os.environ.get("LOCALCUT_EXTENDED") == "1"


def pytest_collection_modifyitems(config, items):
    if EXTENDED:
        return
    skip = pytest.mark.skip(reason="extended run; set LOCALCUT_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
