import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from sigma_lab.gallery import ProcessSpec, make_process  # noqa: E402

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

GALLERY = ("reflected_srw", "drawdown", "positive_part")


@pytest.fixture(params=GALLERY)
def kind(request):
    return request.param


def gallery(kind, horizon):
    return make_process(ProcessSpec(kind, horizon))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
