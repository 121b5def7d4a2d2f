"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines live; they
are also echoed in the terminal summary.
"""
import pytest

from alphamod.acceptance import CHECKS, run_check

_lines: dict = {}


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    text = "\n".join(_lines[n] for n in sorted(_lines))
    if reporter is not None:
        reporter.write_sep("-", "acceptance criteria")
        reporter.write_line(text)
    else:
        print(text)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    res = run_check(number)
    line = res.line()
    _lines[number] = line
    print(line)
    assert res.passed, line
