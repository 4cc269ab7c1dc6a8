import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jasda.config import load_config, scenario_path  # noqa: E402
from jasda.core import ScoredVariant, Variant  # noqa: E402
from jasda.fmp import Fmp  # noqa: E402

FLAT = Fmp(((1.0, 1.0, 0.0),), 1.0)


def sv(vid, start, end, score, anchor=0, job="J"):
    """A scored variant with only the fields clearing looks at."""
    v = Variant(vid, job, "s", start, end - start, FLAT, ())
    return ScoredVariant(v, score, score, score, score, age_anchor=anchor)


@pytest.fixture
def table3():
    return load_config(scenario_path("table3"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
