import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from physmom.data import load_panel  # noqa: E402
from physmom.synthetic import SynthSpec, synth_panel  # noqa: E402


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """10 symbols x 60 days on disk: (bars dir, benchmark file, panel)."""
    bars, bench = synth_panel(SynthSpec(), 7, tmp_path_factory.mktemp("small"))
    return bars, bench, load_panel(bars, bench)


@pytest.fixture(scope="session")
def long_dataset(tmp_path_factory):
    """40 symbols over about six years, for monthly and yearly runs."""
    spec = SynthSpec(n_symbols=40, n_days=1600)
    bars, bench = synth_panel(spec, 11, tmp_path_factory.mktemp("long"))
    return bars, bench, load_panel(bars, bench)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
