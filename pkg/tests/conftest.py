import numpy as np
import pytest

from exposome.align import fuse
from exposome.ingest import SynthConfig, generate_synthetic_session


@pytest.fixture(scope="session")
def default_bundle():
    return generate_synthetic_session(SynthConfig(), seed=0)


@pytest.fixture(scope="session")
def default_table(default_bundle):
    return fuse(default_bundle)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's verdict; the line is echoed and summarised."""
    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        request.config.stash[_ACCEPTANCE][number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
