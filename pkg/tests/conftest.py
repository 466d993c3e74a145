import pytest

from widemod.verify import find_cc


@pytest.fixture(scope="session")
def cc():
    """Path to a host C compiler, or skip the test if none is installed."""
    path = find_cc()
    if path is None:
        pytest.skip("no C compiler on PATH (set WIDEMOD_CC to override)")
    return path
