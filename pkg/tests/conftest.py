import numpy as np
import pytest

from parawave.rng import stream
from parawave.spectral import Field, Grid


def band_limited(grid: Grid, seed: int, index: int = 0, kmax: int = None, nyquist_free: bool = True) -> Field:
    """Random real field with modes |index| < kmax in each direction."""
    kmax = kmax or grid.n // 3
    rng = stream(seed, index)
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    keep = np.all([np.abs(i) < kmax for i in grid.index], axis=0)
    f = Field.from_spectrum(grid, spec * keep)
    if nyquist_free:
        f = Field.from_spectrum(grid, f.spectrum * ~grid.nyquist_mask)
    return f


@pytest.fixture
def g1():
    return Grid(1, 128, 1.0)


@pytest.fixture
def g2():
    return Grid(2, 32, 1.0)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
