import numpy as np
import pytest

from ginls.dynamics import make_initial_data
from ginls.spectral import make_grid

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed: bool, text: str):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def random_field(grid, seed, rho=1.0, band=None, amp=0.4):
    """Smooth complex field with background rho, seeded."""
    band = band if band is not None else grid.xi_max / 4
    return make_initial_data("random_band", grid, rho, seed=seed, band=band, amp=amp)


def corpus(n=256, length=8 * np.pi, count=12, rho=1.0):
    """Seeded mix of random band-limited fields and structured data."""
    grid = make_grid(n, length)
    out = [random_field(grid, s, rho=rho, band=1.0 + (s % 5), amp=0.2 + 0.1 * (s % 4)) for s in range(count)]
    out.append(make_initial_data("constant", grid, rho))
    out.append(make_initial_data("plane_wave", grid, rho, k=2 * 2 * np.pi / length))
    out.append(make_initial_data("bump_perturbation", grid, rho, amp=0.5, width=1.0))
    out.append(make_initial_data("bump_perturbation", grid, rho, amp=0.8, width=0.7, profile="matern", phase=1.0))
    return out


@pytest.fixture(scope="session")
def field_corpus():
    return corpus()


@pytest.fixture(scope="session")
def grey_grid():
    return make_grid(1024, 64.0)
