import numpy as np
import pytest

from holoretrieve.field import ComplexField, OpticsConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(rng, n=64, pixel_size=1e-6) -> ComplexField:
    data = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return ComplexField(data, pixel_size)


@pytest.fixture
def optics():
    return OpticsConfig(1e-10, 0.1, 1e-6)


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
