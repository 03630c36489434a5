import pytest

from oamcavity import BeamGeometry, degenerate_ring, reference_lens, ring_grid


@pytest.fixture(scope="session")
def lens():
    return reference_lens()


@pytest.fixture(scope="session")
def ring():
    return degenerate_ring()


@pytest.fixture(scope="session")
def geom():
    return BeamGeometry(780e-9, 0.75e-3, 0.0)


@pytest.fixture(scope="session")
def grid512(ring, geom):
    return ring_grid(ring, geom.wavelength, 512)


@pytest.fixture(scope="session")
def grid256(ring, geom):
    return ring_grid(ring, geom.wavelength, 256)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, passed, detail)``."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
