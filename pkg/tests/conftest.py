import pytest

from nodal_lab import mesh as M

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ico3():
    return M.generate_icosphere(3)


@pytest.fixture(scope="session")
def torus64():
    return M.generate_flat_torus(64, 64)


@pytest.fixture(scope="session")
def square16():
    return M.generate_square(16)


@pytest.fixture(scope="session")
def disk4():
    return M.generate_disk(4)
