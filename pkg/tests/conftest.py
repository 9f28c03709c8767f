import pytest

from magflows import surfaces


@pytest.fixture(scope="session")
def genus2():
    return surfaces.make_genus2_octagon(k=1.0)


@pytest.fixture(scope="session")
def half_plane():
    return surfaces.make_half_plane(k=1.0)


@pytest.fixture(scope="session")
def torus():
    return surfaces.make_flat_torus()


@pytest.fixture(scope="session")
def sphere():
    return surfaces.make_sphere(k=1.0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
