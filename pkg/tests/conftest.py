import pytest

from bipolarqt import bipolar, eigenstates, potentials


@pytest.fixture(scope="session")
def morse_pot():
    return potentials.morse(depth=200.0, alpha=1.0)


@pytest.fixture(scope="session")
def morse4(morse_pot):
    return eigenstates.morse_eigenstate(4, morse_pot)


@pytest.fixture(scope="session")
def morse4_numeric(morse_pot):
    return eigenstates.solve_generic(morse_pot, n=4)


@pytest.fixture(scope="session")
def ho_decomps():
    """Semiclassical closed-form decompositions of HO n = 0..10."""
    return {n: bipolar.decompose(eigenstates.ho_eigenstate(n)) for n in range(11)}


@pytest.fixture(scope="session")
def morse4_decomp(morse4):
    return bipolar.decompose(morse4)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
