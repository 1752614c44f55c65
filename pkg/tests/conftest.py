import pytest
from hypothesis import HealthCheck, settings

from liepairs.liepair import LiePairSpec
from liepairs.pbw import LieAlgebra

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SL2_BRACKETS = {(0, 2): {1: 1}, (1, 0): {0: 2}, (1, 2): {2: -2}}


@pytest.fixture(scope="session")
def sl2():
    """sl2 = <e, h, f> with A = span{e}."""
    return LiePairSpec.from_constants(["e", "h", "f"], 1, SL2_BRACKETS)


@pytest.fixture(scope="session")
def solvable():
    """[a, b] = b with A = span{a}."""
    return LiePairSpec.from_constants(["a", "b"], 1, {(0, 1): {1: 1}})


@pytest.fixture(scope="session")
def abelian():
    return LiePairSpec.from_constants(["a", "b"], 1, {})


@pytest.fixture(scope="session")
def sl2_lie():
    return LieAlgebra.from_sparse(["e", "h", "f"], SL2_BRACKETS)


@pytest.fixture(scope="session")
def heisenberg_lie():
    return LieAlgebra.from_sparse(["p", "q", "z"], {(0, 1): {2: 1}})


@pytest.fixture(scope="session")
def solvable_lie():
    return LieAlgebra.from_sparse(["a", "b"], {(0, 1): {1: 1}})


_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
