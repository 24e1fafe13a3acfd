from __future__ import annotations

import pytest

from occusafe.cli import bundled_problem, load_problem
from occusafe.polyalg import parse_inequality, parse_poly
from occusafe.problem import Dirac, SafetyProblem, normalize


def exponential_problem(T: float = 10.0, initial=None) -> SafetyProblem:
    """dx/dt = -x from x0 = 1, unsafe set {x >= 0.5} inside [-1, 1]."""
    V = ["x"]
    return SafetyProblem(
        1,
        [parse_poly("-x", V)],
        T,
        [parse_inequality("1 - x^2 >= 0", V)],
        [parse_inequality("x >= 0.5", V), parse_inequality("1 - x^2 >= 0", V)],
        initial if initial is not None else Dirac((1.0,)),
        box=[(-1.0, 1.0)],
    )


@pytest.fixture(scope="session")
def vanderpol():
    return load_problem(bundled_problem("vanderpol"))


@pytest.fixture(scope="session")
def vanderpol_normalized(vanderpol):
    return normalize(vanderpol)


@pytest.fixture(scope="session")
def exponential():
    return load_problem(bundled_problem("exponential"))


@pytest.fixture(scope="session")
def exponential_normalized(exponential):
    return normalize(exponential)


@pytest.fixture(scope="session")
def cubic_whole_normalized():
    return normalize(load_problem(bundled_problem("cubic_whole")))


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        if getattr(rep, "when", None) == "call"
        for key, value in getattr(rep, "user_properties", ())
        if key == "acceptance"
    ]
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
