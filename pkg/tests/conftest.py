import numpy as np
import pytest

from poisson_sprays.geometry import BivectorField

# Polynomial bivectors written twice: as input terms (1-based) and as explicit
# component maps (0-based, upper triangle) used by the oracles.
POLY_FIXTURES = {
    "linear-so3": (
        3,
        [
            {"i": 1, "j": 2, "exponents": [0, 0, 1], "coefficient": 1.0},
            {"i": 2, "j": 3, "exponents": [1, 0, 0], "coefficient": 1.0},
            {"i": 3, "j": 1, "exponents": [0, 1, 0], "coefficient": 1.0},
        ],
        {
            (0, 1): lambda x: x[2],
            (1, 2): lambda x: x[0],
            (0, 2): lambda x: -x[1],
        },
    ),
    "quadratic-plane": (
        2,
        [
            {"i": 1, "j": 2, "exponents": [0, 0], "coefficient": 1.0},
            {"i": 1, "j": 2, "exponents": [2, 0], "coefficient": 1.0},
        ],
        {(0, 1): lambda x: 1.0 + x[0] ** 2},
    ),
    "cubic-generic": (
        3,
        [
            {"i": 1, "j": 2, "exponents": [0, 0, 2], "coefficient": 1.0},
            {"i": 1, "j": 3, "exponents": [1, 1, 0], "coefficient": 1.0},
            {"i": 2, "j": 3, "exponents": [0, 0, 0], "coefficient": 1.0},
            {"i": 2, "j": 3, "exponents": [1, 0, 0], "coefficient": 1.0},
            {"i": 2, "j": 3, "exponents": [0, 3, 0], "coefficient": -0.5},
        ],
        {
            (0, 1): lambda x: x[2] ** 2,
            (0, 2): lambda x: x[0] * x[1],
            (1, 2): lambda x: 1.0 + x[0] - 0.5 * x[1] ** 3,
        },
    ),
}


@pytest.fixture(params=sorted(POLY_FIXTURES))
def poly_fixture(request):
    n, terms, comps = POLY_FIXTURES[request.param]
    pi = BivectorField.polynomial(terms, n, 3.0, name=request.param)
    return request.param, pi, comps


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)



def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts collected during the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
