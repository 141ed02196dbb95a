import numpy as np
import pytest
from hypothesis import settings

from diverse_nystrom.kernel import gram

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# Four points used by the frozen high-precision oracle values below.
ORACLE_X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
ORACLE_SIGMA = 1.5
ORACLE_ALPHA = 0.3


@pytest.fixture
def oracle_kernel():
    return gram(ORACLE_X, ORACLE_SIGMA)


def random_kernel(n, seed=0, d=3, sigma=1.0):
    rng = np.random.default_rng(seed)
    return gram(rng.random((n, d)), sigma)


@pytest.fixture
def kernel8():
    return random_kernel(8, seed=3)


# One summary line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    """Test-filled record ``{number, title, detail}`` reported as a PASS/FAIL line."""
    rec = {"number": 0, "title": request.node.name, "detail": ""}
    yield rec
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    line = f"criterion {rec['number']:>2} {status}  {rec['title']}: {rec['detail']}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
