import pytest

from sinrconnect.model import Instance, Link, ModelParams


@pytest.fixture
def params():
    return ModelParams()


def mklink(s, r, sp, rp):
    return Link(s, r, tuple(map(float, sp)), tuple(map(float, rp)))


@pytest.fixture
def far_pair():
    """Two unit links 100 apart: feasible under any sensible power."""
    return [mklink(0, 1, (0, 0), (1, 0)), mklink(2, 3, (100, 0), (101, 0))]


@pytest.fixture
def conflict_pair():
    """Second sender sits 0.5 from the first receiver, so affectance is capped."""
    return [mklink(0, 1, (0, 0), (1, 0)), mklink(2, 3, (1.5, 0), (0.5, 0))]


@pytest.fixture
def grid4():
    xy = [(x, y) for y in range(4) for x in range(4)]
    return Instance(range(16), xy)


# Acceptance criteria append "PASS/FAIL <id> <detail>" lines here; they are
# printed in the terminal summary so they show up even when output is captured.
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
