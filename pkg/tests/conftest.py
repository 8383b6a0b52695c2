import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fpulab", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fpulab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = pytest.StashKey[list]()


class CriterionLog:
    """Collects named checks for one acceptance criterion and prints a single verdict line."""

    def __init__(self, store):
        self.store = store
        self.line = None

    def record(self, number, title, checks):
        ok = all(c[1] for c in checks)
        detail = "; ".join(f"{label}: {value} [{'ok' if good else 'FAIL'}]" for label, good, value in checks)
        self.line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
        self.store.append(self.line)
        print("\n" + self.line)
        return ok


@pytest.fixture
def criterion(request):
    store = request.config.stash.setdefault(_CRITERIA, [])
    log = CriterionLog(store)
    yield log
    if log.line is None:
        store.append(f"criterion in {request.node.name} FAIL  (did not complete)")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
