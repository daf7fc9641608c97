import numpy as np
import pytest

from rcslab import circuit as cc
from rcslab.ensembles import sample_haar_circuit
from rcslab.rng import task_rng

# Fixed once for every seeded test in the suite.
MASTER_SEED = 20261015

_acceptance_lines = {}


@pytest.fixture
def record():
    """Register one acceptance line: ``record(label, passed, detail)``."""

    def _record(label, passed, detail):
        _acceptance_lines[label] = (bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance")
    for label in sorted(_acceptance_lines):
        passed, detail = _acceptance_lines[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def rng(request):
    return task_rng(MASTER_SEED, request.node.nodeid)


def random_circuit(n, m, seed):
    rng = np.random.default_rng(seed)
    return sample_haar_circuit(cc.random_architecture(n, m, rng), rng)
