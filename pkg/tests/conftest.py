import numpy as np
import pytest


def dense_controlled(n, target, controls, u2):
    """Full 2**n x 2**n matrix of a controlled single-qubit gate, built from projectors.

    Independent of the engine: uses Kronecker products over qubits
    ordered MSB first, with qubit q = bit q of the basis index.
    """
    P = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    I2 = np.eye(2)

    def kron_all(ops):
        out = np.eye(1)
        for q in reversed(range(n)):
            out = np.kron(out, ops.get(q, I2))
        return out

    ctrl = {q: P[b] for q, b in controls}
    on = kron_all({**ctrl, target: u2})
    proj = kron_all(ctrl)
    return on + (np.eye(1 << n) - proj)


def random_state(rng, dim, batch=None):
    shape = (dim,) if batch is None else (batch, dim)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance reporting: one PASS/FAIL line per criterion ----

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when == "teardown" and report.passed:
        return
    if report.when == "call" or report.failed:
        num, title = mark.args
        notes = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _CRITERIA[num] = (title, "PASS" if report.passed else "FAIL", notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status, notes = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num} {status}: {title}" + (f" [{notes}]" if notes else ""))
