import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def central_difference(f, x, idx=None, step=1e-5):
    """Central finite differences of scalar ``f`` at ``x`` (copied, float64).

    ``idx`` restricts the estimate to a subset of flat indices.
    """
    x = np.array(x, dtype=np.float64)
    flat = x.ravel()
    idx = range(flat.size) if idx is None else idx
    out = []
    for i in idx:
        old = flat[i]
        flat[i] = old + step
        fp = f(x)
        flat[i] = old - step
        fm = f(x)
        flat[i] = old
        out.append((fp - fm) / (2 * step))
    return np.array(out)


def relative_error(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
