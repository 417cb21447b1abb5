import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "povmkit",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("povmkit")

seeds = st.integers(min_value=0, max_value=2**32 - 1)

# one line per acceptance criterion, printed at the end of the run
_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "acceptance" not in report.keywords:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2


def random_psd(rng, d, rank=None):
    r = d if rank is None else rank
    w = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    return w @ w.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def feasible_ranks(rng, d, n):
    """Random effect ranks in 1..d summing to at least d."""
    ranks = rng.integers(1, d + 1, size=n)
    while ranks.sum() < d:
        k = rng.integers(n)
        ranks[k] = min(d, ranks[k] + 1)
    return [int(r) for r in ranks]
