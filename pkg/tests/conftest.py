import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_spec(rng, K=None, d=None, max_condition=50.0):
    """Random valid SBM with a well-conditioned second-moment matrix."""
    from rdpg_onestep.model import SbmSpec

    K = K or int(rng.integers(2, 6))
    d = d or int(rng.integers(1, min(K, 3) + 1))
    while True:
        nu = rng.uniform(0.05, 1.0, size=(K, d))
        nu *= rng.uniform(0.2, 0.95, size=(K, 1)) / np.linalg.norm(nu, axis=1, keepdims=True)
        pi = rng.dirichlet(np.ones(K) * 2.0)
        pi[-1] = 1.0 - pi[:-1].sum()
        if np.linalg.cond((nu.T * pi) @ nu) < max_condition:
            break
    return SbmSpec(nu=nu, pi=pi, rho=float(rng.uniform(0.1, 1.0)))


def random_point(rng, d):
    x = rng.uniform(0.05, 1.0, size=d)
    return x * rng.uniform(0.2, 0.95) / np.linalg.norm(x)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
