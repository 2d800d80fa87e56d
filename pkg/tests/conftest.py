import numpy as np
import pytest

from torus_hopf import LatticeParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_params(rng, N=3, variant="vdp", scale=0.5, **extra):
    d, z, e = rng.uniform(-scale, scale, 3)
    return LatticeParams(N, d, z, e, nu=rng.uniform(0.5, 2.0), a=rng.uniform(-0.3, 0.3),
                         b=rng.uniform(0.5, 2.0), variant=variant, **extra)


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
