import sys

import numpy as np
import pytest

from wightrec.testfn import GaussPolyFn


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def gauss1(center=0.0, a=1.0, coeffs=(1.0,), powers=((0,),)):
    """exp(-a (z - center)^2) times a polynomial in one variable."""
    return GaussPolyFn(list(coeffs), np.array(powers), [[a]], [center], block=1)


def random_fn(rng, dim, block=2, terms=2, max_pow=2):
    m = rng.normal(size=(dim, dim))
    quad = m @ m.T / dim + 0.6 * np.eye(dim) + 0.15j * (lambda s: s + s.T)(rng.normal(size=(dim, dim)))
    center = rng.normal(size=dim) + 0.3j * rng.normal(size=dim)
    coeffs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    powers = rng.integers(0, max_pow + 1, size=(terms, dim))
    return GaussPolyFn(coeffs, powers, quad, center, block=block)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
