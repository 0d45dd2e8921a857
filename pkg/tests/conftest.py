import numpy as np
import pytest


def random_density(rng, dim=4, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(rng, dim=4):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_x_state(rng):
    """Random valid X-shaped density matrix."""
    p = rng.dirichlet(np.ones(4))
    rho = np.diag(p).astype(complex)
    # coherences bounded by the positivity conditions
    c1 = rng.uniform(0, 1) * np.sqrt(p[0] * p[3]) * np.exp(2j * np.pi * rng.uniform())
    c2 = rng.uniform(0, 1) * np.sqrt(p[1] * p[2]) * np.exp(2j * np.pi * rng.uniform())
    rho[0, 3], rho[3, 0] = c1, np.conj(c1)
    rho[1, 2], rho[2, 1] = c2, np.conj(c2)
    return rho


def random_unitary(rng, dim=2):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, printed after the run
CRITERIA = {}


def record_criterion(number, ok, detail):
    CRITERIA[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
