"""
Rotating-wave baselines.

* Independent baths: the closed-form X-state propagator driven by the
  single-qubit survival function ``P_t``.
* Common bath: a damped pseudomode that represents the Lorentzian bath
  exactly once counter-rotating terms are dropped.  The two qubits are
  rewritten in the collective basis ``|0> = |00>``, ``|+>``, ``|->``,
  ``|2> = |11>``; the antisymmetric ``|->`` never couples to the mode.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .heom import DriftError, check_drift, rk4_step, steps_between
from .measures import is_x_state
from .model import S00, S01, S10, S11

FOCK_TOL = 1e-6


@dataclass(frozen=True)
class PFunctionParams:
    lam: float
    gamma: float

    @property
    def r(self):
        """``sqrt(lam gamma / 2 - gamma^2 / 4)``; imaginary in the Markovian regime."""
        return np.sqrt(complex(self.lam * self.gamma / 2 - self.gamma**2 / 4))


def _amplitude(t, params):
    """Excited-state amplitude ``e^{-gamma t / 2} [cos(R t) + gamma/(2R) sin(R t)]``."""
    t = np.asarray(t, dtype=float)
    r, g = params.r, params.gamma
    half = 0.5 * g
    if r.imag > 0:
        # Markovian: R = i k, expand cosh/sinh so nothing overflows at large t
        k = r.imag
        x = k * t
        small = np.abs(x) < 1e-4
        ratio = half / k
        wide = (0.5 * (1 + ratio) * np.exp((k - half) * t)
                + 0.5 * (1 - ratio) * np.exp(-(k + half) * t))
        series = np.exp(-half * t) * (1 + 0.5 * x * x + half * t * (1 + x * x / 6))
        return np.where(small, series, wide)
    r = r.real
    x = r * t
    small = np.abs(x) < 1e-4
    # sin(Rt)/R, series near R t = 0
    sinc_t = np.where(small, t * (1 - x * x / 6), np.sin(x) / (r if r else 1.0))
    return np.exp(-half * t) * (np.cos(x) + half * sinc_t)


def p_function(t, params):
    """Single-qubit survival probability ``P_t`` (both regimes, one formula)."""
    a = _amplitude(t, params)
    return np.clip(a * a, 0.0, 1.0)


def p_zero_time(params, n=1):
    """
    Time of the ``n``-th zero of ``P_t`` (non-Markovian regime only).

    Found by bracketing the sign change of the amplitude; the closed form
    is ``(n pi - arctan(2R/gamma)) / R``.
    """
    r = params.r.real
    if params.r.imag != 0 or r == 0:
        raise ValueError("P_t has no zeros in the Markovian regime")
    # the root lies where R t is in ((n - 1/2) pi, n pi)
    lo, hi = (n - 0.5) * np.pi / r, n * np.pi / r
    return brentq(lambda t: float(_amplitude(t, params)), lo, hi, xtol=1e-14, rtol=1e-14)


def rwa_propagate_x(rho0, t, params):
    """
    X-state populations and coherences after time ``t`` (interaction picture).

    Raises ``ValueError`` if ``rho0`` has weight outside the X pattern.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if not is_x_state(rho0):
        raise ValueError("rwa_propagate_x requires an X-shaped initial state")
    p = float(p_function(t, params))
    out = np.zeros((4, 4), dtype=complex)
    r11, r22, r33 = rho0[S11, S11].real, rho0[S10, S10].real, rho0[S01, S01].real
    out[S11, S11] = r11 * p * p
    out[S10, S10] = r22 * p + r11 * p * (1 - p)
    out[S01, S01] = r33 * p + r11 * p * (1 - p)
    out[S00, S00] = 1.0 - (out[S11, S11] + out[S10, S10] + out[S01, S01])
    out[S11, S00] = rho0[S11, S00] * p
    out[S00, S11] = np.conj(out[S11, S00])
    out[S10, S01] = rho0[S10, S01] * p
    out[S01, S10] = np.conj(out[S10, S01])
    return out


def rwa_concurrence_phi(alpha, t, params):
    p = p_function(t, params)
    return np.maximum(0.0, 2 * alpha * np.sqrt(1 - alpha**2) * p)


def rwa_concurrence_psi(alpha, t, params):
    p = p_function(t, params)
    beta = np.sqrt(1 - alpha**2)
    return np.maximum(0.0, 2 * beta * p * (alpha - beta * (1 - p)))


# collective basis (|0>, |+>, |->, |2>) expressed in the two-qubit basis
_S = 1 / np.sqrt(2)
COLLECTIVE = np.zeros((4, 4), dtype=complex)
COLLECTIVE[S00, 0] = 1.0
COLLECTIVE[S10, 1] = COLLECTIVE[S01, 1] = _S
COLLECTIVE[S10, 2], COLLECTIVE[S01, 2] = _S, -_S
COLLECTIVE[S11, 3] = 1.0


def to_collective(rho):
    return COLLECTIVE.conj().T @ rho @ COLLECTIVE


def from_collective(rho):
    return COLLECTIVE @ rho @ COLLECTIVE.conj().T


class PseudomodeModel:
    """
    Lindblad generator for the collective qubit levels plus one damped mode.

    ``d rho/dt = -i[H, rho] - gamma (a+a rho + rho a+a - 2 a rho a+)`` with
    ``H = H0 + omega_c a+a + V`` and
    ``V = sqrt(lam gamma) (a |+><0| + a |2><+| + h.c.)``.
    """

    def __init__(self, bath, n_ph=32, omega_0=1.0):
        self.bath = bath
        self.n_ph = n_ph
        a = sp.diags(np.sqrt(np.arange(1, n_ph)), 1, dtype=complex)
        h0 = sp.diags([-omega_0, 0.0, 0.0, omega_0]).astype(complex)
        up = sp.csr_matrix(([1.0, 1.0], ([1, 3], [0, 1])), shape=(4, 4))  # |+><0| + |2><+|
        g = np.sqrt(bath.lam * bath.gamma)
        v = g * sp.kron(up, a)
        v = v + v.conj().T
        self.a = sp.kron(sp.identity(4), a, format="csr")
        self.number = (self.a.conj().T @ self.a).tocsr()
        self.hamiltonian = (sp.kron(h0, sp.identity(n_ph)) + bath.omega_c * self.number + v).tocsr()
        # -i H_eff rho + i rho H_eff^dag + 2 gamma a rho a^dag
        heff = self.hamiltonian - 1j * bath.gamma * self.number
        eye = sp.identity(4 * n_ph)
        # row-major vec(A rho B) = (A (x) B^T) vec(rho)
        self.liouvillian = (-1j * sp.kron(heff, eye) + 1j * sp.kron(eye, heff.conj())
                            + 2 * bath.gamma * sp.kron(self.a, self.a.conj())).tocsr()

    def __call__(self, rho):
        shape = rho.shape
        return (self.liouvillian @ rho.reshape(-1)).reshape(shape)

    def reduce(self, rho):
        """Trace out the mode and return the qubit state in the two-qubit basis."""
        r = rho.reshape(4, self.n_ph, 4, self.n_ph)
        return from_collective(np.einsum("ikjk->ij", r))

    def top_population(self, rho):
        r = rho.reshape(4, self.n_ph, 4, self.n_ph)
        return float(np.einsum("iNiN->", r[:, -1:, :, -1:]).real)


@dataclass
class PseudomodeTrajectory:
    times: np.ndarray
    states: np.ndarray
    trace_error: np.ndarray
    hermiticity: np.ndarray
    min_eigenvalue: np.ndarray
    top_population: np.ndarray
    n_ph: int


def pseudomode_evolve(rho0, bath, t_grid, n_ph=32, dt=0.01, omega_0=1.0):
    """
    Integrate the pseudomode master equation from ``rho0 (x) |vac><vac|``.

    Returns the reduced two-qubit states sampled on ``t_grid``.  Aborts with
    :class:`DriftError` when the top Fock level holds more than 1e-6.
    """
    model = PseudomodeModel(bath, n_ph, omega_0)
    steps = steps_between(t_grid, dt)
    vac = np.zeros((n_ph, n_ph), dtype=complex)
    vac[0, 0] = 1.0
    rho = np.kron(to_collective(np.asarray(rho0, dtype=complex)), vac)

    k = len(t_grid)
    states = np.empty((k, 4, 4), dtype=complex)
    diag = np.empty((k, 4))

    def record(i, t):
        top = model.top_population(rho)
        if top > FOCK_TOL:
            raise DriftError(f"pseudomode Fock cutoff {n_ph} too small at t={t:.4f} "
                             f"(top level population {top:.2e}); increase n_ph")
        states[i] = model.reduce(rho)
        diag[i, :3] = check_drift(states[i], t)
        diag[i, 3] = top

    record(0, 0.0)
    for i, n in enumerate(steps, start=1):
        for _ in range(n):
            rho = rk4_step(model, rho, dt)
        record(i, t_grid[i])
    return PseudomodeTrajectory(np.asarray(t_grid, dtype=float), states, diag[:, 0], diag[:, 1],
                                diag[:, 2], diag[:, 3], n_ph)
