"""
Two qubits, Lorentzian bosonic baths and the initial states studied with them.

Frequencies are measured in units of the qubit splitting omega_0 and times
in units of 1/omega_0.  Only the zero-temperature bath is modelled.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import I2, SIGMA_X, SIGMA_Z, hermiticity_defect, kron

TOPOLOGIES = ("independent", "common")

DM_HERMITIAN_TOL = 1e-10
DM_TRACE_TOL = 1e-10
DM_NEGATIVE_TOL = 1e-8

# basis slots
S11, S10, S01, S00 = 0, 1, 2, 3


@dataclass(frozen=True)
class BathSpec:
    """
    Lorentzian bath ``J(w) = lam * gamma**2 / (2 pi ((w - omega_c)**2 + gamma**2))``.

    ``lam`` sets the coupling strength and ``gamma`` the spectral half-width
    around the centre ``omega_c``.
    """

    lam: float
    gamma: float
    omega_c: float = 1.0
    topology: str = "independent"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")

    @classmethod
    def from_ratio(cls, lam, f, omega_c=1.0, topology="independent"):
        """Bath with ``gamma = f * lam``."""
        return cls(lam=lam, gamma=f * lam, omega_c=omega_c, topology=topology)

    @property
    def markovian(self):
        return self.gamma / 2 > self.lam

    @property
    def amplitude(self):
        """Zero-time correlation ``C(0) = lam * gamma / 2``."""
        return 0.5 * self.lam * self.gamma

    @property
    def nu_plus(self):
        return self.gamma + 1j * self.omega_c

    @property
    def nu_minus(self):
        return self.gamma - 1j * self.omega_c


@dataclass(frozen=True)
class SystemSpec:
    omega_a: float = 1.0
    omega_b: float = 1.0

    def __post_init__(self):
        if self.omega_a <= 0 or self.omega_b <= 0:
            raise ValueError("qubit frequencies must be positive")


INITIAL_KINDS = ("bell_phi", "bell_psi", "werner_phi", "werner_psi", "custom")


@dataclass(frozen=True)
class InitialStateSpec:
    """
    Initial two-qubit state.

    ``bell_phi``: alpha|10> + sqrt(1-alpha^2)|01>;
    ``bell_psi``: alpha|00> + sqrt(1-alpha^2)|11>;
    ``werner_*``: r |xi><xi| + (1 - r)/4 I with |xi> the matching Bell state;
    ``custom``: an explicit 4x4 density matrix.
    """

    kind: str
    alpha: float = 1 / np.sqrt(2)
    r: float = 1.0
    matrix: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r}")
        if self.kind == "custom" and self.matrix is None:
            raise ValueError("custom initial state requires a matrix")


def validate_density_matrix(rho, hermitian_tol=DM_HERMITIAN_TOL, trace_tol=DM_TRACE_TOL,
                            negative_tol=DM_NEGATIVE_TOL):
    """Return ``rho`` as a complex 4x4 array or raise ``ValueError``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got shape {rho.shape}")
    defect = hermiticity_defect(rho)
    if defect > hermitian_tol:
        raise ValueError(f"density matrix is not Hermitian (defect {defect:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace is {tr.real:.12f}, expected 1")
    wmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if wmin < -negative_tol:
        raise ValueError(f"density matrix has negative eigenvalue {wmin:.3e}")
    return rho


def bell_vector(kind, alpha):
    beta = np.sqrt(max(0.0, 1.0 - alpha * alpha))
    psi = np.zeros(4, dtype=complex)
    if kind.endswith("phi"):
        psi[S10], psi[S01] = alpha, beta
    else:
        psi[S00], psi[S11] = alpha, beta
    return psi


def build_initial(state):
    """Density matrix for an :class:`InitialStateSpec`."""
    if state.kind == "custom":
        return validate_density_matrix(state.matrix)
    psi = bell_vector(state.kind, state.alpha)
    rho = np.outer(psi, psi.conj())
    if state.kind.startswith("werner"):
        rho = state.r * rho + (1 - state.r) / 4 * np.eye(4)
    return validate_density_matrix(rho)


def spectral_density(omega, bath):
    return bath.lam * bath.gamma**2 / (2 * np.pi * ((omega - bath.omega_c) ** 2 + bath.gamma**2))


def bath_correlation(t, bath):
    """Zero-temperature correlation ``(lam gamma / 2) exp(-(gamma + i omega_c) t)``."""
    return bath.amplitude * np.exp(-(bath.gamma + 1j * bath.omega_c) * np.asarray(t))


def system_hamiltonian(system):
    return 0.5 * system.omega_a * kron(SIGMA_Z, I2) + 0.5 * system.omega_b * kron(I2, SIGMA_Z)


def coupling_operators(topology):
    """``[sx (x) I, I (x) sx]`` for independent baths, ``[sx (x) I + I (x) sx]`` for a common one."""
    qa = kron(SIGMA_X, I2)
    qb = kron(I2, SIGMA_X)
    if topology == "independent":
        return [qa, qb]
    if topology == "common":
        return [qa + qb]
    raise ValueError(f"unknown topology {topology!r}")
