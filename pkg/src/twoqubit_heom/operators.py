"""
Small dense complex linear algebra shared by every solver.

Two-qubit basis order throughout the package is |11>, |10>, |01>, |00>,
i.e. the single-qubit basis is (|1>, |0>) with |1> the excited level and
qubit A the left tensor factor.
"""

import numpy as np

HERMITIAN_TOL = 1e-10
NEGATIVE_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# raising operator |1><0| in the (|1>, |0>) ordering
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T


class HermitianEigenDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""

    __slots__ = ("eigenvalues", "eigenvectors")

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def __iter__(self):
        yield self.eigenvalues
        yield self.eigenvectors

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def kron(a, b):
    """Kronecker product ``a (x) b``; the left factor is the slow index."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def hermiticity_defect(h):
    h = np.asarray(h)
    return float(np.max(np.abs(h - dag(h)))) if h.size else 0.0


def partial_trace(rho, keep):
    """
    Reduce a two-qubit operator to one qubit.

    Parameters
    ----------
    rho : array_like, shape (4, 4)
    keep : {"A", "B"}
        The subsystem that survives; the other one is traced out.

    Returns
    -------
    ndarray, shape (2, 2)
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"partial_trace expects a 4x4 matrix, got shape {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ajbj->ab", r)
    if keep == "B":
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def hermitian_eig(h, tol=HERMITIAN_TOL):
    """
    Eigen-decomposition of a Hermitian matrix.

    The input is symmetrised before diagonalisation so the result is
    deterministic for inputs that carry round-off anti-Hermitian noise.
    Raises ``ValueError`` when ``max|h - h^dag|`` exceeds ``tol``.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    defect = hermiticity_defect(h)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian (max|h - h^dag| = {defect:.3e})")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return HermitianEigenDecomposition(w, v)


def clamp_eigenvalues(w, negative_tol=NEGATIVE_TOL):
    """Zero out tiny negative eigenvalues; reject materially negative ones."""
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -negative_tol:
        raise ValueError(f"matrix has a materially negative eigenvalue {w.min():.3e}")
    return np.clip(w, 0.0, None)


def psd_sqrt(rho):
    """Hermitian positive square root; eigenvalues above -1e-10 are clamped to 0."""
    w, v = hermitian_eig(rho)
    w = clamp_eigenvalues(w)
    return (v * np.sqrt(w)) @ v.conj().T
