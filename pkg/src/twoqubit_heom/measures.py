"""
Entropic and entanglement measures of two-qubit states.

Entropies use the natural logarithm (nats) unless ``base=2`` is requested.
Discord is computed with projective measurements on qubit B: a
deterministic 64 x 64 grid over the Bloch angles followed by Nelder-Mead
refinement from the three best grid points.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import validate_density_matrix
from .operators import SIGMA_Y, clamp_eigenvalues, hermitian_eig, kron, partial_trace

GRID_SIZE = 64
N_STARTS = 3
PROB_FLOOR = 1e-12
SIMPLEX_TOL = 1e-9

# integrated states carry small drift; accept what the solvers accept
STATE_TOL = dict(hermitian_tol=1e-8, trace_tol=1e-6, negative_tol=1e-6)

_SYSY = kron(SIGMA_Y, SIGMA_Y)


def _log(x, base):
    return np.log(x) if base is None else np.log(x) / np.log(base)


def entropy(rho, base=None):
    """Von Neumann entropy ``-sum l ln l`` with ``0 ln 0 = 0``."""
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho) - 1) > STATE_TOL["trace_tol"]:
        raise ValueError("entropy expects a unit-trace density matrix")
    w = clamp_eigenvalues(hermitian_eig(rho, tol=1e-8).eigenvalues, negative_tol=STATE_TOL["negative_tol"])
    w = w[w > 0]
    return float(-np.sum(w * _log(w, base)))


def mutual_information(rho, base=None):
    rho = validate_density_matrix(rho, **STATE_TOL)
    return (entropy(partial_trace(rho, "A"), base) + entropy(partial_trace(rho, "B"), base)
            - entropy(rho, base))


@dataclass(frozen=True)
class MeasurementProjector:
    """Rank-1 projectors on ``|n> = cos(theta/2)|1> + e^{i phi} sin(theta/2)|0>`` and its complement."""

    theta: float
    phi: float

    @property
    def vector(self):
        return np.array([np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)])

    @property
    def projectors(self):
        n = self.vector
        plus = np.outer(n, n.conj())
        return plus, np.eye(2) - plus


def conditional_ensemble(rho, m):
    """
    Post-measurement ensemble ``[(p_k, rho_k), ...]`` after measuring qubit B.

    ``rho_k`` is the full 4x4 conditional state; branches with
    ``p_k < 1e-12`` are dropped.
    """
    rho = validate_density_matrix(rho, **STATE_TOL)
    out = []
    for proj in m.projectors:
        big = kron(np.eye(2), proj)
        p = float(np.real(np.trace(big @ rho)))
        if p < PROB_FLOOR:
            continue
        out.append((p, big @ rho @ big / p))
    return out


def _bloch_vectors(theta, phi):
    return np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)


def _h2(sigma_tr, sigma_det):
    """Unnormalised-branch contribution ``p * S(sigma / p)`` for a 2x2 PSD ``sigma``."""
    p = np.maximum(sigma_tr, 0.0)
    safe = np.where(p > PROB_FLOOR, p, 1.0)
    disc = np.sqrt(np.maximum(0.25 - np.maximum(sigma_det, 0.0) / safe**2, 0.0))
    out = np.zeros_like(p)
    for lam in (0.5 + disc, 0.5 - disc):
        lam = np.clip(lam, 0.0, 1.0)
        out -= np.where(lam > 0, lam * np.log(np.where(lam > 0, lam, 1.0)), 0.0)
    return np.where(p > PROB_FLOOR, p * out, 0.0)


def _conditional_entropy_fn(rho):
    """Vectorised ``sum_k p_k S(rho_k)`` over arrays of Bloch angles."""
    r = rho.reshape(2, 2, 2, 2)  # r[a, b, a', b']
    rho_a = np.einsum("ajbj->ab", r)
    blocks = np.einsum("abcd->bdac", r)  # blocks[b, b'] = r[:, b, :, b']

    def fn(theta, phi):
        c, s = _bloch_vectors(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
        n = (c, s)
        # sigma_+ = Tr_B[(I (x) |n><n|) rho] = sum_{b, b'} <b'|n><n|b> r[:, b, :, b']
        sig = sum(n[bp][..., None, None] * np.conj(n[b])[..., None, None] * blocks[b, bp]
                  for b in range(2) for bp in range(2))
        t_plus = (sig[..., 0, 0] + sig[..., 1, 1]).real
        d_plus = (sig[..., 0, 0] * sig[..., 1, 1] - sig[..., 0, 1] * sig[..., 1, 0]).real
        m00, m11 = rho_a[0, 0] - sig[..., 0, 0], rho_a[1, 1] - sig[..., 1, 1]
        m01, m10 = rho_a[0, 1] - sig[..., 0, 1], rho_a[1, 0] - sig[..., 1, 0]
        t_minus = (m00 + m11).real
        d_minus = (m00 * m11 - m01 * m10).real
        return _h2(t_plus, d_plus) + _h2(t_minus, d_minus)

    return fn


def _branch_entropy(tr, det):
    if tr <= PROB_FLOOR:
        return 0.0
    half = math.sqrt(max(0.25 - max(det, 0.0) / (tr * tr), 0.0))
    out = 0.0
    for lam in (0.5 + half, 0.5 - half):
        if lam > 0:
            out -= lam * math.log(lam)
    return tr * out


def _conditional_entropy_scalar(rho):
    """Scalar twin of :func:`_conditional_entropy_fn` for the simplex search."""
    r = rho.reshape(2, 2, 2, 2)
    a00, a01, a10, a11 = (complex(x) for x in np.einsum("ajbj->ab", r).ravel())
    blk = [[[complex(x) for x in r[:, b, :, bp].ravel()] for bp in range(2)] for b in range(2)]

    def fn(x):
        theta, phi = x
        n0 = math.cos(theta / 2)
        n1 = cmath.exp(1j * phi) * math.sin(theta / 2)
        n = (n0, n1)
        s = [0j, 0j, 0j, 0j]
        for b in range(2):
            nb = n[b].conjugate()
            for bp in range(2):
                w = n[bp] * nb
                e = blk[b][bp]
                s[0] += w * e[0]
                s[1] += w * e[1]
                s[2] += w * e[2]
                s[3] += w * e[3]
        m = (a00 - s[0], a01 - s[1], a10 - s[2], a11 - s[3])
        return (_branch_entropy((s[0] + s[3]).real, (s[0] * s[3] - s[1] * s[2]).real)
                + _branch_entropy((m[0] + m[3]).real, (m[0] * m[3] - m[1] * m[2]).real))

    return fn


def classical_correlation(rho, grid=GRID_SIZE, n_starts=N_STARTS):
    """
    ``J = max over measurements on B of S(rho_A) - sum_k p_k S(rho_k)``.

    Returns
    -------
    J : float
        In nats.
    angles : tuple of float
        ``(theta, phi)`` of the optimal projector.
    """
    rho = validate_density_matrix(rho, **STATE_TOL)
    fn = _conditional_entropy_fn(rho)
    scalar = _conditional_entropy_scalar(rho)
    s_a = entropy(partial_trace(rho, "A"))

    thetas = np.linspace(0.0, np.pi, grid)
    phis = np.arange(grid) * (2 * np.pi / grid)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vals = fn(tt, pp)
    flat = np.argsort(vals, axis=None, kind="stable")[:n_starts]

    best_val = vals.flat[flat[0]]
    best = (float(tt.flat[flat[0]]), float(pp.flat[flat[0]]))
    for f in flat:
        x0 = np.array([tt.flat[f], pp.flat[f]])
        res = minimize(scalar, x0, method="Nelder-Mead",
                       options={"xatol": 1e-4, "fatol": SIMPLEX_TOL, "maxiter": 2000,
                                "initial_simplex": [x0, x0 + [0.05, 0.0], x0 + [0.0, 0.05]]})
        if res.fun < best_val:
            best_val, best = float(res.fun), (float(res.x[0]), float(res.x[1]))
    theta, phi = best
    # fold the angles back into theta in [0, pi], phi in [0, 2 pi)
    theta = float(np.mod(theta, 2 * np.pi))
    if theta > np.pi:
        theta, phi = 2 * np.pi - theta, phi + np.pi
    return s_a - float(best_val), (theta, float(np.mod(phi, 2 * np.pi)))


@dataclass(frozen=True)
class DiscordResult:
    discord: float
    classical_correlation: float
    mutual_information: float
    optimal_angles: tuple


def discord(rho, base=None):
    """Quantum discord ``I(rho) - J(rho)`` with the measurement on qubit B."""
    i = mutual_information(rho)
    j, angles = classical_correlation(rho)
    scale = 1.0 if base is None else 1.0 / np.log(base)
    return DiscordResult((i - j) * scale, j * scale, i * scale, angles)


def concurrence(rho):
    """
    Wootters concurrence.

    Uses the eigenvalues of the Hermitian ``sqrt(rho) rho~ sqrt(rho)`` with
    ``rho~ = (sy (x) sy) rho* (sy (x) sy)``.
    """
    rho = validate_density_matrix(rho, **STATE_TOL)
    w, v = hermitian_eig(rho, tol=1e-8)
    root = (v * np.sqrt(clamp_eigenvalues(w, negative_tol=1e-6))) @ v.conj().T
    tilde = _SYSY @ rho.conj() @ _SYSY
    m = root @ tilde @ root
    mu = clamp_eigenvalues(hermitian_eig(m, tol=1e-8).eigenvalues, negative_tol=1e-6)[::-1]
    s = np.sqrt(mu)
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def concurrence_x(rho):
    """Closed-form concurrence of an X-shaped state."""
    rho = np.asarray(rho)
    d = rho.diagonal().real.clip(min=0)
    return float(2 * max(0.0, abs(rho[1, 2]) - np.sqrt(d[0] * d[3]), abs(rho[0, 3]) - np.sqrt(d[1] * d[2])))


def is_x_state(rho, tol=1e-10):
    mask = np.ones((4, 4), dtype=bool)
    mask[np.arange(4), np.arange(4)] = False
    mask[np.arange(4), 3 - np.arange(4)] = False
    return bool(np.all(np.abs(np.asarray(rho)[mask]) <= tol))
