"""
Hierarchy equations of motion for two qubits in Lorentzian baths.

Each Lorentzian bath contributes two exponential "modes" to the hierarchy
(one per exponent ``gamma +/- i omega_c``).  An auxiliary density operator
(ADO) is labelled by a multi-index of occupation numbers, one per mode:
``(n1, n2, m1, m2)`` for two independent baths and ``(n1, n2)`` for a
common bath.  The all-zero index is the physical reduced density matrix.

All multi-indices with total depth ``<= N`` are enumerated once together
with neighbour tables for ``index +/- e_j``.  Neighbours that fall outside
the truncated simplex point to a padding slot that is held at zero, which
realises the hard zero terminator.  The tables drive a reference
right-hand side and are also assembled into one sparse generator acting on
the stacked ADO vector, which is what the integrator uses.
"""

import itertools
import time as _time
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

from .model import BathSpec, SystemSpec, coupling_operators, system_hamiltonian
from .operators import dag, hermiticity_defect

MODES_PER_BATH = 2
TRACE_TOL = 1e-6
HERMITIAN_TOL = 1e-8
NEGATIVE_TOL = 1e-6


class DriftError(RuntimeError):
    """Integration left the physical state space beyond tolerance."""


class ConvergenceError(RuntimeError):
    pass


def n_modes(topology):
    if topology == "independent":
        return 2 * MODES_PER_BATH
    if topology == "common":
        return MODES_PER_BATH
    raise ValueError(f"unknown topology {topology!r}")


def enumerate_ados(topology, depth):
    """
    All multi-indices with component sum ``<= depth`` in lexicographic order.

    The count is ``C(depth + 4, 4)`` for independent baths and
    ``C(depth + 2, 2)`` for a common bath.
    """
    if depth < 1:
        raise ValueError(f"hierarchy depth must be >= 1, got {depth}")
    d = n_modes(topology)
    return [idx for idx in itertools.product(range(depth + 1), repeat=d) if sum(idx) <= depth]


def ado_count(topology, depth):
    d = n_modes(topology)
    return comb(depth + d, d)


@dataclass
class IndexTable:
    topology: str
    depth: int
    indices: np.ndarray
    slots: dict
    plus: np.ndarray
    minus: np.ndarray

    @classmethod
    def build(cls, topology, depth):
        indices = enumerate_ados(topology, depth)
        slots = {idx: s for s, idx in enumerate(indices)}
        pad = len(indices)
        d = n_modes(topology)
        plus = np.full((pad, d), pad, dtype=np.intp)
        minus = np.full((pad, d), pad, dtype=np.intp)
        for s, idx in enumerate(indices):
            for j in range(d):
                up = idx[:j] + (idx[j] + 1,) + idx[j + 1:]
                plus[s, j] = slots.get(up, pad)
                if idx[j] > 0:
                    minus[s, j] = slots[idx[:j] + (idx[j] - 1,) + idx[j + 1:]]
        return cls(topology, depth, np.array(indices, dtype=np.intp).reshape(pad, d), slots, plus, minus)

    def __len__(self):
        return len(self.indices)

    def conjugate_partner(self):
        """Slot of the index with each bath's two occupations swapped."""
        swapped = self.indices.reshape(len(self), -1, MODES_PER_BATH)[:, :, ::-1].reshape(len(self), -1)
        return np.array([self.slots[tuple(row)] for row in swapped], dtype=np.intp)


@dataclass
class Mode:
    """
    One exponential term of a bath correlation function.

    Contributes ``raise_coef * [Q, rho_{n+e}]`` and
    ``n * (lower_left * Q rho_{n-e} + lower_right * rho_{n-e} Q)`` to the
    equation for ``rho_n``, and damps ``rho_n`` at rate ``n * nu``.
    """

    op: np.ndarray
    nu: complex
    raise_coef: complex
    lower_left: complex
    lower_right: complex


@dataclass
class HierarchyState:
    table: IndexTable
    ados: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, table, rho0):
        ados = np.zeros((len(table), 4, 4), dtype=complex)
        ados[0] = rho0
        return cls(table, ados, 0.0)

    @property
    def rho(self):
        return self.ados[0]


def independent_modes(system, baths):
    """Modes of two independent baths coupled through ``sx (x) I`` and ``I (x) sx``."""
    bath_a, bath_b = _pair(baths)
    modes = []
    for q, bath in zip(coupling_operators("independent"), (bath_a, bath_b)):
        half = bath.lam * bath.gamma / 4
        for k, nu in ((1, bath.nu_plus), (2, bath.nu_minus)):
            # (lam gamma / 4) n_k [Q^o + (-1)^(k+1) Q^x] rho_{n-e_k}
            sign = (-1) ** (k + 1)
            modes.append(Mode(q, nu, (-1) ** k, half * (1 + sign), half * (1 - sign)))
    return modes


def common_modes(system, bath, coupling=None):
    """
    Modes of a single bath coupled through ``V = sx (x) I + I (x) sx``.

    Index ``n1`` carries the conjugate correlation ``C*(t)`` (rate
    ``gamma - i omega_c``) and ``n2`` carries ``C(t)``.
    """
    v = coupling_operators("common")[0] if coupling is None else np.asarray(coupling, dtype=complex)
    half = bath.lam * bath.gamma / 4
    modes = []
    for k, nu in ((1, bath.nu_minus), (2, bath.nu_plus)):
        # -(i gamma lam / 4) n_k [V^x + (-1)^k V^o] rho_{n-e_k}
        sign = (-1) ** k
        modes.append(Mode(v, nu, -1j, -1j * half * (1 + sign), -1j * half * (sign - 1)))
    return modes


def _pair(baths):
    if isinstance(baths, BathSpec):
        return baths, baths
    bath_a, bath_b = baths
    return bath_a, bath_b


class HeomGenerator:
    """
    Linear generator ``d ados / dt = L(ados)`` of a truncated hierarchy.

    Calling the generator applies a sparse matrix acting on the row-major
    stacked ADO vector; :meth:`apply_tables` evaluates the same right-hand
    side directly from the neighbour tables and is kept as a reference.

    Parameters
    ----------
    table : IndexTable
    system : SystemSpec
    baths : BathSpec or pair of BathSpec
        A pair (A, B) for independent baths, one bath for the common case.
    coupling : array, optional
        Override of the common-bath coupling operator ``V``.
    """

    def __init__(self, table, system, baths, coupling=None):
        self.table = table
        self.hamiltonian = system_hamiltonian(system)
        if table.topology == "independent":
            self.modes = independent_modes(system, baths)
        else:
            if not isinstance(baths, BathSpec):
                raise ValueError("common topology takes a single BathSpec")
            self.modes = common_modes(system, baths, coupling)
        if len(self.modes) != table.indices.shape[1]:
            raise ValueError("index table does not match the number of bath modes")
        nus = np.array([m.nu for m in self.modes])
        self.damping = table.indices @ nus
        self._depth_n = [table.indices[:, j].astype(float)[:, None, None] for j in range(len(self.modes))]
        self.matrix = self._build_sparse()

    @property
    def shape(self):
        return (len(self.table), 4, 4)

    def _build_sparse(self):
        m = len(self.table)
        eye = sp.identity(4, format="csr")
        left = lambda a: sp.kron(sp.csr_matrix(a), eye)
        right = lambda a: sp.kron(eye, sp.csr_matrix(a.T))
        h = self.hamiltonian
        total = sp.kron(sp.diags(-self.damping), sp.identity(16)) + sp.kron(
            sp.identity(m), -1j * (left(h) - right(h)))
        slots = np.arange(m)
        for j, mode in enumerate(self.modes):
            q = mode.op
            target = self.table.plus[:, j]
            ok = target < m
            hop = sp.csr_matrix((np.ones(ok.sum()), (slots[ok], target[ok])), shape=(m, m))
            total = total + sp.kron(hop, mode.raise_coef * (left(q) - right(q)))
            target = self.table.minus[:, j]
            ok = target < m
            hop = sp.csr_matrix((self.table.indices[ok, j].astype(float), (slots[ok], target[ok])),
                                shape=(m, m))
            total = total + sp.kron(hop, mode.lower_left * left(q) + mode.lower_right * right(q))
        total = total.tocsr()
        total.eliminate_zeros()
        return total

    def __call__(self, ados):
        ados = np.asarray(ados)
        if ados.shape != self.shape:
            raise ValueError(
                f"state has {ados.shape[0]} ADOs but the index table has {len(self.table)}")
        return (self.matrix @ ados.reshape(-1)).reshape(self.shape)

    def apply_tables(self, ados):
        """Right-hand side evaluated mode by mode from the neighbour tables."""
        if ados.shape != self.shape:
            raise ValueError(
                f"state has {ados.shape[0]} ADOs but the index table has {len(self.table)}")
        h = self.hamiltonian
        out = -1j * (h @ ados - ados @ h) - self.damping[:, None, None] * ados
        ext = np.concatenate([ados, np.zeros((1, 4, 4), dtype=complex)])
        for j, mode in enumerate(self.modes):
            q = mode.op
            up = ext[self.table.plus[:, j]]
            out += mode.raise_coef * (q @ up - up @ q)
            down = ext[self.table.minus[:, j]] * self._depth_n[j]
            if mode.lower_left != 0:
                out += mode.lower_left * (q @ down)
            if mode.lower_right != 0:
                out += mode.lower_right * (down @ q)
        return out

    def assemble(self):
        """Dense generator on the row-major stacked ADO vector."""
        return self.matrix.toarray()


def rhs_independent(state, system, baths):
    """Time derivative of every ADO for two independent baths."""
    if state.table.topology != "independent":
        raise ValueError("state was enumerated for a common bath")
    return HeomGenerator(state.table, system, baths).apply_tables(state.ados)


def rhs_common(state, system, bath):
    """Time derivative of every ADO for a common bath."""
    if state.table.topology != "common":
        raise ValueError("state was enumerated for independent baths")
    return HeomGenerator(state.table, system, bath).apply_tables(state.ados)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    trace_error: np.ndarray
    hermiticity: np.ndarray
    min_eigenvalue: np.ndarray
    ado_count: int = 0
    depth: int = 0
    dt: float = 0.0
    symmetry_defect: np.ndarray = field(default_factory=lambda: np.zeros(0))


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def steps_between(t_grid, dt):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or abs(t_grid[0]) > 1e-12:
        raise ValueError("t_grid must be a 1-d array starting at 0")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ratio = np.diff(t_grid) / dt
    steps = np.rint(ratio).astype(int)
    if np.any(steps < 1) or np.any(np.abs(ratio - steps) > 1e-6):
        raise ValueError(f"dt={dt} does not divide the t_grid spacing")
    return steps


def check_drift(rho, t, trace_tol=TRACE_TOL, hermitian_tol=HERMITIAN_TOL, negative_tol=NEGATIVE_TOL):
    """Diagnostics ``(trace_error, hermiticity, min_eigenvalue)``; raise on violation."""
    if not np.all(np.isfinite(rho)):
        raise DriftError(f"non-finite state at t={t:.4f}; reduce dt or increase the hierarchy depth")
    tr = abs(np.trace(rho) - 1.0)
    herm = hermiticity_defect(rho)
    wmin = float(np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0])
    if tr > trace_tol or herm > hermitian_tol or wmin < -negative_tol:
        raise DriftError(
            f"drift at t={t:.4f}: trace error {tr:.2e}, hermiticity defect {herm:.2e}, "
            f"min eigenvalue {wmin:.2e}; reduce dt or increase the hierarchy depth")
    return tr, herm, wmin


def integrate(generator, rho0, t_grid, dt=0.01, check=True):
    """
    Fixed-step RK4 over the whole hierarchy.

    Parameters
    ----------
    generator : HeomGenerator
    rho0 : ndarray, shape (4, 4)
        Initial reduced state; every other ADO starts at zero.
    t_grid : array_like
        Ascending sample times beginning at 0; every spacing must be an
        integer multiple of ``dt``.
    dt : float
    check : bool
        Abort with :class:`DriftError` when the sampled state violates the
        trace / Hermiticity / positivity tolerances.

    Returns
    -------
    Trajectory
        The physical ADO sampled on ``t_grid`` plus drift diagnostics.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    steps = steps_between(t_grid, dt)
    table = generator.table
    state = HierarchyState.initial(table, rho0)
    partner = table.conjugate_partner() if table.topology == "independent" else None

    k = len(t_grid)
    states = np.empty((k, 4, 4), dtype=complex)
    diag = np.empty((k, 3))
    sym = np.zeros(k)
    y = state.ados.reshape(-1)
    matrix = generator.matrix
    step = lambda v: matrix @ v

    def record(i, t):
        rho = y[:16].reshape(4, 4)
        states[i] = rho
        if check:
            diag[i] = check_drift(rho, t)
        else:
            diag[i] = (abs(np.trace(rho) - 1), hermiticity_defect(rho),
                       np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0])
        if partner is not None:
            ados = y.reshape(generator.shape)
            sym[i] = np.max(np.abs(ados[partner] - dag(ados)))

    record(0, 0.0)
    for i, n in enumerate(steps, start=1):
        for _ in range(n):
            y = rk4_step(step, y, dt)
        record(i, t_grid[i])
    return Trajectory(t_grid, states, diag[:, 0], diag[:, 1], diag[:, 2],
                      ado_count=len(table), depth=table.depth, dt=dt, symmetry_defect=sym)


def evolve(system, baths, topology, rho0, t_grid, depth, dt=0.01, check=True):
    """Build the hierarchy for ``topology`` and integrate it."""
    table = IndexTable.build(topology, depth)
    return integrate(HeomGenerator(table, system, baths), rho0, t_grid, dt, check=check)


@dataclass
class ConvergenceReport:
    depth: int
    dt: float
    rows: list
    ado_count: int
    trajectory: Trajectory = None


def _observables(traj):
    from .measures import concurrence, discord

    conc = np.array([concurrence(r) for r in traj.states])
    disc = np.array([discord(r).discord for r in traj.states])
    return conc, disc


def converge(system, baths, topology, rho0, t_grid, tol, dt0=0.05, start_depth=1,
             max_depth=40, max_halvings=8, name="scenario"):
    """
    Smallest depth (in steps of 2) and largest dt (halving from ``dt0``)
    for which concurrence and discord change by less than ``tol`` (max over
    ``t_grid``) when going to ``(N + 2, dt / 2)``.

    ``rows`` holds ``(N, dt, max_delta_concurrence, max_delta_discord,
    ado_count, wall_time)`` for every comparison made.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if not np.isfinite(tol):
        return ConvergenceReport(start_depth, dt0, [], ado_count(topology, start_depth))

    cache = {}

    def run(n, dt):
        key = (n, dt)
        if key not in cache:
            t0 = _time.perf_counter()
            try:
                traj = evolve(system, baths, topology, rho0, t_grid, n, dt)
                cache[key] = (traj, _observables(traj), _time.perf_counter() - t0)
            except DriftError:
                cache[key] = None
        return cache[key]

    def delta(a, b):
        return (float(np.max(np.abs(a[1][0] - b[1][0]))), float(np.max(np.abs(a[1][1] - b[1][1]))))

    rows = []
    n, dt, halvings = start_depth, dt0, 0
    while n <= max_depth:
        base = run(n, dt)
        if base is None:
            # a smaller step either cures the drift or the hierarchy is too shallow
            if halvings < max_halvings and run(n, dt / 2) is not None:
                dt, halvings = dt / 2, halvings + 1
            else:
                n += 2
            continue
        finer = run(n + 2, dt / 2)
        if finer is None:
            if halvings < max_halvings and run(n + 2, dt / 4) is not None:
                dt, halvings = dt / 2, halvings + 1
            else:
                n += 2
            continue
        dc, dd = delta(base, finer)
        rows.append((n, dt, dc, dd, base[0].ado_count, base[2] + finer[2]))
        if max(dc, dd) < tol:
            return ConvergenceReport(n, dt, rows, base[0].ado_count, base[0])
        halved = run(n, dt / 2)
        if halved is not None and max(delta(base, halved)) >= tol / 2 and halvings < max_halvings:
            dt, halvings = dt / 2, halvings + 1
        else:
            n += 2
    raise ConvergenceError(f"{name}: no convergence by hierarchy depth {max_depth}")
