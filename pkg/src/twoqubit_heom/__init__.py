"""Exact and RWA dynamics of two-qubit quantum correlations in Lorentzian bosonic baths."""

from .operators import kron, partial_trace, hermitian_eig, psd_sqrt
from .model import (
    BathSpec,
    SystemSpec,
    InitialStateSpec,
    build_initial,
    spectral_density,
    bath_correlation,
    system_hamiltonian,
    coupling_operators,
)
from .measures import (
    entropy,
    mutual_information,
    conditional_ensemble,
    classical_correlation,
    discord,
    concurrence,
    concurrence_x,
)

__version__ = "0.1.0"
