"""Metaplectic operators, Gabor matrices and Schrodinger propagators on a periodized grid."""

from .lattice import (
    ConfigurationError,
    PhaseSpaceGrid,
    WeightSpec,
    make_grid,
    gaussian_window,
    hermite_window,
    stft,
    reconstruct,
    modulation_norm,
)
from .symplectic import (
    NotSymplecticError,
    SingularBlockError,
    QuadraticHamiltonian,
    flow,
    generator_factorization,
    phase_function,
    validate_symplectic,
)
from .weyl import (
    SymbolGrid,
    OperatorMatrix,
    weyl_quantize,
    kn_quantize,
    weyl_to_kn,
    sjostrand_norm,
    controlling_function,
)

__version__ = "0.1.0"
