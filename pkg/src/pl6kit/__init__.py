"""Numerical workbench for the PL6 spin-photon interface in 4H-SiC.

Submodules: ``finestructure`` (excited-state levels under strain),
``dynamics`` (Lindblad and rate-equation simulation), ``fitting`` (curve
models and least squares), ``inference`` (global Bayesian fit of the
fine-structure parameters) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, InputError, NumericalError, Pl6Error  # noqa: F401
from .finestructure import (  # noqa: F401
    DEFAULT_PARAMS,
    FineStructureParams,
    StrainVector,
    build_es_hamiltonian,
    build_gs_hamiltonian,
    classify_levels,
    diagonalize,
    levels_at,
    strain_sweep,
    transition_table,
)
