"""Two-level atoms in a standing-wave laser field: SU(2) group-parameter dynamics,
chaos diagnostics, regime classification and Monte Carlo ensembles."""

__version__ = "0.1.0"

from . import _kernels
from .chaos import ChaosMap, LyapunovOptions, LyapunovResult, lyapunov_map, max_lyapunov, predictability_time
from .dynamics import (AtomState, ConstantField, GaussianField, IntegratorOptions, SimParams,
                       Trajectory, energy, integrate)
from .ensemble import EnsembleSpec, PhysicalSetup, histogram, normalize_physical, run_ensemble
from .errors import (AtomSimError, DomainError, IntegrationError, NumericalError,
                     ParameterizationError)
from .regimes import Regime, TrajectoryFeatures, classify, extract_features
from .su2 import GroupPair, representation_matrix, solve_two_level

KERNEL = _kernels.IMPLEMENTATION
