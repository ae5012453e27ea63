"""Variable-density and Markov-chain k-space sampling for compressed sensing.

The package designs sampling schemes (iid draws from a sup-norm density or
continuous random walks mixed with jumps), reconstructs images by
equality-constrained l1 minimization, and checks the concentration and
recovery guarantees numerically.
"""

from ._errors import (
    CapacityError,
    DimensionError,
    GridIndexError,
    MarkovCSError,
    NotFittedError,
    NumericalError,
    UnsupportedError,
    ValidationError,
)
from .chains import (
    GridGraph,
    TransitionKernel,
    Trajectory,
    build_metropolis,
    iid_kernel,
    mix_kernel,
    simulate,
    simulate_second_order,
    spectral_gap,
    stationary_residual,
)
from .density import Density, compute_density, sample_iid
from .estimators import L1Reconstructor, MarkovChainSampler, VariableDensitySampler
from .recon import ReconProblem, ReconResult, douglas_rachford, project_affine, psnr, soft_threshold
from .schemes import SamplingScheme, generate_until, scheme_from_trajectory
from .transforms import MeasurementSystem, WaveletSpec, dft2, dwt2, idft2, idwt2

__version__ = "0.1.0"
