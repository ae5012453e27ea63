"""scikit-learn style front end.

Samplers are fitted on a measurement system (or just a grid shape), which
fixes the sampling density and, for chains, the transition kernel; they
then produce trajectories and schemes for any seed. The reconstructor is
fitted on ``(system, measurements)``. All of them support
``get_params``/``set_params``/``clone`` through :class:`BaseEstimator`.
"""

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_positive_int, check_unit_interval
from .chains import (
    ChainWalker,
    GridGraph,
    Trajectory,
    build_metropolis,
    iid_kernel,
    mix_kernel,
    simulate,
    simulate_second_order,
    spectral_gap,
)
from .density import compute_density, sample_iid
from .recon import ReconProblem, douglas_rachford, psnr
from .schemes import generate_until
from .transforms import MeasurementSystem

__all__ = ["VariableDensitySampler", "MarkovChainSampler", "L1Reconstructor"]


def _as_system(X, wavelet):
    if isinstance(X, MeasurementSystem):
        return X if wavelet is None else MeasurementSystem(X.shape, wavelet)
    return MeasurementSystem(tuple(X), wavelet)


class _BaseSampler(BaseEstimator):
    def _fit_density(self, X):
        self.system_ = _as_system(X, self.wavelet)
        self.density_ = compute_density(self.system_, method=self.density_method)
        self.shape_ = self.system_.shape
        return self

    def sample_scheme(self, coverage, seed):
        """Scheme whose distinct sites first reach ``coverage`` of the grid."""
        check_is_fitted(self, "density_")
        return generate_until(self, coverage, seed)


class VariableDensitySampler(_BaseSampler):
    """Independent draws from the sup-norm density.

    Parameters
    ----------
    wavelet : str or WaveletSpec, optional
        ``"family:level"``; defaults to the system's own, or Haar at the
        default depth when fitting on a shape.
    density_method : {"separable", "materialize"}

    Attributes
    ----------
    system_ : MeasurementSystem
    density_ : Density
    """

    def __init__(self, wavelet=None, density_method="separable"):
        self.wavelet = wavelet
        self.density_method = density_method

    def fit(self, X, y=None):
        """Compute the density for ``X`` (a MeasurementSystem or grid shape)."""
        return self._fit_density(X)

    @property
    def descriptor(self):
        return "iid"

    def sample(self, m, seed):
        check_is_fitted(self, "density_")
        m = check_positive_int(m, "m")
        sites = sample_iid(self.density_, m, seed)
        return Trajectory(sites, np.ones(m, dtype=bool), self.shape_, int(seed), "iid", 1.0, 0.0)

    def make_walker(self, seed):
        check_is_fitted(self, "density_")
        return ChainWalker(iid_kernel(self.density_), seed), self.shape_, "iid", 1.0, 0.0


class MarkovChainSampler(_BaseSampler):
    """Continuous trajectories from the mixed Metropolis kernel.

    Parameters
    ----------
    alpha : float in [0, 1]
        Jump probability; ``1`` gives iid sampling, ``0`` a pure walk.
    persistence : float in [0, 1)
        Probability of proposing to continue straight (second-order walk).
    connectivity : {4, 8}
    wavelet, density_method
        As for :class:`VariableDensitySampler`.

    Attributes
    ----------
    graph_ : GridGraph
    kernel_ : TransitionKernel
        The mixed kernel.
    """

    def __init__(self, alpha=0.01, persistence=0.0, connectivity=4, wavelet=None,
                 density_method="separable"):
        self.alpha = alpha
        self.persistence = persistence
        self.connectivity = connectivity
        self.wavelet = wavelet
        self.density_method = density_method

    def fit(self, X, y=None):
        check_unit_interval(self.alpha, "alpha")
        check_unit_interval(self.persistence, "persistence", closed_right=False)
        self._fit_density(X)
        self.graph_ = GridGraph(self.shape_, self.connectivity)
        self.kernel_ = mix_kernel(build_metropolis(self.graph_, self.density_), self.alpha)
        return self

    @property
    def descriptor(self):
        if self.alpha >= 1:
            return "iid"
        if self.persistence > 0:
            return f"second-order(alpha={float(self.alpha)!r}, persistence={float(self.persistence)!r})"
        return f"markov(alpha={float(self.alpha)!r})"

    def spectral_gap(self, **kwargs):
        """Spectral gap of the first-order mixed kernel."""
        check_is_fitted(self, "kernel_")
        return spectral_gap(self.kernel_, **kwargs)

    def sample(self, m, seed):
        check_is_fitted(self, "kernel_")
        if self.persistence > 0:
            return simulate_second_order(self.graph_, self.density_, self.alpha,
                                         self.persistence, m, seed)
        return simulate(self.kernel_, m, seed)

    def make_walker(self, seed):
        check_is_fitted(self, "kernel_")
        walker = ChainWalker(self.kernel_, seed, float(self.persistence))
        return walker, self.shape_, self.descriptor, float(self.alpha), float(self.persistence)


class L1Reconstructor(BaseEstimator):
    """Equality-constrained l1 reconstruction (Douglas-Rachford).

    Parameters
    ----------
    max_iter : int
    tol : float
        Relative change of the iterate below which the solver stops.
    relaxation : float in (0, 2)
    threshold : float, optional
        Soft-threshold level; defaults to ``threshold_scale * max|A^H y|``.
    threshold_scale : float
    peak : float
        Images are clipped to ``[0, peak]``.

    Attributes
    ----------
    coef_ : ndarray
        Complex wavelet coefficients.
    image_ : ndarray
    n_iter_, residual_, objective_, converged_
    """

    def __init__(self, max_iter=500, tol=1e-8, relaxation=1.0, threshold=None,
                 threshold_scale=1e-2, peak=1.0):
        self.max_iter = max_iter
        self.tol = tol
        self.relaxation = relaxation
        self.threshold = threshold
        self.threshold_scale = threshold_scale
        self.peak = peak

    def fit(self, system, y):
        problem = ReconProblem(system, y, self.max_iter, self.threshold, self.threshold_scale,
                               self.relaxation, self.tol, self.peak)
        result = douglas_rachford(problem)
        self.result_ = result
        self.coef_ = result.coefficients
        self.image_ = result.image
        self.n_iter_ = result.iterations
        self.residual_ = result.residual
        self.objective_ = result.objective
        self.converged_ = result.converged
        return self

    def fit_predict(self, system, y):
        return self.fit(system, y).image_

    def score(self, reference):
        """PSNR of the fitted image against ``reference``."""
        check_is_fitted(self, "image_")
        return psnr(reference, self.image_)
