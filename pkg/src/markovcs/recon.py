"""Equality-constrained l1 reconstruction by Douglas-Rachford splitting.

Solves ``min ||w||_1  s.t.  A_m w = y`` over complex wavelet coefficients.
With a deduplicated mask the rows of ``A_m`` are orthonormal, so the
projection onto the constraint set is exact and cheap::

    P_C(w) = w - A_m^H (A_m w - y)
"""

from dataclasses import dataclass, field

import numpy as np

from ._errors import DimensionError, ValidationError

__all__ = [
    "ReconProblem",
    "ReconResult",
    "project_affine",
    "soft_threshold",
    "douglas_rachford",
    "psnr",
]


def project_affine(system, w, y):
    """Euclidean projection of ``w`` onto ``{v : system.forward(v) = y}``."""
    w = np.asarray(w)
    return w - system.adjoint(system.forward(w) - y)


def soft_threshold(w, tau):
    """Proximal map of ``tau * ||.||_1``.

    Complex entries shrink in modulus with their phase kept; real entries
    shrink toward zero.

    >>> soft_threshold(np.array([3 + 4j]), 2.5)
    array([1.5+2.j])
    """
    if tau < 0:
        raise ValidationError(f"threshold must be non-negative, got {tau!r}")
    w = np.asarray(w)
    if not np.iscomplexobj(w):
        return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)
    mag = np.abs(w)
    scale = np.maximum(1.0 - tau / np.maximum(mag, np.finfo(float).tiny), 0.0)
    return w * scale


@dataclass
class ReconProblem:
    """Data and solver settings for one reconstruction.

    ``threshold`` defaults to ``threshold_scale * max|A_m^H y|``.
    """

    system: object
    y: np.ndarray
    max_iter: int = 500
    threshold: float = None
    threshold_scale: float = 1e-2
    relaxation: float = 1.0
    tol: float = 1e-8
    peak: float = 1.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.complex128)
        if self.y.shape != (self.system.m,):
            raise DimensionError(
                f"{self.y.size} measurements for a mask of {self.system.m} locations")
        if not 0.0 < self.relaxation < 2.0:
            raise ValidationError(f"relaxation must lie in (0, 2), got {self.relaxation!r}")
        if self.max_iter < 1 or self.tol <= 0 or self.threshold_scale <= 0 or self.peak <= 0:
            raise ValidationError("max_iter, tol, threshold_scale and peak must be positive")
        if self.threshold is not None and self.threshold <= 0:
            raise ValidationError("threshold must be positive")


@dataclass
class ReconResult:
    coefficients: np.ndarray
    image: np.ndarray
    iterations: int
    residual: float
    objective: float
    converged: bool
    objective_history: list = field(default_factory=list, repr=False)


def douglas_rachford(problem):
    """Run Douglas-Rachford on ``||w||_1 + indicator(A_m w = y)``.

    The iteration is ``z <- z + lam * (prox(2 P_C(z) - z) - P_C(z))``
    started from the minimum-norm feasible point, and the returned
    coefficients are ``P_C(z)``, which is feasible to rounding. It stops
    when ``||w_k - w_{k-1}|| / ||w_k|| < tol``. Running out of iterations
    is reported through ``converged=False``, not an exception.
    """
    system, y = problem.system, problem.y
    z = system.adjoint(y)
    tau = problem.threshold
    if tau is None:
        tau = problem.threshold_scale * float(np.abs(z).max()) if z.size else 0.0
    lam = problem.relaxation
    history = []
    w_prev = None
    converged = False
    it = 0
    for it in range(1, problem.max_iter + 1):
        w = project_affine(system, z, y)
        history.append(float(np.abs(w).sum()))
        if w_prev is not None:
            norm = np.linalg.norm(w)
            change = np.linalg.norm(w - w_prev)
            if change == 0.0 or (norm > 0 and change / norm < problem.tol):
                converged = True
                break
        w_prev = w
        z = z + lam * (soft_threshold(2 * w - z, tau) - w)
    else:
        w = project_affine(system, z, y)
    residual = float(np.linalg.norm(system.forward(w) - y))
    image = np.clip(system.image(w).real, 0.0, problem.peak)
    return ReconResult(w, image, it, residual, float(np.abs(w).sum()), converged, history)


def psnr(reference, reconstruction, peak=None):
    """Peak signal-to-noise ratio in dB.

    ``peak`` defaults to the dynamic range of ``reference`` (or its largest
    magnitude when it is constant). Identical images give ``inf``.
    """
    ref = np.asarray(reference, dtype=np.float64)
    rec = np.asarray(reconstruction, dtype=np.float64)
    if ref.shape != rec.shape:
        raise DimensionError(f"image shapes differ: {ref.shape} vs {rec.shape}")
    if peak is None:
        peak = float(ref.max() - ref.min()) or float(np.abs(ref).max()) or 1.0
    mse = float(np.mean((ref - rec) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))
