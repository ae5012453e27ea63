"""Numerical certification of sampling schemes.

Three families of checks live here:

* concentration of ``W_m = (1/m) sum_l Theta_{X_l}`` around the identity,
  with ``Theta_i = a_i a_i^H / pi_i``, against the union-bound tail
  estimates for iid draws (Bernstein) and for reversible chains started
  from ``pi`` (Lezaud, with ``N_q = 1`` and ``b = 1``);
* closed-form measurement counts that make ``||I - W_m||_inf < 1/(2s)``
  hold with probability ``1 - eta``;
* the recovery criterion ``gamma(A) = min_Y ||I - Y^T A||_inf < 1/(2s)``,
  computed column by column with Douglas-Rachford, and a brute-force
  l1 recovery harness to check what it implies.

Matrix sup-norms are entrywise maximum moduli throughout.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._errors import CapacityError, NumericalError, ValidationError
from .chains import TransitionKernel, simulate, spectral_gap
from .density import Density, sample_iid
from .rng import STREAM_VALUES, RandomStream, derive_seed
from .transforms import MeasurementSystem, materialize_matrix

__all__ = [
    "CertReport",
    "BoundReport",
    "TailCurve",
    "GammaResult",
    "RecoveryTable",
    "dense_system_matrix",
    "theta",
    "decomposition_error",
    "theta_sup_norms",
    "empirical_W",
    "w_deviation",
    "h",
    "bernstein_bound",
    "lezaud_envelope",
    "lezaud_bound",
    "juditsky_t",
    "min_measurements_iid",
    "min_measurements_markov",
    "bound_report",
    "monte_carlo_tail",
    "realify",
    "gamma",
    "brute_force_recovery",
    "W_LIMIT",
    "GAMMA_LIMIT",
    "RECOVERY_LIMIT",
]

W_LIMIT = 4096
TAIL_LIMIT = 256
GAMMA_LIMIT = 64
RECOVERY_LIMIT = 32


# ---------------------------------------------------------------------------
# W_m and the exact decomposition


def _check_certified(density):
    if not getattr(density, "certified", True):
        raise ValidationError("heuristic densities cannot be used for certification")


def dense_system_matrix(system):
    """Dense ``n x n`` matrix whose row ``i`` maps coefficients to k-space site ``i``."""
    if system.n > W_LIMIT:
        raise CapacityError(f"dense certification limited to {W_LIMIT} sites, got {system.n}")
    return materialize_matrix(MeasurementSystem(system.shape, system.wavelet))


def theta(system, density, index, A=None):
    """``Theta_i = a_i a_i^H / pi_i`` for one k-space location."""
    A = dense_system_matrix(system) if A is None else A
    i = system.flat_index(index)
    a = np.conj(A[i])
    return np.outer(a, np.conj(a)) / density.pi[i]


def decomposition_error(system, density, A=None):
    """``max |sum_i pi_i Theta_i - I|``."""
    A = dense_system_matrix(system) if A is None else A
    # sum_i pi_i Theta_i = A^H diag(pi / pi) A, kept in that form on purpose
    weights = density.pi * (1.0 / density.pi)
    total = (A.conj().T * weights) @ A
    return float(np.abs(total - np.eye(system.n)).max())


def theta_sup_norms(system, density, A=None):
    """``||Theta_i||_inf`` for every site (all equal to ``L`` in exact arithmetic)."""
    A = dense_system_matrix(system) if A is None else A
    return np.abs(A).max(axis=1) ** 2 / density.pi


def _weights_from_sites(sites, n, pi):
    counts = np.bincount(np.asarray(sites, dtype=np.int64), minlength=n).astype(np.float64)
    return counts / (len(sites) * pi)


def w_deviation(A, weights):
    """``||I - A^H diag(weights) A||_inf``."""
    W = (A.conj().T * weights) @ A
    W[np.diag_indices_from(W)] -= 1.0
    return float(np.abs(W).max())


@dataclass
class CertReport:
    """Certification summary of one trajectory.

    ``s_max`` is the largest sparsity certified by ``gamma`` (``None`` when
    gamma was not computed).
    """

    m: int
    deviation: float
    descriptor: str = ""
    gamma: float = None
    Y: np.ndarray = field(default=None, repr=False)
    s_max: float = None

    def as_dict(self):
        out = {"m": self.m, "deviation": self.deviation, "generator": self.descriptor}
        if self.gamma is not None:
            out["gamma"] = self.gamma
            out["s_max"] = self.s_max
        return out


def empirical_W(trajectory, system, density, A=None):
    """``W_m`` of a trajectory and its deviation from the identity.

    Returns
    -------
    W : ndarray, shape (n, n)
    report : CertReport
    """
    _check_certified(density)
    A = dense_system_matrix(system) if A is None else A
    weights = _weights_from_sites(trajectory.sites, system.n, density.pi)
    W = (A.conj().T * weights) @ A
    dev = float(np.abs(np.eye(system.n) - W).max())
    return W, CertReport(int(len(trajectory.sites)), dev, getattr(trajectory, "descriptor", ""))


# ---------------------------------------------------------------------------
# Tail bounds and measurement counts


def h(x):
    """``h(x) = (sqrt(1 + x) - (1 - x/2)) / 2``."""
    return 0.5 * (math.sqrt(1.0 + x) - (1.0 - 0.5 * x))


def bernstein_bound(n, L, m, t):
    """Union-bound Bernstein tail for iid draws.

    ``P(||I - W_m||_inf > t) <= n(n+1) exp(-m t^2 / (2L^2 + 2Lt/3))``.
    """
    if t <= 0:
        raise ValidationError(f"t must be positive, got {t!r}")
    if L <= 0 or n < 1 or m < 0:
        raise ValidationError("need n >= 1, L > 0 and m >= 0")
    return n * (n + 1) * math.exp(-m * t * t / (2 * L * L + 2 * L * t / 3))


def _check_gap(gap):
    if not 0.0 < gap <= 1.0 + 1e-9:
        raise ValidationError(f"spectral gap must lie in (0, 1], got {gap!r}")
    return min(float(gap), 1.0)


def lezaud_envelope(m, t, gap, b=1.0, n_q=1.0):
    """One-sided tail of a centred, bounded function along a reversible chain.

    ``e^(gap/5) N_q exp(-m t^2 gap / (4 b^2 (1 + h(5t / b^2))))``, valid for
    ``0 < t <= 1``. Diagnostic form with general ``b`` and ``N_q``.
    """
    if not 0.0 < t <= 1.0:
        raise ValidationError(f"t must lie in (0, 1], got {t!r}")
    gap = _check_gap(gap)
    return (math.exp(gap / 5) * n_q
            * math.exp(-m * t * t * gap / (4 * b * b * (1 + h(5 * t / (b * b))))))


def lezaud_bound(n, L, m, t, gap):
    """Union-bound tail for a chain started from ``pi``.

    ``P(||I - W_m||_inf >= t) <= n(n+1) e^(gap/5) exp(-m t^2 gap / (12 L^2))``
    for ``0 < t <= 1``.
    """
    if not 0.0 < t <= 1.0:
        raise ValidationError(f"t must lie in (0, 1], got {t!r}")
    if L <= 0 or n < 1 or m < 0:
        raise ValidationError("need n >= 1, L > 0 and m >= 0")
    gap = _check_gap(gap)
    return n * (n + 1) * math.exp(gap / 5) * math.exp(-m * t * t * gap / (12 * L * L))


def juditsky_t(n, L, m):
    """Deviation level ``4 L sqrt(2 ln(2 n^2) / m)`` of the Markov-inequality bound."""
    return 4 * L * math.sqrt(2 * math.log(2 * n * n) / m)


def _check_count_args(L, s, n, eta):
    if L <= 0 or s < 1 or n <= 0 or not 0 < eta <= 1:
        raise ValidationError(
            f"need L > 0, s >= 1, n > 0 and 0 < eta <= 1 (got L={L}, s={s}, n={n}, eta={eta})")


def min_measurements_iid(L, s, n, eta):
    """``ceil(5 L^2 s^2 log(n^2 / eta))`` iid draws."""
    _check_count_args(L, s, n, eta)
    return math.ceil(5 * L * L * s * s * math.log(n * n / eta))


def min_measurements_markov(L, s, n, eta, gap):
    """``ceil(12 L^2 s^2 log(2 n^2 / eta) / gap)`` chain steps."""
    _check_count_args(L, s, n, eta)
    gap = _check_gap(gap)
    return math.ceil(12 * L * L * s * s * math.log(2 * n * n / eta) / gap)


@dataclass
class BoundReport:
    n: int
    L: float
    s: int
    eta: float
    t: float
    gap: float
    m: int
    bernstein: float
    lezaud: float
    m_min_iid: int
    m_min_markov: int
    h_values: dict
    n_q: float = 1.0
    b: float = 1.0
    juditsky_t: float = None
    bernstein_at_juditsky_t: float = None

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "h_values"}
        for x, v in self.h_values.items():
            out[f"h({x!r})"] = v
        return out


def bound_report(n, L, s, eta, t, gap, m):
    """Evaluate every tail bound and measurement count for one parameter set."""
    jt = juditsky_t(n, L, m) if m > 0 else None
    return BoundReport(
        n=n, L=L, s=s, eta=eta, t=t, gap=gap, m=m,
        bernstein=bernstein_bound(n, L, m, t),
        lezaud=lezaud_bound(n, L, m, t, gap) if t <= 1 else float("nan"),
        m_min_iid=min_measurements_iid(L, s, n, eta),
        m_min_markov=min_measurements_markov(L, s, n, eta, gap),
        h_values={x: h(x) for x in (0.0, 5 * t if t <= 1 else 5.0, 1.0)},
        juditsky_t=jt,
        bernstein_at_juditsky_t=bernstein_bound(n, L, m, jt) if jt else None,
    )


@dataclass
class TailCurve:
    """Empirical tail ``P(||I - W_m||_inf > t)`` next to its theoretical bound."""

    t: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    deviations: np.ndarray
    m: int
    gap: float = None

    @property
    def replicates(self):
        return self.deviations.size

    def envelope(self, sigmas=3.0):
        """``min(1, bound) + sigmas * binomial standard error``."""
        p = np.minimum(1.0, self.bound)
        return p + sigmas * np.sqrt(p * (1 - p) / self.replicates)

    def violations(self, sigmas=3.0):
        return np.flatnonzero(self.empirical > self.envelope(sigmas))

    def rows(self):
        return list(zip(self.t.tolist(), self.empirical.tolist(), self.bound.tolist()))


def monte_carlo_tail(generator, system, density, m, t_grid, replicates, seed):
    """Monte-Carlo tail of ``||I - W_m||_inf`` for iid or Markov sampling.

    Parameters
    ----------
    generator : Density or TransitionKernel
        A density means iid draws (Bernstein bound); a kernel means a chain
        started from ``pi`` (Lezaud bound with its measured spectral gap).
    replicates : int
        At least 1000. Replicate ``r`` uses seed
        ``derive_seed(seed, "replicate", r)``.
    """
    _check_certified(density)
    if system.n > TAIL_LIMIT:
        raise CapacityError(f"tail estimation limited to {TAIL_LIMIT} sites, got {system.n}")
    if replicates < 1000:
        raise ValidationError("monte_carlo_tail needs at least 1000 replicates")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    A = dense_system_matrix(system)
    n, L = system.n, density.L
    markov = isinstance(generator, TransitionKernel) and generator.alpha < 1
    gap = spectral_gap(generator) if markov else None
    devs = np.empty(replicates)
    for r in range(replicates):
        rseed = derive_seed(seed, "replicate", r)
        if markov:
            sites = simulate(generator, m, rseed).sites
        else:
            sites = sample_iid(density, m, rseed)
        devs[r] = w_deviation(A, _weights_from_sites(sites, n, density.pi))
    empirical = np.array([(devs > t).mean() for t in t_grid])
    if markov:
        bound = np.array([lezaud_bound(n, L, m, t, gap) if 0 < t <= 1 else np.inf
                          for t in t_grid])
    else:
        bound = np.array([bernstein_bound(n, L, m, t) if t > 0 else np.inf for t in t_grid])
    return TailCurve(t_grid, empirical, bound, devs, m, gap)


# ---------------------------------------------------------------------------
# gamma(A) and brute-force recovery


def realify(A):
    """Stack real and imaginary parts of a complex matrix's rows.

    ``A x = y`` for real ``x`` is equivalent to ``realify(A) x = realify(y)``.
    """
    A = np.asarray(A)
    if not np.iscomplexobj(A):
        return A.astype(np.float64)
    return np.concatenate([A.real, A.imag], axis=0)


def _project_l1_ball(V):
    """Project every column of ``V`` onto the unit l1 ball."""
    absV = np.abs(V)
    inside = absV.sum(axis=0) <= 1.0
    mu = -np.sort(-absV, axis=0)
    css = np.cumsum(mu, axis=0)
    k = np.arange(1, V.shape[0] + 1)[:, None]
    cond = mu - (css - 1.0) / k > 0
    rho = V.shape[0] - 1 - np.argmax(cond[::-1], axis=0)
    theta = (css[rho, np.arange(V.shape[1])] - 1.0) / (rho + 1)
    out = np.sign(V) * np.maximum(absV - theta, 0.0)
    out[:, inside] = V[:, inside]
    return out


def _prox_linf(V, tau):
    """Prox of ``tau * ||.||_inf`` column-wise, via Moreau's identity."""
    return V - tau * _project_l1_ball(V / tau)


@dataclass
class GammaResult:
    """Certified upper bound on ``gamma(A)`` and the matrix achieving it.

    ``value == max(column_values)`` and ``||I - Y^T A||_inf == value`` up to
    the floating-point evaluation of that product.
    """

    value: float
    Y: np.ndarray
    column_values: np.ndarray
    iterations: int
    converged: bool

    def certifies(self, s):
        return self.value < 1.0 / (2 * s)

    @property
    def s_max(self):
        """Largest ``s`` with ``value < 1/(2s)`` (``inf`` when value is 0)."""
        if self.value <= 0:
            return math.inf
        return math.ceil(1.0 / (2 * self.value)) - 1


def _column_values(A, Y):
    R = np.eye(A.shape[1]) - Y.T @ A
    return np.abs(R).max(axis=1)


def gamma(A, Y0=None, tau=None, relaxation=1.0, max_iter=20000, tol=1e-10):
    """Upper bound on ``gamma(A) = min_Y ||I - Y^T A||_inf``.

    Row ``i`` of ``I - Y^T A`` only involves column ``y_i`` of ``Y``, so the
    problem splits into ``min_z ||z||_inf`` over the affine sets
    ``e_i + range(A^T)``. All columns are solved together with
    Douglas-Rachford (prox of the sup-norm against exact affine projection).
    The returned ``Y`` is recovered by least squares and the value is
    re-evaluated from it, so it is always attained, never extrapolated.

    Parameters
    ----------
    A : ndarray, shape (m, n)
        Measurement matrix; complex input is realified first.
    Y0 : ndarray, shape (m_real, n), optional
        Warm start. Each column keeps the better of the warm start and the
        Douglas-Rachford result, so adding rows to ``A`` with a zero-padded
        warm start never increases the bound.
    """
    A = realify(A)
    if A.ndim != 2:
        raise ValidationError("A must be a 2-D matrix")
    m, n = A.shape
    if n > GAMMA_LIMIT:
        raise CapacityError(f"gamma limited to n <= {GAMMA_LIMIT}, got {n}")
    I = np.eye(n)
    if m == 0 or not np.any(A):
        Y = np.zeros((m, n))
        cols = _column_values(A, Y) if m else np.ones(n)
        return GammaResult(float(cols.max()), Y, cols, 0, True)
    # orthonormal basis of range(A^T)
    U, svals, _ = np.linalg.svd(A.T, full_matrices=False)
    U = U[:, svals > svals[0] * 1e-12]
    Q = U @ U.T

    def project(Z):
        return I + Q @ (Z - I)

    tau = tau if tau is not None else 1.0 / n
    Z = project(np.zeros((n, n)))
    if Y0 is not None:
        Y0 = np.asarray(Y0, dtype=np.float64)
        if Y0.shape != (m, n):
            raise ValidationError(f"warm start must have shape {(m, n)}, got {Y0.shape}")
        Z = I - A.T @ Y0
    prev = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        X = project(Z)
        Z = Z + relaxation * (_prox_linf(2 * X - Z, tau) - X)
        if it % 50 == 0:
            val = np.abs(project(Z)).max(axis=0).max()
            if abs(prev - val) < tol:
                converged = True
                break
            prev = val
    X = project(Z)
    Y = np.linalg.lstsq(A.T, I - X, rcond=None)[0]
    cols = _column_values(A, Y)
    if Y0 is not None:
        warm = _column_values(A, Y0)
        better = warm < cols
        Y[:, better] = Y0[:, better]
        cols = np.where(better, warm, cols)
    if not np.all(np.isfinite(cols)):
        raise NumericalError("gamma computation produced non-finite values")
    return GammaResult(float(cols.max()), Y, cols, it, converged)


def _l1_min(A, b):
    """``argmin ||w||_1 s.t. A w = b`` as a linear program (real data)."""
    m, n = A.shape
    c = np.ones(2 * n)
    if m == 0:
        return np.zeros(n)
    res = linprog(c, A_eq=np.hstack([A, -A]), b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericalError(f"l1 linear program failed: {res.message}")
    return res.x[:n] - res.x[n:]


@dataclass
class RecoveryTable:
    """Per-support success fractions of exact l1 recovery."""

    supports: list
    success: np.ndarray
    trials_per_support: int
    exhaustive: bool

    @property
    def overall(self):
        return float(self.success.mean()) if self.success.size else 1.0

    @property
    def all_recovered(self):
        return bool(np.all(self.success == 1.0))


def brute_force_recovery(A, s, support_trials=200, seed=0, patterns=4, tol=1e-6):
    """Check exact l1 recovery of s-sparse vectors by solving the LP.

    Supports are enumerated exhaustively when there are at most 10^4 of
    them, otherwise ``support_trials`` supports are drawn. For each support
    ``patterns`` random sign/magnitude vectors are planted; recovery counts
    as exact when the relative error is below ``tol``.
    """
    A = realify(A)
    m, n = A.shape
    if n > RECOVERY_LIMIT or s > 3:
        raise CapacityError(f"brute-force recovery limited to n <= {RECOVERY_LIMIT}, s <= 3")
    if s < 1:
        raise ValidationError("s must be at least 1")
    values = RandomStream(seed, STREAM_VALUES)
    total = math.comb(n, s)
    exhaustive = total <= 10**4
    if exhaustive:
        supports = [list(c) for c in itertools.combinations(range(n), s)]
    else:
        picks = RandomStream(seed, STREAM_VALUES + 1)
        supports = []
        for k in range(support_trials):
            keys = picks.uniform(k * n, n)
            supports.append(sorted(np.argsort(keys, kind="stable")[:s].tolist()))
    success = np.empty(len(supports))
    counter = 0
    for si, support in enumerate(supports):
        ok = 0
        for _ in range(patterns):
            u = values.uniform(counter, 2 * s)
            counter += 2 * s
            x = np.zeros(n)
            signs = np.where(u[:s] < 0.5, -1.0, 1.0)
            x[support] = signs * (0.5 + u[s:])
            w = _l1_min(A, A @ x)
            if np.linalg.norm(w - x) <= tol * np.linalg.norm(x):
                ok += 1
        success[si] = ok / patterns
    return RecoveryTable(supports, success, patterns, exhaustive)
