"""Variable-density distribution over k-space and iid index sampling.

The sampling density puts mass on each k-space location proportionally to
the squared sup-norm of the corresponding measurement vector::

    pi_i = ||a_i||_inf**2 / L,    L = sum_i ||a_i||_inf**2

Two exact routes compute the sup-norms. ``"materialize"`` builds every
``a_i`` with one inverse FFT and one DWT. ``"separable"`` (the default)
uses the fact that the 2-D Fourier atom at ``(kr, kc)`` is the outer
product of two 1-D atoms and the pyramid wavelet transform is separable
at every level, so each sub-band of ``a_i`` is an outer product of 1-D
approximation/detail vectors and its largest modulus is the product of the
two 1-D maxima. That costs O(n log n) for the whole grid and works beyond
the materialization limit.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ._errors import CapacityError, DimensionError, ValidationError
from ._validation import check_grid_shape, check_positive_int, check_probability_vector
from .rng import STREAM_IID, RandomStream
from .transforms import (
    MATERIALIZE_LIMIT,
    MeasurementSystem,
    WaveletSpec,
    _analysis_1d,
    _adjoint_columns,
)

__all__ = [
    "Density",
    "compute_density",
    "sample_iid",
    "inverse_cdf",
    "radial_density",
    "save_density",
    "load_density",
]

_MAGIC = b"MCSDENS1"


@dataclass(eq=False)
class Density:
    """Sampling distribution ``pi`` and constant ``L`` on a k-space grid.

    Attributes
    ----------
    pi : ndarray, shape (n,)
        Probabilities over flat k-space indices (FFT order).
    L : float
        Sum of squared sup-norms.
    sup_norms : ndarray, shape (n,)
        ``||a_i||_inf`` for every location.
    shape : tuple of int
    wavelet : WaveletSpec or None
        ``None`` for densities that are not derived from a wavelet system.
    certified : bool
        False for heuristic profiles that must not enter certification.
    """

    pi: np.ndarray
    L: float
    sup_norms: np.ndarray
    shape: tuple
    wavelet: WaveletSpec = None
    certified: bool = True
    _cdf: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_sup_norms(cls, sup_norms, shape, wavelet=None, certified=True):
        s = np.asarray(sup_norms, dtype=np.float64).ravel()
        if s.size != shape[0] * shape[1]:
            raise DimensionError(f"{s.size} sup-norms for a grid of shape {shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValidationError("sup-norms must be finite and non-negative")
        sq = s * s
        L = float(np.sum(sq))
        if L <= 0:
            raise ValidationError("all sup-norms are zero")
        return cls(sq / L, L, s, tuple(shape), wavelet, certified)

    @property
    def n(self):
        return self.pi.size

    @property
    def cdf(self):
        if self._cdf is None:
            self._cdf = np.cumsum(self.pi)
        return self._cdf

    def validate(self):
        check_probability_vector(self.pi)
        return self


def _axis_tables(length, spec):
    approx = np.zeros((spec.level + 1, length))
    detail = np.zeros((spec.level + 1, length))
    if length == 1:
        approx[:] = 1.0
        return approx, detail
    x = np.fft.ifft(np.eye(length), axis=1, norm="ortho")
    approx[0] = np.abs(x).max(axis=1)
    h, g = spec.lowpass, spec.highpass
    cur = length
    for j in range(1, spec.level + 1):
        out = _analysis_1d(x, -1, cur, h, g)
        half = cur // 2
        x = out[:, :half]
        approx[j] = np.abs(x).max(axis=1)
        detail[j] = np.abs(out[:, half:]).max(axis=1)
        cur = half
    return approx, detail


def _separable_sup_norms(shape, spec):
    ar, dr = _axis_tables(shape[0], spec)
    ac, dc = _axis_tables(shape[1], spec)
    J = spec.level
    sup = np.outer(ar[J], ac[J])
    for j in range(1, J + 1):
        for a, b in ((ar[j], dc[j]), (dr[j], ac[j]), (dr[j], dc[j])):
            np.maximum(sup, np.outer(a, b), out=sup)
    return sup.ravel()


def _materialized_sup_norms(system, batch=256):
    if system.n > MATERIALIZE_LIMIT:
        raise CapacityError(
            f"materializing {system.n} rows exceeds the limit {MATERIALIZE_LIMIT}; "
            "use method='separable' or a cached density file")
    out = np.empty(system.n)
    for start in range(0, system.n, batch):
        idx = np.arange(start, min(start + batch, system.n))
        out[idx] = np.abs(_adjoint_columns(system, idx)).max(axis=1)
    return out


def compute_density(system, method="separable"):
    """Sampling density of a measurement system.

    Parameters
    ----------
    system : MeasurementSystem
        Only its grid and wavelet matter; the mask is ignored.
    method : {"separable", "materialize"}
        Both are exact; ``"materialize"`` is limited to
        ``MATERIALIZE_LIMIT`` sites and serves as the dense reference.

    Returns
    -------
    Density
    """
    if method == "separable":
        sup = _separable_sup_norms(system.shape, system.wavelet)
    elif method == "materialize":
        sup = _materialized_sup_norms(MeasurementSystem(system.shape, system.wavelet))
    else:
        raise ValidationError(f"unknown density method {method!r}")
    return Density.from_sup_norms(sup, system.shape, system.wavelet)


def radial_density(shape, decay=2.0, floor=1e-3):
    """Heuristic polynomial radial decay, ``(floor + |k|)**-decay``.

    Marked ``certified=False``; the certification routines refuse it.
    """
    rows, cols = check_grid_shape(shape)
    fr = np.fft.fftfreq(rows)
    fc = np.fft.fftfreq(cols)
    radius = np.hypot(fr[:, None], fc[None, :])
    weight = (floor + radius) ** (-float(decay))
    return Density.from_sup_norms(np.sqrt(weight), (rows, cols), None, certified=False)


def inverse_cdf(cdf, u):
    """Map uniforms in [0, 1) to indices through a cumulative distribution."""
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(idx, cdf.size - 1)


def sample_iid(density, m, seed, start=0):
    """Draw ``m`` iid k-space indices from ``density.pi``.

    Draw ``l`` uses the uniform at index ``start + l`` of the iid stream of
    ``seed``, so results are reproducible across platforms and
    ``sample_iid(d, m, s)`` is a prefix of ``sample_iid(d, m + k, s)``.
    """
    m = check_positive_int(m, "m")
    check_probability_vector(density.pi)
    u = RandomStream(seed, STREAM_IID).uniform(start, m)
    return inverse_cdf(density.cdf, u).astype(np.int64)


def save_density(density, path):
    """Write the density cache: magic, text header, little-endian float64 sup-norms."""
    header = (f"n={density.n}\nrows={density.shape[0]}\ncols={density.shape[1]}\n"
              f"wavelet={density.wavelet if density.wavelet is not None else 'none'}\n"
              f"certified={int(density.certified)}\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.asarray(density.sup_norms, dtype="<f8").tobytes())


def load_density(path, expect=None):
    """Read a density cache, recompute ``pi`` and ``L`` and revalidate.

    Parameters
    ----------
    expect : MeasurementSystem, optional
        When given, the cached grid and wavelet must match it.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ValidationError(f"{path}: not a density cache file")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = dict(line.split("=", 1) for line in raw[12:12 + hlen].decode("ascii").splitlines())
    n, rows, cols = int(header["n"]), int(header["rows"]), int(header["cols"])
    if rows * cols != n:
        raise ValidationError(f"{path}: inconsistent header n={n}, {rows}x{cols}")
    body = raw[12 + hlen:]
    if len(body) != 8 * n:
        raise ValidationError(f"{path}: expected {8 * n} payload bytes, found {len(body)}")
    sup = np.frombuffer(body, dtype="<f8").astype(np.float64)
    wavelet = None if header["wavelet"] == "none" else WaveletSpec.parse(header["wavelet"])
    dens = Density.from_sup_norms(sup, (rows, cols), wavelet,
                                  certified=bool(int(header.get("certified", "1"))))
    dens.validate()
    if expect is not None and (dens.shape != expect.shape or dens.wavelet != expect.wavelet):
        raise ValidationError(
            f"{path}: cached density is for {dens.shape} '{dens.wavelet}', "
            f"system is {expect.shape} '{expect.wavelet}'")
    return dens
