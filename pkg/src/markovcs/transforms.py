"""Unitary 2-D Fourier and orthonormal wavelet transforms.

The measurement operator maps wavelet coefficients ``w`` to the k-space
samples of the image ``idwt2(w)`` at the indices of a mask::

    forward(w) = dft2(idwt2(w))[mask]
    adjoint(y) = dwt2(idft2(zero_fill(y)))

Both transforms are unitary, so the rows of the implicit matrix are
orthonormal and ``forward(adjoint(y)) == y`` whenever the mask has no
repeated index.

Frequencies use FFT order (DC at index ``(0, 0)``). Coefficients use the
in-place pyramid layout: after each level the current approximation block
of shape ``(r, c)`` holds ``[[LL, LH], [HL, HH]]``, where the first axis is
split low/high first. Axes of length one are left untouched, which makes
``1 x n`` grids behave as 1-D signals.
"""

from dataclasses import dataclass

import numpy as np

from ._errors import CapacityError, DimensionError, GridIndexError, ValidationError
from ._validation import check_grid_shape

__all__ = [
    "WaveletSpec",
    "MeasurementSystem",
    "dft2",
    "idft2",
    "dwt2",
    "idwt2",
    "default_level",
    "max_level",
    "materialize_row",
    "materialize_matrix",
    "MATERIALIZE_LIMIT",
]

# Largest grid for which single rows may be materialized.
MATERIALIZE_LIMIT = 2**16
# Largest number of entries of a dense measurement matrix.
DENSE_ENTRY_LIMIT = 2**26

_SQ3 = np.sqrt(3.0)
_FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db4": np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * np.sqrt(2.0)),
}


def _highpass(h):
    L = len(h)
    return np.array([(-1) ** j * h[L - 1 - j] for j in range(L)])


def max_level(shape):
    """Deepest decomposition allowed for ``shape`` (axes of length 1 ignored)."""
    dims = [d for d in shape if d > 1]
    if not dims:
        return 0
    return int(np.log2(min(dims)))


def default_level(shape):
    """``log2(min dim) - 2``, floored at zero."""
    return max(0, max_level(shape) - 2)


@dataclass(frozen=True)
class WaveletSpec:
    """Orthonormal wavelet family and decomposition depth.

    ``level=0`` is the identity transform.
    """

    family: str = "haar"
    level: int = 1

    def __post_init__(self):
        if self.family not in _FILTERS:
            raise ValidationError(
                f"unknown wavelet family {self.family!r}; expected one of {sorted(_FILTERS)}")
        if int(self.level) != self.level or self.level < 0:
            raise ValidationError(f"wavelet level must be a non-negative int, got {self.level!r}")

    @property
    def lowpass(self):
        return _FILTERS[self.family]

    @property
    def highpass(self):
        return _highpass(_FILTERS[self.family])

    def check(self, shape):
        if self.level > max_level(shape):
            raise DimensionError(
                f"level {self.level} too deep for grid {shape}; at most {max_level(shape)}")

    def __str__(self):
        return f"{self.family}:{self.level}"

    @classmethod
    def parse(cls, text):
        family, _, level = str(text).partition(":")
        try:
            return cls(family.strip(), int(level))
        except ValueError:
            raise ValidationError(f"cannot parse wavelet spec {text!r}; use 'family:level'")


def _check_pow2_array(x):
    x = np.asarray(x)
    if x.ndim < 2:
        raise DimensionError("expected an array with at least two dimensions")
    check_grid_shape(x.shape[-2:])
    return x


def dft2(image):
    """Unitary 2-D DFT over the last two axes (DC at index (0, 0))."""
    x = _check_pow2_array(image)
    return np.fft.fft2(x, norm="ortho")


def idft2(kspace):
    """Inverse of :func:`dft2`."""
    k = _check_pow2_array(kspace)
    return np.fft.ifft2(k, norm="ortho")


def _analysis_1d(x, axis, length, h, g):
    half = length // 2
    base = 2 * np.arange(half)
    lo = 0
    hi = 0
    for j in range(len(h)):
        xj = np.take(x, (base + j) % length, axis=axis)
        lo = lo + h[j] * xj
        hi = hi + g[j] * xj
    return np.concatenate([lo, hi], axis=axis)


def _synthesis_1d(c, axis, length, h, g):
    half = length // 2
    lo = np.take(c, np.arange(half), axis=axis)
    hi = np.take(c, np.arange(half, length), axis=axis)
    out = np.zeros_like(c)
    base = 2 * np.arange(half)
    out = np.moveaxis(out, axis, -1)
    lo = np.moveaxis(lo, axis, -1)
    hi = np.moveaxis(hi, axis, -1)
    for j in range(len(h)):
        # (base + j) % length is injective for fixed j, so plain fancy += is safe.
        out[..., (base + j) % length] += h[j] * lo + g[j] * hi
    return np.moveaxis(out, -1, axis)


def _level_shapes(shape, level):
    r, c = shape
    shapes = []
    for _ in range(level):
        shapes.append((r, c))
        r = r // 2 if r > 1 else r
        c = c // 2 if c > 1 else c
    return shapes


def dwt2(image, spec=None):
    """Multi-level periodic orthonormal 2-D wavelet transform.

    Operates on the last two axes, so a stack of images can be transformed
    at once. Complex input is transformed linearly.

    Parameters
    ----------
    image : array_like, shape (..., rows, cols)
    spec : WaveletSpec, optional
        Defaults to Haar at :func:`default_level`.

    Returns
    -------
    ndarray of the same shape, coefficients in pyramid layout.
    """
    x = np.array(image, dtype=np.result_type(np.asarray(image).dtype, np.float64))
    shape = _check_pow2_array(x).shape[-2:]
    spec = spec if spec is not None else WaveletSpec("haar", default_level(shape))
    spec.check(shape)
    h, g = spec.lowpass, spec.highpass
    for r, c in _level_shapes(shape, spec.level):
        block = x[..., :r, :c]
        if r > 1:
            block = _analysis_1d(block, -2, r, h, g)
        if c > 1:
            block = _analysis_1d(block, -1, c, h, g)
        x[..., :r, :c] = block
    return x


def idwt2(coeffs, spec=None):
    """Inverse (and adjoint) of :func:`dwt2`."""
    x = np.array(coeffs, dtype=np.result_type(np.asarray(coeffs).dtype, np.float64))
    shape = _check_pow2_array(x).shape[-2:]
    spec = spec if spec is not None else WaveletSpec("haar", default_level(shape))
    spec.check(shape)
    h, g = spec.lowpass, spec.highpass
    for r, c in reversed(_level_shapes(shape, spec.level)):
        block = x[..., :r, :c]
        if c > 1:
            block = _synthesis_1d(block, -1, c, h, g)
        if r > 1:
            block = _synthesis_1d(block, -2, r, h, g)
        x[..., :r, :c] = block
    return x


class MeasurementSystem:
    """Implicit operator ``A_m = (F* Psi)[mask]`` on wavelet coefficients.

    Parameters
    ----------
    shape : tuple of int
        Grid dimensions, powers of two.
    wavelet : WaveletSpec or str, optional
        ``WaveletSpec`` or ``"family:level"``; defaults to Haar at
        :func:`default_level`.
    mask : array_like, optional
        Sampled k-space locations: a boolean array of ``shape``, a sequence
        of flat indices, or an ``(k, 2)`` array of ``(row, col)`` pairs.
        Defaults to the full grid. Repeated indices are rejected because
        they break row orthonormality.
    """

    def __init__(self, shape, wavelet=None, mask=None):
        self.shape = check_grid_shape(shape)
        if wavelet is None:
            wavelet = WaveletSpec("haar", default_level(self.shape))
        elif isinstance(wavelet, str):
            wavelet = WaveletSpec.parse(wavelet)
        wavelet.check(self.shape)
        self.wavelet = wavelet
        self.mask = self._normalize_mask(mask)

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    @property
    def m(self):
        """Number of rows (distinct sampled locations)."""
        return self.mask.size

    def __repr__(self):
        return (f"MeasurementSystem(shape={self.shape}, wavelet='{self.wavelet}', "
                f"m={self.m})")

    def _normalize_mask(self, mask):
        n = self.n
        if mask is None:
            return np.arange(n, dtype=np.int64)
        mask = np.asarray(mask)
        if mask.dtype == bool:
            if mask.shape != self.shape:
                raise DimensionError(f"boolean mask shape {mask.shape} != grid {self.shape}")
            return np.flatnonzero(mask.ravel()).astype(np.int64)
        if mask.ndim == 2 and mask.shape[1] == 2:
            rows, cols = mask[:, 0].astype(np.int64), mask[:, 1].astype(np.int64)
            if np.any((rows < 0) | (rows >= self.shape[0]) | (cols < 0) | (cols >= self.shape[1])):
                raise GridIndexError("mask (row, col) index outside the grid")
            flat = rows * self.shape[1] + cols
        else:
            flat = mask.astype(np.int64).ravel()
            if np.any((flat < 0) | (flat >= n)):
                raise GridIndexError("mask index outside the grid")
        if np.unique(flat).size != flat.size:
            raise ValidationError("mask has repeated indices; deduplicate it first")
        return flat

    def with_mask(self, mask):
        return MeasurementSystem(self.shape, self.wavelet, mask)

    def _coeff_grid(self, coeffs):
        c = np.asarray(coeffs)
        if c.shape == self.shape:
            return c
        if c.ndim == 1 and c.size == self.n:
            return c.reshape(self.shape)
        raise DimensionError(f"expected {self.n} coefficients, got shape {c.shape}")

    def forward(self, coeffs):
        """k-space samples of ``idwt2(coeffs)`` at the mask (complex, length m)."""
        u = idwt2(self._coeff_grid(coeffs), self.wavelet)
        return dft2(u).ravel()[self.mask]

    def adjoint(self, measurements):
        """Adjoint of :meth:`forward`; returns a flat complex vector of length n."""
        y = np.asarray(measurements)
        if y.shape != (self.m,):
            raise DimensionError(f"expected {self.m} measurements, got shape {y.shape}")
        k = np.zeros(self.n, dtype=np.complex128)
        k[self.mask] = y
        return dwt2(idft2(k.reshape(self.shape)), self.wavelet).ravel()

    def coefficients(self, image):
        """Wavelet coefficients of an image, flattened."""
        image = np.asarray(image, dtype=np.float64)
        if image.shape != self.shape:
            raise DimensionError(f"image shape {image.shape} != grid {self.shape}")
        return dwt2(image, self.wavelet).ravel()

    def image(self, coeffs):
        """Image ``idwt2(coeffs)`` on the grid."""
        return idwt2(self._coeff_grid(coeffs), self.wavelet)

    def flat_index(self, index):
        """Flat k-space index from a flat int or a ``(row, col)`` pair."""
        if np.ndim(index) == 0:
            i = int(index)
        else:
            r, c = (int(v) for v in index)
            if not (0 <= r < self.shape[0] and 0 <= c < self.shape[1]):
                raise GridIndexError(f"k-space index {(r, c)} outside grid {self.shape}")
            i = r * self.shape[1] + c
        if not 0 <= i < self.n:
            raise GridIndexError(f"k-space index {i} outside grid of size {self.n}")
        return i


def _adjoint_columns(system, flat_indices):
    k = np.zeros((len(flat_indices), system.n), dtype=np.complex128)
    k[np.arange(len(flat_indices)), flat_indices] = 1.0
    k = k.reshape(len(flat_indices), *system.shape)
    return dwt2(idft2(k), system.wavelet).reshape(len(flat_indices), system.n)


def materialize_row(system, index):
    """Explicit vector ``a_i = adjoint(e_i)`` for k-space location ``index``.

    ``a_i`` is the conjugate of the matrix row, so ``forward(w)[i] =
    vdot(a_i, w)``. Costs one inverse FFT and one DWT, O(n log n).

    Raises
    ------
    CapacityError
        If the grid has more than ``MATERIALIZE_LIMIT`` sites.
    """
    if system.n > MATERIALIZE_LIMIT:
        raise CapacityError(f"grid of {system.n} sites exceeds the materialization limit "
                            f"{MATERIALIZE_LIMIT}")
    i = system.flat_index(index)
    return _adjoint_columns(system, [i])[0]


def materialize_matrix(system, batch=256):
    """Dense ``m x n`` matrix of ``system.forward`` (rows in mask order)."""
    if system.n > MATERIALIZE_LIMIT or system.n * system.m > DENSE_ENTRY_LIMIT:
        raise CapacityError(
            f"dense {system.m}x{system.n} matrix exceeds the materialization limit")
    out = np.empty((system.m, system.n), dtype=np.complex128)
    for start in range(0, system.m, batch):
        idx = system.mask[start:start + batch]
        out[start:start + len(idx)] = np.conj(_adjoint_columns(system, idx))
    return out
