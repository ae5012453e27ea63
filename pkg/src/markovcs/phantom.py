"""Piecewise-constant reference phantom.

The bundled test image is the modified Shepp-Logan head phantom (Toft's
high-contrast intensities): ten ellipses on the square ``[-1, 1]^2``,
each adding a constant inside its boundary. Pixels average the phantom
over a regular sub-grid of points, so edges are partial-volume. Row 0
is the top of the image (``y = +1``). Intensities lie in ``[0, 1]``.
"""

import numpy as np

from ._validation import check_grid_shape

__all__ = ["shepp_logan", "ELLIPSES"]

# (intensity, semi-axis x, semi-axis y, centre x, centre y, rotation degrees)
ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan(shape=(256, 256), supersample=4):
    """Rasterize the phantom, averaging ``supersample**2`` points per pixel.

    ``supersample=1`` samples pixel centres only, which yields a phantom
    that is exactly piecewise constant on the pixel grid.
    """
    rows, cols = check_grid_shape(shape)
    k = int(supersample)
    y = 1.0 - (2.0 * np.arange(rows * k) + 1.0) / (rows * k)
    x = (2.0 * np.arange(cols * k) + 1.0) / (cols * k) - 1.0
    X, Y = np.meshgrid(x, y)
    img = np.zeros((rows * k, cols * k))
    for value, a, b, x0, y0, deg in ELLIPSES:
        t = np.deg2rad(deg)
        dx, dy = X - x0, Y - y0
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += value
    img = np.clip(img, 0.0, 1.0)
    return img.reshape(rows, k, cols, k).mean(axis=(1, 3))
