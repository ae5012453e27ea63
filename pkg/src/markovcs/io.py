"""Binary PGM (P5) images and flat key-value text files."""

import numpy as np

from ._errors import ValidationError

__all__ = ["read_pgm", "write_pgm", "read_keyvalue", "write_keyvalue", "format_value"]


def _tokens(raw, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValidationError("truncated PGM header")
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path):
    """Read a binary PGM.

    Returns
    -------
    pixels : ndarray of float64, shape (rows, cols)
        Intensities scaled to [0, 1].
    maxval : int
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    (magic, width, height, maxval), pos = _tokens(raw, 4)
    if magic != b"P5":
        raise ValidationError(f"{path}: not a binary PGM (magic {magic!r})")
    width, height, maxval = int(width), int(height), int(maxval)
    if not 0 < maxval < 65536:
        raise ValidationError(f"{path}: invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    size = width * height * dtype.itemsize
    body = raw[pos:pos + size]
    if len(body) != size:
        raise ValidationError(f"{path}: raster has {len(body)} bytes, expected {size}")
    pixels = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return pixels.astype(np.float64) / maxval, maxval


def write_pgm(path, pixels, maxval=255):
    """Write intensities in [0, 1] (clipped) as a binary PGM."""
    if maxval not in (255, 65535):
        raise ValidationError("maxval must be 255 or 65535")
    x = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    if x.ndim != 2:
        raise ValidationError("PGM images must be two-dimensional")
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.rint(x * maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{x.shape[1]} {x.shape[0]}\n{maxval}\n".encode("ascii"))
        fh.write(raster.tobytes())


def format_value(value):
    """Text form used in key-value files; floats keep full precision."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_keyvalue(path, items):
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={format_value(value)}\n")


def read_keyvalue(path):
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            out[key.strip()] = value.strip()
    return out
