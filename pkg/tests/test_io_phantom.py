import numpy as np
import pytest

from markovcs._errors import ValidationError
from markovcs.io import format_value, read_keyvalue, read_pgm, write_keyvalue, write_pgm
from markovcs.phantom import shepp_logan


@pytest.mark.parametrize("maxval", [255, 65535])
def test_pgm_round_trip(tmp_path, rng, maxval):
    levels = rng.integers(0, maxval + 1, size=(8, 16))
    path = tmp_path / "a.pgm"
    write_pgm(path, levels / maxval, maxval)
    img, mv = read_pgm(path)
    assert mv == maxval and img.shape == (8, 16)
    assert np.array_equal(np.rint(img * maxval), levels)


def test_pgm_16bit_is_big_endian(tmp_path):
    path = tmp_path / "b.pgm"
    write_pgm(path, np.array([[258 / 65535]]), 65535)
    assert path.read_bytes().endswith(b"\x01\x02")


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# another\n255\n\x00\xff")
    img, mv = read_pgm(path)
    assert img.tolist() == [[0.0, 1.0]] and mv == 255


def test_pgm_errors(tmp_path):
    path = tmp_path / "d.pgm"
    path.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValidationError):
        read_pgm(path)
    path.write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(ValidationError):
        read_pgm(path)
    with pytest.raises(ValidationError):
        write_pgm(path, np.zeros((2, 2)), 1023)


def test_keyvalue(tmp_path):
    path = tmp_path / "k.txt"
    write_keyvalue(path, {"a": 0.1, "b": True, "c": [1.0, 0.5], "d": "x"})
    assert path.read_text() == "a=0.1\nb=1\nc=1.0,0.5\nd=x\n"
    path.write_text("# comment\n\na = 3 # trailing\nb=\n")
    assert read_keyvalue(path) == {"a": "3", "b": ""}
    path.write_text("novalue\n")
    with pytest.raises(ValidationError):
        read_keyvalue(path)
    assert format_value(1 / 3) == repr(1 / 3)


def test_phantom_properties():
    u = shepp_logan((256, 256))
    assert u.shape == (256, 256)
    assert u.min() == 0.0 and u.max() <= 1.0
    # outer skull ring at full intensity, background zero
    assert u[128, 3] == 0.0
    assert u[5, 128] == 0.0 and u[14, 128] == pytest.approx(1.0)
    assert np.allclose(u, u[:, ::-1], atol=0.3)  # nearly left-right symmetric
    crisp = shepp_logan((64, 64), supersample=1)
    assert len(np.unique(crisp)) <= 12  # piecewise constant on the pixel grid
    assert len(np.unique(shepp_logan((64, 64)))) > len(np.unique(crisp))
