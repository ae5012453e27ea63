import numpy as np
import pytest
from scipy import stats

from markovcs._errors import CapacityError, DimensionError, ValidationError
from markovcs.density import (
    Density,
    compute_density,
    inverse_cdf,
    load_density,
    radial_density,
    sample_iid,
    save_density,
)
from markovcs.transforms import MeasurementSystem, materialize_matrix


def dense_density(system):
    A = materialize_matrix(MeasurementSystem(system.shape, system.wavelet))
    sup = np.abs(A).max(axis=1)
    return sup**2 / np.sum(sup**2), np.sum(sup**2)


def test_identity_wavelet_is_uniform():
    d = compute_density(MeasurementSystem((8, 8), "haar:0"))
    assert np.allclose(d.pi, 1 / 64, atol=1e-15)
    assert d.L == pytest.approx(1.0, abs=1e-12)


def test_single_site():
    d = compute_density(MeasurementSystem((1, 1), "haar:0"))
    assert d.pi.tolist() == [1.0]
    assert d.L == pytest.approx(d.sup_norms[0] ** 2)


def test_1x8_haar3_matches_dense():
    sysm = MeasurementSystem((1, 8), "haar:3")
    pi, L = dense_density(sysm)
    d = compute_density(sysm)
    assert np.max(np.abs(d.pi - pi)) < 1e-12
    assert d.L == pytest.approx(L, rel=1e-12)


@pytest.mark.parametrize("shape,spec", [((8, 8), "haar:3"), ((16, 16), "haar:2"),
                                        ((8, 16), "db4:2"), ((4, 32), "haar:2"),
                                        ((1, 64), "db4:4"), ((32, 32), "haar:3")])
def test_separable_equals_materialized(shape, spec):
    sysm = MeasurementSystem(shape, spec)
    a = compute_density(sysm, method="separable")
    b = compute_density(sysm, method="materialize")
    assert np.max(np.abs(a.sup_norms - b.sup_norms)) < 1e-12
    assert np.max(np.abs(a.pi - b.pi)) < 1e-12


def test_invariants():
    d = compute_density(MeasurementSystem((64, 64)))
    assert abs(d.pi.sum() - 1) < 1e-12
    assert d.pi.min() > 0
    assert np.allclose(d.pi, d.sup_norms**2 / d.L, rtol=1e-14)
    # low frequencies carry the most mass
    assert d.pi.argmax() == 0


def test_L_invariant_under_row_permutation(rng):
    d = compute_density(MeasurementSystem((16, 16), "haar:2"))
    perm = rng.permutation(d.n)
    assert Density.from_sup_norms(d.sup_norms[perm], d.shape).L == pytest.approx(d.L, rel=1e-14)


def test_unknown_method_and_guard():
    with pytest.raises(ValidationError):
        compute_density(MeasurementSystem((4, 4)), method="guess")
    with pytest.raises(CapacityError):
        compute_density(MeasurementSystem((512, 256), "haar:1"), method="materialize")


def test_separable_scales_to_large_grids():
    d = compute_density(MeasurementSystem((512, 512)))
    assert d.n == 512 * 512 and abs(d.pi.sum() - 1) < 1e-12


def test_radial_density_uncertified():
    d = radial_density((32, 32))
    assert not d.certified
    assert abs(d.pi.sum() - 1) < 1e-12


# --- sampling ----------------------------------------------------------------


def _flat(n):
    return Density.from_sup_norms(np.ones(n), (1, n))


def test_single_site_samples():
    assert not np.any(sample_iid(_flat(1), 100, seed=3))


def test_uniform_frequencies_binomial_envelope():
    idx = sample_iid(_flat(4), 10**6, seed=11)
    freq = np.bincount(idx, minlength=4) / 10**6
    sigma = np.sqrt(0.25 * 0.75 / 10**6)
    assert np.all(np.abs(freq - 0.25) < 6 * sigma)
    assert np.all(np.abs(freq - 0.25) < 0.002)


def test_chi_square_goodness_of_fit():
    d = compute_density(MeasurementSystem((16, 16), "haar:2"))
    m = 10**6
    counts = np.bincount(sample_iid(d, m, seed=2024), minlength=d.n)
    _, p = stats.chisquare(counts, d.pi * m)
    assert p > 1e-3


def test_sampling_deterministic_and_prefix():
    d = compute_density(MeasurementSystem((8, 8)))
    a = sample_iid(d, 500, seed=7)
    assert np.array_equal(a, sample_iid(d, 500, seed=7))
    assert np.array_equal(a[:200], sample_iid(d, 200, seed=7))
    assert np.array_equal(a[200:], sample_iid(d, 300, seed=7, start=200))
    assert not np.array_equal(a, sample_iid(d, 500, seed=8))


def test_degenerate_pi_rejected():
    d = _flat(4)
    d.pi = np.array([0.5, np.nan, 0.25, 0.25])
    with pytest.raises(ValidationError):
        sample_iid(d, 10, 0)
    d.pi = np.array([0.75, -0.25, 0.25, 0.25])
    with pytest.raises(ValidationError):
        sample_iid(d, 10, 0)
    with pytest.raises(ValidationError):
        sample_iid(_flat(4), 0, 0)


def test_inverse_cdf_edges():
    cdf = np.cumsum([0.25, 0.0, 0.75])
    assert inverse_cdf(cdf, [0.0, 0.2499, 0.25, 0.9999999]).tolist() == [0, 0, 2, 2]


# --- cache file --------------------------------------------------------------


def test_cache_round_trip(tmp_path):
    sysm = MeasurementSystem((16, 32), "db4:2")
    d = compute_density(sysm)
    path = tmp_path / "d.bin"
    save_density(d, path)
    e = load_density(path, expect=sysm)
    assert np.array_equal(e.sup_norms, d.sup_norms)
    assert np.array_equal(e.pi, d.pi) and e.L == d.L
    save_density(e, tmp_path / "e.bin")
    assert path.read_bytes() == (tmp_path / "e.bin").read_bytes()


def test_cache_mismatch_and_corruption(tmp_path):
    d = compute_density(MeasurementSystem((8, 8), "haar:1"))
    path = tmp_path / "d.bin"
    save_density(d, path)
    with pytest.raises(ValidationError):
        load_density(path, expect=MeasurementSystem((8, 8), "haar:2"))
    raw = path.read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValidationError):
        load_density(tmp_path / "short.bin")
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValidationError):
        load_density(tmp_path / "bad.bin")


def test_from_sup_norms_size_check():
    with pytest.raises(DimensionError):
        Density.from_sup_norms(np.ones(5), (2, 2))
