import numpy as np
import pytest
from sklearn.base import clone

from markovcs._errors import NotFittedError, ValidationError
from markovcs.chains import simulate, simulate_second_order
from markovcs.density import compute_density, sample_iid
from markovcs.estimators import L1Reconstructor, MarkovChainSampler, VariableDensitySampler
from markovcs.transforms import MeasurementSystem, WaveletSpec, dft2


def test_params_and_clone():
    s = MarkovChainSampler(alpha=0.2, persistence=0.5, connectivity=8, wavelet="haar:1")
    assert s.get_params()["alpha"] == 0.2
    c = clone(s)
    assert c.get_params() == s.get_params() and c is not s
    s.set_params(alpha=0.3)
    assert s.alpha == 0.3
    assert L1Reconstructor(max_iter=7).get_params()["max_iter"] == 7


def test_not_fitted():
    with pytest.raises(NotFittedError):
        MarkovChainSampler().sample(10, 0)
    with pytest.raises(NotFittedError):
        VariableDensitySampler().sample(10, 0)
    with pytest.raises(NotFittedError):
        L1Reconstructor().score(np.zeros((4, 4)))


def test_fit_on_shape_or_system():
    a = VariableDensitySampler().fit((16, 16))
    assert a.system_.wavelet == WaveletSpec("haar", 2)
    b = VariableDensitySampler(wavelet="db4:1").fit(MeasurementSystem((16, 16)))
    assert b.system_.wavelet == WaveletSpec("db4", 1)
    assert np.allclose(a.density_.pi, compute_density(MeasurementSystem((16, 16))).pi)


def test_samplers_match_functional_api():
    iid = VariableDensitySampler().fit((8, 8))
    assert np.array_equal(iid.sample(100, 5).sites, sample_iid(iid.density_, 100, 5))
    mc = MarkovChainSampler(alpha=0.1).fit((8, 8))
    assert mc.sample(100, 5) == simulate(mc.kernel_, 100, 5)
    so = MarkovChainSampler(alpha=0.1, persistence=0.7).fit((8, 8))
    ref = simulate_second_order(so.graph_, so.density_, 0.1, 0.7, 100, 5)
    assert np.array_equal(so.sample(100, 5).sites, ref.sites)
    assert so.descriptor == "second-order(alpha=0.1, persistence=0.7)"


def test_sample_scheme_and_gap():
    mc = MarkovChainSampler(alpha=0.3).fit((8, 8))
    s = mc.sample_scheme(0.25, 1)
    assert s.m_distinct == 16
    assert mc.spectral_gap() >= 0.3 - 1e-10


@pytest.mark.parametrize("kw", [{"alpha": 1.5}, {"persistence": 1.0}, {"connectivity": 5}])
def test_bad_params_rejected_at_fit(kw):
    with pytest.raises(ValidationError):
        MarkovChainSampler(**kw).fit((8, 8))


def test_reconstructor(rng):
    u = rng.random((8, 8))
    sysm = MeasurementSystem((8, 8), mask=np.arange(64))
    rec = L1Reconstructor().fit(sysm, dft2(u).ravel())
    assert rec.converged_ and rec.n_iter_ <= 5
    assert np.allclose(rec.image_, u) and rec.score(u) > 150
    assert np.allclose(rec.fit_predict(sysm, dft2(u).ravel()), u)
