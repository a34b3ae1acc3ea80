import warnings

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from facl.errors import ConfigurationError, InvalidInputError, TrainingError
from facl.losses import (DegenerateFeatureWarning, FeaturePairSet, LossWeights, cosine_similarity,
                         loss_facl, loss_orig, total_loss)

from helpers import check_generator_gradient, tiny_generator, tiny_surrogate
from oracles import central_difference_gradient


def test_cosine_examples():
    a = torch.tensor([1.0, 2.0, 2.0], dtype=torch.float64)
    b = torch.tensor([2.0, 1.0, 2.0], dtype=torch.float64)
    assert float(cosine_similarity(a, a)) == pytest.approx(1.0, abs=1e-12)
    assert float(cosine_similarity(a, b)) == pytest.approx(8 / 9, abs=1e-12)
    assert float(cosine_similarity(torch.tensor([1.0, 0.0]), torch.tensor([0.0, 3.0]))) == 0.0


def test_cosine_batch_mean():
    a = torch.tensor([[1.0, 0.0], [1.0, 0.0]])
    b = torch.tensor([[1.0, 0.0], [-1.0, 0.0]])
    assert float(cosine_similarity(a, b)) == 0.0


def test_cosine_of_zero_vectors_warns_and_is_zero():
    with pytest.warns(DegenerateFeatureWarning):
        assert float(cosine_similarity(torch.zeros(4), torch.zeros(4))) == 0.0


def test_cosine_shape_mismatch():
    with pytest.raises(InvalidInputError):
        cosine_similarity(torch.zeros(3), torch.zeros(4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_scale_invariance(seed, alpha, beta):
    g = torch.Generator().manual_seed(seed)
    a = torch.randn(5, 16, generator=g, dtype=torch.float64)
    b = torch.randn(5, 16, generator=g, dtype=torch.float64)
    assert abs(float(cosine_similarity(alpha * a, beta * b)) - float(cosine_similarity(a, b))) < 1e-6


def test_loss_orig_identity_and_negation():
    f = torch.randn(4, 32, dtype=torch.float64)
    assert float(loss_orig(f, f)) == pytest.approx(1.0, abs=1e-12)
    assert float(loss_orig(f, -f)) == pytest.approx(-1.0, abs=1e-12)


def test_loss_facl_identities():
    zm, zlh = torch.randn(3, 10, dtype=torch.float64), torch.randn(3, 10, dtype=torch.float64)
    assert abs(float(loss_facl(FeaturePairSet(zm, zm, zlh, zlh)))) < 1e-12
    assert float(loss_facl(FeaturePairSet(zm, -zm, zlh, zlh))) == pytest.approx(-2.0, abs=1e-12)


def test_feature_pair_shapes_must_agree():
    with pytest.raises(InvalidInputError):
        FeaturePairSet(torch.zeros(2, 3), torch.zeros(2, 3), torch.zeros(2, 4), torch.zeros(2, 4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_loss_bounds(seed):
    g = torch.Generator().manual_seed(seed)
    z = [torch.randn(4, 8, generator=g) * torch.rand(1, generator=g) * 10 for _ in range(4)]
    lo = float(loss_orig(z[0], z[1]))
    lf = float(loss_facl(FeaturePairSet(*z)))
    assert -1 - 1e-6 <= lo <= 1 + 1e-6
    assert -2 - 1e-6 <= lf <= 2 + 1e-6


def test_total_loss_arithmetic():
    assert total_loss(1.0, 0.0, LossWeights(1, 1)) == 1.0
    assert total_loss(0.5, -1.0, LossWeights(2, 3)) == -2.0
    assert total_loss(0.25, 0.7, LossWeights(1, 0)) == 0.25


def test_total_loss_rejects_non_finite():
    with pytest.raises(TrainingError):
        total_loss(float("nan"), 0.0)
    with pytest.raises(TrainingError):
        total_loss(torch.tensor(0.1), torch.tensor(float("inf")))


def test_weight_validation():
    with pytest.raises(ConfigurationError):
        LossWeights(0, 0)
    with pytest.raises(ConfigurationError):
        LossWeights(-1, 1)


def test_total_loss_gradient_matches_finite_differences():
    assert check_generator_gradient(0) < 1e-3


def test_loss_facl_zero_when_adversarial_equals_clean():
    sur = tiny_surrogate()
    x = torch.rand(2, 3, 16, 16, dtype=torch.float64) * 255
    from facl.spectral import BandThresholds, band_decompose
    from facl.training import tap_features

    m, l = band_decompose(x, BandThresholds(1, 8, 16))
    f = lambda v: tap_features(sur, "conv4_1", v)
    assert abs(float(loss_facl(FeaturePairSet(f(m), f(m), f(l), f(l))))) < 1e-5
