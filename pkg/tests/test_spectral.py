import math

import numpy as np
import pytest

from hgtlab.errors import DomainError
from hgtlab.spectral import domain_monotonicity_check, principal_eigen


@pytest.fixture(scope="module")
def ground():
    return principal_eigen(0.1, 1.0)


def test_harmonic_oscillator_oracle(ground):
    # -eps^2 N'' + g z^2 N has ground energy eps sqrt(g), so lam = 1 - eps sqrt(g)
    assert ground.lam == pytest.approx(0.9, abs=1e-3)


def test_eigenvector_positive_and_normalised(ground):
    h = 20.0 / (ground.n_points - 1)
    assert np.all(ground.eigenvector > 0)
    assert math.sqrt(h * np.sum(ground.eigenvector**2)) == pytest.approx(1.0, abs=1e-12)


def test_residual_and_bound(ground):
    assert ground.residual <= 1e-8
    assert ground.lam <= 1 + 1e-8


def test_eigenvector_matches_gaussian(ground):
    z = ground.nodes[1:-1]
    eps = 0.1
    gauss = np.exp(-(z**2) / (2 * eps))
    gauss /= math.sqrt((z[1] - z[0]) * np.sum(gauss**2))
    assert np.max(np.abs(ground.eigenvector - gauss)) < 1e-3


@pytest.mark.parametrize("eps,g", [(0.4, 1.0), (0.2, 2.0), (0.05, 0.5), (0.1, 0.1)])
def test_lambda_below_one(eps, g):
    assert principal_eigen(eps, g).lam <= 1.0


def test_lambda_decreases_with_eps():
    assert principal_eigen(0.2, 1.0).lam <= principal_eigen(0.1, 1.0).lam


def test_rate_proportional_to_eps():
    gaps = [(eps, 1 - principal_eigen(eps, 1.0).lam) for eps in (0.4, 0.2, 0.1, 0.05)]
    for (e0, d0), (e1, d1) in zip(gaps, gaps[1:]):
        assert d1 < d0
        assert (d0 / d1) / (e0 / e1) == pytest.approx(1.0, rel=0.1)


def test_domain_monotonicity():
    assert domain_monotonicity_check(0.1, 1.0, [(-2, 2), (-5, 5), (-10, 10)])
    assert domain_monotonicity_check(0.1, 1.0, [(-3, 3)])


def test_domain_saturation():
    a = principal_eigen(0.1, 1.0, (-10, 10), 4001).lam
    b = principal_eigen(0.1, 1.0, (-20, 20), 8001).lam
    assert abs(a - b) <= 1e-6


def test_nested_domains_required():
    with pytest.raises(DomainError):
        domain_monotonicity_check(0.1, 1.0, [(-5, 5), (-2, 2)])


def test_preconditions():
    with pytest.raises(DomainError):
        principal_eigen(0.1, 1.0, n_points=10)
    with pytest.raises(DomainError):
        principal_eigen(0.1, 1.0, domain=(-0.5, 0.5))


def test_json_fields(ground):
    assert set(ground.to_dict()) == {"lambda", "epsilon", "g", "domain", "n_points", "residual"}
