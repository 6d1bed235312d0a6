import numpy as np
import pytest

from prioloss import (
    InvalidParams,
    ServiceDistribution,
    State,
    SystemParams,
    mean_preserving_erlang,
    validate,
)
from prioloss.model import distribution_from_spec


def test_validate_paper_setting_ok():
    p = SystemParams(1, 8, 4, 20, 2)
    assert validate(p) is p


def test_validate_zero_lambda1_ok():
    validate(SystemParams(0, 8, 4, 20, 2))  # pure M/M/c limit


@pytest.mark.parametrize("kwargs,bad_field", [
    (dict(lambda1=1, lambda2=8, mu1=4, mu2=20, c=0), "c"),
    (dict(lambda1=-1, lambda2=8, mu1=4, mu2=20, c=2), "lambda1"),
    (dict(lambda1=1, lambda2=0, mu1=4, mu2=20, c=2), "lambda2"),
    (dict(lambda1=1, lambda2=8, mu1=0, mu2=20, c=2), "mu1"),
    (dict(lambda1=1, lambda2=8, mu1=4, mu2=-2, c=2), "mu2"),
    (dict(lambda1=float("inf"), lambda2=8, mu1=4, mu2=20, c=2), "lambda1"),
])
def test_validate_rejects(kwargs, bad_field):
    with pytest.raises(InvalidParams) as exc:
        validate(SystemParams(**kwargs))
    assert exc.value.field == bad_field


def test_rho_derivation():
    p = SystemParams(1, 8, 4, 20, 2)
    assert p.rho1 == 0.25
    assert p.rho2 == 0.4


def test_state_bounds():
    State(2, 5, c=2)
    with pytest.raises(InvalidParams):
        State(3, 0, c=2)
    with pytest.raises(InvalidParams):
        State(0, -1, c=2)


def test_mean_preserving_erlang_r1():
    d = mean_preserving_erlang(4, 1)
    assert d.mean() == pytest.approx(0.25)
    assert d.shape == 1 and d.rate == 4  # r=1 Erlang is exponential


def test_mean_preserving_erlang_paper_shapes():
    d = mean_preserving_erlang(4, 5)
    assert d.shape == 5 and d.rate == 20
    assert d.mean() == pytest.approx(0.25)
    d = mean_preserving_erlang(20, 10)
    assert d.shape == 10 and d.rate == 200
    assert d.mean() == pytest.approx(0.05)


def test_mean_preserving_erlang_rejects():
    with pytest.raises(InvalidParams):
        mean_preserving_erlang(4, 0)
    with pytest.raises(InvalidParams):
        mean_preserving_erlang(-1, 5)


@pytest.mark.parametrize("dist", [
    ServiceDistribution.exponential(4.0),
    ServiceDistribution.erlang(5, 20.0),
    ServiceDistribution.erlang(10, 200.0),
    ServiceDistribution.deterministic(0.25),
])
def test_empirical_mean_matches_analytic(dist):
    rng = np.random.default_rng(2024)
    n = 1_000_000
    samples = dist.sample(rng, n)
    se = samples.std(ddof=1) / np.sqrt(n)
    assert abs(samples.mean() - dist.mean()) <= 5 * se + 1e-15


def test_distribution_from_spec():
    assert distribution_from_spec("exp", 4.0) == ServiceDistribution.exponential(4.0)
    assert distribution_from_spec("erlang:5", 4.0) == mean_preserving_erlang(4.0, 5)
    d = distribution_from_spec("det", 4.0)
    assert d.mean() == pytest.approx(0.25) and d.variance() == 0.0
    with pytest.raises(InvalidParams):
        distribution_from_spec("weibull", 4.0)
