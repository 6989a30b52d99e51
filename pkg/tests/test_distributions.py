import math

import numpy as np
import pytest
from scipy import integrate, stats

from mhpcg.distributions import (
    SeededRng,
    binomial,
    cholesky_factor,
    discrete_uniform,
    draw,
    gamma,
    invgamma,
    log_pdf,
    lognormal,
    make_rng,
    mvnormal,
    normal,
    poisson,
)
from mhpcg.errors import InvalidParams

N = 100_000

# (spec, mean, variance) from closed forms
MOMENTS = [
    (normal(1.5, 2.0), 1.5, 4.0),
    (gamma(3.0, 2.0), 1.5, 0.75),
    (invgamma(5.0, 2.0), 0.5, 0.25 / 3.0),
    (poisson(4.2), 4.2, 4.2),
    (binomial(12, 0.3), 3.6, 12 * 0.3 * 0.7),
    (discrete_uniform(6), 3.5, 35.0 / 12.0),
    (lognormal(0.2, 0.5), math.exp(0.2 + 0.125), (math.exp(0.25) - 1) * math.exp(0.4 + 0.25)),
]


@pytest.mark.parametrize("spec, mean, var", MOMENTS, ids=[m[0].family for m in MOMENTS])
def test_moments_match_closed_form(spec, mean, var):
    x = np.asarray(draw(spec, make_rng(11), size=N), dtype=float)
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / N)
    # variance of the sample variance via the fourth central moment
    m4 = np.mean((x - x.mean()) ** 4)
    assert abs(x.var(ddof=1) - var) < 4 * math.sqrt((m4 - var**2) / N)


def test_gamma_mean_within_three_se():
    k, r = 2.5, 0.7
    x = draw(gamma(k, r), make_rng(3), size=N)
    assert abs(x.mean() - k / r) < 3 * math.sqrt(k / r**2 / N)


def test_discrete_uniform_degenerate_support():
    assert set(draw(discrete_uniform(1), make_rng(0), size=100)) == {1}


def test_bivariate_normal_correlation():
    x = draw(mvnormal([0.0, 0.0], [[1.0, 0.9], [0.9, 1.0]]), make_rng(5), size=N)
    assert x.shape == (N, 2)
    assert abs(np.corrcoef(x.T)[0, 1] - 0.9) < 0.01


def test_mvnormal_q_dimensional_moments():
    cov = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.4], [0.0, -0.4, 0.5]])
    x = draw(mvnormal([1.0, 0.0, -1.0], cov), make_rng(8), size=N)
    assert np.allclose(x.mean(axis=0), [1.0, 0.0, -1.0], atol=4 * math.sqrt(2.0 / N))
    assert np.allclose(np.cov(x.T), cov, atol=0.03)


def test_standard_normal_mode():
    assert log_pdf(normal(0.0, 1.0), 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)


def test_poisson_mass_sums_to_one():
    lam = 7.3
    k = np.arange(0, 200)
    assert abs(np.exp(log_pdf(poisson(lam), k)).sum() - 1.0) < 1e-10


def test_invgamma_density_matches_differentiated_cdf():
    spec = invgamma(1.0, 0.25)

    def cdf(t):
        return integrate.quad(lambda u: math.exp(log_pdf(spec, u)), 0.0, t, epsabs=1e-13, epsrel=1e-12)[0]

    h = 1e-4
    for x in (0.1, 0.3, 1.0, 2.5):
        numeric = (cdf(x + h) - cdf(x - h)) / (2 * h)
        assert numeric == pytest.approx(math.exp(log_pdf(spec, x)), abs=1e-6)


@pytest.mark.parametrize(
    "spec, lo, hi",
    [
        (normal(0.5, 1.3), -np.inf, np.inf),
        (gamma(2.2, 0.8), 0.0, np.inf),
        (invgamma(3.0, 1.5), 0.0, np.inf),
        (lognormal(-0.3, 0.6), 0.0, np.inf),
    ],
    ids=lambda v: getattr(v, "family", ""),
)
def test_continuous_densities_integrate_to_one(spec, lo, hi):
    total = integrate.quad(lambda u: math.exp(log_pdf(spec, u)), lo, hi, epsabs=1e-12, limit=200)[0]
    assert abs(total - 1.0) < 1e-6


@pytest.mark.parametrize("spec, n", [(binomial(15, 0.35), 15), (discrete_uniform(9), 9)])
def test_discrete_masses_sum_to_one(spec, n):
    k = np.arange(0, n + 2)
    assert abs(np.exp(log_pdf(spec, k)).sum() - 1.0) < 1e-12


def test_log_pdf_matches_scipy():
    assert log_pdf(gamma(3.0, 2.0), 1.1) == pytest.approx(stats.gamma(3.0, scale=0.5).logpdf(1.1), rel=1e-12)
    assert log_pdf(invgamma(2.0, 3.0), 0.7) == pytest.approx(stats.invgamma(2.0, scale=3.0).logpdf(0.7), rel=1e-12)
    assert log_pdf(binomial(10, 0.2), 3) == pytest.approx(stats.binom(10, 0.2).logpmf(3), rel=1e-12)
    cov = [[1.0, 0.9], [0.9, 1.0]]
    x = [0.3, -0.2]
    assert log_pdf(mvnormal([0, 0], cov), x) == pytest.approx(stats.multivariate_normal([0, 0], cov).logpdf(x), rel=1e-12)


def test_out_of_support_is_minus_infinity():
    assert log_pdf(gamma(2.0, 1.0), -1.0) == -np.inf
    assert log_pdf(invgamma(2.0, 1.0), 0.0) == -np.inf
    assert log_pdf(poisson(2.0), 1.5) == -np.inf
    assert log_pdf(binomial(3, 0.5), 4) == -np.inf
    assert log_pdf(discrete_uniform(4), 0) == -np.inf
    assert log_pdf(lognormal(0.0, 1.0), -2.0) == -np.inf


def test_binomial_with_zero_probability():
    assert log_pdf(binomial(5, 0.0), 0) == 0.0
    assert draw(binomial(5, 0.0), make_rng(1)) == 0


@pytest.mark.parametrize(
    "build",
    [
        lambda: gamma(0.0, 1.0),
        lambda: gamma(1.0, -2.0),
        lambda: invgamma(-1.0, 1.0),
        lambda: normal(0.0, 0.0),
        lambda: binomial(-1, 0.5),
        lambda: binomial(3, 1.5),
        lambda: discrete_uniform(0),
        lambda: poisson(-1.0),
        lambda: mvnormal([0, 0], [[1.0, 2.0], [2.0, 1.0]]),
        lambda: mvnormal([0, 0], [[1.0, 0.5], [0.4, 1.0]]),
    ],
)
def test_invalid_parameters(build):
    with pytest.raises(InvalidParams):
        build()


def test_same_stream_reproduces_draws():
    a = draw(normal(0, 1), SeededRng(42, 3).generator(), size=50)
    b = draw(normal(0, 1), SeededRng(42, 3).generator(), size=50)
    c = draw(normal(0, 1), SeededRng(42, 4).generator(), size=50)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_cholesky_factor_is_cached_and_exact():
    cov = np.array([[4.0, 1.0], [1.0, 3.0]])
    f = cholesky_factor(cov)
    assert f is cholesky_factor(cov.copy())
    assert np.allclose(f @ f.T, cov, atol=1e-14)


def test_singular_psd_covariance_is_accepted():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = draw(mvnormal([0.0, 0.0], cov), make_rng(2), size=1000)
    assert np.allclose(x[:, 0], x[:, 1])
