import json
import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import logsumexp

from mhpcg.distributions import make_rng
from mhpcg.errors import InvalidParams
from mhpcg.experiments import (
    ExperimentConfig,
    build_model,
    default_config,
    load_config,
    read_dataset,
    simulate_dataset,
    write_dataset,
)
from mhpcg.models import (
    CalibrationModel,
    FactorModel,
    SpectralModel,
    energy_grid,
    expected_counts,
    get_sampler,
    load_basis,
    save_basis,
    simulate_factor,
    simulate_spectral,
    synthesize_pca_basis,
)
from mhpcg.models.io import load_counts, save_counts
from mhpcg.spec import DIRECT


def total(terms):
    return math.fsum(terms) if isinstance(terms, list) else float(terms)


@pytest.fixture(scope="module")
def toy_spectral():
    E = np.array([0.5, 1.0, 1.7, 2.9, 4.0])
    X = np.array([31, 14, 22, 4, 2])
    return SpectralModel(E, X)


def spectral_state(XL=None, **kw):
    s = {"alpha": 20.0, "beta": 1.1, "gamma": 0.8, "mu": 3, "phi": 0.3, "XL": np.zeros(5, dtype=np.int64)}
    s.update(kw)
    if XL is not None:
        s["XL"] = XL
    return s


PARAM_POINTS = [
    {"beta": 1.1, "gamma": 0.8, "mu": 3, "phi": 0.3},
    {"beta": 0.4, "gamma": 2.5, "mu": 1, "phi": 0.0},
    {"beta": 2.0, "gamma": 0.1, "mu": 5, "phi": 1.2},
]


def _log_quad(logf, lo, hi, shift):
    val = integrate.quad(lambda a: math.exp(logf(a) - shift), lo, hi, epsabs=0, epsrel=1e-12, limit=400)[0]
    return math.log(val) + shift


def test_spectral_alpha_integral_matches_marginal(toy_spectral):
    m = toy_spectral
    diffs = []
    for p in PARAM_POINTS:
        s = spectral_state(**p)
        mode = m.S / m._R(s)
        shift = total(m.log_posterior({**s, "alpha": mode}))
        lo, hi = mode * 0.2, mode * 3.0
        integral = _log_quad(lambda a: total(m.log_posterior({**s, "alpha": a})), lo, hi, shift)
        diffs.append(integral - total(m.log_marginal(s)))
    assert np.ptp(diffs) < 1e-6
    # the constant is log Gamma(S + 1)
    assert diffs[0] == pytest.approx(math.lgamma(m.S + 1), abs=1e-6)


@pytest.mark.parametrize("point", PARAM_POINTS)
def test_line_count_sum_recovers_posterior(toy_spectral, point):
    m = toy_spectral
    k = point["mu"] - 1
    aug = []
    for c in range(m.X[k] + 1):
        XL = np.zeros(5, dtype=np.int64)
        XL[k] = c
        aug.append(total(m.log_joint_augmented(spectral_state(XL=XL, **point))))
    assert logsumexp(aug) == pytest.approx(total(m.log_posterior(spectral_state(**point))), abs=1e-9)


def test_line_count_constant_is_shared(toy_spectral):
    m = toy_spectral
    consts = []
    for p in PARAM_POINTS:
        k = p["mu"] - 1
        vals = []
        for c in range(m.X[k] + 1):
            XL = np.zeros(5, dtype=np.int64)
            XL[k] = c
            vals.append(total(m.log_marginal_augmented(spectral_state(XL=XL, **p))))
        consts.append(logsumexp(vals) - total(m.log_marginal(spectral_state(**p))))
    assert np.ptp(consts) < 1e-9


def test_line_counts_off_the_line_bin_have_no_mass(toy_spectral):
    XL = np.array([1, 0, 0, 0, 0])
    assert total(toy_spectral.log_joint_augmented(spectral_state(XL=XL))) == -math.inf
    assert toy_spectral.xl_logpdf(spectral_state(XL=XL)) == -math.inf


def _conditional_offsets(target, logpdf, states):
    return [total(target(s)) - total(logpdf(s)) for s in states]


def test_spectral_exact_conditionals_are_proportional_to_target(toy_spectral):
    m = toy_spectral
    XL = np.array([0, 0, 5, 0, 0])
    alphas = [spectral_state(XL=XL, alpha=a) for a in (5.0, 20.0, 61.0)]
    assert np.ptp(_conditional_offsets(m.log_joint_augmented, m.alpha_logpdf, alphas)) < 1e-9
    assert np.ptp(_conditional_offsets(m.log_posterior, m.alpha_logpdf, alphas)) < 1e-9
    gammas = [spectral_state(XL=XL, gamma=g) for g in (0.2, 1.0, 3.3)]
    assert np.ptp(_conditional_offsets(m.log_joint_augmented, m.gamma_logpdf, gammas)) < 1e-9
    xls = [spectral_state(XL=np.array([0, 0, c, 0, 0])) for c in (0, 7, 22)]
    assert np.ptp(_conditional_offsets(m.log_joint_augmented, m.xl_logpdf, xls)) < 1e-9


def _chi_square_p(draws, probs):
    support = np.arange(len(probs))
    observed = np.array([(draws == k).sum() for k in support])
    expected = probs * len(draws)
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    obs, exp = obs[exp > 0], exp[exp > 0]
    return stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue


def test_spectral_exact_draws_follow_their_laws(toy_spectral):
    m = toy_spectral
    rng = make_rng(4)
    s = spectral_state(XL=np.array([0, 0, 6, 0, 0]))
    n = 4000
    a = np.array([m.draw_alpha(s, rng)["alpha"] for _ in range(n)])
    assert stats.kstest(a, stats.gamma(m.S + 1, scale=1 / m._R(s)).cdf).pvalue > 0.001
    g = np.array([m.draw_gamma(s, rng)["gamma"] for _ in range(n)])
    rate = s["alpha"] * math.exp(-s["phi"] / m.E[2])
    assert stats.kstest(g, stats.gamma(7, scale=1 / rate).cdf).pvalue > 0.001
    xl = np.array([m.draw_xl(s, rng)["XL"] for _ in range(n)])
    assert not np.delete(xl, 2, axis=1).any()
    probs = stats.binom(m.X[2], m.xl_probability(s)).pmf(np.arange(m.X[2] + 1))
    assert _chi_square_p(xl[:, 2], probs) > 0.001


def test_simulated_totals_match_expected_counts():
    E = energy_grid(550)
    params = {"alpha": 37.62, "beta": 1.0, "gamma": 40 / 37.62, "mu": 250, "phi": 0.2}
    lam = expected_counts(E, **params)
    totals = [simulate_spectral(params, E, make_rng(s)).sum() for s in range(200)]
    assert abs(np.mean(totals) - lam.sum()) < 4 * math.sqrt(lam.sum() / 200)
    assert lam[249] - expected_counts(E, **{**params, "gamma": 0.0})[249] == pytest.approx(40 * math.exp(-0.2 / E[249]))


def test_zero_line_strength_leaves_no_spike():
    E = energy_grid(50)
    lam = expected_counts(E, 10.0, 1.0, 0.0, 20, 0.2)
    assert np.allclose(lam, 10.0 * E**-1.0 * np.exp(-0.2 / E))


def test_spectral_model_rejects_bad_data():
    with pytest.raises(InvalidParams):
        SpectralModel([1.0, 2.0], [1])
    with pytest.raises(InvalidParams):
        SpectralModel([0.0, 2.0], [1, 2])


# -- calibration -----------------------------------------------------------------


@pytest.fixture(scope="module")
def toy_calibration():
    E = np.linspace(0.5, 6.0, 10)
    A0, Q = synthesize_pca_basis(E, 2)
    Y = np.array([80, 71, 45, 30, 22, 15, 9, 7, 6, 3])
    return CalibrationModel(E, Y, A0, Q)


def test_calibration_alpha_integral_matches_beta_marginal(toy_calibration):
    m = toy_calibration
    diffs = []
    for beta, Z in ((1.0, [0.0, 0.0]), (1.4, [1.0, -0.5]), (0.6, [-2.0, 1.5])):
        s = {"Z": np.array(Z), "alpha": 1.0, "beta": beta}
        R = m._pieces(s)[1]
        mode = m.S / R
        shift = total(m.log_likelihood({**s, "alpha": mode}))
        integral = _log_quad(lambda a: total(m.log_likelihood({**s, "alpha": a})), mode * 0.3, mode * 2.5, shift)
        diffs.append(integral - total(m.log_beta_marginal(s)))
    assert np.ptp(diffs) < 1e-6


def test_calibration_beta_marginal_normalizes_against_grid(toy_calibration):
    # beta density at fixed Z on a grid, from quadrature over alpha of the 2-D target
    m = toy_calibration
    Z = np.array([0.5, 0.2])
    betas = np.linspace(0.3, 2.5, 41)
    lm = np.array([total(m.log_beta_marginal({"Z": Z, "alpha": 1.0, "beta": b})) for b in betas])
    two_d = []
    for b in betas:
        s = {"Z": Z, "alpha": 1.0, "beta": b}
        mode = m.S / m._pieces(s)[1]
        two_d.append(_log_quad(lambda a: total(m.log_likelihood({**s, "alpha": a})), mode * 0.3, mode * 2.5, lm.max() + math.lgamma(m.S + 1)))
    lm -= logsumexp(lm)
    two_d = np.array(two_d) - logsumexp(two_d)
    assert np.max(np.abs(lm - two_d)) < 1e-6


def test_calibration_alpha_draw_is_gamma(toy_calibration):
    m = toy_calibration
    s = {"Z": np.array([0.3, -0.1]), "alpha": 5.0, "beta": 1.2}
    offs = _conditional_offsets(m.log_likelihood, m.alpha_logpdf, [{**s, "alpha": a} for a in (50.0, 90.0, 140.0)])
    assert np.ptp(offs) < 1e-9
    rng = make_rng(2)
    a = np.array([m.draw_alpha(s, rng)["alpha"] for _ in range(3000)])
    R = m._pieces(s)[1]
    assert stats.kstest(a, stats.gamma(m.S + 1, scale=1 / R).cdf).pvalue > 0.001


def test_calibration_z_draw_is_standard_normal(toy_calibration):
    rng = make_rng(5)
    z = np.array([toy_calibration.draw_z({}, rng)["Z"] for _ in range(4000)])
    for j in range(2):
        assert stats.kstest(z[:, j], "norm").pvalue > 0.001
    assert abs(np.corrcoef(z.T)[0, 1]) < 4 / math.sqrt(4000)


def test_pca_basis_is_orthogonal_and_keeps_area_positive():
    E = np.linspace(0.225, 10.995, 1078)
    A0, Q = synthesize_pca_basis(E, 7, rng=make_rng(3))
    G = Q.T @ Q
    assert np.allclose(G - np.diag(np.diag(G)), 0.0, atol=1e-12)
    assert np.all(np.diff(np.diag(G)) < 0)
    Z = make_rng(9).standard_normal((1000, 7))
    assert np.all(A0[None, :] + Z @ Q.T > 0)


def test_basis_round_trip(tmp_path):
    E = np.linspace(0.5, 8.0, 30)
    A0, Q = synthesize_pca_basis(E, 3)
    save_basis(tmp_path / "b.csv", A0, Q)
    A0b, Qb = load_basis(tmp_path / "b.csv")
    assert np.array_equal(A0b, A0) and np.array_equal(Qb, Q)
    (tmp_path / "bad.csv").write_text("A0,Q2\n1,2\n")
    with pytest.raises(InvalidParams):
        load_basis(tmp_path / "bad.csv")


def test_nonpositive_area_has_no_mass(toy_calibration):
    s = {"Z": np.array([-100.0, 0.0]), "alpha": 1.0, "beta": 1.0}
    assert total(toy_calibration.log_beta_marginal(s)) == -math.inf


# -- factor ----------------------------------------------------------------------


def _factor_state(model, rng):
    s = {"Z": rng.standard_normal((model.n, model.q)), "beta": rng.standard_normal((model.q, model.p))}
    s.update({name: float(v) for name, v in zip(model.sigmas, 0.5 + rng.uniform(size=model.p))})
    return s


def test_factor_z_integral_matches_marginal_by_quadrature():
    Y = np.array([[0.7, -1.2]])
    m = FactorModel(Y, q=1)
    rng = make_rng(1)
    diffs = []
    for _ in range(3):
        s = _factor_state(m, rng)
        peak = max(total(m.log_joint({**s, "Z": np.array([[z]])})) for z in np.linspace(-6, 6, 241))
        val = _log_quad(lambda z: total(m.log_joint({**s, "Z": np.array([[z]])})), -30, 30, peak)
        diffs.append(val - total(m.log_marginal(s)))
    assert np.ptp(diffs) < 1e-4
    assert diffs[0] == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-4)


def test_factor_marginal_matches_multivariate_normal():
    Y = make_rng(0).standard_normal((3, 2))
    m = FactorModel(Y, q=1)
    rng = make_rng(2)
    diffs = []
    for _ in range(4):
        s = _factor_state(m, rng)
        beta, sig = s["beta"], m.sigma2(s)
        cov = np.diag(sig) + beta.T @ beta
        lik = stats.multivariate_normal(np.zeros(2), cov).logpdf(Y).sum()
        prior = math.fsum(m._prior_terms(beta, sig)) + 0.5 * m.n * float(np.log(sig).sum())
        diffs.append(total(m.log_marginal(s)) - lik - prior)
    assert np.ptp(diffs) < 1e-10


def test_factor_exact_conditionals_are_proportional_to_target():
    Y = make_rng(3).standard_normal((6, 4))
    m = FactorModel(Y, q=2)
    rng = make_rng(4)
    base = _factor_state(m, rng)
    zs = [{**base, "Z": rng.standard_normal((6, 2))} for _ in range(3)]
    assert np.ptp(_conditional_offsets(m.log_joint, m.z_logpdf, zs)) < 1e-9
    bs = [{**base, "beta": rng.standard_normal((2, 4))} for _ in range(3)]
    assert np.ptp(_conditional_offsets(m.log_joint, m.beta_logpdf, bs)) < 1e-9
    for j, name in enumerate(m.sigmas):
        ss = [{**base, name: v} for v in (0.2, 1.0, 4.0)]
        assert np.ptp(_conditional_offsets(m.log_joint, m._sigma_logpdf(j), ss)) < 1e-9


def test_factor_exact_draws_follow_their_laws():
    Y = make_rng(3).standard_normal((6, 3))
    m = FactorModel(Y, q=1)
    rng = make_rng(7)
    s = _factor_state(m, rng)
    n = 3000
    sig = np.array([m._sigma_drawer(0)(s, rng)["sigma2_1"] for _ in range(n)])
    ig = m.sigma_conditional(s, 0).params
    assert stats.kstest(sig, stats.invgamma(ig["shape"], scale=ig["scale"]).cdf).pvalue > 0.001
    z = np.array([m.draw_z(s, rng)["Z"][0, 0] for _ in range(n)])
    zc = m.z_conditional(s)
    mean, var = float(np.asarray(zc.params["mean"])[0, 0]), float(np.asarray(zc.params["cov"])[0, 0])
    assert stats.kstest(z, stats.norm(mean, math.sqrt(var)).cdf).pvalue > 0.001
    b = np.array([m.draw_beta(s, rng)["beta"][0, 2] for _ in range(n)])
    bc = m.beta_conditional(s, 2).params
    assert stats.kstest(b, stats.norm(float(bc["mean"][0]), math.sqrt(float(bc["cov"][0, 0]))).cdf).pvalue > 0.001


def test_simulate_factor_designs():
    Y, truth = simulate_factor(5, 0, 20, make_rng(1))
    assert Y.shape == (20, 5) and truth["beta"].shape == (0, 5)
    m = FactorModel(Y, q=0)
    s = m.initial_state()
    assert total(m.log_marginal(s)) == pytest.approx(total(m.log_joint(s)), abs=1e-9)
    for q in (30, 2):
        Y, truth = simulate_factor(50, q, 100, make_rng(2))
        assert Y.shape == (100, 50) and truth["Z"].shape == (100, q)
    with pytest.raises(InvalidParams):
        simulate_factor(2, 3, 10, make_rng(0))


# -- registry, io, experiments ------------------------------------------------------


def test_registry_step_counts():
    assert len(get_sampler("sampler6", n_bins=8).steps) == 6
    assert len(get_sampler("sampler11", n_bins=8).steps) == 5
    assert all(s.kind == DIRECT for s in get_sampler("sampler12", p=5, q=2, n_obs=10).steps)


def test_counts_round_trip_and_header_check(tmp_path):
    E, X = np.array([0.3, 1.0 / 3.0]), np.array([4, 0])
    save_counts(tmp_path / "c.csv", E, X)
    E2, X2 = load_counts(tmp_path / "c.csv")
    assert np.array_equal(E2, E) and np.array_equal(X2, X)
    (tmp_path / "bad.csv").write_text("e,c\n1,2\n")
    with pytest.raises(InvalidParams, match="header"):
        load_counts(tmp_path / "bad.csv")
    (tmp_path / "neg.csv").write_text("energy,count\n1,-2\n")
    with pytest.raises(InvalidParams):
        load_counts(tmp_path / "neg.csv")


@pytest.mark.parametrize("experiment", ["spectral", "calibration", "factor"])
def test_dataset_round_trip(tmp_path, experiment):
    params = default_config(experiment).params
    paths = write_dataset(experiment, params, 3, tmp_path)
    back = read_dataset(experiment, paths[0])
    fresh = simulate_dataset(experiment, params, 3)
    for key, val in back.items():
        assert np.array_equal(val, fresh[key])
    prov = json.loads(paths[-1].read_text())
    assert prov["seed"] == 3 and prov["experiment"] == experiment


def test_models_built_from_defaults():
    m = build_model("calibration", default_config("calibration").params)
    assert m.q == 7 and m.E.size == 1078
    f = build_model("factor", default_config("factor").params)
    assert (f.n, f.p, f.q) == (100, 5, 2)


def test_config_validation_and_loading(tmp_path):
    with pytest.raises(InvalidParams):
        default_config("spectral", T=100, burnin=200)
    with pytest.raises(InvalidParams):
        ExperimentConfig.from_dict({"experiment": "spectral", "bogus": 1})
    cfg = default_config("factor", T=500, burnin=100, seeds=(1, 2))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg
    path.write_text('{\n "experiment": "factor",\n}')
    with pytest.raises(InvalidParams, match="line 3"):
        load_config(path)
