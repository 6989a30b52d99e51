import math

import numpy as np
import pytest

from mhpcg.diagnostics import (
    acf,
    choose_L,
    compare_traces,
    ess,
    first_lag_below,
    lag1_check,
    lemma1_check,
    trace_column,
)
from mhpcg.distributions import make_rng
from mhpcg.errors import ComponentMissing, DegenerateSeries, InvalidParams, LNotFound
from mhpcg.experiments import build_model, default_config
from mhpcg.kernels import normal_walk, uniform_independent
from mhpcg.models import BivariateNormalModel, get_sampler
from mhpcg.models.registry import CALIBRATION_BETA_SD
from mhpcg.runner import Trace, run_sampler


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_constant_series_is_degenerate():
    with pytest.raises(DegenerateSeries):
        acf(np.full(50, 2.0))
    with pytest.raises(DegenerateSeries):
        ess(np.ones(200))


def test_acf_matches_direct_biased_estimator():
    x = np.random.default_rng(0).standard_normal(300)
    r = acf(x, 10)
    xc = x - x.mean()
    direct = [float(xc[: 300 - k] @ xc[k:]) / float(xc @ xc) for k in range(11)]
    assert r[0] == 1.0
    assert np.allclose(r.values, direct, atol=1e-12)
    assert np.all(np.abs(r.values) <= 1.0 + 1e-12)


def test_iid_lag_one_inside_bartlett_band():
    r = acf(np.random.default_rng(1).standard_normal(10_000), 5)
    assert abs(r[1]) < r.bartlett_band(3.0)


def test_ar1_acf_decays_geometrically():
    n = 20_000
    r = acf(ar1(0.5, n, 2), 6)
    for k in range(1, 7):
        # Bartlett variance for an AR(1)
        var = (1 + 0.25) * (1 - 0.25**k) / (1 - 0.25) - 2 * k * 0.25**k
        assert abs(r[k] - 0.5**k) < 3 * math.sqrt(var / n)


def test_ess_of_iid_is_close_to_length():
    x = np.random.default_rng(3).standard_normal(10_000)
    assert abs(ess(x) - 10_000) < 1_000


def test_ess_of_repeated_pairs_is_small():
    x = np.repeat(np.random.default_rng(4).standard_normal(2_000), 2)
    assert ess(x) < 0.6 * x.size


def test_ess_of_ar1_matches_formula():
    n = 50_000
    expected = n * (1 - 0.9) / (1 + 0.9)
    assert abs(ess(ar1(0.9, n, 5)) - expected) < 0.2 * expected


def test_ess_needs_length():
    with pytest.raises(InvalidParams):
        ess(np.arange(50.0))


def _trace(**cols):
    return Trace({k: np.asarray(v) for k, v in cols.items()})


def test_self_comparison():
    rng = np.random.default_rng(6)
    tr = _trace(a=rng.standard_normal(2000), Z=rng.standard_normal((2000, 3)))
    rep = compare_traces(tr, tr, ["a", "Z[2]"])
    for c in ("a", "Z[2]"):
        assert rep.columns[c]["ks_statistic"] == 0.0
        qq = rep.columns[c]["qq"]
        assert np.array_equal(qq[:, 0], qq[:, 1])
        assert np.all(np.diff(qq, axis=0) >= 0)
    assert np.array_equal(rep.corr_a, rep.corr_b)


def test_comparison_is_symmetric():
    rng = np.random.default_rng(7)
    a = _trace(x=rng.standard_normal(1000))
    b = _trace(x=rng.standard_normal(1500) * 1.3)
    ab = compare_traces(a, b, ["x"]).columns["x"]
    ba = compare_traces(b, a, ["x"]).columns["x"]
    assert ab["ks_statistic"] == ba["ks_statistic"] and ab["ks_pvalue"] == pytest.approx(ba["ks_pvalue"])
    assert ab["var_a"] == ba["var_b"] and np.array_equal(ab["qq"], ba["qq"][:, ::-1])


def test_missing_component():
    tr = _trace(a=np.zeros(10), Z=np.zeros((10, 2)))
    for name in ("b", "Z[3]", "Z", "Z[x]"):
        with pytest.raises(ComponentMissing):
            trace_column(tr, name)


def test_report_serializes(tmp_path):
    rng = np.random.default_rng(8)
    tr = _trace(a=rng.standard_normal(500), b=rng.standard_normal(500))
    rep = compare_traces(tr, tr, ["a", "b"], labels=("s4", "s5"))
    assert len(rep.to_dict()["columns"]["a"]["qq"]) == 99
    rep.write_qq_csv(tmp_path / "qq.csv")
    lines = (tmp_path / "qq.csv").read_text().splitlines()
    assert lines[0] == "column,percentile,s4,s5" and len(lines) == 1 + 2 * 99


def test_fig1_comparison_direction():
    m = BivariateNormalModel(0.9)
    t4 = run_sampler(get_sampler("sampler4"), m, T=10_000, burnin=1_000, seed=1)
    t5 = run_sampler(get_sampler("sampler5"), m, T=10_000, burnin=1_000, seed=1, stream=1)
    rep = compare_traces(t4, t5, ["psi1", "psi2"], labels=("sampler4", "sampler5"))
    assert rep.corr_b[0, 1] < rep.corr_a[0, 1] - 0.1


def test_choose_L_on_the_bivariate_conditional():
    m = BivariateNormalModel(0.9)
    target = lambda v: float(m.cond_logpdf(v, 1.0))
    L = choose_L(target, normal_walk(math.sqrt(3.0)), 5_000, make_rng(1), start=0.9)
    assert 5 <= L <= 9


def test_choose_L_is_monotone_in_threshold():
    m = BivariateNormalModel(0.9)
    target = lambda v: float(m.cond_logpdf(v, 1.0))
    Ls = [choose_L(target, normal_walk(math.sqrt(3.0)), 5_000, make_rng(2), start=0.9, threshold=t) for t in (0.2, 0.1, 0.05, 0.02)]
    assert Ls == sorted(Ls)


def test_choose_L_with_exact_independence_proposal():
    # uniform target, uniform independence proposal: every move is an exact draw
    target = lambda v: math.log(0.25)
    assert choose_L(target, uniform_independent(4), 4_000, make_rng(3), start=1) == 1


def test_choose_L_reports_failure():
    target = lambda v: -0.5 * v * v
    with pytest.raises(LNotFound):
        choose_L(target, normal_walk(1e-3), 2_000, make_rng(4), start=0.0, max_lag=20)
    with pytest.raises(InvalidParams):
        choose_L(target, normal_walk(1.0), 10, make_rng(4), start=0.0)


def test_first_lag_and_lag1_check():
    r = acf(ar1(0.5, 20_000, 9), 20)
    assert first_lag_below(r, 0.05) in (4, 5, 6)
    assert first_lag_below(r, -1.0) is None
    r1, ok = lag1_check(ar1(0.5, 5_000, 9))
    assert not ok and r1 == pytest.approx(0.5, abs=0.05)


def test_calibration_beta_needs_many_iterations():
    cfg = default_config("calibration")
    m = build_model("calibration", cfg.params)
    state = m.initial_state()
    target = lambda b: math.fsum(m.log_beta_marginal({**state, "beta": b}))
    L = choose_L(target, normal_walk(CALIBRATION_BETA_SD), 20_000, make_rng(5), start=1.0)
    assert 15 <= L <= 25


def test_lemma1_identity_and_sign():
    jump = normal_walk(math.sqrt(3.0))
    res = lemma1_check(BivariateNormalModel(0.9), jump, 100_000, make_rng(1))
    assert res.identity_error <= 1e-12
    assert res.mean_log_ratio > 0 and res.ci_log_ratio[0] > 0
    assert res.ci_ratio[1] >= 1.0
    # closed form of the mean log-ratio for a bivariate normal
    expected = (1 + 0.81) / (2 * 0.19) - 0.5
    assert abs(res.mean_log_ratio - expected) < (res.ci_log_ratio[1] - res.ci_log_ratio[0])


def test_lemma1_independence_case():
    res = lemma1_check(BivariateNormalModel(0.0), normal_walk(1.0), 10_000, make_rng(2))
    assert res.identity_error <= 1e-12
    assert abs(res.mean_ratio - 1.0) <= 1e-12


def test_lemma1_sign_flip_symmetry():
    res = lemma1_check(BivariateNormalModel(-0.9), normal_walk(math.sqrt(3.0)), 100_000, make_rng(3))
    assert res.mean_log_ratio > 0 and res.ci_log_ratio[0] > 0


def test_lemma1_refuses_other_jumps():
    with pytest.raises(InvalidParams):
        lemma1_check(BivariateNormalModel(0.5), uniform_independent(3), 10, make_rng(0))
