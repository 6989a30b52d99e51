"""
Calibration uncertainty and a factor model
==========================================

Two further models where collapsing helps or hurts.

In the calibration model the effective area is a random curve built from a
few principal components Z. Drawing Z with (alpha, beta) integrated out and
then taking a single MH step for beta is not a valid sampler: the validator
flags it, and its draws lose the correlation between Z and beta. Repeating
the beta step L times gives an approximately valid sampler. L comes from a
pilot chain.

In the factor model, Sampler 13 integrates the factor scores out of the
loading and variance updates. On the default data set this speeds up some
of the slow variances (the second here) but not all of them.
"""
import math

import numpy as np

from mhpcg.diagnostics import acf, choose_L, trace_column
from mhpcg.distributions import make_rng
from mhpcg.experiments import build_model, default_config, run_experiment
from mhpcg.kernels import normal_walk
from mhpcg.models import get_sampler, parent_of
from mhpcg.models.registry import CALIBRATION_BETA_SD
from mhpcg.validator import validate

for name in ("sampler8", "sampler9", "sampler12", "sampler13"):
    v = validate(get_sampler(name), parent_of(name))
    print(f"{name:10s} {v.status}  {'; '.join(v.conditions)}")
print()

# Choosing L for the iterated beta update
cfg = default_config("calibration", T=5_000, burnin=2_000, seeds=(1,))
model = build_model("calibration", cfg.params)
state = model.initial_state()
target = lambda b: math.fsum(model.log_beta_marginal({**state, "beta": b}))
print("L from a pilot chain on beta:", choose_L(target, normal_walk(CALIBRATION_BETA_SD), 20_000, make_rng(5), start=1.0))

runs = run_experiment(cfg)
for (name, _), tr in runs.items():
    z2 = trace_column(tr, "Z[2]")
    print(
        f"{name}: corr(Z2, beta)={np.corrcoef(z2, tr['beta'])[0, 1]:+.3f}  "
        f"var(beta)={np.var(tr['beta']):.5f}  beta lag-1={acf(tr['beta'], 1)[1]:.3f}"
    )
print()

cfg = default_config("factor", T=5_000, burnin=2_000, seeds=(1,))
runs = run_experiment(cfg)
print("lag-1 autocorrelation of the idiosyncratic variances")
for (name, _), tr in runs.items():
    print(f"{name:10s} " + "  ".join(f"{acf(tr[f'sigma2_{j}'], 1)[1]:.3f}" for j in range(1, 6)))
