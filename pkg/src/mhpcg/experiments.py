"""Experiment configurations, datasets and model construction.

An experiment names a model family, the samplers to run on it, run lengths,
seeds and model parameters. Defaults follow the published simulation
designs. Datasets are simulated from a data seed kept apart from the chain
seeds, so the same data can be reused across samplers and replications.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .distributions import make_rng
from .errors import InvalidParams, MHPCGError
from .models import (
    CALIBRATION_START,
    CALIBRATION_TRUTH,
    FACTOR_START,
    FIG3_PARAMS,
    SPECTRAL_START,
    BivariateNormalModel,
    CalibrationModel,
    FactorModel,
    GaussianModel,
    SpectralModel,
    calibration_energies,
    energy_grid,
    get_sampler,
    simulate_calibration,
    simulate_factor,
    simulate_spectral,
    synthesize_pca_basis,
)
from .models.io import load_counts, load_matrix, save_counts, save_matrix, save_provenance
from .models.calibration import load_basis, save_basis
from .kernels import blocked_mh_update, mh_update, normal_walk
from .runner import run_sampler

__all__ = [
    "EXPERIMENTS",
    "REPORT_COLUMNS",
    "report_columns",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "simulate_dataset",
    "write_dataset",
    "read_dataset",
    "build_model",
    "registry_dims",
    "gaussian_toy",
    "run_experiment",
    "save_traces",
    "BlockedIdentityResult",
    "blocked_identity_check",
]

EXPERIMENTS = ("bivariate", "spectral", "calibration", "factor", "lemma1", "blocked-identity")
DATA_EXPERIMENTS = ("spectral", "calibration", "factor")

_DEFAULTS = {
    "bivariate": {
        "samplers": ("sampler4", "sampler5"),
        "T": 10_000,
        "burnin": 1_000,
        "params": {"rho": 0.9},
    },
    "spectral": {
        "samplers": ("sampler6", "sampler10", "sampler11"),
        "T": 20_000,
        "burnin": 10_000,
        "params": {"n": 550, "E_lo": 0.3, "E_hi": 7.0, "data_seed": 1, **FIG3_PARAMS, "start": dict(SPECTRAL_START)},
    },
    "calibration": {
        "samplers": ("sampler8", "sampler9"),
        "T": 20_000,
        "burnin": 10_000,
        "params": {
            "n": 1078,
            "E_lo": 0.225,
            "E_hi": 10.995,
            "q": 7,
            "data_seed": 1,
            **CALIBRATION_TRUTH,
            "start": dict(CALIBRATION_START),
        },
    },
    "factor": {
        "samplers": ("sampler12", "sampler13"),
        "T": 20_000,
        "burnin": 10_000,
        "params": {"p": 5, "q": 2, "n": 100, "a": 0.01, "b": 0.01, "data_seed": 26, "start": dict(FACTOR_START)},
    },
    "lemma1": {"samplers": (), "T": 100_000, "burnin": 0, "params": {"rho": 0.9, "jump_sd": math.sqrt(3.0)}},
    "blocked-identity": {"samplers": (), "T": 10_000, "burnin": 0, "params": {"data_seed": 1}},
}


# Scalar columns summarized in run reports.
REPORT_COLUMNS = {
    "bivariate": ("psi1", "psi2"),
    "spectral": ("alpha", "beta", "phi"),
    "calibration": ("alpha", "beta", "Z[1]", "Z[2]"),
}


def report_columns(experiment: str, params: dict) -> tuple:
    if experiment == "factor":
        return tuple(f"sigma2_{j + 1}" for j in range(int(params["p"])))
    return REPORT_COLUMNS.get(experiment, ())


@dataclass
class ExperimentConfig:
    """One experiment.

    Parameters
    ----------
    experiment : str
        One of :data:`EXPERIMENTS`.
    samplers : tuple of str
        Registry names to run.
    T, burnin : int
        Post-burnin sweeps and burn-in sweeps. For ``lemma1`` ``T`` is the
        number of replications, for ``blocked-identity`` the number of
        random configurations.
    seeds : tuple of int
        Chain seeds, one replication per seed.
    params : dict
        Model parameters; missing entries take the experiment's defaults.
    out : str
        Output directory.
    data : str, optional
        Dataset file to use instead of simulating one.
    """

    experiment: str
    samplers: tuple = ()
    T: int = 0
    burnin: int = 0
    seeds: tuple = (1,)
    params: dict = field(default_factory=dict)
    out: str = "out"
    data: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidParams(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        self.samplers = tuple(self.samplers)
        self.seeds = tuple(int(s) for s in self.seeds)
        merged = _merge(_DEFAULTS[self.experiment]["params"], self.params)
        self.params = merged
        if not self.seeds:
            raise InvalidParams("at least one seed is required")
        if not self.T > self.burnin >= 0:
            raise InvalidParams(f"need T > burnin >= 0, got T={self.T}, burnin={self.burnin}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samplers"] = list(self.samplers)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "experiment" not in d:
            raise InvalidParams("config needs an 'experiment' field")
        base = default_config(d["experiment"]).to_dict()
        unknown = set(d) - set(base)
        if unknown:
            raise InvalidParams(f"unknown config fields {sorted(unknown)}")
        base.update({k: v for k, v in d.items() if k != "params"})
        base["params"] = _merge(base["params"], d.get("params", {}))
        return cls(**base)


def _merge(defaults: dict, override: dict) -> dict:
    out = json.loads(json.dumps(defaults))
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in _DEFAULTS:
        raise InvalidParams(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    d = _DEFAULTS[experiment]
    cfg = {"experiment": experiment, "samplers": d["samplers"], "T": d["T"], "burnin": d["burnin"], "params": {}}
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParams(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(data)


# --------------------------------------------------------------------------
# Datasets


def _spectral_grid(params):
    return energy_grid(int(params["n"]), params["E_lo"], params["E_hi"])


def simulate_dataset(experiment: str, params: dict, seed: int) -> dict:
    """Simulate the dataset of ``experiment``.

    Returns
    -------
    dict
        Arrays keyed by role (``E`` and ``X`` for spectral data; ``E``,
        ``Y``, ``A0`` and ``Q`` for calibration; ``Y`` and ``truth`` for
        factor data).
    """
    rng = make_rng(seed)
    if experiment == "spectral":
        E = _spectral_grid(params)
        truth = {k: params[k] for k in ("alpha", "beta", "gamma", "mu", "phi")}
        return {"E": E, "X": simulate_spectral(truth, E, rng), "truth": truth}
    if experiment == "calibration":
        E = calibration_energies(int(params["n"]), params["E_lo"], params["E_hi"])
        A0, Q = synthesize_pca_basis(E, int(params["q"]))
        Y = simulate_calibration(E, A0, Q, params["Z"], params["alpha"], params["beta"], rng)
        truth = {k: params[k] for k in ("Z", "alpha", "beta")}
        return {"E": E, "Y": Y, "A0": A0, "Q": Q, "truth": truth}
    if experiment == "factor":
        Y, truth = simulate_factor(int(params["p"]), int(params["q"]), int(params["n"]), rng)
        return {"Y": Y, "truth": truth}
    raise InvalidParams(f"experiment {experiment!r} has no dataset")


def write_dataset(experiment: str, params: dict, seed: int, out) -> list:
    """Simulate and write a dataset plus its provenance; returns the written paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = simulate_dataset(experiment, params, seed)
    paths = []
    if experiment == "spectral":
        paths.append(out / "spectral.csv")
        save_counts(paths[-1], data["E"], data["X"])
    elif experiment == "calibration":
        paths.append(out / "calibration.csv")
        save_counts(paths[-1], data["E"], data["Y"])
        paths.append(out / "calibration_basis.csv")
        save_basis(paths[-1], data["A0"], data["Q"])
    else:
        paths.append(out / "factor.csv")
        save_matrix(paths[-1], data["Y"])
    prov = out / f"{experiment}.provenance.json"
    save_provenance(prov, experiment=experiment, seed=seed, params=params, truth=data["truth"])
    paths.append(prov)
    return paths


def read_dataset(experiment: str, path) -> dict:
    """Read a dataset written by :func:`write_dataset` (or in the same format)."""
    path = Path(path)
    if experiment == "spectral":
        E, X = load_counts(path)
        return {"E": E, "X": X}
    if experiment == "calibration":
        E, Y = load_counts(path)
        basis = path.with_name(path.stem + "_basis.csv")
        A0, Q = load_basis(basis)
        if A0.size != E.size:
            raise InvalidParams(f"{basis}: basis has {A0.size} rows, data has {E.size}")
        return {"E": E, "Y": Y, "A0": A0, "Q": Q}
    if experiment == "factor":
        return {"Y": load_matrix(path)}
    raise InvalidParams(f"experiment {experiment!r} has no dataset")


# --------------------------------------------------------------------------
# Models


def gaussian_toy(names) -> GaussianModel:
    """Correlated Gaussian used for the fragment samplers: unit variances, ``corr = 0.8**|i-j|``."""
    d = len(names)
    idx = np.arange(d)
    cov = 0.8 ** np.abs(idx[:, None] - idx[None, :])
    return GaussianModel(names, np.arange(d, dtype=float), cov)


def build_model(experiment: str, params: dict, data: dict | None = None):
    """Model backend for ``experiment``; simulates the data when ``data`` is None."""
    if experiment in ("bivariate", "lemma1"):
        return BivariateNormalModel(params.get("rho", 0.9))
    if data is None and experiment in DATA_EXPERIMENTS:
        data = simulate_dataset(experiment, params, int(params["data_seed"]))
    if experiment in ("spectral", "blocked-identity"):
        if data is None:
            p = _merge(_DEFAULTS["spectral"]["params"], params)
            data = simulate_dataset("spectral", p, int(p["data_seed"]))
        return SpectralModel(data["E"], data["X"], params.get("start"))
    if experiment == "calibration":
        return CalibrationModel(data["E"], data["Y"], data["A0"], data["Q"], params.get("start"))
    if experiment == "factor":
        return FactorModel(data["Y"], int(params["q"]), params["a"], params["b"], start=params.get("start"))
    raise InvalidParams(f"experiment {experiment!r} has no model")


def registry_dims(experiment: str, params: dict, model=None) -> dict:
    """Registry dimensions matching a model."""
    if experiment == "spectral":
        return {"n_bins": model.n if model is not None else int(params["n"])}
    if experiment == "calibration":
        return {"q_cal": model.q if model is not None else int(params["q"])}
    if experiment == "factor":
        if model is not None:
            return {"p": model.p, "q": model.q, "n_obs": model.n}
        return {"p": int(params["p"]), "q": int(params["q"]), "n_obs": int(params["n"])}
    return {}


# --------------------------------------------------------------------------
# Running


def _run_one(args):
    spec, model, T, burnin, seed, stream = args
    try:
        return run_sampler(spec, model, T=T, burnin=burnin, seed=seed, stream=stream, record_burnin=False)
    except MHPCGError as exc:
        raise type(exc)(f"{spec.name} (seed {seed}): {exc}") from exc


def run_experiment(config: ExperimentConfig, data: dict | None = None, workers: int = 1) -> dict:
    """Run every sampler of ``config`` for every seed.

    All samplers of one replication share the chain seed; each sampler gets
    its own stream so no two chains share random numbers.

    Returns
    -------
    dict
        ``{(sampler, seed): Trace}``.
    """
    exp = config.experiment
    if exp in ("lemma1", "blocked-identity"):
        raise InvalidParams(f"{exp} is not a sampler experiment")
    if data is None and config.data is not None:
        data = read_dataset(exp, config.data)
    model = build_model(exp, config.params, data)
    dims = registry_dims(exp, config.params, model)
    jobs, keys = [], []
    for seed in config.seeds:
        for k, name in enumerate(config.samplers):
            spec = get_sampler(name, **dims)
            if spec.model != model.name:
                raise InvalidParams(f"{name} runs on the {spec.model} model, not {model.name}")
            jobs.append((spec, model, config.T, config.burnin, seed, k))
            keys.append((name, seed))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(j) for j in jobs]
    return dict(zip(keys, traces))


def save_traces(traces: dict, out) -> list:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for (name, seed), trace in traces.items():
        paths += list(trace.save(out / f"{name}_seed{seed}"))
    return paths



# --------------------------------------------------------------------------
# Blocked versus unblocked update


@dataclass
class BlockedIdentityResult:
    """Agreement of blocked and unblocked updates over random configurations."""

    model: str
    N: int
    max_abs_diff: float
    decisions_agree: int

    def to_dict(self) -> dict:
        return asdict(self)


def _gaussian_pieces():
    model = gaussian_toy(("psi1", "psi2", "psi3"))
    reduced = model.log_conditional(("psi1",), ("psi2",))
    joint = model.log_conditional(("psi1", "psi2"), ())
    cond_draw = model.exact_draw(("psi2",), ())
    cond_logpdf = model.exact_logpdf(("psi2",), ())
    chol = np.linalg.cholesky(model.cov)

    def config(rng):
        x = model.mean + chol @ rng.standard_normal(3)
        return {"psi1": x[0], "psi2": x[1], "psi3": x[2]}, float(rng.uniform(0.1, 3.0))

    return model, "psi1", "psi2", reduced, joint, cond_draw, cond_logpdf, config


def _spectral_pieces(params):
    model = build_model("spectral", params)
    reduced = model.log_marginal
    joint = model.log_posterior

    def cond_draw(state, rng):
        return model.draw_alpha(state, rng)

    def config(rng):
        state = {
            "beta": float(rng.uniform(0.5, 1.5)),
            "phi": float(rng.uniform(0.0, 0.5)),
            "gamma": float(rng.uniform(0.5, 2.0)),
            "mu": int(rng.integers(1, model.n + 1)),
            "XL": np.zeros(model.n, dtype=np.int64),
        }
        state["alpha"] = float(model.alpha_conditional(state).params["shape"] / model._R(state) * rng.uniform(0.8, 1.2))
        return state, float(rng.uniform(0.01, 0.3))

    return model, "beta", "alpha", reduced, joint, cond_draw, model.alpha_logpdf, config


def blocked_identity_check(which: str, N: int, seed: int, params: dict | None = None) -> BlockedIdentityResult:
    """Compare a blocked (A, B) update with an MH update of A on its reduced target.

    ``A`` is updated by a normal walk on the target with ``B`` integrated out
    and ``B`` is then drawn exactly, the pattern that the blocked rule
    ``J(A'|A) p(B'|A')`` concatenates. Both updates consume the same random
    stream, so their log acceptance ratios should agree to rounding.

    Parameters
    ----------
    which : {"gaussian", "spectral"}
        ``gaussian`` uses the three-component toy with ``A = psi1`` and
        ``B = psi2``; ``spectral`` uses ``A = beta`` and ``B = alpha``.
    """
    if which == "gaussian":
        pieces = _gaussian_pieces()
    elif which == "spectral":
        pieces = _spectral_pieces(_merge(_DEFAULTS["spectral"]["params"], params or {}))
    else:
        raise InvalidParams(f"unknown identity check {which!r}")
    model, a_name, b_name, reduced, joint, cond_draw, cond_logpdf, config = pieces
    rng = make_rng(seed)
    worst, agree = 0.0, 0
    for _ in range(N):
        state, scale = config(rng)
        walk = normal_walk(scale)
        stream = int(rng.integers(2**63))

        def with_ab(a, b=None):
            s = dict(state)
            s[a_name] = a
            if b is not None:
                s[b_name] = b
            return s

        blocked = blocked_mh_update(
            walk,
            lambda a, r: cond_draw(with_ab(a), r)[b_name],
            lambda b, a: cond_logpdf(with_ab(a, b)),
            lambda a, b: joint(with_ab(a, b)),
            state[a_name],
            state[b_name],
            make_rng(stream),
        )
        plain = mh_update(lambda a: reduced(with_ab(a)), walk, state[a_name], make_rng(stream))
        if math.isinf(blocked.log_r) or math.isinf(plain.log_r):
            diff = 0.0 if blocked.log_r == plain.log_r else math.inf
        else:
            diff = abs(blocked.log_r - plain.log_r)
        worst = max(worst, diff)
        agree += blocked.accepted == plain.accepted
    return BlockedIdentityResult(which, N, worst, agree)
