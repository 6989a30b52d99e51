"""Chain-quality and two-sample comparison statistics.

All functions are pure: they read traces or arrays and return small result
objects that serialize to JSON (``to_dict``) and, where they carry point
sets, to CSV for external plotting.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ComponentMissing, DegenerateSeries, InvalidParams, LNotFound
from .kernels import NORMAL_WALK, JumpDescriptor, mh_update

__all__ = [
    "AcfResult",
    "acf",
    "ess",
    "ComparisonReport",
    "compare_traces",
    "trace_column",
    "choose_L",
    "lag1_check",
    "first_lag_below",
    "Lemma1Result",
    "lemma1_check",
    "acf_table",
    "ess_table",
]

PERCENTILES = np.arange(1, 100)


@dataclass
class AcfResult:
    """Autocorrelations at lags ``0..max_lag`` of a series of length ``n``."""

    values: np.ndarray
    n: int

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.values.size)

    def __getitem__(self, k):
        return self.values[k]

    def bartlett_band(self, z: float = 3.0) -> float:
        """Half-width of the white-noise band ``z / sqrt(n)``."""
        return z / math.sqrt(self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "acf": self.values.tolist()}


def _centered(series) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 2:
        raise InvalidParams("a series needs at least two values")
    x = x - x.mean()
    if not np.any(x):
        raise DegenerateSeries("series has zero variance")
    return x


def acf(series, max_lag: int | None = None) -> AcfResult:
    """Biased sample autocorrelation, ``c_k / c_0`` with ``c_k = sum x_t x_{t+k} / n``.

    Computed by FFT. ``acf[0]`` is exactly 1.

    Raises
    ------
    DegenerateSeries
        If the series is constant.
    """
    x = _centered(series)
    n = x.size
    if max_lag is None:
        max_lag = min(n - 1, 200)
    if not 0 <= max_lag < n:
        raise InvalidParams(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    cov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    rho = cov / cov[0]
    rho[0] = 1.0
    return AcfResult(np.clip(rho, -1.0, 1.0), n)


def ess(series) -> float:
    """Effective sample size ``n / (1 + 2 sum rho_k)``.

    The sum is truncated by Geyer's initial positive sequence: lag pairs
    ``rho_{2m} + rho_{2m+1}`` are added while they stay positive.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 100:
        raise InvalidParams(f"ess needs at least 100 values, got {x.size}")
    n = x.size
    rho = acf(x, n - 1).values
    pairs = rho[: 2 * ((n) // 2)].reshape(-1, 2).sum(axis=1)
    neg = np.nonzero(pairs <= 0)[0]
    m = neg[0] if neg.size else pairs.size
    tau = -1.0 + 2.0 * float(pairs[:m].sum())
    return n / max(tau, 1.0 / n)


def first_lag_below(result: AcfResult, threshold: float = 0.05) -> int | None:
    """Smallest lag ``k >= 1`` with ``|acf(k)| < threshold``, or None."""
    hit = np.nonzero(np.abs(result.values[1:]) < threshold)[0]
    return int(hit[0]) + 1 if hit.size else None


def lag1_check(series, threshold: float = 0.05) -> tuple[float, bool]:
    """Lag-1 autocorrelation of an iterated strategy's outputs and whether it is below ``threshold``."""
    r1 = float(acf(series, 1)[1])
    return r1, abs(r1) < threshold


def choose_L(
    target_logdensity,
    jump: JumpDescriptor,
    pilot_iterations: int,
    rng: np.random.Generator,
    *,
    start,
    threshold: float = 0.05,
    max_lag: int = 200,
) -> int:
    """Number of MH iterations needed for near-independent draws.

    Runs a pilot chain on ``target_logdensity`` (the conditional with its
    conditioning value fixed) and returns the first lag at which the
    autocorrelation falls below ``threshold`` in absolute value.

    Raises
    ------
    LNotFound
        If no lag up to ``max_lag`` qualifies.
    """
    if pilot_iterations < 1000:
        raise InvalidParams("the pilot run needs at least 1000 iterations")
    out = np.empty(pilot_iterations)
    x, logp = start, None
    for t in range(pilot_iterations):
        res = mh_update(target_logdensity, jump, x, rng, current_logdensity=logp)
        x, logp = res.value, res.logp
        out[t] = float(np.asarray(x).ravel()[0])
    lag = first_lag_below(acf(out, min(max_lag, pilot_iterations - 1)), threshold)
    if lag is None:
        raise LNotFound(f"no lag up to {max_lag} has |acf| < {threshold}")
    return lag


def acf_table(traces: dict, columns, max_lag: int = 50) -> list:
    """Rows ``{sampler, column, lag, acf}`` for a dict of traces."""
    rows = []
    for label, tr in traces.items():
        for c in columns:
            for k, v in enumerate(acf(trace_column(tr, c), max_lag).values):
                rows.append({"sampler": label, "column": c, "lag": k, "acf": float(v)})
    return rows


def ess_table(traces: dict, columns) -> list:
    """Rows ``{sampler, column, ess, ess_per_iteration}``."""
    rows = []
    for label, tr in traces.items():
        for c in columns:
            x = trace_column(tr, c)
            e = ess(x)
            rows.append({"sampler": label, "column": c, "ess": e, "ess_per_iteration": e / len(x)})
    return rows


# -- two-sample comparison ----------------------------------------------------------


def trace_column(trace, name: str) -> np.ndarray:
    """A scalar column of a trace: a scalar component ``alpha`` or an entry ``Z[2]``.

    Raises
    ------
    ComponentMissing
    """
    if name in trace.draws and np.ndim(trace.draws[name]) == 1:
        return np.asarray(trace.draws[name], dtype=float)
    base, _, rest = name.partition("[")
    if base in trace.draws and rest.endswith("]"):
        arr = np.asarray(trace.draws[base], dtype=float)
        try:
            idx = tuple(int(i) - 1 for i in rest[:-1].split(","))
            return arr[(slice(None),) + idx]
        except (ValueError, IndexError):
            pass
    raise ComponentMissing(f"trace has no scalar column {name!r}")


@dataclass
class ComparisonReport:
    """Moments, correlations, QQ pairs and KS tests for two traces.

    ``columns[c]`` holds ``mean_a, mean_b, var_a, var_b, ks_statistic,
    ks_pvalue`` and ``qq``, the paired percentiles 1..99 of the two samples.
    """

    labels: tuple
    names: list
    columns: dict = field(default_factory=dict)
    corr_a: np.ndarray | None = None
    corr_b: np.ndarray | None = None

    def var_ratio(self, name: str) -> float:
        c = self.columns[name]
        return c["var_b"] / c["var_a"]

    def to_dict(self) -> dict:
        cols = {
            k: {**{f: v for f, v in c.items() if f != "qq"}, "qq": c["qq"].tolist()} for k, c in self.columns.items()
        }
        return {
            "labels": list(self.labels),
            "columns": cols,
            "names": self.names,
            "corr_a": self.corr_a.tolist(),
            "corr_b": self.corr_b.tolist(),
        }

    def write_qq_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["column", "percentile", self.labels[0], self.labels[1]])
            for name, c in self.columns.items():
                for p, (qa, qb) in zip(PERCENTILES, c["qq"]):
                    w.writerow([name, int(p), repr(float(qa)), repr(float(qb))])


def compare_traces(a, b, components, labels=("a", "b")) -> ComparisonReport:
    """Compare the marginal distributions of two traces column by column.

    Parameters
    ----------
    a, b : Trace
    components : sequence of str
        Scalar column names (``alpha``, ``Z[2]``).

    Raises
    ------
    ComponentMissing
    """
    names = list(components)
    xa = np.column_stack([trace_column(a, c) for c in names])
    xb = np.column_stack([trace_column(b, c) for c in names])
    report = ComparisonReport(tuple(labels), names)
    for j, c in enumerate(names):
        ks = stats.ks_2samp(xa[:, j], xb[:, j])
        report.columns[c] = {
            "mean_a": float(xa[:, j].mean()),
            "mean_b": float(xb[:, j].mean()),
            "var_a": float(xa[:, j].var(ddof=1)),
            "var_b": float(xb[:, j].var(ddof=1)),
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "qq": np.column_stack([np.percentile(xa[:, j], PERCENTILES), np.percentile(xb[:, j], PERCENTILES)]),
        }
    report.corr_a = np.atleast_2d(np.corrcoef(xa, rowvar=False))
    report.corr_b = np.atleast_2d(np.corrcoef(xb, rowvar=False))
    return report


# -- iterated versus joint acceptance ---------------------------------------------


@dataclass
class Lemma1Result:
    """Monte Carlo summary of ``r_iter / r_joint`` under the stationary law.

    ``identity_error`` is the largest disagreement between the ratio of the
    two acceptance ratios and its closed form as a ratio of conditional
    densities.
    """

    N: int
    mean_ratio: float
    mean_log_ratio: float
    ci_ratio: tuple
    ci_log_ratio: tuple
    identity_error: float
    level: float

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _walk_logpdf(y, x, scale):
    z = (y - x) / scale
    return -0.5 * z * z - math.log(scale) - 0.5 * math.log(2 * math.pi)


def _ci(x, z):
    m = float(x.mean())
    h = z * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, (m - h, m + h)


def lemma1_check(model, jump: JumpDescriptor, N: int, rng: np.random.Generator, level: float = 0.99) -> Lemma1Result:
    """Compare first-step acceptance ratios of the iterated and joint strategies.

    Draws ``(psi1, psi2)`` from the target and an independent ``psi1'`` from
    its marginal; ``psi1'`` serves as both the iterated strategy's fresh draw
    and the joint strategy's proposal, and one walk proposal ``psi2*`` is
    shared by both. ``r_iter`` and ``r_joint`` are each computed in full,
    jump densities included, and their quotient is checked against
    ``p(psi2 | psi1) / p(psi2 | psi1')``.

    Parameters
    ----------
    model : BivariateNormalModel
    jump : JumpDescriptor
        A normal walk on ``psi2`` that does not read ``psi1``.
    """
    if jump.kind != NORMAL_WALK or jump.depends_on:
        raise InvalidParams("the comparison needs a normal walk on psi2 alone")
    if N < 2:
        raise InvalidParams("N must be at least 2")
    scale = float(jump.scale)
    rho, sd = model.rho, model.cond_sd
    psi1 = rng.standard_normal(N)
    psi2 = rho * psi1 + sd * rng.standard_normal(N)
    psi1_new = rng.standard_normal(N)
    prop = psi2 + scale * rng.standard_normal(N)

    j_back = _walk_logpdf(psi2, prop, scale)
    j_fwd = _walk_logpdf(prop, psi2, scale)
    log_iter = model.cond_logpdf(prop, psi1_new) + j_back - model.cond_logpdf(psi2, psi1_new) - j_fwd

    def joint(a, b):
        return model.marginal_logpdf(a) + model.cond_logpdf(b, a)

    log_joint = (
        joint(psi1_new, prop)
        + model.marginal_logpdf(psi1)
        + j_back
        - joint(psi1, psi2)
        - model.marginal_logpdf(psi1_new)
        - j_fwd
    )
    log_ratio = log_iter - log_joint
    closed = model.cond_logpdf(psi2, psi1) - model.cond_logpdf(psi2, psi1_new)
    z = float(stats.norm.ppf(0.5 + level / 2))
    mean_log, ci_log = _ci(log_ratio, z)
    mean_r, ci_r = _ci(np.exp(log_ratio), z)
    return Lemma1Result(
        N=N,
        mean_ratio=mean_r,
        mean_log_ratio=mean_log,
        ci_ratio=ci_r,
        ci_log_ratio=ci_log,
        identity_error=float(np.max(np.abs(log_ratio - closed))),
        level=level,
    )
