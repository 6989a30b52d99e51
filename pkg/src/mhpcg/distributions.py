"""Exact samplers and log-densities for the distribution families used by the models.

Every draw goes through a :class:`numpy.random.Generator`; streams are derived
from a ``(seed, stream)`` pair with :class:`numpy.random.SeedSequence` so that
parallel chains never share random numbers.

Gamma is parameterized by ``(shape, rate)`` and the inverse gamma by
``(shape, scale)``, so that ``InvGamma(a, b)`` has density
``b**a / Gamma(a) * x**(-a - 1) * exp(-b / x)``.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, xlog1py, xlogy

from .errors import InvalidParams

__all__ = [
    "DistSpec",
    "SeededRng",
    "make_rng",
    "draw",
    "log_pdf",
    "normal",
    "mvnormal",
    "gamma",
    "invgamma",
    "poisson",
    "binomial",
    "discrete_uniform",
    "lognormal",
    "cholesky_factor",
]

FAMILIES = (
    "normal",
    "mvnormal2",
    "mvnormalq",
    "gamma",
    "invgamma",
    "poisson",
    "binomial",
    "discrete_uniform",
    "lognormal",
)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class SeededRng:
    """Identifies one reproducible random stream.

    Parameters
    ----------
    seed : int
        Master seed shared by every chain of an experiment.
    stream : int
        Chain or replication index. Distinct streams are statistically
        independent.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of the stream."""
        return make_rng(self.seed, self.stream)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Build the generator for ``(seed, stream)``.

    The stream id enters the seed sequence's spawn key, which hashes it
    together with the master seed.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# Covariance factorization cache

_CHOL_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_CHOL_CACHE_SIZE = 64


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == cov``.

    Results are cached by the matrix bytes, so repeated draws that share a
    covariance pay for the factorization once. Singular positive
    semi-definite matrices fall back to a symmetric eigen-factorization.

    Raises
    ------
    InvalidParams
        If ``cov`` is not square, not symmetric or not positive semi-definite.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidParams(f"covariance must be square, got shape {cov.shape}")
    key = (cov.shape, cov.tobytes())
    hit = _CHOL_CACHE.get(key)
    if hit is not None:
        _CHOL_CACHE.move_to_end(key)
        return hit
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise InvalidParams("covariance matrix is not symmetric")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        if w.size and w.min() < -tol:
            raise InvalidParams("covariance matrix is not positive semi-definite") from None
        factor = v * np.sqrt(np.clip(w, 0.0, None))
    factor.setflags(write=False)
    _CHOL_CACHE[key] = factor
    if len(_CHOL_CACHE) > _CHOL_CACHE_SIZE:
        _CHOL_CACHE.popitem(last=False)
    return factor


# --------------------------------------------------------------------------
# Specs


@dataclass(frozen=True, eq=False)
class DistSpec:
    """A distribution family together with its parameters.

    Parameters may be arrays; draws and densities then broadcast elementwise
    (for the multivariate normal, the mean may carry leading batch axes).
    Construction validates the family's invariants.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParams(f"unknown family {self.family!r}")
        _CHECKS[self.family](self.params)

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.family}({inner})"


def _positive(name, value):
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InvalidParams(f"{name} must be finite and strictly positive, got {value!r}")


def _finite(name, value):
    if not np.all(np.isfinite(np.asarray(value, dtype=float))):
        raise InvalidParams(f"{name} must be finite, got {value!r}")


def _check_normal(p):
    _finite("mean", p["mean"])
    _positive("sd", p["sd"])


def _check_mvn(p, dim=None):
    cov = np.asarray(p["cov"], dtype=float)
    mean = np.asarray(p["mean"], dtype=float)
    if dim is not None and cov.shape != (dim, dim):
        raise InvalidParams(f"covariance must be {dim}x{dim}, got {cov.shape}")
    if mean.shape[-1:] != cov.shape[:1]:
        raise InvalidParams("mean and covariance dimensions disagree")
    _finite("mean", mean)
    cholesky_factor(cov)


def _check_shape_rate(p, second):
    _positive("shape", p["shape"])
    _positive(second, p[second])


def _check_poisson(p):
    lam = np.asarray(p["lam"], dtype=float)
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise InvalidParams(f"Poisson mean must be finite and non-negative, got {p['lam']!r}")


def _check_binomial(p):
    n = np.asarray(p["n"])
    prob = np.asarray(p["p"], dtype=float)
    if np.any(n < 0) or np.any(np.asarray(n) != np.round(n)):
        raise InvalidParams(f"Binomial count must be a non-negative integer, got {p['n']!r}")
    if not np.all(np.isfinite(prob)) or np.any(prob < 0) or np.any(prob > 1):
        raise InvalidParams(f"Binomial probability must lie in [0, 1], got {p['p']!r}")


def _check_uniform(p):
    n = p["n"]
    if int(n) != n or n < 1:
        raise InvalidParams(f"DiscreteUniform support {{1..n}} needs n >= 1, got {n!r}")


def _check_lognormal(p):
    _finite("meanlog", p["meanlog"])
    _positive("sdlog", p["sdlog"])


_CHECKS = {
    "normal": _check_normal,
    "mvnormal2": lambda p: _check_mvn(p, 2),
    "mvnormalq": _check_mvn,
    "gamma": lambda p: _check_shape_rate(p, "rate"),
    "invgamma": lambda p: _check_shape_rate(p, "scale"),
    "poisson": _check_poisson,
    "binomial": _check_binomial,
    "discrete_uniform": _check_uniform,
    "lognormal": _check_lognormal,
}


def normal(mean, sd) -> DistSpec:
    """Univariate normal with standard deviation ``sd``."""
    return DistSpec("normal", {"mean": mean, "sd": sd})


def mvnormal(mean, cov) -> DistSpec:
    """Multivariate normal; the two-dimensional case gets its own family tag."""
    cov = np.asarray(cov, dtype=float)
    family = "mvnormal2" if cov.shape == (2, 2) else "mvnormalq"
    return DistSpec(family, {"mean": np.asarray(mean, dtype=float), "cov": cov})


def gamma(shape, rate) -> DistSpec:
    """Gamma with density proportional to ``x**(shape - 1) * exp(-rate * x)``."""
    return DistSpec("gamma", {"shape": shape, "rate": rate})


def invgamma(shape, scale) -> DistSpec:
    """Inverse gamma with density proportional to ``x**(-shape - 1) * exp(-scale / x)``."""
    return DistSpec("invgamma", {"shape": shape, "scale": scale})


def poisson(lam) -> DistSpec:
    return DistSpec("poisson", {"lam": lam})


def binomial(n, p) -> DistSpec:
    return DistSpec("binomial", {"n": n, "p": p})


def discrete_uniform(n: int) -> DistSpec:
    """Uniform on the integers ``1..n``."""
    return DistSpec("discrete_uniform", {"n": int(n)})


def lognormal(meanlog, sdlog) -> DistSpec:
    return DistSpec("lognormal", {"meanlog": meanlog, "sdlog": sdlog})


# --------------------------------------------------------------------------
# Sampling


def _scalarize(x):
    if isinstance(x, np.ndarray) and x.ndim == 0:
        return x.item()
    return x


def draw(spec: DistSpec, rng: np.random.Generator, size=None) -> Any:
    """Draw from ``spec``.

    Parameters
    ----------
    spec : DistSpec
    rng : numpy.random.Generator
    size : int or tuple, optional
        Extra leading sample shape. Array-valued parameters broadcast against
        it as in numpy.

    Returns
    -------
    float, int or numpy.ndarray
        Scalars come back as Python numbers.
    """
    p = spec.params
    fam = spec.family
    if fam == "normal":
        out = rng.normal(p["mean"], p["sd"], size=size)
    elif fam in ("mvnormal2", "mvnormalq"):
        mean = np.asarray(p["mean"], dtype=float)
        factor = cholesky_factor(p["cov"])
        lead = mean.shape[:-1] if size is None else tuple(np.atleast_1d(size)) + mean.shape[:-1]
        eps = rng.standard_normal(lead + (factor.shape[0],))
        out = mean + eps @ factor.T
    elif fam == "gamma":
        out = rng.gamma(p["shape"], 1.0 / np.asarray(p["rate"], dtype=float), size=size)
    elif fam == "invgamma":
        out = np.asarray(p["scale"], dtype=float) / rng.gamma(p["shape"], 1.0, size=size)
    elif fam == "poisson":
        out = rng.poisson(p["lam"], size=size)
    elif fam == "binomial":
        out = rng.binomial(p["n"], p["p"], size=size)
    elif fam == "discrete_uniform":
        out = rng.integers(1, p["n"] + 1, size=size)
    elif fam == "lognormal":
        out = rng.lognormal(p["meanlog"], p["sdlog"], size=size)
    else:  # pragma: no cover - guarded in DistSpec
        raise InvalidParams(fam)
    return _scalarize(out)


# --------------------------------------------------------------------------
# Densities


def _mvn_logpdf(x, mean, cov):
    factor = cholesky_factor(cov)
    d = factor.shape[0]
    if np.any(np.diag(factor) <= 0):
        raise InvalidParams("log_pdf needs a positive definite covariance")
    dev = np.asarray(x, dtype=float) - mean
    flat = dev.reshape(-1, d)
    z = solve_triangular(factor, flat.T, lower=True)
    quad = np.sum(z * z, axis=0).reshape(dev.shape[:-1])
    logdet = 2.0 * np.sum(np.log(np.diag(factor)))
    return -0.5 * (quad + logdet + d * _LOG_2PI)


def log_pdf(spec: DistSpec, x) -> Any:
    """Natural-log density (or mass) of ``spec`` at ``x`` with every constant kept.

    Points outside the support give ``-inf``.
    """
    p = spec.params
    fam = spec.family
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam == "normal":
            sd = np.asarray(p["sd"], dtype=float)
            z = (x_arr - p["mean"]) / sd
            out = -0.5 * z * z - np.log(sd) - 0.5 * _LOG_2PI
        elif fam in ("mvnormal2", "mvnormalq"):
            out = _mvn_logpdf(x_arr, np.asarray(p["mean"], dtype=float), p["cov"])
        elif fam == "gamma":
            k = np.asarray(p["shape"], dtype=float)
            r = np.asarray(p["rate"], dtype=float)
            out = np.where(
                x_arr > 0,
                k * np.log(r) - gammaln(k) + xlogy(k - 1.0, x_arr) - r * x_arr,
                -np.inf,
            )
        elif fam == "invgamma":
            a = np.asarray(p["shape"], dtype=float)
            b = np.asarray(p["scale"], dtype=float)
            out = np.where(
                x_arr > 0,
                a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(x_arr) - b / x_arr,
                -np.inf,
            )
        elif fam == "poisson":
            lam = np.asarray(p["lam"], dtype=float)
            ok = (x_arr >= 0) & (x_arr == np.floor(x_arr))
            out = np.where(ok, xlogy(x_arr, lam) - lam - gammaln(x_arr + 1.0), -np.inf)
        elif fam == "binomial":
            n = np.asarray(p["n"], dtype=float)
            prob = np.asarray(p["p"], dtype=float)
            ok = (x_arr >= 0) & (x_arr <= n) & (x_arr == np.floor(x_arr))
            out = np.where(
                ok,
                gammaln(n + 1.0)
                - gammaln(x_arr + 1.0)
                - gammaln(n - x_arr + 1.0)
                + xlogy(x_arr, prob)
                + xlog1py(n - x_arr, -prob),
                -np.inf,
            )
        elif fam == "discrete_uniform":
            n = p["n"]
            ok = (x_arr >= 1) & (x_arr <= n) & (x_arr == np.floor(x_arr))
            out = np.where(ok, -np.log(n), -np.inf)
        elif fam == "lognormal":
            s = np.asarray(p["sdlog"], dtype=float)
            logx = np.log(np.where(x_arr > 0, x_arr, 1.0))
            z = (logx - p["meanlog"]) / s
            out = np.where(x_arr > 0, -0.5 * z * z - np.log(s) - logx - 0.5 * _LOG_2PI, -np.inf)
        else:  # pragma: no cover
            raise InvalidParams(fam)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out
