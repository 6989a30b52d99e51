"""Bayesian factor analysis.

    Y_i = Z_i beta + e_i,   Z_i ~ N_q(0, I),   e_i ~ N_p(0, Sigma),   Sigma = diag(sigma2_1..sigma2_p)

with ``Z`` of shape ``(n, q)`` and loadings ``beta`` of shape ``(q, p)``.
Priors: ``sigma2_j ~ Inv-Gamma(a, b)`` and each loading column
``beta_j ~ N_q(0, V)``. All formulas hold for general ``q``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ..distributions import draw, invgamma, log_pdf, mvnormal, normal
from ..errors import InvalidParams
from ..runner import ModelBackend

__all__ = ["FACTOR_START", "sigma_names", "simulate_factor", "FactorModel"]

FACTOR_START = {"Z": 1.0, "beta": 1.0, "sigma2": 1.0}
_NEG_INF = [-math.inf]


def sigma_names(p: int) -> tuple:
    return tuple(f"sigma2_{j + 1}" for j in range(p))


def simulate_factor(p: int, q: int, n: int, rng: np.random.Generator):
    """Data under the simulation design of the factor-model study.

    ``sigma2_j ~ Inv-Gamma(1, 0.25)``, loadings ``~ N(0, 3**2)``, factor
    scores ``~ N_q(0, I)``.

    Returns
    -------
    Y : numpy.ndarray, shape (n, p)
    truth : dict
        ``Z``, ``beta`` and ``sigma2`` (length-``p`` vector).
    """
    if not p >= q >= 0 or n < 1:
        raise InvalidParams(f"need p >= q >= 0 and n >= 1, got p={p}, q={q}, n={n}")
    sigma2 = np.asarray(draw(invgamma(1.0, 0.25), rng, size=p), dtype=float)
    beta = np.asarray(draw(normal(0.0, 3.0), rng, size=(q, p)), dtype=float).reshape(q, p)
    Z = np.asarray(draw(normal(0.0, 1.0), rng, size=(n, q)), dtype=float).reshape(n, q)
    noise = np.asarray(draw(normal(0.0, 1.0), rng, size=(n, p)), dtype=float) * np.sqrt(sigma2)
    return Z @ beta + noise, {"Z": Z, "beta": beta, "sigma2": sigma2}


class FactorModel(ModelBackend):
    """Posterior of ``(Z, beta, sigma2_1..sigma2_p)`` given ``Y``.

    Parameters
    ----------
    Y : array_like, shape (n, p)
    q : int
        Number of factors.
    a, b : float
        Inverse-gamma prior shape and scale.
    V : array_like, optional
        Prior covariance of each loading column; defaults to ``100 I``.
    """

    name = "factor"

    def __init__(self, Y, q: int = 2, a: float = 0.01, b: float = 0.01, V=None, start: dict | None = None):
        super().__init__()
        self.Y = np.asarray(Y, dtype=float)
        if self.Y.ndim != 2:
            raise InvalidParams("Y must be an n x p matrix")
        self.n, self.p = self.Y.shape
        self.q = int(q)
        if not 0 <= self.q <= self.p:
            raise InvalidParams(f"need 0 <= q <= p, got q={q}")
        if a <= 0 or b <= 0:
            raise InvalidParams("inverse-gamma hyperparameters must be positive")
        self.a, self.b = float(a), float(b)
        self.V = 100.0 * np.eye(self.q) if V is None else np.asarray(V, dtype=float)
        if self.V.shape != (self.q, self.q) or (self.q and np.any(np.linalg.eigvalsh(self.V) <= 0)):
            raise InvalidParams("V must be a positive definite q x q matrix")
        self._Vinv = np.linalg.inv(self.V)
        self.start = dict(FACTOR_START if start is None else start)
        self.sigmas = sigma_names(self.p)
        self._YtY = self.Y.T @ self.Y
        self._ydiag = np.diag(self._YtY).copy()

        params = ("beta",) + self.sigmas
        self.add_target((), ("Z",) + params, self.log_joint)
        self.add_target(("Z",), params, self.log_marginal)
        self.add_draw(("Z",), (), self.draw_z, self.z_logpdf)
        self.add_draw(("beta",), (), self.draw_beta, self.beta_logpdf)
        for j, s in enumerate(self.sigmas):
            self.add_draw((s,), (), self._sigma_drawer(j), self._sigma_logpdf(j))

    def component_shapes(self) -> dict:
        shapes = {"Z": (self.n, self.q), "beta": (self.q, self.p)}
        shapes.update({s: () for s in self.sigmas})
        return shapes

    def initial_state(self) -> dict:
        s = {
            "Z": np.full((self.n, self.q), float(self.start["Z"])),
            "beta": np.full((self.q, self.p), float(self.start["beta"])),
        }
        s.update({name: float(self.start["sigma2"]) for name in self.sigmas})
        return s

    def sigma2(self, state) -> np.ndarray:
        return np.array([state[s] for s in self.sigmas], dtype=float)

    # -- shared pieces ---------------------------------------------------------
    def _prior_terms(self, beta, sig) -> list:
        logs = float(np.log(sig).sum())
        quad = float(np.einsum("hj,hk,kj->", beta, self._Vinv, beta)) if self.q else 0.0
        return [-(self.a + 1.0) * logs, -0.5 * quad, -self.b * float((1.0 / sig).sum()), -0.5 * self.n * logs]

    def _precision_factor(self, beta, sig):
        """Cholesky factor of ``M = I_q + beta Sigma^-1 beta^T``.

        Raises
        ------
        numpy.linalg.LinAlgError
            If ``M`` is numerically singular.
        """
        G = beta / sig
        M = np.eye(self.q) + G @ beta.T
        return np.linalg.cholesky(M), G

    # -- log targets --------------------------------------------------------------------
    def log_joint(self, state) -> list:
        """Joint posterior of ``Z``, ``beta`` and ``Sigma``."""
        sig = self.sigma2(state)
        if np.any(sig <= 0):
            return _NEG_INF
        Z, beta = state["Z"], state["beta"]
        resid = self.Y - Z @ beta
        return self._prior_terms(beta, sig) + [
            -0.5 * float(((resid * resid).sum(axis=0) / sig).sum()),
            -0.5 * float((Z * Z).sum()),
        ]

    def log_marginal(self, state) -> list:
        """Posterior of ``beta`` and ``Sigma`` with ``Z`` integrated out.

        Each ``Y_i`` is then ``N_p(0, Sigma + beta^T beta)``; the Woodbury form
        keeps every factorization ``q x q``.
        """
        sig = self.sigma2(state)
        if np.any(sig <= 0):
            return _NEG_INF
        beta = state["beta"]
        quad = float((self._ydiag / sig).sum())
        logdet = 0.0
        if self.q:
            L, G = self._precision_factor(beta, sig)
            U = solve_triangular(L, G @ self._YtY @ G.T, lower=True)
            quad -= float(np.trace(solve_triangular(L, U.T, lower=True)))
            logdet = 2.0 * float(np.log(np.diag(L)).sum())
        return self._prior_terms(beta, sig) + [-0.5 * self.n * logdet, -0.5 * quad]

    # -- exact conditionals ----------------------------------------------------------------------
    def z_conditional(self, state):
        """``Z_i ~ N_q(M^-1 beta Sigma^-1 Y_i^T, M^-1)``, batched over rows."""
        sig = self.sigma2(state)
        L, G = self._precision_factor(state["beta"], sig)
        cov = cho_solve((L, True), np.eye(self.q))
        cov = 0.5 * (cov + cov.T)
        means = self.Y @ G.T @ cov
        return mvnormal(means, cov)

    def draw_z(self, state, rng) -> dict:
        if not self.q:
            return {"Z": np.zeros((self.n, 0))}
        return {"Z": np.asarray(draw(self.z_conditional(state), rng), dtype=float).reshape(self.n, self.q)}

    def z_logpdf(self, state) -> float:
        if not self.q:
            return 0.0
        return float(np.sum(log_pdf(self.z_conditional(state), state["Z"])))

    def beta_conditional(self, state, j: int):
        """Column ``j``: ``N_q((V^-1 + Z^T Z / s)^-1 Z^T Y_.j / s, (V^-1 + Z^T Z / s)^-1)``."""
        Z = state["Z"]
        s = state[self.sigmas[j]]
        prec = self._Vinv + Z.T @ Z / s
        cov = np.linalg.inv(prec)
        cov = 0.5 * (cov + cov.T)
        return mvnormal(cov @ (Z.T @ self.Y[:, j]) / s, cov)

    def draw_beta(self, state, rng) -> dict:
        beta = np.empty((self.q, self.p))
        for j in range(self.p):
            if self.q:
                beta[:, j] = draw(self.beta_conditional(state, j), rng)
        return {"beta": beta}

    def beta_logpdf(self, state) -> float:
        if not self.q:
            return 0.0
        return float(sum(log_pdf(self.beta_conditional(state, j), state["beta"][:, j]) for j in range(self.p)))

    def sigma_conditional(self, state, j: int):
        """``Inv-Gamma(a + n/2, b + sum_i (Y_ij - Z_i beta_j)**2 / 2)``."""
        r = self.Y[:, j] - state["Z"] @ state["beta"][:, j]
        return invgamma(self.a + 0.5 * self.n, self.b + 0.5 * float(r @ r))

    def _sigma_drawer(self, j):
        name = self.sigmas[j]

        def draw_sigma(state, rng):
            return {name: float(draw(self.sigma_conditional(state, j), rng))}

        return draw_sigma

    def _sigma_logpdf(self, j):
        name = self.sigmas[j]

        def logpdf(state):
            return float(log_pdf(self.sigma_conditional(state, j), state[name]))

        return logpdf
