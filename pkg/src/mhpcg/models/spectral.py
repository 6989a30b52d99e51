"""Poisson spectral model: power-law continuum with absorption plus a one-bin line.

Counts in bin ``i`` are Poisson with mean ``alpha * w_i`` where

    w_i = (E_i**-beta + gamma * 1{i == mu}) * exp(-phi / E_i).

Writing ``X_i = X_iC + X_iL`` as continuum plus line counts gives the
data-augmentation form used by the Gibbs-type samplers. Priors are flat on
``alpha, beta, gamma, phi`` (restricted to ``alpha, gamma > 0``, ``phi >= 0``)
and uniform on the line bin ``mu in {1..n}``.

Log-densities are returned as lists of additive terms built by shared
helpers, so a term common to two densities is the same float in both and
cancels exactly in a log-ratio.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from ..distributions import binomial, draw, gamma, log_pdf, poisson
from ..errors import InvalidParams
from ..runner import ModelBackend

__all__ = [
    "SPECTRAL_COMPONENTS",
    "FIG3_PARAMS",
    "SPECTRAL_START",
    "energy_grid",
    "expected_counts",
    "simulate_spectral",
    "SpectralModel",
]

SPECTRAL_COMPONENTS = ("mu", "phi", "beta", "alpha", "XL", "gamma")

# Line strength is fixed through alpha * gamma = 40 expected line counts.
_GAMMA_TRUE = Fraction(40) / Fraction("37.62")
FIG3_PARAMS = {"alpha": 37.62, "beta": 1.0, "gamma": float(_GAMMA_TRUE), "mu": 250, "phi": 0.2}
SPECTRAL_START = {"alpha": 30.0, "beta": 3.0, "gamma": 1.0, "mu": 10, "phi": 0.5}

_NEG_INF = [-math.inf]


def energy_grid(n: int = 550, lo: float = 0.3, hi: float = 7.0) -> np.ndarray:
    """Bin energies in keV, equally spaced on ``[lo, hi]``."""
    return np.linspace(lo, hi, n)


def expected_counts(E, alpha, beta, gamma, mu, phi) -> np.ndarray:
    """Poisson means ``alpha * w_i``; ``mu`` is a 1-based bin index."""
    E = np.asarray(E, dtype=float)
    cont = E**-beta
    if gamma:
        cont = cont.copy()
        cont[int(mu) - 1] += gamma
    return alpha * cont * np.exp(-phi / E)


def simulate_spectral(params: dict, E, rng: np.random.Generator) -> np.ndarray:
    """Independent Poisson counts per bin under ``params``."""
    lam = expected_counts(E, params["alpha"], params["beta"], params["gamma"], params["mu"], params["phi"])
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise InvalidParams("expected counts must be finite and non-negative")
    return np.asarray(draw(poisson(lam), rng), dtype=np.int64)


class SpectralModel(ModelBackend):
    """Posterior of ``(alpha, beta, gamma, mu, phi, XL)`` given observed counts.

    Parameters
    ----------
    E : array_like
        Bin energies (keV), strictly positive.
    X : array_like of int
        Observed counts.
    start : dict, optional
        Starting values; ``XL`` starts at zero.
    """

    name = "spectral"

    def __init__(self, E, X, start: dict | None = None):
        super().__init__()
        self.E = np.asarray(E, dtype=float)
        self.X = np.asarray(X, dtype=np.int64)
        if self.E.shape != self.X.shape or self.E.ndim != 1:
            raise InvalidParams("E and X must be 1-D arrays of equal length")
        if np.any(self.E <= 0) or np.any(self.X < 0):
            raise InvalidParams("energies must be positive and counts non-negative")
        self.n = self.E.size
        self.start = dict(SPECTRAL_START if start is None else start)
        self._logE = np.log(self.E)
        self._invE = 1.0 / self.E
        self._Xf = self.X.astype(float)
        self.S = int(self.X.sum())
        self._lgS1 = float(gammaln(self.S + 1))
        self._x_over_e = float(self._Xf @ self._invE)
        self._x_log_e = float(self._Xf @ self._logE)

        params = ("mu", "phi", "beta", "alpha", "gamma")
        reduced = ("mu", "phi", "beta", "gamma")
        self.add_target((), params, self.log_joint_augmented)
        self.add_target(("XL",), params, self.log_posterior)
        self.add_target(("alpha", "XL"), reduced, self.log_marginal)
        self.add_target(("alpha",), reduced, self.log_marginal_augmented)
        for marg in ((), ("XL",)):
            self.add_draw(("alpha",), marg, self.draw_alpha, self.alpha_logpdf)
        self.add_draw(("XL",), (), self.draw_xl, self.xl_logpdf)
        self.add_draw(("gamma",), (), self.draw_gamma, self.gamma_logpdf)

    def component_shapes(self) -> dict:
        return {"mu": (), "phi": (), "beta": (), "alpha": (), "XL": (self.n,), "gamma": ()}

    def initial_state(self) -> dict:
        s = {k: v for k, v in self.start.items() if k != "XL"}
        s["mu"] = int(s["mu"])
        s["XL"] = np.zeros(self.n, dtype=np.int64)
        return s

    # -- shared pieces ----------------------------------------------------------
    def _in_support(self, state) -> bool:
        mu = state["mu"]
        return state["phi"] >= 0 and state["gamma"] > 0 and 1 <= mu <= self.n and mu == int(mu)

    def _shape(self, state):
        """``(X . log w, R)`` with ``R = sum_i w_i``."""
        beta, gam, phi = state["beta"], state["gamma"], state["phi"]
        k = int(state["mu"]) - 1
        logw = -beta * self._logE - phi * self._invE
        base = np.exp(logw)
        line = gam * math.exp(-phi * self._invE[k])
        R = float(base.sum()) + line
        logw[k] = math.log(math.exp(-beta * self._logE[k]) + gam) - phi * self._invE[k]
        return float(self._Xf @ logw), R

    def _alpha_terms(self, alpha: float, R: float) -> list:
        return [self.S * math.log(alpha), -alpha * R]

    def _xl_terms(self, state):
        """Terms of the augmented density that involve ``XL``, or None off support."""
        XL = state["XL"]
        k = int(state["mu"]) - 1
        m = int(XL[k])
        if m < 0 or m > self.X[k] or np.count_nonzero(XL) > (m > 0):
            return None
        lbinom = float(gammaln(self.X[k] + 1) - gammaln(m + 1) - gammaln(self.X[k] - m + 1))
        t = [
            -state["phi"] * self._x_over_e,
            -state["beta"] * self._x_log_e,
            state["beta"] * m * self._logE[k],
            lbinom,
        ]
        if m:
            t.append(m * math.log(state["gamma"]))
        return t

    def _R(self, state) -> float:
        beta, gam, phi = state["beta"], state["gamma"], state["phi"]
        k = int(state["mu"]) - 1
        return float(np.exp(-beta * self._logE - phi * self._invE).sum()) + gam * math.exp(-phi * self._invE[k])

    # -- log targets ---------------------------------------------------------------
    def log_posterior(self, state) -> list:
        """Posterior of the parameters with ``XL`` summed out."""
        if not self._in_support(state) or state["alpha"] <= 0:
            return _NEG_INF
        xlogw, R = self._shape(state)
        return [xlogw] + self._alpha_terms(state["alpha"], R)

    def log_marginal(self, state) -> list:
        """Posterior of ``(beta, gamma, mu, phi)`` with ``alpha`` and ``XL`` integrated out."""
        if not self._in_support(state):
            return _NEG_INF
        xlogw, R = self._shape(state)
        return [xlogw, -(self.S + 1) * math.log(R)]

    def log_joint_augmented(self, state) -> list:
        """Joint posterior of the parameters and the line counts ``XL``.

        Includes the binomial coefficient of the split ``X_mu = XL_mu + XC_mu``,
        which makes this sum over ``XL`` to :meth:`log_posterior` exactly.
        """
        if not self._in_support(state) or state["alpha"] <= 0:
            return _NEG_INF
        t = self._xl_terms(state)
        if t is None:
            return _NEG_INF
        return t + self._alpha_terms(state["alpha"], self._R(state))

    def log_marginal_augmented(self, state) -> list:
        """:meth:`log_joint_augmented` with ``alpha`` integrated out."""
        if not self._in_support(state):
            return _NEG_INF
        t = self._xl_terms(state)
        if t is None:
            return _NEG_INF
        return t + [-(self.S + 1) * math.log(self._R(state))]

    # -- exact conditionals ------------------------------------------------------------
    def alpha_conditional(self, state):
        return gamma(self.S + 1, self._R(state))

    def draw_alpha(self, state, rng) -> dict:
        """``alpha ~ Gamma(S + 1, R)``; the same whether or not ``XL`` is conditioned on."""
        return {"alpha": float(draw(self.alpha_conditional(state), rng))}

    def alpha_logpdf(self, state) -> list:
        alpha = state["alpha"]
        if alpha <= 0:
            return _NEG_INF
        R = self._shape(state)[1]
        return [(self.S + 1) * math.log(R), -self._lgS1] + self._alpha_terms(alpha, R)

    def xl_probability(self, state) -> float:
        k = int(state["mu"]) - 1
        cont = math.exp(-state["beta"] * self._logE[k])
        return state["gamma"] / (cont + state["gamma"])

    def draw_xl(self, state, rng) -> dict:
        """Line counts: binomial thinning of ``X_mu``, zero in every other bin."""
        k = int(state["mu"]) - 1
        XL = np.zeros(self.n, dtype=np.int64)
        XL[k] = int(draw(binomial(int(self.X[k]), self.xl_probability(state)), rng))
        return {"XL": XL}

    def xl_logpdf(self, state) -> float:
        XL = state["XL"]
        k = int(state["mu"]) - 1
        if np.count_nonzero(XL) > (XL[k] > 0):
            return -math.inf
        return float(log_pdf(binomial(int(self.X[k]), self.xl_probability(state)), XL[k]))

    def gamma_conditional(self, state):
        k = int(state["mu"]) - 1
        return gamma(int(state["XL"].sum()) + 1, state["alpha"] * math.exp(-state["phi"] * self._invE[k]))

    def draw_gamma(self, state, rng) -> dict:
        return {"gamma": float(draw(self.gamma_conditional(state), rng))}

    def gamma_logpdf(self, state) -> float:
        return float(log_pdf(self.gamma_conditional(state), state["gamma"]))

    # -- checks --------------------------------------------------------------------
    def check_support(self, state) -> bool:
        """``0 <= XL_i <= X_i`` everywhere and ``XL`` zero off the line bin."""
        XL = np.asarray(state["XL"])
        k = int(state["mu"]) - 1
        off = np.delete(XL, k)
        return bool(np.all(XL >= 0) and np.all(XL <= self.X) and not np.any(off))
