"""Multivariate normal targets with every marginal and conditional available.

Used for the bivariate example and as a closed-form test target for sampler
fragments: any step a spec can describe has an exact answer here.
"""
from __future__ import annotations

import numpy as np

from ..distributions import draw, log_pdf, mvnormal, normal
from ..errors import InvalidParams, MissingConditional
from ..runner import ModelBackend

__all__ = ["GaussianModel"]


class GaussianModel(ModelBackend):
    """Scalar components jointly ``N(mean, cov)``.

    Parameters
    ----------
    names : sequence of str
        Component ids in the order of ``mean``.
    mean : array_like
    cov : array_like
        Positive definite.
    """

    name = "gaussian"

    def __init__(self, names, mean, cov):
        super().__init__()
        self.names = tuple(names)
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        d = len(self.names)
        if self.mean.shape != (d,) or self.cov.shape != (d, d):
            raise InvalidParams("mean and covariance must match the component list")
        if np.any(np.linalg.eigvalsh(self.cov) <= 0):
            raise InvalidParams("covariance must be positive definite")
        self._pos = {n: i for i, n in enumerate(self.names)}
        self._cache: dict = {}

    def component_shapes(self) -> dict:
        return {n: () for n in self.names}

    def initial_state(self) -> dict:
        return {n: float(m) for n, m in zip(self.names, self.mean)}

    # -- linear algebra -------------------------------------------------------
    def _idx(self, comps) -> list:
        try:
            return sorted(self._pos[c] for c in comps)
        except KeyError as exc:
            raise MissingConditional(f"{self.name}: unknown component {exc.args[0]!r}") from None

    def _conditional(self, samples, marginalized):
        """Regression form of ``samples`` given the non-integrated rest."""
        key = (frozenset(samples), frozenset(marginalized))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        s = self._idx(samples)
        c = [i for i in range(len(self.names)) if i not in s and self.names[i] not in key[1]]
        S = self.cov
        if c:
            coef = np.linalg.solve(S[np.ix_(c, c)], S[np.ix_(c, s)]).T
            ccov = S[np.ix_(s, s)] - coef @ S[np.ix_(c, s)]
        else:
            coef = np.zeros((len(s), 0))
            ccov = S[np.ix_(s, s)].copy()
        ccov = 0.5 * (ccov + ccov.T)
        hit = (s, c, coef, ccov)
        self._cache[key] = hit
        return hit

    def _dist(self, state, samples, marginalized):
        s, c, coef, ccov = self._conditional(samples, marginalized)
        x_c = np.array([state[self.names[i]] for i in c], dtype=float)
        m = self.mean[s] + coef @ (x_c - self.mean[c])
        if len(s) == 1:
            return s, normal(float(m[0]), float(np.sqrt(ccov[0, 0])))
        return s, mvnormal(m, ccov)

    # -- backend requests ---------------------------------------------------------
    def log_conditional(self, samples, marginalized):
        keep = [n for n in self.names if n not in frozenset(marginalized)]
        if not frozenset(samples) <= frozenset(keep):
            raise MissingConditional(f"{self.name}: cannot sample an integrated-out component")
        idx = self._idx(keep)
        spec = mvnormal(self.mean[idx], self.cov[np.ix_(idx, idx)]) if len(idx) > 1 else normal(
            float(self.mean[idx[0]]), float(np.sqrt(self.cov[idx[0], idx[0]]))
        )

        def logp(state):
            x = [state[self.names[i]] for i in idx]
            return log_pdf(spec, np.asarray(x, dtype=float) if len(idx) > 1 else x[0])

        return logp

    def exact_draw(self, samples, marginalized):
        samples = tuple(samples)

        def draw_fn(state, rng):
            s, dist = self._dist(state, samples, marginalized)
            value = np.atleast_1d(draw(dist, rng))
            return {self.names[i]: float(v) for i, v in zip(s, value)}

        return draw_fn

    def exact_logpdf(self, samples, marginalized):
        def logpdf(state):
            s, dist = self._dist(state, samples, marginalized)
            x = np.array([state[self.names[i]] for i in s], dtype=float)
            return log_pdf(dist, x if len(s) > 1 else x[0])

        return logpdf

    def marginal_cov(self, comps) -> np.ndarray:
        idx = self._idx(comps)
        return self.cov[np.ix_(idx, idx)]
