"""Standard bivariate normal with correlation ``rho``."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParams
from .gaussian import GaussianModel

__all__ = ["BivariateNormalModel"]


class BivariateNormalModel(GaussianModel):
    """``(psi1, psi2) ~ N2(0, [[1, rho], [rho, 1]])``.

    The two one-dimensional conditionals ``psi_k | psi_j ~ N(rho psi_j, 1 - rho**2)``
    are exposed directly since the strategy comparisons evaluate them in bulk.
    """

    name = "bivariate"

    def __init__(self, rho: float = 0.9):
        if not -1.0 < rho < 1.0:
            raise InvalidParams(f"rho must lie in (-1, 1), got {rho!r}")
        self.rho = float(rho)
        super().__init__(("psi1", "psi2"), [0.0, 0.0], [[1.0, rho], [rho, 1.0]])

    @property
    def cond_sd(self) -> float:
        return math.sqrt(1.0 - self.rho**2)

    def cond_logpdf(self, x, given):
        """``log p(x | other = given)``, vectorized."""
        z = (np.asarray(x, dtype=float) - self.rho * np.asarray(given, dtype=float)) / self.cond_sd
        return -0.5 * z * z - math.log(self.cond_sd) - 0.5 * math.log(2 * math.pi)

    def marginal_logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * x * x - 0.5 * math.log(2 * math.pi)

    def initial_state(self) -> dict:
        return {"psi1": 0.0, "psi2": 0.0}
