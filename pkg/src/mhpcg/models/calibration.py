"""Power-law counts through an uncertain effective area.

    Y_j ~ Poisson(A_j(Z) * alpha * E_j**-beta),   A(Z) = A0 + Q Z,   Z ~ N_q(0, I).

The target is ``p(Z) p(alpha, beta | Z, Y)`` with ``p(alpha, beta)`` flat:
``Z`` keeps its prior and only ``(alpha, beta)`` learn from the data.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre
from scipy.special import gammaln

from ..distributions import draw, gamma, log_pdf, mvnormal, poisson
from ..errors import InvalidParams, PositivityViolation
from ..runner import ModelBackend

__all__ = [
    "CALIBRATION_TRUTH",
    "CALIBRATION_START",
    "calibration_energies",
    "baseline_area",
    "synthesize_pca_basis",
    "save_basis",
    "load_basis",
    "simulate_calibration",
    "CalibrationModel",
]

CALIBRATION_TRUTH = {"Z": 1.5, "alpha": 30.0, "beta": 1.0}
CALIBRATION_START = {"Z": 0.0, "alpha": 1.0, "beta": 1.0}
_SPREAD = 0.2
_DECAY = 1.0 / 3.0
_NEG_INF = [-math.inf]


def calibration_energies(n: int = 1078, lo: float = 0.225, hi: float = 10.995) -> np.ndarray:
    return np.linspace(lo, hi, n)


def baseline_area(E) -> np.ndarray:
    """Smooth positive curve peaking at 1 near 1.5 keV, falling off on both sides in log E."""
    z = (np.log(np.asarray(E, dtype=float)) - math.log(1.5)) / 0.8
    return np.exp(-0.5 * z * z)


def synthesize_pca_basis(
    E, q: int, rng: np.random.Generator | None = None, spread: float = _SPREAD, decay: float = _DECAY
):
    """Baseline area and an orthogonal basis of smooth perturbations.

    Column ``j`` starts as ``A0 * P_j`` with ``P_j`` the degree-``j`` Legendre
    polynomial in log energy rescaled to ``[-1, 1]``. The columns are
    orthonormalized, weighted by ``decay**j`` like the falling variances of
    principal components, and scaled by a common factor so that
    ``max_i sum_j |Q_ij| / A0_i == spread``. ``A0 + Q Z`` therefore stays
    positive whenever ``max|Z| < 1 / spread``. Column 1 is an overall level
    and column 2 a tilt.

    ``rng`` only randomizes column signs, which leaves the prior on ``A``
    unchanged.
    """
    E = np.asarray(E, dtype=float)
    n = E.size
    if not 0 <= q < n:
        raise InvalidParams(f"need 0 <= q < n, got q={q}, n={n}")
    A0 = baseline_area(E)
    if q == 0:
        return A0, np.zeros((n, 0))
    x = np.log(E)
    x = 2.0 * (x - x.min()) / (x.max() - x.min()) - 1.0
    raw = np.column_stack([A0 * legendre.legval(x, np.eye(q)[j]) for j in range(q)])
    Qo, Rr = np.linalg.qr(raw)
    Qo = Qo * np.sign(np.diag(Rr))
    if rng is not None:
        Qo = Qo * rng.choice([-1.0, 1.0], size=q)
    Qo = Qo * decay ** np.arange(q)
    scale = spread / np.max(np.abs(Qo).sum(axis=1) / A0)
    return A0, Qo * scale


def save_basis(path, A0, Q) -> None:
    """CSV with columns ``A0,Q1..Qq``, 17 significant digits."""
    A0 = np.asarray(A0, dtype=float)
    Q = np.asarray(Q, dtype=float).reshape(A0.size, -1)
    header = ",".join(["A0"] + [f"Q{j + 1}" for j in range(Q.shape[1])])
    np.savetxt(path, np.column_stack([A0, Q]), fmt="%.17g", delimiter=",", header=header, comments="")


def load_basis(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "A0" or any(h != f"Q{j + 1}" for j, h in enumerate(header[1:])):
        raise InvalidParams(f"{path}: expected header A0,Q1..Qq, got {','.join(header)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].copy(), data[:, 1:].copy()


def simulate_calibration(E, A0, Q, Z, alpha, beta, rng) -> np.ndarray:
    A = np.asarray(A0) + np.asarray(Q) @ np.broadcast_to(np.asarray(Z, dtype=float), (Q.shape[1],))
    if np.any(A <= 0):
        raise PositivityViolation("effective area is not strictly positive at the true Z")
    lam = A * alpha * np.asarray(E, dtype=float) ** -beta
    return np.asarray(draw(poisson(lam), rng), dtype=np.int64)


class CalibrationModel(ModelBackend):
    """Pragmatic-Bayes target for ``(Z, alpha, beta)``.

    Parameters
    ----------
    E, Y : array_like
        Energies and observed counts.
    A0 : array_like
        Baseline effective area.
    Q : array_like, shape (n, q)
        Perturbation basis.
    """

    name = "calibration"

    def __init__(self, E, Y, A0, Q, start: dict | None = None):
        super().__init__()
        self.E = np.asarray(E, dtype=float)
        self.Y = np.asarray(Y, dtype=np.int64)
        self.A0 = np.asarray(A0, dtype=float)
        self.Q = np.asarray(Q, dtype=float).reshape(self.E.size, -1)
        if not (self.E.shape == self.Y.shape == self.A0.shape):
            raise InvalidParams("E, Y and A0 must have equal length")
        self.q = self.Q.shape[1]
        self.start = dict(CALIBRATION_START if start is None else start)
        self._logE = np.log(self.E)
        self._Yf = self.Y.astype(float)
        self.S = int(self.Y.sum())
        self._lgS1 = float(gammaln(self.S + 1))
        self._y_log_e = float(self._Yf @ self._logE)
        self._prior = mvnormal(np.zeros(self.q), np.eye(self.q)) if self.q else None

        self.add_target((), ("alpha", "beta"), self.log_likelihood)
        self.add_target(("alpha",), ("beta",), self.log_beta_marginal)
        self.add_draw(("Z",), ("alpha", "beta"), self.draw_z, self.z_logpdf)
        self.add_draw(("alpha",), (), self.draw_alpha, self.alpha_logpdf)

    def component_shapes(self) -> dict:
        return {"Z": (self.q,), "alpha": (), "beta": ()}

    def initial_state(self) -> dict:
        return {
            "Z": np.full(self.q, float(self.start["Z"])),
            "alpha": float(self.start["alpha"]),
            "beta": float(self.start["beta"]),
        }

    def area(self, Z) -> np.ndarray:
        return self.A0 + self.Q @ np.asarray(Z, dtype=float)

    def _pieces(self, state):
        """``(sum_j Y_j log A_j, R)`` with ``R = sum_j A_j E_j**-beta``, or None if ``A`` is not positive."""
        A = self.area(state["Z"])
        if np.any(A <= 0):
            return None
        R = float(A @ np.exp(-state["beta"] * self._logE))
        return float(self._Yf @ np.log(A)), R

    # -- log targets ---------------------------------------------------------------------
    def log_likelihood(self, state) -> list:
        """``log p(Y | Z, alpha, beta)`` up to a constant; the target for ``alpha, beta`` given ``Z``."""
        pieces = self._pieces(state)
        if pieces is None or state["alpha"] <= 0:
            return _NEG_INF
        ylogA, R = pieces
        a = state["alpha"]
        return [ylogA, self.S * math.log(a), -state["beta"] * self._y_log_e, -a * R]

    def log_beta_marginal(self, state) -> list:
        """``log p(beta | Z, Y)`` up to a constant, ``alpha`` integrated out analytically."""
        pieces = self._pieces(state)
        if pieces is None:
            return _NEG_INF
        ylogA, R = pieces
        return [ylogA, -state["beta"] * self._y_log_e, -(self.S + 1) * math.log(R)]

    # -- exact conditionals -------------------------------------------------------------
    def draw_z(self, state, rng) -> dict:
        if not self.q:
            return {"Z": np.zeros(0)}
        return {"Z": np.asarray(draw(self._prior, rng), dtype=float)}

    def z_logpdf(self, state) -> float:
        return float(log_pdf(self._prior, state["Z"])) if self.q else 0.0

    def alpha_conditional(self, state):
        pieces = self._pieces(state)
        if pieces is None:
            raise PositivityViolation("effective area is not strictly positive at the current Z")
        return gamma(self.S + 1, pieces[1])

    def draw_alpha(self, state, rng) -> dict:
        """``alpha ~ Gamma(S + 1, sum_j A_j(Z) E_j**-beta)``."""
        return {"alpha": float(draw(self.alpha_conditional(state), rng))}

    def alpha_logpdf(self, state) -> float:
        return float(log_pdf(self.alpha_conditional(state), state["alpha"]))
