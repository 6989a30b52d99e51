"""Jumping rules and the Metropolis-Hastings update variants.

Target log-densities handed to the updates may return either a float or a
sequence of additive terms. Acceptance log-ratios are accumulated with
:func:`math.fsum` over all terms at once, so a term that appears in both the
numerator and the denominator cancels exactly instead of leaving rounding
noise the size of its magnitude. This matters when two algebraically equal
ratios are compared to 1e-12 on models whose log-densities are of order 1e4.

Every update draws its proposal first and its acceptance uniform second, and
only then any auxiliary exact draw. Plain, iterated, joint and blocked updates
therefore make the same decisions from the same stream whenever their ratios
agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np

from .distributions import cholesky_factor, log_pdf, mvnormal
from .errors import NonFiniteDensity, SpecError

__all__ = [
    "NORMAL_WALK",
    "LOGNORMAL_WALK",
    "UNIFORM_INDEPENDENT",
    "MVNORMAL_WALK",
    "CONCATENATED",
    "JumpDescriptor",
    "normal_walk",
    "lognormal_walk",
    "uniform_independent",
    "mvnormal_walk",
    "concatenated",
    "MHResult",
    "IteratedResult",
    "JointResult",
    "StarResult",
    "log_ratio",
    "mh_update",
    "iterated_mh_update",
    "joint_mh_update",
    "blocked_mh_update",
    "star_kernel_update",
]

NORMAL_WALK = "SymmetricNormalWalk"
LOGNORMAL_WALK = "LogNormalWalk"
UNIFORM_INDEPENDENT = "DiscreteUniformIndependent"
MVNORMAL_WALK = "IndependentMVNormal"
CONCATENATED = "Concatenated"
JUMP_KINDS = (NORMAL_WALK, LOGNORMAL_WALK, UNIFORM_INDEPENDENT, MVNORMAL_WALK, CONCATENATED)


@dataclass(frozen=True, eq=False)
class JumpDescriptor:
    """An MH jumping rule.

    Parameters
    ----------
    kind : str
        One of ``SymmetricNormalWalk`` (``scale`` is a standard deviation,
        scalar or per dimension), ``LogNormalWalk`` (normal walk on the log
        of a positive scalar, ``scale`` on the log axis),
        ``DiscreteUniformIndependent`` (uniform on ``1..n`` regardless of the
        current value), ``IndependentMVNormal`` (normal walk centred at the
        current value with covariance ``scale**2 * cov``) or ``Concatenated``.
    scale : float or array
    cov : array, optional
        Shape matrix of the multivariate walk.
    n : int, optional
        Support size of the discrete uniform rule.
    depends_on : frozenset of str
        Components the rule reads besides the proposed set.
    target_rate : float, optional
        Acceptance rate that burn-in tuning aims for. ``None`` freezes the
        scale.
    adapt_shape : bool
        Let burn-in tuning also reset the per-dimension scales (or the
        covariance) from the empirical spread of the chain.
    draw : tuple of str
        For ``Concatenated``: the set drawn exactly from a model conditional.
    inner : JumpDescriptor, optional
        For ``Concatenated``: the walk used for the remaining components.
    draw_first : bool
        For ``Concatenated``: ``True`` draws ``draw`` from its marginal
        before the inner walk (joint strategy); ``False`` walks first and
        then draws ``draw`` from its conditional given the walked values
        (blocked strategy).
    """

    kind: str
    scale: Any = 1.0
    cov: Any = None
    n: int | None = None
    depends_on: frozenset = field(default_factory=frozenset)
    target_rate: float | None = None
    adapt_shape: bool = False
    draw: tuple = ()
    inner: "JumpDescriptor | None" = None
    draw_first: bool = False

    def __post_init__(self):
        if self.kind not in JUMP_KINDS:
            raise SpecError(f"unknown jump kind {self.kind!r}")
        object.__setattr__(self, "depends_on", frozenset(self.depends_on))
        object.__setattr__(self, "draw", tuple(self.draw))
        if self.kind == UNIFORM_INDEPENDENT and (self.n is None or self.n < 1):
            raise SpecError("DiscreteUniformIndependent needs a support size n >= 1")
        if self.kind == CONCATENATED and (self.inner is None or not self.draw):
            raise SpecError("Concatenated jump needs a draw set and an inner jump")
        if self.kind == CONCATENATED and self.inner.kind == CONCATENATED:
            raise SpecError("Concatenated jumps do not nest")
        if self.kind == MVNORMAL_WALK:
            if self.cov is None:
                raise SpecError("IndependentMVNormal needs a covariance")
            object.__setattr__(self, "cov", np.array(self.cov, dtype=float))
        if self.target_rate is not None and not 0.0 < self.target_rate < 1.0:
            raise SpecError("target_rate must lie in (0, 1)")
        if np.any(np.asarray(self.scale, dtype=float) <= 0):
            raise SpecError("jump scale must be positive")

    @cached_property
    def _factor(self):
        return cholesky_factor(self.cov)

    @property
    def symmetric(self) -> bool:
        return self.kind in (NORMAL_WALK, UNIFORM_INDEPENDENT, MVNORMAL_WALK)

    def propose(self, x, rng: np.random.Generator):
        """Draw a proposal given the current value ``x``."""
        kind = self.kind
        if kind == NORMAL_WALK:
            if np.ndim(x) == 0:
                return x + self.scale * rng.standard_normal()
            return x + np.asarray(self.scale) * rng.standard_normal(np.shape(x))
        if kind == LOGNORMAL_WALK:
            return x * math.exp(self.scale * rng.standard_normal())
        if kind == UNIFORM_INDEPENDENT:
            return int(rng.integers(1, self.n + 1))
        if kind == MVNORMAL_WALK:
            eps = rng.standard_normal(self._factor.shape[0])
            return x + self.scale * (self._factor @ eps)
        raise SpecError("a Concatenated jump is proposed through joint or blocked updates")

    def log_density(self, y, x) -> float:
        """``log J(y | x)`` including every constant."""
        kind = self.kind
        if kind == NORMAL_WALK:
            s = np.broadcast_to(np.asarray(self.scale, dtype=float), np.shape(x))
            z = (np.asarray(y, dtype=float) - x) / s
            return float(np.sum(-0.5 * z * z - np.log(s) - 0.5 * math.log(2 * math.pi)))
        if kind == LOGNORMAL_WALK:
            if y <= 0:
                return -math.inf
            z = (math.log(y) - math.log(x)) / self.scale
            return -0.5 * z * z - math.log(self.scale) - math.log(y) - 0.5 * math.log(2 * math.pi)
        if kind == UNIFORM_INDEPENDENT:
            return -math.log(self.n) if 1 <= y <= self.n else -math.inf
        if kind == MVNORMAL_WALK:
            cov = self.scale**2 * self.cov
            return float(log_pdf(mvnormal(np.asarray(x, dtype=float), cov), np.asarray(y, dtype=float)))
        raise SpecError("a Concatenated jump has no standalone density")

    def log_correction(self, x, y) -> float:
        """``log J(x | y) - log J(y | x)`` for a move from ``x`` to ``y``.

        Symmetric and independent-uniform rules contribute zero. The log-normal
        walk contributes its Jacobian, ``log(y / x)``.
        """
        if self.symmetric:
            return 0.0
        if self.kind == LOGNORMAL_WALK:
            return math.log(y) - math.log(x)
        raise SpecError("a Concatenated jump has no standalone correction")

    def with_scale(self, scale) -> "JumpDescriptor":
        return replace(self, scale=scale)

    def signature(self) -> tuple:
        """Hashable structural identity, ignoring tuning constants."""
        inner = self.inner.signature() if self.inner is not None else None
        return (self.kind, self.depends_on, self.n, self.draw, inner, self.draw_first)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "scale": _jsonable(self.scale), "depends_on": sorted(self.depends_on)}
        if self.cov is not None:
            out["cov"] = _jsonable(self.cov)
        if self.n is not None:
            out["n"] = self.n
        if self.target_rate is not None:
            out["target_rate"] = self.target_rate
        if self.adapt_shape:
            out["adapt_shape"] = True
        if self.kind == CONCATENATED:
            out["draw"] = list(self.draw)
            out["inner"] = self.inner.to_dict()
            out["draw_first"] = self.draw_first
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "JumpDescriptor":
        d = dict(d)
        if "inner" in d and d["inner"] is not None:
            d["inner"] = cls.from_dict(d["inner"])
        if isinstance(d.get("scale"), list):
            d["scale"] = np.asarray(d["scale"], dtype=float)
        d["depends_on"] = frozenset(d.get("depends_on", ()))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown jump fields {sorted(unknown)}")
        return cls(**d)

    def __repr__(self):
        if self.kind == CONCATENATED:
            order = "then" if self.draw_first else "before"
            return f"Concatenated(draw {','.join(self.draw)} {order} {self.inner!r})"
        return f"{self.kind}(scale={_jsonable(self.scale)})"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def normal_walk(scale=1.0, target_rate=None, adapt_shape=False) -> JumpDescriptor:
    return JumpDescriptor(NORMAL_WALK, scale=scale, target_rate=target_rate, adapt_shape=adapt_shape)


def lognormal_walk(scale=1.0, target_rate=None) -> JumpDescriptor:
    return JumpDescriptor(LOGNORMAL_WALK, scale=scale, target_rate=target_rate)


def uniform_independent(n: int) -> JumpDescriptor:
    return JumpDescriptor(UNIFORM_INDEPENDENT, n=int(n))


def mvnormal_walk(cov, scale=1.0, target_rate=None, adapt_shape=False) -> JumpDescriptor:
    return JumpDescriptor(MVNORMAL_WALK, scale=scale, cov=cov, target_rate=target_rate, adapt_shape=adapt_shape)


def concatenated(draw: Sequence[str], inner: JumpDescriptor, draw_first: bool, depends_on=()) -> JumpDescriptor:
    return JumpDescriptor(
        CONCATENATED, draw=tuple(draw), inner=inner, draw_first=draw_first, depends_on=frozenset(depends_on)
    )


# --------------------------------------------------------------------------
# Log-ratio accumulation


def _terms(x) -> list:
    if isinstance(x, float):
        return [x]
    if isinstance(x, (int, np.floating, np.integer)):
        return [float(x)]
    return [float(v) for v in np.ravel(np.asarray(x, dtype=float))]


def _total(terms: list, what: str) -> float:
    try:
        tot = math.fsum(terms)
    except ValueError:
        raise NonFiniteDensity(f"{what} log-density mixes +inf and -inf terms") from None
    if tot != tot:
        raise NonFiniteDensity(f"{what} log-density is NaN")
    if tot == math.inf:
        raise NonFiniteDensity(f"{what} log-density is +inf")
    return tot


def log_ratio(numerator, denominator, *extra) -> float:
    """``log(num / den)`` from term lists, summed exactly.

    Parameters
    ----------
    numerator, denominator : float or sequence of float
        Log-density terms of the proposed and the current configuration.
    *extra : float
        Further additive terms, typically jump corrections.

    Returns
    -------
    float
        ``-inf`` when the proposal has zero density, ``+inf`` when only the
        current state does.

    Raises
    ------
    NonFiniteDensity
        On NaN terms, or when both configurations have zero density.
    """
    num = _terms(numerator)
    den = _terms(denominator)
    n_tot = _total(num, "proposal")
    d_tot = _total(den, "current")
    if d_tot == -math.inf:
        if n_tot == -math.inf:
            raise NonFiniteDensity("current state and proposal both have zero density")
        return math.inf
    if n_tot == -math.inf:
        return -math.inf
    extra_terms = [float(e) for e in extra]
    for e in extra_terms:
        if e != e:
            raise NonFiniteDensity("jump correction is NaN")
    return math.fsum(num + [-t for t in den] + extra_terms)


def _accept(u: float, log_r: float) -> bool:
    if log_r >= 0.0:
        return True
    return u < math.exp(log_r)


# --------------------------------------------------------------------------
# Updates


@dataclass
class MHResult:
    """Outcome of one MH update.

    ``value`` is the proposal on acceptance and the very object passed in as
    the current value on rejection. ``logp`` holds the target's terms at
    ``value``, which iterated updates reuse.
    """

    value: Any
    accepted: bool
    log_r: float
    proposal: Any
    logp: list


@dataclass
class IteratedResult:
    value: Any
    n_accepted: int
    accepted: list
    log_r: list
    proposals: list


@dataclass
class JointResult:
    a: Any
    b: Any
    accepted: bool
    log_r: float
    proposal_a: Any
    proposal_b: Any


@dataclass
class StarResult:
    b: Any
    c: Any
    accepted: bool
    log_r: float
    proposal: Any


def mh_update(
    target_logdensity: Callable[[Any], Any],
    jump: JumpDescriptor,
    current,
    rng: np.random.Generator,
    *,
    current_logdensity=None,
) -> MHResult:
    """One Metropolis-Hastings step.

    Parameters
    ----------
    target_logdensity : callable
        Maps a value of the sampled set to its unnormalized log target, as a
        float or a sequence of additive terms.
    jump : JumpDescriptor
        A walk-type or independent rule (not ``Concatenated``).
    current : float, int or array
        Current value of the sampled set.
    rng : numpy.random.Generator
    current_logdensity : optional
        Cached target terms at ``current``.

    Returns
    -------
    MHResult
    """
    proposal = jump.propose(current, rng)
    u = rng.random()
    cur = _terms(target_logdensity(current)) if current_logdensity is None else current_logdensity
    prop = _terms(target_logdensity(proposal))
    lr = log_ratio(prop, cur, jump.log_correction(current, proposal))
    if _accept(u, lr):
        return MHResult(proposal, True, lr, proposal, prop)
    return MHResult(current, False, lr, proposal, cur)


def iterated_mh_update(target_logdensity, jump: JumpDescriptor, current, L: int, rng) -> IteratedResult:
    """Apply :func:`mh_update` ``L`` times to the same conditional target.

    The target is held fixed across the inner iterations, so its value at the
    chain's current point is computed once and carried along.
    """
    if L < 1:
        raise ValueError("L must be a positive integer")
    value = current
    logp = None
    accepted, ratios, proposals = [], [], []
    for _ in range(L):
        res = mh_update(target_logdensity, jump, value, rng, current_logdensity=logp)
        value, logp = res.value, res.logp
        accepted.append(res.accepted)
        ratios.append(res.log_r)
        proposals.append(res.proposal)
    return IteratedResult(value, int(sum(accepted)), accepted, ratios, proposals)


def joint_mh_update(
    marginal_sampler: Callable[[np.random.Generator], Any],
    inner_jump: JumpDescriptor,
    target_logdensity_pair: Callable[[Any, Any], Any],
    current_a,
    current_b,
    rng: np.random.Generator,
) -> JointResult:
    """Joint strategy: exact marginal draw of A concatenated with a walk on B.

    The proposal is ``A' ~ p(A)`` and ``B' ~ J(. | B)``. The A-marginal
    cancels from the acceptance ratio, which becomes
    ``p(B'|A') J(B|B') / (p(B|A) J(B'|B))``.

    Parameters
    ----------
    marginal_sampler : callable
        ``rng -> A'``, an exact draw from the marginal (or reduced
        conditional) of A.
    inner_jump : JumpDescriptor
        Walk for B; must not read A.
    target_logdensity_pair : callable
        ``(a, b) -> log p(b | a)``, normalized in ``b`` for every ``a``.
    """
    prop_b = inner_jump.propose(current_b, rng)
    u = rng.random()
    prop_a = marginal_sampler(rng)
    lr = log_ratio(
        target_logdensity_pair(prop_a, prop_b),
        target_logdensity_pair(current_a, current_b),
        inner_jump.log_correction(current_b, prop_b),
    )
    if _accept(u, lr):
        return JointResult(prop_a, prop_b, True, lr, prop_a, prop_b)
    return JointResult(current_a, current_b, False, lr, prop_a, prop_b)


def blocked_mh_update(
    outer_jump: JumpDescriptor,
    conditional_sampler: Callable[[Any, np.random.Generator], Any],
    conditional_logpdf: Callable[[Any, Any], Any],
    joint_logdensity: Callable[[Any, Any], Any],
    current_a,
    current_b,
    rng: np.random.Generator,
) -> JointResult:
    """Blocked update of (A, B) with the concatenated rule ``J(A'|A) p(B'|A')``.

    The full Metropolis-Hastings ratio

    ``p(A',B') J(A|A') p(B|A) / (p(A,B) J(A'|A) p(B'|A'))``

    is evaluated term by term, so that its reduction to the A-only ratio is
    checked numerically rather than assumed. On rejection both A and B keep
    their previous values, which is what separates this from updating A by MH
    and then drawing B afresh.

    Parameters
    ----------
    outer_jump : JumpDescriptor
        Walk for A.
    conditional_sampler : callable
        ``(a, rng) -> b`` exact draw from ``p(B | A=a)``.
    conditional_logpdf : callable
        ``(b, a) -> log p(b | a)``, normalized.
    joint_logdensity : callable
        ``(a, b) -> log p(a, b)`` up to a constant.
    """
    prop_a = outer_jump.propose(current_a, rng)
    u = rng.random()
    prop_b = conditional_sampler(prop_a, rng)
    num = _terms(joint_logdensity(prop_a, prop_b)) + _terms(conditional_logpdf(current_b, current_a))
    den = _terms(joint_logdensity(current_a, current_b)) + _terms(conditional_logpdf(prop_b, prop_a))
    lr = log_ratio(num, den, outer_jump.log_correction(current_a, prop_a))
    if _accept(u, lr):
        return JointResult(prop_a, prop_b, True, lr, prop_a, prop_b)
    return JointResult(current_a, current_b, False, lr, prop_a, prop_b)


def star_kernel_update(
    inner_logdensity,
    jump: JumpDescriptor,
    trailing_sampler: Callable[[Any, np.random.Generator], Any],
    current_b,
    rng: np.random.Generator,
) -> StarResult:
    """Reduced MH step for B followed by an exact draw of the reduced-out set C.

    ``inner_logdensity`` targets B with C integrated out and
    ``trailing_sampler(b, rng)`` draws C from its complete conditional given
    the updated B. C is refreshed whether or not the proposal is accepted.
    """
    res = mh_update(inner_logdensity, jump, current_b, rng)
    c = trailing_sampler(res.value, rng)
    return StarResult(res.value, c, res.accepted, res.log_r, res.proposal)
