"""Executing sampler specs against a model backend.

A model backend answers three kinds of request, each keyed by the set a step
samples and the set it integrates out:

``log_conditional(samples, marginalized)``
    A function of the full state returning the log of the target with
    ``marginalized`` integrated out, up to a constant that may depend on
    anything except ``samples``. MH steps use it as their target.
``exact_draw(samples, marginalized)``
    A function ``(state, rng) -> {component: value}`` drawing ``samples``
    exactly from their conditional given everything not integrated out.
``exact_logpdf(samples, marginalized)``
    The normalized log density of that exact conditional, needed by the
    joint and blocked strategies whose ratios contain it.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .distributions import make_rng
from .errors import MissingConditional, NonFiniteDensity, SpecError, TuningFailed
from .kernels import (
    CONCATENATED,
    MVNORMAL_WALK,
    NORMAL_WALK,
    JumpDescriptor,
    _terms,
    blocked_mh_update,
    iterated_mh_update,
    joint_mh_update,
    mh_update,
    star_kernel_update,
)
from .spec import DIRECT, ITERATED, MH, STAR, SamplerSpec, StepSpec

__all__ = [
    "ModelBackend",
    "AcceptanceLog",
    "Trace",
    "run_sampler",
    "tune_scale",
    "adapt_scale",
]

_TUNE_GAIN = 3.0
_MAX_KEEP_SIZE = 64


# --------------------------------------------------------------------------
# Model backend


@dataclass
class _Target:
    allowed: frozenset
    fn: Callable


class ModelBackend:
    """Base class for models.

    Subclasses declare their components with :meth:`component_shapes`,
    provide :meth:`initial_state`, and register conditionals in their
    constructor with :meth:`add_target` and :meth:`add_draw`.
    """

    name = "model"

    def __init__(self):
        self._targets: dict = {}
        self._draws: dict = {}
        self._draw_logpdfs: dict = {}

    # -- declarations --------------------------------------------------------
    def component_shapes(self) -> dict:
        raise NotImplementedError

    def initial_state(self) -> dict:
        raise NotImplementedError

    def add_target(self, marginalized: Iterable[str], allowed: Iterable[str], fn: Callable) -> None:
        """Register a log target integrating out ``marginalized``.

        ``fn(state)`` serves as the MH target for any sampled set contained
        in ``allowed``.
        """
        self._targets[frozenset(marginalized)] = _Target(frozenset(allowed), fn)

    def add_draw(self, samples, marginalized, fn: Callable, logpdf: Callable | None = None) -> None:
        key = (frozenset(samples), frozenset(marginalized))
        self._draws[key] = fn
        if logpdf is not None:
            self._draw_logpdfs[key] = logpdf

    # -- requests ------------------------------------------------------------
    def log_conditional(self, samples, marginalized) -> Callable:
        entry = self._targets.get(frozenset(marginalized))
        if entry is None or not frozenset(samples) <= entry.allowed:
            raise MissingConditional(
                f"{self.name}: no log target for {sorted(samples)} with {sorted(marginalized) or 'nothing'} integrated out"
            )
        return entry.fn

    def exact_draw(self, samples, marginalized) -> Callable:
        try:
            return self._draws[(frozenset(samples), frozenset(marginalized))]
        except KeyError:
            raise MissingConditional(
                f"{self.name}: no exact draw for {sorted(samples)} with {sorted(marginalized) or 'nothing'} integrated out"
            ) from None

    def exact_logpdf(self, samples, marginalized) -> Callable:
        try:
            return self._draw_logpdfs[(frozenset(samples), frozenset(marginalized))]
        except KeyError:
            raise MissingConditional(
                f"{self.name}: no conditional density for {sorted(samples)} with {sorted(marginalized) or 'nothing'} integrated out"
            ) from None


# --------------------------------------------------------------------------
# Trace


@dataclass
class AcceptanceLog:
    """Per-iteration record of one MH-type step.

    Arrays have a leading axis of length ``T`` and a second axis for the
    inner repetitions of an iterated step (1 otherwise).
    """

    step: int
    label: str
    accepted: np.ndarray
    log_r: np.ndarray
    proposal: np.ndarray

    @property
    def rate(self) -> float:
        return float(self.accepted.mean()) if self.accepted.size else float("nan")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "label": self.label,
            "accepted": self.accepted.astype(int).tolist(),
            "log_r": self.log_r.tolist(),
            "proposal": self.proposal.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcceptanceLog":
        return cls(
            d["step"],
            d["label"],
            np.asarray(d["accepted"], dtype=bool),
            np.asarray(d["log_r"], dtype=float),
            np.asarray(d["proposal"], dtype=float),
        )


def _column_names(name: str, shape: tuple) -> list:
    if not shape:
        return [name]
    idx = np.indices(shape).reshape(len(shape), -1).T + 1
    return [f"{name}[{','.join(map(str, i))}]" for i in idx]


@dataclass
class Trace:
    """Post-burnin draws, acceptance logs and run metadata.

    Attributes
    ----------
    draws : dict of str to numpy.ndarray
        ``draws[c]`` has shape ``(T, *shape_c)``.
    acceptance : list of AcceptanceLog
        One entry per MH-type step, in step order.
    meta : dict
    burnin_draws : dict, optional
        Draws made during burn-in, kept apart from everything diagnostics see.
    """

    draws: dict
    acceptance: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    burnin_draws: dict | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.draws[name]

    def __contains__(self, name: str) -> bool:
        return name in self.draws

    @property
    def T(self) -> int:
        return len(next(iter(self.draws.values()))) if self.draws else 0

    def acceptance_rate(self, step: int) -> float:
        """Acceptance rate of the MH-type step with (0-based) index ``step``."""
        for log in self.acceptance:
            if log.step == step:
                return log.rate
        raise KeyError(f"step {step} has no acceptance log")

    # -- serialization ---------------------------------------------------------
    def columns(self) -> tuple[list, np.ndarray]:
        names, blocks = [], []
        for c, arr in self.draws.items():
            names += _column_names(c, arr.shape[1:])
            blocks.append(np.asarray(arr, dtype=float).reshape(arr.shape[0], -1))
        return names, np.hstack(blocks) if blocks else np.empty((0, 0))

    def to_csv(self, path) -> None:
        """One row per iteration, 17 significant digits so values round-trip."""
        names, matrix = self.columns()
        with open(path, "w", newline="") as fh:
            fh.write(",".join(names) + "\n")
            np.savetxt(fh, matrix, fmt="%.17g", delimiter=",")

    def to_json(self, path) -> None:
        """Sidecar with metadata, component shapes and acceptance logs."""
        shapes = {c: list(a.shape[1:]) for c, a in self.draws.items()}
        dtypes = {c: ("int" if np.issubdtype(a.dtype, np.integer) else "float") for c, a in self.draws.items()}
        doc = {
            "meta": self.meta,
            "shapes": shapes,
            "dtypes": dtypes,
            "acceptance": [log.to_dict() for log in self.acceptance],
        }
        Path(path).write_text(json.dumps(doc, indent=1, default=_json_default))

    def save(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        self.to_csv(csv_path)
        self.to_json(json_path)
        return csv_path, json_path

    @classmethod
    def load(cls, stem) -> "Trace":
        stem = Path(stem)
        doc = json.loads(stem.with_suffix(".json").read_text())
        with open(stem.with_suffix(".csv")) as fh:
            header = fh.readline().strip().split(",")
        matrix = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        draws, col = {}, 0
        for c, shape in doc["shapes"].items():
            width = int(np.prod(shape)) if shape else 1
            block = matrix[:, col : col + width]
            if header[col] != _column_names(c, tuple(shape))[0]:
                raise ValueError(f"column {col} is {header[col]!r}, expected component {c!r}")
            arr = block.reshape((matrix.shape[0],) + tuple(shape))
            if doc["dtypes"][c] == "int":
                arr = arr.astype(np.int64)
            draws[c] = arr
            col += width
        acc = [AcceptanceLog.from_dict(d) for d in doc["acceptance"]]
        return cls(draws, acc, doc["meta"])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# --------------------------------------------------------------------------
# Packing helpers


class _Packer:
    """Maps between a tuple of components and a single value for a jump."""

    def __init__(self, names: tuple, shapes: dict):
        self.names = names
        self.shapes = [shapes[n] for n in names]
        self.sizes = [int(np.prod(s)) if s else 1 for s in self.shapes]
        self.single = len(names) == 1

    def get(self, state):
        if self.single:
            return state[self.names[0]]
        return np.concatenate([np.ravel(np.asarray(state[n], dtype=float)) for n in self.names])

    def put(self, state, value):
        if self.single:
            state[self.names[0]] = value
            return
        pos = 0
        for n, shape, size in zip(self.names, self.shapes, self.sizes):
            chunk = value[pos : pos + size]
            state[n] = float(chunk[0]) if not shape else chunk.reshape(shape)
            pos += size

    @property
    def width(self) -> int:
        return sum(self.sizes)


def adapt_scale(scale, rate: float, target: float, batch_index: int):
    """Multiplicative Robbins-Monro update of a jump scale.

    ``scale * exp(c * (rate - target) / sqrt(k))`` with ``k`` the batch
    index, so early batches move fast and late ones only fine-tune.
    """
    return scale * math.exp(_TUNE_GAIN * (rate - target) / math.sqrt(max(batch_index, 1)))


# --------------------------------------------------------------------------
# Step executors


class _Executor:
    is_mh = False

    def __init__(self, index: int, step: StepSpec, model: ModelBackend, shapes: dict):
        self.index = index
        self.step = step
        self.label = step.label or step.describe()

    def finalize(self, T: int):
        return None


class _DirectExec(_Executor):
    def __init__(self, index, step, model, shapes):
        super().__init__(index, step, model, shapes)
        self.draw = model.exact_draw(step.samples, step.marginalized_out)

    def __call__(self, state, rng, row):
        state.update(self.draw(state, rng))


class _MHBase(_Executor):
    """Shared bookkeeping for steps that make accept/reject decisions."""

    is_mh = True
    reps = 1

    def __init__(self, index, step, model, shapes, proposed: tuple):
        super().__init__(index, step, model, shapes)
        self.jump: JumpDescriptor = step.jump
        self.packer = _Packer(proposed, shapes)
        self.batch_acc = 0
        self.batch_n = 0
        self.batch_k = 0
        self.shape_window: list = []

    def allocate(self, T: int, width: int | None = None):
        width = self.packer.width if width is None else width
        self.acc = np.zeros((T, self.reps), dtype=bool)
        self.logr = np.zeros((T, self.reps))
        self.prop = np.zeros((T, self.reps, width))

    def log(self, row, rep, accepted, log_r, proposal):
        if row >= 0:
            self.acc[row, rep] = accepted
            self.logr[row, rep] = log_r
            self.prop[row, rep] = np.ravel(proposal)
        else:
            self.batch_acc += accepted
            self.batch_n += 1

    @property
    def walk(self) -> JumpDescriptor:
        return self.jump.inner if self.jump.kind == CONCATENATED else self.jump

    def set_walk(self, walk: JumpDescriptor):
        if self.jump.kind == CONCATENATED:
            self.jump = replace(self.jump, inner=walk)
        else:
            self.jump = walk

    @property
    def tunable(self) -> bool:
        return self.walk.target_rate is not None

    def tune(self):
        if self.batch_n == 0:
            return
        self.batch_k += 1
        rate = self.batch_acc / self.batch_n
        walk = self.walk
        self.set_walk(walk.with_scale(adapt_scale(walk.scale, rate, walk.target_rate, self.batch_k)))
        self.last_rate = rate
        self.batch_acc = self.batch_n = 0

    def reshape_walk(self):
        """Reset the walk's shape from the spread of the recorded window."""
        walk = self.walk
        if not self.shape_window:
            return
        values = np.asarray(self.shape_window, dtype=float).reshape(len(self.shape_window), -1)
        self.shape_window = []
        d = values.shape[1]
        if walk.kind == NORMAL_WALK:
            sd = values.std(axis=0, ddof=1)
            if np.any(sd <= 0):
                return
            new = replace(walk, scale=(2.38 / math.sqrt(d)) * (sd if d > 1 else float(sd[0])))
        elif walk.kind == MVNORMAL_WALK:
            cov = np.atleast_2d(np.cov(values, rowvar=False))
            if np.linalg.matrix_rank(cov) < d:
                return
            new = replace(walk, cov=cov, scale=2.38 / math.sqrt(d))
        else:
            return
        self.set_walk(new)
        self.batch_k = 0

    def record_window(self, state):
        self.shape_window.append(np.ravel(np.asarray(self.packer.get(state), dtype=float)).copy())

    def finalize(self, T):
        return AcceptanceLog(self.index, self.label, self.acc, self.logr, self.prop.reshape(T, self.reps, -1))


class _MHExec(_MHBase):
    def __init__(self, index, step, model, shapes):
        super().__init__(index, step, model, shapes, step.samples)
        self.target = model.log_conditional(step.samples, step.marginalized_out)
        if step.kind == ITERATED:
            self.reps = step.L

    def __call__(self, state, rng, row):
        packer, target = self.packer, self.target

        def logp(v):
            s = dict(state)
            packer.put(s, v)
            return target(s)

        current = packer.get(state)
        if self.reps == 1:
            res = mh_update(logp, self.jump, current, rng, current_logdensity=_terms(target(state)))
            self.log(row, 0, res.accepted, res.log_r, res.proposal)
            value = res.value
        else:
            it = iterated_mh_update(logp, self.jump, current, self.reps, rng)
            for r in range(self.reps):
                self.log(row, r, it.accepted[r], it.log_r[r], it.proposals[r])
            value = it.value
        if value is not current:
            packer.put(state, value)


class _StarExec(_MHBase):
    def __init__(self, index, step, model, shapes):
        super().__init__(index, step, model, shapes, step.inner)
        reduced = step.marginalized_out | frozenset(step.trailing)
        self.target = model.log_conditional(step.inner, reduced)
        self.trailing = model.exact_draw(step.trailing, step.marginalized_out)

    def __call__(self, state, rng, row):
        packer, target = self.packer, self.target

        def logp(v):
            s = dict(state)
            packer.put(s, v)
            return target(s)

        def trailing(b, rng_):
            s = dict(state)
            packer.put(s, b)
            return self.trailing(s, rng_)

        current = packer.get(state)
        res = star_kernel_update(logp, self.jump, trailing, current, rng)
        self.log(row, 0, res.accepted, res.log_r, res.proposal)
        if res.b is not current:
            packer.put(state, res.b)
        state.update(res.c)


class _JointExec(_MHBase):
    """Concatenated rule with the exact draw first: the joint strategy."""

    def __init__(self, index, step, model, shapes):
        a = step.jump.draw
        b = tuple(c for c in step.samples if c not in a)
        if step.jump.depends_on & frozenset(b):
            # The exact draw would condition on values the same step moves, so
            # the acceptance ratio no longer splits into a pair density.
            raise SpecError(f"step {index + 1}: joint draw of {list(a)} reads the walked set {list(b)}")
        super().__init__(index, step, model, shapes, b)
        self.a = a
        self.a_packer = _Packer(a, shapes)
        reduced = step.marginalized_out | frozenset(b)
        self.marginal_draw = model.exact_draw(a, reduced)
        self.marginal_logpdf = model.exact_logpdf(a, reduced)
        self.joint = model.log_conditional(step.samples, step.marginalized_out)

    def allocate(self, T):
        super().allocate(T, self.packer.width + self.a_packer.width)

    def __call__(self, state, rng, row):
        def pair(a, b):
            s = dict(state)
            s.update(a)
            self.packer.put(s, b)
            return _terms(self.joint(s)) + [-t for t in _terms(self.marginal_logpdf(s))]

        current_a = {n: state[n] for n in self.a}
        current_b = self.packer.get(state)
        res = joint_mh_update(
            lambda rng_: self.marginal_draw(state, rng_), self.walk, pair, current_a, current_b, rng
        )
        a_vec = self.a_packer.get(res.proposal_a)
        self.log(row, 0, res.accepted, res.log_r, np.concatenate([np.ravel(res.proposal_b), np.ravel(a_vec)]))
        if res.accepted:
            state.update(res.a)
            self.packer.put(state, res.b)


class _BlockedExec(_MHBase):
    """Concatenated rule with the exact draw last: the blocked strategy."""

    def __init__(self, index, step, model, shapes):
        b = step.jump.draw
        a = tuple(c for c in step.samples if c not in b)
        super().__init__(index, step, model, shapes, a)
        self.b = b
        self.b_packer = _Packer(b, shapes)
        self.cond_draw = model.exact_draw(b, step.marginalized_out)
        self.cond_logpdf = model.exact_logpdf(b, step.marginalized_out)
        self.joint = model.log_conditional(step.samples, step.marginalized_out)

    def allocate(self, T):
        super().allocate(T, self.packer.width + self.b_packer.width)

    def _with(self, state, a, b):
        s = dict(state)
        self.packer.put(s, a)
        s.update(b)
        return s

    def __call__(self, state, rng, row):
        res = blocked_mh_update(
            self.walk,
            lambda a, rng_: self.cond_draw(self._with(state, a, {}), rng_),
            lambda b, a: self.cond_logpdf(self._with(state, a, b)),
            lambda a, b: self.joint(self._with(state, a, b)),
            self.packer.get(state),
            {n: state[n] for n in self.b},
            rng,
        )
        b_vec = self.b_packer.get(res.proposal_b)
        self.log(row, 0, res.accepted, res.log_r, np.concatenate([np.ravel(res.proposal_a), np.ravel(b_vec)]))
        if res.accepted:
            self.packer.put(state, res.a)
            state.update(res.b)


def _executor(index: int, step: StepSpec, model: ModelBackend, shapes: dict) -> _Executor:
    if step.kind == DIRECT:
        return _DirectExec(index, step, model, shapes)
    if step.kind == STAR:
        return _StarExec(index, step, model, shapes)
    if step.kind == MH and step.jump.kind == CONCATENATED:
        cls = _JointExec if step.jump.draw_first else _BlockedExec
        return cls(index, step, model, shapes)
    if step.kind in (MH, ITERATED):
        return _MHExec(index, step, model, shapes)
    raise SpecError(f"cannot execute step kind {step.kind}")  # pragma: no cover


# --------------------------------------------------------------------------
# Driver


def run_sampler(
    spec: SamplerSpec,
    model: ModelBackend,
    T: int,
    burnin: int = 0,
    seed: int = 0,
    *,
    stream: int = 0,
    init: dict | None = None,
    keep: Iterable[str] | None = None,
    tune: bool = True,
    tune_batch: int = 50,
    record_burnin: bool = True,
    rng: np.random.Generator | None = None,
) -> Trace:
    """Run ``spec`` for ``burnin + T`` sweeps and return the post-burnin trace.

    Parameters
    ----------
    spec : SamplerSpec
    model : ModelBackend
    T, burnin : int
    seed, stream : int
        Select the random stream (see :func:`mhpcg.distributions.make_rng`).
    init : dict, optional
        Starting state; defaults to ``model.initial_state()``.
    keep : iterable of str, optional
        Components to record. By default every component with at most 64
        scalar entries is recorded.
    tune : bool
        Adapt the scales of jumps that carry a ``target_rate`` during
        burn-in, in batches of ``tune_batch`` sweeps. Scales are frozen once
        burn-in ends.
    record_burnin : bool
        Keep burn-in draws in ``Trace.burnin_draws``.
    rng : numpy.random.Generator, optional
        Use this generator instead of deriving one from ``(seed, stream)``.

    Raises
    ------
    MissingConditional
        Before the first sweep, if the model cannot serve some step.
    NonFiniteDensity
        With the step and iteration at which it occurred.
    """
    if T < 0 or burnin < 0:
        raise ValueError("T and burnin must be non-negative")
    shapes = model.component_shapes()
    missing = set(spec.names) - set(shapes)
    if missing:
        raise SpecError(f"{spec.name}: model {model.name!r} lacks components {sorted(missing)}")
    executors = [_executor(i, s, model, shapes) for i, s in enumerate(spec.steps)]
    mh_execs = [e for e in executors if e.is_mh]
    for e in mh_execs:
        e.allocate(T)
    tuned = [e for e in mh_execs if tune and e.tunable and burnin > 0]
    reshaped = [e for e in tuned if e.walk.adapt_shape and burnin >= 8 * tune_batch]
    window = (burnin // 4, burnin // 2)

    state = dict(model.initial_state() if init is None else init)
    keep = [c for c in spec.names if int(np.prod(shapes[c])) <= _MAX_KEEP_SIZE] if keep is None else list(keep)
    dtypes = {c: (np.int64 if np.issubdtype(np.asarray(state[c]).dtype, np.integer) else float) for c in keep}
    draws = {c: np.zeros((T,) + tuple(shapes[c]), dtype=dtypes[c]) for c in keep}
    burn = {c: np.zeros((burnin,) + tuple(shapes[c]), dtype=dtypes[c]) for c in keep} if record_burnin else None
    if rng is None:
        rng = make_rng(seed, stream)

    start = time.perf_counter()
    for t in range(burnin + T):
        row = t - burnin
        for ex in executors:
            try:
                ex(state, rng, row)
            except NonFiniteDensity as exc:
                raise NonFiniteDensity(f"{spec.name} step {ex.index + 1} ({ex.label}), iteration {t}: {exc}") from exc
        if row >= 0:
            for c in keep:
                draws[c][row] = state[c]
            continue
        if burn is not None:
            for c in keep:
                burn[c][t] = state[c]
        if window[0] <= t < window[1]:
            for e in reshaped:
                e.record_window(state)
        if (t + 1) % tune_batch == 0:
            for e in tuned:
                e.tune()
        if t + 1 == window[1]:
            for e in reshaped:
                e.reshape_walk()
    elapsed = time.perf_counter() - start

    logs = [e.finalize(T) for e in mh_execs]
    for e in tuned:
        if getattr(e, "last_rate", 0.5) < 0.05 or getattr(e, "last_rate", 0.5) > 0.95:
            warnings.warn(f"{spec.name} step {e.index + 1}: burn-in acceptance rate {e.last_rate:.3f} after tuning")
    meta = {
        "sampler": spec.name,
        "model": model.name,
        "seed": seed,
        "stream": stream,
        "T": T,
        "burnin": burnin,
        "wall_time": elapsed,
        "jumps": {str(e.index + 1): e.jump.to_dict() for e in mh_execs},
        "acceptance_rates": {str(log.step + 1): log.rate for log in logs},
    }
    return Trace(draws, logs, meta, burn)


def tune_scale(
    step: StepSpec,
    target_rate: float,
    pilot_iterations: int,
    rng: np.random.Generator,
    *,
    target_logdensity: Callable,
    current,
    batch: int = 50,
) -> JumpDescriptor:
    """Tune a walk's scale on a fixed conditional target by a pilot run.

    The pilot chain runs ``pilot_iterations`` MH updates; after each batch the
    scale is adapted with :func:`adapt_scale`. The scale is then frozen.

    Parameters
    ----------
    step : StepSpec
        An MH or iterated MH step with a walk-type jump.
    target_rate : float
    pilot_iterations : int
    rng : numpy.random.Generator
    target_logdensity : callable
        Log target of the step's sampled value with its conditioning fixed.
    current : value
        Starting point of the pilot chain.

    Returns
    -------
    JumpDescriptor
        The step's jump with the tuned scale.

    Raises
    ------
    TuningFailed
        If the acceptance rate over the last quarter of the pilot is outside
        ``[0.05, 0.95]``.
    """
    if step.kind not in (MH, ITERATED) or step.jump is None or step.jump.kind == CONCATENATED:
        raise SpecError("tune_scale needs an MH or IteratedMH step with a walk-type jump")
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")
    jump = replace(step.jump, target_rate=target_rate)
    n_batches = max(1, pilot_iterations // batch)
    value, logp = current, None
    rates = []
    for k in range(1, n_batches + 1):
        acc = 0
        for _ in range(batch):
            res = mh_update(target_logdensity, jump, value, rng, current_logdensity=logp)
            value, logp = res.value, res.logp
            acc += res.accepted
        rate = acc / batch
        rates.append(rate)
        if k < n_batches:
            jump = jump.with_scale(adapt_scale(jump.scale, rate, target_rate, k))
    tail = float(np.mean(rates[-max(1, n_batches // 4) :]))
    if not 0.05 <= tail <= 0.95:
        raise TuningFailed(f"acceptance rate {tail:.3f} after {n_batches} batches of tuning")
    return jump
