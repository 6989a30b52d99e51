"""Certifying sampler propriety by derivation from a parent Gibbs sampler.

A sampler is certified proper when it can be reached from a parent Gibbs
sampler by three stationarity-preserving phases:

1. reduce conditioning: a step samples more components instead of
   conditioning on them (for an MH step the extra components are drawn
   exactly after a reduced MH update, or are proposed by the MH update);
2. permute the steps;
3. trim redundant draws: components a step samples that are re-sampled
   before any later step reads them.

Independently of any derivation, a linter checks the necessary condition for
MH updates in partially collapsed samplers: an MH kernel must not read a
component that the previous step integrated out. Verdicts never claim a
sampler is improper, only that its propriety could not be verified.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import IllegalReduction, IllegalTrim, NotRedundant, SearchExhausted, SpecError
from .kernels import CONCATENATED, JumpDescriptor
from .spec import DIRECT, ITERATED, MH, STAR, SamplerSpec, StepSpec

__all__ = [
    "PROPER",
    "APPROXIMATELY_PROPER",
    "UNVERIFIABLE",
    "MAX_PERMUTE_STEPS",
    "ReduceConditioning",
    "Permute",
    "Trim",
    "DerivationTrace",
    "Violation",
    "Verdict",
    "reduce_conditioning",
    "permute",
    "find_redundant",
    "is_redundant",
    "trim",
    "replay",
    "lint",
    "default_parent",
    "derive",
    "validate",
]

PROPER = "Proper"
APPROXIMATELY_PROPER = "ApproximatelyProper"
UNVERIFIABLE = "Unverifiable"

MAX_PERMUTE_STEPS = 8

RULE_MH_AFTER_TRIM = "MH-after-trim"
RULE_NO_DERIVATION = "no-derivation"
RULE_PARENT = "invalid-parent"


# --------------------------------------------------------------------------
# Phase records


@dataclass(frozen=True)
class ReduceConditioning:
    """Step ``step`` (0-based) samples ``extra`` instead of conditioning on it.

    ``into_mh`` is the part of ``extra`` that joins the MH proposal; the rest
    is drawn exactly after the MH update. ``jump`` replaces the step's
    jumping rule and ``L``, when set, makes the step an iterated MH update.
    """

    step: int
    extra: tuple
    into_mh: tuple = ()
    jump: JumpDescriptor | None = None
    L: int | None = None

    def apply(self, spec: SamplerSpec) -> SamplerSpec:
        return reduce_conditioning(spec, self.step, self.extra, self.into_mh, self.jump, self.L)

    def to_dict(self) -> dict:
        out = {"op": "reduce_conditioning", "step": self.step + 1, "extra": list(self.extra)}
        if self.into_mh:
            out["into_mh"] = list(self.into_mh)
        if self.jump is not None:
            out["jump"] = self.jump.to_dict()
        if self.L is not None:
            out["L"] = self.L
        return out

    def describe(self) -> str:
        text = f"reduce conditioning in step {self.step + 1}: also sample {{{', '.join(self.extra)}}}"
        if self.into_mh:
            text += f" ({', '.join(self.into_mh)} joins the MH proposal)"
        if self.L is not None:
            text += f", iterated MH with L={self.L}"
        return text


@dataclass(frozen=True)
class Permute:
    """New step order; ``order[k]`` is the old (0-based) index of new step ``k``."""

    order: tuple

    def apply(self, spec: SamplerSpec) -> SamplerSpec:
        return permute(spec, self.order)

    def to_dict(self) -> dict:
        return {"op": "permute", "order": [i + 1 for i in self.order]}

    def describe(self) -> str:
        return f"permute steps into order ({', '.join(str(i + 1) for i in self.order)})"


@dataclass(frozen=True)
class Trim:
    step: int
    removed: tuple

    def apply(self, spec: SamplerSpec) -> SamplerSpec:
        return trim(spec, self.step, self.removed)

    def to_dict(self) -> dict:
        return {"op": "trim", "step": self.step + 1, "removed": list(self.removed)}

    def describe(self) -> str:
        return f"trim {{{', '.join(self.removed)}}} from step {self.step + 1}"


@dataclass
class DerivationTrace:
    """A parent sampler and the phases that turn it into ``final``."""

    parent: SamplerSpec
    phases: list
    final: SamplerSpec

    def replay(self) -> SamplerSpec:
        return replay(self.parent, self.phases)

    def to_dict(self) -> dict:
        return {
            "parent": self.parent.name,
            "phases": [p.to_dict() for p in self.phases],
            "final": self.final.to_dict(),
        }

    def describe(self) -> str:
        lines = ["parent:"] + [f"  {i + 1}. {s.describe()}" for i, s in enumerate(self.parent.steps)]
        spec = self.parent
        for phase in self.phases:
            spec = phase.apply(spec)
            lines.append(phase.describe() + ":")
            lines += [f"  {i + 1}. {s.describe()}" for i, s in enumerate(spec.steps)]
        return "\n".join(lines)


@dataclass(frozen=True)
class Violation:
    step: int
    rule: str
    message: str

    def to_dict(self) -> dict:
        return {"step": self.step + 1 if self.step >= 0 else None, "rule": self.rule, "message": self.message}


@dataclass
class Verdict:
    """Outcome of :func:`validate`.

    Attributes
    ----------
    status : str
        ``Proper``, ``ApproximatelyProper`` or ``Unverifiable``.
    trace : DerivationTrace or None
        Present whenever a derivation was found.
    violations : list of Violation
        Why propriety could not be verified; the first entry is the first
        rule violated.
    conditions : list of str
        Conditions an approximately proper verdict rests on.
    """

    sampler: str
    status: str
    trace: DerivationTrace | None = None
    violations: list = field(default_factory=list)
    conditions: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status != UNVERIFIABLE

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler,
            "status": self.status,
            "violations": [v.to_dict() for v in self.violations],
            "conditions": list(self.conditions),
            "trace": self.trace.to_dict() if self.trace is not None else None,
        }

    def describe(self) -> str:
        lines = [f"{self.sampler}: {self.status}"]
        for v in self.violations:
            where = f"step {v.step + 1}" if v.step >= 0 else "sampler"
            lines.append(f"  [{v.rule}] {where}: {v.message}")
        for c in self.conditions:
            lines.append(f"  condition: {c}")
        if self.trace is not None:
            lines.append("derivation:")
            lines += ["  " + line for line in self.trace.describe().splitlines()]
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Phase operations


def _step_of(kind, samples, conditions_on, marginalized_out, jump=None, L=None, trailing=(), label="") -> StepSpec:
    try:
        return StepSpec(kind, tuple(samples), frozenset(conditions_on), frozenset(marginalized_out), jump, L, tuple(trailing), label)
    except SpecError as exc:
        raise IllegalReduction(str(exc)) from None


def _replace_step(spec: SamplerSpec, index: int, new: StepSpec | None) -> SamplerSpec:
    steps = list(spec.steps)
    if new is None:
        del steps[index]
    else:
        steps[index] = new
    return spec.with_steps(steps)


def _check_index(spec: SamplerSpec, index: int) -> StepSpec:
    if not 0 <= index < len(spec.steps):
        raise IndexError(f"{spec.name} has no step {index + 1}")
    return spec.steps[index]


def reduce_conditioning(
    spec: SamplerSpec,
    index: int,
    extra: Sequence[str],
    into_mh: Sequence[str] = (),
    jump: JumpDescriptor | None = None,
    L: int | None = None,
) -> SamplerSpec:
    """Make step ``index`` sample ``extra`` rather than condition on it.

    Parameters
    ----------
    spec : SamplerSpec
    index : int
        0-based step index. The step must be a ``DirectDraw`` or ``MH`` step.
    extra : sequence of str
        Components moved from the conditioning set to the sampled set.
    into_mh : sequence of str
        Part of ``extra`` proposed by the MH update. The remainder is drawn
        exactly after it, which makes the step a star kernel.
    jump : JumpDescriptor, optional
        Jumping rule of the resulting MH-type step. Required to turn a direct
        draw into an MH-type step; defaults to the step's own rule.
    L : int, optional
        Replace the MH update by ``L`` iterations of it (treated as an exact
        draw of the reduced-conditioning target).

    Returns
    -------
    SamplerSpec

    Raises
    ------
    IllegalReduction
        If ``extra`` is not part of the conditioning set, ``into_mh`` is not
        part of ``extra``, or the step kind cannot be reduced.
    """
    step = _check_index(spec, index)
    extra = tuple(extra)
    into_mh = tuple(into_mh)
    if not extra and L is None:
        return spec
    if step.kind not in (DIRECT, MH):
        raise IllegalReduction(f"step {index + 1} is a {step.kind} step; only direct draws and MH steps are reduced")
    overlap = set(extra) & step.sample_set
    if overlap:
        raise IllegalReduction(f"step {index + 1} already samples {sorted(overlap)}")
    missing = set(extra) - step.conditions_on
    if missing:
        raise IllegalReduction(f"step {index + 1} does not condition on {sorted(missing)}")
    if not set(into_mh) <= set(extra):
        raise IllegalReduction("into_mh must be part of the extra set")
    conds = step.conditions_on - set(extra)
    marg = step.marginalized_out
    if step.kind == DIRECT and jump is None and L is None:
        if into_mh:
            raise IllegalReduction("a direct draw has no MH proposal to extend")
        new = _step_of(DIRECT, step.samples + extra, conds, marg, label=step.label)
        return _replace_step(spec, index, new)
    jump = jump if jump is not None else step.jump
    if jump is None:
        raise IllegalReduction(f"step {index + 1}: an MH-type reduction needs a jumping rule")
    if L is not None:
        new = _step_of(ITERATED, step.samples + extra, conds, marg, jump, L, label=step.label)
        return _replace_step(spec, index, new)
    inner = step.samples + into_mh
    trailing = tuple(c for c in extra if c not in into_mh)
    if trailing:
        new = _step_of(STAR, inner + trailing, conds, marg, jump, trailing=trailing, label=step.label)
    else:
        new = _step_of(MH, inner, conds, marg, jump, label=step.label)
    return _replace_step(spec, index, new)


def permute(spec: SamplerSpec, order: Sequence[int]) -> SamplerSpec:
    """Reorder the steps; ``order[k]`` is the old 0-based index of new step ``k``."""
    order = tuple(order)
    if sorted(order) != list(range(len(spec.steps))):
        raise ValueError(f"{order} is not a permutation of the {len(spec.steps)} steps")
    return spec.with_steps([spec.steps[i] for i in order])


def _component_redundant(spec: SamplerSpec, index: int, c: str) -> bool:
    """``c`` drawn at ``index`` is re-sampled before any later step reads it.

    The scan stops at the end of the sweep: a value still current there is
    the sweep's output and is read by whatever uses the chain.
    """
    for step in spec.steps[index + 1 :]:
        if c in step.reads():
            return False
        if c in step.sample_set:
            return True
    return False


def _absorbed(spec: SamplerSpec, index: int) -> bool:
    """A full-kernel step repeated verbatim by the next step can be dropped.

    Each full step preserves the target on its own, so a sweep with one
    copy of the kernel has the same stationary distribution as one with two.
    """
    steps = spec.steps
    if index + 1 >= len(steps):
        return False
    step = steps[index]
    return not step.marginalized_out and step.same_kernel(steps[index + 1])


def is_redundant(spec: SamplerSpec, index: int, subset: Sequence[str]) -> bool:
    step = _check_index(spec, index)
    subset = frozenset(subset)
    if not subset <= step.sample_set:
        return False
    if subset == step.sample_set and _absorbed(spec, index):
        return True
    return all(_component_redundant(spec, index, c) for c in subset)


def find_redundant(spec: SamplerSpec) -> list:
    """Every step with redundant draws, as ``(index, frozenset)`` pairs.

    A drawn component is redundant when it is re-sampled before any later
    step's kernel reads it. Direct draws and iterated MH steps read only
    their conditioning set; MH kernels also read the components they propose
    and whatever their jumping rule depends on.
    """
    out = []
    for i, step in enumerate(spec.steps):
        if _absorbed(spec, i):
            out.append((i, step.sample_set))
            continue
        red = frozenset(c for c in step.samples if _component_redundant(spec, i, c))
        if red:
            out.append((i, red))
    return out


def trim(spec: SamplerSpec, index: int, subset: Sequence[str]) -> SamplerSpec:
    """Stop sampling the redundant ``subset`` in step ``index``.

    The removed components move to the step's integrated-out set. Removing
    everything a step samples removes the step.

    Raises
    ------
    NotRedundant
        If ``subset`` is not redundant.
    IllegalTrim
        If the subset is redundant but cannot be removed from this kind of
        step (part of an MH proposal, for instance).
    """
    step = _check_index(spec, index)
    subset = tuple(c for c in step.samples if c in set(subset))
    unknown = set(subset) - step.sample_set
    if unknown:
        raise NotRedundant(f"step {index + 1} does not sample {sorted(unknown)}")
    if not subset:
        return spec
    if not is_redundant(spec, index, subset):
        needed = [c for c in subset if not _component_redundant(spec, index, c)]
        raise NotRedundant(
            f"step {index + 1} ({step.describe()}): {', '.join(needed)} is read before it is sampled again"
        )
    if set(subset) == step.sample_set:
        return _replace_step(spec, index, None)
    keep = tuple(c for c in step.samples if c not in subset)
    marg = step.marginalized_out | set(subset)
    if step.kind in (DIRECT, ITERATED):
        new = StepSpec(step.kind, keep, step.conditions_on, marg, step.jump, step.L, label=step.label)
    elif step.kind == STAR and set(subset) <= set(step.trailing):
        trailing = tuple(c for c in step.trailing if c not in subset)
        if trailing:
            new = StepSpec(STAR, keep, step.conditions_on, marg, step.jump, trailing=trailing, label=step.label)
        else:
            new = StepSpec(MH, keep, step.conditions_on, marg, step.jump, label=step.label)
    else:
        raise IllegalTrim(f"step {index + 1} ({step.describe()}): cannot trim part of an MH proposal")
    return _replace_step(spec, index, new)


def replay(parent: SamplerSpec, phases: Sequence) -> SamplerSpec:
    spec = parent
    for phase in phases:
        spec = phase.apply(spec)
    return spec


# --------------------------------------------------------------------------
# Necessary-condition linter


def lint(spec: SamplerSpec) -> list:
    """MH kernels that read a component the previous step integrated out.

    The previous step of step 1 is the last step of the sweep. Iterated MH
    steps are exempt since they stand in for exact draws.
    """
    out = []
    n = len(spec.steps)
    for i, step in enumerate(spec.steps):
        if step.kind not in (MH, STAR):
            continue
        prev = spec.steps[(i - 1) % n]
        clash = prev.marginalized_out & step.dependency_set()
        if clash:
            out.append(
                Violation(
                    i,
                    RULE_MH_AFTER_TRIM,
                    f"the MH kernel reads {', '.join(sorted(clash))}, which step {(i - 1) % n + 1} integrates out",
                )
            )
    return out


def _joint_caveats(spec: SamplerSpec) -> list:
    """Joint-strategy steps whose exact draw conditions on values the same step moves."""
    out = []
    for i, step in enumerate(spec.steps):
        jump = step.jump
        if step.kind == MH and jump is not None and jump.kind == CONCATENATED and jump.draw_first:
            walked = step.sample_set - set(jump.draw)
            touched = jump.depends_on & walked
            if touched:
                out.append(
                    f"step {i + 1}: the exact draw of {', '.join(jump.draw)} conditions on "
                    f"{', '.join(sorted(touched))}, which the same step updates; the step's stationary "
                    "distribution is a legitimate joint law but not a conditional of the target"
                )
    return out


# --------------------------------------------------------------------------
# Derivation search


def default_parent(spec: SamplerSpec) -> SamplerSpec:
    """The parent Gibbs sampler implied by ``spec``.

    Each component is owned by the last step that samples it; the parent
    has, in the same order, one full-conditional step per step that owns
    something. MH-type steps that own their whole proposal become full MH
    steps with the same jumping rule; everything else becomes a direct draw.
    """
    owner = {}
    for i, step in enumerate(spec.steps):
        for c in step.samples:
            owner[c] = i
    names = spec.names
    steps = []
    for i, step in enumerate(spec.steps):
        owned = tuple(c for c in step.samples if owner[c] == i)
        if not owned:
            continue
        rest = frozenset(names) - set(owned)
        if step.is_mh and set(step.inner) <= set(owned):
            inner = tuple(step.inner)
            steps.append(StepSpec(MH, inner, frozenset(names) - set(inner), frozenset(), step.jump, label=step.label))
            trailing = tuple(c for c in owned if c not in inner)
            if trailing:
                steps.append(StepSpec(DIRECT, trailing, frozenset(names) - set(trailing), frozenset()))
        else:
            steps.append(StepSpec(DIRECT, owned, rest, frozenset(), label=step.label))
    return spec.with_steps(steps, name=f"{spec.name}_parent")


def _check_parent(parent: SamplerSpec, target: SamplerSpec) -> list:
    problems = []
    if set(parent.names) != set(target.names):
        problems.append(Violation(-1, RULE_PARENT, "parent and sampler have different components"))
        return problems
    counts = {c: 0 for c in parent.names}
    for i, step in enumerate(parent.steps):
        if step.kind not in (DIRECT, MH) or step.marginalized_out:
            problems.append(Violation(i, RULE_PARENT, f"parent step {i + 1} is not a full direct or MH step"))
        for c in step.samples:
            counts[c] += 1
    twice = sorted(c for c, k in counts.items() if k != 1)
    if twice:
        problems.append(Violation(-1, RULE_PARENT, f"parent samples {', '.join(twice)} more than once per sweep"))
    return problems


def _pre(step: StepSpec) -> frozenset:
    return step.sample_set | step.marginalized_out


def _reduction(p: StepSpec, pi: int, t: StepSpec) -> ReduceConditioning | None:
    """The reduction taking parent step ``p`` to the untrimmed form of ``t``."""
    if p.kind == MH and t.kind == DIRECT:
        return None
    extra = tuple(c for c in t.samples + tuple(sorted(t.marginalized_out)) if c not in p.sample_set)
    if t.kind == DIRECT:
        return ReduceConditioning(pi, extra)
    into_mh = tuple(c for c in extra if c in t.inner) if t.kind != ITERATED else ()
    L = t.L if t.kind == ITERATED else None
    return ReduceConditioning(pi, extra, into_mh, t.jump, L)


def _is_identity(r: ReduceConditioning) -> bool:
    return not r.extra and r.L is None


def _reduced_step(parent: SamplerSpec, r: ReduceConditioning | None, pi: int) -> StepSpec:
    if r is None or _is_identity(r):
        return parent.steps[pi]
    return reduce_conditioning(parent, pi, r.extra, r.into_mh, r.jump, r.L).steps[pi]


def _candidates(parent: SamplerSpec, target: SamplerSpec) -> list:
    out = []
    for p in parent.steps:
        cands = [
            ti
            for ti, t in enumerate(target.steps)
            if p.sample_set & t.sample_set and p.sample_set <= _pre(t) and t.conditions_on <= p.conditions_on
        ]
        out.append(cands)
    return out


def _group_plans(parent: SamplerSpec, members: list, t: StepSpec):
    """Ways to realize target step ``t`` from the parent steps in ``members``.

    Yields ``(order, reductions)``. The last member of ``order`` survives
    trimming as ``t``; the others must be trimmed away entirely, either left
    unreduced or reduced to the survivor's kernel so they can be absorbed.
    """
    for order in itertools.permutations(sorted(members, reverse=True)):
        survivor = order[-1]
        r_s = _reduction(parent.steps[survivor], survivor, t)
        if r_s is None:
            continue
        try:
            s_step = _reduced_step(parent, r_s, survivor)
        except IllegalReduction:
            continue
        options = []
        for m in order[:-1]:
            opts = [None]
            r_m = _reduction(parent.steps[m], m, t)
            if r_m is not None and r_m.extra:
                if t.kind in (MH, STAR):
                    r_m = replace(r_m, into_mh=tuple(c for c in r_m.extra if c in s_step.inner))
                try:
                    if _reduced_step(parent, r_m, m).same_kernel(s_step):
                        opts.insert(0, r_m)
                except IllegalReduction:
                    pass
            options.append(opts)
        for choice in itertools.product(*options):
            reductions = {survivor: r_s}
            reductions.update({m: r for m, r in zip(order[:-1], choice) if r is not None})
            yield order, reductions


def _attempt(parent: SamplerSpec, target: SamplerSpec, groups: dict, plans: dict):
    """Build and check one derivation; returns the phase list or None."""
    phases = []
    spec = parent
    reductions = {}
    for plan in plans.values():
        reductions.update(plan[1])
    for pi in sorted(reductions):
        r = reductions[pi]
        if _is_identity(r):
            continue
        try:
            spec = r.apply(spec)
        except (IllegalReduction, SpecError):
            return None
        phases.append(r)
    order = []
    role = []
    for ti in range(len(target.steps)):
        o = plans[ti][0]
        order += list(o)
        role += [(ti, m == o[-1]) for m in o]
    if tuple(order) != tuple(range(len(order))):
        spec = permute(spec, order)
        phases.append(Permute(tuple(order)))
    k = 0
    for ti, survives in role:
        step = spec.steps[k]
        removed = step.samples if not survives else tuple(c for c in step.samples if c not in target.steps[ti].sample_set)
        if removed:
            try:
                spec = trim(spec, k, removed)
            except (NotRedundant, IllegalTrim):
                return None
            phases.append(Trim(k, tuple(removed)))
        if survives or not removed:
            k += 1
    if spec.signature() != target.signature():
        return None
    return phases


def derive(target: SamplerSpec, parent: SamplerSpec):
    """Search for phases turning ``parent`` into ``target``.

    Each parent step is assigned to the target step it becomes; parent
    steps sharing a target are placed next to each other and all but the
    last are trimmed away. The search covers every assignment, every order
    within a group and, for the extra members of a group, whether they are
    reduced to the survivor's kernel.

    Returns
    -------
    tuple
        ``(DerivationTrace or None, reason)``. ``reason`` explains the
        first failure when no derivation exists.
    """
    cands = _candidates(parent, target)
    empty = [i for i, c in enumerate(cands) if not c]
    if empty:
        return None, f"parent step {empty[0] + 1} ({parent.steps[empty[0]].describe()}) matches no step of the sampler"
    reason = "no assignment of parent steps covers every step of the sampler"
    for assignment in itertools.product(*cands):
        groups = {ti: [] for ti in range(len(target.steps))}
        for pi, ti in enumerate(assignment):
            groups[ti].append(pi)
        if any(not g for g in groups.values()):
            continue
        per_group = [list(_group_plans(parent, groups[ti], target.steps[ti])) for ti in range(len(target.steps))]
        if any(not p for p in per_group):
            reason = "a step of the sampler cannot be obtained by reducing the conditioning of its parent step"
            continue
        for combo in itertools.product(*per_group):
            phases = _attempt(parent, target, groups, dict(enumerate(combo)))
            if phases is not None:
                final = replay(parent, phases)
                return DerivationTrace(parent, phases, final.with_steps(final.steps, name=target.name)), ""
        reason = _trim_failure(parent, target, groups, per_group)
    return None, reason


def _trim_failure(parent, target, groups, per_group) -> str:
    """Explain why the first plan of an assignment fails at the trim phase."""
    spec = parent
    plans = dict(enumerate(p[0] for p in per_group))
    reductions = {}
    for plan in plans.values():
        reductions.update(plan[1])
    try:
        for pi in sorted(reductions):
            r = reductions[pi]
            if not _is_identity(r):
                spec = r.apply(spec)
    except (IllegalReduction, SpecError) as exc:
        return f"conditioning reduction is illegal: {exc}"
    order, role = [], []
    for ti in range(len(target.steps)):
        o = plans[ti][0]
        order += list(o)
        role += [(ti, m == o[-1]) for m in o]
    spec = permute(spec, order)
    k = 0
    for ti, survives in role:
        step = spec.steps[k]
        removed = step.samples if not survives else tuple(c for c in step.samples if c not in target.steps[ti].sample_set)
        if removed:
            try:
                spec = trim(spec, k, removed)
            except (NotRedundant, IllegalTrim) as exc:
                return f"cannot trim after reducing and permuting: {exc}"
        if survives or not removed:
            k += 1
    return "the derived sampler differs from the target in its jumping rules or step kinds"


def validate(spec: SamplerSpec, parent: SamplerSpec | None = None) -> Verdict:
    """Certify ``spec`` as proper, approximately proper, or unverifiable.

    Parameters
    ----------
    spec : SamplerSpec
    parent : SamplerSpec, optional
        Parent Gibbs sampler to derive from. Without one, the parent implied
        by :func:`default_parent` is used.

    Returns
    -------
    Verdict

    Raises
    ------
    SearchExhausted
        If ``spec`` has more than eight steps and no parent is given.
    """
    if parent is None and len(spec.steps) > MAX_PERMUTE_STEPS:
        raise SearchExhausted(
            f"{spec.name} has {len(spec.steps)} steps; supply a parent sampler to search beyond {MAX_PERMUTE_STEPS}"
        )
    violations = lint(spec)
    if parent is None:
        parent = default_parent(spec)
    violations += _check_parent(parent, spec)
    trace = None
    if not violations:
        trace, reason = derive(spec, parent)
        if trace is None:
            violations.append(Violation(-1, RULE_NO_DERIVATION, reason))
    if violations:
        return Verdict(spec.name, UNVERIFIABLE, trace, violations)
    conditions = [
        f"step {i + 1}: iterated MH with L={s.L} stands in for an exact draw; check that the lag-1 "
        "autocorrelation of its output is essentially zero"
        for i, s in enumerate(spec.steps)
        if s.kind == ITERATED
    ]
    conditions += _joint_caveats(spec)
    status = APPROXIMATELY_PROPER if conditions else PROPER
    return Verdict(spec.name, status, trace, [], conditions)
