"""Declarative sampler specifications and their JSON file format.

A sampler is an ordered list of steps. Each step names the components it
samples, the components it conditions on and the components its target
integrates out; the three sets partition the model's components. The
kernel-dependency set of a step, which is what the propriety validator
reasons about, is derived from these sets and the jumping rule.

File format::

    {"name": "...", "model": "spectral",
     "components": ["alpha", {"name": "XL", "shape": [550]}, ...],
     "steps": [{"kind": "MH", "samples": ["beta"], "conditions_on": [...],
                "marginalized_out": [...],
                "jump": {"kind": "SymmetricNormalWalk", "scale": 0.1,
                         "depends_on": []},
                "L": null, "trailing": []}, ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SpecError
from .kernels import CONCATENATED, JumpDescriptor

__all__ = [
    "DIRECT",
    "MH",
    "STAR",
    "ITERATED",
    "StepSpec",
    "SamplerSpec",
    "direct_step",
    "mh_step",
    "star_step",
    "iterated_step",
    "load_spec",
    "save_spec",
]

DIRECT = "DirectDraw"
MH = "MH"
STAR = "StarKernel"
ITERATED = "IteratedMH"
STEP_KINDS = (DIRECT, MH, STAR, ITERATED)


@dataclass(frozen=True, eq=False)
class StepSpec:
    """One update step.

    Parameters
    ----------
    kind : str
        ``DirectDraw``, ``MH``, ``StarKernel`` or ``IteratedMH``.
    samples : tuple of str
        Components updated by the step, in packing order.
    conditions_on : frozenset of str
    marginalized_out : frozenset of str
        Components the step's target integrates over.
    jump : JumpDescriptor, optional
        Required for every kind except ``DirectDraw``. For a star kernel it
        is the jump of the inner reduced MH update.
    L : int, optional
        Inner repetitions of an ``IteratedMH`` step.
    trailing : tuple of str
        For a star kernel, the part of ``samples`` drawn exactly after the
        inner MH update (and integrated out of that update's target).
    label : str
        Free-text description shown in derivation traces.
    """

    kind: str
    samples: tuple
    conditions_on: frozenset
    marginalized_out: frozenset = field(default_factory=frozenset)
    jump: JumpDescriptor | None = None
    L: int | None = None
    trailing: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "conditions_on", frozenset(self.conditions_on))
        object.__setattr__(self, "marginalized_out", frozenset(self.marginalized_out))
        object.__setattr__(self, "trailing", tuple(self.trailing))
        if self.kind not in STEP_KINDS:
            raise SpecError(f"unknown step kind {self.kind!r}")
        if not self.samples:
            raise SpecError("a step must sample at least one component")
        if len(set(self.samples)) != len(self.samples):
            raise SpecError(f"duplicate components in samples {self.samples}")
        s, c, m = set(self.samples), self.conditions_on, self.marginalized_out
        if s & c or s & m or c & m:
            raise SpecError(f"samples, conditions_on and marginalized_out overlap in {self.describe()}")
        if self.kind != DIRECT and self.jump is None:
            raise SpecError(f"{self.kind} step needs a jump")
        if self.kind == ITERATED and (self.L is None or self.L < 1):
            raise SpecError("IteratedMH step needs L >= 1")
        if self.kind == STAR:
            if not self.trailing or not set(self.trailing) < s:
                raise SpecError("a star kernel's trailing set must be a proper, nonempty subset of its samples")
        elif self.trailing:
            raise SpecError("only star kernels have a trailing set")
        if self.jump is not None and self.jump.kind == CONCATENATED:
            if self.kind != MH:
                raise SpecError("Concatenated jumps are only legal in plain MH steps")
            if not set(self.jump.draw) < s:
                raise SpecError("a Concatenated jump's draw set must be a proper subset of the samples")

    # -- derived sets ----------------------------------------------------
    @property
    def sample_set(self) -> frozenset:
        return frozenset(self.samples)

    @property
    def inner(self) -> tuple:
        """Components proposed by the step's MH kernel (star kernels exclude the trailing set)."""
        if self.kind == STAR:
            return tuple(c for c in self.samples if c not in self.trailing)
        return self.samples

    @property
    def components(self) -> frozenset:
        return self.sample_set | self.conditions_on | self.marginalized_out

    @property
    def is_mh(self) -> bool:
        return self.kind in (MH, STAR, ITERATED)

    def dependency_set(self) -> frozenset:
        """The set an MH kernel reads: proposed set, conditioning set and jump inputs."""
        deps = self.jump.depends_on if self.jump is not None else frozenset()
        return frozenset(self.inner) | self.conditions_on | deps

    def reads(self) -> frozenset:
        """Components whose pre-step values influence the step's output.

        Exact draws (and iterated MH steps, treated as exact) read only what
        they condition on; MH kernels also read the current value of what
        they propose and whatever the jump depends on.
        """
        if self.kind in (DIRECT, ITERATED):
            return self.conditions_on
        return self.dependency_set()

    def signature(self) -> tuple:
        """Structural identity used to compare derived and target specs."""
        return (
            self.kind,
            self.sample_set,
            self.conditions_on,
            self.marginalized_out,
            frozenset(self.trailing),
            self.L,
            self.jump.signature() if self.jump is not None else None,
        )

    def same_kernel(self, other: "StepSpec") -> bool:
        return self.signature() == other.signature()

    def describe(self) -> str:
        """Compact notation such as ``MH beta | gamma,mu,phi  [integrating out XL,alpha]``."""
        if self.kind == STAR:
            head = f"Star ({','.join(self.inner)}; then {','.join(self.trailing)})"
        elif self.kind == ITERATED:
            head = f"IteratedMH[L={self.L}] {','.join(self.samples)}"
        elif self.kind == MH:
            head = f"MH {','.join(self.samples)}"
        else:
            head = f"Draw {','.join(self.samples)}"
        text = f"{head} | {','.join(sorted(self.conditions_on)) or '-'}"
        if self.marginalized_out:
            text += f"  [integrating out {','.join(sorted(self.marginalized_out))}]"
        return text

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "samples": list(self.samples),
            "conditions_on": sorted(self.conditions_on),
            "marginalized_out": sorted(self.marginalized_out),
            "jump": self.jump.to_dict() if self.jump is not None else None,
            "L": self.L,
        }
        if self.trailing:
            out["trailing"] = list(self.trailing)
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, d: dict, where: str = "step") -> "StepSpec":
        try:
            jump = JumpDescriptor.from_dict(d["jump"]) if d.get("jump") else None
            return cls(
                kind=d["kind"],
                samples=tuple(d["samples"]),
                conditions_on=frozenset(d.get("conditions_on", ())),
                marginalized_out=frozenset(d.get("marginalized_out", ())),
                jump=jump,
                L=d.get("L"),
                trailing=tuple(d.get("trailing", ())),
                label=d.get("label", ""),
            )
        except KeyError as exc:
            raise SpecError(f"{where}: missing field {exc.args[0]!r}") from None
        except SpecError as exc:
            raise SpecError(f"{where}: {exc}") from None


def _others(components: Iterable[str], *groups: Iterable[str]) -> frozenset:
    used = set().union(*map(set, groups))
    return frozenset(c for c in components if c not in used)


def direct_step(components, samples, marginalized_out=(), label="") -> StepSpec:
    """Exact draw of ``samples`` given every component not integrated out."""
    samples = tuple(samples)
    return StepSpec(DIRECT, samples, _others(components, samples, marginalized_out), frozenset(marginalized_out), label=label)


def mh_step(components, samples, jump, marginalized_out=(), label="") -> StepSpec:
    samples = tuple(samples)
    return StepSpec(MH, samples, _others(components, samples, marginalized_out), frozenset(marginalized_out), jump, label=label)


def iterated_step(components, samples, jump, L, marginalized_out=(), label="") -> StepSpec:
    samples = tuple(samples)
    return StepSpec(
        ITERATED, samples, _others(components, samples, marginalized_out), frozenset(marginalized_out), jump, L=L, label=label
    )


def star_step(components, inner, trailing, jump, marginalized_out=(), label="") -> StepSpec:
    """Reduced MH update of ``inner`` followed by an exact draw of ``trailing``."""
    samples = tuple(inner) + tuple(trailing)
    return StepSpec(
        STAR,
        samples,
        _others(components, samples, marginalized_out),
        frozenset(marginalized_out),
        jump,
        trailing=tuple(trailing),
        label=label,
    )


@dataclass(frozen=True, eq=False)
class SamplerSpec:
    """An ordered list of steps over a declared component list.

    Parameters
    ----------
    name : str
    components : tuple of (str, tuple)
        Component ids with their value shapes (``()`` for scalars).
    steps : tuple of StepSpec
    model : str
        Identifier of the model backend the steps run against.
    """

    name: str
    components: tuple
    steps: tuple
    model: str = ""

    def __post_init__(self):
        comps = tuple((c, tuple(shape)) for c, shape in _normalize(self.components))
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "steps", tuple(self.steps))
        names = [c for c, _ in comps]
        if len(set(names)) != len(names):
            raise SpecError(f"{self.name}: duplicate component ids")
        full = frozenset(names)
        for i, step in enumerate(self.steps):
            if step.components != full:
                missing = sorted(full - step.components)
                extra = sorted(step.components - full)
                raise SpecError(
                    f"{self.name} step {i + 1} ({step.describe()}): sets must partition the components"
                    f" (missing {missing}, unknown {extra})"
                )
            jump = step.jump
            if jump is not None:
                walk = jump.inner if jump.kind == CONCATENATED else jump
                if not walk.depends_on <= step.sample_set:
                    raise SpecError(
                        f"{self.name} step {i + 1}: a {walk.kind} rule may only read the proposed components"
                    )
        sampled = set().union(*(s.sample_set for s in self.steps)) if self.steps else set()
        if sampled != full:
            raise SpecError(f"{self.name}: components never sampled: {sorted(full - sampled)}")

    @property
    def names(self) -> tuple:
        return tuple(c for c, _ in self.components)

    @property
    def shapes(self) -> dict:
        return dict(self.components)

    def __len__(self):
        return len(self.steps)

    def with_steps(self, steps: Sequence[StepSpec], name: str | None = None) -> "SamplerSpec":
        return replace(self, steps=tuple(steps), name=self.name if name is None else name)

    def describe(self) -> str:
        lines = [f"{self.name} ({self.model or 'no model'})"]
        lines += [f"  {i + 1}. {s.describe()}" for i, s in enumerate(self.steps)]
        return "\n".join(lines)

    def signature(self) -> tuple:
        return tuple(s.signature() for s in self.steps)

    def to_dict(self) -> dict:
        comps = [c if not shape else {"name": c, "shape": list(shape)} for c, shape in self.components]
        return {"name": self.name, "model": self.model, "components": comps, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerSpec":
        for key in ("name", "components", "steps"):
            if key not in d:
                raise SpecError(f"sampler spec: missing field {key!r}")
        comps = []
        for i, c in enumerate(d["components"]):
            if isinstance(c, str):
                comps.append((c, ()))
            elif isinstance(c, dict) and "name" in c:
                comps.append((c["name"], tuple(c.get("shape", ()))))
            else:
                raise SpecError(f"components[{i}]: expected a name or {{name, shape}}")
        steps = [StepSpec.from_dict(s, where=f"steps[{i}]") for i, s in enumerate(d["steps"])]
        return cls(d["name"], tuple(comps), tuple(steps), d.get("model", ""))


def _normalize(components):
    for c in components:
        if isinstance(c, str):
            yield c, ()
        else:
            name, shape = c
            yield name, shape


def save_spec(spec: SamplerSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def load_spec(path) -> SamplerSpec:
    """Read a sampler spec file; JSON syntax errors report line and column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return SamplerSpec.from_dict(data)
