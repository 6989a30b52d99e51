"""Metropolis-Hastings within partially collapsed Gibbs samplers.

Samplers are declared as step sequences (:mod:`mhpcg.spec`), checked for
propriety against a parent Gibbs sampler (:mod:`mhpcg.validator`) and run
against model backends (:mod:`mhpcg.runner`, :mod:`mhpcg.models`).
"""
from .diagnostics import acf, choose_L, compare_traces, ess, lemma1_check
from .distributions import make_rng
from .errors import MHPCGError
from .kernels import (
    blocked_mh_update,
    concatenated,
    iterated_mh_update,
    joint_mh_update,
    lognormal_walk,
    mh_update,
    mvnormal_walk,
    normal_walk,
    star_kernel_update,
    uniform_independent,
)
from .models import get_sampler, sampler_registry
from .runner import ModelBackend, Trace, run_sampler, tune_scale
from .spec import SamplerSpec, StepSpec, direct_step, iterated_step, load_spec, mh_step, save_spec, star_step
from .validator import validate

__version__ = "0.1.0"

__all__ = [
    "acf",
    "ess",
    "choose_L",
    "compare_traces",
    "lemma1_check",
    "make_rng",
    "MHPCGError",
    "mh_update",
    "iterated_mh_update",
    "joint_mh_update",
    "blocked_mh_update",
    "star_kernel_update",
    "normal_walk",
    "lognormal_walk",
    "mvnormal_walk",
    "uniform_independent",
    "concatenated",
    "get_sampler",
    "sampler_registry",
    "ModelBackend",
    "Trace",
    "run_sampler",
    "tune_scale",
    "SamplerSpec",
    "StepSpec",
    "direct_step",
    "mh_step",
    "star_step",
    "iterated_step",
    "load_spec",
    "save_spec",
    "validate",
]
