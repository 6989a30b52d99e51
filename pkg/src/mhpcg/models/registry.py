"""Named sampler specifications.

Executable samplers run against the bivariate, spectral, calibration and
factor models. Validator-only specs (the latent-count samplers, the
framework illustration and the generic fragments) describe step structure
over abstract components and are never executed.

Jump scales below are starting values; steps with a ``target_rate`` are
tuned during burn-in.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import UnknownSampler
from ..kernels import concatenated, lognormal_walk, mvnormal_walk, normal_walk, uniform_independent
from ..spec import SamplerSpec, direct_step, iterated_step, mh_step, star_step
from .factor import sigma_names
from .spectral import SPECTRAL_COMPONENTS

__all__ = ["sampler_registry", "get_sampler", "parent_of", "EXECUTABLE", "VALIDATOR_ONLY", "PARENTS"]

EXECUTABLE = (
    "sampler4",
    "sampler5",
    "sampler5_iterated",
    "sampler5_joint",
    "sampler6",
    "sampler7a",
    "sampler7b",
    "sampler8",
    "sampler9",
    "sampler10",
    "sampler11",
    "sampler12",
    "sampler13",
)

# Parent Gibbs samplers used as derivation hints by the validator.
PARENTS = {
    "sampler2": "sampler1",
    "sampler3": "sampler1",
    "sampler3_rot2": "sampler1",
    "sampler3_rot1": "sampler1",
    "sampler5": "sampler4",
    "sampler5_iterated": "sampler4",
    "sampler6": "spectral_parent",
    "sampler7a": "spectral_parent",
    "sampler7b": "spectral_parent",
    "sampler10": "spectral_parent",
    "sampler11": "spectral_parent",
    "sampler8": "calibration_parent",
    "sampler9": "calibration_parent",
    "sampler13": "sampler12",
    "fig2b": "fig2a",
    "fig2c": "fig2a",
    "fig2d": "fig2a",
    "fragment1": "fragment1_parent",
    "fragment1_naive": "fragment1_parent",
    "fragment1_star": "fragment1_parent",
}

BIVARIATE_JUMP_SD = math.sqrt(3.0)
CALIBRATION_BETA_SD = 0.18


def _bivariate() -> dict:
    comps = ("psi1", "psi2")
    walk = normal_walk(BIVARIATE_JUMP_SD)

    def spec(name, steps):
        return SamplerSpec(name, comps, steps, "bivariate")

    return {
        "sampler4": spec(
            "sampler4",
            [direct_step(comps, ["psi1"]), mh_step(comps, ["psi2"], walk)],
        ),
        "sampler5": spec(
            "sampler5",
            [direct_step(comps, ["psi1"], ["psi2"]), mh_step(comps, ["psi2"], walk)],
        ),
        "sampler5_iterated": spec(
            "sampler5_iterated",
            [direct_step(comps, ["psi1"], ["psi2"]), iterated_step(comps, ["psi2"], walk, L=7)],
        ),
        "sampler5_joint": spec(
            "sampler5_joint",
            [mh_step(comps, ["psi1", "psi2"], concatenated(["psi1"], walk, draw_first=True))],
        ),
    }


def _spectral(n_bins: int) -> dict:
    c = SPECTRAL_COMPONENTS
    shapes = tuple((name, (n_bins,) if name == "XL" else ()) for name in c)
    mu_jump = uniform_independent(n_bins)
    phi_walk = normal_walk(0.05, target_rate=0.4)
    beta_walk = normal_walk(0.1, target_rate=0.4)
    reduced = ("alpha", "XL")

    def spec(name, steps):
        return SamplerSpec(name, shapes, steps, "spectral")

    return {
        "spectral_parent": spec(
            "spectral_parent",
            [
                direct_step(c, ["XL"]),
                direct_step(c, ["alpha"]),
                mh_step(c, ["beta"], beta_walk),
                direct_step(c, ["gamma"]),
                mh_step(c, ["mu"], mu_jump),
                mh_step(c, ["phi"], phi_walk),
            ],
        ),
        "sampler6": spec(
            "sampler6",
            [
                mh_step(c, ["mu"], mu_jump, reduced),
                mh_step(c, ["phi"], phi_walk, reduced),
                mh_step(c, ["beta"], beta_walk, reduced),
                direct_step(c, ["alpha"], ["XL"]),
                direct_step(c, ["XL"]),
                direct_step(c, ["gamma"]),
            ],
        ),
        "sampler7a": spec(
            "sampler7a",
            [
                mh_step(c, ["mu"], mu_jump, reduced),
                mh_step(c, ["phi"], phi_walk, reduced),
                mh_step(c, ["beta", "alpha"], concatenated(["alpha"], beta_walk, draw_first=False), ["XL"]),
                direct_step(c, ["XL"]),
                direct_step(c, ["gamma"]),
            ],
        ),
        "sampler7b": spec(
            "sampler7b",
            [
                mh_step(c, ["mu"], mu_jump, reduced),
                mh_step(c, ["phi"], phi_walk, reduced),
                mh_step(
                    c,
                    ["alpha", "beta"],
                    normal_walk(np.array([1.0, 0.05]), target_rate=0.2, adapt_shape=True),
                    ["XL"],
                ),
                direct_step(c, ["XL"]),
                direct_step(c, ["gamma"]),
            ],
        ),
        "sampler10": spec(
            "sampler10",
            [
                mh_step(c, ["mu"], mu_jump, ["XL"]),
                direct_step(c, ["XL"]),
                direct_step(c, ["alpha"]),
                mh_step(c, ["beta"], beta_walk),
                direct_step(c, ["gamma"]),
                mh_step(c, ["phi"], phi_walk),
            ],
        ),
        "sampler11": spec(
            "sampler11",
            [
                mh_step(c, ["mu"], mu_jump, reduced),
                mh_step(
                    c,
                    ["beta", "phi"],
                    mvnormal_walk(np.diag([0.01, 0.0025]), target_rate=0.2, adapt_shape=True),
                    reduced,
                ),
                direct_step(c, ["alpha"], ["XL"]),
                direct_step(c, ["XL"]),
                direct_step(c, ["gamma"]),
            ],
        ),
    }


def _calibration(q: int) -> dict:
    c = ("Z", "alpha", "beta")
    shapes = (("Z", (q,)), ("alpha", ()), ("beta", ()))
    walk = normal_walk(CALIBRATION_BETA_SD)

    def spec(name, steps):
        return SamplerSpec(name, shapes, steps, "calibration")

    return {
        "calibration_parent": spec(
            "calibration_parent",
            [direct_step(c, ["Z"]), mh_step(c, ["beta"], walk), direct_step(c, ["alpha"])],
        ),
        "sampler8": spec(
            "sampler8",
            [direct_step(c, ["Z"], ["alpha", "beta"]), mh_step(c, ["beta"], walk), direct_step(c, ["alpha"])],
        ),
        "sampler9": spec(
            "sampler9",
            [
                direct_step(c, ["Z"], ["alpha", "beta"]),
                iterated_step(c, ["beta"], walk, L=20, marginalized_out=["alpha"]),
                direct_step(c, ["alpha"]),
            ],
        ),
    }


def _factor(p: int, q: int, n_obs: int) -> dict:
    sig = sigma_names(p)
    c = ("Z", "beta") + sig
    shapes = (("Z", (n_obs, q)), ("beta", (q, p))) + tuple((s, ()) for s in sig)
    walk = lognormal_walk(0.3, target_rate=0.4)

    def spec(name, steps):
        return SamplerSpec(name, shapes, steps, "factor")

    return {
        "sampler12": spec(
            "sampler12",
            [direct_step(c, ["Z"])] + [direct_step(c, [s]) for s in sig] + [direct_step(c, ["beta"])],
        ),
        "sampler13": spec(
            "sampler13",
            [direct_step(c, [sig[0]])]
            + [mh_step(c, [s], walk, ["Z"]) for s in sig[1:]]
            + [direct_step(c, ["Z"]), direct_step(c, ["beta"])],
        ),
    }


def _latent() -> dict:
    """Samplers over the latent-count layer, for validation only."""
    c = ("X", "XL", "theta", "mu")

    def spec(name, steps):
        return SamplerSpec(name, c, steps, "spectral-latent")

    counts = direct_step(c, ["X", "XL"])
    theta = direct_step(c, ["theta"])
    mu_reduced = direct_step(c, ["mu"], ["XL"])
    return {
        "sampler1": spec("sampler1", [counts, theta, direct_step(c, ["mu"])]),
        "sampler2": spec("sampler2", [direct_step(c, ["XL", "mu"]), counts, theta]),
        "sampler3": spec("sampler3", [mu_reduced, counts, theta]),
        "sampler3_rot2": spec("sampler3_rot2", [theta, mu_reduced, counts]),
        "sampler3_rot1": spec("sampler3_rot1", [counts, theta, mu_reduced]),
    }


def _fragments() -> dict:
    out = {}
    c4 = ("psi1", "psi2", "psi3", "psi4")

    def spec4(name, steps):
        return SamplerSpec(name, c4, steps, "gaussian")

    out["fig2a"] = spec4(
        "fig2a", [direct_step(c4, ["psi1"]), direct_step(c4, ["psi2"]), direct_step(c4, ["psi3", "psi4"])]
    )
    out["fig2b"] = spec4(
        "fig2b",
        [direct_step(c4, ["psi1", "psi3"]), direct_step(c4, ["psi2"]), direct_step(c4, ["psi3", "psi4"])],
    )
    out["fig2c"] = spec4(
        "fig2c",
        [direct_step(c4, ["psi2"]), direct_step(c4, ["psi1", "psi3"]), direct_step(c4, ["psi3", "psi4"])],
    )
    out["fig2d"] = spec4(
        "fig2d",
        [direct_step(c4, ["psi2"]), direct_step(c4, ["psi1"], ["psi3"]), direct_step(c4, ["psi3", "psi4"])],
    )

    c3 = ("psi1", "psi2", "psi3")
    walk = normal_walk(1.0)

    def spec3(name, steps):
        return SamplerSpec(name, c3, steps, "gaussian")

    out["fragment1_parent"] = spec3(
        "fragment1_parent",
        [direct_step(c3, ["psi1"]), mh_step(c3, ["psi2"], walk), direct_step(c3, ["psi3"])],
    )
    out["fragment1"] = spec3(
        "fragment1",
        [direct_step(c3, ["psi1", "psi2"]), mh_step(c3, ["psi2"], walk), direct_step(c3, ["psi3"])],
    )
    out["fragment1_naive"] = spec3(
        "fragment1_naive",
        [direct_step(c3, ["psi1"], ["psi2"]), mh_step(c3, ["psi2"], walk), direct_step(c3, ["psi3"])],
    )
    out["fragment1_star"] = spec3(
        "fragment1_star",
        [direct_step(c3, ["psi1", "psi2"]), star_step(c3, ["psi2"], ["psi3"], walk)],
    )
    # Reduced MH step followed by the exact draw of what it integrates out,
    # with psi3 refreshed after or before the pair.
    out["fragment6"] = spec3(
        "fragment6",
        [mh_step(c3, ["psi1"], walk, ["psi2"]), direct_step(c3, ["psi2"]), direct_step(c3, ["psi3"])],
    )
    out["fragment6_before"] = spec3(
        "fragment6_before",
        [direct_step(c3, ["psi3"]), mh_step(c3, ["psi1"], walk, ["psi2"]), direct_step(c3, ["psi2"])],
    )
    out["fragment7"] = spec3(
        "fragment7",
        [mh_step(c3, ["psi1", "psi2"], concatenated(["psi2"], walk, draw_first=False)), direct_step(c3, ["psi3"])],
    )
    # Fragment 7 after a step that integrates psi2 out: the blocking pitfall.
    out["fragment7_after_reduced"] = spec3(
        "fragment7_after_reduced",
        [
            direct_step(c3, ["psi3"], ["psi2"]),
            mh_step(c3, ["psi1", "psi2"], concatenated(["psi2"], walk, draw_first=False)),
        ],
    )
    out["fragment5_joint"] = spec4(
        "fragment5_joint",
        [
            mh_step(
                c4,
                ["psi1", "psi2", "psi3"],
                concatenated(["psi1"], mvnormal_walk(np.eye(2)), draw_first=True, depends_on=["psi3"]),
            ),
            direct_step(c4, ["psi4"]),
        ],
    )
    return out


VALIDATOR_ONLY = (
    "sampler1",
    "sampler2",
    "sampler3",
    "sampler3_rot2",
    "sampler3_rot1",
    "fig2a",
    "fig2b",
    "fig2c",
    "fig2d",
    "fragment1_parent",
    "fragment1",
    "fragment1_naive",
    "fragment1_star",
    "fragment5_joint",
    "fragment6",
    "fragment6_before",
    "fragment7",
    "fragment7_after_reduced",
    "spectral_parent",
    "calibration_parent",
)


def sampler_registry(*, n_bins: int = 550, q_cal: int = 7, p: int = 5, q: int = 2, n_obs: int = 100) -> dict:
    """Every named spec, keyed by name.

    Parameters
    ----------
    n_bins : int
        Spectral bins (sets the shape of ``XL`` and the support of ``mu``).
    q_cal : int
        Calibration basis size.
    p, q, n_obs : int
        Factor model dimensions.
    """
    reg: dict = {}
    reg.update(_bivariate())
    reg.update(_spectral(n_bins))
    reg.update(_calibration(q_cal))
    reg.update(_factor(p, q, n_obs))
    reg.update(_latent())
    reg.update(_fragments())
    return reg


def get_sampler(name: str, **dims) -> SamplerSpec:
    reg = sampler_registry(**dims)
    try:
        return reg[name]
    except KeyError:
        raise UnknownSampler(f"unknown sampler {name!r}; known: {', '.join(sorted(reg))}") from None


def parent_of(name: str, **dims) -> SamplerSpec | None:
    """The registered parent Gibbs sampler of ``name``, if any."""
    parent = PARENTS.get(name)
    return None if parent is None else get_sampler(parent, **dims)
