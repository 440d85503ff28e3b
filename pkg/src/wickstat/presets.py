"""Named model configurations.

Each preset is a plain dict mirroring the CLI config schema: a "model"
section with ModelParams fields, plus optional section overrides.  The
fractional family lives on d = 1 with cubic nonlinearity; its regime
moves from strictly singular through borderline to expected-absolutely-
continuous as sigma crosses 3/4.  The derivative-quadratic model is
provided both with its exact multiplier symbols ("kpz") and as the
exponent-level surrogate with the same counting ("kpz_like").
"""

from __future__ import annotations

from copy import deepcopy

from .model import ModelParams

PRESETS = {
    "phi4_2": {
        "model": {"d": 2, "sigma": 2.0, "k": 3},
    },
    "phi4_3": {
        # Classification and constants only: too heavy to simulate here.
        "model": {"d": 3, "sigma": 2.0, "k": 3},
    },
    "frac_d1_singular": {
        "model": {"d": 1, "sigma": 0.7, "k": 3},
    },
    "frac_d1_borderline": {
        "model": {"d": 1, "sigma": 0.75, "k": 3},
    },
    "frac_d1_ac": {
        "model": {"d": 1, "sigma": 0.8, "k": 3},
    },
    "kpz": {
        "model": {
            "d": 1,
            "sigma": 2.0,
            "k": 2,
            "n0": 0.0,
            "n": [1.0, 1.0],
            "outer_symbol": ["constant", -1.0],
            "factor_symbols": [["i_component", 0], ["i_component", 0]],
        },
    },
    "kpz_like": {
        "model": {"d": 1, "sigma": 2.0, "k": 2, "n0": 0.0, "n": [1.0, 1.0]},
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return deepcopy(PRESETS[name])


def load_preset(name: str) -> ModelParams:
    return ModelParams.from_dict(preset_config(name)["model"])
