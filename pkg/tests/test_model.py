"""Model parameter validation, multiplier symbols, shipped presets."""

import numpy as np
import pytest

from wickstat.model import (
    ModelParams,
    canonical_symbol,
    evaluate_symbol,
    symbol_is_real_operator,
)
from wickstat.presets import PRESETS, load_preset, preset_config


def test_defaults_fill_exponent_tuple():
    p = ModelParams(d=1, sigma=2.0, k=3)
    assert p.n == (0.0, 0.0, 0.0)
    assert p.m == 0.0 and p.n0 == 0.0


def test_validation_rejects_bad_shapes():
    with pytest.raises(ValueError):
        ModelParams(d=0, sigma=2.0, k=3)
    with pytest.raises(ValueError):
        ModelParams(d=1, sigma=-1.0, k=3)
    with pytest.raises(ValueError):
        ModelParams(d=1, sigma=2.0, k=0)
    with pytest.raises(ValueError):
        ModelParams(d=1, sigma=2.0, k=3, n=(0.0, 0.0))  # needs k entries
    with pytest.raises(ValueError):
        ModelParams(d=1, sigma=2.0, k=2, factor_symbols=((("constant", 1.0),) * 3))


def test_default_weights_are_bracket_powers():
    p = ModelParams(d=1, sigma=1.0, k=2, m=0.5, n0=1.0, n=(2.0, 0.0))
    l = np.array([[0], [1], [2]])
    br = np.sqrt(np.array([1.0, 2.0, 5.0]))
    assert np.allclose(p.noise_weight_sq(l), br)  # <l>^{2m} with m = 1/2
    assert np.allclose(p.outer_weights(l), br**1.0)
    assert np.allclose(p.factor_weights(0, l), br**2.0)
    assert np.allclose(p.factor_weights(1, l), np.ones(3))


def test_symbol_evaluation():
    l = np.array([[-2], [0], [3]])
    assert np.allclose(evaluate_symbol(("constant", -1.0), l), -1.0)
    got = evaluate_symbol(("i_component", 0), l)
    assert np.allclose(got, 1j * l[:, 0])
    assert np.allclose(evaluate_symbol(("power", 2.0), l),
                       l[:, 0] ** 2 + 1.0)


def test_symbol_real_operator_check():
    # il is purely imaginary and odd: a real operator
    assert symbol_is_real_operator(("i_component", 0), d=1)
    assert symbol_is_real_operator(("constant", 2.0), d=1)
    assert symbol_is_real_operator(("power", -0.7), d=2)


def test_canonical_symbol_round_trip():
    s = canonical_symbol(["i_component", 0])
    assert s == ("i_component", 0)
    assert canonical_symbol(None) is None


def test_general_multiplier_params_kpz_shape():
    p = ModelParams(
        d=1,
        sigma=2.0,
        k=2,
        outer_symbol=("constant", -1.0),
        factor_symbols=(("i_component", 0), ("i_component", 0)),
    )
    l = np.array([[1], [-1], [2]])
    assert np.allclose(p.outer_weights(l), -1.0)
    assert np.allclose(p.factor_weights(0, l), 1j * l[:, 0])


def test_to_dict_round_trip():
    p = ModelParams(
        d=1, sigma=0.75, k=3, m=0.0,
        outer_symbol=("constant", -1.0),
    )
    q = ModelParams.from_dict(p.to_dict())
    assert q == p


def test_simulable_defaults():
    assert ModelParams(d=1, sigma=0.7, k=3).simulable
    assert ModelParams(d=2, sigma=2.0, k=3).simulable
    assert not ModelParams(d=3, sigma=2.0, k=3).simulable
    forced = ModelParams(d=3, sigma=2.0, k=3, wick_closable=True)
    assert forced.simulable


def test_presets_all_load():
    for name in PRESETS:
        p = load_preset(name)
        assert isinstance(p, ModelParams)


def test_preset_config_is_a_copy():
    cfg = preset_config("phi4_2")
    cfg["model"]["d"] = 99
    assert preset_config("phi4_2")["model"]["d"] == 2


def test_unknown_preset_lists_options():
    with pytest.raises(KeyError, match="phi4_2"):
        preset_config("nonsense")


def test_preset_parameters_pin_the_applications():
    assert load_preset("phi4_2") == ModelParams(d=2, sigma=2.0, k=3)
    assert load_preset("phi4_3") == ModelParams(d=3, sigma=2.0, k=3)
    kpz = load_preset("kpz")
    assert (kpz.d, kpz.sigma, kpz.k) == (1, 2.0, 2)
    assert kpz.outer_symbol == ("constant", -1.0)
    b = load_preset("frac_d1_borderline")
    assert (b.d, b.sigma, b.k) == (1, 0.75, 3)