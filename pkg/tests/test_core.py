import json

import numpy as np
import pytest

from kakinuma.core import (CanonicalState, ConfigError, Grid1D, ModelParams, NonCavitation, NonZeroMean,
                           State, check_noncavitation, coef, config_from_dict, integrate, load_config,
                           multiply_dealiased, spectral_antiderivative, spectral_derivative)
from conftest import make_model

L = 7.0
grid = Grid1D(L, 32)
x = grid.x
kw = 2 * np.pi / L


def test_derivative_resolved_mode():
    f = np.sin(kw * x)
    assert np.allclose(spectral_derivative(grid, f), kw * np.cos(kw * x), atol=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_of_constant(order):
    assert np.abs(spectral_derivative(grid, np.full(32, 4.2), order)).max() < 1e-13


def test_second_derivative_eigenfunction():
    for m in (1, 3, 7):
        f = np.cos(m * kw * x)
        assert np.allclose(spectral_derivative(grid, f, 2), -(m * kw) ** 2 * f, atol=1e-11)


def test_odd_derivative_drops_nyquist():
    f = np.cos(np.pi * np.arange(32))
    assert np.abs(spectral_derivative(grid, f)).max() < 1e-13


def test_antiderivative():
    f = np.cos(kw * x) + 0.5 * np.cos(2 * kw * x)
    F = spectral_antiderivative(grid, f)
    assert np.allclose(F, np.sin(kw * x) / kw + 0.5 * np.sin(2 * kw * x) / (2 * kw), atol=1e-13)
    assert np.all(spectral_antiderivative(grid, np.zeros(32)) == 0)
    with pytest.raises(NonZeroMean):
        spectral_antiderivative(grid, f + 1.0)


def test_integrate():
    g2 = Grid1D(2 * np.pi, 16)
    assert integrate(g2, np.ones(16)) == pytest.approx(2 * np.pi)
    assert abs(integrate(grid, np.sin(kw * x))) < 1e-14
    assert integrate(grid, np.full(32, 3.0)) == pytest.approx(3.0 * L)


def test_dealiased_product():
    f = np.cos(3 * kw * x)
    assert np.allclose(multiply_dealiased(grid, f, f), 0.5 * (1 + np.cos(6 * kw * x)), atol=1e-13)
    assert np.all(multiply_dealiased(grid, np.zeros(32), f) == 0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 32))
    assert np.array_equal(multiply_dealiased(grid, a, b), multiply_dealiased(grid, b, a))


def test_dealiased_product_is_galerkin_truncation():
    # modes 10 and 9 on 32 points: the sum frequency 19 aliases in collocation but not here
    f, g = np.cos(10 * kw * x), np.cos(9 * kw * x)
    assert np.allclose(multiply_dealiased(grid, f, g), 0.5 * np.cos(kw * x), atol=1e-13)


def test_coef_zero_over_zero():
    assert coef(0, 0) == 0
    assert coef(4, 6) == pytest.approx(2 / 3)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(2.0, 1.0, 1.0, 1.0, 1.0, 0, (0,))
    with pytest.raises(ValueError):
        ModelParams(1.0, 2.0, 1.0, 1.0, 1.0, 0, (1, 2))
    with pytest.raises(ValueError):
        ModelParams(1.0, 2.0, 1.0, 1.0, 1.0, 0, (0, 2, 1))
    with pytest.raises(ValueError):
        ModelParams(1.0, 2.0, 1.0, 1.0, 1.0, 0, (0,), bottom=np.full(8, 0.1))
    p = ModelParams(1.0, 2.0, 1.0, 3.0, 1.0, 2, (0, 1, 2))
    assert p.upper_exponents == (0, 2, 4) and p.n_lower == 2 and p.flat


def test_noncavitation():
    model = make_model(M=16, h_min=0.1)
    H1, H2 = check_noncavitation(model, np.full(16, 0.5))
    assert np.allclose(H1, 0.5) and np.allclose(H2, 3.5)
    with pytest.raises(NonCavitation):
        check_noncavitation(model, np.full(16, 0.95))


def test_state_pack_round_trip():
    model = make_model(M=16)
    s = State(np.arange(16.0), np.ones((2, 16)), 2 * np.ones((2, 16)))
    t = State.unpack(s.pack(), 1)
    assert np.array_equal(t.phi2, s.phi2) and np.array_equal(t.zeta, s.zeta)
    r = State.rest(model)
    assert r.phi1.shape == (2, 16) and not r.zeta.any()
    c = CanonicalState(np.ones(16), np.zeros(16))
    assert np.array_equal(CanonicalState.unpack(c.pack()).zeta, c.zeta)


BASE = {"rho1": 1.0, "rho2": 2.0, "h1": 1.0, "h2": 3.0, "L": 10.0, "M": 32}


def test_config_defaults():
    cfg = config_from_dict(BASE)
    assert cfg.g == 9.81 and cfg.N == 0 and cfg.p_list == (0,)
    cfg = config_from_dict({**BASE, "N": 2})
    assert cfg.p_list == (0, 2, 4)
    m = config_from_dict({**BASE, "bottom": {"type": "cosine", "amplitude": 0.2, "mode": 2}}).model()
    assert np.allclose(m.bottom, 0.2 * np.cos(2 * np.pi * 2 * m.grid.x / 10.0))


@pytest.mark.parametrize("raw, word", [
    ({**BASE, "rho0": 1}, "rho0"),
    ({k: v for k, v in BASE.items() if k != "M"}, "M"),
    ({**BASE, "rho1": 3.0}, "rho"),
    ({**BASE, "M": "64"}, "M"),
    ({**BASE, "bottom": {"type": "cosine", "amp": 1}}, "amp"),
    ({**BASE, "dt": -1}, "dt"),
])
def test_config_errors(raw, word):
    with pytest.raises(ConfigError, match=word):
        config_from_dict(raw)


def test_load_config_reports_position(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "rho1": 1,\n  "rho2" 2\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)
    path.write_text(json.dumps(BASE))
    assert load_config(path).M == 32
