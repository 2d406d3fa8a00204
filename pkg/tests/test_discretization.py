import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spikelab import discretization as disc
from spikelab import models
from spikelab.errors import ConfigError

MODELS = [models.schnakenberg(0.2, 1.0), models.brusselator(1.0, 0.7), models.gierer_meinhardt(0.5, 2.0)]


@settings(max_examples=40, deadline=None)
@given(w=arrays(np.float64, 33, elements=st.floats(-1e3, 1e3)), symmetric=st.booleans())
def test_discrete_flux_balance_vanishes(w, symmetric):
    g = disc.make_grid(32 if symmetric else 16, symmetric)
    assert abs(disc.flux_balance(g, w)) <= 1e-9 * max(1.0, np.max(np.abs(w))) / g.h**2


def test_grid_shapes_and_weights():
    g = disc.make_grid(64, True)
    assert g.m == 65 and g.h == pytest.approx(1 / 64)
    assert len(g.x_full()) == 129
    assert g.weights().sum() == pytest.approx(2.0)
    f = disc.make_grid(64, False)
    assert f.m == 129 and f.weights().sum() == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        disc.make_grid(4)


def _state(model, g, rng):
    v = 1.0 + rng.random(g.m)
    u = 0.5 + rng.random(g.m)
    return np.concatenate([v, u])


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_jacobian_matches_finite_differences(model):
    g = disc.make_grid(16, True)
    rng = np.random.default_rng(1)
    z = _state(model, g, rng)
    J = disc.jacobian(model, g, z, 1.7, dilution=0.01).toarray()
    Jfd = np.empty_like(J)
    for j in range(len(z)):
        dz = np.zeros_like(z)
        dz[j] = 1e-6
        Jfd[:, j] = (disc.residual(model, g, z + dz, 1.7, 0.01) - disc.residual(model, g, z - dz, 1.7, 0.01)) / 2e-6
    assert np.max(np.abs(J - Jfd)) < 1e-5 * max(1.0, np.max(np.abs(J)))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_dF_dL_matches_finite_differences(model):
    g = disc.make_grid(16, True)
    z = _state(model, g, np.random.default_rng(2))
    fd = (disc.residual(model, g, z, 2.0 + 1e-6) - disc.residual(model, g, z, 2.0 - 1e-6)) / 2e-6
    assert np.allclose(disc.dF_dL(model, g, z, 2.0), fd, atol=1e-5)


def test_symmetric_grid_equals_full_grid_on_even_data():
    model = MODELS[0]
    gs, gf = disc.make_grid(32, True), disc.make_grid(32, False)
    x = gs.x
    v = 1 + np.cos(np.pi * x) ** 2
    u = 0.4 + x**2
    Fs = disc.residual(model, gs, np.concatenate([v, u]), 1.3)
    Ff = disc.residual(model, gf, np.concatenate([gs.full(v), gs.full(u)]), 1.3)
    assert np.allclose(gs.full(Fs[: gs.m]), Ff[: gf.m], atol=1e-10)
    assert np.allclose(gs.full(Fs[gs.m :]), Ff[gf.m :], atol=1e-10)


def test_residual_floor_scales_with_grid():
    model = MODELS[0]
    z1 = np.ones(2 * 513)
    z2 = np.ones(2 * 1025)
    f1 = disc.residual_floor(model, disc.make_grid(512), z1, 1.0)
    f2 = disc.residual_floor(model, disc.make_grid(1024), z2, 1.0)
    assert f2 == pytest.approx(4 * f1)
    assert f1 > 0


def test_mass_vector():
    assert np.all(disc.mass(MODELS[0], 5) == 1.0)
    assert np.all(disc.mass(MODELS[2], 5)[5:] == 2.0)
