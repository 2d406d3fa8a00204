import math

import pytest

from spikelab import models
from spikelab.errors import ConfigError
from spikelab.models import ModelSpec, Regime


def test_constructors_and_attribute_access():
    m = models.schnakenberg(0.2, 1.0)
    assert m.kind == "schnakenberg"
    assert (m.a, m.b, m.epsilon, m.D) == (0.2, 1.0, 0.01, 2.0)
    g = models.gierer_meinhardt(0.5)
    assert g.tau == 1.0 and g.D == 1.0
    assert ModelSpec("Gierer-Meinhardt", {"kappa": 1.0}).kind == "gm"


@pytest.mark.parametrize(
    "kind,params",
    [
        ("schnakenberg", {"a": -1.0, "b": 1.0}),
        ("schnakenberg", {"a": 1.0}),
        ("brusselator", {"a": 1.0, "f": 1.0}),
        ("gm", {"kappa": -0.1}),
        ("fitzhugh", {"a": 1.0}),
    ],
)
def test_invalid_specs_rejected(kind, params):
    with pytest.raises(ConfigError):
        ModelSpec(kind, params)


def test_outside_semi_strong_regime_rejected():
    with pytest.raises(ConfigError), pytest.warns(UserWarning):
        models.schnakenberg(0.2, 1.0, epsilon=0.8, D=2.0)


def test_json_round_trip_and_unknown_fields():
    m = models.brusselator(1.0, 0.7, epsilon=0.02, D=3.0)
    assert ModelSpec.from_json(m.to_json()) == m
    with pytest.raises(ConfigError):
        ModelSpec.from_dict({**m.to_dict(), "extra": 1})
    with pytest.raises(ConfigError):
        ModelSpec.from_dict({"params": {"a": 1.0}})


def test_with_params_and_ratio():
    m = models.schnakenberg(0.2, 1.0).with_params(a=0.5, D=4.0)
    assert m.a == 0.5 and m.D == 4.0
    assert m.ratio == pytest.approx(0.01 / 2.0)


@pytest.mark.parametrize(
    "model,expected",
    [
        (models.schnakenberg(0.2, 1.0), Regime.REPLICATION),
        (models.schnakenberg(0.5, 1.0), Regime.NUCLEATION),
        (models.schnakenberg(1.5, 1.0), Regime.NO_INSTABILITY),
        (models.brusselator(1.0, 0.8), Regime.REPLICATION),
        (models.brusselator(1.0, 0.7), Regime.NUCLEATION),
        (models.brusselator(1.0, 0.3), Regime.NO_INSTABILITY),
        (models.gierer_meinhardt(0.5), Regime.NUCLEATION),
        (models.gierer_meinhardt(1.5), Regime.NO_INSTABILITY),
    ],
)
def test_regime_classification(model, expected):
    assert models.classify_regime(model) == expected


def test_homogeneous_states():
    v, u = models.homogeneous_state(models.brusselator(1.0, 0.3))
    assert v == pytest.approx(1.0 / 0.7)
    assert u == pytest.approx(0.7)
    v, u = models.homogeneous_state(models.schnakenberg(0.5, 1.0))
    assert v == pytest.approx(1.5)
    assert u == pytest.approx(1.0 / 2.25)


def test_outer_reduction_wellposed_range():
    red = models.outer_reduction(models.schnakenberg(0.5, 1.0))
    assert red.wellposed_hi == pytest.approx(1.0)
    red = models.outer_reduction(models.gierer_meinhardt(0.5))
    assert red.wellposed_hi == pytest.approx(1.0)


def test_physical_conversion_is_valid_spec():
    m = models.brusselator_from_physical(E=2.0, B=1.0, D_v=1e-4, D_u=1.0, L=1.0)
    assert m.kind == "brusselator"
    assert 0 < m.f < 1 and m.epsilon > 0 and math.isfinite(m.D)
