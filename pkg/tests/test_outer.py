import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from spikelab import models, outer
from spikelab.errors import DomainError, NoQuasiEquilibrium, RegimeMismatch

SCH = models.schnakenberg(0.5, 1.0)


@settings(max_examples=25, deadline=None)
@given(mu=st.floats(0.55, 1.0), frac=st.floats(0.02, 0.98))
def test_chi_proper_matches_singular_form(mu, frac):
    v0 = 0.5 + frac * (mu - 0.5)  # well-posed range is a < v0 < mu <= 2a
    assert outer.chi(SCH, mu, v0) == pytest.approx(outer.chi_singular(SCH, mu, v0), rel=1e-6)


def test_chi_frozen_values():
    assert outer.chi(SCH, 0.9, 0.55) == pytest.approx(1.3556555188833, rel=1e-9)
    assert outer.chi(models.brusselator(1.0, 0.7), 1.8, 1.1) == pytest.approx(1.1136993248857, rel=1e-9)
    assert outer.chi(models.gierer_meinhardt(0.5), 0.9, 0.6) == pytest.approx(1.9714682291295, rel=1e-9)


def test_chi_argument_checks():
    with pytest.raises(DomainError):
        outer.chi(SCH, 0.5, 0.6)
    with pytest.raises(DomainError):
        outer.chi(SCH, 1.5, 0.2)


def test_chi_of_mu_increases():
    m = models.schnakenberg(0.2, 1.0)
    vals = [outer.chi_of_mu(m, mu) for mu in np.linspace(0.22, 0.39, 8)]
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize(
    "model,K,kind,L",
    [
        (models.schnakenberg(0.2, 1.0), 1, "Replication", 1.9818),
        (models.schnakenberg(0.2, 1.0), 2, "Replication", 3.96359),
        (models.schnakenberg(0.5, 1.0), 1, "Nucleation", 1.64923),
        (models.brusselator(1.0, 0.8), 1, "Replication", 1.02551),
        (models.brusselator(1.0, 0.7), 1, "Nucleation", 1.34721),
        (models.gierer_meinhardt(0.5), 1, "Nucleation", 3.83856),
        (models.gierer_meinhardt(0.5), 2, "Nucleation", 7.67711),
    ],
)
def test_threshold_goldens(model, K, kind, L):
    r = outer.threshold(model, K)
    assert r.kind == kind
    assert r.L_crit == pytest.approx(L, rel=1e-4)
    assert r.D_L_crit == pytest.approx(model.D / r.L_crit**2)


def test_threshold_regime_mismatch():
    with pytest.raises(RegimeMismatch):
        outer.threshold(models.schnakenberg(1.5, 1.0))
    with pytest.raises(RegimeMismatch):
        outer.replication_threshold(models.gierer_meinhardt(0.5))


def test_small_parameter_form_close_to_full():
    m = models.schnakenberg(0.2, 1.0)
    small = outer.small_param_threshold(m)
    assert small.L_crit == pytest.approx(1.95368, rel=1e-4)
    assert abs(small.L_crit - 1.9818) / 1.9818 < 0.05


def test_critical_values():
    assert outer.critical_a(1.0) == pytest.approx(0.258726, abs=2e-5)
    assert outer.critical_f() == pytest.approx(0.767877, abs=2e-5)


def test_no_replication_bounds():
    Bmax, verdict = outer.norep_bound(models.schnakenberg(1.5, 1.0))
    assert Bmax == pytest.approx(0.621526, abs=1e-6)
    assert verdict == "NoReplication"
    assert outer.norep_bound(models.brusselator(1.0, 0.3)) == (1.0, "NoReplication")
    assert outer.F_b(1e-6) == pytest.approx(1.0, abs=1e-5)
    zs = np.linspace(1.0, 2.0, 41)[1:]
    assert max(outer.F_s(z) for z in zs) == pytest.approx(outer.F_s(2.0))


def test_quasi_equilibrium_frozen():
    s = outer.solve_quasi_equilibrium(SCH, 1, L=1.0)
    assert s.converged
    assert s.mu == pytest.approx(0.58992992, rel=1e-6)
    assert s.B == pytest.approx(0.66552086, rel=1e-6)
    assert s.v0plus == pytest.approx(0.50687367, rel=1e-6)


def test_quasi_equilibrium_small_L_raises():
    with pytest.raises(NoQuasiEquilibrium):
        outer.solve_quasi_equilibrium(models.brusselator(1.0, 0.3), 1, L=0.5)


def _partial_chi(red, mu, v):
    def integrand(s):
        d = red.G(mu) - red.G(mu - s * s)
        return 0.0 if d <= 0 else 2 * s * red.g(mu - s * s) / math.sqrt(d)

    return integrate.quad(integrand, 0.0, math.sqrt(mu - v), epsabs=1e-13, epsrel=1e-12, limit=400)[0]


def test_outer_profile_against_quadrature():
    s = outer.solve_quasi_equilibrium(SCH, 1, L=1.0)
    red = models.outer_reduction(SCH)
    total = _partial_chi(red, s.mu, s.v0plus)
    vs = np.linspace(s.v0plus, s.mu, 9)[1:-1]
    xs = np.array([s.ell * (1 - _partial_chi(red, s.mu, v) / total) for v in vs])
    got = outer.outer_profile(SCH, s, xs)
    assert np.max(np.abs(got - vs)) < 1e-6
    ends = outer.outer_profile(SCH, s, [0.0, s.ell])
    assert ends[0] == pytest.approx(s.v0plus) and ends[1] == pytest.approx(s.mu)


def test_phase_diagram_labels(tmp_path):
    pd = outer.phase_diagram("schnakenberg", [0.2, 0.5, 1.5], [1.0])
    assert list(pd.labels[0]) == ["replication", "nucleation", "no_instability"]
    pd.to_csv(tmp_path / "pd.csv")
    pd.to_json(tmp_path / "pd.json")
    assert (tmp_path / "pd.csv").stat().st_size > 0
