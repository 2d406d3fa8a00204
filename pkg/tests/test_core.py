import numpy as np
import pytest

from spikelab import core, verify
from spikelab.errors import ConfigError, SpikeLabError


@pytest.fixture(scope="module")
def sch_fold():
    return core.fold_point("schnakenberg")


def test_schnakenberg_fold_golden(sch_fold):
    assert sch_fold.B == pytest.approx(1.34735, abs=2e-5)
    assert sch_fold.beta == pytest.approx(1.01548, abs=2e-5)
    assert sch_fold.solution.C == pytest.approx(0.246577, abs=2e-5)


def test_brusselator_fold_golden():
    fp = core.fold_point("brusselator", 0.95)
    assert fp.B == pytest.approx(0.244983, abs=2e-5)
    assert fp.solution.C == pytest.approx(1.36131, abs=1e-4)


def test_small_B_limit():
    s = core.solve_core("schnakenberg", B=1e-3)
    assert s.beta == pytest.approx(1.5, abs=1e-5)
    # U0 ~ B y + C in the far field with C ~ 3/B
    assert s.C == pytest.approx(3.0 / 1e-3, rel=1e-4)


@pytest.mark.parametrize("kind,f,B", [("schnakenberg", None, 0.5), ("schnakenberg", None, 1.2), ("brusselator", 0.8, 0.3)])
def test_flux_identity(kind, f, B):
    s = core.solve_core(kind, f, B=B)
    assert s.flux_integral() == pytest.approx(B, rel=1e-5)
    assert s.residual_norm < 1e-8
    assert s.tail_deviation < 1e-3


def test_beta_parameterization_matches_B():
    s = core.solve_core("schnakenberg", B=1.0)
    t = core.solve_core("schnakenberg", beta=s.beta)
    assert t.B == pytest.approx(1.0, abs=1e-7)
    assert t.C == pytest.approx(s.C, rel=1e-7)


def test_shooting_oracle_agrees():
    s = core.solve_core("schnakenberg", B=1.0)
    C, _ = verify.shoot_core_C("schnakenberg", B=1.0, guess=(s.V0[0], s.U0[0]))
    assert C == pytest.approx(s.C, rel=1e-3)


def test_solve_core_needs_exactly_one_parameter():
    with pytest.raises(ConfigError):
        core.solve_core("schnakenberg")
    with pytest.raises(ConfigError):
        core.solve_core("schnakenberg", B=1.0, beta=1.2)


def test_no_solution_beyond_fold():
    with pytest.raises(SpikeLabError):
        core.solve_core("schnakenberg", B=1.6)


def test_branch_contains_fold_and_is_ordered():
    br = core.continue_core_branch("schnakenberg")
    assert br.fold is not None
    assert br.fold.B == pytest.approx(1.34735, abs=1e-4)
    B_up, beta_up, _ = br.primary()
    assert np.all(beta_up >= br.fold.beta)
    assert np.max(br.B) <= br.fold.B + 1e-6
