import numpy as np
import pytest

from spikelab import core, spectrum


@pytest.fixture(scope="module")
def fold_sol():
    return core.fold_point("schnakenberg").solution


def test_zero_eigenvalue_at_fold(fold_sol):
    e = spectrum.core_spectrum(fold_sol, n_eigs=2)
    assert abs(e.leading) < 1e-6
    assert e.eigenvalues[1].real < -0.1


def test_fold_mode_is_dimple(fold_sol):
    e = spectrum.core_spectrum(fold_sol, n_eigs=1)
    assert spectrum.dimple_similarity(fold_sol, e) > 0.99
    assert spectrum.fold_mode_residual(fold_sol) < 1e-3


def test_sparse_and_dense_agree():
    s = core.solve_core("schnakenberg", B=0.8, n=800)
    a = spectrum.core_spectrum(s, n_eigs=2, method="sparse")
    b = spectrum.core_spectrum(s, n_eigs=2, method="dense")
    assert np.allclose(np.sort(a.eigenvalues.real), np.sort(b.eigenvalues.real), atol=1e-8)


def test_primary_branch_is_stable_below_fold():
    s = core.solve_core("schnakenberg", B=1.0)
    e = spectrum.core_spectrum(s, n_eigs=1)
    assert e.leading.real < 0


def test_result_serializes(tmp_path, fold_sol):
    e = spectrum.core_spectrum(fold_sol, n_eigs=2)
    e.to_json(tmp_path / "e.json")
    e.modes_to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().startswith("y,Phi0,N0")
