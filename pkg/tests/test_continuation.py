import json
import warnings

import numpy as np
import pytest

from spikelab import continuation as cont
from spikelab import discretization as disc
from spikelab import models, pde

SCH = models.schnakenberg(0.2, 1.0)
FAST = models.schnakenberg(0.2, 1.0, 0.04, 4.0)


def test_steady_solve_converges_to_centred_spike():
    s = cont.steady_solve(SCH, 1.0, n=1024)
    F = disc.residual(SCH, s.grid, s.z, s.L)
    assert np.max(np.abs(F)) <= max(1e-9, 2 * disc.residual_floor(SCH, s.grid, s.z, s.L))
    assert int(np.argmax(s.v)) == 0
    assert s.v.min() > 0 and s.u.min() > 0


def test_relax_then_solve_gives_same_state():
    s = cont.steady_solve(SCH, 1.0, n=1024)
    t = cont.steady_solve(SCH, 1.0, init=s.z + 1e-6, n=1024)
    assert np.max(np.abs(t.z - s.z)) < 1e-6 * np.max(np.abs(s.z))


def test_one_spike_fold_and_lower_branch_stability():
    Lf, br = cont.one_spike_fold(SCH, n=1024, stability=True)
    # threshold from the outer theory is 1.9818
    assert Lf == pytest.approx(1.9818, rel=0.01)
    before = [p for p in br.points if p.L < Lf - 0.05]
    assert before and all(p.stability == "stable" for p in before)
    assert np.all(np.diff(br.L[: len(before)]) > 0)


def test_richardson_fold_extrapolates():
    L, Lc, Lf, _ = cont.richardson_fold(SCH, n=1024)
    assert L == pytest.approx(Lf + (Lf - Lc) / 3)
    assert abs(L - 1.9818) < abs(Lc - 1.9818) + 1e-3


@pytest.fixture(scope="module")
def atlas():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cont.multi_branch_atlas(FAST, (1.0, 3.5), 4, n=1024)


def test_atlas_branches_and_folds(atlas, tmp_path):
    ids = [b.branch_id for b in atlas]
    assert ids == ["k1", "k2", "k3", "k4"]
    # the k-th half-spike branch folds at k times the half-spike fold
    assert atlas[0].fold_L()[0] == pytest.approx(1.3993, abs=2e-3)
    assert atlas[1].fold_L()[0] == pytest.approx(2.7985, abs=2e-3)
    cont.write_atlas(atlas, tmp_path)
    meta = json.loads((tmp_path / "atlas.json").read_text())
    assert [b["half_spikes"] for b in meta["branches"]] == [1, 2, 3, 4]


def test_overlay_annotates_replication_jump(atlas, tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = pde.simulate_growing(pde.SimConfig(FAST, rho=0.0016, L0=1.0, L_end=3.3, n=1024))
    ov = cont.overlay(tr, atlas)
    jumps = [(r[2], r[5]) for r in ov.trajectory() if r[5]]
    assert len(jumps) == 1
    assert jumps[0][1] == "jump:Replication"
    assert 2.75 < jumps[0][0] < 3.0
    ov.to_csv(tmp_path / "ov.csv")
    assert (tmp_path / "ov.csv").read_text().startswith(",".join(cont.Overlay.COLUMNS))


def test_overlay_static_run_stays_on_one_branch(atlas):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = pde.simulate_growing(pde.SimConfig(FAST, rho=0.0, L0=2.0, n=1024, t_end=30.0, snapshot_dt=1.0))
    rows = cont.overlay(tr, atlas).trajectory()
    assert {r[1] for r in rows} == {"k2"}
    assert not any(r[5] for r in rows)
