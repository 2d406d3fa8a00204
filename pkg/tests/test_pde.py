import numpy as np
import pytest

from spikelab import discretization as disc
from spikelab import models, pde
from spikelab.errors import ConfigError, ResolutionExceeded

FAST = models.schnakenberg(0.2, 1.0, 0.04, 4.0)


def _bumps(x, centers, eps_L=0.01, height=40.0, base=0.2):
    v = np.full_like(x, base)
    for c in centers:
        v += height * np.exp(-(((x - c) / eps_L) ** 2))
    return v


@pytest.fixture
def params():
    x = np.linspace(-1.0, 1.0, 2001)
    return pde.count_params(models.schnakenberg(0.2, 1.0), x, 1.0)


@pytest.mark.parametrize(
    "centers,count",
    [([0.0], 1.0), ([-1.0], 0.5), ([-1.0, 1.0], 1.0), ([-0.5, 0.5], 2.0), ([-1.0, 0.0, 1.0], 2.0), ([], 0.0)],
)
def test_count_spikes_on_synthetic_fields(params, centers, count):
    c, locs = pde.count_spikes(_bumps(params.x, centers), params)
    assert c == count
    assert np.allclose(locs, sorted(centers), atol=2e-3)


def test_count_spikes_merges_close_humps(params):
    c, _ = pde.count_spikes(_bumps(params.x, [0.0, 0.02]), params)
    assert c == 1.0


def test_count_spikes_rejects_nan(params):
    with pytest.raises(ConfigError):
        pde.count_spikes(np.full(len(params.x), np.nan), params)


def _fake_traj(frames):
    model = models.schnakenberg(0.2, 1.0)
    cfg = pde.SimConfig(model, rho=1e-4, L0=1.0, L_end=1.5, n=4096)
    x = np.linspace(-1.0, 1.0, 2001)
    v = np.array([_bumps(x, c) for c in frames])
    k = len(frames)
    return pde.SimTrajectory(cfg, x, np.arange(k, dtype=float), np.linspace(1.0, 1.01, k), v, v.copy())


@pytest.mark.parametrize(
    "frames,kind",
    [
        ([[0.0], [-0.1, 0.1]], "Replication"),
        ([[0.0], [-1.0, 0.0, 1.0]], "Nucleation_boundary"),
        ([[-1.0, 1.0], [-1.0, 0.0, 1.0]], "Nucleation_interior"),
    ],
)
def test_event_classification(frames, kind):
    ev = pde.detect_events(_fake_traj(frames))
    assert ev.kinds() == [kind]


def test_config_validation():
    with pytest.raises(ConfigError):
        pde.SimConfig(FAST, rho=-1.0)
    with pytest.raises(ConfigError):
        pde.SimConfig(FAST, rho=0.0)
    with pytest.raises(ConfigError):
        pde.SimConfig(FAST, L0=2.0, L_end=1.0)
    with pytest.raises(ConfigError):
        pde.SimConfig(FAST, snapshot_dL=0.05)
    with pytest.raises(ConfigError):
        pde.SimConfig(FAST, init="from_steady")
    assert pde.SimConfig(models.schnakenberg(0.2, 1.0)).rho == pytest.approx(1e-4)


def test_resolution_guard():
    cfg = pde.SimConfig(models.schnakenberg(0.2, 1.0), L_end=4.5, n=256)
    with pytest.raises(ResolutionExceeded, match="n >= 2700"):
        pde.simulate_growing(cfg)


def test_spike_centers_layout():
    c, ell = pde.spike_centers(2, "interior")
    assert np.allclose(c, [0.0]) and ell == 1.0
    c, ell = pde.spike_centers(4, "interior")
    assert np.allclose(c, [-0.5, 0.5])
    c, _ = pde.spike_centers(3, "boundary")
    assert np.allclose(c, [-1.0, 1 / 3])
    with pytest.raises(ConfigError):
        pde.spike_centers(0)


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    ck = str(tmp_path_factory.mktemp("ck") / "run.npz")
    cfg = pde.SimConfig(FAST, rho=0.0016, L0=1.0, L_end=3.3, n=1024, checkpoint=ck)
    return cfg, pde.simulate_growing(cfg)


def test_short_growing_run_replicates(short_run):
    cfg, tr = short_run
    assert tr.min_v > 0 and tr.min_u > 0
    assert tr.L[0] == pytest.approx(1.0) and tr.L[-1] == pytest.approx(3.3)
    ev = list(tr.events)
    assert [e.kind for e in ev] == ["Replication"]
    assert ev[0].count_before == 1.0 and ev[0].count_after == 2.0
    assert 2.8 < ev[0].L < 3.1


def test_checkpoint_resume_is_identical(short_run):
    cfg, tr = short_run
    again = pde.simulate_growing(cfg)
    assert np.array_equal(again.v, tr.v)
    other = pde.SimConfig(FAST, rho=0.0016, L0=1.0, L_end=3.2, n=1024, checkpoint=cfg.checkpoint)
    with pytest.warns(UserWarning, match="different configuration"):
        pde._load_checkpoint(other)


def test_exports(short_run, tmp_path):
    _, tr = short_run
    pde.export_heatmap(tr, tmp_path / "h.csv")
    assert (tmp_path / "h.svg").exists()
    paths = pde.write_snapshots(tr, tmp_path / "snaps", stride=100)
    assert len(paths) == len(range(0, len(tr.t), 100))
    tr.events.to_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t,L,kind,count_before,count_after"


def test_static_run_keeps_homogeneous_state():
    model = models.schnakenberg(1.5, 1.0)
    g = disc.make_grid(640)
    v, u = models.homogeneous_state(model)
    z = np.concatenate([np.full(g.m, v), np.full(g.m, u)])
    cfg = pde.SimConfig(model, rho=0.0, L0=1.0, n=640, t_end=50.0, init="from_steady", init_state=z)
    tr = pde.simulate_growing(cfg)
    assert np.all(tr.L == 1.0)
    assert np.allclose(tr.v[-1], v, atol=1e-8) and np.allclose(tr.u[-1], u, atol=1e-8)
