"""Growing-domain simulations on x in [-1, 1] with L(t) = L0 exp(rho t).

Time stepping uses scipy's variable-order BDF with the analytic sparse
Jacobian from :mod:`spikelab.discretization`; snapshots are taken on an even
grid in L and the run can be checkpointed and resumed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import BDF
from scipy.signal import find_peaks

from . import discretization as disc
from .errors import ConfigError, ResolutionExceeded, SolverError, SpikeLabError, StepSizeUnderflow
from .models import BRUSSELATOR, GM, SCHNAKENBERG, ModelSpec

REPLICATION = "Replication"
NUC_BOUNDARY = "Nucleation_boundary"
NUC_INTERIOR = "Nucleation_interior"

MIN_CELLS = 6  # inner width eps_L must span at least this many cells


class AmbiguousEvent(UserWarning):
    """A count increase matched more than one classification rule."""


@dataclass
class SimConfig:
    model: ModelSpec
    rho: Optional[float] = None  # default eps^2
    L0: float = 1.0
    L_end: float = 4.5
    n: int = 4096
    dilution: bool = False
    init: str = "composite_one_spike"
    init_state: Optional[np.ndarray] = field(default=None, repr=False)
    snapshot_dL: float = 0.01
    t_end: Optional[float] = None  # only for rho = 0
    snapshot_dt: float = 10.0  # only for rho = 0
    symmetric: bool = True
    rtol: float = 1e-6
    atol: float = 1e-8
    checkpoint: Optional[str] = None
    checkpoint_every: float = 60.0

    def __post_init__(self):
        if self.rho is None:
            self.rho = self.model.epsilon**2
        if self.rho < 0:
            raise ConfigError("rho must be >= 0")
        if self.rho == 0 and not (self.t_end and self.t_end > 0):
            raise ConfigError("a static run (rho = 0) needs t_end > 0")
        if self.rho > 0 and not self.L_end > self.L0 > 0:
            raise ConfigError("need 0 < L0 < L_end")
        if self.init not in ("composite_one_spike", "gaussian_seed", "from_steady"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.init == "from_steady" and self.init_state is None:
            raise ConfigError("init 'from_steady' needs init_state")
        if not 0 < self.snapshot_dL <= 0.02:
            raise ConfigError("snapshot_dL must lie in (0, 0.02] so events are resolved")

    @property
    def L_max(self) -> float:
        return self.L0 if self.rho == 0 else self.L_end

    def L_of_t(self, t):
        return self.L0 * np.exp(self.rho * np.asarray(t))

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k not in ("model", "init_state")}
        d["model"] = self.model.to_dict()
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EventEntry:
    t: float
    L: float
    count_before: float
    count_after: float
    kind: str
    ambiguous: bool = False


@dataclass
class EventLog:
    entries: List[EventEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def kinds(self):
        return [e.kind for e in self.entries]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "L", "kind", "count_before", "count_after"])
            for e in self.entries:
                wr.writerow([f"{e.t:.10g}", f"{e.L:.10g}", e.kind, f"{e.count_before:g}", f"{e.count_after:g}"])


@dataclass
class SimTrajectory:
    config: SimConfig
    x: np.ndarray  # full-domain grid
    t: np.ndarray
    L: np.ndarray
    v: np.ndarray  # (snapshots, x) on the full domain
    u: np.ndarray
    min_v: float = math.inf
    min_u: float = math.inf
    wall_time: float = 0.0
    _events: Optional[EventLog] = field(default=None, repr=False)

    @property
    def snapshots(self):
        return list(zip(self.t, self.L, self.v, self.u))

    @property
    def events(self) -> EventLog:
        if self._events is None:
            self._events = detect_events(self)
        return self._events

    def counts(self):
        return [count_spikes(v, count_params(self.config.model, self.x, L))[0] for v, L in zip(self.v, self.L)]

    def state(self, k=-1):
        """Stored-grid state vector of snapshot k (for restarts and steady solves)."""
        grid = disc.make_grid(self.config.n, self.config.symmetric)
        off = len(self.x) - grid.m
        return np.concatenate([self.v[k][off:], self.u[k][off:]])


# ---------------------------------------------------------------------------
# initial data


def background(model: ModelSpec) -> float:
    """Outer-scale estimate used to separate spikes from the quiescent state."""
    if model.kind == GM:
        return max(2 * model.kappa, 1.0)
    return 2 * model.a


def gaussian_seed(model: ModelSpec, grid: disc.Grid, L: float, centers=(0.0,)):
    """Background plus Gaussian bumps of width 2 eps_L at ``centers``."""
    eL, DL = disc.scaled(model, L)
    c = np.atleast_1d(np.asarray(centers, dtype=float))
    bump = np.exp(-(((grid.x[:, None] - c[None, :]) / (2 * eL)) ** 2)).sum(axis=1)
    if model.kind == GM:
        sq = math.sqrt(DL)
        H0L = sq / 3.0 * math.tanh(1.0 / sq) / eL
        A = max(model.kappa, 1e-3) + 1.5 * H0L * bump
        return np.concatenate([A, np.full(grid.m, H0L)])
    amp = math.sqrt(DL) / eL
    v = model.a + 3.0 * amp * bump
    u = np.full(grid.m, 0.5 / amp)
    return np.concatenate([v, u])


def _outer_on(model, st, xs):
    from .outer import outer_profile

    ell = st.ell
    coarse = ell * np.concatenate([np.linspace(0.0, 0.9, 40), 1.0 - np.geomspace(0.1, 1e-4, 20), [1.0]])
    vals = outer_profile(model, st, coarse)
    return np.interp(xs, coarse, vals)


def spike_centers(k: int, phase: str = "interior"):
    """Centres and cell half-width of a pattern of k half-spikes on [-1, 1].

    ``phase="boundary"`` anchors spikes at x = -1; ``"interior"`` shifts them by
    one cell half-width.  Odd k always carries a single boundary half-spike.
    """
    if k < 1:
        raise ConfigError("need at least one half-spike")
    ell = 2.0 / k
    start = -1.0 if phase == "boundary" else -1.0 + ell
    if phase not in ("boundary", "interior"):
        raise ConfigError(f"unknown phase {phase!r}")
    c = start + 2 * ell * np.arange(k + 1)
    c = c[c <= 1.0 + 1e-12]
    return np.round(c, 14), ell


def composite_profile(model: ModelSpec, L: float, ell: float, dist, mode=None):
    """One-spike composite as a function of the distance to the spike centre."""
    from . import core
    from .outer import CORRECTED, gm_gamma, solve_quasi_equilibrium

    eL, DL = disc.scaled(model, L)
    st = solve_quasi_equilibrium(model, 1.0 / ell, L, mode=mode or CORRECTED)
    d = np.abs(np.asarray(dist, dtype=float))
    y = d / eL
    vout = _outer_on(model, st, d)
    if model.kind == GM:
        H0L = st.H0L
        gam = gm_gamma(model.kappa, H0L)
        q = 1 - 2 * gam
        A = vout + H0L * 1.5 * q / np.cosh(0.5 * math.sqrt(q) * y) ** 2
        H = vout**2 / (vout - model.kappa)
        return A, H
    f = None if model.kind == SCHNAKENBERG else model.f
    sol = core.solve_core(model.kind, f, B=st.B)
    s = math.sqrt(DL) / eL
    V = np.interp(y, sol.y, sol.V0, right=0.0)
    dU = np.interp(y, sol.y, sol.U0 - (sol.B * sol.y + sol.C), right=0.0)
    fs = 1.0 if model.kind == SCHNAKENBERG else model.f
    uout = (vout - model.a) / (fs * vout**2)
    return vout + s * V, np.maximum(uout + dU / s, 1e-12)


def composite_state(model: ModelSpec, grid: disc.Grid, L: float, centers, ell, mode=None):
    """Tile the one-spike composite over cells of half-width ell around ``centers``."""
    centers = np.asarray(centers, dtype=float)
    dist = np.min(np.abs(grid.x[:, None] - centers[None, :]), axis=1)
    v, u = composite_profile(model, L, ell, np.minimum(dist, ell), mode)
    return np.concatenate([v, u])


def composite_one_spike(model: ModelSpec, grid: disc.Grid, L: float):
    """Matched outer profile plus the inner core profile, centred at x = 0."""
    return composite_state(model, grid, L, [0.0], 1.0)


def initial_state(cfg: SimConfig, grid: disc.Grid):
    model = cfg.model
    if cfg.init == "from_steady":
        z = np.asarray(cfg.init_state, dtype=float)
        if z.shape != (2 * grid.m,):
            raise ConfigError(f"init_state must have length {2 * grid.m}")
        return z.copy()
    if cfg.init == "composite_one_spike":
        try:
            return composite_one_spike(model, grid, cfg.L0)
        except SpikeLabError as exc:
            warnings.warn(f"composite initial data unavailable ({exc}); using a Gaussian seed")
    return gaussian_seed(model, grid, cfg.L0)


# ---------------------------------------------------------------------------
# integration


def _check_resolution(cfg: SimConfig, grid: disc.Grid):
    eL = cfg.model.epsilon / cfg.L_max
    cells = eL / grid.h
    if cells < MIN_CELLS:
        need = int(math.ceil(MIN_CELLS * cfg.L_max / cfg.model.epsilon))
        raise ResolutionExceeded(
            f"eps_L = {eL:.3g} spans {cells:.2f} cells at L = {cfg.L_max:g}; use n >= {need}"
        )


def _snapshot_times(cfg: SimConfig):
    if cfg.rho == 0:
        k = int(math.floor(cfg.t_end / cfg.snapshot_dt + 1e-9))
        ts = list(np.arange(k + 1) * cfg.snapshot_dt)
        if ts[-1] < cfg.t_end:
            ts.append(cfg.t_end)
        return np.array(ts)
    k = int(math.floor((cfg.L_end - cfg.L0) / cfg.snapshot_dL + 1e-9))
    Ls = cfg.L0 + np.arange(k + 1) * cfg.snapshot_dL
    if Ls[-1] < cfg.L_end - 1e-12:
        Ls = np.append(Ls, cfg.L_end)
    return np.log(Ls / cfg.L0) / cfg.rho


def _load_checkpoint(cfg: SimConfig):
    if not cfg.checkpoint or not os.path.exists(cfg.checkpoint):
        return None
    data = np.load(cfg.checkpoint, allow_pickle=False)
    if str(data["digest"]) != cfg.digest():
        warnings.warn("checkpoint belongs to a different configuration; starting fresh")
        return None
    return {k: data[k] for k in data.files}


def _save_checkpoint(cfg: SimConfig, k, z, V, U, minv, minu):
    tmp = cfg.checkpoint + ".tmp.npz"
    np.savez(tmp, digest=cfg.digest(), k=k, z=z, V=np.array(V), U=np.array(U), minv=minv, minu=minu)
    os.replace(tmp, cfg.checkpoint)


def simulate_growing(cfg: SimConfig, progress=None) -> SimTrajectory:
    """Integrate M z_t = F(z; L(t)) - rho z (dilution optional) and record snapshots."""
    model = cfg.model
    grid = disc.make_grid(cfg.n, cfg.symmetric)
    _check_resolution(cfg, grid)
    M = disc.mass(model, grid.m)
    dil = cfg.rho if cfg.dilution else 0.0
    ts = _snapshot_times(cfg)

    def fun(t, z):
        return disc.residual(model, grid, z, cfg.L0 * math.exp(cfg.rho * t), dil) / M

    def jac(t, z):
        J = disc.jacobian(model, grid, z, cfg.L0 * math.exp(cfg.rho * t), dil)
        return (J.T.multiply(1.0 / M)).T.tocsc() if model.kind == GM else J

    ck = _load_checkpoint(cfg)
    if ck is not None:
        k0, z = int(ck["k"]), ck["z"]
        V, U = list(ck["V"]), list(ck["U"])
        minv, minu = float(ck["minv"]), float(ck["minu"])
    else:
        z = initial_state(cfg, grid)
        k0 = 0
        V, U = [grid.full(z[: grid.m])], [grid.full(z[grid.m :])]
        minv, minu = float(z[: grid.m].min()), float(z[grid.m :].min())

    start = time.monotonic()
    last_ck = start
    k = k0
    solver = BDF(fun, ts[k], z, ts[-1], jac=jac, rtol=cfg.rtol, atol=cfg.atol)
    while k < len(ts) - 1:
        msg = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(f"time stepper failed near L = {cfg.L_of_t(solver.t):.4f}: {msg}")
        y = solver.y
        if not np.all(np.isfinite(y)):
            raise SolverError("non-finite values in the solution")
        minv = min(minv, float(y[: grid.m].min()))
        minu = min(minu, float(y[grid.m :].min()))
        if ts[k + 1] <= solver.t:
            dense = solver.dense_output()
            while k < len(ts) - 1 and ts[k + 1] <= solver.t:
                k += 1
                zk = y if ts[k] == solver.t else dense(ts[k])
                V.append(grid.full(zk[: grid.m]))
                U.append(grid.full(zk[grid.m :]))
            if progress is not None:
                progress(ts[k], float(cfg.L_of_t(ts[k])))
        now = time.monotonic()
        if cfg.checkpoint and now - last_ck >= cfg.checkpoint_every:
            # resume restarts from the last snapshot, so store that state
            zk = np.concatenate([V[-1][-grid.m :], U[-1][-grid.m :]])
            _save_checkpoint(cfg, k, zk, V, U, minv, minu)
            last_ck = now
    if cfg.checkpoint and k0 < len(ts) - 1:
        _save_checkpoint(cfg, k, np.concatenate([V[-1][-grid.m :], U[-1][-grid.m :]]), V, U, minv, minu)
    return SimTrajectory(
        config=cfg,
        x=grid.x_full(),
        t=ts.copy(),
        L=cfg.L_of_t(ts),
        v=np.array(V),
        u=np.array(U),
        min_v=minv,
        min_u=minu,
        wall_time=time.monotonic() - start,
    )


# ---------------------------------------------------------------------------
# spike counting and events


@dataclass(frozen=True)
class CountParams:
    x: np.ndarray
    eps_L: float
    scale: float
    amp_factor: float = 3.0
    prominence_frac: float = 0.5
    boundary_cells: int = 3
    merge_widths: float = 10.0


def count_params(model: ModelSpec, x, L, **kw) -> CountParams:
    return CountParams(np.asarray(x), model.epsilon / L, background(model), **kw)


def count_spikes(v_field, params: CountParams):
    """Spike count (boundary spikes weigh 1/2) and the sorted spike locations."""
    v = np.asarray(v_field, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigError("field contains non-finite values")
    x = params.x
    n = len(v)
    # even reflection about both ends so that boundary maxima become interior peaks
    ext = np.concatenate([v[:0:-1], v, v[-2::-1]])
    peaks, props = find_peaks(ext, height=params.amp_factor * params.scale, prominence=0.0)
    keep = [
        (p - (n - 1), h)
        for p, h, pr in zip(peaks, props["peak_heights"], props["prominences"])
        if n - 1 <= p < 2 * n - 1 and pr > params.prominence_frac * h
    ]
    # humps closer than merge_widths * eps_L belong to one spike
    merged = []
    for i, hgt in sorted(keep):
        if merged and x[i] - x[merged[-1][0]] < params.merge_widths * params.eps_L:
            if hgt > merged[-1][1]:
                merged[-1] = (i, hgt)
            continue
        merged.append((i, hgt))
    locs = np.array([x[i] for i, _ in merged])
    count = 0.0
    for i, _ in merged:
        count += 0.5 if (i < params.boundary_cells or i >= n - params.boundary_cells) else 1.0
    return count, locs


def _classify(before, after, params: CountParams):
    """Rules fired by the maxima present after a count increase."""
    # greedy nearest matching of old maxima to new ones
    new = list(after)
    for b in before:
        if not new:
            break
        j = int(np.argmin([abs(a - b) for a in new]))
        if abs(new[j] - b) < params.merge_widths * params.eps_L:
            new.pop(j)
    xb = params.boundary_cells * (params.x[1] - params.x[0])
    kinds = set()
    for a in new:
        if abs(abs(a) - 1.0) <= xb:
            kinds.add(NUC_BOUNDARY)
        elif len(before) and np.min(np.abs(np.asarray(before) - a)) <= 15 * params.eps_L:
            kinds.add(REPLICATION)
        else:
            kinds.add(NUC_INTERIOR)
    # a split leaves no maximum at the old location
    if not kinds and len(after) > len(before):
        kinds.add(REPLICATION)
    return kinds


def detect_events(traj: SimTrajectory) -> EventLog:
    """Count increases between consecutive snapshots, classified by where the new maxima sit."""
    model = traj.config.model
    log = EventLog()
    prev = None
    for t, L, v in zip(traj.t, traj.L, traj.v):
        p = count_params(model, traj.x, L)
        c, locs = count_spikes(v, p)
        if prev is not None and c > prev[0]:
            kinds = _classify(prev[1], locs, p)
            order = [REPLICATION, NUC_BOUNDARY, NUC_INTERIOR]
            kind = next(k for k in order if k in kinds) if kinds else REPLICATION
            amb = len(kinds) > 1
            if amb:
                warnings.warn(f"event at L = {L:.4f} matches {sorted(kinds)}", AmbiguousEvent)
            log.entries.append(EventEntry(float(t), float(L), prev[0], c, kind, amb))
        prev = (c, locs)
    return log


# ---------------------------------------------------------------------------
# export


def export_heatmap(traj: SimTrajectory, path, *, svg=True, field_name="v"):
    """CSV matrix (rows = L, columns = x) and, optionally, an SVG raster next to it."""
    data = traj.v if field_name == "v" else traj.u
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["L"] + [f"{x:.8g}" for x in traj.x])
            for L, row in zip(traj.L, data):
                wr.writerow([f"{L:.8g}"] + [f"{w:.8g}" for w in row])
    except OSError as exc:
        raise OSError(f"cannot write heatmap to {path}: {exc}") from exc
    if svg:
        from .plotting import plot_heatmap

        plot_heatmap(traj.x, traj.L, data, os.path.splitext(str(path))[0] + ".svg", events=traj.events)
    return path


def write_snapshots(traj: SimTrajectory, directory, stride=1):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k in range(0, len(traj.t), stride):
        p = os.path.join(directory, f"snapshot_{k:05d}_L{traj.L[k]:.4f}.csv")
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "v", "u"])
            for x, v, u in zip(traj.x, traj.v[k], traj.u[k]):
                wr.writerow([f"{x:.8g}", f"{v:.10g}", f"{u:.10g}"])
        paths.append(p)
    return paths
