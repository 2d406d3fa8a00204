"""Continuation of steady spike patterns in the half-length L.

Steady states solve F(z; L) = 0 with the operator of :mod:`spikelab.discretization`.
Branches are traced by pseudo-arclength continuation on the bordered system

    [ J    F_L ] [dz]   [-F]
    [ w t_z t_L ] [dL] = [-n]

where the arclength uses field components scaled by their branch-local RMS.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import discretization as disc
from .errors import (
    ConfigError,
    EigSolverFailure,
    MaxPointsExceeded,
    NewtonDiverged,
    SpikeLabError,
    StepFailure,
)
from .models import GM, ModelSpec

log = logging.getLogger(__name__)

RES_TOL = 1e-9
FOLD_TOL = 1e-3
STABLE, UNSTABLE, UNKNOWN = "stable", "unstable", "unknown"


@dataclass(frozen=True)
class SteadyState:
    """Immutable handle on a converged steady state."""

    model: ModelSpec
    L: float
    z: np.ndarray = field(repr=False)
    n: int = 2048
    symmetric: bool = True
    residual: float = 0.0

    @property
    def grid(self) -> disc.Grid:
        return disc.make_grid(self.n, self.symmetric)

    @property
    def v(self):
        return self.z[: self.grid.m]

    @property
    def u(self):
        return self.z[self.grid.m :]

    def measures(self):
        return measures(self.grid, self.z)


@dataclass(frozen=True)
class SteadyPoint:
    L: float
    state: SteadyState = field(repr=False)
    mu: float = math.nan
    u0v0: float = math.nan
    l2norm_v: float = math.nan
    stability: str = UNKNOWN
    max_re: float = math.nan
    drift_modes: int = 0
    tangent_L: float = math.nan
    det_sign: int = 0


@dataclass
class SteadyBranch:
    model: ModelSpec
    n: int
    symmetric: bool
    points: List[SteadyPoint] = field(default_factory=list)
    folds: List[tuple] = field(default_factory=list)  # (L_fold, point index)
    branch_points: List[dict] = field(default_factory=list)
    branch_id: str = "b0"
    parent: Optional[str] = None
    parent_point: Optional[int] = None
    label: str = ""
    half_spikes: Optional[int] = None

    @property
    def L(self):
        return np.array([p.L for p in self.points])

    def measure(self, name):
        return np.array([getattr(p, name) for p in self.points])

    def fold_L(self):
        return [f[0] for f in self.folds]

    def to_rows(self):
        fold_idx = {i for _, i in self.folds}
        for i, p in enumerate(self.points):
            yield [
                self.branch_id,
                f"{p.L:.10g}",
                f"{p.mu:.10g}",
                f"{p.u0v0:.10g}",
                f"{p.l2norm_v:.10g}",
                p.stability,
                int(i in fold_idx),
            ]

    def to_csv(self, path, header=True, mode="w"):
        with open(path, mode, newline="") as fh:
            wr = csv.writer(fh)
            if header:
                wr.writerow(BRANCH_COLUMNS)
            wr.writerows(self.to_rows())

    def summary(self):
        return {
            "branch_id": self.branch_id,
            "label": self.label,
            "parent": self.parent,
            "parent_point": self.parent_point,
            "n_points": len(self.points),
            "L_range": [float(self.L.min()), float(self.L.max())] if self.points else None,
            "folds": [{"L": float(L), "index": int(i)} for L, i in self.folds],
            "branch_points": self.branch_points,
            "half_spikes": self.half_spikes,
        }


BRANCH_COLUMNS = ["branch_id", "L", "measure_mu", "measure_u0v0", "l2norm_v", "stability", "is_fold"]


def measures(grid: disc.Grid, z):
    """(v(1), u(0) v(0), L2 norm of v over [-1, 1])."""
    m = grid.m
    v, u = z[:m], z[m:]
    i0 = int(np.argmin(np.abs(grid.x)))
    return float(v[-1]), float(u[i0] * v[i0]), float(math.sqrt(grid.weights() @ (v * v)))


# ---------------------------------------------------------------------------
# steady solves


def _newton(model, grid, z, L, tol=RES_TOL, maxit=40):
    F = disc.residual(model, grid, z, L)
    nrm = np.max(np.abs(F))
    tol = max(tol, disc.residual_floor(model, grid, z, L))
    for _ in range(maxit):
        if nrm < tol:
            return z, nrm
        J = disc.jacobian(model, grid, z, L)
        try:
            dz = spla.splu(J).solve(-F)
        except RuntimeError as exc:
            raise NewtonDiverged(f"singular Jacobian at L = {L:.6g}: {exc}") from None
        if np.max(np.abs(dz)) <= 1e-13 * np.max(np.abs(z)) and nrm < 10 * tol:
            return z, nrm  # stagnated at the roundoff floor
        lam = 1.0
        while lam > 1e-4:
            zn = z + lam * dz
            if np.all(zn[grid.m :] > 0) and (model.kind != GM or np.all(zn > 0)):
                Fn = disc.residual(model, grid, zn, L)
                nn = np.max(np.abs(Fn))
                if np.isfinite(nn) and nn < (1 - 1e-4 * lam) * nrm or nn < tol:
                    break
            lam *= 0.5
        else:
            raise NewtonDiverged(f"line search failed at L = {L:.6g} (|F| = {nrm:.3g})")
        z, F, nrm = zn, Fn, nn
    if nrm < tol:
        return z, nrm
    raise NewtonDiverged(f"no convergence at L = {L:.6g} after {maxit} iterations (|F| = {nrm:.3g})")


def relax(model, grid, z, L, t_end=200.0):
    """Pseudo-transient relaxation at fixed L (used when Newton cannot start)."""
    M = disc.mass(model, grid.m)
    res = solve_ivp(
        lambda t, y: disc.residual(model, grid, y, L) / M,
        (0.0, t_end),
        z,
        method="BDF",
        jac=lambda t, y: sp.diags(1.0 / M) @ disc.jacobian(model, grid, y, L),
        rtol=1e-6,
        atol=1e-8,
    )
    if res.status != 0:
        raise NewtonDiverged(f"relaxation failed: {res.message}")
    return res.y[:, -1]


def steady_solve(
    model: ModelSpec,
    L: float,
    init=None,
    *,
    K_spikes: float = 1,
    centers=None,
    n: int = 2048,
    symmetric: Optional[bool] = None,
    tol: float = RES_TOL,
) -> SteadyState:
    """Newton-converged steady state at half-length L.

    ``init`` is a SteadyState, a state vector, or None for a composite guess
    with ``K_spikes`` equally spaced spikes (``centers`` overrides the layout).
    """
    from .pde import composite_state, gaussian_seed

    if isinstance(init, SteadyState):
        n, symmetric, z0 = init.n, init.symmetric, init.z
    else:
        if centers is None:
            ell = 1.0 / K_spikes
            centers = -1.0 + ell + 2 * ell * np.arange(int(round(K_spikes)))
        else:
            centers = np.asarray(centers, float)
            ell = None
        if symmetric is None:
            symmetric = bool(np.allclose(np.sort(centers), np.sort(-centers)))
        grid = disc.make_grid(n, symmetric)
        if init is not None:
            z0 = np.asarray(init, float)
        else:
            if ell is None:
                gaps = np.diff(np.sort(centers))
                ell = float(gaps.min() / 2) if len(gaps) else 2.0
            z0 = None
            for mode in ("corrected", "leading"):
                try:
                    z0 = composite_state(model, grid, L, centers, ell, mode=mode)
                    break
                except SpikeLabError:
                    continue
            if z0 is None:
                z0 = gaussian_seed(model, grid, L, centers)
    grid = disc.make_grid(n, symmetric)
    if z0.shape != (2 * grid.m,):
        raise ConfigError(f"initial state has length {z0.shape}, expected {2 * grid.m}")
    try:
        z, r = _newton(model, grid, z0, L, tol)
    except NewtonDiverged:
        z, r = _newton(model, grid, relax(model, grid, z0, L), L, tol)
    return SteadyState(model, float(L), z, n, symmetric, float(r))


# ---------------------------------------------------------------------------
# stability


def _det_sign(lu) -> int:
    def parity(p):
        p = np.asarray(p)
        seen = np.zeros(len(p), bool)
        s = 1
        for i in range(len(p)):
            if not seen[i]:
                j, c = i, 0
                while not seen[j]:
                    seen[j] = True
                    j = p[j]
                    c += 1
                if c % 2 == 0:
                    s = -s
        return s

    d = lu.U.diagonal()
    return int(np.prod(np.sign(d)) * parity(lu.perm_r) * parity(lu.perm_c))


def branch_stability(state: SteadyState, k: int = 10, sigma: float = 0.2):
    """Rightmost eigenvalues of J x = lambda M x; returns (eigenvalues, flag, drift count)."""
    model, grid = state.model, state.grid
    J = disc.jacobian(model, grid, state.z, state.L)
    M = sp.diags(disc.mass(model, grid.m)).tocsc()
    N = J.shape[0]
    k = min(k, N - 2)
    try:
        lu = spla.splu((J - sigma * M).tocsc())
        op = spla.LinearOperator((N, N), matvec=lambda x: lu.solve(M @ x), dtype=float)
        v0 = np.random.default_rng(0).standard_normal(N)
        theta, _ = spla.eigs(op, k=k, which="LM", v0=v0, ncv=max(2 * k + 1, 30), tol=1e-10)
    except (RuntimeError, spla.ArpackError, spla.ArpackNoConvergence) as exc:
        raise EigSolverFailure(str(exc)) from None
    lam = sigma + 1.0 / theta
    lam = lam[np.argsort(-lam.real, kind="stable")]
    small = 1e-4 * model.epsilon
    drift = np.abs(lam) < small
    rest = lam[~drift]
    top = float(rest.real.max()) if len(rest) else -math.inf
    flag = STABLE if top < -1e-6 else UNSTABLE
    return lam, flag, int(drift.sum())


# ---------------------------------------------------------------------------
# pseudo-arclength


class _Tracer:
    def __init__(self, model, n, symmetric):
        self.model = model
        self.grid = disc.make_grid(n, symmetric)
        self.n, self.symmetric = n, symmetric
        m = self.grid.m
        self.N = 2 * m

    def scale(self, z):
        m = self.grid.m
        sv = math.sqrt(np.mean(z[:m] ** 2)) or 1.0
        su = math.sqrt(np.mean(z[m:] ** 2)) or 1.0
        return np.concatenate([np.full(m, sv), np.full(m, su)])

    def inner(self, S, a_z, a_L, b_z, b_L):
        return float(np.sum(a_z * b_z / S**2) / self.N + a_L * b_L)

    def bordered(self, z, L, S, t_z, t_L):
        J = disc.jacobian(self.model, self.grid, z, L)
        FL = disc.dF_dL(self.model, self.grid, z, L)
        row = (t_z / S**2 / self.N)[None, :]
        A = sp.bmat([[J, FL[:, None]], [sp.csr_matrix(row), sp.csr_matrix([[t_L]])]], format="csc")
        return spla.splu(A), J

    def tangent(self, z, L, S, prev=None):
        if prev is None:
            J = disc.jacobian(self.model, self.grid, z, L)
            FL = disc.dF_dL(self.model, self.grid, z, L)
            dz = spla.splu(J).solve(-FL)
            t_z, t_L = dz, 1.0
        else:
            lu, _ = self.bordered(z, L, S, *prev)
            rhs = np.zeros(self.N + 1)
            rhs[-1] = 1.0
            sol = lu.solve(rhs)
            t_z, t_L = sol[:-1], sol[-1]
        nrm = math.sqrt(self.inner(S, t_z, t_L, t_z, t_L))
        t_z, t_L = t_z / nrm, t_L / nrm
        if prev is not None and self.inner(S, t_z, t_L, *prev) < 0:
            t_z, t_L = -t_z, -t_L
        return t_z, t_L

    def correct(self, z0, L0, S, t, ds, tol=RES_TOL, maxit=12):
        t_z, t_L = t
        z, L = z0 + ds * t_z, L0 + ds * t_L
        tol = max(tol, disc.residual_floor(self.model, self.grid, z0, L0))
        for it in range(maxit):
            F = disc.residual(self.model, self.grid, z, L)
            g = self.inner(S, t_z, t_L, z - z0, L - L0) - ds
            nrm = np.max(np.abs(F))
            if nrm < tol and abs(g) < 1e-10:
                return z, L, it, nrm
            lu, _ = self.bordered(z, L, S, t_z, t_L)
            d = lu.solve(-np.concatenate([F, [g]]))
            z, L = z + d[:-1], L + d[-1]
            if not (np.all(np.isfinite(z)) and L > 0) or np.any(z[self.grid.m :] <= 0):
                return None
            if it > 3 and nrm > 1e3:
                return None
        F = disc.residual(self.model, self.grid, z, L)
        nrm = np.max(np.abs(F))
        return (z, L, maxit, nrm) if nrm < tol else None


def _point(state, t_L, stability=True):
    mu, uv, l2 = state.measures()
    flag, top, drift = UNKNOWN, math.nan, 0
    if stability:
        try:
            lam, flag, drift = branch_stability(state)
            top = float(lam[0].real)
        except EigSolverFailure as exc:
            log.warning("stability failed at L = %.5g: %s", state.L, exc)
    return SteadyPoint(state.L, state, mu, uv, l2, flag, top, drift, float(t_L))


def continue_in_L(
    model: ModelSpec,
    start: SteadyState,
    direction: int = 1,
    limits=(0.3, 8.0),
    *,
    ds: float = 0.02,
    ds_min: float = 1e-5,
    ds_max: float = 0.08,
    max_points: int = 600,
    stop_at_fold: Optional[int] = None,
    stability: bool = True,
    branch_id: str = "b0",
    raise_on_max: bool = False,
) -> SteadyBranch:
    """Trace the branch through ``start`` until L leaves ``limits``.

    Folds (sign changes of dL/ds) are refined to |dL| < 1e-3 and the trace
    carries on around them; ``stop_at_fold=k`` stops after the k-th fold.
    """
    if start.residual >= max(RES_TOL, disc.residual_floor(model, disc.make_grid(start.n, start.symmetric), start.z, start.L)):
        raise ConfigError("start is not a converged steady state")
    if direction not in (1, -1):
        raise ConfigError("direction must be +1 or -1")
    tr = _Tracer(model, start.n, start.symmetric)
    z, L = start.z.copy(), start.L
    S = tr.scale(z)
    t = tr.tangent(z, L, S)
    if t[1] * direction < 0:
        t = (-t[0], -t[1])
    branch = SteadyBranch(model, start.n, start.symmetric, branch_id=branch_id)
    lu, J = tr.bordered(z, L, S, *t)
    branch.points.append(_with_det(_point(start, t[1], stability), J))

    h = ds
    while len(branch.points) < max_points:
        got = tr.correct(z, L, S, t, h)
        if got is None or got[2] > 8:
            h *= 0.5
            if h < ds_min:
                raise StepFailure(f"step size underflow near L = {L:.6g}")
            continue
        zn, Ln, its, res = got
        Sn = tr.scale(zn)
        tn = tr.tangent(zn, Ln, Sn, prev=t)
        if tn[1] * t[1] < 0:
            # fold between the last point and this one
            Lf, zf, tf = _refine_fold(tr, z, L, S, t, h)
            st = SteadyState(model, Lf, zf, start.n, start.symmetric, _res(tr, zf, Lf))
            _, Jf = tr.bordered(zf, Lf, tr.scale(zf), *tf)
            branch.points.append(_with_det(_point(st, tf[1], stability), Jf))
            branch.folds.append((Lf, len(branch.points) - 1))
            if stop_at_fold and len(branch.folds) >= stop_at_fold:
                return branch
        st = SteadyState(model, Ln, zn, start.n, start.symmetric, res)
        _, Jn = tr.bordered(zn, Ln, Sn, *tn)
        pt = _with_det(_point(st, tn[1], stability), Jn)
        prev = branch.points[-1]
        if prev.det_sign and pt.det_sign and prev.det_sign != pt.det_sign and tn[1] * t[1] > 0:
            branch.branch_points.append(
                {"L": float(0.5 * (prev.L + pt.L)), "index": len(branch.points), "diagnostic": "det(J) sign change"}
            )
        branch.points.append(pt)
        z, L, S, t = zn, Ln, Sn, tn
        if not limits[0] <= L <= limits[1]:
            return branch
        h = min(h * 1.4, ds_max) if its <= 3 else (h * 0.7 if its > 6 else h)
    if raise_on_max:
        raise MaxPointsExceeded(f"{max_points} points without leaving {limits}")
    return branch


def _res(tr, z, L):
    return float(np.max(np.abs(disc.residual(tr.model, tr.grid, z, L))))


def _with_det(pt: SteadyPoint, J) -> SteadyPoint:
    try:
        sgn = _det_sign(spla.splu(J.tocsc()))
    except RuntimeError:
        sgn = 0
    return SteadyPoint(**{**pt.__dict__, "det_sign": sgn})


def _refine_fold(tr, z, L, S, t, h):
    """Bisect the arclength step until the bracketing points differ by < FOLD_TOL/10 in L."""
    lo, hi = 0.0, h
    t_lo = t
    pt_lo = (z, L)
    pt_hi = None
    t_hi = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        got = tr.correct(z, L, S, t, mid)
        if got is None:
            break
        zm, Lm = got[0], got[1]
        tm = tr.tangent(zm, Lm, tr.scale(zm), prev=t)
        if tm[1] * t[1] > 0:
            lo, t_lo, pt_lo = mid, tm, (zm, Lm)
        else:
            hi, t_hi, pt_hi = mid, tm, (zm, Lm)
        if pt_hi is not None and abs(pt_hi[1] - pt_lo[1]) < 0.1 * FOLD_TOL and hi - lo < 1e-3 * h:
            break
    if pt_hi is None:
        got = tr.correct(z, L, S, t, hi)
        pt_hi = (got[0], got[1])
        t_hi = tr.tangent(got[0], got[1], tr.scale(got[0]), prev=t)
    # L(s) is quadratic near the fold; dL/ds is interpolated linearly
    a, b = t_lo[1], t_hi[1]
    w = a / (a - b) if a != b else 0.5
    Lf = pt_lo[1] + 0.5 * a * w * (hi - lo)
    zf = pt_lo[0] + w * (pt_hi[0] - pt_lo[0])
    tf = (t_lo[0] + w * (t_hi[0] - t_lo[0]), 0.0)
    # Newton at fixed L is singular here; correct along the arc instead
    got = tr.correct(z, L, S, t, lo + w * (hi - lo))
    if got is not None:
        zf = got[0]
    return float(Lf), zf, tf


# ---------------------------------------------------------------------------
# drivers


def one_spike_fold(model: ModelSpec, *, n: int = 2048, L_start: Optional[float] = None, stability: bool = False):
    """First fold of the symmetric one-spike branch traced upward in L."""
    start = None
    guesses = [L_start] if L_start else [1.0, 0.8, 1.2, 0.6, 1.5, 2.0, 2.5, 3.0]
    for L0 in guesses:
        try:
            start = steady_solve(model, L0, n=n, symmetric=True)
            break
        except SpikeLabError:
            continue
    if start is None:
        raise NewtonDiverged("no converged one-spike state to start from")
    br = continue_in_L(model, start, +1, (0.2, 12.0), stop_at_fold=1, stability=stability)
    if not br.folds:
        return None, br
    return br.folds[0][0], br


def richardson_fold(model: ModelSpec, n: int = 2048, **kw):
    """Fold L on grids n/2 and n, extrapolated assuming second-order convergence."""
    Lc, _ = one_spike_fold(model, n=n // 2, **kw)
    Lf, br = one_spike_fold(model, n=n, **kw)
    if Lc is None or Lf is None:
        return None, Lc, Lf, br
    return Lf + (Lf - Lc) / 3.0, Lc, Lf, br


def multi_branch_atlas(
    model: ModelSpec,
    L_range=(0.5, 6.0),
    max_half_spikes: int = 4,
    *,
    n: int = 1024,
    phase: str = "interior",
    stability: bool = True,
    max_points: int = 400,
) -> List[SteadyBranch]:
    """One branch per half-spike count k = 1..max_half_spikes; failures are logged and skipped."""
    from .pde import spike_centers

    out = []
    for k in range(1, max_half_spikes + 1):
        centers, ell = spike_centers(k, phase)
        sym = bool(np.allclose(np.sort(centers), np.sort(-centers)))
        start = None
        for L0 in np.linspace(L_range[0], L_range[1], 23):
            try:
                start = steady_solve(model, L0, centers=centers, n=n, symmetric=sym)
                if _count_ok(model, start, centers):
                    break
                start = None
            except SpikeLabError:
                continue
        if start is None:
            log.warning("atlas: no start for %d half-spikes", k)
            continue
        try:
            up = continue_in_L(model, start, +1, L_range, stability=stability, max_points=max_points, branch_id=f"k{k}")
            down = continue_in_L(
                model, start, -1, L_range, stability=stability, max_points=max_points, branch_id=f"k{k}", stop_at_fold=1
            )
        except SpikeLabError as exc:
            log.warning("atlas: branch with %d half-spikes failed: %s", k, exc)
            continue
        br = _join(down, up)
        br.label = f"{k} half-spikes ({phase})"
        br.half_spikes = k
        out.append(br)
    return out


def _count_ok(model, state, centers):
    from .pde import count_params, count_spikes

    grid = state.grid
    c, _ = count_spikes(grid.full(state.v), count_params(model, grid.x_full(), state.L))
    expect = sum(0.5 if abs(abs(x) - 1) < 1e-9 else 1.0 for x in centers)
    return abs(c - expect) < 1e-9


def _join(down: SteadyBranch, up: SteadyBranch) -> SteadyBranch:
    pts = down.points[::-1] + up.points[1:]
    off = len(down.points) - 1
    folds = [(L, off - i) for L, i in down.folds] + [(L, off + i) for L, i in up.folds]
    bps = [{**b, "index": off - b["index"]} for b in down.branch_points] + [
        {**b, "index": off + b["index"]} for b in up.branch_points
    ]
    return SteadyBranch(
        up.model, up.n, up.symmetric, pts, sorted(folds, key=lambda f: f[1]), bps, up.branch_id
    )


def write_atlas(atlas: List[SteadyBranch], directory, manifest_extra=None):
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "branches.csv")
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(BRANCH_COLUMNS)
        for br in atlas:
            wr.writerows(br.to_rows())
    manifest = {"branches": [br.summary() for br in atlas], "csv": "branches.csv"}
    if atlas:
        manifest["model"] = atlas[0].model.to_dict()
        manifest["n"] = atlas[0].n
    manifest.update(manifest_extra or {})
    with open(os.path.join(directory, "atlas.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return csv_path


# ---------------------------------------------------------------------------
# overlay


@dataclass
class Overlay:
    rows: List[list]

    COLUMNS = ("source", "branch_id", "L", "l2norm_v", "stability", "annotation")

    def trajectory(self):
        return [r for r in self.rows if r[0] == "trajectory"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for r in self.rows:
                wr.writerow([r[0], r[1], f"{r[2]:.10g}", f"{r[3]:.10g}", r[4], r[5]])


def trajectory_norms(traj):
    x = traj.x
    w = np.full(len(x), x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.sqrt((traj.v**2) @ w)


JUMP_FACTOR = 5.0
JUMP_FLOOR = 2e-3  # relative to max ||v||_2; keeps smooth tracking noise from counting as a jump
COVER_DL = 0.05  # a branch covers L when it has a point this close in L
EVENT_WINDOW = (-0.1, 0.3)  # events lag the loss of a branch, so look ahead in L


def _branch_distance(br, L, N, scale):
    """(scaled planar distance, relative norm gap) to the nearest point of ``br``; gap is inf off-range."""
    d = np.hypot((br.L - L) / COVER_DL, (br.measure("l2norm_v") - N) / (COVER_DL * scale))
    j = int(np.argmin(d))
    gap = abs(br.points[j].l2norm_v - N) / scale if abs(br.points[j].L - L) < COVER_DL else math.inf
    return float(d[j]), float(gap)


def overlay(traj, atlas: List[SteadyBranch]) -> Overlay:
    """Trajectory and branch points in the (L, ||v||_2) plane with jump annotations.

    Each snapshot is tracked on one branch, preferring branches whose
    half-spike count matches the observed spike count.  A snapshot is a jump
    when the tracked branch no longer covers its L, or when its distance to
    that branch exceeds JUMP_FACTOR times the trailing median.
    """
    rows = []
    for br in atlas:
        for p in br.points:
            rows.append(["branch", br.branch_id, p.L, p.l2norm_v, p.stability, ""])
    norms = trajectory_norms(traj)
    counts = traj.counts()
    scale = max(float(np.max(norms)), 1e-12)
    events = list(traj.events)
    live = [br for br in atlas if br.points]

    def best(L, N, count):
        cover = [b for b in live if np.min(np.abs(b.L - L)) < COVER_DL] or live
        match = [b for b in cover if b.half_spikes == int(round(2 * count))] or cover
        return min(match, key=lambda b: _branch_distance(b, L, N, scale)[0])

    tracked, dists = None, []
    for L, N, count in zip(traj.L, norms, counts):
        if not live:
            rows.append(["trajectory", "", float(L), float(N), "", ""])
            continue
        if tracked is None:
            tracked = best(L, N, count)
        gap = _branch_distance(tracked, L, N, scale)[1]
        med = float(np.median(dists[-20:])) if dists else 0.0
        note = ""
        if not np.isfinite(gap) or (dists and gap > JUMP_FACTOR * max(med, JUMP_FLOOR)):
            new = best(L, N, count)
            if new is not tracked:
                near = [e for e in events if EVENT_WINDOW[0] <= e.L - L <= EVENT_WINDOW[1]]
                note = "jump:" + (near[0].kind if near else "unclassified")
                tracked = new
            gap = _branch_distance(tracked, L, N, scale)[1]
            dists = []
        elif tracked.half_spikes is not None and tracked.half_spikes != int(round(2 * count)):
            # the count settles after the jump; move to the matching branch without a new annotation
            new = best(L, N, count)
            if new is not tracked and new.half_spikes == int(round(2 * count)):
                tracked, dists = new, []
                gap = _branch_distance(tracked, L, N, scale)[1]
        if np.isfinite(gap):
            dists.append(gap)
        rows.append(["trajectory", tracked.branch_id, float(L), float(N), "", note])
    return Overlay(rows)
