"""Half-line core problems and their solution branch in (B, beta).

Schnakenberg::

    V'' - V + U V^2 = 0,      U'' - U V^2 = 0

Brusselator::

    V'' - V + f U V^2 = 0,    U'' + V - U V^2 = 0

on 0 <= y <= y_max with V'(0) = U'(0) = 0, V(y_max) = 0 and U'(y_max) = B.
Second-order central differences on a uniform grid; the Neumann/Robin rows use
ghost-point reflection so that the trapezoid sum of the U equation telescopes to
the exact flux identity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NewtonDiverged, NoSolution, StepFailure, TailNotLinear
from .models import BRUSSELATOR, SCHNAKENBERG

Y_MAX = 16.0
N_GRID = 3200
NEWTON_TOL = 1e-10
MAX_NEWTON = 50
TAIL_WINDOW = (0.8, 0.95)


def _check_kind(kind, f):
    kind = str(kind).lower()
    if kind not in (SCHNAKENBERG, BRUSSELATOR):
        raise ConfigError(f"core problem only defined for schnakenberg/brusselator, got {kind!r}")
    if kind == BRUSSELATOR:
        if f is None or not 0 < f < 1:
            raise ConfigError("Brusselator core needs 0 < f < 1")
        return kind, float(f)
    return kind, 1.0


@dataclass(frozen=True)
class CoreSolution:
    y: np.ndarray
    V0: np.ndarray
    U0: np.ndarray
    B: float
    C: float
    beta: float
    kind: str
    f: Optional[float]
    residual_norm: float
    tail_deviation: float

    @property
    def h(self) -> float:
        return self.y[1] - self.y[0]

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.V0, self.U0, [self.B]])

    def flux_integral(self) -> float:
        """(1 - f) int U V^2 dy (f = 0 for Schnakenberg) by the trapezoid rule."""
        w = np.full(len(self.y), self.h)
        w[0] = w[-1] = self.h / 2
        s = float(np.sum(w * self.U0 * self.V0**2))
        return s if self.kind == SCHNAKENBERG else (1 - self.f) * s

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["y", "V0", "U0"])
            for row in zip(self.y, self.V0, self.U0):
                wr.writerow([f"{x:.12g}" for x in row])


@dataclass(frozen=True)
class FoldPoint:
    B: float
    beta: float
    solution: CoreSolution


@dataclass(frozen=True)
class CoreBranch:
    kind: str
    f: Optional[float]
    B: np.ndarray
    beta: np.ndarray
    C: np.ndarray
    solutions: tuple = field(repr=False)
    fold: Optional[FoldPoint] = None

    @property
    def samples(self):
        return list(zip(self.B, self.beta, self.C, self.solutions))

    def primary(self):
        """Samples with beta above the fold (the stable upper branch)."""
        if self.fold is None:
            return self.B, self.beta, self.C
        m = self.beta >= self.fold.beta
        return self.B[m], self.beta[m], self.C[m]

    def to_csv(self, path):
        rows = [(b, be, c, False) for b, be, c in zip(self.B, self.beta, self.C)]
        if self.fold is not None:
            rows.append((self.fold.B, self.fold.beta, self.fold.solution.C, True))
            rows.sort(key=lambda r: -r[1])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["f", "B", "beta", "C", "is_fold"])
            fval = "" if self.f is None else f"{self.f:.12g}"
            for b, be, c, isf in rows:
                wr.writerow([fval, f"{b:.12g}", f"{be:.12g}", f"{c:.12g}", int(isf)])


class _Grid:
    def __init__(self, y_max, n):
        if y_max < 12 or n < 800:
            raise ConfigError("core grid needs y_max >= 12 and n >= 800")
        self.y = np.linspace(0.0, y_max, n)
        self.n = n
        self.h = self.y[1] - self.y[0]
        h2 = self.h**2
        lap = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
        lap[0, 1] = 2.0
        lap[n - 1, n - 2] = 2.0
        self.lap = (lap / h2).tocsr()
        # V(y_max) = 0 replaces the last V row
        keep = np.ones(n)
        keep[-1] = 0.0
        self.keep = keep
        self.lapV = (sp.diags(keep) @ self.lap).tocsr()


@lru_cache(maxsize=8)
def _grid(y_max, n):
    return _Grid(y_max, n)


def _residual(z, grid, kind, f, B=None, beta=None):
    n = grid.n
    V, U = z[:n], z[n : 2 * n]
    if B is None:
        B = z[2 * n]
    UV2 = U * V**2
    FV = grid.lapV @ V + grid.keep * (-V + f * UV2)
    FV[-1] = V[-1]
    FU = grid.lap @ U - UV2
    if kind == BRUSSELATOR:
        FU += V
    FU[-1] += 2 * B / grid.h
    out = [FV, FU]
    if beta is not None:
        out.append([U[0] * V[0] - beta])
    return np.concatenate(out)


def _jacobian_blocks(z, grid, kind, f):
    n = grid.n
    V, U = z[:n], z[n : 2 * n]
    keep = grid.keep
    JVV = grid.lapV + sp.diags(keep * (-1 + 2 * f * U * V)) + sp.diags(1 - keep)
    JVU = sp.diags(keep * f * V**2)
    dUV = -2 * U * V + (1.0 if kind == BRUSSELATOR else 0.0)
    JUV = sp.diags(dUV)
    JUU = grid.lap - sp.diags(V**2)
    return JVV, JVU, JUV, JUU


def _jacobian(z, grid, kind, f, pin_beta):
    n = grid.n
    JVV, JVU, JUV, JUU = _jacobian_blocks(z, grid, kind, f)
    top = sp.bmat([[JVV, JVU], [JUV, JUU]], format="csr")
    if not pin_beta:
        return top.tocsc()
    V, U = z[:n], z[n : 2 * n]
    col = sp.csr_matrix(([2 / grid.h], ([2 * n - 1], [0])), shape=(2 * n, 1))
    row = sp.csr_matrix(([U[0], V[0]], ([0, 0], [0, n])), shape=(1, 2 * n))
    return sp.bmat([[top, col], [row, None]], format="csc")


def _newton(z, grid, kind, f, B=None, beta=None, tol=NEWTON_TOL, maxit=MAX_NEWTON):
    """Newton on the full state (V, U, B); B is held fixed unless beta is pinned."""
    pin = beta is not None
    z = np.array(z, dtype=float)
    if not pin:
        z[-1] = B
    m = len(z) if pin else len(z) - 1
    history = []
    for _ in range(maxit):
        F = _residual(z, grid, kind, f, beta=beta)
        nrm = np.max(np.abs(F))
        if not np.isfinite(nrm):
            break
        if nrm < tol:
            return z, nrm
        history.append(nrm)
        # stagnation at the roundoff floor of the 1/h^2 stencil
        if len(history) >= 4 and nrm < 1e-7 and min(history[-4:-1]) <= 2 * nrm:
            return z, nrm
        J = _jacobian(z, grid, kind, f, pin)
        try:
            dz = spla.splu(J).solve(-F)
        except RuntimeError:
            break
        # the 1/h^2 stencil puts a roundoff floor on F; accept tiny Newton steps
        if np.max(np.abs(dz)) < 1e-11 * max(1.0, np.max(np.abs(z))):
            z[:m] += dz
            return z, nrm
        lam = 1.0
        while lam > 1e-3:
            zt = z.copy()
            zt[:m] += lam * dz
            Ft = _residual(zt, grid, kind, f, beta=beta)
            if np.all(np.isfinite(Ft)) and np.max(np.abs(Ft)) < max(nrm, tol) * 1.5 + 1e-14:
                break
            lam *= 0.5
        z[:m] += lam * dz
    raise NewtonDiverged(f"core Newton did not converge in {maxit} iterations")


def _seed(grid, kind, f, beta=None, B=None):
    """Small-B spike: U ~ const, V = (3 / (2 f Ubar)) sech^2(y/2)."""
    y = grid.y
    if B is None:
        B = 0.05
    # half-line flux of the sech^2 spike is 3 (1 - f) / (f^2 Ubar) (f = 1 for Schnakenberg)
    lossf = 1.0 if kind == SCHNAKENBERG else (1 - f)
    fs = 1.0 if kind == SCHNAKENBERG else f
    Ubar = 3 * lossf / (fs**2 * B)
    V = 1.5 / (fs * Ubar) / np.cosh(y / 2) ** 2
    # U' = B tanh-like ramp reaching slope B in the far field
    U = Ubar + B * (y - 2 * np.tanh(y / 2))
    return np.concatenate([V, U, [B]])


def _tail_fit(grid, U, B):
    y = grid.y
    ymax = y[-1]
    m = (y >= TAIL_WINDOW[0] * ymax) & (y <= TAIL_WINDOW[1] * ymax)
    r = U[m] - B * y[m]
    C = float(np.mean(r))
    return C, float(np.max(np.abs(r - C)))


def _pack(z, grid, kind, f, nrm):
    n = grid.n
    V, U, B = z[:n].copy(), z[n : 2 * n].copy(), float(z[2 * n])
    C, dev = _tail_fit(grid, U, B)
    return CoreSolution(
        y=grid.y,
        V0=V,
        U0=U,
        B=B,
        C=C,
        beta=float(U[0] * V[0]),
        kind=kind,
        f=None if kind == SCHNAKENBERG else f,
        residual_norm=float(nrm),
        tail_deviation=dev,
    )


def solve_core(kind, f=None, *, B=None, beta=None, y_max=Y_MAX, n=N_GRID, seed: Optional[CoreSolution] = None):
    """Solve the core problem at fixed B or fixed beta = U0(0) V0(0).

    With ``beta`` given, B is an extra unknown; this stays regular through the fold.
    Targeting B without a seed follows the primary branch from small B.
    """
    kind, fv = _check_kind(kind, f)
    if (B is None) == (beta is None):
        raise ConfigError("give exactly one of B or beta")
    grid = _grid(float(y_max), int(n))
    if seed is not None:
        z0 = _resample(seed, grid)
    else:
        z0 = None
    if beta is not None:
        if z0 is None:
            z0 = _march_beta(grid, kind, fv, beta)
            return _pack(z0, grid, kind, fv, np.max(np.abs(_residual(z0, grid, kind, fv, beta=beta))))
        z, nrm = _newton(z0, grid, kind, fv, beta=beta)
        return _pack(z, grid, kind, fv, nrm)
    B = float(B)
    if B <= 0:
        raise ConfigError("B must be positive")
    if z0 is None:
        branch = continue_core_branch(kind, f, y_max=y_max, n=n)
        if B > branch.fold.B:
            raise NoSolution(f"B = {B} exceeds the fold B_c = {branch.fold.B:.6f}")
        sols = [s for s in branch.solutions if branch.fold is None or s.beta >= branch.fold.beta]
        near = min(sols, key=lambda s: abs(s.B - B))
        try:
            z, nrm = _newton(_resample(near, grid), grid, kind, fv, B=B)
            return _pack(z, grid, kind, fv, nrm)
        except NewtonDiverged:
            pass
        Bp, bp, _ = branch.primary()
        order = np.argsort(Bp)
        beta_guess = float(np.interp(B, Bp[order], bp[order]))
        z0 = solve_core(kind, f, beta=beta_guess, y_max=y_max, n=n, seed=near).state
    try:
        z, nrm = _newton(z0, grid, kind, fv, B=B)
    except NewtonDiverged:
        raise NoSolution(f"no core solution found at B = {B}") from None
    return _pack(z, grid, kind, fv, nrm)


def _resample(sol: CoreSolution, grid):
    if len(sol.y) == grid.n and sol.y[-1] == grid.y[-1]:
        return sol.state.copy()
    V = np.interp(grid.y, sol.y, sol.V0, right=0.0)
    tail = sol.U0[-1] + sol.B * (grid.y - sol.y[-1])
    U = np.where(grid.y <= sol.y[-1], np.interp(grid.y, sol.y, sol.U0), tail)
    return np.concatenate([V, U, [sol.B]])


def _beta_limit(kind, f):
    return 1.5 if kind == SCHNAKENBERG else 1.5 / f


def _small_B_solution(grid, kind, f):
    B0 = 0.05 if kind == SCHNAKENBERG else 0.05 * (1 - f) / f**2
    z, _ = _newton(_seed(grid, kind, f, B=B0), grid, kind, f, B=B0)
    return z


def _march_beta(grid, kind, f, beta_target):
    """Reach beta_target from the small-B seed by natural continuation in beta."""
    z = _small_B_solution(grid, kind, f)
    b = float(z[0] * z[grid.n])
    step = -0.02 * _beta_limit(kind, f)
    while (beta_target - b) * np.sign(step) > 0 or abs(beta_target - b) > 1e-14:
        nxt = b + step
        if (beta_target - nxt) * np.sign(step) < 0:
            nxt = beta_target
        try:
            z_new, _ = _newton(z, grid, kind, f, beta=nxt)
        except NewtonDiverged:
            step *= 0.5
            if abs(step) < 1e-8:
                raise
            continue
        z, b = z_new, nxt
        if b == beta_target:
            break
        if beta_target > b and step < 0:
            step = -step
    return z


def _dB_dbeta(z, grid, kind, f, beta):
    J = _jacobian(z, grid, kind, f, True)
    rhs = np.zeros(2 * grid.n + 1)
    rhs[-1] = 1.0
    dz = spla.splu(J).solve(rhs)
    return float(dz[-1]), dz


def continue_core_branch(
    kind,
    f=None,
    beta_range=None,
    *,
    ds=0.02,
    ds_min=1e-6,
    ds_max=0.05,
    y_max=Y_MAX,
    n=N_GRID,
    fold_tol=1e-5,
):
    """Follow the single-spike branch in (B, beta) from small B through the fold.

    beta is the continuation parameter (it is monotone along the branch); the
    step is adapted to a target arclength in the (B, beta) plane.  The fold is
    the sign change of dB/dbeta, bisected until the bracket in B is below
    ``fold_tol``.
    """
    kind, fv = _check_kind(kind, f)
    return _continue_cached(kind, fv, None if beta_range is None else tuple(beta_range), ds, ds_min, ds_max, float(y_max), int(n), fold_tol)


@lru_cache(maxsize=64)
def _continue_cached(kind, f, beta_range, ds, ds_min, ds_max, y_max, n, fold_tol):
    grid = _grid(y_max, n)
    blim = _beta_limit(kind, f)
    if beta_range is None:
        z = _small_B_solution(grid, kind, f)
        beta = float(z[0] * z[grid.n])
        lo = 0.5 * blim
    else:
        hi, lo = beta_range
        z = _march_beta(grid, kind, f, hi)
        beta = hi
    dB, _ = _dB_dbeta(z, grid, kind, f, beta)
    pts = [(z, beta, dB)]
    h = ds
    fold = None
    while beta > lo:
        dbeta = h / math.sqrt(1 + dB**2)
        nb = max(beta - dbeta, lo)
        # secant predictor
        if len(pts) >= 2:
            (z1, b1, _), (z2, b2, _) = pts[-2], pts[-1]
            zp = z2 + (z2 - z1) * (nb - b2) / (b2 - b1)
        else:
            zp = z
        try:
            zn, _ = _newton(zp, grid, kind, f, beta=nb, maxit=15)
        except NewtonDiverged:
            h *= 0.5
            if h < ds_min:
                raise StepFailure("core continuation step underflow") from None
            continue
        dBn, _ = _dB_dbeta(zn, grid, kind, f, nb)
        if fold is None and dB < 0 <= dBn:
            fold = _refine_fold(grid, kind, f, pts[-1], (zn, nb, dBn), fold_tol)
        z, beta, dB = zn, nb, dBn
        pts.append((z, beta, dB))
        h = min(h * 1.3, ds_max)
    sols = tuple(_pack(p[0], grid, kind, f, 0.0) for p in pts)
    sols = tuple(
        _pack(p[0], grid, kind, f, np.max(np.abs(_residual(p[0], grid, kind, f, beta=p[1])))) for p in pts
    )
    return CoreBranch(
        kind=kind,
        f=None if kind == SCHNAKENBERG else f,
        B=np.array([s.B for s in sols]),
        beta=np.array([s.beta for s in sols]),
        C=np.array([s.C for s in sols]),
        solutions=sols,
        fold=fold,
    )


def _refine_fold(grid, kind, f, left, right, tol, maxit=40):
    (zl, bl, dl), (zr, br, dr) = left, right
    for _ in range(maxit):
        if abs(zl[-1] - zr[-1]) < tol and abs(bl - br) < 1e-6:
            break
        bm = 0.5 * (bl + br)
        zm, _ = _newton(0.5 * (zl + zr), grid, kind, f, beta=bm)
        dm, _ = _dB_dbeta(zm, grid, kind, f, bm)
        if np.sign(dm) == np.sign(dl):
            zl, bl, dl = zm, bm, dm
        else:
            zr, br, dr = zm, bm, dm
    # the maximum of B lies where dB/dbeta crosses zero: interpolate linearly
    t = dl / (dl - dr) if dl != dr else 0.5
    bf = bl + t * (br - bl)
    zf, nrm = _newton(zl + t * (zr - zl), grid, kind, f, beta=bf)
    sol = _pack(zf, grid, kind, f, nrm)
    return FoldPoint(B=sol.B, beta=sol.beta, solution=sol)


def farfield_constant(sol: CoreSolution, max_dev=1e-3):
    """C from the linear tail U0 ~ B y + C; returns (C, max deviation of the fit)."""
    grid = _Grid.__new__(_Grid)
    grid.y = sol.y
    C, dev = _tail_fit(grid, sol.U0, sol.B)
    if dev > max_dev:
        raise TailNotLinear(f"tail deviation {dev:.3g} > {max_dev:g}; increase y_max")
    return C, dev


def beta_derivative(kind, f, beta, *, dbeta=1e-4, y_max=Y_MAX, n=N_GRID, seed=None):
    """(V_0beta, U_0beta) by central differences of two nearby beta-pinned solves."""
    sp_ = solve_core(kind, f, beta=beta + dbeta, y_max=y_max, n=n, seed=seed)
    sm = solve_core(kind, f, beta=beta - dbeta, y_max=y_max, n=n, seed=seed)
    return (sp_.V0 - sm.V0) / (2 * dbeta), (sp_.U0 - sm.U0) / (2 * dbeta)


def bc_table(f_grid, *, y_max=Y_MAX, n=N_GRID):
    """Rows (f, B_c(f), C_b(B_c, f)) for the Brusselator core fold."""
    rows = []
    for f in f_grid:
        br = continue_core_branch(BRUSSELATOR, float(f), y_max=y_max, n=n)
        if br.fold is None:
            raise StepFailure(f"no fold found for f = {f}")
        rows.append((float(f), br.fold.B, br.fold.solution.C))
    return np.array(rows)


def fold_point(kind, f=None, *, seed: Optional[CoreSolution] = None, y_max=Y_MAX, n=N_GRID, tol=1e-5):
    """Fold (B_c, beta_c) by bisection on the sign of dB/dbeta.

    With ``seed`` (typically the fold at a nearby f) the bracket is searched
    around ``seed.beta`` instead of tracing the whole branch.
    """
    kind, fv = _check_kind(kind, f)
    if seed is None:
        br = continue_core_branch(kind, f, y_max=y_max, n=n, fold_tol=tol)
        if br.fold is None:
            raise StepFailure("branch has no fold")
        return br.fold
    grid = _grid(float(y_max), int(n))
    z0 = _resample(seed, grid)

    def probe(beta, z):
        z, _ = _newton(z, grid, kind, fv, beta=beta)
        d, _ = _dB_dbeta(z, grid, kind, fv, beta)
        return z, d

    b = seed.beta
    zc, dc = probe(b, z0)
    step = 0.02 * _beta_limit(kind, fv)
    # dB/dbeta < 0 above the fold (primary side), > 0 below
    direction = 1.0 if dc > 0 else -1.0
    zp, bp, dp = zc, b, dc
    for _ in range(60):
        bn = bp + direction * step
        zn, dn = probe(bn, zp)
        if np.sign(dn) != np.sign(dp):
            break
        zp, bp, dp = zn, bn, dn
        step *= 1.5
    else:
        raise StepFailure("could not bracket the fold")
    left, right = (zn, bn, dn), (zp, bp, dp)
    return _refine_fold(grid, kind, fv, left, right, tol)
