"""Outer problem, matching conditions and spike-generation thresholds.

Between spike cores the slow field satisfies ``D_L (g(v) v_x)_x = R(v)`` with
first integral ``G' = -R g``.  A one-spike quasi-equilibrium on ``|x| <= ell``
is fixed by two relations between the boundary value ``mu = v(ell)`` and the
core far-field slope ``B`` (or ``H0L`` for GM)::

    chi(mu; v0) = sqrt(2 / D_L) * ell
    (s B)^2     = 2 [G(mu) - G(v0)]          (s = f for Brusselator, 1 otherwise)

where ``v0 = v(0+)`` depends on the inner solution.  Thresholds follow from the
two ways the system stops having solutions: B reaching the core fold B_c
(replication) or mu reaching the edge 2a / 2 kappa of the well-posed range
(nucleation).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

from . import core
from .errors import (
    BracketFailure,
    ConfigError,
    DomainError,
    NoQuasiEquilibrium,
    PrefactorOutOfRange,
    QuadratureFailure,
    RegimeMismatch,
)
from .models import (
    BRUSSELATOR,
    GM,
    SCHNAKENBERG,
    ModelSpec,
    OuterReduction,
    Regime,
    classify_regime,
    outer_reduction,
)

QUAD_TOL = 1e-10
JOINT_TOL = 1e-8
TABLE_SAMPLES = 200
LEADING = "leading"
CORRECTED = "corrected"


# ---------------------------------------------------------------------------
# C(B) from the core branch


@dataclass(frozen=True)
class CTable:
    """Primary-branch samples of (beta, B, C) with the fold at the first entry."""

    kind: str
    f: Optional[float]
    beta: np.ndarray
    B: np.ndarray
    C: np.ndarray
    c_inf: float

    @property
    def B_c(self) -> float:
        return float(self.B[0])

    @property
    def C_c(self) -> float:
        return float(self.C[0])

    @property
    def beta_c(self) -> float:
        return float(self.beta[0])

    def __post_init__(self):
        object.__setattr__(self, "_B_of_beta", CubicSpline(self.beta, self.B))
        object.__setattr__(self, "_C_of_beta", CubicSpline(self.beta, self.C))

    def beta_of_B(self, B):
        if B >= self.B_c:
            return self.beta_c
        if B <= self.B[-1]:
            return float(self.beta[-1])
        return optimize.brentq(lambda b: self._B_of_beta(b) - B, self.beta[0], self.beta[-1], xtol=1e-14)

    def C_of_B(self, B):
        """C on the primary branch; clamps at the fold and uses C ~ c_inf/B below the table."""
        B = float(B)
        if B <= 0:
            return math.inf
        if B >= self.B_c:
            return self.C_c
        if B < self.B[-1]:
            return float(self.C[-1]) + self.c_inf * (1.0 / B - 1.0 / self.B[-1])
        return float(self._C_of_beta(self.beta_of_B(B)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["beta", "B", "C"])
            for row in zip(self.beta, self.B, self.C):
                wr.writerow([f"{x:.12g}" for x in row])


@lru_cache(maxsize=32)
def c_table(kind, f=None, n_samples=TABLE_SAMPLES) -> CTable:
    """Tabulate C(B) on the primary core branch, from the fold up to small B."""
    br = core.continue_core_branch(kind, f)
    fold = br.fold
    # beta-pinned solves are ill-conditioned as beta -> beta(B=0); stop near B = B_c / 10
    prim = [s for s in br.solutions if s.beta > fold.beta]
    top = min(prim, key=lambda s: abs(s.B - 0.1 * fold.B))
    # uniform in arclength of the (B, beta) curve
    pts = sorted([(fold.beta, fold.B)] + [(s.beta, s.B) for s in prim if s.beta <= top.beta])
    pb, pB = np.array(pts).T
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(pb), np.diff(pB)))])
    betas = np.interp(np.linspace(0.0, arc[-1], n_samples), arc, pb)
    sols = [fold.solution]
    for b in betas[1:]:
        sols.append(core.solve_core(kind, f, beta=float(b), seed=sols[-1]))
    fs = 1.0 if kind == SCHNAKENBERG else f
    loss = 1.0 if kind == SCHNAKENBERG else 1 - f
    return CTable(
        kind=kind,
        f=None if kind == SCHNAKENBERG else f,
        beta=np.array([s.beta for s in sols]),
        B=np.array([s.B for s in sols]),
        C=np.array([s.C for s in sols]),
        c_inf=3 * loss / fs**2,
    )


def _table_for(model: ModelSpec) -> CTable:
    if model.kind == SCHNAKENBERG:
        return c_table(SCHNAKENBERG)
    if model.kind == BRUSSELATOR:
        return c_table(BRUSSELATOR, float(model.f))
    raise ConfigError("GM has no core-branch table")


def fold_B(model: ModelSpec) -> float:
    if model.kind == GM:
        return math.inf
    return _table_for(model).B_c


# ---------------------------------------------------------------------------
# chi


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _chi_proper(red: OuterReduction, mu, v0, gap=None):
    if mu <= v0:
        return 0.0
    Gmu = red.G(mu)
    top = Gmu - red.G(v0)
    if top < 0:
        raise DomainError("G(mu) < G(v0): mu is below the inner value")
    boundary = -2.0 * math.sqrt(top) / red.R(v0)
    if red.v_infty is None:
        return boundary + 2.0 * _chi_plain(red, mu, v0, Gmu)
    if gap is None:
        gap = red.v_infty - mu
    return boundary + 2.0 * _chi_layer(red, mu, v0, Gmu, gap)


def _check_quad(val, err):
    if not np.isfinite(val) or err > QUAD_TOL * max(1.0, abs(val)):
        raise QuadratureFailure(f"chi quadrature error {err:.3g} exceeds tolerance")
    return val


def _chi_plain(red, mu, v0, Gmu):
    def integrand(xi):
        d = Gmu - red.G(xi)
        return math.sqrt(d if d > 0 else 0.0) * red.Rp(xi) / red.R(xi) ** 2

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, v0, mu, epsabs=1e-13, epsrel=1e-12, limit=500)
    return _check_quad(val, err)


def _chi_layer(red, mu, v0, Gmu, delta):
    # xi = mu - s, s = delta (e^w - 1): the R^-2 layer of width delta at s = 0
    # and the 1/s decay beyond it both become O(1) in w
    S = mu - v0
    near = 0.1 * S

    def dG(s):
        if s > near:
            return Gmu - red.G(mu - s)
        u = 0.5 * s * (_GL_NODES + 1.0)
        # the gap comes from the exact offset u, not from the rounded node mu - u
        Gp = -red.R_gap(mu - u, delta + u) * red.g(mu - u)
        return 0.5 * s * float(np.dot(_GL_WEIGHTS, Gp))

    def integrand(w):
        e = math.exp(w)
        s = delta * (e - 1.0)
        xi = mu - s
        d = dG(s)
        R = float(red.R_gap(xi, delta + s))
        return math.sqrt(d if d > 0 else 0.0) * float(red.Rp(xi)) / R**2 * delta * e

    w_max = math.log1p(S / delta)
    pts = [w for w in np.arange(1.0, w_max, 2.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            integrand, 0.0, w_max, epsabs=1e-13, epsrel=1e-12, limit=1000, points=pts[:200] or None
        )
    return _check_quad(val, err)


def _check_chi_args(red, mu, v0):
    if not red.wellposed_lo < v0 or mu > red.wellposed_hi * (1 + 1e-12):
        raise DomainError(f"need {red.wellposed_lo} < v0 < mu <= {red.wellposed_hi}")
    if mu < v0:
        raise DomainError("need mu >= v0plus")
    if red.v_infty is not None and mu >= red.v_infty:
        raise DomainError("mu must stay below the homogeneous state")


def chi(model: ModelSpec, mu, v0plus):
    """Proper (integrated-by-parts) form of the chi quadrature."""
    red = outer_reduction(model)
    _check_chi_args(red, mu, v0plus)
    return _chi_proper(red, float(mu), float(v0plus))


def chi_singular(model: ModelSpec, mu, v0plus):
    """chi from the original improper integral, with xi = mu - s^2 at the endpoint."""
    red = outer_reduction(model)
    _check_chi_args(red, mu, v0plus)
    nodes, weights = np.polynomial.legendre.leggauss(24)

    def dG(s):
        # G(mu) - G(mu - s^2) by Gauss-Legendre on G' (avoids cancellation)
        lo, hi = mu - s * s, mu
        x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        return 0.5 * (hi - lo) * float(np.dot(weights, red.Gp(x)))

    def integrand(s):
        if s == 0.0:
            s = 1e-300
        d = dG(s)
        if d <= 0:
            return 0.0
        return 2 * s * red.g(mu - s * s) / math.sqrt(d)

    smax = math.sqrt(mu - v0plus)
    val, err = integrate.quad(integrand, 0.0, smax, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


# ---------------------------------------------------------------------------
# inner values


def inner_value(model: ModelSpec, B, mode=CORRECTED, table: Optional[CTable] = None):
    """v(0+) for Schnakenberg / Brusselator given the core slope B."""
    a = model.a
    if mode == LEADING:
        return a
    table = table or _table_for(model)
    C = table.C_of_B(B)
    s = 1.0 if model.kind == SCHNAKENBERG else model.f
    return a + a * a * C * s * model.ratio


def gm_gamma(kappa, H0L):
    return 0.5 * (1 - math.sqrt(1 - 4 * kappa / H0L))


def gm_inner_value(model: ModelSpec, H0L):
    if not H0L > 4 * model.kappa:
        raise DomainError("need H0L > 4 kappa")
    return gm_gamma(model.kappa, H0L) * H0L


def gm_H0L(model: ModelSpec, mu, red: Optional[OuterReduction] = None):
    """Large root H0L of the GM flux matching condition at boundary value mu."""
    red = red or outer_reduction(model)
    k, r = model.kappa, model.ratio

    def F(H):
        gam = gm_gamma(k, H)
        A0 = gam * H
        if A0 >= mu:
            return math.nan
        lhs = 3 * H * H * r * math.sqrt(1 - 2 * gam) / math.sqrt(2)
        return lhs - math.sqrt(red.G(mu) - red.G(A0))

    H_hi = 4 * k * 10.0 + 10.0 / r
    while F(H_hi) <= 0:
        H_hi *= 4
        if H_hi > 1e15:
            raise BracketFailure("GM flux condition: no large root")
    grid = np.geomspace(4 * k * (1 + 1e-9), H_hi, 400)
    for H_lo, H_up in zip(grid[-2::-1], grid[:0:-1]):
        v = F(H_lo)
        if not v > 0:
            break
    else:
        raise NoQuasiEquilibrium("GM flux condition has no root below the large-H branch", "gm_flux")
    if math.isnan(v):
        # the root sits next to the invalid region: shrink toward it
        lo, hi = H_lo, H_up
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = F(mid)
            if math.isnan(fm):
                lo = mid
            elif fm > 0:
                hi = mid
            else:
                H_lo = mid
                break
        else:
            raise NoQuasiEquilibrium("GM flux condition: root not bracketed", "gm_flux")
    return optimize.brentq(F, H_lo, H_up, xtol=1e-13, rtol=1e-15, maxiter=200)


# ---------------------------------------------------------------------------
# quasi-equilibria


@dataclass(frozen=True)
class OuterSolve:
    kind: str
    mu: float
    B: Optional[float]
    v0plus: float
    ell: float
    D_L: float
    H0L: Optional[float] = None
    converged: bool = True
    regime_hit: Optional[str] = None
    mode: str = CORRECTED

    def to_dict(self):
        return asdict(self)


def _fs(model):
    return model.f if model.kind == BRUSSELATOR else 1.0


class _Matcher:
    """mu -> (slow inner unknown, v0) for one model, with its own bookkeeping."""

    def __init__(self, model: ModelSpec, mode=CORRECTED):
        self.model = model
        self.red = outer_reduction(model)
        self.mode = mode if model.kind != GM else CORRECTED
        self.table = _table_for(model) if model.kind != GM and mode == CORRECTED else None
        self.fs = _fs(model)

    def B_of(self, mu):
        """Largest fixed point of B = sqrt(2 [G(mu) - G(v0(B))]) / fs, or None."""
        red, fs = self.red, self.fs
        Gmu = red.G(mu)
        a = self.model.a
        d = Gmu - red.G(a * (1 + 1e-15)) if self.mode == CORRECTED else Gmu - red.G(a)
        if d <= 0:
            return None
        B = math.sqrt(2 * d) / fs
        if self.mode == LEADING:
            return B, a

        def F(x):
            v0 = inner_value(self.model, x, self.mode, self.table)
            if v0 >= mu or v0 >= red.wellposed_hi:
                return None
            dd = Gmu - red.G(v0)
            return math.sqrt(2 * dd) / fs if dd > 0 else None

        # monotone decreasing iteration from above; converges to the largest root
        for _ in range(60):
            Bn = F(B)
            if Bn is None:
                return None
            if abs(Bn - B) <= 1e-13 * max(1.0, B):
                return Bn, inner_value(self.model, Bn, self.mode, self.table)
            B = Bn
        # slow near a saddle-node of fixed points: bracket F(x) - x below B
        for q in np.geomspace(1.0 - 1e-9, 1e-3, 80):
            x = B * q
            Fx = F(x)
            if Fx is None:
                return None
            if Fx >= x:
                break
        else:
            return None
        root = optimize.brentq(lambda x: F(x) - x, x, B, xtol=1e-15, rtol=1e-15, maxiter=200)
        return root, inner_value(self.model, root, self.mode, self.table)

    def state(self, mu):
        if self.model.kind == GM:
            try:
                H = gm_H0L(self.model, mu, self.red)
            except (NoQuasiEquilibrium, BracketFailure):
                return None
            return H, gm_inner_value(self.model, H)
        return self.B_of(mu)

    def chi_at(self, mu, gap=None):
        st = self.state(mu)
        if st is None:
            return None
        return _chi_proper(self.red, mu, st[1], gap), st

    def mu_rep(self):
        """mu at which B reaches the core fold (None if beyond the well-posed range)."""
        if self.model.kind == GM:
            return None
        Bc = self.table.B_c if self.table is not None else fold_B(self.model)
        v0 = inner_value(self.model, Bc, self.mode, self.table)
        target = self.red.G(v0) + 0.5 * (self.fs * Bc) ** 2
        hi = self.red.mu_upper
        if self.red.v_infty is not None:
            hi = self.red.v_infty * (1 - 1e-15)
        if self.red.G(hi) < target:
            return None
        return optimize.brentq(lambda m: self.red.G(m) - target, v0, hi, xtol=1e-15, rtol=1e-15)

    def mu_lowest(self, mu_top):
        """Smallest mu with a matching inner state (bisection on existence)."""
        lo = self.red.wellposed_lo * (1 + 1e-12)
        if self.state(lo) is not None:
            return lo
        hi = mu_top
        if self.state(hi) is None:
            return None
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self.state(mid) is None:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14 * hi:
                break
        return hi


def _pack_solve(model, m: _Matcher, mu, st, ell, D_L, hit):
    if model.kind == GM:
        return OuterSolve(model.kind, mu, None, st[1], ell, D_L, H0L=st[0], regime_hit=hit, mode=m.mode)
    return OuterSolve(model.kind, mu, st[0], st[1], ell, D_L, regime_hit=hit, mode=m.mode)


def solve_quasi_equilibrium(model: ModelSpec, K=1, L=None, *, D_L=None, mode=CORRECTED) -> OuterSolve:
    """One-spike quasi-equilibrium on |x| <= 1/K at half-length L (or D_L = D/L^2).

    K may be a half-integer: a pattern of k half-spikes uses cells of half-width 2/k.

    Solved as a scalar root in mu: for each mu the inner unknown (B or H0L) is
    fixed by the flux condition, and chi(mu) - sqrt(2/D_L) ell is bracketed.
    """
    if not (K >= 1 or K == 0.5):
        # K = 1/2 is a lone boundary half-spike on a cell of half-width 2
        raise ConfigError("K must be >= 1 (or 1/2 for a boundary half-spike)")
    if (L is None) == (D_L is None):
        raise ConfigError("give exactly one of L or D_L")
    D_L = model.D / L**2 if D_L is None else float(D_L)
    if not D_L > 0:
        raise ConfigError("D_L must be positive")
    ell = 1.0 / K
    T = math.sqrt(2.0 / D_L) * ell
    m = _Matcher(model, mode)
    red = m.red

    hit = None
    if red.v_infty is not None:
        mu_top, constraint = None, None
    else:
        mu_top, constraint = red.wellposed_hi, "nucleation"
    mr = m.mu_rep()
    if mr is not None and (mu_top is None or mr < mu_top):
        mu_top, constraint = mr, "replication"

    if mu_top is None:
        return _solve_unbounded(model, m, T, ell, D_L)

    top = m.chi_at(mu_top)
    if top is None:
        raise NoQuasiEquilibrium("no inner state at the top of the mu range", constraint)
    if top[0] < T:
        raise NoQuasiEquilibrium(
            f"chi at the {constraint} limit is {top[0]:.6g} < sqrt(2/D_L) ell = {T:.6g}", constraint
        )
    lo = m.mu_lowest(mu_top)
    bot = m.chi_at(lo)
    if bot[0] > T:
        raise NoQuasiEquilibrium("L is below the range where the inner correction is consistent", "small_L")

    def phi(mu):
        c = m.chi_at(mu)
        return (c[0] if c is not None else 0.0) - T

    mu = optimize.brentq(phi, lo, mu_top, xtol=1e-15, rtol=1e-15, maxiter=300)
    st = m.state(mu)
    if abs(top[0] - T) <= JOINT_TOL * T:
        hit = constraint
    return _pack_solve(model, m, mu, st, ell, D_L, hit)


def _solve_unbounded(model, m: _Matcher, T, ell, D_L):
    # mu -> v_infty sends chi to +infinity; work in t = -log(v_infty - mu)
    vinf = m.red.v_infty
    lo = m.mu_lowest(vinf * (1 - 1e-9))
    if lo is None:
        raise NoQuasiEquilibrium("no inner state below the homogeneous state", "small_L")
    bot = m.chi_at(lo)
    if bot[0] > T:
        raise NoQuasiEquilibrium("L is below the range where the inner correction is consistent", "small_L")
    t_lo = -math.log(vinf - lo)
    t_hi = -math.log(vinf * 1e-14)

    def phi(t):
        c = m.chi_at(vinf - math.exp(-t), math.exp(-t))
        return (c[0] if c is not None else 0.0) - T

    if phi(t_hi) < 0:
        raise NoQuasiEquilibrium("chi does not reach the target before double-precision resolution", "resolution")
    t = optimize.brentq(phi, t_lo, t_hi, xtol=1e-13, maxiter=300)
    mu = vinf - math.exp(-t)
    return _pack_solve(model, m, mu, m.state(mu), ell, D_L, None)


def chi_of_mu(model: ModelSpec, mu, mode=CORRECTED):
    """chi along the matched family: v0 follows mu through the flux condition."""
    c = _Matcher(model, mode).chi_at(mu)
    if c is None:
        raise NoQuasiEquilibrium(f"no matched inner state at mu = {mu}", "small_L")
    return c[0]


def B_of_mu(model: ModelSpec, mu, mode=CORRECTED):
    st = _Matcher(model, mode).state(mu)
    if st is None:
        raise NoQuasiEquilibrium(f"no matched inner state at mu = {mu}", "small_L")
    return st[0]


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class ThresholdResult:
    K: int
    kind: str
    D_L_crit: float
    L_crit: float
    mu_at_crit: float
    B_at_crit: Optional[float]
    method: str
    model: dict = field(default_factory=dict)
    v0plus: Optional[float] = None
    H0L: Optional[float] = None

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


THRESHOLD_COLUMNS = ["model", "params", "K", "kind", "D_L_crit", "L_crit", "mu_at_crit", "B_at_crit", "H0L", "method"]


def thresholds_to_csv(results, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(THRESHOLD_COLUMNS)
        for r in results:
            params = ";".join(f"{k}={v:g}" for k, v in sorted(r.model.get("params", {}).items()))
            wr.writerow(
                [
                    r.model.get("kind", ""),
                    params,
                    r.K,
                    r.kind,
                    f"{r.D_L_crit:.12g}",
                    f"{r.L_crit:.12g}",
                    f"{r.mu_at_crit:.12g}",
                    "" if r.B_at_crit is None else f"{r.B_at_crit:.12g}",
                    "" if r.H0L is None else f"{r.H0L:.12g}",
                    r.method,
                ]
            )


def _result(model, K, kind, chi_val, mu, B, method, v0=None, H0L=None):
    D_L = 2.0 / (K * K * chi_val * chi_val)
    L = math.sqrt(model.D / 2.0) * K * chi_val
    return ThresholdResult(
        K=K,
        kind=kind,
        D_L_crit=D_L,
        L_crit=L,
        mu_at_crit=mu,
        B_at_crit=B,
        method=method,
        model=model.to_dict(),
        v0plus=v0,
        H0L=H0L,
    )


def replication_threshold(model: ModelSpec, K=1, *, mode=CORRECTED) -> ThresholdResult:
    """L_K^rep: B = B_c, mu from the flux relation, L = sqrt(D/2) K chi(mu)."""
    if model.kind == GM:
        raise RegimeMismatch("the GM core has no fold; replication does not occur")
    m = _Matcher(model, mode)
    mu = m.mu_rep()
    Bc = fold_B(model)
    if mu is None or mu >= m.red.wellposed_hi:
        raise RegimeMismatch("B_c is not reached below mu_max: nucleation occurs first")
    v0 = inner_value(model, Bc, mode, m.table)
    return _result(model, K, "Replication", _chi_proper(m.red, mu, v0), mu, Bc, "full", v0=v0)


def nucleation_threshold(model: ModelSpec, K=1, *, mode=CORRECTED) -> ThresholdResult:
    """L_K^nuc: mu = mu_max (2a or 2 kappa), L = sqrt(D/2) K chi_max."""
    m = _Matcher(model, mode)
    red = m.red
    if red.v_infty is not None:
        raise RegimeMismatch("a homogeneous state lies in the well-posed range: no nucleation")
    mu = red.wellposed_hi
    st = m.state(mu)
    if st is None:
        raise NoQuasiEquilibrium("no inner state at mu_max", "nucleation")
    if model.kind == GM:
        H, v0 = st
        return _result(model, K, "Nucleation", _chi_proper(red, mu, v0), mu, None, "full", v0=v0, H0L=H)
    B, v0 = st
    if B >= fold_B(model):
        raise RegimeMismatch(f"B(mu_max) = {B:.6g} >= B_c: replication occurs first")
    return _result(model, K, "Nucleation", _chi_proper(red, mu, v0), mu, B, "full", v0=v0)


def threshold(model: ModelSpec, K=1, *, mode=CORRECTED) -> ThresholdResult:
    """Whichever of replication / nucleation the model exhibits."""
    if model.kind == GM:
        return nucleation_threshold(model, K, mode=mode)
    try:
        return replication_threshold(model, K, mode=mode)
    except RegimeMismatch:
        return nucleation_threshold(model, K, mode=mode)


def critical_a(b, eps_over_sqrtD=0.01 / math.sqrt(2.0), mode="full"):
    """a_c(b) separating replication (a < a_c) from nucleation for Schnakenberg."""
    if not b > 0:
        raise ConfigError("b must be positive")
    tab = c_table(SCHNAKENBERG)
    Bc = tab.B_c
    if mode == "closed_form":
        return b / (2 * Bc**2 + 3 - 4 * math.log(2.0))
    if mode != "full":
        raise ConfigError(f"unknown mode {mode!r}")
    Cc = tab.C_c

    def F(a):
        v0 = a + a * a * Cc * eps_over_sqrtD
        if v0 >= 2 * a:
            return -1.0
        G = lambda v: -a * (a + b) / v**2 + (3 * a + b) / v + math.log(v)  # noqa: E731
        return G(2 * a) - G(v0) - 0.5 * Bc * Bc

    lo, hi = 1e-6 * b, b * (1 - 1e-12)
    return optimize.brentq(F, lo, hi, xtol=1e-14, rtol=1e-15)


def fc_residual(f, Bc):
    return 0.5 * Bc * Bc * f * f - (-0.75 + f + (1 - f) * math.log(2.0))


@lru_cache(maxsize=4)
def critical_f(tol=1e-9):
    """Root f_c in (1/2, 1) of B_c(f)^2 f^2 / 2 = -3/4 + f + (1 - f) log 2."""
    seeds = {}
    base = core.fold_point(BRUSSELATOR, 0.8)
    seeds[0.8] = base

    def Bc(f):
        near = min(seeds, key=lambda x: abs(x - f))
        fp = core.fold_point(BRUSSELATOR, f, seed=seeds[near].solution)
        seeds[f] = fp
        return fp.B

    F = lambda f: fc_residual(f, Bc(f))  # noqa: E731
    lo, hi = 0.7, 0.85
    if F(lo) * F(hi) > 0:
        raise BracketFailure("f_c not bracketed in (0.7, 0.85)")
    return optimize.brentq(F, lo, hi, xtol=tol)


def small_param_threshold(model: ModelSpec, K=1, *, D_L=None, L=None):
    """Closed-form small-a (small-kappa) approximations.

    Schnakenberg and Brusselator return a ThresholdResult; GM returns
    ``{"H0": ..., "H_center": ...}`` at the given L or D_L.
    """
    if model.kind == GM:
        if (L is None) == (D_L is None):
            raise ConfigError("GM small-kappa form needs exactly one of L or D_L")
        D_L = model.D / L**2 if D_L is None else D_L
        ell = 1.0 / K
        sq = math.sqrt(D_L)
        H0 = sq / 3.0 * math.tanh(ell / sq)
        return {"H0": H0, "H_center": H0 * math.sqrt(model.D) / (sq * model.epsilon)}
    a = model.a
    Bc = fold_B(model)
    if model.kind == SCHNAKENBERG:
        z = a * Bc / model.b
        if z >= 1:
            raise PrefactorOutOfRange("a B_c / b >= 1: small-a form undefined")
        L = math.sqrt(model.D) * K * math.atanh(z) / a
    else:
        s = math.sqrt(1 - model.f)
        if Bc * s >= 1:
            raise PrefactorOutOfRange(f"B_c sqrt(1-f) = {Bc * s:.4g} >= 1")
        L = math.sqrt(model.D) * K * math.atanh(Bc * s) / (a * s)
    return ThresholdResult(
        K=K,
        kind="Replication",
        D_L_crit=model.D / L**2,
        L_crit=L,
        mu_at_crit=float("nan"),
        B_at_crit=Bc,
        method="small_param",
        model=model.to_dict(),
    )


def F_s(z):
    """Largest B reachable with b < a, as a function of z = (a + b)/a."""
    return math.sqrt(2.0) * math.sqrt(-1 + 1 / z + math.log(z))


def F_b(f):
    """Largest B reachable for the Brusselator with f < 1/2."""
    if f < 1e-4:
        # series of -f - log(1 - f) avoids cancellation
        q = f * f / 2 + f**3 / 3 + f**4 / 4 + f**5 / 5
    else:
        q = -f - math.log1p(-f)
    return math.sqrt(2.0) * math.sqrt((1 - f) / f**2 * q)


def norep_bound(model: ModelSpec):
    """(B_max, verdict) for the parameter ranges where replication cannot occur."""
    if model.kind == SCHNAKENBERG and model.b < model.a:
        Bmax = F_s(2.0)
        Bc = fold_B(model)
        return Bmax, ("NoReplication" if Bmax < Bc else "Inconclusive")
    if model.kind == BRUSSELATOR and model.f < 0.5:
        Bmax = 1.0
        Bc = fold_B(model)
        return Bmax, ("NoReplication" if Bmax < Bc else "Inconclusive")
    raise RegimeMismatch("norep_bound applies to Schnakenberg with b < a or Brusselator with f < 1/2")


def outer_profile(model: ModelSpec, solve: OuterSolve, x, n_nodes: int = 2001):
    """v(x) on 0 <= x <= ell by inverting chi[v(x)] = sqrt(2/D_L) x.

    The partial chi integral is tabulated once in tau = sqrt(mu - xi), where
    the endpoint singularity is removable, and the table is interpolated.
    """
    red = outer_reduction(model)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu, v0 = solve.mu, solve.v0plus
    if mu <= v0:
        return np.full_like(x, mu)
    tmax = math.sqrt(mu - v0)
    sgrid = np.linspace(0.0, 1.0, n_nodes)
    tau = tmax * sgrid**2  # clustered at the spike-free end
    t2 = tau * tau
    dG = np.empty_like(tau)
    far = t2 > 0.1 * (mu - v0)
    dG[far] = red.G(mu) - red.G(mu - t2[far])
    tn = t2[~far][:, None]
    nodes = mu - 0.5 * tn * (_GL_NODES + 1.0)
    dG[~far] = 0.5 * t2[~far] * (red.Gp(nodes) @ _GL_WEIGHTS)
    h = np.zeros_like(tau)
    ok = dG > 0
    h[ok] = 2.0 * tau[ok] * red.g(mu - t2[ok]) / np.sqrt(dG[ok])
    h[0] = h[1]  # finite limit at tau = 0
    h *= 2.0 * tmax * sgrid  # d tau / ds
    H = integrate.cumulative_simpson(h, x=sgrid, initial=0.0)
    # x(tau) runs from ell at tau = 0 down to 0 at tau = tmax
    xs = solve.ell * (1.0 - H / H[-1])
    vs = mu - t2
    out = np.interp(x, xs[::-1], vs[::-1])
    out[x <= 0] = v0
    out[x >= solve.ell] = mu
    return out


# ---------------------------------------------------------------------------
# phase diagrams


@dataclass
class PhaseDiagram:
    family: str
    x_name: str
    y_name: str
    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    curves: dict

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([self.x_name, self.y_name, "regime"])
            for j, yv in enumerate(self.y):
                for i, xv in enumerate(self.x):
                    wr.writerow([f"{xv:.8g}", f"{yv:.8g}", self.labels[j, i]])

    def to_dict(self):
        return {
            "family": self.family,
            "x_name": self.x_name,
            "y_name": self.y_name,
            "x": [float(v) for v in self.x],
            "y": [float(v) for v in self.y],
            "labels": [[str(c) for c in row] for row in self.labels],
            "curves": {k: [[float(p) for p in pt] for pt in v] for k, v in self.curves.items()},
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_svg(self, path):
        from .plotting import plot_phase_diagram

        plot_phase_diagram(self, path)


def phase_diagram(family, x_values, y_values=None, *, epsilon=0.01, D=2.0, a_c_mode="full"):
    """Regime labels on a parameter grid.

    ``schnakenberg``: x = a, y = b.  ``brusselator``: x = f, y = a.
    ``gm``: x = kappa (one-parameter bar; ``y_values`` ignored).
    """
    from .models import brusselator, gierer_meinhardt, schnakenberg

    x = np.asarray(x_values, dtype=float)
    family = family.lower()
    if family == SCHNAKENBERG:
        y = np.asarray(y_values, dtype=float)
        labels = np.empty((len(y), len(x)), dtype=object)
        for j, b in enumerate(y):
            for i, a in enumerate(x):
                labels[j, i] = classify_regime(schnakenberg(a, b, epsilon, D), a_c_mode=a_c_mode).value
        ratio = epsilon / math.sqrt(D)
        bs = np.linspace(y.min(), y.max(), 50)
        curves = {
            "a_c": [(critical_a(bv, ratio, mode=a_c_mode), bv) for bv in bs],
            "a=b": [(bv, bv) for bv in bs],
        }
        return PhaseDiagram(family, "a", "b", x, y, labels, curves)
    if family == BRUSSELATOR:
        y = np.asarray(y_values, dtype=float)
        labels = np.empty((len(y), len(x)), dtype=object)
        for j, a in enumerate(y):
            for i, f in enumerate(x):
                labels[j, i] = classify_regime(brusselator(a, f, epsilon, D)).value
        fc = critical_f()
        curves = {"f_c": [(fc, y.min()), (fc, y.max())], "f=1/2": [(0.5, y.min()), (0.5, y.max())]}
        return PhaseDiagram(family, "f", "a", x, y, labels, curves)
    if family == GM:
        labels = np.empty((1, len(x)), dtype=object)
        for i, k in enumerate(x):
            labels[0, i] = classify_regime(gierer_meinhardt(k, 1.0, epsilon, D)).value
        return PhaseDiagram(family, "kappa", "", x, np.array([0.0]), labels, {"kappa=1": [(1.0, 0.0), (1.0, 1.0)]})
    raise ConfigError(f"unknown phase-diagram family {family!r}")
