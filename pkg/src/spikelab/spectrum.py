"""Linear stability of the core solution to O(1) time-scale even perturbations.

Schnakenberg (f = 1, s = 0) and Brusselator (s = 1)::

    Phi'' - Phi + 2 f U V Phi + f V^2 N = lambda Phi
    N''   + s Phi - 2 U V Phi - V^2 N   = 0

with Phi'(0) = N'(0) = 0, Phi(y_max) = 0 and N'(y_max) = 0.  The last condition
removes the linearly growing far-field component of N; N carries no mass, so the
problem is a generalized eigenproblem with a singular right-hand side.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import CoreBranch, CoreSolution, beta_derivative
from .errors import ConfigError, EigSolverFailure, SingularSlaveOperator
from .models import SCHNAKENBERG

NOTE = "O(1) eigenvalues only; O(eps) translation modes are outside this model"


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    Phi: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    B: float = 0.0
    beta: float = 0.0
    residuals: np.ndarray = field(default=None, repr=False)

    @property
    def leading(self) -> complex:
        return complex(self.eigenvalues[0])

    def to_dict(self):
        return {
            "B": self.B,
            "beta": self.beta,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "note": NOTE,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def modes_to_csv(self, path, k=0):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["y", "Phi0", "N0"])
            for y, p, q in zip(self.y, self.Phi[k].real, self.N[k].real):
                wr.writerow([f"{y:.12g}", f"{p:.12g}", f"{q:.12g}"])


def _neumann_lap(n, h):
    lap = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
    lap[0, 1] = 2.0
    lap[n - 1, n - 2] = 2.0
    return (lap / h**2).tocsr()


def operator_blocks(sol: CoreSolution):
    """Sparse blocks (LPhi, KPhiN, P, M) of the coupled operator."""
    n, h = len(sol.y), sol.h
    V, U = sol.V0, sol.U0
    f = 1.0 if sol.kind == SCHNAKENBERG else sol.f
    s = 0.0 if sol.kind == SCHNAKENBERG else 1.0
    lap = _neumann_lap(n, h)
    keep = np.ones(n)
    keep[-1] = 0.0
    LPhi = sp.diags(keep) @ (lap + sp.diags(-1 + 2 * f * U * V)) + sp.diags(1 - keep)
    KPhiN = sp.diags(keep * f * V**2)
    P = sp.diags(s - 2 * U * V)
    M = lap - sp.diags(V**2)
    return LPhi.tocsr(), KPhiN.tocsr(), P.tocsr(), M.tocsr(), keep


def _check_slave(M):
    # M = lap - diag(V^2): its only near-null direction is the constant vector
    n = M.shape[0]
    one = np.ones(n) / np.sqrt(n)
    try:
        lu = spla.splu(M.tocsc())
        x = lu.solve(one)
    except RuntimeError as exc:
        raise SingularSlaveOperator(str(exc)) from None
    amp = np.linalg.norm(x)
    if not np.isfinite(amp) or amp > 1e12:
        raise SingularSlaveOperator(f"slave operator nearly singular (|M^-1| ~ {amp:.3g}); increase y_max")
    return lu


def _finish(sol, lam, X, n, A, Bm):
    order = np.argsort(-lam.real, kind="stable")
    lam = lam[order]
    X = X[:, order]
    Phi, N, res = [], [], []
    for j in range(X.shape[1]):
        x = X[:, j]
        k = np.argmax(np.abs(x[:n]))
        x = x / x[k]
        if x[0].real < 0:
            x = -x
        r = A @ x - lam[j] * (Bm @ x)
        res.append(np.max(np.abs(r)))
        Phi.append(x[:n])
        N.append(x[n:])
    return EigenResult(
        eigenvalues=lam,
        Phi=np.array(Phi),
        N=np.array(N),
        y=sol.y,
        B=sol.B,
        beta=sol.beta,
        residuals=np.array(res),
    )


def assemble(sol: CoreSolution):
    """(A, Bm) for the coupled generalized problem A x = lambda Bm x, x = (Phi, N)."""
    LPhi, K, P, M, keep = operator_blocks(sol)
    n = len(sol.y)
    A = sp.bmat([[LPhi, K], [P, M]], format="csc")
    Bm = sp.bmat([[sp.diags(keep), None], [None, sp.csr_matrix((n, n))]], format="csc")
    return A, Bm


def core_spectrum(sol: CoreSolution, n_eigs=4, *, method="sparse", sigma=1.0) -> EigenResult:
    """Rightmost eigenvalues of the coupled problem at a core solution.

    ``method`` is ``"sparse"`` (shift-invert Arnoldi about ``sigma``),
    ``"dense"`` (QZ on the coupled pencil) or ``"reduced"`` (dense eig of the
    Schur complement obtained by eliminating N).
    """
    if n_eigs < 1:
        raise ConfigError("n_eigs must be >= 1")
    n = len(sol.y)
    LPhi, K, P, M, keep = operator_blocks(sol)
    Mlu = _check_slave(M)
    A, Bm = assemble(sol)
    if method == "sparse":
        k = min(n_eigs + 6, 2 * n - 2)
        lu = spla.splu((A - sigma * Bm).tocsc())
        op = spla.LinearOperator((2 * n, 2 * n), matvec=lambda x: lu.solve(Bm @ x), dtype=float)
        try:
            v0 = np.random.default_rng(0).standard_normal(2 * n)
            theta, X = spla.eigs(op, k=k, which="LM", tol=1e-13, ncv=max(2 * k + 1, 30), v0=v0)
        except spla.ArpackError as exc:
            raise EigSolverFailure(str(exc)) from None
        good = np.abs(theta) > 1e-14
        lam = sigma + 1.0 / theta[good]
        X = X[:, good]
    elif method == "dense":
        lam, X = sla.eig(A.toarray(), Bm.toarray())
        good = np.isfinite(lam) & (np.abs(lam) < 1e8)
        lam, X = lam[good], X[:, good]
    elif method == "reduced":
        # N = -M^{-1} P Phi; Phi(y_max) = 0 row is dropped
        MinvP = Mlu.solve(P.toarray())
        R = LPhi.toarray() - K.toarray() @ MinvP
        m = n - 1
        lamr, Y = sla.eig(R[:m, :m])
        Phi = np.vstack([Y, np.zeros((1, m))])
        Nn = -MinvP @ Phi
        lam, X = lamr, np.vstack([Phi, Nn])
    else:
        raise ConfigError(f"unknown eigen method {method!r}")
    res = _finish(sol, lam, X, n, A, Bm)
    k = min(n_eigs, len(res.eigenvalues))
    return EigenResult(
        eigenvalues=res.eigenvalues[:k],
        Phi=res.Phi[:k],
        N=res.N[:k],
        y=res.y,
        B=res.B,
        beta=res.beta,
        residuals=res.residuals[:k],
    )


def dimple_similarity(sol: CoreSolution, eig: EigenResult, k=0, dbeta=1e-4):
    """|cos| of the angle between Phi_k and V_0beta."""
    Vb, _ = beta_derivative(sol.kind, sol.f, sol.beta, dbeta=dbeta, y_max=sol.y[-1], n=len(sol.y), seed=sol)
    p = eig.Phi[k].real
    return float(abs(p @ Vb) / (np.linalg.norm(p) * np.linalg.norm(Vb)))


def fold_mode_residual(sol: CoreSolution, dbeta=1e-4):
    """Max residual of (V_0beta, U_0beta) as a lambda = 0 eigenpair, normalized by max |V_0beta|."""
    Vb, Ub = beta_derivative(sol.kind, sol.f, sol.beta, dbeta=dbeta, y_max=sol.y[-1], n=len(sol.y), seed=sol)
    A, _ = assemble(sol)
    x = np.concatenate([Vb, Ub])
    return float(np.max(np.abs(A @ x)) / np.max(np.abs(Vb)))


def stability_scan(branch: CoreBranch, n_eigs=1, **kw):
    """(beta, max Re lambda) for every branch sample."""
    if len(branch.solutions) < 10:
        raise ConfigError("stability_scan needs a branch with at least 10 samples")
    out = []
    for sol in branch.solutions:
        e = core_spectrum(sol, n_eigs=n_eigs, **kw)
        out.append((sol.beta, float(e.eigenvalues[0].real)))
    return out
