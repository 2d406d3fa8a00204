"""Method-of-lines operator shared by the time stepper and steady continuation.

Nodes are x_i = x_0 + i h with ghost-point Neumann closure at both ends.  With
``symmetric=True`` only 0 <= x <= 1 is stored and x = 0 becomes a mirror node;
the even solutions of the full problem are reproduced exactly.  The state
vector is ``z = [v; u]`` (``[A; H]`` for GM).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .models import BRUSSELATOR, GM, SCHNAKENBERG, ModelSpec


@dataclass(frozen=True)
class Grid:
    n: int  # cells per unit length; the full domain [-1, 1] has 2n cells
    symmetric: bool
    x: np.ndarray
    h: float
    lap: sp.csr_matrix

    @property
    def m(self) -> int:
        return len(self.x)

    def full(self, w):
        """Values on the full domain [-1, 1]."""
        w = np.asarray(w)
        if not self.symmetric:
            return w
        return np.concatenate([w[:0:-1], w])

    def x_full(self):
        if not self.symmetric:
            return self.x
        return np.concatenate([-self.x[:0:-1], self.x])

    def weights(self):
        """Trapezoid weights on the full domain, expressed on the stored nodes."""
        w = np.full(self.m, self.h)
        w[-1] *= 0.5
        if self.symmetric:
            w[1:] *= 2.0
        else:
            w[0] *= 0.5
        return w


@lru_cache(maxsize=16)
def make_grid(n: int, symmetric: bool = True) -> Grid:
    if n < 8:
        raise ConfigError("grid needs n >= 8 cells per unit length")
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1) if symmetric else np.linspace(-1.0, 1.0, 2 * n + 1)
    m = len(x)
    lap = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="lil")
    lap[0, 1] = 2.0
    lap[m - 1, m - 2] = 2.0
    return Grid(n, symmetric, x, h, (lap / h**2).tocsr())


def scaled(model: ModelSpec, L):
    """(eps_L, D_L) at half-length L."""
    return model.epsilon / L, model.D / L**2


def kinetics(model: ModelSpec, v, u):
    """Reaction terms and their four pointwise partial derivatives."""
    if model.kind == SCHNAKENBERG:
        uv = u * v
        fv = -v + model.a + uv * v
        fu = model.b - uv * v
        return fv, fu, (-1 + 2 * uv, v * v, -2 * uv, -v * v)
    if model.kind == BRUSSELATOR:
        f = model.f
        uv = u * v
        fv = -v + model.a + f * uv * v
        fu = v - uv * v
        return fv, fu, (-1 + 2 * f * uv, f * v * v, 1 - 2 * uv, -v * v)
    A, H = v, u
    fA = -A + A * A / H + model.kappa
    fH = -H + A * A
    return fA, fH, (-1 + 2 * A / H, -(A * A) / (H * H), 2 * A, -np.ones_like(H))


def mass(model: ModelSpec, m: int) -> np.ndarray:
    tau = model.tau if model.kind == GM else 1.0
    return np.concatenate([np.ones(m), np.full(m, tau)])


def residual(model: ModelSpec, grid: Grid, z, L, dilution=0.0):
    """Right-hand side F(z; L) of M z_t = F; ``dilution`` is the rate rho when enabled."""
    m = grid.m
    v, u = z[:m], z[m:]
    eL, DL = scaled(model, L)
    fv, fu, _ = kinetics(model, v, u)
    Fv = eL * eL * (grid.lap @ v) + fv - dilution * v
    Fu = DL * (grid.lap @ u) + fu - dilution * u
    return np.concatenate([Fv, Fu])


def jacobian(model: ModelSpec, grid: Grid, z, L, dilution=0.0):
    m = grid.m
    v, u = z[:m], z[m:]
    eL, DL = scaled(model, L)
    _, _, (a11, a12, a21, a22) = kinetics(model, v, u)
    J = sp.bmat(
        [
            [eL * eL * grid.lap + sp.diags(a11 - dilution), sp.diags(a12)],
            [sp.diags(a21), DL * grid.lap + sp.diags(a22 - dilution)],
        ],
        format="csc",
    )
    return J


def residual_floor(model: ModelSpec, grid: Grid, z, L) -> float:
    """Max-norm residual attainable in double precision.

    Rounding the state to unit roundoff perturbs each diffusion term by about
    4 eps |w| D / h^2; Newton cannot push the residual much below this.
    """
    m = grid.m
    eL, DL = scaled(model, L)
    eps = np.finfo(float).eps
    scale = 4.0 / grid.h**2 * max(eL * eL * np.max(np.abs(z[:m])), DL * np.max(np.abs(z[m:])))
    return float(8.0 * eps * scale)


def dF_dL(model: ModelSpec, grid: Grid, z, L):
    """Partial derivative of the steady residual with respect to L."""
    m = grid.m
    v, u = z[:m], z[m:]
    eL, DL = scaled(model, L)
    return np.concatenate([-2 * eL * eL / L * (grid.lap @ v), -2 * DL / L * (grid.lap @ u)])


def flux_balance(grid: Grid, w):
    """Trapezoid integral of the discrete Laplacian of w.

    The ghost-node closure makes the boundary flux vanish, so this is zero to
    roundoff for any w.
    """
    return float(grid.weights() @ (grid.lap @ np.asarray(w, float)))
