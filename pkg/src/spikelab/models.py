"""Model definitions: the three reaction-diffusion systems and their outer reductions.

The outer problem for every model has the form ``D_L (g(v) v_x)_x = R(v)`` on the
region between spike cores, with first integral ``G' = -R g``.  For GM the
activator plays the role of ``v`` and ``g`` is ``A(2k - A)/(A - k)^2``.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError

SCHNAKENBERG = "schnakenberg"
BRUSSELATOR = "brusselator"
GM = "gm"
KINDS = (SCHNAKENBERG, BRUSSELATOR, GM)

_PARAM_NAMES = {
    SCHNAKENBERG: ("a", "b"),
    BRUSSELATOR: ("a", "f"),
    GM: ("kappa", "tau"),
}

# relative half-width of the band around a regime boundary reported as Marginal
MARGINAL_REL = 1e-3
FC_FALLBACK = 0.769
GM_CLAMP = 1e-12


class Regime(str, enum.Enum):
    REPLICATION = "replication"
    NUCLEATION = "nucleation"
    NO_INSTABILITY = "no_instability"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict
    epsilon: float = 0.01
    D: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind in ("gierer-meinhardt", "gierer_meinhardt"):
            kind = GM
        if kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        params = {k: float(v) for k, v in dict(self.params).items()}
        if kind == GM:
            params.setdefault("tau", 1.0)
        expected = set(_PARAM_NAMES[kind])
        if set(params) != expected:
            raise ConfigError(f"{kind} needs parameters {sorted(expected)}, got {sorted(params)}")
        object.__setattr__(self, "params", params)
        if not (self.epsilon > 0 and self.D > 0):
            raise ConfigError("epsilon and D must be positive")
        if kind == SCHNAKENBERG and not (params["a"] > 0 and params["b"] > 0):
            raise ConfigError("Schnakenberg needs a > 0 and b > 0")
        if kind == BRUSSELATOR and not (params["a"] > 0 and 0 < params["f"] < 1):
            raise ConfigError("Brusselator needs a > 0 and 0 < f < 1")
        if kind == GM and not (params["kappa"] >= 0 and params["tau"] > 0):
            raise ConfigError("GM needs kappa >= 0 and tau > 0")
        if self.ratio >= 0.5:
            warnings.warn(f"eps/sqrt(D) = {self.ratio:.3g} is outside the semi-strong regime")
            raise ConfigError(f"eps/sqrt(D) = {self.ratio:.3g} >= 0.5: not a semi-strong regime")

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params.items())), self.epsilon, self.D))

    @property
    def ratio(self) -> float:
        """eps / sqrt(D), the small parameter of the inner expansion."""
        return self.epsilon / math.sqrt(self.D)

    def __getattr__(self, name):
        params = self.__dict__.get("params", {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    def with_params(self, **changes) -> "ModelSpec":
        params = dict(self.params)
        eps = changes.pop("epsilon", self.epsilon)
        D = changes.pop("D", self.D)
        params.update(changes)
        return ModelSpec(self.kind, params, eps, D)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "epsilon": self.epsilon, "D": self.D}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        unknown = set(data) - {"kind", "params", "epsilon", "D"}
        if unknown:
            raise ConfigError(f"unknown ModelSpec fields {sorted(unknown)}")
        try:
            return cls(data["kind"], data["params"], data.get("epsilon", 0.01), data.get("D", 1.0))
        except KeyError as exc:
            raise ConfigError(f"ModelSpec missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def schnakenberg(a, b, epsilon=0.01, D=2.0) -> ModelSpec:
    return ModelSpec(SCHNAKENBERG, {"a": a, "b": b}, epsilon, D)


def brusselator(a, f, epsilon=0.01, D=2.0) -> ModelSpec:
    return ModelSpec(BRUSSELATOR, {"a": a, "f": f}, epsilon, D)


def gierer_meinhardt(kappa, tau=1.0, epsilon=0.01, D=1.0) -> ModelSpec:
    return ModelSpec(GM, {"kappa": kappa, "tau": tau}, epsilon, D)


@dataclass(frozen=True)
class OuterReduction:
    """Closed-form evaluators of the reduced outer problem."""

    kind: str
    g: Callable
    R: Callable
    Rp: Callable
    G: Callable
    Gp: Callable
    wellposed_lo: float
    wellposed_hi: float
    v_infty: Optional[float] = None
    flux_scale: float = 1.0  # B^2 = 2 (G(mu) - G(v0)) / flux_scale**2
    R_gap: Optional[Callable] = None  # R(xi) from (xi, v_infty - xi) without cancellation
    _check: bool = field(default=True, repr=False)

    @property
    def mu_max(self) -> float:
        return self.wellposed_hi

    @property
    def mu_upper(self) -> float:
        """Largest admissible boundary value: mu_max, or v_infty when it lies inside."""
        return self.v_infty if self.v_infty is not None else self.wellposed_hi


def _domain_guard(lo, hi, clamp_lo=False):
    tol = 1e-12 * max(abs(hi), 1.0)

    def guard(xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi < lo - (0 if clamp_lo else tol)) or np.any(xi > hi + tol) or np.any(~np.isfinite(xi)):
            raise DomainError(f"argument outside well-posed interval [{lo:.6g}, {hi:.6g}]")
        if clamp_lo:
            xi = np.maximum(xi, lo * (1 + GM_CLAMP))
        return xi

    return guard


def outer_reduction(model: ModelSpec) -> OuterReduction:
    """Closed-form g, R, R', G, G' for the model's outer problem."""
    kind = model.kind
    if kind == SCHNAKENBERG:
        a, b = model.a, model.b
        chk = _domain_guard(a, 2 * a)

        def g(v):
            v = chk(v)
            return (2 * a - v) / v**3

        def R(v):
            return chk(v) - a - b

        def Rp(v):
            return np.ones_like(chk(v))

        def Gp(v):
            v = chk(v)
            return 2 * a * (a + b) / v**3 - (3 * a + b) / v**2 + 1 / v

        def G(v):
            v = chk(v)
            return -a * (a + b) / v**2 + (3 * a + b) / v + np.log(v)

        vinf = a + b if a + b < 2 * a else None
        return OuterReduction(kind, g, R, Rp, G, Gp, a, 2 * a, vinf, R_gap=lambda v, gap: -np.asarray(gap, float))

    if kind == BRUSSELATOR:
        a, f = model.a, model.f
        chk = _domain_guard(a, 2 * a)

        def g(v):
            v = chk(v)
            return (2 * a - v) / v**3

        def R(v):
            return (1 - f) * chk(v) - a

        def Rp(v):
            return (1 - f) * np.ones_like(chk(v))

        def Gp(v):
            v = chk(v)
            return 2 * a**2 / v**3 - a * (3 - 2 * f) / v**2 + (1 - f) / v

        def G(v):
            v = chk(v)
            return -(a**2) / v**2 + a * (3 - 2 * f) / v + (1 - f) * np.log(v)

        vinf = a / (1 - f)
        vinf = vinf if vinf < 2 * a else None
        return OuterReduction(
            kind, g, R, Rp, G, Gp, a, 2 * a, vinf, flux_scale=f, R_gap=lambda v, gap: -(1 - f) * np.asarray(gap, float)
        )

    k = model.kappa
    if k <= 0:
        raise DomainError("GM outer reduction needs kappa > 0")
    chk = _domain_guard(k, 2 * k, clamp_lo=True)

    def g(A):
        A = chk(A)
        return A * (2 * k - A) / (A - k) ** 2

    def R(A):
        A = chk(A)
        return A**2 - A**2 / (A - k)

    def Rp(A):
        A = chk(A)
        return 2 * A + A * (2 * k - A) / (A - k) ** 2

    def Gp(A):
        A = chk(A)
        return A * (2 * k - A) / (A - k) ** 2 * (A**2 / (A - k) - A**2)

    def G(A):
        A = chk(A)
        s = A - k
        return (
            -(k**4) / (2 * s**2)
            + k**3 * (k - 2) / s
            - 2 * k**3 * np.log(s)
            - k * (k + 1) * A
            + A**3 / 3
            - A**2 / 2
        )

    vinf = 1 + k if 1 + k < 2 * k else None

    def R_gap(A, gap):
        A = chk(A)
        return -(A**2) * np.asarray(gap, float) / (A - k)

    return OuterReduction(kind, g, R, Rp, G, Gp, k, 2 * k, vinf, R_gap=R_gap)


def _marginal(x, x0):
    return abs(x - x0) <= MARGINAL_REL * abs(x0)


@lru_cache(maxsize=None)
def schnakenberg_fold_B() -> float:
    """B_c of the Schnakenberg core problem, computed once."""
    from .core import continue_core_branch

    return continue_core_branch(SCHNAKENBERG).fold.B


@lru_cache(maxsize=None)
def _cached_fc() -> float:
    from .outer import critical_f

    return critical_f()


def critical_f_value(use_table: bool = True) -> float:
    """f_c from the tabulated B_c(f), falling back to 0.769 if it cannot be built."""
    if not use_table:
        return FC_FALLBACK
    try:
        return _cached_fc()
    except Exception as exc:  # the table is optional here
        warnings.warn(f"B_c(f) table unavailable ({exc}); using f_c = {FC_FALLBACK}")
        return FC_FALLBACK


def critical_a_value(model: ModelSpec, mode: str = "closed_form") -> float:
    from .outer import critical_a

    return critical_a(model.b, model.ratio, mode=mode)


def classify_regime(model: ModelSpec, a_c_mode: str = "closed_form", use_table: bool = True) -> Regime:
    """Which spike-generating mechanism occurs first as L grows."""
    if model.kind == SCHNAKENBERG:
        a, b = model.a, model.b
        if _marginal(a, b):
            return Regime.MARGINAL
        if a > b:
            return Regime.NO_INSTABILITY
        ac = critical_a_value(model, a_c_mode)
        if _marginal(a, ac):
            return Regime.MARGINAL
        return Regime.REPLICATION if a < ac else Regime.NUCLEATION
    if model.kind == BRUSSELATOR:
        f = model.f
        if _marginal(f, 0.5):
            return Regime.MARGINAL
        if f < 0.5:
            return Regime.NO_INSTABILITY
        fc = critical_f_value(use_table)
        if _marginal(f, fc):
            return Regime.MARGINAL
        return Regime.NUCLEATION if f < fc else Regime.REPLICATION
    k = model.kappa
    if _marginal(k, 1.0):
        return Regime.MARGINAL
    return Regime.NUCLEATION if 0 < k < 1 else Regime.NO_INSTABILITY


def homogeneous_state(model: ModelSpec):
    """Spatially uniform steady state (v, u), or (A, H) for GM."""
    if model.kind == SCHNAKENBERG:
        v = model.a + model.b
        return v, model.b / v**2
    if model.kind == BRUSSELATOR:
        v = model.a / (1 - model.f)
        return v, (v - model.a) / (model.f * v**2)
    A = 1 + model.kappa
    return A, A**2


def brusselator_from_physical(E, B, D_v, D_u, L=1.0) -> ModelSpec:
    """Dimensionless Brusselator (a, f, eps, D) from the physical rate constants."""
    for name, val in (("E", E), ("B", B), ("D_v", D_v), ("D_u", D_u), ("L", L)):
        if not val > 0:
            raise ConfigError(f"{name} must be positive")
    a = E / (B + 1) ** 1.5
    f = B / (B + 1)
    D = D_u / ((B + 1) * L**2)
    eps = math.sqrt(D_v / ((B + 1) * L**2))
    return brusselator(a, f, eps, D)


def gm_from_physical(mu_a, nu_a, mu_h, nu_h, delta_a, D_a, D_h) -> ModelSpec:
    """Dimensionless GM (kappa, tau, eps, D) from the physical rate constants."""
    for name, val in (("mu_a", mu_a), ("nu_a", nu_a), ("mu_h", mu_h), ("nu_h", nu_h), ("D_a", D_a), ("D_h", D_h)):
        if not val > 0:
            raise ConfigError(f"{name} must be positive")
    if delta_a < 0:
        raise ConfigError("delta_a must be non-negative")
    tau = mu_a / mu_h
    D = D_h / mu_h
    eps = math.sqrt(D_a / mu_a)
    kappa = delta_a * nu_h / (mu_h * nu_a)
    return gierer_meinhardt(kappa, tau, eps, D)
