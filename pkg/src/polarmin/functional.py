"""Objective, constraints and Euler-equation machinery.

The energy integrand is (|grad v|^2 - F(|x|, v)) / (1 + |v|)^{2 theta} with
zero-mean and unit-Lp-norm constraints.  Internally the kinetic term is
evaluated in the substituted variable Psi(v), whose squared gradient equals
the original integrand's kinetic part in the continuum; with F = 0 the
discrete objective is therefore exactly the Dirichlet energy of Psi(v).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .grids import (
    Field,
    PolarGrid,
    RadialDomain,
    annulus,
    disk,
    dirichlet_energy,
    grad_sq,
    integrate,
    laplacian,
)

__all__ = [
    "FSpec",
    "zero_f",
    "power_law",
    "ProblemParams",
    "Multipliers",
    "signed_power",
    "psi",
    "phi",
    "phi_prime",
    "eval_objective",
    "objective_value_and_grad",
    "mean_constraint",
    "lp_norm",
    "g_term",
    "m_term",
    "n_term",
    "euler_residual",
    "multipliers_from_identities",
    "config_to_dict",
    "config_from_dict",
    "config_to_json",
    "config_from_json",
]

P_REGULARIZATION = 1e-8  # smoothing of |u|^{p-2} u at 0 when p < 2


@dataclass(frozen=True)
class FSpec:
    """Lower-order term F.  'zero' means F = 0; 'power_law' means
    F(r, t) = -c0 |t|^alpha."""

    kind: Literal["zero", "power_law"]
    c0: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "power_law"):
            raise ValueError(f"unknown F kind {self.kind!r}")
        if self.kind == "power_law":
            if self.c0 < 0:
                raise ValueError("power-law coefficient c0 must be >= 0")
            if self.alpha <= 1.0:
                raise ValueError(
                    "power-law exponent must exceed 1 (the t-derivative is "
                    "not continuous at 0 otherwise)"
                )


def zero_f() -> FSpec:
    return FSpec("zero")


def power_law(c0: float, alpha: float) -> FSpec:
    return FSpec("power_law", c0=c0, alpha=alpha)


def _check_sign_condition(f: FSpec, theta: float) -> None:
    # For p in (1, 2) the lower-order term must satisfy
    # t (1 + |t|) F_t - 2 theta |t| F <= 0; checked on a log-spaced lattice.
    if f.kind == "zero":
        return
    t = np.concatenate([-np.logspace(-6, 3, 200), np.logspace(-6, 3, 200)])
    at = np.abs(t)
    ft = -f.c0 * f.alpha * at ** (f.alpha - 1.0) * np.sign(t)
    fv = -f.c0 * at**f.alpha
    expr = t * (1.0 + at) * ft - 2.0 * theta * at * fv
    if np.any(expr > 1e-12):
        raise ValueError("power-law term fails the p<2 sign condition")


@dataclass(frozen=True)
class ProblemParams:
    """Exponents and lower-order term of the energy.

    theta in [0, 1/2) controls the damping of the kinetic term (theta = 0
    is the classical coercive limit, admitted so the Neumann spectrum can
    oracle the solver).  p > 1 is the norm-constraint exponent.  q is the
    Sobolev exponent of the continuum formulation, recorded for validation
    only; the default is the lower admissible bound 2(1 - theta).
    """

    theta: float
    p: float
    q: float | None = None
    f_spec: FSpec = FSpec("zero")
    dim: int = 2

    def __post_init__(self):
        if not 0.0 <= self.theta < 0.5:
            raise ValueError("theta must satisfy 0 <= 2*theta < 1")
        if not self.p > 1.0:
            raise ValueError("p must exceed 1")
        if self.dim != 2:
            raise ValueError("only dim = 2 is supported")
        if self.q is None:
            object.__setattr__(self, "q", 2.0 * (1.0 - self.theta))
        qlo = 2.0 * (1.0 - self.theta)
        qhi = 2.0 if self.theta > 0 else 2.0 + 1e-12
        if not (qlo - 1e-12 <= self.q <= qhi):
            raise ValueError(f"q must lie in [2(1-theta), 2) = [{qlo}, 2)")
        if self.f_spec.kind == "power_law":
            if self.f_spec.alpha < 2.0 * self.theta:
                raise ValueError("power-law exponent must be >= 2*theta")
            if self.f_spec.alpha > self.p:
                raise ValueError("power-law exponent must be <= p")
            if self.p < 2.0:
                _check_sign_condition(self.f_spec, self.theta)


@dataclass(frozen=True)
class Multipliers:
    """Duals of the mean constraint (c) and the norm constraint (d)."""

    c: float
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.d)):
            raise ValueError("multipliers must be finite")


def psi(xi, theta: float):
    """Odd increasing substitution sgn(xi)/(1-theta) [(1+|xi|)^{1-theta} - 1];
    the identity at theta = 0, and |psi(xi)| <= |xi|."""
    xi = np.asarray(xi, dtype=float)
    out = np.sign(xi) * np.expm1((1.0 - theta) * np.log1p(np.abs(xi))) / (1.0 - theta)
    return float(out) if out.ndim == 0 else out


def phi(eta, theta: float):
    """Inverse of psi: sgn(eta) ([1 + (1-theta)|eta|]^{1/(1-theta)} - 1)."""
    eta = np.asarray(eta, dtype=float)
    out = np.sign(eta) * np.expm1(np.log1p((1.0 - theta) * np.abs(eta)) / (1.0 - theta))
    return float(out) if out.ndim == 0 else out


def phi_prime(eta, theta: float):
    """Derivative of phi; equals (1 + |phi(eta)|)^theta."""
    eta = np.asarray(eta, dtype=float)
    out = (1.0 + (1.0 - theta) * np.abs(eta)) ** (theta / (1.0 - theta))
    return float(out) if out.ndim == 0 else out


def mean_constraint(grid: PolarGrid, v: Field) -> float:
    return integrate(grid, v)


def lp_norm(grid: PolarGrid, v: Field, p: float) -> float:
    if not p > 1.0:
        raise ValueError("p must exceed 1")
    return float(np.sum(grid.w * np.abs(v.values) ** p)) ** (1.0 / p)


def _f_over_weight(params: ProblemParams, v: np.ndarray) -> np.ndarray:
    """Pointwise F(r, v) / (1 + |v|)^{2 theta} (r-independent family)."""
    f = params.f_spec
    if f.kind == "zero":
        return np.zeros_like(v)
    av = np.abs(v)
    return -f.c0 * av**f.alpha / (1.0 + av) ** (2.0 * params.theta)


def eval_objective(params: ProblemParams, grid: PolarGrid, v: Field) -> float:
    """Energy of v: Dirichlet energy of psi(v) minus the quadrature of
    F(r, v)/(1+|v|)^{2 theta}."""
    U = psi(v.values, params.theta)
    val = dirichlet_energy(grid, U)
    if params.f_spec.kind != "zero":
        val -= float(np.sum(grid.w * _f_over_weight(params, v.values)))
    return val


def objective_value_and_grad(
    params: ProblemParams, grid: PolarGrid, U: np.ndarray
) -> tuple[float, np.ndarray]:
    """Objective in the substituted variable U = psi(u) and its exact
    gradient with respect to the node values of U."""
    theta = params.theta
    u = phi(U, theta)
    pp = phi_prime(U, theta)
    AU = (grid.stiffness @ U.ravel()).reshape(grid.shape)
    val = float(U.ravel() @ AU.ravel())
    gradient = 2.0 * AU
    if params.f_spec.kind != "zero":
        val -= float(np.sum(grid.w * _f_over_weight(params, u)))
        gradient -= 2.0 * grid.w * g_term(grid.r_nodes[:, None], u, params) * pp
    return val, gradient


def g_term(r, t, params: ProblemParams):
    """Derivative in t of F(r, t) / (2 (1 + |t|)^{2 theta}); zero when
    F = 0, odd in t for the even power-law family."""
    f = params.f_spec
    t = np.asarray(t, dtype=float)
    if f.kind == "zero":
        out = np.zeros_like(t)
        return float(out) if out.ndim == 0 else out
    theta = params.theta
    at = np.abs(t)
    out = (
        -0.5
        * f.c0
        * np.sign(t)
        * at ** (f.alpha - 1.0)
        * (1.0 + at) ** (-2.0 * theta - 1.0)
        * (f.alpha * (1.0 + at) - 2.0 * theta * at)
    )
    return float(out) if out.ndim == 0 else out


def m_term(t, params: ProblemParams):
    """|phi(t)|^{p-2} phi(t) (1 + |phi(t)|)^theta: odd and nondecreasing."""
    u = phi(t, params.theta)
    au = np.abs(u)
    out = np.sign(u) * au ** (params.p - 1.0) * (1.0 + au) ** params.theta
    return float(out) if np.ndim(out) == 0 else out


def n_term(r, t, params: ProblemParams, c: float):
    """(g(r, t) - c) (1 + |phi(t)|)^theta."""
    u = phi(t, params.theta)
    out = (g_term(r, t, params) - c) * (1.0 + np.abs(u)) ** params.theta
    return float(out) if np.ndim(out) == 0 else out


def euler_residual(
    params: ProblemParams, grid: PolarGrid, u: Field, mult: Multipliers
) -> Field:
    """Pointwise residual of the substituted stationarity equation
    -lap U + d M(U) - N(|x|, U) with U = psi(u)."""
    U = psi(u.values, params.theta)
    res = (
        -laplacian(grid, U)
        + mult.d * m_term(U, params)
        - n_term(grid.r_nodes[:, None], U, params, mult.c)
    )
    return Field(grid, res)


def signed_power(u: np.ndarray, p: float, delta: float = 0.0) -> np.ndarray:
    """|u|^{p-2} u, optionally smoothed as u (u^2 + delta^2)^{(p-2)/2} for
    p < 2 where the bare expression is non-Lipschitz at 0."""
    if p >= 2.0 or delta == 0.0:
        return np.sign(u) * np.abs(u) ** (p - 1.0)
    return u * (u * u + delta * delta) ** (0.5 * (p - 2.0))


def multipliers_from_identities(
    params: ProblemParams, grid: PolarGrid, u: Field
) -> Multipliers:
    """Recover the constraint duals from the integral identities obtained by
    testing the stationarity equation with 1 (for c) and with u (for d)."""
    theta = params.theta
    uv = u.values
    au = np.abs(uv)
    gs = grad_sq(grid, u).values
    g = g_term(grid.r_nodes[:, None], uv, params)
    denom = (1.0 + au) ** (2.0 * theta + 1.0)
    d = float(
        np.sum(grid.w * uv * g) - np.sum(grid.w * gs * (1.0 + (1.0 - theta) * au) / denom)
    )
    area = grid.domain.area
    c = (
        float(np.sum(grid.w * g))
        + theta * float(np.sum(grid.w * gs * np.sign(uv) / denom))
        - d * float(np.sum(grid.w * signed_power(uv, params.p)))
    ) / area
    return Multipliers(c=c, d=d)


# --- JSON configuration -----------------------------------------------------

_F_KEYS = {"kind", "c0", "alpha"}
_DOMAIN_KEYS = {"kind", "r_inner", "r_outer"}
_TOP_KEYS = {"theta", "p", "q", "F", "domain"}


def config_to_dict(params: ProblemParams, domain: RadialDomain) -> dict:
    return {
        "theta": params.theta,
        "p": params.p,
        "q": params.q,
        "F": {"kind": params.f_spec.kind, "c0": params.f_spec.c0, "alpha": params.f_spec.alpha},
        "domain": {"kind": domain.kind, "r_inner": domain.r_inner, "r_outer": domain.r_outer},
    }


def config_from_dict(doc: dict) -> tuple[ProblemParams, RadialDomain]:
    if not isinstance(doc, dict):
        raise ValueError("configuration must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown configuration fields: {sorted(unknown)}")
    missing = {"theta", "p", "domain"} - set(doc)
    if missing:
        raise ValueError(f"missing configuration fields: {sorted(missing)}")
    fdoc = doc.get("F", {"kind": "zero"})
    if not isinstance(fdoc, dict) or set(fdoc) - _F_KEYS or "kind" not in fdoc:
        raise ValueError("malformed F specification")
    f = FSpec(fdoc["kind"], c0=float(fdoc.get("c0", 0.0)), alpha=float(fdoc.get("alpha", 0.0)))
    ddoc = doc["domain"]
    if not isinstance(ddoc, dict) or set(ddoc) - _DOMAIN_KEYS or "kind" not in ddoc:
        raise ValueError("malformed domain specification")
    if ddoc["kind"] == "disk":
        dom = disk(float(ddoc.get("r_outer", 1.0)))
        if float(ddoc.get("r_inner", 0.0)) != 0.0:
            raise ValueError("disk requires r_inner = 0")
    elif ddoc["kind"] == "annulus":
        dom = annulus(float(ddoc["r_inner"]), float(ddoc["r_outer"]))
    else:
        raise ValueError(f"unknown domain kind {ddoc['kind']!r}")
    q = float(doc["q"]) if "q" in doc and doc["q"] is not None else None
    params = ProblemParams(theta=float(doc["theta"]), p=float(doc["p"]), q=q, f_spec=f)
    return params, dom


def config_to_json(params: ProblemParams, domain: RadialDomain) -> str:
    return json.dumps(config_to_dict(params, domain), sort_keys=True, indent=2)


def config_from_json(text: str) -> tuple[ProblemParams, RadialDomain]:
    return config_from_dict(json.loads(text))
