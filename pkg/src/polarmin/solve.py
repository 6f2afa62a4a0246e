"""Constrained minimizer for the damped Dirichlet energy.

Minimizes the energy over fields with zero quadrature mean and unit Lp
norm, in the full space or in the subspace anti-symmetric across the
x2-axis.  The optimization variable is the substituted field U = psi(u),
which turns the leading term into the plain Dirichlet energy.  Every
iterate is projected exactly onto the constraint set; the duals (c, d) of
the stationarity equation are recovered each step by least squares in the
discrete H1 metric, and the reduced gradient (constraint components
removed) drives a preconditioned backtracking descent on half the
objective, so the converged duals use the same normalization as the
integral identities.  No momentum.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .functional import (
    Multipliers,
    P_REGULARIZATION,
    ProblemParams,
    eval_objective,
    g_term,
    lp_norm,
    multipliers_from_identities,
    phi,
    phi_prime,
    psi,
    signed_power,
    euler_residual,
)
from .grids import Field, PolarGrid, integrate, reflect_field
from .rearrange import (
    SymmetryReport,
    grid_half_planes,
    symmetry_report,
    two_point_rearrange,
    weighted_l2,
)
from .spectral import eigenfield, neumann_mode

__all__ = [
    "SolveOptions",
    "MinimizeResult",
    "CertificationRecord",
    "InfeasibleInitError",
    "minimize",
    "minimize_antisymmetric",
    "build_half_support_competitor",
    "restrict_positive_x1",
    "certify",
    "residual_rms",
]

RESIDUAL_TRIM = 2  # rings skipped at each radial end when reporting residuals


class InfeasibleInitError(RuntimeError):
    """The initial field cannot be projected onto the constraint set."""


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of one minimization.

    grad_tol bounds the H1-dual norm of the reduced (projected) gradient;
    constraint_tol bounds |mean| and |lp_norm - 1| of the returned field
    (held far below it by the exact per-step projection).  init is
    "eigenmode", "random_smooth", or a Field to start from; extra starts
    perturb the base start with seeded low-order harmonics.
    """

    max_iters: int = 6000
    grad_tol: float = 2e-5
    constraint_tol: float = 1e-6
    n_starts: int = 1
    seed: int = 0
    init: object = "eigenmode"
    subspace: Literal["full", "antisymmetric"] = "full"

    def __post_init__(self):
        if self.max_iters <= 0 or self.n_starts < 1:
            raise ValueError("max_iters and n_starts must be positive")
        if not (self.grad_tol > 0 and self.constraint_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.subspace not in ("full", "antisymmetric"):
            raise ValueError("subspace must be 'full' or 'antisymmetric'")
        if isinstance(self.init, str) and self.init not in ("eigenmode", "random_smooth"):
            raise ValueError("init must be 'eigenmode', 'random_smooth' or a Field")


@dataclass(frozen=True)
class MinimizeResult:
    """Gauge-fixed minimizer and its diagnostics.

    lam is the objective recomputed at the returned field; mult comes from
    the integral identities; dual_c/dual_d are the optimizer's own
    least-squares duals (an independent estimate of the same quantities).
    starts_agreement is the relative spread of lam across converged
    multi-starts.
    """

    u: Field
    lam: float
    mult: Multipliers
    iterations: int
    converged: bool
    residual_rms: float
    symmetry: SymmetryReport
    starts_agreement: float
    dual_c: float
    dual_d: float
    grad_norm: float
    merit_segments: tuple
    start_lambdas: tuple
    start_runtimes: tuple

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "c": self.mult.c,
            "d": self.mult.d,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_rms": self.residual_rms,
            "symmetry": self.symmetry.to_dict(),
            "starts_agreement": self.starts_agreement,
            "grad_norm": self.grad_norm,
        }


def _antisym_project(grid: PolarGrid, vals: np.ndarray) -> np.ndarray:
    n_a = grid.n_a
    idx = (n_a // 2 - np.arange(n_a)) % n_a
    return 0.5 * (vals - vals[:, idx])


def _project_feasible(params: ProblemParams, grid: PolarGrid, vals: np.ndarray) -> np.ndarray:
    vals = vals - float(np.sum(grid.w * vals)) / grid.domain.area
    nrm = float(np.sum(grid.w * np.abs(vals) ** params.p)) ** (1.0 / params.p)
    if not nrm > 1e-300:
        raise InfeasibleInitError("initial field vanishes after mean removal")
    return vals / nrm


def _eigenmode_values(grid: PolarGrid) -> np.ndarray:
    if grid.domain.kind == "disk":
        mode = neumann_mode(1, 1, radius=grid.domain.r_outer)
        return eigenfield(mode, grid).values.copy()
    # no closed form on the annulus; the lowest nonconstant mode is
    # cos-shaped in angle and nearly flat in radius
    return np.broadcast_to(np.cos(grid.a_nodes)[None, :], grid.shape).copy()


def _random_smooth_values(grid: PolarGrid, rng: np.random.Generator) -> np.ndarray:
    rho = (grid.r_nodes - grid.domain.r_inner) / (
        grid.domain.r_outer - grid.domain.r_inner
    )
    vals = np.zeros(grid.shape)
    for n in range(4):
        for m in range(3):
            radial = rho**m
            ca, sa = np.cos(n * grid.a_nodes), np.sin(n * grid.a_nodes)
            vals += rng.normal() * radial[:, None] * ca[None, :]
            if n > 0:
                vals += rng.normal() * radial[:, None] * sa[None, :]
    return vals


def _build_start(params, grid, opts, k: int) -> np.ndarray:
    rng = np.random.default_rng([opts.seed, k])
    if isinstance(opts.init, Field):
        if opts.init.grid.key() != grid.key():
            raise ValueError("provided start field lives on a different grid")
        base = opts.init.values.copy()
    elif opts.init == "eigenmode":
        base = _eigenmode_values(grid)
    else:
        base = _random_smooth_values(grid, rng)
    if k > 0:
        if isinstance(opts.init, Field) or opts.init == "eigenmode":
            scale = weighted_l2(grid, base) / math.sqrt(grid.domain.area)
            base = base + 0.5 * scale * _random_smooth_values(grid, rng)
        else:
            base = _random_smooth_values(grid, rng)
    return base


@dataclass
class _RunRecord:
    u: np.ndarray
    lam: float
    converged: bool
    iterations: int
    grad_norm: float
    dual_c: float
    dual_d: float
    merit_segments: tuple
    runtime: float


def _solve_single(params, grid, u0_vals, opts) -> _RunRecord:
    t0 = time.perf_counter()
    theta, p = params.theta, params.p
    w = grid.w
    antisym = opts.subspace == "antisymmetric"
    delta = P_REGULARIZATION if p < 2.0 else 0.0
    power_law = params.f_spec.kind == "power_law"
    r_col = grid.r_nodes[:, None]
    A = grid.stiffness
    solve = grid.h1_solve
    shape = grid.shape

    def project(vals):
        # exact feasibility: subspace, zero mean, unit Lp norm
        if antisym:
            vals = _antisym_project(grid, vals)
        return _project_feasible(params, grid, vals)

    u0_vals = project(u0_vals)

    def objective(U):
        u = phi(U, theta)
        AU = (A @ U.ravel()).reshape(shape)
        J = float(U.ravel() @ AU.ravel())
        if power_law:
            f = params.f_spec
            au = np.abs(u)
            J += f.c0 * float(np.sum(w * au**f.alpha / (1.0 + au) ** (2.0 * theta)))
        return u, AU, J

    U = psi(u0_vals, theta)
    iters = 0
    eta_step = 1.0
    converged = False
    gnorm = math.inf
    c_dual = d_dual = 0.0
    merits = []
    eps = np.finfo(float).eps

    while iters < opts.max_iters:
        u, AU, J = objective(U)
        pp = phi_prime(U, theta)
        merits.append(0.5 * J)
        # gradient of half the objective, and of the two constraints
        g_obj = AU.copy()
        if power_law:
            g_obj -= w * g_term(r_col, u, params) * pp
        g_c1 = w * pp
        g_c2 = w * signed_power(u, p, delta) * pp
        z_obj = solve(g_obj.ravel())
        z_c1 = solve(g_c1.ravel())
        z_c2 = solve(g_c2.ravel())
        # least-squares duals: remove the constraint components from the
        # gradient in the H1-dual metric; these are the stationarity
        # multipliers (c, d) the integral identities estimate independently
        a11 = float(g_c1.ravel() @ z_c1)
        a12 = float(g_c1.ravel() @ z_c2)
        a22 = float(g_c2.ravel() @ z_c2)
        b1 = float(g_c1.ravel() @ z_obj)
        b2 = float(g_c2.ravel() @ z_obj)
        det = a11 * a22 - a12 * a12
        if det > 1e-300:
            c_dual = -(a22 * b1 - a12 * b2) / det
            d_dual = -(a11 * b2 - a12 * b1) / det
        g_red = g_obj + c_dual * g_c1 + d_dual * g_c2
        z_red = (z_obj + c_dual * z_c1 + d_dual * z_c2).reshape(shape)
        if antisym:
            g_red = _antisym_project(grid, g_red)
            z_red = _antisym_project(grid, z_red)
        gTz = float(g_red.ravel() @ z_red.ravel())
        gnorm = math.sqrt(max(gTz, 0.0))
        if gnorm <= opts.grad_tol:
            converged = True
            break
        eta = min(1.0, 2.0 * eta_step)
        accepted = False
        m_val = 0.5 * J
        # required decrease is floored a few ulps above roundoff so a step
        # that cannot improve the merit in double precision registers as a
        # stall instead of spinning
        floor = 32.0 * eps * abs(m_val) if m_val != 0.0 else 0.0
        for _ in range(60):
            u_try = project(phi(U - eta * z_red, theta))
            U_try = psi(u_try, theta)
            _, _, J_t = objective(U_try)
            if 0.5 * J_t <= m_val - max(1e-4 * eta * gTz, floor):
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        U = U_try
        eta_step = eta
        iters += 1

    u_final = project(phi(U, theta))
    u_final = _gauge_fix(grid, u_final, antisym)
    lam = eval_objective(params, grid, Field(grid, u_final))
    return _RunRecord(
        u=u_final,
        lam=lam,
        converged=converged,
        iterations=iters,
        grad_norm=gnorm,
        dual_c=c_dual,
        dual_d=d_dual,
        merit_segments=(tuple(merits),),
        runtime=time.perf_counter() - t0,
    )


def _gauge_fix(grid: PolarGrid, vals: np.ndarray, antisym: bool) -> np.ndarray:
    from .rearrange import foliated_symmetrize, weighted_l2 as _wl2

    rep = symmetry_report(Field(grid, vals))
    n_a = grid.n_a
    s0 = round(rep.axis_angle / grid.delta_a) % n_a
    if antisym:
        # only rotations by 0 or pi preserve the anti-symmetric subspace
        cands = [0 if min(s0, n_a - s0) <= abs(s0 - n_a // 2) else n_a // 2]
    else:
        # when the axis falls between grid angles the moment estimate can be
        # one cell off; pick the neighbor with the smallest foliated defect
        cands = [(s0 - 1) % n_a, s0, (s0 + 1) % n_a]
    best = None
    for s in cands:
        rolled = np.roll(vals, -s, axis=1) if s else vals
        f = Field(grid, rolled)
        defect = _wl2(grid, rolled - foliated_symmetrize(f).values)
        if best is None or defect < best[0]:
            best = (defect, s)
    s = best[1]
    out = np.roll(vals, -s, axis=1) if s else vals.copy()
    if out[-1, 0] < 0.0:
        out = np.roll(-out, -(n_a // 2), axis=1)
    if antisym:
        out = _antisym_project(grid, out)
    return out


def residual_rms(params, grid, u: Field, mult: Multipliers) -> float:
    """Quadrature RMS of the stationarity residual over interior rings.

    The innermost and the two outermost rings are skipped: their rows of
    the variational Laplacian are energy-consistent but not pointwise
    samples of the operator.
    """
    res = euler_residual(params, grid, u, mult).values
    t = RESIDUAL_TRIM
    if grid.n_r <= 2 * t + 1:
        t = 0
    w = grid.w[t : grid.n_r - t]
    r = res[t : grid.n_r - t]
    return math.sqrt(float(np.sum(w * r * r) / np.sum(w)))


def minimize(params: ProblemParams, grid: PolarGrid, opts: SolveOptions) -> MinimizeResult:
    """Best constrained minimizer over opts.n_starts starts.

    The returned field is gauge-fixed: symmetry axis rotated onto +x1 and
    sign chosen so the value nearest (+r_outer, 0) is nonnegative.
    """
    if opts.subspace == "antisymmetric" and grid.domain.kind != "disk":
        raise ValueError("the anti-symmetric problem is posed on the disk")
    runs = []
    for k in range(opts.n_starts):
        u0 = _build_start(params, grid, opts, k)
        runs.append(_solve_single(params, grid, u0, opts))
    conv = [r for r in runs if r.converged]
    pool = conv if conv else runs
    best = min(pool, key=lambda r: r.lam)
    if len(conv) >= 2:
        lams = [r.lam for r in conv]
        spread = (max(lams) - min(lams)) / max(abs(best.lam), 1e-300)
    else:
        spread = 0.0
    u = Field(grid, best.u)
    mult = multipliers_from_identities(params, grid, u)
    return MinimizeResult(
        u=u,
        lam=best.lam,
        mult=mult,
        iterations=best.iterations,
        converged=best.converged,
        residual_rms=residual_rms(params, grid, u, mult),
        symmetry=symmetry_report(u),
        starts_agreement=spread,
        dual_c=best.dual_c,
        dual_d=best.dual_d,
        grad_norm=best.grad_norm,
        merit_segments=best.merit_segments,
        start_lambdas=tuple(r.lam for r in runs),
        start_runtimes=tuple(r.runtime for r in runs),
    )


def minimize_antisymmetric(
    params: ProblemParams, grid: PolarGrid, opts: SolveOptions
) -> MinimizeResult:
    """Minimize within the subspace u(x1, x2) = -u(-x1, x2); every iterate
    is re-projected so the result is anti-symmetric to the bit."""
    opts = SolveOptions(
        max_iters=opts.max_iters,
        grad_tol=opts.grad_tol,
        constraint_tol=opts.constraint_tol,
        n_starts=opts.n_starts,
        seed=opts.seed,
        init=opts.init,
        subspace="antisymmetric",
    )
    return minimize(params, grid, opts)


def restrict_positive_x1(v: Field) -> Field:
    """Zero the field outside the open half-disk {x1 > 0}."""
    grid = v.grid
    j = np.arange(grid.n_a)
    mask = (j < grid.n_a // 4) | (j > 3 * (grid.n_a // 4))
    return Field(grid, np.where(mask[None, :], v.values, 0.0))


def build_half_support_competitor(v_as: Field, grid: PolarGrid, params: ProblemParams) -> Field:
    """Feasible competitor supported on one side of the anti-symmetry
    interface: restrict to {x1 > 0}, remove the mean, renormalize to unit
    Lp norm."""
    anti = weighted_l2(grid, v_as.values + reflect_field(v_as, "x2").values)
    scale = weighted_l2(grid, v_as.values)
    if scale == 0.0 or anti > 1e-8 * scale:
        raise ValueError("competitor requires an anti-symmetric input field")
    if abs(lp_norm(grid, v_as, params.p) - 1.0) > 1e-6:
        raise ValueError("competitor requires a unit-norm input field")
    restricted = restrict_positive_x1(v_as)
    if weighted_l2(grid, restricted.values) == 0.0:
        raise ValueError("degenerate competitor: restriction vanishes")
    vals = restricted.values - integrate(grid, restricted) / grid.domain.area
    nrm = float(np.sum(grid.w * np.abs(vals) ** params.p)) ** (1.0 / params.p)
    if not nrm > 1e-300:
        raise ValueError("degenerate competitor: zero after mean removal")
    return Field(grid, vals / nrm)


@dataclass(frozen=True)
class CertificationRecord:
    """Post-hoc consistency checks of a converged minimizer."""

    residual_rms: float
    mean_violation: float
    norm_violation: float
    identity_c: float
    identity_d: float
    dual_c: float
    dual_d: float
    consistency_c: float
    consistency_d: float
    rearrange_min_gap: float
    rearrange_max_rel_dev: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def certify(result: MinimizeResult, params: ProblemParams, grid: PolarGrid) -> CertificationRecord:
    """Cross-validate a converged run: constraint violations, agreement of
    the identity-based duals with the optimizer's duals, and objective
    non-improvement under two-point rearrangement over a fan of 8 grid
    half-planes."""
    if not result.converged:
        raise ValueError("certification requires a converged result")
    u = result.u
    mean_v = abs(integrate(grid, u))
    norm_v = abs(lp_norm(grid, u, params.p) - 1.0)
    ident = result.mult
    cons_c = abs(ident.c - result.dual_c)
    cons_d = abs(ident.d - result.dual_d)
    gaps = []
    for h in grid_half_planes(grid, 8):
        val = eval_objective(params, grid, two_point_rearrange(u, h))
        gaps.append(val - result.lam)
    min_gap = min(gaps)
    max_rel = max(abs(g) for g in gaps) / max(abs(result.lam), 1e-300)
    lam_scale = max(abs(result.lam), 1e-300)
    passed = (
        mean_v <= 1e-8
        and norm_v <= 1e-8
        and cons_d <= 1e-2 * max(abs(ident.d), 1.0)
        and min_gap >= -1e-2 * lam_scale
    )
    return CertificationRecord(
        residual_rms=result.residual_rms,
        mean_violation=mean_v,
        norm_violation=norm_v,
        identity_c=ident.c,
        identity_d=ident.d,
        dual_c=result.dual_c,
        dual_d=result.dual_d,
        consistency_c=cons_c,
        consistency_d=cons_d,
        rearrange_min_gap=min_gap,
        rearrange_max_rel_dev=max_rel,
        passed=passed,
    )
