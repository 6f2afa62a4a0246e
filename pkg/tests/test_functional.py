import json
import math

import numpy as np
import pytest
import scipy.integrate

from polarmin.functional import (
    FSpec,
    Multipliers,
    ProblemParams,
    config_from_dict,
    config_from_json,
    config_to_json,
    eval_objective,
    euler_residual,
    g_term,
    lp_norm,
    m_term,
    mean_constraint,
    multipliers_from_identities,
    n_term,
    phi,
    power_law,
    psi,
    zero_f,
)
from polarmin.grids import Field, annulus, build_polar_grid, disk, grad_sq, integrate
from polarmin.solve import _antisym_project
from polarmin.spectral import eigenfield, neumann_mode

from test_grids import smooth_field


def test_psi_basics():
    for th in (0.0, 0.1, 0.25, 0.49):
        assert psi(0.0, th) == 0.0
    assert psi(2.5, 0.0) == 2.5
    assert psi(-2.5, 0.0) == -2.5


def test_psi_value_against_quadrature_oracle():
    # psi(3, 1/2) should equal the integral of (1+t)^(-1/2) over [0, 3]
    oracle, err = scipy.integrate.quad(lambda t: (1.0 + abs(t)) ** -0.5, 0.0, 3.0)
    assert err < 1e-10
    assert abs(oracle - 2.0) <= 1e-10
    assert abs(psi(3.0, 0.5) - oracle) <= 1e-12


def test_psi_bounded_by_identity_and_monotone():
    xs = np.linspace(-50, 50, 401)
    for th in (0.1, 0.25, 0.49):
        vals = psi(xs, th)
        assert np.all(np.abs(vals) <= np.abs(xs) + 1e-15)
        assert np.all(np.diff(vals) > 0)
        assert np.allclose(vals, -psi(-xs, th), atol=1e-15)


def test_phi_inverse_pair():
    xs = np.concatenate([-np.logspace(-8, 3, 300), [0.0], np.logspace(-8, 3, 300)])
    for th in (0.0, 0.1, 0.25, 0.49):
        back = phi(psi(xs, th), th)
        assert np.max(np.abs(back - xs) / np.maximum(np.abs(xs), 1e-30)) <= 1e-12
    assert phi(0.0, 0.3) == 0.0
    assert abs(phi(2.0, 0.5) - 3.0) <= 1e-12


def test_objective_zero_field():
    g = build_polar_grid(disk(1.0), 16, 16)
    params = ProblemParams(theta=0.2, p=2.0)
    assert eval_objective(params, g, Field(g, np.zeros(g.shape))) == 0.0


def test_objective_equivalence_with_substituted_energy():
    for dom in (disk(1.0), annulus(0.5, 1.0)):
        g = build_polar_grid(dom, 24, 48)
        for th in (0.0, 0.25, 0.49):
            params = ProblemParams(theta=th, p=2.0)
            for seed in range(3):
                v = smooth_field(g, seed)
                lhs = eval_objective(params, g, v)
                rhs = integrate(g, grad_sq(g, Field(g, psi(v.values, th))))
                assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_objective_at_eigenfunction():
    g = build_polar_grid(disk(1.0), 96, 192)
    mode = neumann_mode(1, 1)
    u = eigenfield(mode, g)
    params = ProblemParams(theta=0.0, p=2.0)
    val = eval_objective(params, g, u)
    assert abs(val - 3.3900) <= 0.01 * 3.39


def test_objective_nonnegative_for_zero_f():
    g = build_polar_grid(disk(1.0), 12, 16)
    params = ProblemParams(theta=0.3, p=4.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = Field(g, rng.standard_normal(g.shape))
        assert eval_objective(params, g, v) >= 0.0


def test_mean_and_lp_norm():
    g = build_polar_grid(disk(1.0), 32, 64)
    fs = Field(g, np.broadcast_to(np.sin(g.a_nodes), g.shape))
    assert abs(mean_constraint(g, fs)) <= 1e-12
    f = smooth_field(g, 4)
    for p in (1.5, 2.0, 7.0):
        n1 = lp_norm(g, f, p)
        n2 = lp_norm(g, Field(g, -2.5 * f.values), p)
        assert abs(n2 - 2.5 * n1) <= 1e-12 * n2
    const = Field(g, np.full(g.shape, (1.0 / math.pi) ** (1.0 / 3.0)))
    assert abs(lp_norm(g, const, 3.0) - 1.0) <= 1e-10


def test_g_term_zero_f():
    params = ProblemParams(theta=0.2, p=2.0)
    t = np.linspace(-5, 5, 11)
    assert np.all(g_term(1.0, t, params) == 0.0)


def test_g_term_matches_finite_differences():
    params = ProblemParams(theta=0.25, p=3.0, f_spec=power_law(1.0, 2.0))

    def halfweighted(t):
        return -1.0 * abs(t) ** 2.0 / (2.0 * (1.0 + abs(t)) ** 0.5)

    h = 1e-6
    for t in np.concatenate([np.linspace(-50, -0.5, 40), np.linspace(0.5, 50, 40)]):
        fd = (halfweighted(t + h) - halfweighted(t - h)) / (2 * h)
        assert abs(g_term(0.7, t, params) - fd) <= 1e-6
    # value at t = 1 frozen from the finite-difference oracle
    assert abs(g_term(0.7, 1.0, params) - (-0.6187184335382291)) <= 1e-12


def test_g_term_odd():
    params = ProblemParams(theta=0.1, p=4.0, f_spec=power_law(0.3, 2.5))
    t = np.linspace(0.01, 30, 57)
    assert np.allclose(g_term(1.0, -t, params), -g_term(1.0, t, params), atol=1e-15)


def test_sign_condition_consequence_for_small_p():
    # for the admissible power family with p < 2, t * d/dt[F/(1+|t|)^{2theta}]
    # is nonpositive; the derivative is twice g
    params = ProblemParams(theta=0.2, p=1.5, f_spec=power_law(0.1, 1.2))
    t = np.concatenate([-np.logspace(-6, 3, 300), np.logspace(-6, 3, 300)])
    assert np.all(t * g_term(1.0, t, params) <= 1e-15)


def test_m_term_monotone_and_odd():
    for th, p in ((0.1, 2.0), (0.25, 1.5), (0.49, 32.0), (0.0, 8.0)):
        params = ProblemParams(theta=th, p=p)
        assert m_term(0.0, params) == 0.0
        t = np.linspace(-40, 40, 10001)
        vals = m_term(t, params)
        assert np.all(np.diff(vals) >= 0.0)
        assert np.allclose(vals, -m_term(-t, params), atol=1e-12)


def test_n_term_zero_f_zero_c():
    params = ProblemParams(theta=0.2, p=2.0)
    t = np.linspace(-5, 5, 11)
    assert np.all(n_term(1.0, t, params, 0.0) == 0.0)


def test_euler_residual_at_eigenfunction():
    g = build_polar_grid(disk(1.0), 128, 256)
    mode = neumann_mode(1, 1)
    u = eigenfield(mode, g)
    params = ProblemParams(theta=0.0, p=2.0)
    res = euler_residual(params, g, u, Multipliers(0.0, -mode.eigenvalue)).values
    w = g.w[2:-2]
    rms = math.sqrt(float(np.sum(w * res[2:-2] ** 2) / np.sum(w)))
    unorm = math.sqrt(float(np.sum(g.w * u.values**2) / np.sum(g.w)))
    assert rms <= 1e-2 * unorm


def test_euler_residual_total_on_constant():
    g = build_polar_grid(disk(1.0), 8, 8)
    params = ProblemParams(theta=0.2, p=3.0)
    res = euler_residual(params, g, Field(g, np.full(g.shape, 2.0)), Multipliers(0.3, -1.2))
    assert np.all(np.isfinite(res.values))


def test_euler_residual_sign_symmetry():
    # with even F the equation is odd under (u, c) -> (-u, -c)
    g = build_polar_grid(disk(1.0), 12, 16)
    params = ProblemParams(theta=0.2, p=3.0, f_spec=power_law(0.5, 2.0))
    u = smooth_field(g, 8)
    r1 = euler_residual(params, g, u, Multipliers(0.17, -2.0)).values
    r2 = euler_residual(params, g, Field(g, -u.values), Multipliers(-0.17, -2.0)).values
    assert np.allclose(r1, -r2, atol=1e-13)


def test_multipliers_at_eigenfunction():
    g = build_polar_grid(disk(1.0), 96, 192)
    mode = neumann_mode(1, 1)
    u = eigenfield(mode, g)
    params = ProblemParams(theta=0.0, p=2.0)
    m = multipliers_from_identities(params, g, u)
    assert abs(m.c) <= 1e-8
    assert abs(m.d + mode.eigenvalue) <= 0.02 * mode.eigenvalue


def test_multipliers_antisymmetric_c_vanishes():
    g = build_polar_grid(disk(1.0), 32, 64)
    raw = smooth_field(g, 13).values
    u = Field(g, _antisym_project(g, raw))
    params = ProblemParams(theta=0.2, p=2.0)
    m = multipliers_from_identities(params, g, u)
    assert abs(m.c) <= 1e-12


def test_multipliers_match_norm_identity_for_zero_f():
    # with F = 0, p = 2 the d formula reduces to the damped Dirichlet integral
    g = build_polar_grid(disk(1.0), 24, 48)
    params = ProblemParams(theta=0.15, p=2.0)
    u = smooth_field(g, 21)
    theta = params.theta
    au = np.abs(u.values)
    gs = grad_sq(g, u).values
    explicit = -float(
        np.sum(g.w * gs * (1.0 + (1.0 - theta) * au) / (1.0 + au) ** (2 * theta + 1))
    )
    m = multipliers_from_identities(params, g, u)
    assert abs(m.d - explicit) <= 1e-12 * max(1.0, abs(explicit))


def test_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(theta=0.5, p=2.0)
    with pytest.raises(ValueError):
        ProblemParams(theta=-0.01, p=2.0)
    with pytest.raises(ValueError):
        ProblemParams(theta=0.1, p=1.0)
    with pytest.raises(ValueError):
        ProblemParams(theta=0.1, p=2.0, q=1.0)
    with pytest.raises(ValueError):
        ProblemParams(theta=0.1, p=2.0, q=2.1)
    p = ProblemParams(theta=0.0, p=2.0)  # classical limit admitted
    assert p.q == 2.0
    p = ProblemParams(theta=0.25, p=2.0)
    assert p.q == 1.5


def test_fspec_validation():
    with pytest.raises(ValueError, match="exceed 1"):
        FSpec("power_law", c0=0.1, alpha=0.5)
    with pytest.raises(ValueError, match="exceed 1"):
        FSpec("power_law", c0=0.1, alpha=1.0)
    with pytest.raises(ValueError):
        FSpec("power_law", c0=-1.0, alpha=2.0)
    with pytest.raises(ValueError, match="<= p"):
        ProblemParams(theta=0.1, p=1.5, f_spec=power_law(0.1, 1.8))
    # the p < 2 sign condition holds for the admissible family
    ProblemParams(theta=0.2, p=1.5, f_spec=power_law(0.1, 1.2))
    ProblemParams(theta=0.49, p=1.5, f_spec=power_law(2.0, 1.1))


def test_config_round_trip_and_strictness():
    params = ProblemParams(theta=0.2, p=1.5, f_spec=power_law(0.1, 1.2))
    dom = annulus(0.5, 1.0)
    text = config_to_json(params, dom)
    back_p, back_d = config_from_json(text)
    assert back_p == params
    assert back_d == dom
    doc = json.loads(text)
    doc["extra"] = 1
    with pytest.raises(ValueError, match="unknown"):
        config_from_dict(doc)
    doc = json.loads(text)
    doc["F"]["bogus"] = 2
    with pytest.raises(ValueError, match="F specification"):
        config_from_dict(doc)
    doc = json.loads(text)
    doc["domain"]["slant"] = 2
    with pytest.raises(ValueError, match="domain"):
        config_from_dict(doc)
    with pytest.raises(ValueError, match="missing"):
        config_from_dict({"theta": 0.1})


def test_config_defaults():
    params, dom = config_from_dict(
        {"theta": 0.1, "p": 2.0, "domain": {"kind": "disk", "r_outer": 1.0}}
    )
    assert params.f_spec == zero_f()
    assert dom.kind == "disk"
