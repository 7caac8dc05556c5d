import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracgrid.grid import DomainGrid
from fracgrid.kernels import FracParams, KernelGrid, TimeGrid, delta_kernel, pc_pair, rl_kernel
from fracgrid.solver import (
    Nonlinearity,
    SolveConfig,
    SolverError,
    StepProblem,
    fractional_ode,
    heat_mode_error,
    implicit_step,
    minimize,
    refinement_order,
    solve,
    step_weights,
)

# ---------------------------------------------------------------------------
# time weights
# ---------------------------------------------------------------------------


def test_lead_weight_half_order():
    tg = TimeGrid(1.0, 100)
    w = step_weights(rl_kernel(0.5, tg))
    # K_1 / tau = g_{3/2}(tau) / tau = tau^{-1/2} / Gamma(3/2)
    assert w.lead == pytest.approx(2 / math.sqrt(math.pi) * tg.tau**-0.5, rel=1e-13)
    assert w.monotone
    for m in (1, 2, 17, 100):
        c = w.coefficients(m)
        assert c.size == m
        assert np.all(c >= 0)
        assert c.sum() == pytest.approx(w.cells[0], rel=1e-12)


def test_unit_kernel_gives_difference_from_start():
    tg = TimeGrid(1.0, 8)
    w = step_weights(rl_kernel(1.0, tg))
    hist = np.arange(1.0, 10.0) ** 2
    for m in range(1, 9):
        assert w.operator(m, hist, hist[m]) == pytest.approx(hist[m] - hist[0])


def test_point_mass_gives_backward_difference():
    tg = TimeGrid(1.0, 8)
    w = step_weights(delta_kernel(tg))
    hist = np.arange(1.0, 10.0) ** 2
    for m in range(1, 9):
        assert w.operator(m, hist, hist[m]) == pytest.approx((hist[m] - hist[m - 1]) / tg.tau)


def test_operator_matches_product_integration():
    # D_m u = (1/tau) [ sum_j K_{m-j+1}(u_j - u_0) - sum_j K_{m-j}(u_j - u_0) ]
    tg = TimeGrid(2.0, 12)
    K = pc_pair(FracParams(0.3, 0.7), tg).k.cells
    w = step_weights(pc_pair(FracParams(0.3, 0.7), tg).k)
    rng = np.random.default_rng(1)
    u = rng.normal(size=13)
    for m in range(1, 13):
        now = sum(K[m - j] * (u[j] - u[0]) for j in range(1, m + 1))
        before = sum(K[m - 1 - j] * (u[j] - u[0]) for j in range(1, m))
        assert w.operator(m, u, u[m]) == pytest.approx((now - before) / tg.tau, abs=1e-11)


def test_nonpositive_lead_rejected():
    tg = TimeGrid(1.0, 4)
    with pytest.raises(SolverError):
        step_weights(KernelGrid(tg, np.array([0.0, 1.0, 1.0, 1.0])))


# ---------------------------------------------------------------------------
# spatially homogeneous problem
# ---------------------------------------------------------------------------


def test_fractional_ode_pure_power():
    errs = []
    for M in (100, 400, 1600):
        u = fractional_ode(rl_kernel(0.5, TimeGrid(1.0, M)), 1.0)
        errs.append(abs(u[-1] - 2 / math.sqrt(math.pi)) / (2 / math.sqrt(math.pi)))
    assert errs[-1] <= 0.02
    assert refinement_order([1 / 100, 1 / 400, 1 / 1600], errs) >= 0.5


def _integral_of_l(a, mu, T):
    with mpmath.workdps(30):
        g = lambda s: s ** (a - 1) * mpmath.exp(-mu * s) / mpmath.gamma(a)
        return float(mpmath.quad(g, [0, T]) + mu * mpmath.quad(lambda s: (T - s) * g(s), [0, T]))


@pytest.mark.parametrize("a,mu", [(0.5, 1.0), (0.3, 2.0), (0.8, 0.25)])
def test_fractional_ode_tempered(a, mu):
    exact = _integral_of_l(a, mu, 1.0)
    errs = []
    for M in (100, 400, 1600):
        u = fractional_ode(pc_pair(FracParams(a, mu), TimeGrid(1.0, M)).k, 1.0)
        errs.append(abs(u[-1] - exact) / exact)
    assert errs[-1] <= 0.02
    assert refinement_order([1 / 100, 1 / 400, 1 / 1600], errs) >= 0.5


def test_fractional_ode_relaxation_matches_mittag_leffler():
    # u' of order 1/2 equal to -lam u has u = E_{1/2}(-lam sqrt t) = exp(lam^2 t) erfc(lam sqrt t)
    lam, T = 3.0, 0.5
    exact = float(mpmath.exp(lam**2 * T) * mpmath.erfc(lam * mpmath.sqrt(T)))
    errs = []
    for M in (50, 200, 800):
        w = step_weights(rl_kernel(0.5, TimeGrid(T, M)))
        u = np.empty(M + 1)
        u[0] = 1.0
        for m in range(1, M + 1):
            u[m] = w.lead * w.target(m, u) / (w.lead + lam)
        errs.append(abs(u[-1] - exact))
    assert refinement_order([1 / 50, 1 / 200, 1 / 800], errs) >= 0.8


def test_fractional_ode_callable_and_array_sources():
    k = rl_kernel(0.5, TimeGrid(1.0, 50))
    a = fractional_ode(k, lambda t: 2 * np.ones_like(t))
    b = fractional_ode(k, np.full(50, 2.0))
    c = 2 * fractional_ode(k, 1.0)
    assert np.allclose(a, b) and np.allclose(a, c)


def test_refinement_order_exact_power():
    hs = np.array([0.1, 0.05, 0.025])
    assert refinement_order(hs, 3 * hs**1.5) == pytest.approx(1.5)


# ---------------------------------------------------------------------------
# step energy derivatives
# ---------------------------------------------------------------------------


def _problem(seed, p, dim, kind, gamma):
    rng = np.random.default_rng(seed)
    dom = DomainGrid((1.0,) * dim, (6,) * dim if dim == 2 else (9,))
    nl = Nonlinearity(kind=kind, p=p, gamma=gamma, c2=0.7, eps_reg=1e-2)
    prob = StepProblem(dom, nl, lead=3.0)
    prob.set_step(
        rng.normal(size=dom.shape),
        np.where(dom.interior, 0.0, rng.normal(size=dom.shape)),
        rng.normal(size=dom.shape),
    )
    return prob, rng.normal(size=prob.interior.size)


@given(
    st.integers(0, 10**6),
    st.floats(1.3, 4.0),
    st.sampled_from([1, 2]),
    st.sampled_from(["pLaplace", "pLaplaceLowerOrder"]),
    st.floats(1.2, 3.0),
)
@settings(max_examples=40, deadline=None)
def test_gradient_and_hessian_match_finite_differences(seed, p, dim, kind, gamma):
    prob, v = _problem(seed, p, dim, kind, gamma)
    g = prob.gradient(v)
    H = prob.hessian(v).toarray()
    h = 1e-6
    rng = np.random.default_rng(seed + 1)
    d = rng.normal(size=v.size)
    fd_e = (prob.energy(v + h * d) - prob.energy(v - h * d)) / (2 * h)
    assert fd_e == pytest.approx(np.dot(g, d), rel=1e-5, abs=1e-7)
    fd_g = (prob.gradient(v + h * d) - prob.gradient(v - h * d)) / (2 * h)
    assert np.allclose(fd_g, H @ d, rtol=1e-4, atol=1e-6)
    assert np.allclose(H, H.T, atol=1e-10)
    assert np.linalg.eigvalsh(H).min() > 0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_newton_and_gradient_descent_agree(p):
    prob, v0 = _problem(7, p, 1, "pLaplace", 1.5)
    a = minimize(prob, v0, 1e-10, 200, "newton")
    b = minimize(prob, v0, 1e-8, 20000, "gd")
    assert a.converged and b.converged
    assert np.allclose(a.v, b.v, atol=1e-6)
    assert a.iterations < b.iterations


# ---------------------------------------------------------------------------
# full solves
# ---------------------------------------------------------------------------


def _cfg(**kw):
    base = dict(
        kernel=FracParams(0.5),
        domain=DomainGrid((1.0,), (33,)),
        time=TimeGrid(1.0, 32),
        nonlinearity=Nonlinearity(p=2.0),
    )
    base.update(kw)
    return SolveConfig(**base)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("dim", [1, 2])
def test_constants_preserved(p, dim):
    dom = DomainGrid((1.0,) * dim, (17,) * dim if dim == 1 else (9, 9))
    cfg = _cfg(domain=dom, time=TimeGrid(1.0, 8), nonlinearity=Nonlinearity(p=p), u0=0.7, boundary=0.7)
    u = solve(cfg).field.values
    assert np.max(np.abs(u - 0.7)) <= 1e-10


@pytest.mark.parametrize("p,alpha", [(1.5, 0.3), (2.0, 0.5), (3.0, 0.8)])
def test_discrete_max_principle(p, alpha):
    rng = np.random.default_rng(3)
    u0 = rng.uniform(0, 1, 33)
    u0[[0, -1]] = 0
    cfg = _cfg(kernel=FracParams(alpha), nonlinearity=Nonlinearity(p=p), u0=u0)
    u = solve(cfg).field.values
    assert u.max() <= 1 + 1e-9 and u.min() >= -1e-9
    # no source: the maximum never grows
    assert np.all(np.diff(u.max(axis=1)) <= 1e-9)


def test_heat_orders():
    errs_t = [heat_mode_error(65, M) for M in (8, 16, 32)]
    assert refinement_order([1 / 8, 1 / 16, 1 / 32], errs_t) >= 0.8
    errs_x = [heat_mode_error(n, 4000) for n in (9, 17, 33)]
    assert refinement_order([1 / 8, 1 / 16, 1 / 32], errs_x) >= 1.6


def test_subdiffusive_mode_follows_mittag_leffler():
    dom = DomainGrid((1.0,), (17,))
    h = dom.spacing[0]
    lam = 4 / h**2 * math.sin(math.pi * h / 2) ** 2  # discrete eigenvalue
    x = dom.coordinates()[0]
    errs = []
    for M in (25, 100, 400):
        cfg = _cfg(domain=dom, time=TimeGrid(0.5, M), u0=lambda t, x: np.sin(math.pi * x))
        u = solve(cfg).field.values[-1]
        amp = float(mpmath.exp(lam**2 * 0.5) * mpmath.erfc(lam * mpmath.sqrt(0.5)))
        errs.append(np.max(np.abs(u - amp * np.sin(math.pi * x))))
    assert refinement_order([1 / 25, 1 / 100, 1 / 400], errs) >= 0.8
    assert errs[-1] < 1e-4


def test_memory_slows_decay():
    dom = DomainGrid((1.0,), (17,))
    tg = TimeGrid(1.0, 64)
    u0 = lambda t, x: np.sin(math.pi * x)
    frac = solve(_cfg(domain=dom, time=tg, u0=u0)).field.values[-1].max()
    heat = solve(_cfg(domain=dom, time=tg, u0=u0, kernel=delta_kernel(tg))).field.values[-1].max()
    assert frac > 10 * heat


def test_two_dimensional_heat_mode():
    dom = DomainGrid((1.0, 1.0), (17, 17))
    tg = TimeGrid(0.05, 50)
    X, Y = dom.coordinates()
    cfg = _cfg(
        domain=dom,
        time=tg,
        kernel=delta_kernel(tg),
        u0=lambda t, x, y: np.sin(math.pi * x) * np.sin(math.pi * y),
    )
    u = solve(cfg).field.values[-1]
    exact = math.exp(-2 * math.pi**2 * 0.05) * np.sin(math.pi * X) * np.sin(math.pi * Y)
    assert np.max(np.abs(u - exact)) < 0.02


def test_absorption_lowers_solution():
    base = _cfg(source=5.0)
    plain = solve(base).field.values
    absorbed = solve(_cfg(source=5.0, nonlinearity=Nonlinearity("pLaplaceLowerOrder", c2=3.0))).field.values
    assert np.all(absorbed <= plain + 1e-12)
    assert absorbed.max() < plain.max()


def test_natural_growth_without_gradient_term_is_plain():
    rng = np.random.default_rng(0)
    u0 = rng.uniform(0, 1, 33)
    u0[[0, -1]] = 0
    a = solve(_cfg(u0=u0, source=2.0, nonlinearity=Nonlinearity("naturalGrowth", p=3.0, C2=0.0)))
    b = solve(_cfg(u0=u0, source=2.0, nonlinearity=Nonlinearity("pLaplace", p=3.0)))
    assert np.allclose(a.field.values, b.field.values, atol=1e-9)
    assert not a.diagnostics["cap_active"]


def test_natural_growth_cap_flag():
    bump = lambda t, x: np.exp(-((x - 0.5) ** 2) / 0.01)
    res = solve(
        _cfg(time=TimeGrid(0.1, 4), u0=bump, nonlinearity=Nonlinearity("naturalGrowth", p=2.0, C2=0.1, cap=1.0))
    )
    assert res.diagnostics["cap_active"]
    assert res.diagnostics["structure"].startswith("outside")


def test_gradient_source_raises_solution():
    bump = lambda t, x: 0.5 * np.exp(-((x - 0.5) ** 2) / 0.0225)
    a = solve(_cfg(u0=bump, nonlinearity=Nonlinearity("naturalGrowth", p=2.0, C2=0.1))).field.values
    b = solve(_cfg(u0=bump, nonlinearity=Nonlinearity("pLaplace", p=2.0))).field.values
    assert np.all(a >= b - 1e-12)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


def test_grid_mismatch_rejected():
    with pytest.raises(SolverError):
        solve(_cfg(kernel=rl_kernel(0.5, TimeGrid(1.0, 16))))


def test_inner_failure_reported():
    cfg = _cfg(nonlinearity=Nonlinearity(p=3.0), source=10.0, max_iter=1, method="gd")
    hist = np.zeros((33, 33))
    with pytest.raises(SolverError, match="inner solver"):
        implicit_step(hist, 1, cfg)


@pytest.mark.parametrize(
    "kw", [dict(kind="heat"), dict(p=1.0), dict(C0=0.0), dict(eps_reg=-1.0)]
)
def test_nonlinearity_validation(kw):
    with pytest.raises(ValueError):
        Nonlinearity(**kw)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(tol=0.0)
    with pytest.raises(ValueError):
        _cfg(max_iter=0)
    with pytest.raises(ValueError):
        solve(_cfg(u0=np.zeros(5)))


def test_eps_default_depends_on_p():
    assert Nonlinearity(p=1.5).eps == 1e-8
    assert Nonlinearity(p=3.0).eps == 0.0
    assert Nonlinearity("pLaplaceLowerOrder", p=3.0, gamma=1.5).eps == 1e-8
    assert Nonlinearity("pLaplaceLowerOrder", p=3.0, gamma=2.5).eps == 0.0
