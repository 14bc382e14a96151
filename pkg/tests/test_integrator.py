"""Implicit-Euler step and discrete derivative chain."""

import numpy as np
import pytest

from softtrajopt.exceptions import IntegrationError
from softtrajopt.integrator import (
    ImplicitStepSettings,
    discrete_hessians,
    discrete_jacobians,
    implicit_step,
    residual,
    residual_derivatives,
    rollout,
)
from softtrajopt.models import LinearModel, RigidCartPole


def decay_model(lam=1.0):
    return LinearModel(np.diag([-lam, -lam]), np.array([[1.0], [0.0]]))


def test_linear_decay_step_closed_form():
    # implicit Euler on xdot = -x gives x' = x / (1 + h); h = 0.1 from x = 1
    model = decay_model()
    st = ImplicitStepSettings(h=0.1)
    xp, iters, norm = implicit_step(model, np.array([1.0, 1.0]), np.zeros(1), st)
    assert np.allclose(xp, 1.0 / 1.1, rtol=0, atol=1e-12)
    assert norm < st.newton_tol


def test_affine_system_converges_in_one_newton_iteration():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4))
    B = rng.normal(size=(4, 2))
    model = LinearModel(A, B)
    st = ImplicitStepSettings(h=0.05)
    x = rng.normal(size=4)
    u = rng.normal(size=2)
    # start from a deliberately bad guess so the count is meaningful
    xp, iters, _ = implicit_step(model, x, u, st, guess=x + 10.0)
    assert iters == 1
    assert np.allclose(residual(model, x, xp, u, st.h), 0.0, atol=1e-12)


def test_stiff_decay_stable_at_large_step():
    # h * lam = 10: explicit Euler diverges, implicit contracts by 1/(1 + 10)
    model = decay_model(lam=1000.0)
    st = ImplicitStepSettings(h=0.01)
    x = np.array([1.0, -1.0])
    for _ in range(20):
        x, _, _ = implicit_step(model, x, np.zeros(1), st)
        assert np.all(np.isfinite(x))
    # the exact map contracts to (1/11)^20 ~ 1e-21; the iterate bottoms out
    # at the Newton tolerance
    assert np.abs(x).max() < 1e-10


def test_residual_structure_exact():
    model = RigidCartPole()
    st = ImplicitStepSettings(h=0.01)
    x = np.array([0.1, 0.7, -0.2, 0.3])
    u = np.array([1.5])
    xp, _, _ = implicit_step(model, x, u, st)
    rd = residual_derivatives(model, x, xp, u, st.h, order=2)
    A, B = model.jac_f(xp, u)
    assert np.array_equal(rd.g_x, -np.eye(4))
    assert np.allclose(rd.g_xp, np.eye(4) - st.h * A, atol=0)
    assert np.allclose(rd.g_u, -st.h * B, atol=0)
    fxx, fuu, fxu = model.hess_f(xp, u)
    assert np.allclose(rd.g_xpxp, -st.h * fxx, atol=0)
    assert np.allclose(rd.g_uu, -st.h * fuu, atol=0)
    assert np.allclose(rd.g_xpu, -st.h * fxu, atol=0)


def _step_map(model, st, x, u):
    xp, _, _ = implicit_step(model, x, u, st)
    return xp


def test_discrete_jacobians_match_fd_through_newton():
    model = RigidCartPole()
    st = ImplicitStepSettings(h=0.02, newton_tol=1e-13)
    x = np.array([0.3, 2.0, 0.5, -1.0])
    u = np.array([3.0])
    xp, _, _ = implicit_step(model, x, u, st)
    rd = residual_derivatives(model, x, xp, u, st.h)
    fx, fu = discrete_jacobians(rd)

    eps = 1e-6
    fx_fd = np.zeros_like(fx)
    for j in range(4):
        e = np.zeros(4)
        e[j] = eps
        fx_fd[:, j] = (_step_map(model, st, x + e, u) - _step_map(model, st, x - e, u)) / (2 * eps)
    fu_fd = (_step_map(model, st, x, u + eps) - _step_map(model, st, x, u - eps)) / (2 * eps)
    assert np.abs(fx - fx_fd).max() < 1e-6
    assert np.abs(fu - fu_fd[:, None]).max() < 1e-6


def test_discrete_hessians_match_fd_of_discrete_jacobians():
    model = RigidCartPole()
    st = ImplicitStepSettings(h=0.02, newton_tol=1e-13)
    x = np.array([0.1, 1.2, -0.4, 0.6])
    u = np.array([2.0])
    xp, _, _ = implicit_step(model, x, u, st)
    rd = residual_derivatives(model, x, xp, u, st.h, order=2)
    fx, fu = discrete_jacobians(rd)
    Fxx, Fuu, Fxu = discrete_hessians(rd, fx, fu)

    def jacs_at(xq, uq):
        xpq, _, _ = implicit_step(model, xq, uq, st)
        return discrete_jacobians(residual_derivatives(model, xq, xpq, uq, st.h))

    eps = 1e-5
    for j in range(4):
        e = np.zeros(4)
        e[j] = eps
        fx_p, fu_p = jacs_at(x + e, u)
        fx_m, fu_m = jacs_at(x - e, u)
        assert np.abs(Fxx[:, :, j] - (fx_p - fx_m) / (2 * eps)).max() < 1e-4
        assert np.abs(Fxu[:, j, :] - (fu_p - fu_m) / (2 * eps)).max() < 1e-4
    fx_p, fu_p = jacs_at(x, u + eps)
    fx_m, fu_m = jacs_at(x, u - eps)
    assert np.abs(Fuu[:, 0, :] - (fu_p - fu_m).T[0] / (2 * eps)).max() < 1e-4
    # symmetry of the second-derivative tensors in their trailing axes
    assert np.allclose(Fxx, np.swapaxes(Fxx, 1, 2), atol=1e-12)


def test_rollout_matches_stepwise_and_reports_failure_index():
    model = RigidCartPole()
    st = ImplicitStepSettings(h=0.01)
    x0 = np.zeros(4)
    us = 0.5 * np.ones((30, 1))
    xs = rollout(model, x0, us, st)
    x = x0
    for k in range(30):
        x, _, _ = implicit_step(model, x, us[k], st, guess=None if k == 0 else x)
    assert np.allclose(xs[-1], x, atol=1e-12)

    bad = ImplicitStepSettings(h=0.01, max_newton_iters=1, newton_tol=1e-16,
                               line_search=False)
    with pytest.raises(IntegrationError) as ei:
        rollout(model, x0, 50.0 * np.ones((30, 1)), bad)
    assert ei.value.step_index is not None


def test_rk4_rollout_matches_reference_ode():
    from scipy.integrate import solve_ivp

    model = RigidCartPole()
    st = ImplicitStepSettings(h=0.001)
    x0 = np.array([0.0, 0.5, 0.0, 0.0])
    us = np.zeros((200, 1))
    xs = rollout(model, x0, us, st, scheme="rk4")
    sol = solve_ivp(lambda t, x: model.eval_f(x, np.zeros(1)), (0, 0.2), x0,
                    rtol=1e-10, atol=1e-12)
    assert np.abs(xs[-1] - sol.y[:, -1]).max() < 1e-8
