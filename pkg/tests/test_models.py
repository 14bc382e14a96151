"""Dynamics models: AD derivatives, reference physics, diagnostics."""

import numpy as np
import pytest

from softtrajopt.exceptions import ConfigurationError, InputError, UnsupportedOperationError
from softtrajopt.models import (
    LinearModel,
    RigidCartPole,
    RigidCartPoleParams,
    RigidPendubot,
    check_derivatives,
    fd_jacobian,
)


def test_linear_model_jacobians_exact():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    B = rng.normal(size=(4, 2))
    model = LinearModel(A, B)
    x = rng.normal(size=4)
    u = rng.normal(size=2)
    assert np.allclose(model.eval_f(x, u), A @ x + B @ u, atol=1e-14)
    Ax, Bu = model.jac_f(x, u)
    assert np.allclose(Ax, A, atol=1e-14)
    assert np.allclose(Bu, B, atol=1e-14)
    fxx, fuu, fxu = model.hess_f(x, u)
    assert np.abs(fxx).max() == 0.0 and np.abs(fuu).max() == 0.0


def sympy_cartpole_oracle(params, x, u):
    """Independent acceleration oracle from a symbolic Euler-Lagrange
    derivation of the cart plus uniform-rod pole."""
    import sympy as sp

    t = sp.Symbol("t")
    d = sp.Function("d")(t)
    th = sp.Function("th")(t)
    p = params
    r = p.pole_length / 2
    I_com = p.pole_mass * p.pole_length ** 2 / 12
    # rod center of mass; theta = 0 hangs down along +x of the base frame
    xc = d * 0 + r * sp.cos(th)
    yc = d + r * sp.sin(th)
    # cart slides along the horizontal axis, gravity pulls along +x
    x_cart = sp.Integer(0)
    y_cart = d
    T = (p.cart_mass / 2) * (sp.diff(x_cart, t) ** 2 + sp.diff(y_cart, t) ** 2) \
        + (p.pole_mass / 2) * (sp.diff(xc, t) ** 2 + sp.diff(yc, t) ** 2) \
        + (I_com / 2) * sp.diff(th, t) ** 2
    V = -p.gravity * (p.pole_mass * xc + p.cart_mass * x_cart)
    L = T - V
    qs = [d, th]
    F = [sp.Symbol("F"), -p.joint_damping * sp.diff(th, t)]
    eqs = [sp.diff(sp.diff(L, sp.diff(q, t)), t) - sp.diff(L, q) - f
           for q, f in zip(qs, F)]
    dd, thdd = sp.symbols("dd thdd")
    subs = {sp.diff(d, t, 2): dd, sp.diff(th, t, 2): thdd,
            sp.diff(d, t): x[2], sp.diff(th, t): x[3],
            d: x[0], th: x[1], sp.Symbol("F"): u[0]}
    sol = sp.solve([e.subs(subs) for e in eqs], [dd, thdd])
    return np.array([float(sol[dd]), float(sol[thdd])])


def test_cartpole_accelerations_match_sympy_oracle():
    model = RigidCartPole()
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.normal(size=4)
        u = rng.normal(size=1)
        acc = model.eval_f(x, u)[2:]
        ref = sympy_cartpole_oracle(model.params, x, u)
        assert np.abs(acc - ref).max() < 1e-10


def test_cartpole_derivative_check_passes():
    model = RigidCartPole()
    report = check_derivatives(model, samples=20, seed=0)
    assert report.jac_ok and report.hess_ok
    assert report.max_jac_err < 1e-5
    assert report.max_hess_err < 1e-4


def test_pendubot_derivative_check_and_energy_sanity():
    model = RigidPendubot()
    report = check_derivatives(model, samples=20, seed=1)
    assert report.jac_ok and report.hess_ok
    # hanging rest is an equilibrium
    f0 = model.eval_f(np.zeros(4), np.zeros(1))
    assert np.abs(f0).max() < 1e-12


def test_hessian_modes_agree():
    model = RigidCartPole()
    x = np.array([0.2, 1.1, -0.4, 0.8])
    u = np.array([2.0])
    d = model.hess_f(x, u, mode="dual")
    f = model.hess_f(x, u, mode="fd")
    for a, b in zip(d, f):
        assert np.abs(a - b).max() < 1e-4


def test_missing_hessian_capability_raises():
    model = RigidCartPole()
    model.has_hessians = False
    with pytest.raises(UnsupportedOperationError):
        model.hess_f(np.zeros(4), np.zeros(1))


def test_input_validation():
    model = RigidCartPole()
    with pytest.raises(ConfigurationError):
        model.eval_f(np.zeros(3), np.zeros(1))
    with pytest.raises(ConfigurationError):
        model.eval_f(np.zeros(4), np.zeros(2))
    with pytest.raises(InputError):
        model.eval_f(np.array([np.nan, 0, 0, 0]), np.zeros(1))


def test_derivative_check_flags_corrupted_jacobian():
    # negative control: a model lying about its Jacobian must be caught
    class Corrupted(RigidCartPole):
        def jac_f(self, x, u):
            Ax, Bu = super().jac_f(x, u)
            Ax = Ax.copy()
            Ax[2, 1] += 0.05
            return Ax, Bu

    report = check_derivatives(Corrupted(), samples=5, seed=0,
                               check_hessians=False)
    assert not report.jac_ok


def test_fd_jacobian_on_smooth_map():
    f = lambda z: np.array([z[0] ** 2 + z[1], np.sin(z[1])])
    J = fd_jacobian(f, np.array([1.0, 0.5]))
    assert np.abs(J - [[2.0, 1.0], [0.0, np.cos(0.5)]]).max() < 1e-6
