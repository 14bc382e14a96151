import numpy as np
import pytest

from softtrajopt import dual as dm


def fd_jac(fun, x, h=1e-6):
    x = np.asarray(x, float)
    y0 = np.atleast_1d(fun(x))
    J = np.zeros((y0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h)
    return J


def test_scalar_chain():
    def f(x):
        return dm.dconcat([dm.sin(x[0]) * dm.cos(x[1]), x[0] * x[1] ** 3])

    x = np.array([0.7, -0.3])
    v, J = dm.jacobian(f, x)
    assert np.allclose(v, [np.sin(0.7) * np.cos(-0.3), 0.7 * (-0.3) ** 3])
    assert np.allclose(J, fd_jac(lambda z: dm.value(f(z)), x), atol=1e-8)


def test_div_sqrt_exp():
    def f(x):
        return dm.dconcat([dm.sqrt(x[0]) / x[1], dm.exp(-x[0] * x[1])])

    x = np.array([2.0, 1.5])
    _, J = dm.jacobian(f, x)
    assert np.allclose(J, fd_jac(lambda z: dm.value(f(z)), x), atol=1e-7)


def test_mv_outer_vdot():
    A = np.arange(6.0).reshape(2, 3)

    def f(x):
        y = dm.mv(A, x)
        s = dm.vdot(y, y)
        M = dm.outer(x, x)
        return dm.dconcat([y, dm.dconcat([s]), dm.mv(M, x)])

    x = np.array([0.3, -1.2, 0.5])
    _, J = dm.jacobian(f, x)
    assert np.allclose(J, fd_jac(lambda z: dm.value(f(z)), x), atol=1e-6)


def test_solve_spd_derivative():
    def make_A(x):
        base = dm.dconcat([
            dm.dconcat([3.0 + x[0] ** 2, dm.dconcat([x[0] * x[1]])]),
        ])
        # build 2x2 SPD matrix via outer products to stay dual-generic
        a11 = 3.0 + x[0] ** 2
        a12 = 0.5 * x[0] * x[1]
        a22 = 2.0 + x[1] ** 2
        row1 = dm.dconcat([a11, a12])
        row2 = dm.dconcat([a12, a22])
        return row1, row2

    def f(x):
        row1, row2 = make_A(x)
        A = dm.dconcat([dm.expand_at(row1, 0), dm.expand_at(row2, 0)], axis=0)
        b = dm.dconcat([dm.sin(x[0]), x[1]])
        return dm.solve_spd(A, b)

    x = np.array([0.4, -0.8])
    v, J = dm.jacobian(f, x)
    assert np.allclose(J, fd_jac(lambda z: dm.value(f(z)), x), atol=1e-6)


def test_nested_second_derivative():
    # f(x) = sin(x0)*x1; Hessian known analytically
    def f(x):
        return dm.sin(x[0]) * x[1]

    x0 = np.array([0.9, 0.4])

    outer_x, t_out = dm.seed(x0)
    inner_x, t_in = dm.seed(outer_x)
    y = f(inner_x)
    _, g = dm.split_seeded(y, t_in, 2)     # gradient, still dual in outer tag
    gval, H = dm.split_seeded(g, t_out, 2)
    gval = dm.value(gval)
    H = dm.value(H)
    s, c = np.sin(0.9), np.cos(0.9)
    assert np.allclose(gval, [c * 0.4, s])
    assert np.allclose(H, [[-s * 0.4, c], [c, 0.0]])


def test_nested_solve_spd():
    # second derivatives through an SPD solve vs finite differences of the jacobian
    def f(x):
        a11 = 2.0 + x[0] ** 2
        a12 = 0.3 * x[0]
        a22 = 1.5 + dm.sin(x[1]) ** 2
        A = dm.dconcat([
            dm.expand_at(dm.dconcat([a11, a12]), 0),
            dm.expand_at(dm.dconcat([a12, a22]), 0),
        ], axis=0)
        b = dm.dconcat([x[1], dm.cos(x[0])])
        return dm.solve_spd(A, b)

    x0 = np.array([0.3, -0.5])
    outer_x, t_out = dm.seed(x0)
    inner_x, t_in = dm.seed(outer_x)
    y = f(inner_x)
    _, g = dm.split_seeded(y, t_in, 2)
    _, H = dm.split_seeded(g, t_out, 2)
    H = dm.value(H)  # shape (2, 2, 2): d2 y_i / dx_j dx_k

    h = 1e-5
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        _, Jp = dm.jacobian(f, x0 + e)
        _, Jm = dm.jacobian(f, x0 - e)
        assert np.allclose(H[:, :, k], (Jp - Jm) / (2 * h), atol=1e-5)


def test_non_pd_raises():
    A = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(dm.NonPositiveDefiniteError):
        dm.solve_spd(A, np.ones(2))
