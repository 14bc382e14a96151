"""Projected-Newton box QP against a brute-force face-enumeration oracle."""

import itertools

import numpy as np
import pytest

from softtrajopt.boxqp import feedback_gains, kkt_error, solve_boxqp
from softtrajopt.exceptions import ConfigurationError


def brute_force_boxqp(H, g, lb, ub):
    """Enumerate every lo/free/hi face assignment and keep the best feasible
    stationary point.  Exponential, fine for m <= 4."""
    m = g.shape[0]
    best_u, best_f = None, np.inf
    for faces in itertools.product((-1, 0, 1), repeat=m):
        u = np.empty(m)
        free = [j for j, s in enumerate(faces) if s == 0]
        for j, s in enumerate(faces):
            if s == -1:
                u[j] = lb[j]
            elif s == 1:
                u[j] = ub[j]
        if free:
            idx = np.array(free)
            rhs = -(g[idx] + H[np.ix_(idx, [j for j in range(m) if j not in free])]
                    @ u[[j for j in range(m) if j not in free]])
            try:
                u[idx] = np.linalg.solve(H[np.ix_(idx, idx)], rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(u[idx] < lb[idx] - 1e-10) or np.any(u[idx] > ub[idx] + 1e-10):
                continue
        f = 0.5 * u @ H @ u + g @ u
        if f < best_f:
            best_f, best_u = f, u
    return best_u, best_f


def random_pd(rng, m):
    A = rng.normal(size=(m, m))
    return A @ A.T + 0.1 * np.eye(m)


def test_matches_brute_force_on_random_problems():
    rng = np.random.default_rng(0)
    for trial in range(200):
        m = int(rng.integers(1, 5))
        H = random_pd(rng, m)
        g = 3.0 * rng.normal(size=m)
        lb = -rng.uniform(0.1, 2.0, size=m)
        ub = rng.uniform(0.1, 2.0, size=m)
        res = solve_boxqp(H, g, lb, ub)
        assert res.status == "converged", f"trial {trial}: {res.status}"
        u_ref, f_ref = brute_force_boxqp(H, g, lb, ub)
        f = 0.5 * res.u_star @ H @ res.u_star + g @ res.u_star
        assert f <= f_ref + 1e-7, f"trial {trial}"
        assert np.abs(res.u_star - u_ref).max() < 1e-6, f"trial {trial}"
        assert kkt_error(res.u_star, H @ res.u_star + g, lb, ub) < 1e-8


def test_unconstrained_minimum_inside_box():
    H = np.diag([2.0, 4.0])
    g = np.array([-1.0, 2.0])
    res = solve_boxqp(H, g, np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    assert np.allclose(res.u_star, [0.5, -0.5], atol=1e-9)
    assert res.free_set.all()


def test_fully_clamped_solution():
    # gradient pushes both coordinates past the same bound
    H = np.eye(2)
    g = np.array([5.0, 5.0])
    res = solve_boxqp(H, g, np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    assert np.allclose(res.u_star, [-1.0, -1.0])
    assert not res.free_set.any()
    L = feedback_gains(res, np.ones((2, 3)))
    assert np.array_equal(L, np.zeros((2, 3)))


def test_infinite_bounds_reduce_to_newton():
    rng = np.random.default_rng(7)
    H = random_pd(rng, 3)
    g = rng.normal(size=3)
    res = solve_boxqp(H, g, np.full(3, -np.inf), np.full(3, np.inf))
    assert np.abs(H @ res.u_star + g).max() < 1e-8


def test_feedback_gains_free_rows_solve_newton_system():
    rng = np.random.default_rng(11)
    H = random_pd(rng, 3)
    g = np.array([0.1, -8.0, 0.2])   # drive coordinate 1 to its bound
    lb = np.array([-1.0, -1.0, -1.0])
    ub = np.array([1.0, 0.5, 1.0])
    res = solve_boxqp(H, g, lb, ub)
    Qux = rng.normal(size=(3, 4))
    L = feedback_gains(res, Qux)
    f = res.free_set
    assert np.allclose(H[np.ix_(f, f)] @ L[f], -Qux[f], atol=1e-9)
    assert np.array_equal(L[~f], np.zeros_like(L[~f]))


def test_dimension_mismatch_raises():
    with pytest.raises(ConfigurationError):
        solve_boxqp(np.eye(2), np.zeros(3), np.zeros(3), np.ones(3))
    with pytest.raises(ConfigurationError):
        solve_boxqp(np.eye(2), np.zeros(2), np.ones(2), np.zeros(2))
