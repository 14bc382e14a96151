"""Cost containers, bounds, and trajectory cost evaluation."""

import numpy as np
import pytest

from softtrajopt.exceptions import ConfigurationError
from softtrajopt.ocp import (
    ControlBounds,
    OcpProblem,
    QuadraticCost,
    SolverTrace,
    cost_derivatives,
    stage_cost,
    terminal_cost,
    terminal_cost_derivatives,
    trajectory_cost,
)


def simple_cost():
    return QuadraticCost.from_diagonals([2.0, 4.0], [0.5], [6.0, 8.0],
                                        np.array([1.0, -1.0]))


def test_stage_and_terminal_cost_values():
    cost = simple_cost()
    x = np.array([0.0, 0.0])
    u = np.array([2.0])
    # 1/2 (2*1 + 4*1) + 1/2 * 0.5 * 4 = 3 + 1 = 4
    assert stage_cost(cost, x, u) == pytest.approx(4.0)
    # 1/2 (6*1 + 8*1) = 7
    assert terminal_cost(cost, x) == pytest.approx(7.0)


def test_cost_derivatives_match_finite_differences():
    cost = simple_cost()
    rng = np.random.default_rng(1)
    x = rng.normal(size=2)
    u = rng.normal(size=1)
    lx, lu, lxx, luu, lux = cost_derivatives(cost, x, u)
    eps = 1e-7
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        fd = (stage_cost(cost, x + e, u) - stage_cost(cost, x - e, u)) / (2 * eps)
        assert abs(lx[j] - fd) < 1e-6
    fd = (stage_cost(cost, x, u + eps) - stage_cost(cost, x, u - eps)) / (2 * eps)
    assert abs(lu[0] - fd) < 1e-6
    gx, Gxx = terminal_cost_derivatives(cost, x)
    fd = (terminal_cost(cost, x + [eps, 0]) - terminal_cost(cost, x - [eps, 0])) / (2 * eps)
    assert abs(gx[0] - fd) < 1e-5
    assert np.array_equal(Gxx, cost.Qfw)
    assert np.array_equal(lux, np.zeros((1, 2)))


def test_trajectory_cost_quadratures():
    cost = simple_cost()
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=0.2, N=2,
                      x0=np.zeros(2))
    xs = np.zeros((3, 2))
    us = np.zeros((2, 1))
    # stage cost at e = target is 3.0 everywhere with zero controls
    left = trajectory_cost(prob, xs, us, "left_rectangle")
    trap = trajectory_cost(prob, xs, us, "trapezoid")
    assert left == pytest.approx(0.1 * (3.0 + 3.0) + 7.0)
    assert trap == pytest.approx(0.05 * ((3.0 + 3.0) + (3.0 + 3.0)) + 7.0)


def test_bounds_validation_and_clamp():
    b = ControlBounds.symmetric(2.0, m=3)
    assert b.m == 3
    assert np.array_equal(b.clamp(np.array([5.0, -5.0, 1.0])), [2.0, -2.0, 1.0])
    assert b.contains(np.zeros(3))
    assert not b.contains(np.array([2.1, 0.0, 0.0]))
    with pytest.raises(ConfigurationError):
        ControlBounds(np.array([1.0]), np.array([-1.0]))


def test_cost_validation():
    with pytest.raises(ConfigurationError):
        QuadraticCost.from_diagonals([1.0, -2.0], [1.0], [1.0, 1.0], np.zeros(2))
    with pytest.raises(ConfigurationError):
        QuadraticCost.from_diagonals([1.0, 1.0], [0.0], [1.0, 1.0], np.zeros(2))
    with pytest.raises(ConfigurationError):
        QuadraticCost.from_diagonals([1.0, 1.0], [1.0], [1.0, 1.0], np.zeros(3))


def test_problem_invariants():
    cost = simple_cost()
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=2.0, N=100,
                      x0=np.zeros(2))
    assert prob.h == pytest.approx(0.02)
    with pytest.raises(ConfigurationError):
        OcpProblem(cost, ControlBounds.unbounded(1), t_f=-1.0, N=10, x0=np.zeros(2))
    with pytest.raises(ConfigurationError):
        OcpProblem(cost, ControlBounds.unbounded(2), t_f=1.0, N=10, x0=np.zeros(2))


def test_trace_records_and_summaries():
    tr = SolverTrace()
    tr.record(index=0, cost=10.0, grad_norm=1.0, accepted=True, alpha=1.0,
              wall_time=0.5)
    tr.record(index=1, cost=8.0, grad_norm=0.5, accepted=True, alpha=0.5,
              wall_time=0.3)
    assert np.array_equal(tr.costs, [10.0, 8.0])
    assert tr.mean_iter_time == pytest.approx(0.4)
