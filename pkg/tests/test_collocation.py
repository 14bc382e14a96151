"""Trapezoidal transcription and the augmented-Lagrangian solver."""

import numpy as np
import scipy.sparse as sp

from softtrajopt.collocation import (
    CollocationSettings,
    Transcription,
    defect_jacobian,
    defects,
    jacobian_triplets,
    objective,
    solve_collocation,
)
from softtrajopt.models import LinearModel, RigidCartPole
from softtrajopt.ocp import ControlBounds, OcpProblem, QuadraticCost


def decay_problem(h=0.1, N=1):
    model = LinearModel(np.diag([-1.0, -1.0]), np.array([[1.0], [0.0]]))
    cost = QuadraticCost.from_diagonals([1.0, 1.0], [1.0], [1.0, 1.0], np.zeros(2))
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=N * h, N=N,
                      x0=np.array([1.0, 1.0]))
    return model, prob


def test_single_step_defect_closed_form():
    # trapezoid on xdot = -x: x1 (1 + h/2) = x0 (1 - h/2), so with h = 0.1
    # the zero-defect step is x1 = 0.95 / 1.05
    model, prob = decay_problem()
    tr = Transcription(model, prob)
    x1 = (0.95 / 1.05) * prob.x0
    z = tr.join(np.vstack([prob.x0, x1]), np.zeros((1, 1)))
    assert np.abs(defects(tr, z)).max() < 1e-14
    z_bad = tr.join(np.vstack([prob.x0, prob.x0]), np.zeros((1, 1)))
    assert np.abs(defects(tr, z_bad)).max() > 1e-2


def test_defect_jacobian_matches_finite_differences():
    model = RigidCartPole()
    N, h = 5, 0.05
    cost = QuadraticCost.from_diagonals([1.0] * 4, [1.0], [1.0] * 4, np.zeros(4))
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=N * h, N=N,
                      x0=np.array([0.1, 0.4, -0.2, 0.3]))
    tr = Transcription(model, prob)
    rng = np.random.default_rng(5)
    z = tr.initial_guess() + 0.3 * rng.normal(size=tr.dim)
    J = defect_jacobian(tr, z).toarray()
    eps = 1e-6
    J_fd = np.zeros_like(J)
    for j in range(tr.dim):
        e = np.zeros(tr.dim)
        e[j] = eps
        J_fd[:, j] = (defects(tr, z + e) - defects(tr, z - e)) / (2 * eps)
    assert np.abs(J - J_fd).max() < 1e-6


def test_defect_jacobian_sparsity_structure():
    model = RigidCartPole()
    N, h = 10, 0.05
    cost = QuadraticCost.from_diagonals([1.0] * 4, [1.0], [1.0] * 4, np.zeros(4))
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=N * h, N=N,
                      x0=np.zeros(4))
    tr = Transcription(model, prob)
    J = defect_jacobian(tr, tr.initial_guess())
    rows, cols, vals = jacobian_triplets(J)
    assert J.shape == (N * 4, tr.dim)
    # each defect row touches x_k, x_{k+1}, and at most two control stages
    dense = np.abs(J.toarray()) > 0
    for k in range(N):
        touched_states = {j // 4 for j in np.nonzero(
            dense[k * 4: (k + 1) * 4, : tr.n_state_vars].any(axis=0))[0]}
        assert touched_states <= {k, k + 1}
        touched_controls = {j for j in np.nonzero(
            dense[k * 4: (k + 1) * 4, tr.n_state_vars:].any(axis=0))[0]}
        assert touched_controls <= {k, min(k + 1, N - 1)}
    assert len(rows) == len(cols) == len(vals)


def kkt_qp_oracle(model, prob):
    """Dense equality-constrained QP solve of the linear-dynamics
    transcription: eliminate the pinned x_0, solve the KKT system."""
    tr = Transcription(model, prob)
    from softtrajopt.collocation import _cost_grad_hess

    z0 = tr.initial_guess()
    g0, H = _cost_grad_hess(tr, z0)
    H = H.toarray()
    # the objective is quadratic with minimum-gradient relation g(z) = H z + c
    c = g0 - H @ z0
    J = defect_jacobian(tr, z0).toarray()   # constant for linear dynamics
    d0 = defects(tr, z0)
    b = J @ z0 - d0                         # defects are affine: d = J z - b
    fixed = np.zeros(tr.dim, bool)
    fixed[tr.x_index(0)] = True
    fr = ~fixed
    nf = fr.sum()
    nc = J.shape[0]
    KKT = np.zeros((nf + nc, nf + nc))
    KKT[:nf, :nf] = H[np.ix_(fr, fr)]
    KKT[:nf, nf:] = J[:, fr].T
    KKT[nf:, :nf] = J[:, fr]
    rhs = np.concatenate([-c[fr] - H[np.ix_(fr, fixed)] @ prob.x0,
                          b - J[:, fixed] @ prob.x0])
    sol = np.linalg.solve(KKT, rhs)
    z = np.empty(tr.dim)
    z[fixed] = prob.x0
    z[fr] = sol[:nf]
    return z


def test_linear_problem_matches_kkt_oracle():
    model, _ = decay_problem()
    N, h = 20, 0.1
    cost = QuadraticCost.from_diagonals([5.0, 2.0], [0.5], [10.0, 10.0],
                                        np.array([0.3, -0.1]))
    prob = OcpProblem(cost, ControlBounds.unbounded(1), t_f=N * h, N=N,
                      x0=np.array([1.0, -1.0]))
    z_ref = kkt_qp_oracle(model, prob)
    res, trace = solve_collocation(model, prob)
    assert trace.status == "converged"
    assert res.defect_norm < 1e-6
    tr = Transcription(model, prob)
    cost_ref = objective(tr, z_ref)
    assert abs(res.total_cost - cost_ref) / max(cost_ref, 1e-12) < 1e-4
    assert np.abs(res.z - z_ref).max() < 1e-3


def test_control_bounds_are_respected():
    model, _ = decay_problem()
    N, h = 20, 0.1
    cost = QuadraticCost.from_diagonals([5.0, 5.0], [0.01], [50.0, 50.0],
                                        np.array([3.0, 0.0]))
    prob = OcpProblem(cost, ControlBounds.symmetric(0.4, 1), t_f=N * h, N=N,
                      x0=np.zeros(2))
    res, trace = solve_collocation(model, prob)
    assert trace.status == "converged"
    assert np.all(res.us >= -0.4 - 1e-12) and np.all(res.us <= 0.4 + 1e-12)
    assert np.any(np.isclose(np.abs(res.us), 0.4, atol=1e-9))
    assert res.defect_norm < 1e-6


def test_cartpole_partial_swing_feasible():
    model = RigidCartPole()
    N, h = 40, 0.03
    target = np.array([0.0, 1.0, 0.0, 0.0])
    cost = QuadraticCost.from_diagonals([1.0, 5.0, 0.1, 0.1], [0.05],
                                        [50.0, 100.0, 5.0, 5.0], target)
    prob = OcpProblem(cost, ControlBounds.symmetric(40.0, 1), t_f=N * h, N=N,
                      x0=np.zeros(4))
    res, trace = solve_collocation(model, prob)
    assert trace.status == "converged"
    assert res.defect_norm < 1e-6
    assert abs(res.xs[-1, 1] - 1.0) < 0.2
