"""Direct transcription with trapezoidal collocation.

Decision vector z stacks all states x_0..x_N, then all controls u_0..u_{N-1}.
Dynamics enter as trapezoidal defect constraints; the endpoint dynamics stage
reuses u_{N-1}.  The solver is an augmented-Lagrangian loop whose inner
problems are handled by projected Gauss-Newton steps on the sparse KKT-free
quadratic model, with the control box bounds enforced by projection and the
initial state pinned through equal lower and upper bounds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError
from .ocp import SolverTrace, stage_cost, terminal_cost


class Transcription:
    """Index bookkeeping between (xs, us) trajectories and the flat vector z."""

    def __init__(self, model, prob):
        self.model = model
        self.prob = prob
        self.nx = prob.cost.nx
        self.m = prob.cost.m
        self.N = prob.N
        self.h = prob.h
        self.n_state_vars = self.nx * (self.N + 1)
        self.dim = self.n_state_vars + self.m * self.N

    def x_index(self, k):
        return slice(k * self.nx, (k + 1) * self.nx)

    def u_index(self, k):
        base = self.n_state_vars
        return slice(base + k * self.m, base + (k + 1) * self.m)

    def split(self, z):
        xs = z[: self.n_state_vars].reshape(self.N + 1, self.nx)
        us = z[self.n_state_vars:].reshape(self.N, self.m)
        return xs, us

    def join(self, xs, us):
        return np.concatenate([np.asarray(xs, float).ravel(),
                               np.asarray(us, float).ravel()])

    def bounds(self):
        lb = np.full(self.dim, -np.inf)
        ub = np.full(self.dim, np.inf)
        lb[self.x_index(0)] = self.prob.x0
        ub[self.x_index(0)] = self.prob.x0
        for k in range(self.N):
            lb[self.u_index(k)] = self.prob.bounds.lb
            ub[self.u_index(k)] = self.prob.bounds.ub
        return lb, ub

    def initial_guess(self, us_init=None, xs_init=None):
        us = np.zeros((self.N, self.m)) if us_init is None \
            else np.asarray(us_init, float)
        xs = np.tile(self.prob.x0, (self.N + 1, 1)) if xs_init is None \
            else np.asarray(xs_init, float)
        return self.join(xs, us)

    def _node_values(self, z):
        """f, A, B at every node k = 0..N, with u_N := u_{N-1}."""
        xs, us = self.split(z)
        fs = np.zeros((self.N + 1, self.nx))
        As = np.zeros((self.N + 1, self.nx, self.nx))
        Bs = np.zeros((self.N + 1, self.nx, self.m))
        for k in range(self.N + 1):
            u = us[min(k, self.N - 1)]
            fs[k] = self.model.eval_f(xs[k], u)
            As[k], Bs[k] = self.model.jac_f(xs[k], u)
        return fs, As, Bs


def defects(tr, z, fs=None):
    """Trapezoidal defect vector, N * nx entries."""
    xs, us = tr.split(z)
    if fs is None:
        fs = np.array([tr.model.eval_f(xs[k], us[min(k, tr.N - 1)])
                       for k in range(tr.N + 1)])
    d = xs[1:] - xs[:-1] - (tr.h / 2.0) * (fs[:-1] + fs[1:])
    return d.ravel()


def defect_jacobian(tr, z, jacs=None):
    """Sparse Jacobian of the defect vector with respect to z (CSR)."""
    if jacs is None:
        _, As, Bs = tr._node_values(z)
    else:
        As, Bs = jacs
    h2 = tr.h / 2.0
    nx, m, N = tr.nx, tr.m, tr.N
    rows, cols, vals = [], [], []

    def add_block(r0, c0, M):
        r, c = np.nonzero(np.ones_like(M, dtype=bool))
        rows.append(r0 + r)
        cols.append(c0 + c)
        vals.append(M.ravel())

    I = np.eye(nx)
    for k in range(N):
        r0 = k * nx
        add_block(r0, k * nx, -I - h2 * As[k])
        add_block(r0, (k + 1) * nx, I - h2 * As[k + 1])
        # control columns; the endpoint node folds into u_{N-1}
        Bk = -h2 * Bs[k]
        Bk1 = -h2 * Bs[k + 1]
        cu_k = tr.n_state_vars + k * m
        cu_k1 = tr.n_state_vars + min(k + 1, N - 1) * m
        if cu_k == cu_k1:
            add_block(r0, cu_k, Bk + Bk1)
        else:
            add_block(r0, cu_k, Bk)
            add_block(r0, cu_k1, Bk1)
    J = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N * nx, tr.dim))
    return J


def jacobian_triplets(J):
    """(rows, cols, values) arrays of a sparse matrix, for export."""
    coo = J.tocoo()
    return coo.row.copy(), coo.col.copy(), coo.data.copy()


def objective(tr, z):
    """Trapezoid-quadrature trajectory cost of the transcribed variables."""
    xs, us = tr.split(z)
    stages = np.array([stage_cost(tr.prob.cost, xs[k], us[min(k, tr.N - 1)])
                       for k in range(tr.N + 1)])
    return (tr.h / 2.0) * (stages[:-1] + stages[1:]).sum() \
        + terminal_cost(tr.prob.cost, xs[-1])


def _cost_grad_hess(tr, z):
    """Exact gradient and sparse Hessian of the quadratic objective."""
    cost = tr.prob.cost
    xs, us = tr.split(z)
    N, h = tr.N, tr.h
    wx = np.full(N + 1, h)
    wx[0] = wx[N] = h / 2.0
    grad = np.zeros(tr.dim)
    Hblocks = []
    for k in range(N + 1):
        e = cost.x_target - xs[k]
        Qk = wx[k] * cost.Qw + (cost.Qfw if k == N else 0.0)
        grad[tr.x_index(k)] = -(wx[k] * cost.Qw @ e) \
            + (-(cost.Qfw @ e) if k == N else 0.0)
        Hblocks.append(Qk)
    wu = wx.copy()
    wu[N - 1] = wx[N - 1] + wx[N]   # u_{N-1} serves stages N-1 and N
    for k in range(N):
        grad[tr.u_index(k)] = wu[k] * cost.Rw @ us[k]
        Hblocks.append(wu[k] * cost.Rw)
    H = sp.block_diag(Hblocks, format="csr")
    return grad, H


@dataclass(frozen=True)
class CollocationSettings:
    rho_init: float = 10.0
    rho_scale: float = 10.0
    constraint_tol: float = 1e-6    # defect infinity norm
    opt_tol: float = 1e-4           # projected gradient infinity norm
    max_outer: int = 50
    max_inner: int = 100
    defect_shrink: float = 0.25     # required per-outer defect reduction
    newton_reg: float = 1e-9


@dataclass
class CollocationResult:
    xs: np.ndarray
    us: np.ndarray
    z: np.ndarray
    total_cost: float
    defect_norm: float
    status: str


def _projected_grad_norm(z, grad, lb, ub):
    g = grad.copy()
    g[(z <= lb + 1e-12) & (g > 0)] = 0.0
    g[(z >= ub - 1e-12) & (g < 0)] = 0.0
    return np.abs(g).max()


def _inner_solve(tr, z, lam, rho, lb, ub, settings):
    """Projected Gauss-Newton on the augmented Lagrangian."""
    fixed = lb == ub

    def merit(zq):
        d = defects(tr, zq)
        return objective(tr, zq) + lam @ d + 0.5 * rho * d @ d, d

    phi, d = merit(z)
    for it in range(settings.max_inner):
        fs, As, Bs = tr._node_values(z)
        Jd = defect_jacobian(tr, z, jacs=(As, Bs))
        gC, HC = _cost_grad_hess(tr, z)
        grad = gC + Jd.T @ (lam + rho * d)
        pg = _projected_grad_norm(z, np.where(fixed, 0.0, grad), lb, ub)
        if pg < settings.opt_tol:
            return z, d, pg, phi
        H = (HC + rho * (Jd.T @ Jd)).tocsr()
        free = ~fixed & ~(((z <= lb + 1e-12) & (grad > 0)) |
                          ((z >= ub - 1e-12) & (grad < 0)))
        idx = np.where(free)[0]
        Hff = H[idx][:, idx].tocsc()
        Hff = Hff + settings.newton_reg * sp.eye(idx.size, format="csc")
        try:
            dz_f = spla.spsolve(Hff, -grad[idx])
        except RuntimeError:
            dz_f = -grad[idx]
        if not np.all(np.isfinite(dz_f)):
            dz_f = -grad[idx]
        alpha = 1.0
        while alpha >= 2.0 ** -20:
            z_new = z.copy()
            z_new[idx] = z[idx] + alpha * dz_f
            z_new = np.clip(z_new, lb, ub)
            phi_new, d_new = merit(z_new)
            if phi_new < phi:
                break
            alpha *= 0.5
        if phi_new >= phi:
            return z, d, pg, phi
        z, phi, d = z_new, phi_new, d_new
    return z, d, _projected_grad_norm(z, np.where(fixed, 0.0, grad), lb, ub), phi


def solve_collocation(model, prob, us_init=None, xs_init=None, settings=None):
    """Augmented-Lagrangian solve of the transcribed problem.

    Returns (CollocationResult, SolverTrace); the trace records one entry per
    outer round with the augmented-Lagrangian objective, which may rise while
    feasibility improves.
    """
    settings = settings or CollocationSettings()
    tr = Transcription(model, prob)
    lb, ub = tr.bounds()
    z = np.clip(tr.initial_guess(us_init, xs_init), lb, ub)
    lam = np.zeros(tr.N * tr.nx)
    rho = settings.rho_init
    trace = SolverTrace()
    d_norm_prev = np.inf
    status = "max_outer"
    pg = np.inf
    for outer in range(settings.max_outer):
        t0 = time.perf_counter()
        z, d, pg, phi = _inner_solve(tr, z, lam, rho, lb, ub, settings)
        d_norm = np.abs(d).max() if d.size else 0.0
        trace.record(index=outer, cost=float(phi), grad_norm=float(pg),
                     accepted=True, alpha=1.0,
                     wall_time=time.perf_counter() - t0)
        if d_norm < settings.constraint_tol and pg < settings.opt_tol:
            status = "converged"
            break
        lam = lam + rho * d
        if d_norm > settings.defect_shrink * d_norm_prev:
            rho *= settings.rho_scale
        d_norm_prev = d_norm
    trace.status = status
    xs, us = tr.split(z)
    d_norm = float(np.abs(defects(tr, z)).max())
    return CollocationResult(xs.copy(), us.copy(), z, float(objective(tr, z)),
                             d_norm, status), trace
