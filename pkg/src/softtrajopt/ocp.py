"""Problem definitions, quadratic costs, trajectories, and solver traces.

States are stacked vectors x = [q; qdot] of length 2n, controls are vectors of
length m; both are plain float ndarrays throughout the toolkit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

_PSD_EIG_FLOOR = -1e-10


def _as_matrix(a, name):
    a = np.asarray(a, float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"{name} must be a square matrix, got {a.shape}")
    return a


def _check_symmetric_psd(a, name, strict=False):
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ConfigurationError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(a)
    if strict:
        if w.min() <= 0:
            raise ConfigurationError(f"{name} must be positive definite")
    elif w.min() < _PSD_EIG_FLOOR:
        raise ConfigurationError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class ControlBounds:
    """Box bounds lb <= u <= ub; infinite entries mean unconstrained."""

    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.lb, float)
        ub = np.asarray(self.ub, float)
        if lb.shape != ub.shape or lb.ndim != 1:
            raise ConfigurationError("bounds must be 1-D vectors of equal length")
        if np.any(lb > ub):
            raise ConfigurationError("lower bound exceeds upper bound")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def m(self):
        return self.lb.shape[0]

    @classmethod
    def symmetric(cls, u_max, m=1):
        u_max = np.broadcast_to(np.asarray(u_max, float), (m,))
        return cls(-u_max, u_max.copy())

    @classmethod
    def unbounded(cls, m):
        return cls(np.full(m, -np.inf), np.full(m, np.inf))

    def clamp(self, u):
        return np.clip(u, self.lb, self.ub)

    def contains(self, u, tol=0.0):
        return bool(np.all(u >= self.lb - tol) and np.all(u <= self.ub + tol))


@dataclass(frozen=True)
class QuadraticCost:
    """Quadratic tracking cost: l = 1/2 (e'Qw e + u'Rw u), lf = 1/2 ef'Qfw ef,
    with e = x_target - x."""

    Qw: np.ndarray
    Rw: np.ndarray
    Qfw: np.ndarray
    x_target: np.ndarray

    def __post_init__(self):
        Qw = _as_matrix(self.Qw, "Qw")
        Rw = _as_matrix(self.Rw, "Rw")
        Qfw = _as_matrix(self.Qfw, "Qfw")
        xt = np.asarray(self.x_target, float)
        if xt.ndim != 1 or xt.shape[0] != Qw.shape[0]:
            raise ConfigurationError("x_target length must match Qw")
        if Qfw.shape != Qw.shape:
            raise ConfigurationError("Qfw must have the same shape as Qw")
        _check_symmetric_psd(Qw, "Qw")
        _check_symmetric_psd(Qfw, "Qfw")
        _check_symmetric_psd(Rw, "Rw", strict=True)
        object.__setattr__(self, "Qw", Qw)
        object.__setattr__(self, "Rw", Rw)
        object.__setattr__(self, "Qfw", Qfw)
        object.__setattr__(self, "x_target", xt)

    @classmethod
    def from_diagonals(cls, q_diag, r_diag, qf_diag, x_target):
        return cls(np.diag(np.asarray(q_diag, float)),
                   np.diag(np.atleast_1d(np.asarray(r_diag, float))),
                   np.diag(np.asarray(qf_diag, float)),
                   x_target)

    def with_target(self, x_target):
        return dataclasses.replace(self, x_target=np.asarray(x_target, float))

    @property
    def nx(self):
        return self.Qw.shape[0]

    @property
    def m(self):
        return self.Rw.shape[0]


@dataclass(frozen=True)
class OcpProblem:
    cost: QuadraticCost
    bounds: ControlBounds
    t_f: float
    N: int
    x0: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("N must be >= 1")
        if self.t_f <= 0:
            raise ConfigurationError("t_f must be positive")
        x0 = np.asarray(self.x0, float)
        if x0.shape != (self.cost.nx,):
            raise ConfigurationError("x0 length must match cost dimension")
        if self.bounds.m != self.cost.m:
            raise ConfigurationError("bounds dimension must match Rw")
        object.__setattr__(self, "x0", x0)

    @property
    def h(self):
        return self.t_f / self.N


@dataclass
class PolicyTrajectory:
    """Nominal trajectory plus the time-varying feedback law from the solver."""

    xs: np.ndarray            # (N+1, 2n)
    us: np.ndarray            # (N, m)
    gains: np.ndarray         # (N, m, 2n)
    ffs: np.ndarray           # (N, m)
    total_cost: float


@dataclass
class IterationRecord:
    index: int
    cost: float
    grad_norm: float
    accepted: bool
    alpha: float
    wall_time: float


@dataclass
class SolverTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    status: str = "running"

    def record(self, **kw):
        self.iterations.append(IterationRecord(**kw))

    @property
    def costs(self):
        return np.array([r.cost for r in self.iterations])

    @property
    def mean_iter_time(self):
        if not self.iterations:
            return float("nan")
        return float(np.mean([r.wall_time for r in self.iterations]))


# ---------------------------------------------------------------------------
# cost evaluation
# ---------------------------------------------------------------------------

def _check_dims(cost, x, u=None):
    if np.shape(x) != (cost.nx,):
        raise ConfigurationError(f"state length {np.shape(x)} != {cost.nx}")
    if u is not None and np.shape(u) != (cost.m,):
        raise ConfigurationError(f"control length {np.shape(u)} != {cost.m}")


def stage_cost(cost, x, u):
    _check_dims(cost, x, u)
    e = cost.x_target - np.asarray(x, float)
    u = np.asarray(u, float)
    return 0.5 * (e @ cost.Qw @ e + u @ cost.Rw @ u)


def terminal_cost(cost, x):
    _check_dims(cost, x)
    e = cost.x_target - np.asarray(x, float)
    return 0.5 * e @ cost.Qfw @ e


def trajectory_cost(prob, xs, us, quadrature="left_rectangle"):
    """Terminal cost plus a quadrature-weighted stage-cost sum.

    ``trapezoid`` evaluates the endpoint stage with u_N := u_{N-1}.
    """
    xs = np.asarray(xs, float)
    us = np.asarray(us, float)
    if xs.shape[0] != prob.N + 1 or us.shape[0] != prob.N:
        raise ConfigurationError("trajectory lengths do not match the horizon")
    h = prob.h
    stages = np.array([stage_cost(prob.cost, xs[k], us[min(k, prob.N - 1)])
                       for k in range(prob.N + 1)])
    if quadrature == "left_rectangle":
        total = h * stages[:-1].sum()
    elif quadrature == "trapezoid":
        total = (h / 2) * (stages[:-1] + stages[1:]).sum()
    else:
        raise ConfigurationError(f"unknown quadrature {quadrature!r}")
    return total + terminal_cost(prob.cost, xs[-1])


def cost_derivatives(cost, x, u):
    """First and second derivatives of the stage cost (exact for quadratics).

    Returns (lx, lu, lxx, luu, lux).
    """
    _check_dims(cost, x, u)
    e = cost.x_target - np.asarray(x, float)
    lx = -cost.Qw @ e
    lu = cost.Rw @ np.asarray(u, float)
    return lx, lu, cost.Qw.copy(), cost.Rw.copy(), np.zeros((cost.m, cost.nx))


def terminal_cost_derivatives(cost, x):
    _check_dims(cost, x)
    e = cost.x_target - np.asarray(x, float)
    return -cost.Qfw @ e, cost.Qfw.copy()
