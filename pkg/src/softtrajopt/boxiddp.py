"""Control-limited differential dynamic programming on implicit-Euler steps.

Backward pass: stagewise quadratic expansions of the Q function with a box QP
over the control perturbation, honoring the hard input bounds.  Forward pass:
clamped feedback rollout through the implicit integrator with a backtracking
line search on alpha.  Dynamics Jacobians are reused from the converged Newton
solves of the rollout, so each iteration costs one Jacobian sweep, not two.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import boxqp
from .exceptions import ConfigurationError, IntegrationError
from .integrator import (
    ImplicitStepSettings,
    discrete_hessians,
    discrete_jacobians,
    implicit_step,
    residual_derivatives,
    rollout,
)
from .ocp import (
    PolicyTrajectory,
    SolverTrace,
    cost_derivatives,
    stage_cost,
    terminal_cost,
    terminal_cost_derivatives,
    trajectory_cost,
)

_ALPHAS = tuple(2.0 ** -k for k in range(11))


@dataclass(frozen=True)
class BoxIddpSettings:
    max_iters: int = 200
    cost_tol: float = 1e-6          # relative cost decrease
    grad_tol: float = 1e-6          # max stagewise KKT error of Qu
    mu_init: float = 1e-6
    mu_min: float = 1e-6
    mu_max: float = 1e10
    mu_scale: float = 10.0
    alphas: tuple = _ALPHAS
    hessian_mode: str = "gauss_newton"   # or "full_second_order"
    accept_ratio: float = 0.0
    step: ImplicitStepSettings = field(default_factory=ImplicitStepSettings)

    def __post_init__(self):
        if self.hessian_mode not in ("gauss_newton", "full_second_order"):
            raise ConfigurationError(f"unknown hessian_mode {self.hessian_mode!r}")


@dataclass
class BackwardPassResult:
    ffs: np.ndarray           # (N, m) feedforward steps
    gains: np.ndarray         # (N, m, nx)
    d1: float                 # expected decrease, linear term
    d2: float                 # expected decrease, quadratic term
    kkt: float                # max stagewise KKT error of Qu


def backward_pass(model, prob, xs, us, jacs, mu, settings):
    """Riccati-like sweep with a per-stage box QP.  Returns None when a stage
    Hessian stays indefinite after regularization."""
    N = prob.N
    h = prob.h
    nx = prob.cost.nx
    m = prob.cost.m
    full = settings.hessian_mode == "full_second_order"

    Vx, Vxx = terminal_cost_derivatives(prob.cost, xs[N])
    ffs = np.zeros((N, m))
    gains = np.zeros((N, m, nx))
    d1 = d2 = 0.0
    kkt = 0.0
    for k in range(N - 1, -1, -1):
        rd = residual_derivatives(model, xs[k], xs[k + 1], us[k], h,
                                  order=2 if full else 1, jac=jacs[k])
        fx, fu = discrete_jacobians(rd)
        lx, lu, lxx, luu, lux = cost_derivatives(prob.cost, xs[k], us[k])
        # stage cost enters the objective as h * l
        Qx = h * lx + fx.T @ Vx
        Qu = h * lu + fu.T @ Vx
        Qxx = h * lxx + fx.T @ Vxx @ fx
        Quu = h * luu + fu.T @ Vxx @ fu
        Qux = h * lux + fu.T @ Vxx @ fx
        if full:
            Fxx, Fuu, Fxu = discrete_hessians(rd, fx, fu)
            Qxx = Qxx + np.einsum("i,iab->ab", Vx, Fxx)
            Quu = Quu + np.einsum("i,iab->ab", Vx, Fuu)
            Qux = Qux + np.einsum("i,iab->ba", Vx, Fxu)
        Qxx = 0.5 * (Qxx + Qxx.T)
        Quu_reg = 0.5 * (Quu + Quu.T) + mu * np.eye(m)

        dlb = prob.bounds.lb - us[k]
        dub = prob.bounds.ub - us[k]
        qp = boxqp.solve_boxqp(Quu_reg, Qu, dlb, dub,
                               u_init=ffs[k] if k + 1 < N else None)
        if qp.status == "non_pd_hessian":
            return None
        l = qp.u_star
        L = boxqp.feedback_gains(qp, Qux)
        ffs[k] = l
        gains[k] = L
        # stationarity of the original iterate: Qu projected on the feasible
        # directions at delta-u = 0
        kkt = max(kkt, boxqp.kkt_error(np.zeros(m), Qu, dlb, dub))
        d1 += float(l @ Qu)
        d2 += 0.5 * float(l @ Quu_reg @ l)
        Vx = Qx + L.T @ Quu_reg @ l + L.T @ Qu + Qux.T @ l
        Vxx = Qxx + L.T @ Quu_reg @ L + L.T @ Qux + Qux.T @ L
        Vxx = 0.5 * (Vxx + Vxx.T)
    return BackwardPassResult(ffs, gains, d1, d2, kkt)


def forward_pass(model, prob, xs, us, bp, alpha, settings, cost_cap=np.inf):
    """Feedback rollout at step length alpha.  Returns (xs, us, cost, jacs)
    or None when an implicit step fails.

    Stage costs are nonnegative, so the rollout aborts as soon as the running
    sum alone exceeds ``cost_cap``; doomed line-search trials stay cheap.
    """
    N = prob.N
    xs_new = np.zeros_like(xs)
    us_new = np.zeros_like(us)
    xs_new[0] = xs[0]
    total = 0.0
    for k in range(N):
        u = us[k] + alpha * bp.ffs[k] + bp.gains[k] @ (xs_new[k] - xs[k])
        u = prob.bounds.clamp(u)
        try:
            xp, _, _ = implicit_step(model, xs_new[k], u, settings.step,
                                     guess=xs[k + 1])
        except IntegrationError:
            return None
        if not np.all(np.isfinite(xp)):
            return None
        xs_new[k + 1] = xp
        us_new[k] = u
        total += prob.h * stage_cost(prob.cost, xs_new[k], u)
        if total > cost_cap:
            return None
    total += terminal_cost(prob.cost, xs_new[N])
    if total > cost_cap:
        return None
    return xs_new, us_new, total


def trajectory_jacobians(model, xs, us):
    """Continuous Jacobians of f at each converged step point (x', u).

    Computed once per accepted trajectory rather than per line-search trial.
    """
    return [model.jac_f(xs[k + 1], us[k]) for k in range(us.shape[0])]


def solve(model, prob, us_init=None, settings=None):
    """Run Box-IDDP from an initial control sequence.

    Returns (PolicyTrajectory, SolverTrace).  The best accepted iterate is
    returned even when the iteration budget or regularization limit is hit.
    """
    settings = settings or BoxIddpSettings(
        step=ImplicitStepSettings(h=prob.h))
    if abs(settings.step.h - prob.h) > 1e-12 * prob.h:
        settings = BoxIddpSettings(
            **{**settings.__dict__, "step": ImplicitStepSettings(
                h=prob.h,
                newton_tol=settings.step.newton_tol,
                max_newton_iters=settings.step.max_newton_iters,
                line_search=settings.step.line_search)})
    N = prob.N
    m = prob.cost.m
    us = np.zeros((N, m)) if us_init is None else np.array(us_init, float)
    if us.shape != (N, m):
        raise ConfigurationError("us_init shape must be (N, m)")
    us = np.clip(us, prob.bounds.lb, prob.bounds.ub)

    # a warm start whose rollout diverges is shrunk toward rest rather than
    # aborting; the solver then just works harder from the tamer start
    for _ in range(8):
        try:
            xs = rollout(model, prob.x0, us, settings.step)
            break
        except IntegrationError:
            if not np.any(us):
                raise
            us = np.clip(0.5 * us, prob.bounds.lb, prob.bounds.ub)
            if np.abs(us).max() < 1e-8:
                us = np.zeros_like(us)
    else:
        xs = rollout(model, prob.x0, np.zeros_like(us), settings.step)
    jacs = trajectory_jacobians(model, xs, us)
    cost = trajectory_cost(prob, xs, us, quadrature="left_rectangle")

    trace = SolverTrace()
    mu = settings.mu_init
    alpha_up = 1.0
    bp_last = None
    for it in range(settings.max_iters):
        t0 = time.perf_counter()
        bp = None
        while bp is None:
            bp = backward_pass(model, prob, xs, us, jacs, mu, settings)
            if bp is None:
                mu *= settings.mu_scale
                if mu > settings.mu_max:
                    trace.status = "regularization_limit"
                    trace.record(index=it, cost=cost, grad_norm=np.inf,
                                 accepted=False, alpha=0.0,
                                 wall_time=time.perf_counter() - t0)
                    return _finish(xs, us, bp_last, cost, prob), trace
        bp_last = bp

        if bp.kkt < settings.grad_tol:
            # re-derive the policy without regularization so the reported
            # gains are undistorted; keep the regularized one if that fails
            bp_clean = backward_pass(model, prob, xs, us, jacs, 0.0, settings)
            trace.record(index=it, cost=cost, grad_norm=bp.kkt, accepted=True,
                         alpha=0.0, wall_time=time.perf_counter() - t0)
            trace.status = "converged"
            return _finish(xs, us, bp_clean or bp, cost, prob), trace

        accepted = False
        # start the line search near the last accepted step length
        trial_alphas = [a for a in settings.alphas if a <= alpha_up]
        for alpha in trial_alphas:
            fp = forward_pass(model, prob, xs, us, bp, alpha, settings,
                              cost_cap=cost)
            if fp is None:
                continue
            xs_a, us_a, cost_a = fp
            expected = -(alpha * bp.d1 + alpha ** 2 * bp.d2)
            decrease = cost - cost_a
            if decrease > settings.accept_ratio * max(expected, 0.0) and decrease > 0:
                xs, us = xs_a, us_a
                jacs = trajectory_jacobians(model, xs, us)
                rel = decrease / max(abs(cost), 1.0)
                cost = cost_a
                accepted = True
                mu = max(mu / settings.mu_scale, settings.mu_min)
                alpha_up = min(1.0, 4.0 * alpha)
                trace.record(index=it, cost=cost, grad_norm=bp.kkt,
                             accepted=True, alpha=alpha,
                             wall_time=time.perf_counter() - t0)
                if rel < settings.cost_tol:
                    trace.status = "converged"
                    bp_clean = backward_pass(model, prob, xs, us, jacs, 0.0,
                                             settings)
                    return _finish(xs, us, bp_clean or bp, cost, prob), trace
                break
        if not accepted:
            mu *= settings.mu_scale
            alpha_up = 1.0   # next backward pass changes the step direction
            trace.record(index=it, cost=cost, grad_norm=bp.kkt, accepted=False,
                         alpha=0.0, wall_time=time.perf_counter() - t0)
            if mu > settings.mu_max:
                trace.status = "regularization_limit"
                return _finish(xs, us, bp, cost, prob), trace
    trace.status = "max_iters"
    return _finish(xs, us, bp_last, cost, prob), trace


def _finish(xs, us, bp, cost, prob):
    N, m, nx = prob.N, prob.cost.m, prob.cost.nx
    if bp is None:
        return PolicyTrajectory(xs, us, np.zeros((N, m, nx)),
                                np.zeros((N, m)), cost)
    return PolicyTrajectory(xs, us, bp.gains, bp.ffs, cost)


def apply_feedback(policy, bounds, k, x):
    """Closed-loop control at stage k for measured state x."""
    u = policy.us[k] + policy.gains[k] @ (x - policy.xs[k])
    return bounds.clamp(u)
