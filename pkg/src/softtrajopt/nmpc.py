"""Receding-horizon control built on the trajectory optimizer.

At every simulation step a short-horizon problem is re-solved from the
measured state, warm-started from the previous solution shifted by one stage
with the last control replicated.  When the inner solve fails the loop falls
back to the first warm-start control, so a single bad solve degrades rather
than halts the controller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boxiddp
from .exceptions import ConfigurationError, IntegrationError, NumericalError
from .integrator import ImplicitStepSettings, implicit_step
from .ocp import ControlBounds, OcpProblem, QuadraticCost, stage_cost


@dataclass(frozen=True)
class DisturbanceSpec:
    """State perturbations applied to the simulated plant.

    ``impulses`` maps step index -> additive state offset.  ``noise_scale``
    adds seeded Gaussian noise of that scale to the velocity half of the
    state at every step.
    """

    impulses: dict = field(default_factory=dict)
    noise_scale: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class NmpcSettings:
    cost: QuadraticCost
    bounds: ControlBounds
    h: float
    horizon: int                 # prediction steps per solve
    sim_steps: int
    inner: boxiddp.BoxIddpSettings = None

    def __post_init__(self):
        if self.horizon < 1 or self.sim_steps < 1:
            raise ConfigurationError("horizon and sim_steps must be >= 1")
        if self.inner is None:
            object.__setattr__(self, "inner", boxiddp.BoxIddpSettings(
                max_iters=5, step=ImplicitStepSettings(h=self.h)))


@dataclass
class NmpcResult:
    xs: np.ndarray               # (sim_steps + 1, nx) plant states
    us: np.ndarray               # (sim_steps, m) applied controls
    statuses: list               # inner solver status per step
    solve_costs: np.ndarray      # predicted cost per solve
    tracking_cost: float         # realized stage-cost sum, h-weighted


def nmpc_step(model, settings, x, us_warm):
    """One receding-horizon solve from measured state x.

    Returns (u_applied, us_warm_next, status).  ``us_warm`` has shape
    (horizon, m); on failure the first warm control is applied unchanged.
    """
    p = settings.horizon
    prob = OcpProblem(settings.cost, settings.bounds, t_f=p * settings.h,
                      N=p, x0=np.asarray(x, float))
    try:
        policy, trace = boxiddp.solve(model, prob, us_init=us_warm,
                                      settings=settings.inner)
    except (IntegrationError, NumericalError):
        shifted = np.vstack([us_warm[1:], us_warm[-1:]])
        return settings.bounds.clamp(us_warm[0]), shifted, "solve_failed", np.nan
    us_next = np.vstack([policy.us[1:], policy.us[-1:]])
    return policy.us[0], us_next, trace.status, policy.total_cost


def run_closed_loop(model_true, model_ctrl, x0, settings, disturbance=None):
    """Simulate the plant under receding-horizon control.

    ``model_true`` propagates the plant; ``model_ctrl`` is what the
    controller believes (the two may differ).  Disturbances perturb the
    measured plant state before each solve.
    """
    disturbance = disturbance or DisturbanceSpec()
    rng = np.random.default_rng(disturbance.seed)
    x0 = np.asarray(x0, float)
    nx = x0.size
    m = settings.bounds.m
    step = ImplicitStepSettings(h=settings.h)

    xs = np.zeros((settings.sim_steps + 1, nx))
    us = np.zeros((settings.sim_steps, m))
    xs[0] = x0
    statuses = []
    solve_costs = np.zeros(settings.sim_steps)
    us_warm = np.zeros((settings.horizon, m))
    track = 0.0
    for k in range(settings.sim_steps):
        x = xs[k].copy()
        if k in disturbance.impulses:
            x = x + np.asarray(disturbance.impulses[k], float)
        if disturbance.noise_scale > 0:
            x[nx // 2:] += disturbance.noise_scale * rng.standard_normal(nx // 2)
        xs[k] = x
        u, us_warm, status, pred = nmpc_step(model_ctrl, settings, x, us_warm)
        statuses.append(status)
        solve_costs[k] = pred
        us[k] = u
        track += settings.h * stage_cost(settings.cost, x, u)
        xs[k + 1], _, _ = implicit_step(model_true, x, u, step)
    return NmpcResult(xs, us, statuses, solve_costs, track)


def replay_open_loop(model_true, x0, us, h, disturbance=None):
    """Apply a fixed control sequence to the plant under the same
    disturbances; the comparison baseline for closed-loop runs."""
    disturbance = disturbance or DisturbanceSpec()
    rng = np.random.default_rng(disturbance.seed)
    x0 = np.asarray(x0, float)
    nx = x0.size
    step = ImplicitStepSettings(h=h)
    xs = np.zeros((us.shape[0] + 1, nx))
    xs[0] = x0
    for k in range(us.shape[0]):
        x = xs[k].copy()
        if k in disturbance.impulses:
            x = x + np.asarray(disturbance.impulses[k], float)
        if disturbance.noise_scale > 0:
            x[nx // 2:] += disturbance.noise_scale * rng.standard_normal(nx // 2)
        xs[k] = x
        xs[k + 1], _, _ = implicit_step(model_true, x, us[k], step)
    return xs
