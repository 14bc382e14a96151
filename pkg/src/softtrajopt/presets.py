"""Named example systems, their resolution ladders, and default problems.

Two benchmark chains are provided: a cart carrying a soft rod through a
damped revolute joint, and a two-rod soft pendubot actuated at the shoulder.
The strain-order ladder for each system starts from the all-modes-disabled
(rigid rod) layout and ends at order-2 curvature, stretch, and shear.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError
from .gvs import ChainLayout, RigidJoint, SoftLink, SoftLinkParams, StrainBasis, PlanarChainModel
from .ocp import ControlBounds, OcpProblem, QuadraticCost
from .warmstart import LadderStage, static_equilibrium

CART_MASS = 1.0
REVOLUTE_DAMPING = 0.05
CART_FORCE_MAX = 200.0
SHOULDER_TORQUE_MAX = 10.0
DEFAULT_ROD = SoftLinkParams()               # L = 1 m cylinder, E = 1 MPa
PENDUBOT_ROD = SoftLinkParams(L=0.5)

_BASES = {
    "rigid": StrainBasis(-1, -1, -1),
    "cc": StrainBasis(0, -1, -1),
    "curvature2": StrainBasis(2, -1, -1),
    "full": StrainBasis(2, 2, 2),
}
STAGE_NAMES = tuple(_BASES)
SYSTEM_NAMES = ("rigid-cartpole", "soft-cartpole", "soft-pendubot")


def make_layout(system, stage="full"):
    if stage not in _BASES:
        raise ConfigurationError(f"unknown stage {stage!r}; choose from {STAGE_NAMES}")
    basis = _BASES[stage]
    if system in ("soft-cartpole", "rigid-cartpole"):
        if system == "rigid-cartpole":
            basis = _BASES["rigid"]
        return ChainLayout((
            RigidJoint("prismatic", actuated=True, point_mass=CART_MASS),
            RigidJoint("revolute", damping=REVOLUTE_DAMPING),
            SoftLink(DEFAULT_ROD, basis),
        ))
    if system == "soft-pendubot":
        return ChainLayout((
            RigidJoint("revolute", damping=REVOLUTE_DAMPING, actuated=True),
            SoftLink(PENDUBOT_ROD, basis),
            RigidJoint("revolute", damping=REVOLUTE_DAMPING),
            SoftLink(PENDUBOT_ROD, basis),
        ))
    raise ConfigurationError(f"unknown system {system!r}; choose from {SYSTEM_NAMES}")


def make_model(system, stage="full"):
    return PlanarChainModel(make_layout(system, stage))


def control_bounds(system):
    if system in ("soft-cartpole", "rigid-cartpole"):
        return ControlBounds.symmetric(CART_FORCE_MAX, 1)
    return ControlBounds.symmetric(SHOULDER_TORQUE_MAX, 1)


def ladder_stages(system, final_stage="full"):
    """Coarse-to-fine stages ending at ``final_stage``."""
    names = list(STAGE_NAMES[: STAGE_NAMES.index(final_stage) + 1])
    return [LadderStage(nm, make_layout(system, nm)) for nm in names]


def upright_joint_targets(system, model):
    """Pinned joint coordinates of the inverted goal configuration."""
    slices = model.layout.coordinate_slices()
    pins = {}
    flipped = False
    for e, sl in zip(model.layout.elements, slices):
        if isinstance(e, RigidJoint):
            if e.kind == "prismatic":
                pins[sl.start] = 0.0
            else:
                # first revolute flips the chain upright; later ones stay aligned
                pins[sl.start] = 0.0 if flipped else np.pi
                flipped = True
    return pins


def upright_state(system, model):
    """Inverted-equilibrium state [q_eq; 0] with soft strains balanced."""
    pins = upright_joint_targets(system, model)
    q_eq = static_equilibrium(model, pinned=pins)
    return np.concatenate([q_eq, np.zeros(model.n)])


def swingup_cost(system, model, x_target):
    """Quadratic swing-up weights; position-weighted joints, light strains."""
    n = model.n
    q_w = np.full(n, 0.5)
    slices = model.layout.coordinate_slices()
    for e, sl in zip(model.layout.elements, slices):
        if isinstance(e, RigidJoint):
            q_w[sl.start] = 2.0 if e.kind == "prismatic" else 10.0
    v_w = np.full(n, 0.05)
    # the heavy terminal velocity weight is what actually arrests the pole
    qf_w = np.concatenate([40.0 * q_w, 600.0 * v_w])
    r_w = [1e-4] if system != "soft-pendubot" else [1e-3]
    return QuadraticCost.from_diagonals(np.concatenate([q_w, v_w]), r_w,
                                        qf_w, x_target)


def swingup_solver_settings(prob, max_iters=60, hessian_mode="gauss_newton"):
    """Solver settings tuned for swing-ups: heavy initial regularization
    keeps early steps conservative on these strongly nonlinear problems."""
    from .boxiddp import BoxIddpSettings
    from .integrator import ImplicitStepSettings

    return BoxIddpSettings(max_iters=max_iters, mu_init=1.0,
                           hessian_mode=hessian_mode,
                           step=ImplicitStepSettings(h=prob.h))


def swingup_problem(system, stage="full", N=100, t_f=2.0):
    """Default swing-up OCP: start hanging at rest, finish inverted."""
    model = make_model(system, stage)
    x_target = upright_state(system, model)
    cost = swingup_cost(system, model, x_target)
    x0 = np.zeros(2 * model.n)
    prob = OcpProblem(cost, control_bounds(system), t_f=t_f, N=N, x0=x0)
    return model, prob
