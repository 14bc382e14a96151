"""Trajectory optimization for planar rigid-soft underactuated chains.

Forward-mode dual-number derivatives of strain-parameterized Cosserat rod
dynamics drive an implicit-Euler control-limited DDP solver, a trapezoidal
collocation solver, a receding-horizon loop, and a coarse-to-fine warm-start
ladder over strain resolutions.
"""

from .boxiddp import BoxIddpSettings, apply_feedback
from .boxiddp import solve as solve_boxiddp
from .boxqp import BoxQpResult, solve_boxqp
from .collocation import CollocationResult, CollocationSettings, solve_collocation
from .exceptions import (
    ConfigurationError,
    InputError,
    IntegrationError,
    NumericalError,
    SoftTrajOptError,
    UnsupportedOperationError,
)
from .gvs import (
    ChainLayout,
    PlanarChainModel,
    RigidJoint,
    SoftLink,
    SoftLinkParams,
    StrainBasis,
    strain_field,
)
from .integrator import ImplicitStepSettings, implicit_step, rollout
from .models import (
    DynamicsModel,
    LagrangianModel,
    LinearModel,
    RigidCartPole,
    RigidCartPoleParams,
    RigidPendubot,
    RigidPendubotParams,
    check_derivatives,
)
from .nmpc import DisturbanceSpec, NmpcSettings, run_closed_loop
from .ocp import (
    ControlBounds,
    OcpProblem,
    PolicyTrajectory,
    QuadraticCost,
    SolverTrace,
    trajectory_cost,
)
from .warmstart import LadderStage, lift_state, lift_trajectory, run_ladder, static_equilibrium

__version__ = "0.1.0"

__all__ = [
    "BoxIddpSettings", "apply_feedback", "solve_boxiddp",
    "BoxQpResult", "solve_boxqp",
    "CollocationResult", "CollocationSettings", "solve_collocation",
    "ConfigurationError", "InputError", "IntegrationError", "NumericalError",
    "SoftTrajOptError", "UnsupportedOperationError",
    "ChainLayout", "PlanarChainModel", "RigidJoint", "SoftLink",
    "SoftLinkParams", "StrainBasis", "strain_field",
    "ImplicitStepSettings", "implicit_step", "rollout",
    "DynamicsModel", "LagrangianModel", "LinearModel",
    "RigidCartPole", "RigidCartPoleParams", "RigidPendubot",
    "RigidPendubotParams", "check_derivatives",
    "DisturbanceSpec", "NmpcSettings", "run_closed_loop",
    "ControlBounds", "OcpProblem", "PolicyTrajectory", "QuadraticCost",
    "SolverTrace", "trajectory_cost",
    "LadderStage", "lift_state", "lift_trajectory", "run_ladder",
    "static_equilibrium",
]
