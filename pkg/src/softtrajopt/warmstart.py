"""Coarse-to-fine warm starting over a ladder of strain resolutions.

Chains that share the same element sequence but differ in per-mode Legendre
order form a nested family: a lower-order solution embeds exactly into a
higher-order one by zero-padding each mode's coefficient block.  The ladder
solves the cheap low-order problem first and lifts its trajectory as the
initial guess for the next resolution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import boxiddp, dual as dm
from .exceptions import ConfigurationError, NumericalError
from .gvs import ChainLayout, PlanarChainModel, RigidJoint, SoftLink


def _check_compatible(layout_from, layout_to):
    ef, et = layout_from.elements, layout_to.elements
    if len(ef) != len(et):
        raise ConfigurationError("layouts differ in element count")
    for a, b in zip(ef, et):
        if isinstance(a, RigidJoint) != isinstance(b, RigidJoint):
            raise ConfigurationError("layouts differ in element kinds")
        if isinstance(a, RigidJoint) and a.kind != b.kind:
            raise ConfigurationError("layouts differ in joint kinds")


def lift_coordinates(layout_from, layout_to, q):
    """Embed coordinates of the coarse layout into the fine one.

    Joint coordinates copy over; each strain mode's Legendre coefficients are
    zero-padded (or truncated when coarsening) per mode.
    """
    _check_compatible(layout_from, layout_to)
    q = np.asarray(q, float)
    if q.shape != (layout_from.n,):
        raise ConfigurationError("coordinate length does not match source layout")
    out = np.zeros(layout_to.n)
    sf = layout_from.coordinate_slices()
    st = layout_to.coordinate_slices()
    for a, b, sa, sb in zip(layout_from.elements, layout_to.elements, sf, st):
        if isinstance(a, RigidJoint):
            out[sb] = q[sa]
            continue
        for (da, db, oa, ob) in zip(a.basis.dofs_per_mode, b.basis.dofs_per_mode,
                                    _mode_offsets(a), _mode_offsets(b)):
            d = min(da, db)
            if d > 0:
                out[sb.start + ob: sb.start + ob + d] = \
                    q[sa.start + oa: sa.start + oa + d]
    return out


def _mode_offsets(link):
    ofs, out = 0, []
    for d in link.basis.dofs_per_mode:
        out.append(ofs)
        ofs += d
    return out


def lift_state(layout_from, layout_to, x):
    """Embed a stacked state [q; qdot] between layouts."""
    x = np.asarray(x, float)
    nf = layout_from.n
    if x.shape != (2 * nf,):
        raise ConfigurationError("state length does not match source layout")
    return np.concatenate([lift_coordinates(layout_from, layout_to, x[:nf]),
                           lift_coordinates(layout_from, layout_to, x[nf:])])


def lift_trajectory(layout_from, layout_to, xs, us, bounds_to=None):
    """Lift a whole (xs, us) trajectory; controls map identically.

    The actuated-joint count must agree between layouts; controls are
    defensively clamped when target bounds are given.
    """
    if layout_from.m != layout_to.m:
        raise ConfigurationError("layouts differ in actuated joint count")
    xs_new = np.array([lift_state(layout_from, layout_to, x) for x in xs])
    us_new = np.asarray(us, float).copy()
    if bounds_to is not None:
        us_new = np.clip(us_new, bounds_to.lb, bounds_to.ub)
    return xs_new, us_new


def static_equilibrium(model, pinned=None, q_init=None, tol=1e-10, max_iters=50):
    """Configuration where all generalized forces balance at rest.

    ``pinned`` maps coordinate index -> held value (joint angles, typically);
    all other coordinates are solved by Newton on the static residual
    h(q, 0) = 0 with the exact AD Jacobian.
    """
    n = model.n
    pinned = dict(pinned or {})
    q = np.zeros(n) if q_init is None else np.asarray(q_init, float).copy()
    for j, v in pinned.items():
        q[j] = v
    free = np.array([j for j in range(n) if j not in pinned], dtype=int)
    if free.size == 0:
        return q

    zeros = np.zeros(n)
    for _ in range(max_iters):
        _, h_all, _ = model.assemble(q, zeros)
        r = np.asarray(h_all, float)[free]
        if np.abs(r).max() < tol:
            return q
        # Jacobian of the static residual in the free coordinates
        _, J = dm.jacobian(lambda qq: model.assemble(qq, zeros)[1], q)
        Jff = np.asarray(J)[np.ix_(free, free)]
        try:
            step = np.linalg.solve(Jff, -r)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"singular static stiffness: {e}") from e
        alpha = 1.0
        r0 = np.abs(r).max()
        while alpha >= 2.0 ** -20:
            q_try = q.copy()
            q_try[free] = q[free] + alpha * step
            _, h_try, _ = model.assemble(q_try, zeros)
            if np.abs(np.asarray(h_try, float)[free]).max() < r0:
                break
            alpha *= 0.5
        q = q_try
    raise NumericalError("static equilibrium Newton did not converge")


@dataclass(frozen=True)
class LadderStage:
    name: str
    layout: ChainLayout


@dataclass
class LadderStageResult:
    name: str
    policy: object
    trace: object
    wall_time: float


def run_ladder(stages, problem_for, settings_for=None, us_init=None):
    """Solve a sequence of increasingly resolved problems.

    ``problem_for(stage, model)`` builds the OCP for a stage; consecutive
    stage solutions are lifted as warm starts.  Returns the per-stage
    results in order.
    """
    results = []
    prev = None   # (stage, policy)
    for stage in stages:
        model = PlanarChainModel(stage.layout)
        prob = problem_for(stage, model)
        settings = settings_for(stage, prob) if settings_for else None
        if prev is not None:
            _, us = lift_trajectory(prev[0].layout, stage.layout,
                                    prev[1].xs, prev[1].us, prob.bounds)
        else:
            us = us_init
        t0 = time.perf_counter()
        policy, trace = boxiddp.solve(model, prob, us_init=us, settings=settings)
        results.append(LadderStageResult(stage.name, policy, trace,
                                         time.perf_counter() - t0))
        prev = (stage, policy)
    return results
