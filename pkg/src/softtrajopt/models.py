"""Dynamics-model abstraction and rigid benchmark models.

A model implements the continuous dynamics xdot = f(x, u) as a dual-generic
function ``_f``; Jacobians and Hessians then come from forward-mode AD through
the full dynamics assembly (see :mod:`softtrajopt.dual`), with finite
differences available as a cross-check and as an alternative Hessian mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dual as dm
from .exceptions import ConfigurationError, InputError, NumericalError, UnsupportedOperationError


class DynamicsModel:
    """Continuous-time dynamics xdot = f(x, u) with AD derivatives.

    Subclasses set ``n`` (coordinate count) and ``m`` (input count) and
    implement ``_f(x, u)`` using the primitives from ``softtrajopt.dual`` so
    that it evaluates correctly under (nested) dual numbers.
    """

    n: int
    m: int
    has_hessians = True
    hessian_mode = "dual"  # or "fd"

    @property
    def nx(self):
        return 2 * self.n

    def _f(self, x, u):
        raise NotImplementedError

    def _check_inputs(self, x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        if x.shape != (self.nx,):
            raise ConfigurationError(f"state must have length {self.nx}, got {x.shape}")
        if u.shape != (self.m,):
            raise ConfigurationError(f"control must have length {self.m}, got {u.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise InputError("non-finite state or control")
        return x, u

    def eval_f(self, x, u):
        x, u = self._check_inputs(x, u)
        return np.asarray(dm.value(self._f(x, u)), float)

    def _f_of_z(self, z):
        return self._f(z[: self.nx], z[self.nx:])

    def jac_f(self, x, u):
        """Exact Jacobians (Ax, Bu) of eval_f via forward-mode dual numbers."""
        x, u = self._check_inputs(x, u)
        z = np.concatenate([x, u])
        _, J = dm.jacobian(self._f_of_z, z)
        return J[:, : self.nx], J[:, self.nx:]

    def hess_f(self, x, u, mode=None):
        """Second-derivative tensors (fxx, fuu, fxu) of eval_f.

        fxx[i, j, k] = d^2 f_i / dx_j dx_k and analogously for the others.
        """
        if not self.has_hessians:
            raise UnsupportedOperationError(
                f"{type(self).__name__} does not provide second-order derivatives")
        x, u = self._check_inputs(x, u)
        mode = mode or self.hessian_mode
        z = np.concatenate([x, u])
        K = z.size
        if mode == "dual":
            zo, t_out = dm.seed(z)
            zi, t_in = dm.seed(zo)
            y = self._f_of_z(zi)
            _, g = dm.split_seeded(y, t_in, K)
            _, H = dm.split_seeded(g, t_out, K)
            H = np.asarray(dm.value(H), float)  # (2n, K, K)
        elif mode == "fd":
            h = 1e-5
            H = np.zeros((self.nx, K, K))
            for k in range(K):
                e = np.zeros(K)
                e[k] = h
                _, Jp = dm.jacobian(self._f_of_z, z + e)
                _, Jm = dm.jacobian(self._f_of_z, z - e)
                H[:, :, k] = (Jp - Jm) / (2 * h)
            H = 0.5 * (H + np.swapaxes(H, 1, 2))
        else:
            raise ConfigurationError(f"unknown hessian mode {mode!r}")
        nx = self.nx
        fxx = H[:, :nx, :nx]
        fuu = H[:, nx:, nx:]
        fxu = H[:, :nx, nx:]
        return fxx, fuu, fxu


class LagrangianModel(DynamicsModel):
    """Model defined through M(q) qddot + h(q, qdot) = B(q) u."""

    def assemble(self, q, qdot):
        """Return (M, h, B), dual-generic in (q, qdot)."""
        raise NotImplementedError

    def _f(self, x, u):
        n = self.n
        q = x[:n]
        qdot = x[n:]
        M, h, B = self.assemble(q, qdot)
        rhs = dm.mv(B, u) - h
        try:
            qddot = dm.solve_spd(M, rhs)
        except dm.NonPositiveDefiniteError as e:
            Mv = np.asarray(dm.value(M), float)
            cond = np.linalg.cond(Mv)
            raise NumericalError(
                f"mass matrix not positive definite (cond ~ {cond:.3e})") from e
        return dm.dconcat([qdot, qddot])


class LinearModel(DynamicsModel):
    """xdot = A x + B u; registered as a DynamicsModel for solver tests."""

    def __init__(self, A, B):
        A = np.asarray(A, float)
        B = np.asarray(B, float)
        if A.shape[0] % 2 != 0:
            raise ConfigurationError("state dimension must be even (x = [q; qdot])")
        self.A = A
        self.B = B
        self.n = A.shape[0] // 2
        self.m = B.shape[1]

    def _f(self, x, u):
        return dm.mv(self.A, x) + dm.mv(self.B, u)


@dataclass(frozen=True)
class RigidCartPoleParams:
    """Cart with a uniform rigid rod pole; theta = 0 hangs straight down."""

    cart_mass: float = 1.0
    pole_mass: float = 2.827433388230814  # rho * pi * R^2 * L of the default rod
    pole_length: float = 1.0
    pole_radius: float = 0.0   # 0 selects the thin-rod inertia
    joint_damping: float = 0.05
    gravity: float = 9.81

    def __post_init__(self):
        if self.cart_mass < 0 or self.pole_mass <= 0 or self.pole_length <= 0:
            raise ConfigurationError("masses and length must be positive")
        if self.joint_damping < 0 or self.pole_radius < 0:
            raise ConfigurationError("damping and radius must be nonnegative")


class RigidCartPole(LagrangianModel):
    """Planar cart-pole with the pole modeled as a uniform rod.

    q = [d, theta]; force input on the cart. theta = 0 is the stable downward
    equilibrium, theta = pi is upright.
    """

    n = 2
    m = 1

    def __init__(self, params: RigidCartPoleParams = RigidCartPoleParams()):
        self.params = params

    def assemble(self, q, qdot):
        p = self.params
        r = p.pole_length / 2.0
        # solid cylinder about the pivot; R = 0 degenerates to the thin rod
        I_pivot = p.pole_mass * (p.pole_length ** 2 / 3.0
                                 + p.pole_radius ** 2 / 4.0)
        th = q[1]
        ddot = qdot[0]
        thdot = qdot[1]
        c = dm.cos(th)
        s = dm.sin(th)

        m_tot = p.cart_mass + p.pole_mass
        m12 = p.pole_mass * r * c
        M = dm.dconcat([
            dm.expand_at(dm.dconcat([m_tot + 0.0 * c, m12]), 0),
            dm.expand_at(dm.dconcat([m12, I_pivot + 0.0 * c]), 0),
        ], axis=0)

        # Coriolis + gravity + joint damping
        h1 = -p.pole_mass * r * s * thdot * thdot
        h2 = p.pole_mass * p.gravity * r * s + p.joint_damping * thdot
        h = dm.dconcat([h1, h2])
        B = np.array([[1.0], [0.0]])
        return M, h, B


@dataclass(frozen=True)
class RigidPendubotParams:
    """Two-link rod pendulum actuated at the base joint; angles from downward."""

    m1: float = 1.413716694115407  # rho * pi * R^2 * (L/2)
    m2: float = 1.413716694115407
    l1: float = 0.5
    l2: float = 0.5
    I1: float | None = None  # about own CoM; default uniform rod
    I2: float | None = None
    damping1: float = 0.05
    damping2: float = 0.05
    gravity: float = 9.81

    def __post_init__(self):
        for v in (self.m1, self.m2, self.l1, self.l2):
            if v <= 0:
                raise ConfigurationError("masses and lengths must be positive")
        if self.I1 is None:
            object.__setattr__(self, "I1", self.m1 * self.l1 ** 2 / 12.0)
        if self.I2 is None:
            object.__setattr__(self, "I2", self.m2 * self.l2 ** 2 / 12.0)


class RigidPendubot(LagrangianModel):
    """Planar double rod pendulum with torque at the first joint.

    q = [theta1, theta2] with theta2 relative to link 1; theta = 0 hangs down.
    """

    n = 2
    m = 1

    def __init__(self, params: RigidPendubotParams = RigidPendubotParams()):
        self.params = params

    def assemble(self, q, qdot):
        p = self.params
        r1, r2 = p.l1 / 2.0, p.l2 / 2.0
        th2 = q[1]
        w1 = qdot[0]
        w2 = qdot[1]
        c2 = dm.cos(th2)
        s2 = dm.sin(th2)

        a11 = p.m1 * r1 ** 2 + p.I1 + p.I2 + p.m2 * (p.l1 ** 2 + r2 ** 2) \
            + 2.0 * p.m2 * p.l1 * r2 * c2
        a12 = p.m2 * (r2 ** 2 + p.l1 * r2 * c2) + p.I2
        a22 = p.m2 * r2 ** 2 + p.I2 + 0.0 * c2
        M = dm.dconcat([
            dm.expand_at(dm.dconcat([a11, a12]), 0),
            dm.expand_at(dm.dconcat([a12, a22]), 0),
        ], axis=0)

        k = p.m2 * p.l1 * r2 * s2
        c1 = -k * (2.0 * w1 * w2 + w2 * w2)
        cor2 = k * w1 * w1
        g1 = (p.m1 * r1 + p.m2 * p.l1) * p.gravity * dm.sin(q[0]) \
            + p.m2 * r2 * p.gravity * dm.sin(q[0] + th2)
        g2 = p.m2 * r2 * p.gravity * dm.sin(q[0] + th2)
        h = dm.dconcat([
            c1 + g1 + p.damping1 * w1,
            cor2 + g2 + p.damping2 * w2,
        ])
        B = np.array([[1.0], [0.0]])
        return M, h, B


# ---------------------------------------------------------------------------
# derivative verification harness
# ---------------------------------------------------------------------------

@dataclass
class DerivativeReport:
    samples: int
    max_jac_err: float
    max_hess_err: float | None
    worst_jac_sample: int
    worst_jac_entry: tuple
    worst_hess_sample: int | None
    passed: bool
    jac_tol: float
    hess_tol: float
    details: list = field(default_factory=list)

    @property
    def jac_ok(self):
        return self.max_jac_err < self.jac_tol

    @property
    def hess_ok(self):
        return self.max_hess_err is None or self.max_hess_err < self.hess_tol

    def __str__(self):
        lines = [f"derivative check over {self.samples} samples:",
                 f"  jacobian max rel err {self.max_jac_err:.3e} "
                 f"(tol {self.jac_tol:.1e}, sample {self.worst_jac_sample}, "
                 f"entry {self.worst_jac_entry})"]
        if self.max_hess_err is not None:
            lines.append(f"  hessian max rel err {self.max_hess_err:.3e} "
                         f"(tol {self.hess_tol:.1e}, sample {self.worst_hess_sample})")
        lines.append("  PASS" if self.passed else "  FAIL")
        return "\n".join(lines)


def fd_jacobian(fun, z, step=1e-6):
    z = np.asarray(z, float)
    y0 = np.atleast_1d(fun(z))
    J = np.zeros((y0.size, z.size))
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = step
        J[:, j] = (fun(z + e) - fun(z - e)) / (2 * step)
    return J


def check_derivatives(model, samples=50, seed=0, x_scale=1.0, u_scale=1.0,
                      jac_tol=1e-5, hess_tol=1e-4, check_hessians=None):
    """Compare jac_f (and hess_f when present) against central finite differences.

    Failures are reported in the returned :class:`DerivativeReport`, not raised.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    if check_hessians is None:
        check_hessians = model.has_hessians
    nx, m = model.nx, model.m
    max_jac = 0.0
    worst_sample, worst_entry = 0, (0, 0)
    max_hess = 0.0 if check_hessians else None
    worst_hess = 0 if check_hessians else None
    for i in range(samples):
        x = x_scale * rng.standard_normal(nx)
        u = u_scale * rng.standard_normal(m)
        z = np.concatenate([x, u])
        A, B = model.jac_f(x, u)
        J = np.hstack([A, B])
        Jfd = fd_jacobian(lambda zz: model.eval_f(zz[:nx], zz[nx:]), z)
        scale = max(1.0, np.abs(Jfd).max())
        err = np.abs(J - Jfd) / scale
        if err.max() > max_jac:
            max_jac = err.max()
            worst_sample = i
            worst_entry = tuple(int(v) for v in np.unravel_index(err.argmax(), err.shape))
        if check_hessians:
            fxx, fuu, fxu = model.hess_f(x, u)
            v = rng.standard_normal(nx + m)
            # contract Hessian with a random direction and compare against
            # finite differences of the Jacobian along that direction
            Hfull = np.zeros((nx, nx + m, nx + m))
            Hfull[:, :nx, :nx] = fxx
            Hfull[:, nx:, nx:] = fuu
            Hfull[:, :nx, nx:] = fxu
            Hfull[:, nx:, :nx] = np.swapaxes(fxu, 1, 2)
            hc = Hfull @ v
            step = 1e-5
            vstep = step * v / max(1.0, np.linalg.norm(v))
            Ap, Bp = model.jac_f(x + vstep[:nx], u + vstep[nx:])
            Am, Bm = model.jac_f(x - vstep[:nx], u - vstep[nx:])
            hfd = (np.hstack([Ap, Bp]) - np.hstack([Am, Bm])) \
                / (2 * step / max(1.0, np.linalg.norm(v)))
            hscale = max(1.0, np.abs(hfd).max())
            herr = np.abs(hc - hfd).max() / hscale
            if herr > max_hess:
                max_hess = herr
                worst_hess = i
    passed = max_jac < jac_tol and (max_hess is None or max_hess < hess_tol)
    return DerivativeReport(samples=samples, max_jac_err=float(max_jac),
                            max_hess_err=None if max_hess is None else float(max_hess),
                            worst_jac_sample=worst_sample, worst_jac_entry=worst_entry,
                            worst_hess_sample=worst_hess, passed=passed,
                            jac_tol=jac_tol, hess_tol=hess_tol)
