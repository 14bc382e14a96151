"""Planar variable-strain rod-chain dynamics.

Chains of rigid joints and soft links are described by a :class:`ChainLayout`;
each soft link carries a planar strain field (in-plane curvature, axial
stretch, transverse shear) expanded in shifted Legendre polynomials.  The
chain's base x-axis points along the hanging direction, so gravity defaults to
(+9.81, 0) in base-frame coordinates and a revolute angle of pi is upright.

The assembled dynamics M(q) qddot + h(q, qdot) = B u are dual-generic, so the
model plugs into the AD-based derivative machinery of
:class:`softtrajopt.models.LagrangianModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import Legendre

from . import dual as dm
from .exceptions import ConfigurationError
from .models import LagrangianModel

_PANEL_SUBNODES = 5  # Gauss-Legendre points per integration panel


@dataclass(frozen=True)
class SoftLinkParams:
    """Cylindrical soft-rod material and geometry parameters."""

    L: float = 1.0
    R_cs: float = 0.03
    rho: float = 1000.0
    E: float = 1.0e6
    nu: float = 0.5
    beta: float = 0.01e6
    # stress-free planar strain: zero curvature, unit stretch, zero shear
    xi_star: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if min(self.L, self.R_cs, self.rho, self.E) <= 0:
            raise ConfigurationError("L, R_cs, rho, E must be positive")
        if not (-1.0 < self.nu <= 0.5):
            raise ConfigurationError("Poisson ratio must be in (-1, 0.5]")
        if self.beta < 0:
            raise ConfigurationError("material damping must be nonnegative")

    @property
    def G(self):
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def area(self):
        return math.pi * self.R_cs ** 2

    @property
    def I_z(self):
        return math.pi * self.R_cs ** 4 / 4.0

    @property
    def mass(self):
        return self.rho * self.area * self.L


@dataclass(frozen=True)
class StrainBasis:
    """Legendre orders per planar strain mode; order -1 disables the mode."""

    curvature: int = 2
    stretch: int = 2
    shear: int = 2

    def __post_init__(self):
        for o in (self.curvature, self.stretch, self.shear):
            if o < -1:
                raise ConfigurationError("basis order must be >= -1")

    @property
    def orders(self):
        return (self.curvature, self.stretch, self.shear)

    @property
    def dofs_per_mode(self):
        return tuple(o + 1 for o in self.orders)

    @property
    def dof(self):
        return sum(self.dofs_per_mode)


@dataclass(frozen=True)
class RigidJoint:
    kind: str  # "prismatic" | "revolute"
    damping: float = 0.0
    actuated: bool = False
    axis: tuple = (0.0, 1.0)  # prismatic slide direction, local frame
    point_mass: float = 0.0   # rigid body lumped at the joint frame

    def __post_init__(self):
        if self.kind not in ("prismatic", "revolute"):
            raise ConfigurationError(f"unknown joint kind {self.kind!r}")
        if self.damping < 0 or self.point_mass < 0:
            raise ConfigurationError("damping and point mass must be nonnegative")


@dataclass(frozen=True)
class SoftLink:
    params: SoftLinkParams = field(default_factory=SoftLinkParams)
    basis: StrainBasis = field(default_factory=StrainBasis)


@dataclass(frozen=True)
class ChainLayout:
    """Ordered chain of rigid joints and soft links.

    ``gravity`` is expressed in the base frame, whose x-axis points along the
    rest (hanging) direction of the chain.
    """

    elements: tuple
    gravity: tuple = (9.81, 0.0)
    quad_order: int = 8

    def __post_init__(self):
        if not self.elements:
            raise ConfigurationError("chain must contain at least one element")
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def n(self):
        return sum(1 if isinstance(e, RigidJoint) else e.basis.dof
                   for e in self.elements)

    @property
    def m(self):
        return sum(1 for e in self.elements
                   if isinstance(e, RigidJoint) and e.actuated)

    def coordinate_slices(self):
        """Per-element slices into q, in chain order."""
        out = []
        ofs = 0
        for e in self.elements:
            d = 1 if isinstance(e, RigidJoint) else e.basis.dof
            out.append(slice(ofs, ofs + d))
            ofs += d
        return out

    def soft_mode_slices(self):
        """Per soft link: dict mode -> slice into q (empty modes excluded)."""
        out = []
        for e, sl in zip(self.elements, self.coordinate_slices()):
            if isinstance(e, SoftLink):
                ofs = sl.start
                modes = {}
                for name, d in zip(("curvature", "stretch", "shear"),
                                   e.basis.dofs_per_mode):
                    if d > 0:
                        modes[name] = slice(ofs, ofs + d)
                    ofs += d
                out.append(modes)
        return out


def shifted_legendre_table(order, s):
    """Rows of shifted Legendre polynomials P~_0..P~_order evaluated at s."""
    s = np.atleast_1d(np.asarray(s, float))
    return np.stack([Legendre.basis(j, domain=[0.0, 1.0])(s)
                     for j in range(order + 1)], axis=-1)


def strain_field(basis, params, q_xi, s):
    """Planar strain (kappa_z, stretch, shear) at arclength fraction s."""
    s_arr = np.atleast_1d(np.asarray(s, float))
    if np.any(s_arr < 0) or np.any(s_arr > 1):
        raise ConfigurationError("arclength fraction s must lie in [0, 1]")
    q_xi = np.asarray(q_xi, float)
    if q_xi.shape != (basis.dof,):
        raise ConfigurationError(f"q_xi must have length {basis.dof}")
    out = np.tile(np.asarray(params.xi_star, float), (s_arr.size, 1))
    ofs = 0
    for i, order in enumerate(basis.orders):
        if order >= 0:
            phi = shifted_legendre_table(order, s_arr)
            out[:, i] += phi @ q_xi[ofs:ofs + order + 1]
            ofs += order + 1
    return out[0] if np.ndim(s) == 0 else out


def _gauss_legendre_01(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


class _LinkTables:
    """Precomputed quadrature and basis tables for one soft link."""

    def __init__(self, link, n, slc, quad_order):
        basis, params = link.basis, link.params
        self.link = link
        nodes, weights = _gauss_legendre_01(quad_order)
        order_idx = np.argsort(nodes)
        self.nodes = nodes[order_idx]
        self.weights = weights[order_idx]
        self.stations = np.append(self.nodes, 1.0)  # ends of integration panels

        # panel sub-nodes for pose/Jacobian integrals along the rod
        sub_x, sub_w = _gauss_legendre_01(_PANEL_SUBNODES)
        edges = np.concatenate([[0.0], self.stations])
        svec, wsub, panel = [], [], []
        for p in range(len(self.stations)):
            a, b = edges[p], edges[p + 1]
            svec.append(a + (b - a) * sub_x)
            wsub.append((b - a) * sub_w)
            panel.append(np.full(_PANEL_SUBNODES, p))
        self.svec = np.concatenate(svec)
        self.wsub = np.concatenate(wsub)
        panel = np.concatenate(panel)
        # Agg[i, j] accumulates sub-node j into the integral 0 -> station i
        self.agg = (panel[None, :] <= np.arange(len(self.stations))[:, None]) \
            * self.wsub[None, :]

        # full-width basis tables (scattered into coordinate slots)
        ofs = slc.start
        self.mode_slices = {}
        tables = {}
        for name, order in zip(("curvature", "stretch", "shear"), basis.orders):
            if order >= 0:
                msl = slice(ofs, ofs + order + 1)
                self.mode_slices[name] = msl
                tables[name] = (shifted_legendre_table(order, self.svec),
                                shifted_legendre_table(order, self.nodes))
                ofs += order + 1

        S, Q = self.svec.size, self.nodes.size
        self.phi_sub = {}
        self.phi_nodes = {}
        for name in ("curvature", "stretch", "shear"):
            sub = np.zeros((S, n))
            nod = np.zeros((Q, n))
            if name in tables:
                msl = self.mode_slices[name]
                sub[:, msl] = tables[name][0]
                nod[:, msl] = tables[name][1]
            self.phi_sub[name] = sub
            self.phi_nodes[name] = nod

        # integrated curvature basis: Ikappa(s) = int_0^s Phi_kappa
        S_all = np.concatenate([self.svec, self.stations])
        ik = np.zeros((S_all.size, n))
        if "curvature" in self.mode_slices:
            msl = self.mode_slices["curvature"]
            order = basis.curvature
            cols = [Legendre.basis(j, domain=[0.0, 1.0]).integ(lbnd=0.0)(S_all)
                    for j in range(order + 1)]
            ik[:, msl] = np.stack(cols, axis=-1)
        self.ikappa_sub = ik[:S]
        self.ikappa_stations = ik[S:]

        # constant stiffness / damping blocks (per-mode, block diagonal)
        L, A, Iz = params.L, params.area, params.I_z
        stiff = {"curvature": params.E * Iz, "stretch": params.E * A,
                 "shear": params.G * A}
        damp = {"curvature": params.beta * Iz, "stretch": params.beta * A,
                "shear": (params.G / params.E) * params.beta * A}
        self.K = np.zeros((n, n))
        self.D = np.zeros((n, n))
        for name, msl in self.mode_slices.items():
            order = msl.stop - msl.start - 1
            # shifted Legendre Gram matrix: diag(1 / (2j + 1))
            gram = np.diag(1.0 / (2.0 * np.arange(order + 1) + 1.0))
            self.K[msl, msl] = stiff[name] * L * gram
            self.D[msl, msl] = damp[name] * L * gram


class PlanarChainModel(LagrangianModel):
    """GVS dynamics of a planar rigid-soft chain, registered as a DynamicsModel."""

    def __init__(self, layout: ChainLayout):
        self.layout = layout
        self.n = layout.n
        self.m = layout.m
        slices = layout.coordinate_slices()
        self._slices = slices
        self._links = []
        self._joint_index = {}
        for e, sl in zip(layout.elements, slices):
            if isinstance(e, SoftLink):
                self._links.append(_LinkTables(e, self.n, sl, layout.quad_order))

        # constant matrices
        self.K = np.zeros((self.n, self.n))
        self.D = np.zeros((self.n, self.n))
        for lt in self._links:
            self.K += lt.K
            self.D += lt.D
        self.D_joints = np.zeros((self.n, self.n))
        B_cols = []
        for e, sl in zip(layout.elements, slices):
            if isinstance(e, RigidJoint):
                j = sl.start
                self.D_joints[j, j] = e.damping
                if e.actuated:
                    col = np.zeros(self.n)
                    col[j] = 1.0
                    B_cols.append(col)
        self.B = np.stack(B_cols, axis=-1) if B_cols else np.zeros((self.n, 0))
        self._soft_mask = np.zeros(self.n, dtype=bool)
        for lt in self._links:
            for msl in lt.mode_slices.values():
                self._soft_mask[msl] = True
        self.gravity = np.asarray(layout.gravity, float)

    # -- kinematic sweep ----------------------------------------------------

    def _sweep(self, q, want_positions=False):
        """Walk the chain accumulating mass matrix, gravity force, potential.

        Dual-generic in q.  Returns (M, G, U, frames) where frames holds the
        per-link station poses when requested.
        """
        n = self.n
        zero_rows = np.zeros(n)
        th = 0.0
        px = 0.0
        py = 0.0
        thq = zero_rows
        pxq = zero_rows
        pyq = zero_rows
        M = np.zeros((n, n))
        G = zero_rows
        U = 0.0
        gx, gy = self.gravity
        frames = []
        link_iter = iter(self._links)

        for e, sl in zip(self.layout.elements, self._slices):
            if isinstance(e, RigidJoint):
                j = sl.start
                ej = np.zeros(n)
                ej[j] = 1.0
                qj = q[j]
                if e.kind == "revolute":
                    th = th + qj
                    thq = thq + ej
                else:
                    c = dm.cos(th)
                    s = dm.sin(th)
                    ax, ay = e.axis
                    dx = c * ax - s * ay
                    dy = s * ax + c * ay
                    px = px + qj * dx
                    py = py + qj * dy
                    pxq = pxq + dm.mul(dx, ej) + dm.mul(qj, dm.mul(dm.neg(dy), thq))
                    pyq = pyq + dm.mul(dy, ej) + dm.mul(qj, dm.mul(dx, thq))
                if e.point_mass > 0.0:
                    mpt = e.point_mass
                    M = M + mpt * (dm.outer(pxq, pxq) + dm.outer(pyq, pyq))
                    G = G + mpt * (dm.mul(gx, pxq) + dm.mul(gy, pyq))
                    U = U - mpt * (gx * px + gy * py)
            else:
                lt = next(link_iter)
                p = lt.link.params
                L = p.L
                rhoA = p.rho * p.area
                rhoI = p.rho * p.I_z

                # closed-form bending angle along the rod
                th_s = th + L * dm.mv(lt.ikappa_sub, q)                 # (S,)
                thq_s = dm.expand_at(thq, 0) + L * lt.ikappa_sub        # (S, n)
                c = dm.cos(th_s)
                s = dm.sin(th_s)
                a = dm.mv(lt.phi_sub["stretch"], q) + 1.0               # (S,)
                b = dm.mv(lt.phi_sub["shear"], q)                       # (S,)

                ipx = L * (c * a - s * b)
                ipy = L * (s * a + c * b)
                ce = dm.expand_at(c, 1)
                se = dm.expand_at(s, 1)
                ae = dm.expand_at(a, 1)
                be = dm.expand_at(b, 1)
                ipxq = L * ((dm.neg(se) * ae - ce * be) * thq_s
                            + ce * lt.phi_sub["stretch"] - se * lt.phi_sub["shear"])
                ipyq = L * ((ce * ae - se * be) * thq_s
                            + se * lt.phi_sub["stretch"] + ce * lt.phi_sub["shear"])

                # accumulate panel integrals up to every station
                px_st = px + dm.mv(lt.agg, ipx)                         # (Q+1,)
                py_st = py + dm.mv(lt.agg, ipy)
                agg2 = lt.agg[:, :, None]
                pxq_st = dm.expand_at(pxq, 0) + dm.dsum(dm.mul(agg2, dm.expand_at(ipxq, 0)), 1)
                pyq_st = dm.expand_at(pyq, 0) + dm.dsum(dm.mul(agg2, dm.expand_at(ipyq, 0)), 1)

                Q = lt.nodes.size
                thq_nodes = dm.expand_at(thq, 0) + L * lt.ikappa_stations[:Q]
                w = lt.weights[:, None, None]

                def wsum(rows):
                    o = dm.mul(dm.expand_at(rows, 2), dm.expand_at(rows, 1))
                    return dm.dsum(dm.mul(w, o), 0)

                M = M + (L * rhoI) * wsum(thq_nodes) \
                    + (L * rhoA) * (wsum(pxq_st[:Q]) + wsum(pyq_st[:Q]))

                wq = lt.weights[:, None]
                G = G + (L * rhoA) * dm.dsum(
                    dm.mul(wq, dm.mul(gx, pxq_st[:Q]) + dm.mul(gy, pyq_st[:Q])), 0)
                U = U - (L * rhoA) * dm.dsum(
                    dm.mul(lt.weights, gx * px_st[:Q] + gy * py_st[:Q]), 0)

                if want_positions:
                    th_st = th + L * dm.mv(lt.ikappa_stations, q)
                    frames.append((th_st, px_st, py_st))

                # move to the tip
                th = th + L * dm.vdot(lt.ikappa_stations[Q], q)
                thq = thq + L * lt.ikappa_stations[Q]
                px = px_st[Q]
                py = py_st[Q]
                pxq = pxq_st[Q]
                pyq = pyq_st[Q]
        return M, G, U, frames

    # -- dynamics -----------------------------------------------------------

    def assemble(self, q, qdot):
        """Mass matrix, bias forces, and input map at (q, qdot)."""
        n = self.n
        qj, t = dm.seed(q)
        Mj, Gj, _, _ = self._sweep(qj)
        M, Mdot = dm.split_seeded(Mj, t, n)      # Mdot[i, j, k] = dM_ij / dq_k
        G, _ = dm.split_seeded(Gj, t, n)

        # Coriolis via the Christoffel contraction of dM/dq
        qd_mid = dm.expand_at(dm.expand_at(qdot, 0), 2)
        A1 = dm.dsum(dm.mul(Mdot, qd_mid), 1)    # A1[i, k] = sum_j Mdot[i,j,k] qdot_j
        Mdot_qd = dm.mv(A1, qdot)                # (dM/dq . qdot) qdot
        gradT = 0.5 * dm.dsum(dm.mul(A1, dm.expand_at(qdot, 1)), 0)
        cor = Mdot_qd - gradT

        stiff = dm.mv(self.K, q)
        damp = dm.mv(self.D + self.D_joints, qdot)
        h = cor - G + stiff + damp
        return M, h, self.B

    # -- observables --------------------------------------------------------

    def forward_kinematics(self, q, stations=None):
        """Planar poses (angle, x, y) along each soft link.

        ``stations`` is a list of per-link arrays of arclength fractions in
        [0, 1]; by default the quadrature stations (including the tip) are
        used.  Returns one (angles, xs, ys) triple per soft link.
        """
        q = np.asarray(q, float)
        if q.shape != (self.n,):
            raise ConfigurationError(f"q must have length {self.n}")
        gl_x, gl_w = _gauss_legendre_01(24)
        th, px, py = 0.0, 0.0, 0.0
        out = []
        link_iter = iter(self._links)
        li = 0
        for e, sl in zip(self.layout.elements, self._slices):
            if isinstance(e, RigidJoint):
                j = sl.start
                if e.kind == "revolute":
                    th += q[j]
                else:
                    dx = math.cos(th) * e.axis[0] - math.sin(th) * e.axis[1]
                    dy = math.sin(th) * e.axis[0] + math.cos(th) * e.axis[1]
                    px += q[j] * dx
                    py += q[j] * dy
                continue
            lt = next(link_iter)
            p = lt.link.params
            L = p.L
            s_req = lt.stations if stations is None else np.atleast_1d(
                np.asarray(stations[li], float))
            if np.any(s_req < 0) or np.any(s_req > 1):
                raise ConfigurationError("stations must lie in [0, 1]")
            li += 1

            basis = lt.link.basis

            def theta_of(s_arr):
                val = np.full(np.shape(s_arr), th, float)
                if "curvature" in lt.mode_slices:
                    msl = lt.mode_slices["curvature"]
                    cols = np.stack(
                        [Legendre.basis(j, domain=[0.0, 1.0]).integ(lbnd=0.0)(s_arr)
                         for j in range(basis.curvature + 1)], axis=-1)
                    val = val + L * cols @ q[msl]
                return val

            def linstrain_of(s_arr):
                a = np.ones(np.shape(s_arr))
                b = np.zeros(np.shape(s_arr))
                if "stretch" in lt.mode_slices:
                    msl = lt.mode_slices["stretch"]
                    a = a + shifted_legendre_table(basis.stretch, s_arr) @ q[msl]
                if "shear" in lt.mode_slices:
                    msl = lt.mode_slices["shear"]
                    b = b + shifted_legendre_table(basis.shear, s_arr) @ q[msl]
                return a, b

            def pos_of(s):
                if s == 0.0:
                    return px, py
                nodes = s * gl_x
                wts = s * gl_w
                tn = theta_of(nodes)
                a, b = linstrain_of(nodes)
                c, sn = np.cos(tn), np.sin(tn)
                return (px + L * wts @ (c * a - sn * b),
                        py + L * wts @ (sn * a + c * b))

            angs = theta_of(s_req)
            xs = np.array([pos_of(s)[0] for s in s_req])
            ys = np.array([pos_of(s)[1] for s in s_req])
            out.append((angs, xs, ys))
            th = float(theta_of(1.0))
            px, py = pos_of(1.0)
        return out

    def energies(self, q, qdot):
        """(kinetic, gravitational, elastic) energies in joules."""
        q = np.asarray(q, float)
        qdot = np.asarray(qdot, float)
        M, _, U, _ = self._sweep(q)
        M = dm.value(M)
        kinetic = 0.5 * qdot @ M @ qdot
        elastic = 0.5 * q @ self.K @ q
        return float(kinetic), float(dm.value(U)), float(elastic)

    def mean_strain(self, q):
        """Per-link spatially averaged strain components (kappa, stretch, shear)."""
        q = np.asarray(q, float)
        out = []
        for lt in self._links:
            xi_star = np.asarray(lt.link.params.xi_star, float)
            wq = lt.weights
            comps = []
            for i, name in enumerate(("curvature", "stretch", "shear")):
                vals = lt.phi_nodes[name] @ q
                comps.append(float(wq @ vals) + xi_star[i])
            out.append(tuple(comps))
        return out
