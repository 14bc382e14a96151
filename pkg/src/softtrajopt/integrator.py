"""Time discretization: implicit-Euler residual, Newton solve, derivatives.

The implicit step solves g(x, x', u) = x' - x - h f(x', u) = 0 with a damped
Newton iteration using the exact residual Jacobian.  The derivative chain of
the discrete map (first and second order) is what the Box-IDDP backward pass
consumes; RK4 exists only as an explicit reference scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError, InputError, IntegrationError, UnsupportedOperationError


@dataclass(frozen=True)
class ImplicitStepSettings:
    h: float = 0.01
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    line_search: bool = True

    def __post_init__(self):
        if self.h <= 0 or self.newton_tol <= 0 or self.max_newton_iters < 1:
            raise ConfigurationError("invalid implicit step settings")


@dataclass
class ResidualDerivatives:
    g_xp: np.ndarray            # d g / d x'
    g_x: np.ndarray             # d g / d x  (== -I for implicit Euler)
    g_u: np.ndarray
    g_xpxp: np.ndarray | None = None
    g_uu: np.ndarray | None = None
    g_xpu: np.ndarray | None = None


def residual(model, x, xp, u, h):
    """Implicit-Euler residual x' - x - h f(x', u)."""
    x = np.asarray(x, float)
    xp = np.asarray(xp, float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xp))):
        raise InputError("non-finite state in residual")
    return xp - x - h * model.eval_f(xp, u)


def implicit_step(model, x, u, settings, guess=None, return_jac=False):
    """Newton solve of the implicit-Euler step.

    Returns (xp, newton_iters, final_residual_norm) and, with ``return_jac``,
    additionally the continuous Jacobians (A, B) of f evaluated at the
    solution point (x', u).
    """
    h = settings.h
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    fx0 = model.eval_f(x, u)
    xp = np.asarray(guess, float).copy() if guess is not None else x + h * fx0

    nx = x.size
    iters = 0
    g = xp - x - h * model.eval_f(xp, u)
    norm = np.abs(g).max()
    # modified Newton: keep the factored iteration matrix until convergence
    # slows, then refresh it at the current iterate
    lu_piv = None
    fresh = False
    while norm >= settings.newton_tol and iters < settings.max_newton_iters:
        if lu_piv is None:
            A, _ = model.jac_f(xp, u)
            try:
                lu_piv = scipy.linalg.lu_factor(np.eye(nx) - h * A)
            except (scipy.linalg.LinAlgError, ValueError) as e:
                raise IntegrationError(f"singular step Jacobian: {e}",
                                      residual_norm=norm) from e
            fresh = True
        dx = scipy.linalg.lu_solve(lu_piv, -g)
        alpha = 1.0
        while True:
            xp_new = xp + alpha * dx
            g_new = xp_new - x - h * model.eval_f(xp_new, u)
            norm_new = np.abs(g_new).max()
            if not settings.line_search or norm_new < norm or alpha < 2.0 ** -20:
                break
            alpha *= 0.5
        if norm_new >= norm and not fresh:
            lu_piv = None   # stale matrix stalled the step; retry refreshed
            continue
        if norm_new > 0.2 * norm and not fresh:
            lu_piv = None   # slow contraction, refresh before the next step
        fresh = False
        xp, g, norm = xp_new, g_new, norm_new
        iters += 1
    if norm >= settings.newton_tol:
        raise IntegrationError(
            f"implicit step did not converge: residual {norm:.3e} after {iters} iterations",
            residual_norm=norm)
    if return_jac:
        A, B = model.jac_f(xp, u)
        return xp, iters, norm, (A, B)
    return xp, iters, norm


def residual_derivatives(model, x, xp, u, h, order=1, jac=None):
    """Derivative blocks of the implicit-Euler residual, evaluated at x'.

    ``jac`` optionally supplies precomputed (A, B) = jac_f(x', u).
    """
    nx = 2 * model.n
    if jac is None:
        jac = model.jac_f(xp, u)
    A, B = jac
    rd = ResidualDerivatives(
        g_xp=np.eye(nx) - h * A,
        g_x=-np.eye(nx),
        g_u=-h * B,
    )
    if order == 2:
        if not model.has_hessians:
            raise UnsupportedOperationError("model has no second-order capability")
        fxx, fuu, fxu = model.hess_f(xp, u)
        rd.g_xpxp = -h * fxx
        rd.g_uu = -h * fuu
        rd.g_xpu = -h * fxu
    elif order != 1:
        raise ConfigurationError("order must be 1 or 2")
    return rd


def discrete_jacobians(rd):
    """First derivatives (fx, fu) of the discrete step map x -> x'."""
    fx = np.linalg.solve(rd.g_xp, -rd.g_x)
    fu = np.linalg.solve(rd.g_xp, -rd.g_u)
    return fx, fu


def discrete_hessians(rd, fx, fu):
    """Second-derivative tensors (Fxx, Fuu, Fxu) of the discrete step map.

    For implicit Euler the mixed blocks g_xx, g_x'x vanish, so each tensor
    reduces to contractions of g_x'x', g_x'u, and g_uu.
    """
    if rd.g_xpxp is None:
        raise UnsupportedOperationError("second-order residual blocks missing")
    # g_dagger = -inv(g_xp); apply via a single factorization
    def gdag(t):
        shp = t.shape
        flat = t.reshape(shp[0], -1)
        return -np.linalg.solve(rd.g_xp, flat).reshape(shp)

    # contractions: (f_a' g_x'x' f_b)[i, a, b] = g_x'x'[i, j, k] fx[j, a] fx[k, b]
    def sandwich(fa, fb):
        return np.einsum("ijk,ja,kb->iab", rd.g_xpxp, fa, fb, optimize=True)

    Fxx = gdag(sandwich(fx, fx))
    t_uu = sandwich(fu, fu) \
        + np.einsum("ijk,ja->iak", rd.g_xpu, fu, optimize=True) \
        + np.einsum("ijb,ja->iab", rd.g_xpu, fu, optimize=True)
    Fuu = gdag(t_uu)
    t_xu = np.einsum("ijk,ja,kb->iab", rd.g_xpxp, fx, fu, optimize=True) \
        + np.einsum("ijb,ja->iab", rd.g_xpu, fx, optimize=True)
    Fxu = gdag(t_xu)
    return Fxx, Fuu, Fxu


def rk4_step(model, x, u, h):
    k1 = model.eval_f(x, u)
    k2 = model.eval_f(x + 0.5 * h * k1, u)
    k3 = model.eval_f(x + 0.5 * h * k2, u)
    k4 = model.eval_f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rollout(model, x0, us, settings, scheme="implicit_euler", return_jacs=False):
    """Sequential rollout of a control sequence.

    Implicit steps are warm-started from the previous accepted state.  With
    ``return_jacs`` (implicit scheme only) the continuous Jacobians at each
    accepted step solution are returned alongside the states.
    """
    x0 = np.asarray(x0, float)
    us = np.asarray(us, float)
    N = us.shape[0]
    xs = np.zeros((N + 1, x0.size))
    xs[0] = x0
    jacs = []
    guess = None
    for k in range(N):
        if scheme == "implicit_euler":
            try:
                if return_jacs:
                    xp, _, _, jac = implicit_step(model, xs[k], us[k], settings,
                                                  guess=guess, return_jac=True)
                    jacs.append(jac)
                else:
                    xp, _, _ = implicit_step(model, xs[k], us[k], settings, guess=guess)
            except IntegrationError as e:
                raise IntegrationError(str(e), residual_norm=e.residual_norm,
                                       step_index=k) from e
            guess = xp
        elif scheme == "rk4":
            xp = rk4_step(model, xs[k], us[k], settings.h)
            if not np.all(np.isfinite(xp)):
                raise IntegrationError("rk4 produced non-finite state", step_index=k)
        else:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        xs[k + 1] = xp
    if return_jacs:
        return xs, jacs
    return xs
