"""Box-constrained quadratic programs via projected Newton.

Minimizes 1/2 u'H u + g'u subject to lb <= u <= ub, for the small dense
problems that arise once per stage in the trajectory-optimizer backward pass.
The solver tracks the clamped/free index split; the Cholesky factor of the
free-free Hessian block is returned so the caller can reuse it for feedback
gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError

_CLAMP_TOL = 1e-12
_FREE_GRAD_TOL = 1e-9
_KKT_TOL = 1e-8
_MAX_ITERS = 100


@dataclass
class BoxQpResult:
    u_star: np.ndarray
    free_set: np.ndarray          # boolean mask, True where unclamped
    H_free_factor: np.ndarray | None   # Cholesky factor of H[free, free]
    status: str                   # converged | max_iters | non_pd_hessian
    iterations: int


def _clamped_mask(u, grad, lb, ub):
    # clamped only if at a bound AND the gradient pushes outward
    at_lo = (u <= lb + _CLAMP_TOL) & (grad > 0)
    at_hi = (u >= ub - _CLAMP_TOL) & (grad < 0)
    return at_lo | at_hi


def kkt_error(u, grad, lb, ub):
    """Max-norm violation of the box-QP first-order conditions."""
    err = np.abs(grad).astype(float)
    err[(u <= lb + _CLAMP_TOL) & (grad > 0)] = 0.0
    err[(u >= ub - _CLAMP_TOL) & (grad < 0)] = 0.0
    return err.max() if err.size else 0.0


def solve_boxqp(H, g, lb, ub, u_init=None):
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    m = g.shape[0]
    if H.shape != (m, m) or lb.shape != (m,) or ub.shape != (m,):
        raise ConfigurationError("inconsistent box-QP dimensions")
    if np.any(lb > ub):
        raise ConfigurationError("lower bound exceeds upper bound")

    u = np.clip(np.zeros(m) if u_init is None else np.asarray(u_init, float), lb, ub)
    status = "max_iters"
    chol = None
    free = np.ones(m, bool)
    it = 0
    for it in range(1, _MAX_ITERS + 1):
        grad = H @ u + g
        if kkt_error(u, grad, lb, ub) < _KKT_TOL:
            status = "converged"
            break
        free = ~_clamped_mask(u, grad, lb, ub)
        if not free.any():
            status = "converged"
            break
        Hff = H[np.ix_(free, free)]
        # gradient of the free block with the clamped variables held fixed
        grad_f = grad[free]
        if np.abs(grad_f).max() < _FREE_GRAD_TOL:
            status = "converged"
            break
        reg = 0.0
        while True:
            try:
                chol = scipy.linalg.cho_factor(Hff + reg * np.eye(free.sum()),
                                               lower=True)
                break
            except scipy.linalg.LinAlgError:
                reg = max(2 * reg, 1e-10 * max(1.0, np.abs(Hff).max()))
                if reg > 1e8 * max(1.0, np.abs(Hff).max()):
                    return BoxQpResult(u, free, None, "non_pd_hessian", it)
        du_f = -scipy.linalg.cho_solve(chol, grad_f)
        # projected backtracking on the quadratic objective
        f0 = 0.5 * u @ H @ u + g @ u
        alpha = 1.0
        improved = False
        while alpha >= 2.0 ** -20:
            u_new = u.copy()
            u_new[free] = u[free] + alpha * du_f
            u_new = np.clip(u_new, lb, ub)
            f_new = 0.5 * u_new @ H @ u_new + g @ u_new
            if f_new < f0 - 1e-16 * abs(f0) or np.allclose(u_new, u):
                improved = not np.allclose(u_new, u)
                break
            alpha *= 0.5
        if not improved:
            status = "converged" if kkt_error(u, H @ u + g, lb, ub) < _KKT_TOL \
                else status
            break
        u = u_new

    grad = H @ u + g
    free = ~_clamped_mask(u, grad, lb, ub)
    # factor the final free block for gain extraction
    chol = None
    if free.any():
        try:
            chol = scipy.linalg.cho_factor(H[np.ix_(free, free)], lower=True)
        except scipy.linalg.LinAlgError:
            status = "non_pd_hessian"
    if status == "max_iters" and kkt_error(u, grad, lb, ub) < _KKT_TOL:
        status = "converged"
    return BoxQpResult(u, free, chol, status, it)


def feedback_gains(result, Qux):
    """Feedback matrix L with clamped rows zeroed: H_free L_free = -Qux_free."""
    Qux = np.asarray(Qux, float)
    m = result.u_star.shape[0]
    if Qux.shape[0] != m:
        raise ConfigurationError("Qux row count must match control dimension")
    L = np.zeros_like(Qux)
    if result.free_set.any():
        if result.H_free_factor is None:
            raise ConfigurationError("no factorization available for gains")
        L[result.free_set] = scipy.linalg.cho_solve(result.H_free_factor,
                                                    -Qux[result.free_set])
    return L
