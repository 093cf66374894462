"""Graphical Lasso by ADMM with an eigendecomposition step for the log-det term.

Solves ``min tr(S T) - log det T + lam * sum_{s != t} |T_st|`` over positive
definite ``T``. The diagonal is not penalized.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NotConverged, UnboundedObjective

__all__ = ["GlassoResult", "graphical_lasso_solve", "glasso_objective", "kkt_residual"]

logger = logging.getLogger(__name__)


def glasso_objective(theta, sigma, lam):
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    return float(np.sum(sigma * theta) - logdet + lam * off)


def kkt_residual(theta, sigma, lam):
    """Largest violation of the optimality conditions at ``theta``.

    With ``W = theta^-1``: ``W_ss = S_ss`` on the diagonal,
    ``W_st = S_st + lam * sign(theta_st)`` where ``theta_st != 0`` and
    ``|W_st - S_st| <= lam`` elsewhere.
    """
    try:
        w = np.linalg.inv(theta)
    except np.linalg.LinAlgError:
        return np.inf
    diff = w - sigma
    p = theta.shape[0]
    off = ~np.eye(p, dtype=bool)
    active = off & (theta != 0)
    inactive = off & (theta == 0)
    res = np.abs(np.diag(diff)).max()
    if active.any():
        res = max(res, np.abs(diff[active] - lam * np.sign(theta[active])).max())
    if inactive.any():
        res = max(res, np.maximum(np.abs(diff[inactive]) - lam, 0.0).max())
    return float(res)


@dataclass
class GlassoResult:
    precision: np.ndarray
    n_iter: int
    kkt: float
    objective: float
    shift: float = 0.0
    trace: list = field(default_factory=list)


def _admm(sigma, lam, rho, theta0, max_iter, tol, floor, keep_trace):
    p = sigma.shape[0]
    off = ~np.eye(p, dtype=bool)
    z = theta0.copy()
    u = np.zeros_like(sigma)
    trace = []
    for it in range(1, max_iter + 1):
        evals, evecs = np.linalg.eigh(rho * (z - u) - sigma)
        d = (evals + np.sqrt(evals**2 + 4.0 * rho)) / (2.0 * rho)
        theta = (evecs * d) @ evecs.T
        z_old = z
        z = theta + u
        z[off] = np.sign(z[off]) * np.maximum(np.abs(z[off]) - lam / rho, 0.0)
        u = u + theta - z
        r = np.linalg.norm(theta - z)
        s = rho * np.linalg.norm(z - z_old)
        if not np.isfinite(d).all() or np.abs(theta).max() > 1e12:
            return None, it, trace
        if it % 10 == 0 or it == max_iter:
            obj = glasso_objective(theta, sigma, lam)
            if keep_trace:
                trace.append(obj)
            if obj < floor:
                return None, it, trace
            zs = (z + z.T) / 2
            if kkt_residual(zs, sigma, lam) < tol:
                return zs, it, trace
        # residual balancing
        if r > 10 * s:
            rho *= 2.0
            u /= 2.0
        elif s > 10 * r:
            rho /= 2.0
            u *= 2.0
    return (z + z.T) / 2, max_iter, trace


def graphical_lasso_solve(sigma, lam, tol=1e-7, max_iter=20000, rho=1.0, theta0=None,
                          objective_floor=-1e8, shift_on_divergence=True, keep_trace=False):
    """Sparse precision estimate from a (possibly indefinite) covariance.

    Parameters
    ----------
    sigma : (p, p) array
    lam : float
        Off-diagonal penalty, >= 0.
    tol : float
        Target KKT residual.
    objective_floor : float
        Iterates whose objective drops below this are treated as divergence.
    shift_on_divergence : bool
        On divergence, retry with ``sigma + (|lambda_min| + 1e-4) I`` and
        record the shift; otherwise raise :class:`UnboundedObjective`.

    Raises
    ------
    NotConverged
        If the KKT residual is still above ``tol`` after ``max_iter`` steps.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma = (sigma + sigma.T) / 2
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    p = sigma.shape[0]
    if lam == 0:
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise UnboundedObjective("lam = 0 needs a positive definite covariance") from None
        inv_l = np.linalg.inv(chol)
        theta = inv_l.T @ inv_l
        theta = (theta + theta.T) / 2
        return GlassoResult(theta, 0, kkt_residual(theta, sigma, 0.0), glasso_objective(theta, sigma, 0.0))

    shift = 0.0
    work = sigma
    if theta0 is None:
        diag = np.clip(np.diag(work), 1e-8, None)
        theta0 = np.diag(1.0 / diag)
    theta, n_iter, trace = _admm(work, lam, rho, theta0, max_iter, tol, objective_floor, keep_trace)
    if theta is None:
        if not shift_on_divergence:
            raise UnboundedObjective("graphical Lasso objective is unbounded below for this input")
        shift = abs(min(np.linalg.eigvalsh(sigma)[0], 0.0)) + 1e-4
        logger.warning("graphical Lasso diverged; shifting the covariance by %.3g", shift)
        work = sigma + shift * np.eye(p)
        theta0 = np.diag(1.0 / np.diag(work))
        theta, n_iter, trace = _admm(work, lam, rho, theta0, max_iter, tol, objective_floor, keep_trace)
        if theta is None:
            raise UnboundedObjective("graphical Lasso diverged even after shifting")
    kkt = kkt_residual(theta, work, lam)
    if kkt >= tol:
        raise NotConverged(f"graphical Lasso KKT residual {kkt:.3g} after {n_iter} iterations")
    return GlassoResult(theta, n_iter, kkt, glasso_objective(theta, work, lam), shift, trace)
