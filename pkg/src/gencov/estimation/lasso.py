"""Composite gradient descent for the l1-ball-constrained quadratic Lasso.

Solves ``min 0.5 b'Gb - g'b + lam*||b||_1`` subject to ``||b||_1 <= R``
where ``G`` may be indefinite (as happens after missing-data corrections).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionMismatch, NotConverged

__all__ = ["soft_threshold", "project_l1_ball", "lasso_objective", "LassoResult", "modified_lasso_solve"]

logger = logging.getLogger(__name__)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def project_l1_ball(v, radius):
    """Euclidean projection of ``v`` onto ``{w : ||w||_1 <= radius}``.

    Sort-based method of Duchi et al. (2008); exact up to rounding.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def lasso_objective(beta, gram, cross, lam):
    return 0.5 * beta @ gram @ beta - cross @ beta + lam * np.abs(beta).sum()


@dataclass
class LassoResult:
    coef: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    stationarity: float
    trace: list = field(default_factory=list)


def _prox(z, step, lam, radius):
    w = soft_threshold(z, step * lam)
    if np.isfinite(radius):
        w = project_l1_ball(w, radius)
    return w


def _run(gram, cross, lam, radius, beta0, step, accelerate, max_iter, ftol, gtol, keep_trace):
    f = lambda b: lasso_objective(b, gram, cross, lam)  # noqa: E731
    x = beta0.copy()
    fx = f(x)
    trace = [fx] if keep_trace else []
    y, t = x.copy(), 1.0
    quiet = 0
    for it in range(1, max_iter + 1):
        z = _prox(y - step * (gram @ y - cross), step, lam, radius)
        if np.array_equal(z, x) and np.array_equal(y, x):
            # exact fixed point of the prox-gradient map
            return x, fx, it, True, trace
        fz = f(z)
        if accelerate:
            # FISTA with function-value restart, monotone by construction
            if fz <= fx:
                t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
                x_new, f_new = z, fz
                y = z + ((t - 1.0) / t_next) * (z - x)
                t = t_next
            else:
                if np.array_equal(y, x):
                    # even the plain step from x fails to descend, so rounding has stalled the iterate
                    floor = max(gtol, _noise_floor(x, gram, cross, lam, step))
                    return x, fx, it, _stationarity(x, gram, cross, lam, radius, step) <= floor, trace
                # objective went up: restart the momentum from the current iterate
                x_new, f_new, y, t = x, fx, x.copy(), 1.0
        else:
            x_new, y, f_new = z, z, fz
        change = abs(fx - f_new) / max(abs(fx), abs(f_new), 1e-300)
        moved = np.any(x_new != x)
        x, fx = x_new, f_new
        if keep_trace:
            trace.append(fx)
        # two quiet accepted steps in a row, so a rejected momentum step cannot stop early
        quiet = quiet + 1 if change < ftol and moved else 0 if moved else quiet
        if quiet >= 2 or (change == 0.0 and not accelerate):
            # a flat objective is not enough on ill-conditioned problems
            floor = max(gtol, _noise_floor(x, gram, cross, lam, step))
            if _stationarity(x, gram, cross, lam, radius, step) <= floor:
                return x, fx, it, True, trace
            quiet = 0
    return x, fx, max_iter, False, trace


def _noise_floor(beta, gram, cross, lam, step):
    """Smallest gradient-mapping norm that rounding in the objective can resolve."""
    a = np.abs(beta)
    scale = a @ np.abs(gram) @ a + np.abs(cross) @ a + lam * a.sum()
    return float(np.sqrt(8.0 * np.finfo(float).eps * scale / step))


def _stationarity(beta, gram, cross, lam, radius, step):
    """Norm of the gradient mapping at ``beta``."""
    z = _prox(beta - step * (gram @ beta - cross), step, lam, radius)
    return float(np.linalg.norm(beta - z) / step)


def modified_lasso_solve(gram, cross, lam, radius=np.inf, beta0=None, max_iter=20000,
                         ftol=1e-9, gtol=1e-9, n_starts="auto", raise_on_fail=False, keep_trace=False):
    """Minimize the l1-ball-constrained quadratic Lasso objective.

    Parameters
    ----------
    gram : (k, k) array
        Symmetric, possibly indefinite.
    cross : (k,) array
    lam : float
        Penalty weight, >= 0.
    radius : float
        l1-ball radius; ``np.inf`` drops the side constraint.
    ftol, gtol : float
        Stop once the relative objective change stays below ``ftol`` and the
        gradient-mapping norm is at most ``gtol``.
    n_starts : "auto" or int
        Number of feasible starting points. ``"auto"`` uses a single start for
        positive semidefinite ``gram`` and, otherwise, the origin plus every
        vertex of the l1 ball (``2k + 1`` starts), keeping the best result.

    Returns
    -------
    LassoResult
    """
    gram = np.asarray(gram, dtype=float)
    cross = np.asarray(cross, dtype=float)
    k = cross.size
    if gram.shape != (k, k):
        raise DimensionMismatch(f"gram has shape {gram.shape}, cross has {k} entries")
    if lam < 0 or not radius > 0:
        raise ValueError("need lam >= 0 and radius > 0")
    if k == 0:
        return LassoResult(np.zeros(0), 0.0, 0, True, 0.0)
    gram = (gram + gram.T) / 2
    eigs = np.linalg.eigvalsh(gram)
    psd = eigs[0] >= -1e-12 * max(1.0, abs(eigs[-1]))
    if not psd and not np.isfinite(radius):
        raise ValueError("an indefinite gram matrix needs a finite radius")

    if lam == 0 and eigs[0] > 0:
        direct = np.linalg.solve(gram, cross)
        if np.abs(direct).sum() <= radius:
            obj = lasso_objective(direct, gram, cross, lam)
            return LassoResult(direct, obj, 0, True, 0.0, [obj] if keep_trace else [])

    lip = max(np.abs(eigs).max(), 1e-12)
    step = 1.0 / lip
    starts = [np.zeros(k) if beta0 is None else project_l1_ball(beta0, radius) if np.isfinite(radius) else np.asarray(beta0, float)]
    if n_starts == "auto":
        n_starts = 1 if psd else 2 * k + 1
    if n_starts > 1 and np.isfinite(radius):
        vertices = [s * radius * np.eye(k)[j] for j in range(k) for s in (1.0, -1.0)]
        starts += vertices[: n_starts - 1]

    best = None
    for start in starts:
        out = _run(gram, cross, lam, radius, start, step, psd, max_iter, ftol, gtol, keep_trace)
        if best is None or out[1] < best[1]:
            best = out
    beta, obj, n_iter, converged, trace = best
    res = LassoResult(beta, obj, n_iter, converged, _stationarity(beta, gram, cross, lam, radius, step), trace)
    if not converged:
        if raise_on_fail:
            raise NotConverged(f"modified Lasso did not converge in {max_iter} iterations")
        logger.debug("modified Lasso hit the iteration cap (%d)", max_iter)
    return res
