"""Edge and neighborhood selection: thresholded graphical Lasso and nodewise regression.

The nodewise routines accept a :class:`~gencov.sampling.Dataset`, a raw
``(n, p)`` array, or a :class:`~gencov.estimation.covariance.FeatureMoments`
(which is how population-level moments are fed in).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import EmptyCandidateSetWarning, FeatureExplosion, InvalidSpec
from ..graph import Graph
from ..sampling import Dataset
from .covariance import FeatureMoments, corrected_covariance_missing, nodewise_pair
from .glasso import graphical_lasso_solve
from .lasso import modified_lasso_solve

__all__ = [
    "PenaltyParams",
    "CorrelationDecayParams",
    "EdgeEstimate",
    "NodewiseResult",
    "default_penalties",
    "default_radius",
    "product_features",
    "threshold_edges",
    "select_glasso",
    "select_nodewise_tree",
    "select_nodewise_general",
    "select_corr_decay",
    "combine_neighborhoods",
    "nodewise_correlations",
    "GraphicalLassoSelector",
    "NodewiseSelector",
]

MAX_FEATURES = 20000


@dataclass(frozen=True)
class PenaltyParams:
    """Regularization ``lam``, threshold ``tau`` and l1-ball ``radius``."""

    lam: float
    tau: float
    radius: float = math.inf

    def __post_init__(self):
        if self.lam < 0 or self.tau < 0 or not self.radius > 0:
            raise InvalidSpec("need lam >= 0, tau >= 0 and radius > 0")


@dataclass(frozen=True)
class CorrelationDecayParams:
    kappa: float
    zeta: float = 1.0
    d: int = 2

    def __post_init__(self):
        if self.kappa <= 0 or self.zeta <= 0 or self.d < 1:
            raise InvalidSpec("kappa, zeta and d must be positive")

    def candidate_bound(self):
        """Upper bound ``d ** (log(4 / kappa) / zeta)`` on the candidate set size."""
        return self.d ** (math.log(4.0 / self.kappa) / self.zeta)


def default_penalties(n, n_features, lam_const=0.5, tau_factor=2.0):
    """``lam = lam_const * sqrt(log k / n)`` and ``tau = tau_factor * lam``."""
    lam = lam_const * math.sqrt(math.log(max(n_features, 2)) / n)
    return lam, tau_factor * lam


def default_radius(pair, d):
    """``b0 * sqrt(d)`` with ``b0`` twice the l1 norm of a ridge fit.

    The ridge term is the smallest shift making the gram matrix safely
    positive definite, so corrupted (indefinite) estimates still give a
    finite plug-in.
    """
    k = pair.cross.size
    if k == 0:
        return 1.0
    eig_min = np.linalg.eigvalsh(pair.gram)[0]
    ridge = max(0.0, -eig_min) + 1e-3 * max(1e-12, np.trace(pair.gram) / k)
    beta = np.linalg.solve(pair.gram + ridge * np.eye(k), pair.cross)
    b0 = 2.0 * max(np.abs(beta).sum(), 1e-8)
    return b0 * math.sqrt(max(d, 1))


@dataclass
class EdgeEstimate:
    """Selected edges with the magnitude of the statistic behind each one."""

    p: int
    edges: frozenset
    weights: dict = field(default_factory=dict)
    neighborhoods: dict | None = None

    def graph(self):
        return Graph(self.p, self.edges)

    def adjacency(self):
        return self.graph().adjacency_matrix()


def threshold_edges(matrix, tau):
    """Off-diagonal pairs with ``|matrix[s, t]| > tau`` (strict)."""
    p = matrix.shape[0]
    edges, weights = set(), {}
    for s, t in itertools.combinations(range(p), 2):
        w = max(abs(matrix[s, t]), abs(matrix[t, s]))
        if w > tau:
            edges.add((s, t))
            weights[(s, t)] = float(w)
    return frozenset(edges), weights


def select_glasso(sigma, lam, tau, **solver_kw):
    """Graphical Lasso on a covariance estimate, then hard thresholding.

    ``sigma`` may be a covariance matrix, a Dataset, or a CovarianceEstimate.
    Returns the edge estimate and the solver result.
    """
    if isinstance(sigma, Dataset):
        sigma = corrected_covariance_missing(sigma, sigma.rho if sigma.mask is not None else 0.0)
    sigma = getattr(sigma, "matrix", sigma)
    res = graphical_lasso_solve(np.asarray(sigma, dtype=float), lam, **solver_kw)
    edges, weights = threshold_edges(res.precision, tau)
    return EdgeEstimate(sigma.shape[0], edges, weights), res


def product_features(vertices, d, singletons=()):
    """Subsets of ``vertices`` of size 1..d in graded lexicographic order.

    ``singletons`` adds extra one-vertex features in front.
    """
    vertices = sorted(vertices)
    feats = [(v,) for v in sorted(set(singletons) - set(vertices))]
    out = []
    for k in range(1, d + 1):
        out.extend(itertools.combinations(vertices, k))
    merged = sorted(set(feats) | set(out), key=lambda a: (len(a), a))
    return merged


@dataclass
class NodewiseResult:
    """Neighborhood estimate for one node with the regression behind it."""

    s: int
    neighborhood: frozenset
    labels: list
    coef: np.ndarray
    lam: float
    tau: float
    radius: float
    candidates: tuple | None = None
    converged: bool = True


def _nodewise(moments, s, features, lam, tau, radius, d, lam_const, tau_factor):
    pair = nodewise_pair(moments, s, features)
    if lam is None or tau is None:
        if not np.isfinite(moments.n):
            raise ValueError("population moments need explicit lam and tau")
        dl, dt = default_penalties(moments.n, len(pair.labels), lam_const, tau_factor)
        lam = dl if lam is None else lam
        tau = dt if tau is None else tau
    if radius == "auto":
        radius = default_radius(pair, d)
    elif radius is None:
        radius = math.inf
    eig_min = np.linalg.eigvalsh(pair.gram)[0] if pair.labels else 0.0
    if eig_min < 0 and not np.isfinite(radius):
        radius = default_radius(pair, d)
    res = modified_lasso_solve(pair.gram, pair.cross, lam, radius)
    keep = np.abs(res.coef) > tau
    nbhd = frozenset(v for lab, k in zip(pair.labels, keep) if k for v in lab)
    return NodewiseResult(s, nbhd, pair.labels, res.coef, lam, tau, radius, converged=res.converged)


def _binary(moments):
    # checked once per data object; nodewise fits call this for every vertex
    if getattr(moments, "_binary_checked", False):
        return
    if not np.isin(moments.values, (0.0, 1.0)).all():
        raise InvalidSpec("nodewise regression is implemented for binary data only")
    moments._binary_checked = True


def select_nodewise_tree(data, s, lam=None, tau=None, radius="auto", d=1, rho=None,
                         lam_const=0.5, tau_factor=2.0):
    """Regress ``x_s`` on the other vertices and keep coefficients above ``tau``.

    ``lam``/``tau`` default to :func:`default_penalties`; ``radius="auto"``
    uses :func:`default_radius` with degree bound ``d``; ``None`` drops the
    ball constraint (only allowed when the gram estimate is PSD).
    """
    moments = FeatureMoments.coerce(data, rho)
    _binary(moments)
    feats = [(t,) for t in range(moments.p) if t != s]
    return _nodewise(moments, s, feats, lam, tau, radius, d, lam_const, tau_factor)


def select_nodewise_general(data, s, d, lam=None, tau=None, radius="auto", rho=None,
                            lam_const=0.5, tau_factor=2.0, max_features=MAX_FEATURES):
    """Regress ``x_s`` on every product of at most ``d`` other vertices.

    Raises
    ------
    FeatureExplosion
        If the number of product features exceeds ``max_features``.
    """
    moments = FeatureMoments.coerce(data, rho)
    _binary(moments)
    others = [t for t in range(moments.p) if t != s]
    count = sum(math.comb(len(others), k) for k in range(1, d + 1))
    if count > max_features:
        raise FeatureExplosion(f"{count} product features exceed the cap of {max_features}")
    feats = product_features(others, d)
    return _nodewise(moments, s, feats, lam, tau, radius, d, lam_const, tau_factor)


def nodewise_correlations(data, rho=None):
    """Pairwise correlations ``r_C(s, t)`` of binary variables as ``4 |cov|``."""
    moments = FeatureMoments.coerce(data, rho)
    cov = moments.covariance([(v,) for v in range(moments.p)])
    r = 4.0 * np.abs(cov)
    np.fill_diagonal(r, 0.0)
    return r


def select_corr_decay(data, s, d, kappa=None, lam=None, tau=None, radius="auto", rho=None,
                      max_candidates=None, lam_const=0.5, tau_factor=2.0,
                      correlations=None, max_features=MAX_FEATURES):
    """Prescreen by correlation, then regress on products within the candidates.

    The candidate set holds vertices with correlation above ``kappa / 2``;
    ``max_candidates`` keeps only the most correlated ones (with
    ``kappa=None`` it is the sole screen). Predictors are all singletons plus
    products of at most ``d`` candidates. An empty candidate set yields an
    empty neighborhood and an :class:`EmptyCandidateSetWarning`.
    """
    moments = FeatureMoments.coerce(data, rho)
    _binary(moments)
    if kappa is None and max_candidates is None:
        raise InvalidSpec("give kappa, max_candidates or both")
    r = nodewise_correlations(moments) if correlations is None else correlations
    others = [t for t in range(moments.p) if t != s]
    cands = [t for t in others if kappa is None or r[s, t] > kappa / 2.0]
    if max_candidates is not None:
        cands = sorted(cands, key=lambda t: (-r[s, t], t))[:max_candidates]
    cands = tuple(sorted(cands))
    if not cands:
        warnings.warn(f"no candidate neighbors for vertex {s}", EmptyCandidateSetWarning, stacklevel=2)
        return NodewiseResult(s, frozenset(), [], np.zeros(0), lam or 0.0, tau or 0.0, math.inf, cands)
    count = len(others) + sum(math.comb(len(cands), k) for k in range(2, d + 1))
    if count > max_features:
        raise FeatureExplosion(f"{count} product features exceed the cap of {max_features}")
    feats = product_features(cands, d, singletons=others)
    res = _nodewise(moments, s, feats, lam, tau, radius, d, lam_const, tau_factor)
    res.candidates = cands
    return res


def combine_neighborhoods(neighborhoods, mode="or", p=None):
    """Symmetrize per-node neighborhoods with an AND or OR rule."""
    mode = mode.lower()
    if mode not in ("and", "or"):
        raise InvalidSpec("mode must be 'and' or 'or'")
    p = p if p is not None else (max(neighborhoods) + 1 if neighborhoods else 0)
    edges = set()
    for s, t in itertools.combinations(range(p), 2):
        in_s = t in neighborhoods.get(s, ())
        in_t = s in neighborhoods.get(t, ())
        if (in_s and in_t) if mode == "and" else (in_s or in_t):
            edges.add((s, t))
    return EdgeEstimate(max(p, 1), frozenset(edges), neighborhoods={k: frozenset(v) for k, v in neighborhoods.items()})


def _coerce_fit_input(X, rho):
    if isinstance(X, Dataset):
        return X.values.astype(float), (X.rho if X.mask is not None else rho)
    return check_array(X, dtype=float), rho


class GraphicalLassoSelector(BaseEstimator):
    """Edge selection by thresholding a graphical Lasso precision estimate.

    Parameters
    ----------
    lam, tau : float or None
        Penalty and threshold. ``None`` uses
        ``lam_const * sqrt(log p / n)`` and ``tau_factor * lam``.
    rho : float
        Erasure probability of zero-filled input (0 for clean data).

    Attributes
    ----------
    covariance_, precision_ : ndarray of shape (p, p)
    edges_ : frozenset of (s, t)
    adjacency_ : bool ndarray of shape (p, p)
    lam_, tau_ : float
    shift_ : float
        Diagonal shift applied when the corrected covariance made the
        objective unbounded.
    """

    def __init__(self, lam=None, tau=None, lam_const=0.5, tau_factor=2.0, rho=0.0, tol=1e-7, max_iter=20000):
        self.lam = lam
        self.tau = tau
        self.lam_const = lam_const
        self.tau_factor = tau_factor
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X, rho = _coerce_fit_input(X, self.rho)
        n, p = X.shape
        dl, dt = default_penalties(n, p, self.lam_const, self.tau_factor)
        self.lam_ = dl if self.lam is None else self.lam
        self.tau_ = (self.tau_factor * self.lam_ if self.lam is not None else dt) if self.tau is None else self.tau
        self.covariance_ = corrected_covariance_missing(X, rho).matrix
        est, res = select_glasso(self.covariance_, self.lam_, self.tau_, tol=self.tol, max_iter=self.max_iter)
        self.precision_ = res.precision
        self.shift_ = res.shift
        self.n_iter_ = res.n_iter
        self.edges_ = est.edges
        self.adjacency_ = est.adjacency()
        self.n_features_in_ = p
        return self

    def get_edges(self):
        check_is_fitted(self)
        return self.edges_


class NodewiseSelector(BaseEstimator):
    """Graph selection by nodewise l1-constrained linear regression.

    Parameters
    ----------
    method : {"tree", "general", "corr_decay"}
        Singleton predictors, all products of at most ``degree`` other
        vertices, or products within a correlation-screened candidate set.
    degree : int
        Degree bound ``d``.
    kappa, max_candidates :
        Candidate screen for ``corr_decay``.
    combine : {"or", "and"}
    rho : float
        Erasure probability of zero-filled input.
    radius : "auto", float or None
        l1-ball radius; see :func:`default_radius`.
    n_jobs : int or None
        Parallel workers over nodes (joblib).

    Attributes
    ----------
    neighborhoods_ : dict
    results_ : dict of NodewiseResult
    edges_ : frozenset
    adjacency_ : bool ndarray
    """

    def __init__(self, method="tree", degree=1, kappa=None, max_candidates=None, lam=None, tau=None,
                 lam_const=0.5, tau_factor=2.0, combine="or", rho=0.0, radius="auto",
                 max_features=MAX_FEATURES, n_jobs=None):
        self.method = method
        self.degree = degree
        self.kappa = kappa
        self.max_candidates = max_candidates
        self.lam = lam
        self.tau = tau
        self.lam_const = lam_const
        self.tau_factor = tau_factor
        self.combine = combine
        self.rho = rho
        self.radius = radius
        self.max_features = max_features
        self.n_jobs = n_jobs

    def _node(self, moments, s, correlations):
        kw = dict(lam=self.lam, tau=self.tau, radius=self.radius, lam_const=self.lam_const,
                  tau_factor=self.tau_factor)
        if self.method == "tree":
            return select_nodewise_tree(moments, s, d=self.degree, **kw)
        if self.method == "general":
            return select_nodewise_general(moments, s, self.degree, max_features=self.max_features, **kw)
        if self.method == "corr_decay":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyCandidateSetWarning)
                return select_corr_decay(moments, s, self.degree, kappa=self.kappa,
                                         max_candidates=self.max_candidates, correlations=correlations,
                                         max_features=self.max_features, **kw)
        raise InvalidSpec(f"unknown method {self.method!r}")

    def fit(self, X, y=None):
        if isinstance(X, FeatureMoments):
            moments = X
        else:
            X, rho = _coerce_fit_input(X, self.rho)
            moments = FeatureMoments(X, rho=rho)
        p = moments.p
        correlations = nodewise_correlations(moments) if self.method == "corr_decay" else None
        if self.n_jobs in (None, 1):
            results = [self._node(moments, s, correlations) for s in range(p)]
        else:
            from joblib import Parallel, delayed

            results = Parallel(n_jobs=self.n_jobs)(delayed(self._node)(moments, s, correlations) for s in range(p))
        self.results_ = {r.s: r for r in results}
        self.neighborhoods_ = {r.s: r.neighborhood for r in results}
        est = combine_neighborhoods(self.neighborhoods_, self.combine, p)
        self.edges_ = est.edges
        self.adjacency_ = est.adjacency()
        self.n_features_in_ = p
        return self

    def get_edges(self):
        check_is_fitted(self)
        return self.edges_
